//! Classical fixed-step Runge-Kutta integration onto a uniform output
//! grid, with optional substeps between recorded points so the solver
//! error sits well below model-learning error.

use crate::error::{Error, Result};

/// Relative tolerance for the uniform-spacing check on output grids.
const GRID_TOL: f64 = 1e-9;

/// One classical RK4 step of size `h` from `(t, y)`; `rhs(t, y, dy)`
/// writes the derivative. Scratch buffers are caller-provided so tight
/// loops stay allocation-free.
#[allow(clippy::too_many_arguments)]
pub(crate) fn rk4_step<F>(
    rhs: &mut F,
    t: f64,
    h: f64,
    y: &mut [f64],
    k1: &mut [f64],
    k2: &mut [f64],
    k3: &mut [f64],
    k4: &mut [f64],
    tmp: &mut [f64],
) where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let n = y.len();
    rhs(t, y, k1);
    for i in 0..n {
        tmp[i] = y[i] + 0.5 * h * k1[i];
    }
    rhs(t + 0.5 * h, tmp, k2);
    for i in 0..n {
        tmp[i] = y[i] + 0.5 * h * k2[i];
    }
    rhs(t + 0.5 * h, tmp, k3);
    for i in 0..n {
        tmp[i] = y[i] + h * k3[i];
    }
    rhs(t + h, tmp, k4);
    for i in 0..n {
        y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
}

/// Integrates from `(t0, y0)` and returns the state at every grid point.
/// The grid must be strictly increasing and uniformly spaced; the gap
/// from `t0` to the first point may be zero (record the initial state)
/// or one grid step.
pub fn rk4_integrate<F>(
    mut rhs: F,
    y0: &[f64],
    t0: f64,
    grid: &[f64],
    substeps: usize,
) -> Result<Vec<Vec<f64>>>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    if grid.is_empty() {
        return Err(Error::Domain("output grid is empty".into()));
    }
    if substeps == 0 {
        return Err(Error::Domain("substep count must be positive".into()));
    }
    if y0.is_empty() {
        return Err(Error::Domain("state vector is empty".into()));
    }
    let dt = if grid.len() > 1 {
        grid[1] - grid[0]
    } else {
        grid[0] - t0
    };
    if !(dt > 0.0) && grid.len() > 1 {
        return Err(Error::Domain("output grid must be strictly increasing".into()));
    }
    for w in grid.windows(2) {
        if ((w[1] - w[0]) - dt).abs() > GRID_TOL * dt.abs().max(1.0) {
            return Err(Error::Domain("output grid must be uniform".into()));
        }
    }
    let first_gap = grid[0] - t0;
    if first_gap < -GRID_TOL
        || (first_gap.abs() > GRID_TOL && (first_gap - dt).abs() > GRID_TOL * dt.abs().max(1.0))
    {
        return Err(Error::Domain(format!(
            "first grid point {} must sit at t0 or one step after t0 = {t0}",
            grid[0]
        )));
    }

    let n = y0.len();
    let mut y = y0.to_vec();
    let (mut k1, mut k2, mut k3, mut k4, mut tmp) =
        (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let mut out = Vec::with_capacity(grid.len());
    let mut t_prev = t0;
    for (idx, &t_k) in grid.iter().enumerate() {
        let span = t_k - t_prev;
        if span > GRID_TOL * dt.abs().max(1.0) {
            let h = span / substeps as f64;
            for s in 0..substeps {
                let t = t_prev + s as f64 * h;
                rk4_step(&mut rhs, t, h, &mut y, &mut k1, &mut k2, &mut k3, &mut k4, &mut tmp);
            }
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric {
                what: "rk4 trajectory",
                index: idx,
            });
        }
        out.push(y.clone());
        t_prev = t_k;
    }
    Ok(out)
}
