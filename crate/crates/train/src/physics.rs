use crate::error::{Error, Result};
use ssop_autodiff::{NodeId, Pass};
use ssop_dynsys::PkConstants;

const GRID_TOL: f64 = 1e-9;

/// Checks the grid is uniform and returns its step.
pub(crate) fn uniform_step(grid: &[f64]) -> Result<f64> {
    if grid.len() < 2 {
        return Err(Error::Config(
            "physics residual needs at least two grid points".to_string(),
        ));
    }
    let dt = grid[1] - grid[0];
    if !(dt > 0.0) {
        return Err(Error::Config(format!(
            "grid must increase, first step is {dt}"
        )));
    }
    let tol = GRID_TOL * dt.max(1.0);
    for w in grid.windows(2) {
        if ((w[1] - w[0]) - dt).abs() > tol {
            return Err(Error::Config(format!(
                "physics residual requires a uniform grid; found steps {dt} and {}",
                w[1] - w[0]
            )));
        }
    }
    Ok(dt)
}

/// Time derivative by central differences on the interior and one-sided first
/// differences at both endpoints. `series` holds `len` frames of `dim` values.
fn finite_diff_time(series: &[f64], len: usize, dim: usize, dt: f64) -> Vec<f64> {
    let mut out = vec![0.0; series.len()];
    for c in 0..dim {
        out[c] = (series[dim + c] - series[c]) / dt;
        for k in 1..len - 1 {
            out[k * dim + c] = (series[(k + 1) * dim + c] - series[(k - 1) * dim + c]) / (2.0 * dt);
        }
        out[(len - 1) * dim + c] =
            (series[(len - 1) * dim + c] - series[(len - 2) * dim + c]) / dt;
    }
    out
}

/// Mean squared residual of the two-compartment kinetics
///
///   A1' = -(k10 + k12) A1 + k21 A2 + rate(t)
///   A2' =   k12 A1 - k21 A2
///
/// with d/dt evaluated by central differences. `pred` holds `n` sequences of
/// `grid.len()` frames of `[A1, A2]`; `rate` holds the matching scalar dose
/// rate per frame, in amount per unit of grid time.
pub fn physics_residual_pk(
    pred: &[f64],
    rate: &[f64],
    grid: &[f64],
    n: usize,
    pk: &PkConstants,
) -> Result<f64> {
    let len = grid.len();
    if n == 0 || pred.len() != n * len * 2 || rate.len() != n * len {
        return Err(Error::Config(format!(
            "pk residual: expected {n} x {len} x 2 predictions and {n} x {len} rates, got {} and {}",
            pred.len(),
            rate.len()
        )));
    }
    let dt = uniform_step(grid)?;
    let mut acc = 0.0;
    for i in 0..n {
        let seq = &pred[i * len * 2..(i + 1) * len * 2];
        let dose = &rate[i * len..(i + 1) * len];
        let deriv = finite_diff_time(seq, len, 2, dt);
        for k in 0..len {
            let (a1, a2) = (seq[2 * k], seq[2 * k + 1]);
            let r1 = deriv[2 * k] + (pk.k10 + pk.k12) * a1 - pk.k21 * a2 - dose[k];
            let r2 = deriv[2 * k + 1] - pk.k12 * a1 + pk.k21 * a2;
            acc += r1 * r1 + r2 * r2;
        }
    }
    Ok(acc / (n * len * 2) as f64)
}

/// Graph-side version of [`physics_residual_pk`] for use inside a training
/// step: builds the mean squared residual as a differentiable node. `pred`
/// must be shaped [batch, len, 2] and `rate` [batch, len, 1].
pub fn pk_residual_node(
    p: &mut Pass,
    pred: NodeId,
    rate: NodeId,
    dt: f64,
    pk: &PkConstants,
) -> Result<NodeId> {
    let shape = p.graph.shape(pred).to_vec();
    if shape.len() != 3 || shape[2] != 2 {
        return Err(Error::Config(format!(
            "pk residual node expects [batch, len, 2] predictions, got {shape:?}"
        )));
    }
    let deriv = p.graph.central_diff_time(pred, dt)?;
    let a1 = p.graph.slice_last(pred, 0, 1)?;
    let a2 = p.graph.slice_last(pred, 1, 1)?;
    let da1 = p.graph.slice_last(deriv, 0, 1)?;
    let da2 = p.graph.slice_last(deriv, 1, 1)?;

    let loss_a1 = p.graph.scale(a1, pk.k10 + pk.k12);
    let gain_a2 = p.graph.scale(a2, -pk.k21);
    let mut r1 = p.graph.add(da1, loss_a1)?;
    r1 = p.graph.add(r1, gain_a2)?;
    r1 = p.graph.sub(r1, rate)?;

    let gain_a1 = p.graph.scale(a1, -pk.k12);
    let loss_a2 = p.graph.scale(a2, pk.k21);
    let mut r2 = p.graph.add(da2, gain_a1)?;
    r2 = p.graph.add(r2, loss_a2)?;

    let r = p.graph.concat_last(&[r1, r2])?;
    let sq = p.graph.square(r)?;
    Ok(p.graph.mean_all(sq)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn affine_series_has_exact_differences_everywhere() {
        let grid: Vec<f64> = (0..6).map(|k| 0.5 * k as f64).collect();
        let series: Vec<f64> = grid.iter().flat_map(|t| [3.0 * t + 1.0, -2.0 * t]).collect();
        let d = finite_diff_time(&series, 6, 2, 0.5);
        for k in 0..6 {
            assert!((d[2 * k] - 3.0).abs() < 1e-12);
            assert!((d[2 * k + 1] + 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn non_uniform_grids_are_rejected() {
        let grid = [0.0, 0.1, 0.25];
        let pred = vec![0.0; 6];
        let rate = vec![0.0; 3];
        let err = physics_residual_pk(&pred, &rate, &grid, 1, &PkConstants::default());
        assert!(err.is_err());
    }

    #[test]
    fn equilibrium_with_no_dose_has_zero_residual() {
        // Constant state with k12 A1 = k21 A2 and (k10+k12) A1 = k21 A2 + 0
        // only balances when k10 A1 = 0, so use the trivial zero state.
        let grid: Vec<f64> = (0..8).map(|k| 0.1 * k as f64).collect();
        let pred = vec![0.0; 16];
        let rate = vec![0.0; 8];
        let r = physics_residual_pk(&pred, &rate, &grid, 1, &PkConstants::default()).unwrap();
        assert_eq!(r, 0.0);
    }
}
