//! Linear time-invariant diagonal state-space models.
//!
//! A continuous system h'(t) = A h(t) + B x(t), y(t) = C h(t) with diagonal
//! A is discretized under a zero-order hold on x over each step of width
//! delta:
//!
//! ```text
//!   a_bar = exp(delta * a)
//!   b_bar = (delta * a)^-1 (exp(delta * a) - 1) * delta * b
//! ```
//!
//! The same discrete system can then be run as a recurrence (`ssm_scan`) or
//! as a causal convolution with the unrolled kernel (CB̄, CĀB̄, CĀ²B̄, ...)
//! (`ssm_kernel` + `ssm_conv`); both orderings agree to rounding error.

use ssop_autodiff::fft::{irfft, next_pow2, rfft, rfft_len};

use crate::error::{Error, Result};

/// Continuous-time diagonal SSM for one output channel. The state matrix is
/// stored as log(-Re a) so every realizable pole is strictly stable.
#[derive(Debug, Clone)]
pub struct SsmParams {
    a_log_neg: Vec<f64>,
    b: Vec<f64>,
    c: Vec<f64>,
    delta: f64,
}

impl SsmParams {
    pub fn new(a_log_neg: Vec<f64>, b: Vec<f64>, c: Vec<f64>, delta: f64) -> Result<Self> {
        let n = a_log_neg.len();
        if b.len() != n || c.len() != n {
            return Err(Error::Shape(format!(
                "state size mismatch: a={}, b={}, c={}",
                n,
                b.len(),
                c.len()
            )));
        }
        if !delta.is_finite() || delta <= 0.0 {
            return Err(Error::Domain(format!("step size must be positive, got {delta}")));
        }
        Ok(SsmParams {
            a_log_neg,
            b,
            c,
            delta,
        })
    }

    /// Construct from raw negative diagonal entries.
    pub fn from_raw_a(a: &[f64], b: Vec<f64>, c: Vec<f64>, delta: f64) -> Result<Self> {
        if let Some(bad) = a.iter().find(|v| **v >= 0.0 || !v.is_finite()) {
            return Err(Error::Domain(format!(
                "diagonal entries must be negative and finite, got {bad}"
            )));
        }
        SsmParams::new(a.iter().map(|v| (-v).ln()).collect(), b, c, delta)
    }

    pub fn state_size(&self) -> usize {
        self.a_log_neg.len()
    }

    /// Raw diagonal of A (all entries negative).
    pub fn a(&self) -> Vec<f64> {
        self.a_log_neg.iter().map(|v| -v.exp()).collect()
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn c(&self) -> &[f64] {
        &self.c
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn discretize(&self) -> Result<DiscreteSsm> {
        zoh_discretize(&self.a(), &self.b, self.delta)
    }
}

/// One step of the discretized system.
#[derive(Debug, Clone)]
pub struct DiscreteSsm {
    pub a_bar: Vec<f64>,
    pub b_bar: Vec<f64>,
}

/// Below this |delta * a| the exact update is evaluated by series expansion
/// to avoid 0/0; the two branches agree to machine precision at the switch.
pub const ZOH_SERIES_THRESHOLD: f64 = 1e-8;

/// phi1(z) = (exp(z) - 1) / z with a series branch near zero. exp_m1 keeps
/// the quotient cancellation-free down to the series switch.
pub(crate) fn phi1(z: f64) -> f64 {
    if z.abs() < ZOH_SERIES_THRESHOLD {
        1.0 + z / 2.0 + z * z / 6.0
    } else {
        z.exp_m1() / z
    }
}

/// d/dz phi1(z) = (z exp(z) - expm1(z)) / z^2. The numerator is a
/// difference of two nearly equal O(z) terms when z is small, so the series
/// takes over below 1e-4 where it is already accurate to ~1e-14.
pub(crate) fn phi1_deriv(z: f64) -> f64 {
    if z.abs() < 1e-4 {
        0.5 + z / 3.0 + z * z / 8.0 + z * z * z / 30.0
    } else {
        (z * z.exp() - z.exp_m1()) / (z * z)
    }
}

/// Zero-order-hold discretization of a diagonal system.
pub fn zoh_discretize(a: &[f64], b: &[f64], delta: f64) -> Result<DiscreteSsm> {
    if a.len() != b.len() {
        return Err(Error::Shape(format!(
            "diagonal and input map sizes differ: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    if !delta.is_finite() || delta <= 0.0 {
        return Err(Error::Domain(format!("step size must be positive, got {delta}")));
    }
    let mut a_bar = Vec::with_capacity(a.len());
    let mut b_bar = Vec::with_capacity(a.len());
    for (&ai, &bi) in a.iter().zip(b) {
        let z = delta * ai;
        a_bar.push(z.exp());
        b_bar.push(phi1(z) * delta * bi);
    }
    Ok(DiscreteSsm { a_bar, b_bar })
}

/// Per-step discretization for a time-varying step size.
pub fn zoh_discretize_per_step(a: &[f64], b: &[f64], deltas: &[f64]) -> Result<Vec<DiscreteSsm>> {
    deltas.iter().map(|&d| zoh_discretize(a, b, d)).collect()
}

/// Run the discrete recurrence h_t = a_bar ⊙ h_{t-1} + b_bar x_t,
/// y_t = c · h_t over a scalar input sequence. h starts at zero.
pub fn ssm_scan(x: &[f64], d: &DiscreteSsm, c: &[f64]) -> Result<Vec<f64>> {
    Ok(ssm_scan_with_state(x, d, c)?.0)
}

/// Scan that also reports max |h| over the run, for stability checks.
pub fn ssm_scan_with_state(x: &[f64], d: &DiscreteSsm, c: &[f64]) -> Result<(Vec<f64>, f64)> {
    let n = d.a_bar.len();
    if d.b_bar.len() != n || c.len() != n {
        return Err(Error::Shape(format!(
            "state size mismatch: a_bar={}, b_bar={}, c={}",
            n,
            d.b_bar.len(),
            c.len()
        )));
    }
    let mut h = vec![0.0; n];
    let mut y = Vec::with_capacity(x.len());
    let mut max_h = 0.0f64;
    for &xt in x {
        let mut acc = 0.0;
        for i in 0..n {
            h[i] = d.a_bar[i] * h[i] + d.b_bar[i] * xt;
            acc += c[i] * h[i];
            max_h = max_h.max(h[i].abs());
        }
        y.push(acc);
    }
    Ok((y, max_h))
}

/// Unrolled convolution kernel K[k] = c · a_bar^k ⊙ b_bar, k = 0..len.
pub fn ssm_kernel(d: &DiscreteSsm, c: &[f64], len: usize) -> Result<Vec<f64>> {
    let n = d.a_bar.len();
    if d.b_bar.len() != n || c.len() != n {
        return Err(Error::Shape(format!(
            "state size mismatch: a_bar={}, b_bar={}, c={}",
            n,
            d.b_bar.len(),
            c.len()
        )));
    }
    if len == 0 {
        return Err(Error::Domain("kernel length must be positive".into()));
    }
    let mut pow = d.b_bar.clone();
    let mut k = Vec::with_capacity(len);
    for step in 0..len {
        if step > 0 {
            for i in 0..n {
                pow[i] *= d.a_bar[i];
            }
        }
        k.push(c.iter().zip(&pow).map(|(&ci, &pi)| ci * pi).sum());
    }
    Ok(k)
}

/// Causal convolution y_t = sum_{k<=t} K[k] x_{t-k} via a zero-padded FFT
/// of length >= 2L-1 (rounded up to a power of two).
pub fn ssm_conv(x: &[f64], kernel: &[f64]) -> Result<Vec<f64>> {
    if x.len() != kernel.len() {
        return Err(Error::Shape(format!(
            "kernel length {} must match input length {}",
            kernel.len(),
            x.len()
        )));
    }
    let l = x.len();
    if l == 0 {
        return Ok(Vec::new());
    }
    let m = next_pow2(2 * l - 1);
    let xf = rfft(x, m).map_err(Error::from_autodiff)?;
    let kf = rfft(kernel, m).map_err(Error::from_autodiff)?;
    let prod: Vec<_> = xf.iter().zip(&kf).map(|(a, b)| a * b).collect();
    debug_assert_eq!(prod.len(), rfft_len(m));
    let full = irfft(&prod, m).map_err(Error::from_autodiff)?;
    Ok(full[..l].to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zoh_matches_halving_example() {
        // a = -1, delta = ln 2, b = 1: a_bar = 1/2 and b_bar = 1/2.
        let d = zoh_discretize(&[-1.0], &[1.0], std::f64::consts::LN_2).unwrap();
        assert!((d.a_bar[0] - 0.5).abs() < 1e-15);
        assert!((d.b_bar[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn zoh_near_zero_diagonal_limits_to_delta_b() {
        let d = zoh_discretize(&[-1e-300], &[2.0], 0.5).unwrap();
        assert_eq!(d.b_bar[0], 1.0);
        assert_eq!(d.a_bar[0], 1.0);
        // series branch agrees with the exact expm1 form at the same z
        for &z in &[-0.99e-8_f64, -1e-9, -1e-12, 0.99e-8] {
            let exact = z.exp_m1() / z;
            assert!((phi1(z) - exact).abs() < 1e-12, "phi1 branch seam at z={z}");
        }
    }

    #[test]
    fn zoh_rejects_nonpositive_step() {
        assert!(zoh_discretize(&[-1.0], &[1.0], 0.0).is_err());
        assert!(zoh_discretize(&[-1.0], &[1.0], -0.1).is_err());
    }

    #[test]
    fn stable_diagonal_keeps_spectral_radius_below_one() {
        let d = zoh_discretize(&[-0.01, -2.0, -40.0], &[1.0, 1.0, 1.0], 0.73).unwrap();
        for v in d.a_bar {
            assert!(v.abs() < 1.0);
        }
    }

    #[test]
    fn impulse_response_equals_kernel() {
        let p = SsmParams::from_raw_a(&[-0.7, -1.9], vec![0.4, -1.1], vec![0.9, 0.3], 0.31).unwrap();
        let d = p.discretize().unwrap();
        let l = 20;
        let mut impulse = vec![0.0; l];
        impulse[0] = 1.0;
        let y = ssm_scan(&impulse, &d, p.c()).unwrap();
        let k = ssm_kernel(&d, p.c(), l).unwrap();
        for (a, b) in y.iter().zip(&k) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn kernel_requires_positive_length() {
        let d = zoh_discretize(&[-1.0], &[1.0], 0.1).unwrap();
        assert!(ssm_kernel(&d, &[1.0], 0).is_err());
    }

    #[test]
    fn conv_rejects_length_mismatch() {
        assert!(ssm_conv(&[1.0, 2.0], &[1.0]).is_err());
    }

    #[test]
    fn empty_input_scans_to_empty() {
        let d = zoh_discretize(&[-1.0], &[1.0], 0.1).unwrap();
        assert!(ssm_scan(&[], &d, &[1.0]).unwrap().is_empty());
        assert!(ssm_conv(&[], &[]).unwrap().is_empty());
    }
}
