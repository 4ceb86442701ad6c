//! Real-input FFT helpers.
//!
//! Conventions: the forward transform is the unnormalized DFT
//! `X[k] = sum_j x[j] exp(-2*pi*i*j*k/n)`; the inverse carries the `1/n`
//! factor. `rfft` keeps the `floor(n/2)+1` non-redundant bins of a real
//! input; `irfft` reconstructs a real signal assuming Hermitian symmetry.

use std::cell::RefCell;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(n: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if inverse {
            p.plan_fft_inverse(n)
        } else {
            p.plan_fft_forward(n)
        }
    })
}

/// Number of non-redundant rfft bins for a length-`n` real signal.
pub fn rfft_len(n: usize) -> usize {
    n / 2 + 1
}

/// Unnormalized complex DFT.
pub fn fft(x: &[Complex64]) -> Vec<Complex64> {
    let mut buf = x.to_vec();
    if buf.len() > 1 {
        plan(buf.len(), false).process(&mut buf);
    }
    buf
}

/// Inverse complex DFT with `1/n` normalization.
pub fn ifft(x: &[Complex64]) -> Vec<Complex64> {
    let n = x.len();
    let mut buf = x.to_vec();
    if n > 1 {
        plan(n, true).process(&mut buf);
    }
    let scale = 1.0 / n.max(1) as f64;
    for v in &mut buf {
        *v *= scale;
    }
    buf
}

/// Forward real FFT of `x` zero-padded (or truncated) to length `n`.
/// Returns the `floor(n/2)+1` leading spectrum bins.
pub fn rfft(x: &[f64], n: usize) -> Result<Vec<Complex64>> {
    if n == 0 {
        return Err(Error::invalid("rfft", "transform length must be positive"));
    }
    let mut buf: Vec<Complex64> = (0..n)
        .map(|i| Complex64::new(x.get(i).copied().unwrap_or(0.0), 0.0))
        .collect();
    if n > 1 {
        plan(n, false).process(&mut buf);
    }
    buf.truncate(rfft_len(n));
    Ok(buf)
}

/// Inverse real FFT: reconstructs `n` real samples from `floor(n/2)+1` bins.
pub fn irfft(spectrum: &[Complex64], n: usize) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::invalid("irfft", "transform length must be positive"));
    }
    let bins = rfft_len(n);
    if spectrum.len() != bins {
        return Err(Error::invalid(
            "irfft",
            format!("expected {} spectrum bins for length {}, got {}", bins, n, spectrum.len()),
        ));
    }
    // Hermitian extension: X[n-k] = conj(X[k]).
    let mut full = vec![Complex64::new(0.0, 0.0); n];
    full[..bins].copy_from_slice(spectrum);
    for k in 1..n - n / 2 {
        if n - k >= bins {
            full[n - k] = spectrum[k].conj();
        }
    }
    let out = ifft(&full);
    Ok(out.into_iter().map(|c| c.re).collect())
}

/// Smallest power of two >= n.
pub fn next_pow2(n: usize) -> usize {
    n.next_power_of_two()
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Direct quadratic-time DFT; the oracle the fast path is checked against.
    fn dft_direct(x: &[f64]) -> Vec<Complex64> {
        let n = x.len();
        (0..n)
            .map(|k| {
                let mut acc = Complex64::new(0.0, 0.0);
                for (j, &v) in x.iter().enumerate() {
                    let ang = -2.0 * std::f64::consts::PI * (j * k) as f64 / n as f64;
                    acc += Complex64::new(ang.cos(), ang.sin()) * v;
                }
                acc
            })
            .collect()
    }

    #[test]
    fn unit_impulse_has_flat_spectrum() {
        let mut x = vec![0.0; 16];
        x[0] = 1.0;
        let s = rfft(&x, 16).unwrap();
        for b in &s {
            assert!((b.re - 1.0).abs() < 1e-12 && b.im.abs() < 1e-12);
        }
    }

    #[test]
    fn constant_signal_concentrates_in_bin_zero() {
        let n = 10;
        let s = rfft(&vec![3.5; n], n).unwrap();
        assert!((s[0].re - 3.5 * n as f64).abs() < 1e-12);
        for b in &s[1..] {
            assert!(b.norm() < 1e-10);
        }
    }

    #[test]
    fn matches_direct_dft_and_parseval() {
        let n = 64;
        let x: Vec<f64> = (0..n)
            .map(|i| (0.3 * i as f64).sin() + 0.25 * (1.7 * i as f64).cos())
            .collect();
        let fast = rfft(&x, n).unwrap();
        let slow = dft_direct(&x);
        for (k, f) in fast.iter().enumerate() {
            assert!((f - slow[k]).norm() < 1e-9, "bin {k} differs");
        }
        // Parseval: sum |x|^2 == (1/n) sum_k |X[k]|^2 over the full spectrum.
        let time: f64 = x.iter().map(|v| v * v).sum();
        let mut freq = fast[0].norm_sqr();
        for (k, f) in fast.iter().enumerate().skip(1) {
            let dup = if n % 2 == 0 && k == n / 2 { 1.0 } else { 2.0 };
            freq += dup * f.norm_sqr();
        }
        assert!((time - freq / n as f64).abs() < 1e-9);
    }

    #[test]
    fn round_trip_identity_all_lengths() {
        for n in 1..=128usize {
            let x: Vec<f64> = (0..n).map(|i| ((i * i) as f64 * 0.01).sin() + 0.1).collect();
            let back = irfft(&rfft(&x, n).unwrap(), n).unwrap();
            for (a, b) in x.iter().zip(back.iter()) {
                assert!((a - b).abs() <= 1e-12, "round trip failed at n={n}");
            }
        }
    }
}
