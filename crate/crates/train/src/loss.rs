use crate::error::{Error, Result};

/// Mean squared error over two equally sized buffers.
pub fn mse(pred: &[f64], target: &[f64]) -> Result<f64> {
    if pred.len() != target.len() || pred.is_empty() {
        return Err(Error::Config(format!(
            "mse needs equal nonempty buffers, got {} and {}",
            pred.len(),
            target.len()
        )));
    }
    let sum: f64 = pred
        .iter()
        .zip(target)
        .map(|(p, t)| (p - t) * (p - t))
        .sum();
    Ok(sum / pred.len() as f64)
}

/// Relative L2 error.
///
/// With `per_sample` the buffers are split into `n_samples` equal rows and the
/// per-row ratios ||pred - target|| / ||target|| are averaged; otherwise one
/// pooled ratio is computed over the whole buffer. A zero-norm target row is
/// an error rather than an infinity.
pub fn relative_l2(pred: &[f64], target: &[f64], n_samples: usize, per_sample: bool) -> Result<f64> {
    if pred.len() != target.len() || pred.is_empty() {
        return Err(Error::Config(format!(
            "relative_l2 needs equal nonempty buffers, got {} and {}",
            pred.len(),
            target.len()
        )));
    }
    if n_samples == 0 || pred.len() % n_samples != 0 {
        return Err(Error::Config(format!(
            "relative_l2: buffer of {} values does not split into {} samples",
            pred.len(),
            n_samples
        )));
    }
    let row = pred.len() / n_samples;
    let ratio = |p: &[f64], t: &[f64]| -> Result<f64> {
        let num: f64 = p.iter().zip(t).map(|(a, b)| (a - b) * (a - b)).sum();
        let den: f64 = t.iter().map(|b| b * b).sum();
        if den == 0.0 {
            return Err(Error::Config(
                "relative_l2: target has zero norm".to_string(),
            ));
        }
        Ok((num / den).sqrt())
    };
    if per_sample {
        let mut acc = 0.0;
        for i in 0..n_samples {
            acc += ratio(&pred[i * row..(i + 1) * row], &target[i * row..(i + 1) * row])?;
        }
        Ok(acc / n_samples as f64)
    } else {
        ratio(pred, target)
    }
}

/// Relative L2 error resolved per time step, pooled over samples and channels.
///
/// Both buffers hold `n_samples` rows of `len * dim` values in time-major
/// layout. Entry `k` of the result is ||pred(., k, .) - target(., k, .)|| /
/// ||target(., k, .)|| over the entire dataset.
pub fn relative_l2_per_time(
    pred: &[f64],
    target: &[f64],
    n_samples: usize,
    len: usize,
    dim: usize,
) -> Result<Vec<f64>> {
    let expect = n_samples * len * dim;
    if pred.len() != expect || target.len() != expect || expect == 0 {
        return Err(Error::Config(format!(
            "relative_l2_per_time: expected {expect} values ({n_samples} x {len} x {dim}), got {} and {}",
            pred.len(),
            target.len()
        )));
    }
    let mut num = vec![0.0; len];
    let mut den = vec![0.0; len];
    for i in 0..n_samples {
        for k in 0..len {
            let base = (i * len + k) * dim;
            for c in 0..dim {
                let d = pred[base + c] - target[base + c];
                num[k] += d * d;
                den[k] += target[base + c] * target[base + c];
            }
        }
    }
    let mut out = Vec::with_capacity(len);
    for k in 0..len {
        if den[k] == 0.0 {
            return Err(Error::Config(format!(
                "relative_l2_per_time: target has zero norm at time index {k}"
            )));
        }
        out.push((num[k] / den[k]).sqrt());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pooled_and_per_sample_agree_on_one_sample() {
        let t = [1.0, 2.0, 2.0];
        let p = [1.0, 2.0, 5.0];
        let pooled = relative_l2(&p, &t, 1, false).unwrap();
        let per = relative_l2(&p, &t, 1, true).unwrap();
        assert_eq!(pooled, per);
        assert!((pooled - 1.0).abs() < 1e-15);
    }

    #[test]
    fn zero_target_norm_is_rejected() {
        let t = [0.0, 0.0];
        let p = [1.0, 1.0];
        assert!(relative_l2(&p, &t, 1, false).is_err());
        assert!(relative_l2_per_time(&p, &t, 1, 2, 1).is_err());
    }

    #[test]
    fn per_time_resolves_each_index() {
        // Two samples, three times, one channel.
        let t = [1.0, 2.0, 4.0, 1.0, 2.0, 4.0];
        let p = [2.0, 2.0, 4.0, 2.0, 2.0, 4.0];
        let curve = relative_l2_per_time(&p, &t, 2, 3, 1).unwrap();
        assert!((curve[0] - 1.0).abs() < 1e-15);
        assert_eq!(curve[1], 0.0);
        assert_eq!(curve[2], 0.0);
    }
}
