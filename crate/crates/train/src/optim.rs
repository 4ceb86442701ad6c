use crate::error::{Error, Result};
use ssop_autodiff::{ParamSet, Tensor};

/// What a single optimizer step did.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepOutcome {
    /// Parameters were updated.
    Applied,
    /// A gradient contained a non-finite value; nothing was mutated.
    SkippedNonFinite,
}

/// Adam with a learning rate that decays linearly to zero over the run.
///
/// The rate used at 0-based step `t` out of `total_steps` is
/// `lr0 * (1 - t / total_steps)`, so the final step still applies a strictly
/// positive rate of `lr0 / total_steps`.
pub struct Adam {
    lr0: f64,
    total_steps: usize,
    taken: usize,
    beta1: f64,
    beta2: f64,
    eps: f64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(params: &ParamSet, lr0: f64, total_steps: usize) -> Result<Self> {
        if !(lr0 > 0.0) || !lr0.is_finite() {
            return Err(Error::Config(format!("adam: lr0 must be positive, got {lr0}")));
        }
        if total_steps == 0 {
            return Err(Error::Config("adam: total_steps must be positive".to_string()));
        }
        let mut m = Vec::with_capacity(params.len());
        let mut v = Vec::with_capacity(params.len());
        for id in params.ids() {
            let n = params.tensor(id).numel();
            m.push(vec![0.0; n]);
            v.push(vec![0.0; n]);
        }
        Ok(Self {
            lr0,
            total_steps,
            taken: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m,
            v,
        })
    }

    /// Learning rate the next call to [`step`](Self::step) will apply.
    pub fn current_lr(&self) -> f64 {
        let t = self.taken.min(self.total_steps) as f64;
        self.lr0 * (1.0 - t / self.total_steps as f64)
    }

    pub fn steps_taken(&self) -> usize {
        self.taken
    }

    /// Applies one Adam update. `grads` must be aligned with the parameter
    /// set's index order; `None` entries leave that parameter and its moments
    /// untouched. If any gradient holds a non-finite value the whole step is
    /// rejected before any state changes.
    pub fn step(&mut self, params: &mut ParamSet, grads: &[Option<Tensor>]) -> Result<StepOutcome> {
        if grads.len() != params.len() {
            return Err(Error::Config(format!(
                "adam: {} gradients for {} parameters",
                grads.len(),
                params.len()
            )));
        }
        for g in grads.iter().flatten() {
            if !g.is_finite() {
                return Ok(StepOutcome::SkippedNonFinite);
            }
        }
        let lr = self.current_lr();
        let t = (self.taken + 1) as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        let ids: Vec<_> = params.ids().collect();
        for (idx, id) in ids.iter().enumerate() {
            let Some(grad) = &grads[idx] else { continue };
            let cur = params.tensor(*id);
            if grad.shape() != cur.shape() {
                return Err(Error::Config(format!(
                    "adam: gradient shape {:?} does not match parameter {:?}",
                    grad.shape(),
                    cur.shape()
                )));
            }
            let mut data = cur.data().to_vec();
            let shape = cur.shape().to_vec();
            let m = &mut self.m[idx];
            let v = &mut self.v[idx];
            for (k, g) in grad.data().iter().enumerate() {
                m[k] = self.beta1 * m[k] + (1.0 - self.beta1) * g;
                v[k] = self.beta2 * v[k] + (1.0 - self.beta2) * g * g;
                let mh = m[k] / bc1;
                let vh = v[k] / bc2;
                data[k] -= lr * mh / (vh.sqrt() + self.eps);
            }
            params.set_tensor(*id, Tensor::from_vec(&shape, data));
        }
        self.taken += 1;
        Ok(StepOutcome::Applied)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_param(x: f64) -> ParamSet {
        let mut p = ParamSet::new();
        p.push("x", Tensor::from_vec(&[1], vec![x]));
        p
    }

    #[test]
    fn first_step_moves_by_roughly_the_learning_rate() {
        let mut p = one_param(0.0);
        let mut opt = Adam::new(&p, 1e-3, 1000).unwrap();
        let g = vec![Some(Tensor::from_vec(&[1], vec![1.0]))];
        assert_eq!(opt.step(&mut p, &g).unwrap(), StepOutcome::Applied);
        let id = p.ids().next().unwrap();
        let x = p.tensor(id).data()[0];
        assert!((x + 1e-3).abs() < 1e-6, "got {x}");
    }

    #[test]
    fn non_finite_gradients_leave_parameters_untouched() {
        let mut p = one_param(0.5);
        let mut opt = Adam::new(&p, 1e-3, 10).unwrap();
        let g = vec![Some(Tensor::from_vec(&[1], vec![f64::NAN]))];
        assert_eq!(opt.step(&mut p, &g).unwrap(), StepOutcome::SkippedNonFinite);
        let id = p.ids().next().unwrap();
        assert_eq!(p.tensor(id).data()[0], 0.5);
        assert_eq!(opt.steps_taken(), 0);
    }

    #[test]
    fn schedule_reaches_lr0_over_total_at_the_last_step() {
        let p = one_param(0.0);
        let mut opt = Adam::new(&p, 1e-2, 4).unwrap();
        let mut p = p;
        let g = vec![Some(Tensor::from_vec(&[1], vec![1.0]))];
        let mut last = f64::INFINITY;
        for _ in 0..4 {
            last = opt.current_lr();
            opt.step(&mut p, &g).unwrap();
        }
        assert!((last - 1e-2 / 4.0).abs() < 1e-15);
        assert_eq!(opt.current_lr(), 0.0);
    }
}
