//! Central finite-difference verification of analytic gradients.

use crate::error::Result;
use crate::module::{ParamSet, Pass};
use crate::graph::NodeId;
use crate::tensor::Tensor;

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub max_rel_err: f64,
    pub worst_param: String,
    pub worst_index: usize,
    pub scalars_checked: usize,
}

impl GradCheckReport {
    pub fn assert_within(&self, tol: f64) {
        assert!(
            self.max_rel_err <= tol,
            "gradient mismatch: rel err {:.3e} > {:.3e} at {}[{}]",
            self.max_rel_err,
            tol,
            self.worst_param,
            self.worst_index
        );
    }
}

fn rel_err(a: f64, b: f64) -> f64 {
    let denom = a.abs().max(b.abs()).max(1e-6);
    (a - b).abs() / denom
}

/// Compare tape gradients of a scalar loss against central finite
/// differences with step `h`, across every scalar in `params`.
///
/// `build` must construct the loss from the passed-in `Pass` alone (binding
/// parameters through `Pass::param`), so the same closure serves both the
/// analytic and the perturbed evaluations.
pub fn check_gradients<F>(params: &ParamSet, h: f64, build: F) -> Result<GradCheckReport>
where
    F: Fn(&mut Pass) -> Result<NodeId>,
{
    let mut pass = Pass::new(params);
    let loss = build(&mut pass)?;
    let analytic = pass.param_grads(loss)?;

    let eval = |set: &ParamSet| -> Result<f64> {
        let mut p = Pass::new(set);
        let l = build(&mut p)?;
        p.value(l).item()
    };

    let mut report = GradCheckReport {
        max_rel_err: 0.0,
        worst_param: String::new(),
        worst_index: 0,
        scalars_checked: 0,
    };

    for id in params.ids() {
        let base = params.tensor(id).clone();
        let grad = analytic[params.index_of(id)].clone();
        for i in 0..base.numel() {
            let perturbed = |delta: f64| -> ParamSet {
                let mut data = base.data().to_vec();
                data[i] += delta;
                let mut set = params.clone();
                set.set_tensor(id, Tensor::from_vec(base.shape(), data));
                set
            };
            let fd = (eval(&perturbed(h))? - eval(&perturbed(-h))?) / (2.0 * h);
            let an = grad.as_ref().map(|g| g.data()[i]).unwrap_or(0.0);
            let err = rel_err(an, fd);
            report.scalars_checked += 1;
            if err > report.max_rel_err {
                report.max_rel_err = err;
                report.worst_param = params.name(id).to_string();
                report.worst_index = i;
            }
        }
    }
    Ok(report)
}
