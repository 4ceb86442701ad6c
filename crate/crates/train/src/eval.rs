use std::time::Instant;

use ssop_autodiff::{mse_against, Pass, Tensor};
use ssop_baselines::AttentionKind;
use ssop_dynsys::{gen_deeponet_suite, SystemConfig, TrajectoryDataset};

use crate::error::{Error, Result};
use crate::loss::{mse, relative_l2, relative_l2_per_time};
use crate::spec::ModelSpec;
use crate::trainer::TrainedModel;

/// Point-in-distribution evaluation summary.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub mse: f64,
    pub rel_l2: f64,
    /// None when some time slice has zero target norm, which makes the
    /// per-time curve undefined there.
    pub per_time_rel_l2: Option<Vec<f64>>,
}

/// Evaluates a trained model on held-out data drawn from the training
/// distribution. Pure: repeated calls return identical numbers.
pub fn eval_interpolation(model: &TrainedModel, test: &TrajectoryDataset) -> Result<EvalReport> {
    let pred = model.predict_dataset(test)?;
    Ok(EvalReport {
        mse: mse(&pred, &test.outputs)?,
        rel_l2: relative_l2(&pred, &test.outputs, test.n(), true)?,
        per_time_rel_l2: relative_l2_per_time(
            &pred,
            &test.outputs,
            test.n(),
            test.len(),
            test.out_dim(),
        )
        .ok(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct HorizonRow {
    pub horizon: f64,
    pub mse: f64,
    pub rel_l2: f64,
}

/// Evaluates one suite per horizon, longest grids included. Only
/// architectures that consume arbitrary-length sequences are eligible; the
/// operator baselines are rejected with a capability error.
pub fn eval_length_extrapolation(
    model: &TrainedModel,
    suites: &[TrajectoryDataset],
) -> Result<Vec<HorizonRow>> {
    if !model.spec.supports_variable_length() {
        return Err(Error::Capability(format!(
            "{} is tied to its training discretization and cannot be queried on longer grids",
            model.spec.name()
        )));
    }
    let mut rows = Vec::with_capacity(suites.len());
    for suite in suites {
        let horizon = match suite.meta("horizon") {
            Some(h) => h.parse::<f64>().map_err(|_| {
                Error::Config(format!("suite metadata horizon={h} is not a number"))
            })?,
            None => *suite.grid.last().expect("datasets hold at least one grid point"),
        };
        let pred = model.predict_dataset(suite)?;
        rows.push(HorizonRow {
            horizon,
            mse: mse(&pred, &suite.outputs)?,
            rel_l2: relative_l2(&pred, &suite.outputs, suite.n(), true)?,
        });
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExSweepRow {
    pub l_test: f64,
    pub rel_l2: f64,
}

/// Error against test sets whose input length scale sweeps away from the
/// training one in both directions. Each column regenerates the suite with
/// the given seed, so the column at the training length scale reproduces the
/// in-distribution test set exactly.
pub fn eval_ex_sweep(
    model: &TrainedModel,
    kind: &SystemConfig,
    n_test: usize,
    seed: u64,
    l_tests: &[f64],
) -> Result<Vec<ExSweepRow>> {
    if l_tests.is_empty() {
        return Err(Error::Config("ex sweep needs at least one test length scale".to_string()));
    }
    let mut rows = Vec::with_capacity(l_tests.len());
    for &l in l_tests {
        let suite = gen_deeponet_suite(kind, n_test, l, seed)?;
        let pred = model.predict_dataset(&suite)?;
        rows.push(ExSweepRow {
            l_test: l,
            rel_l2: relative_l2(&pred, &suite.outputs, suite.n(), true)?,
        });
    }
    Ok(rows)
}

/// Resource ceilings for the long-sequence protocol. A configuration whose
/// predicted attention score storage exceeds `max_graph_bytes` is reported as
/// not applicable instead of being run.
#[derive(Debug, Clone, PartialEq)]
pub struct LongTimeBudget {
    pub max_graph_bytes: usize,
    pub max_seconds: f64,
}

impl Default for LongTimeBudget {
    fn default() -> Self {
        LongTimeBudget { max_graph_bytes: 1_500_000_000, max_seconds: 120.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LongTimeRow {
    pub model: String,
    pub length: usize,
    /// Forward plus backward wall time for a single sequence; `None` means
    /// the configuration was skipped or aborted under the budget.
    pub wall_seconds: Option<f64>,
    /// Resident bytes held by the autodiff graph after the forward pass, an
    /// allocation estimate rather than a device measurement.
    pub graph_bytes: Option<usize>,
    pub rel_l2: Option<f64>,
    pub note: String,
}

/// Scores storage alone for quadratic attention: two [heads, L, L] buffers
/// per block (raw scores and their normalization).
fn predicted_attention_bytes(spec: &ModelSpec, len: usize) -> Option<usize> {
    match spec {
        ModelSpec::Transformer { n_blocks, heads, kind: AttentionKind::ScaleDot, .. } => {
            Some(2 * n_blocks * heads * len * len * std::mem::size_of::<f64>())
        }
        _ => None,
    }
}

/// Times one forward+backward pass per (model, length) pair on freshly
/// initialized models, reporting wall time, graph size, and single-sequence
/// relative L2. Rows over budget come back with `None` entries and a note.
pub fn eval_long_time(
    specs: &[ModelSpec],
    suites: &[TrajectoryDataset],
    budget: &LongTimeBudget,
    seed: u64,
) -> Result<Vec<LongTimeRow>> {
    let mut rows = Vec::with_capacity(specs.len() * suites.len());
    for spec in specs {
        for suite in suites {
            let len = suite.len();
            if let Some(predicted) = predicted_attention_bytes(spec, len) {
                if predicted > budget.max_graph_bytes {
                    rows.push(LongTimeRow {
                        model: spec.name().to_string(),
                        length: len,
                        wall_seconds: None,
                        graph_bytes: None,
                        rel_l2: None,
                        note: format!(
                            "over budget: quadratic attention would hold {predicted} bytes of scores"
                        ),
                    });
                    continue;
                }
            }
            let module = spec.build(suite.in_dim(), suite.out_dim(), len, seed)?;
            let x = Tensor::from_vec(&[1, len, suite.in_dim()], suite.input(0).to_vec());
            let target = Tensor::from_vec(&[1, len, suite.out_dim()], suite.output(0).to_vec());
            let started = Instant::now();
            let mut pass = Pass::new(module.params());
            let node = pass.input(x);
            let pred = module.forward(&mut pass, node, &suite.grid)?;
            let loss = mse_against(&mut pass, pred, &target)?;
            let graph_bytes = pass.graph.approx_bytes();
            let _ = pass.param_grads(loss)?;
            let wall = started.elapsed().as_secs_f64();
            let rel = relative_l2(pass.value(pred).data(), target.data(), 1, true)?;
            let over_time = wall > budget.max_seconds;
            rows.push(LongTimeRow {
                model: spec.name().to_string(),
                length: len,
                wall_seconds: Some(wall),
                graph_bytes: Some(graph_bytes),
                rel_l2: Some(rel),
                note: if over_time { "over time budget".to_string() } else { String::new() },
            });
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn attention_prediction_covers_only_quadratic_kinds() {
        let quad = ModelSpec::Transformer {
            d_model: 8,
            n_blocks: 2,
            heads: 2,
            kind: AttentionKind::ScaleDot,
        };
        assert_eq!(predicted_attention_bytes(&quad, 100), Some(2 * 2 * 2 * 100 * 100 * 8));
        let lin = ModelSpec::Transformer {
            d_model: 8,
            n_blocks: 2,
            heads: 2,
            kind: AttentionKind::Galerkin,
        };
        assert_eq!(predicted_attention_bytes(&lin, 100), None);
        assert_eq!(predicted_attention_bytes(&ModelSpec::Gru { hidden: 4 }, 100), None);
    }
}
