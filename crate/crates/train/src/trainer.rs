use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use ssop_autodiff::{Module, NodeId, Pass, Tensor};
use ssop_dynsys::{PkConstants, TrajectoryDataset};

use crate::error::{Error, Result};
use crate::loss::{mse, relative_l2, relative_l2_per_time};
use crate::optim::{Adam, StepOutcome};
use crate::physics::{pk_residual_node, uniform_step};
use crate::spec::ModelSpec;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    /// Initial learning rate; decays linearly to zero over the whole run.
    pub lr0: f64,
    pub seed: u64,
    /// Weight on the kinetic residual added to the data loss. Zero keeps the
    /// loss purely data-driven. Positive weights require raw output units
    /// (`standardize_outputs = false`) and read the dose rate from input
    /// channel 0.
    pub physics_weight: f64,
    pub standardize_inputs: bool,
    pub standardize_outputs: bool,
    pub shuffle: bool,
    /// Early stop once the epoch train loss falls to or below this value.
    pub target_train_mse: Option<f64>,
    /// Semi-supervised split: only the first `labeled` samples carry
    /// trusted outputs and enter the data term; the rest contribute the
    /// physics residual alone. `None` treats every sample as labeled.
    pub labeled: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 1000,
            batch_size: 128,
            lr0: 1e-3,
            seed: 0,
            physics_weight: 0.0,
            standardize_inputs: true,
            standardize_outputs: true,
            shuffle: true,
            target_train_mse: None,
            labeled: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be positive".to_string()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".to_string()));
        }
        if !(self.lr0 > 0.0) || !self.lr0.is_finite() {
            return Err(Error::Config(format!("learning rate must be positive, got {}", self.lr0)));
        }
        if !(self.physics_weight >= 0.0) || !self.physics_weight.is_finite() {
            return Err(Error::Config(format!(
                "physics weight must be non-negative, got {}",
                self.physics_weight
            )));
        }
        if self.physics_weight > 0.0 && self.standardize_outputs {
            return Err(Error::Config(
                "the kinetic residual is written in raw units; disable output standardization \
                 when physics_weight > 0"
                    .to_string(),
            ));
        }
        if self.labeled == Some(0) {
            return Err(Error::Config("at least one sample must be labeled".to_string()));
        }
        Ok(())
    }
}

/// How a training run ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Completed,
    /// The loss or a gradient went non-finite at this 0-based epoch and the
    /// run stopped there.
    Diverged { epoch: usize },
    /// The epoch loss reached the configured target early.
    ReachedTarget { epoch: usize },
}

impl Outcome {
    pub fn diverged(&self) -> bool {
        matches!(self, Outcome::Diverged { .. })
    }

    pub fn label(&self) -> &'static str {
        match self {
            Outcome::Completed => "Complete",
            Outcome::Diverged { .. } => "Diverge",
            Outcome::ReachedTarget { .. } => "Target",
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunMetrics {
    /// Mean train loss per epoch, evaluated before that epoch's updates are
    /// applied. The last entry may be non-finite when `outcome` is
    /// [`Outcome::Diverged`].
    pub train_loss: Vec<f64>,
    pub final_test_mse: Option<f64>,
    pub final_test_rel_l2: Option<f64>,
    /// Relative L2 at each time index, pooled over the whole test set.
    pub per_time_rel_l2: Option<Vec<f64>>,
    pub wall_seconds: f64,
    pub param_count: usize,
    pub outcome: Outcome,
}

/// Per-channel affine normalization fitted on the training inputs/outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    mean: Vec<f64>,
    scale: Vec<f64>,
}

impl Standardizer {
    pub fn identity(dim: usize) -> Self {
        Standardizer { mean: vec![0.0; dim], scale: vec![1.0; dim] }
    }

    /// Rebuilds a standardizer from stored statistics.
    pub fn from_parts(mean: Vec<f64>, scale: Vec<f64>) -> Result<Self> {
        if mean.is_empty() || mean.len() != scale.len() {
            return Err(Error::Config(format!(
                "standardizer parts disagree: {} means, {} scales",
                mean.len(),
                scale.len()
            )));
        }
        if scale.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
            return Err(Error::Config("standardizer scales must be positive".to_string()));
        }
        Ok(Standardizer { mean, scale })
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn scale(&self) -> &[f64] {
        &self.scale
    }

    /// Fits channel means and standard deviations; channels with spread below
    /// 1e-12 keep unit scale so constants pass through unchanged.
    pub fn fit(data: &[f64], dim: usize) -> Result<Self> {
        if dim == 0 || data.is_empty() || data.len() % dim != 0 {
            return Err(Error::Config(format!(
                "standardizer: {} values do not split into channels of {dim}",
                data.len()
            )));
        }
        let rows = (data.len() / dim) as f64;
        let mut mean = vec![0.0; dim];
        for frame in data.chunks_exact(dim) {
            for (m, v) in mean.iter_mut().zip(frame) {
                *m += v;
            }
        }
        for m in &mut mean {
            *m /= rows;
        }
        let mut var = vec![0.0; dim];
        for frame in data.chunks_exact(dim) {
            for c in 0..dim {
                let d = frame[c] - mean[c];
                var[c] += d * d;
            }
        }
        let scale = var
            .iter()
            .map(|v| {
                let s = (v / rows).sqrt();
                if s < 1e-12 {
                    1.0
                } else {
                    s
                }
            })
            .collect();
        Ok(Standardizer { mean, scale })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn apply(&self, data: &mut [f64]) {
        let dim = self.dim();
        for frame in data.chunks_exact_mut(dim) {
            for c in 0..dim {
                frame[c] = (frame[c] - self.mean[c]) / self.scale[c];
            }
        }
    }

    pub fn invert(&self, data: &mut [f64]) {
        let dim = self.dim();
        for frame in data.chunks_exact_mut(dim) {
            for c in 0..dim {
                frame[c] = frame[c] * self.scale[c] + self.mean[c];
            }
        }
    }
}

/// A built model together with the normalization it was trained under.
pub struct TrainedModel {
    pub spec: ModelSpec,
    pub module: Box<dyn Module>,
    pub in_norm: Standardizer,
    pub out_norm: Standardizer,
    pub out_dim: usize,
}

impl TrainedModel {
    /// Runs the model over `n` sequences of `len` frames, chunking the batch
    /// so long sequences do not hold the whole dataset's graph in memory.
    /// Returns raw-unit predictions of shape [n, len, out_dim].
    pub fn predict(
        &self,
        inputs: &[f64],
        n: usize,
        len: usize,
        in_dim: usize,
        grid: &[f64],
    ) -> Result<Vec<f64>> {
        if inputs.len() != n * len * in_dim || grid.len() != len {
            return Err(Error::Config(format!(
                "predict: got {} values for {n} x {len} x {in_dim} and a grid of {}",
                inputs.len(),
                grid.len()
            )));
        }
        if in_dim != self.in_norm.dim() {
            return Err(Error::Config(format!(
                "predict: model was normalized for {} input channels, got {in_dim}",
                self.in_norm.dim()
            )));
        }
        let per_frame = in_dim.max(self.out_dim).max(16);
        let chunk = (4_194_304 / (len * per_frame)).clamp(1, 128);
        let mut out = Vec::with_capacity(n * len * self.out_dim);
        let mut start = 0;
        while start < n {
            let b = chunk.min(n - start);
            let mut x = inputs[start * len * in_dim..(start + b) * len * in_dim].to_vec();
            self.in_norm.apply(&mut x);
            let mut pass = Pass::new(self.module.params());
            let node = pass.input(Tensor::from_vec(&[b, len, in_dim], x));
            let pred = self.module.forward(&mut pass, node, grid)?;
            let mut y = pass.value(pred).data().to_vec();
            if y.len() != b * len * self.out_dim {
                return Err(Error::Config(format!(
                    "predict: model produced {} values for {b} x {len} x {}",
                    y.len(),
                    self.out_dim
                )));
            }
            self.out_norm.invert(&mut y);
            out.extend_from_slice(&y);
            start += b;
        }
        Ok(out)
    }

    pub fn predict_dataset(&self, ds: &TrajectoryDataset) -> Result<Vec<f64>> {
        self.predict(&ds.inputs, ds.n(), ds.len(), ds.in_dim(), &ds.grid)
    }
}

/// Splits a dataset into the leading 80% for fitting and the trailing 20% for
/// validation.
pub fn split_train_validation(
    ds: &TrajectoryDataset,
) -> Result<(TrajectoryDataset, TrajectoryDataset)> {
    let n = ds.n();
    let cut = n * 8 / 10;
    if cut == 0 || cut == n {
        return Err(Error::Config(format!(
            "cannot split {n} samples 80/20 into nonempty parts"
        )));
    }
    Ok((ds.subset(0..cut)?, ds.subset(cut..n)?))
}

/// Trains a fresh model built from `spec` on `train_set`.
///
/// Deterministic for a fixed config: the seed fixes initialization and the
/// per-epoch shuffle, and every update is sequential. A non-finite loss or
/// gradient records [`Outcome::Diverged`] and stops instead of failing. When
/// `test_set` is given the returned metrics carry final test MSE, relative
/// L2, and the per-time error curve.
pub fn train(
    spec: &ModelSpec,
    train_set: &TrajectoryDataset,
    test_set: Option<&TrajectoryDataset>,
    cfg: &TrainConfig,
) -> Result<(TrainedModel, RunMetrics)> {
    cfg.validate()?;
    let started = Instant::now();
    let (n, len, in_dim, out_dim) = (
        train_set.n(),
        train_set.len(),
        train_set.in_dim(),
        train_set.out_dim(),
    );
    if cfg.physics_weight > 0.0 && out_dim != 2 {
        return Err(Error::Config(format!(
            "the kinetic residual covers two compartments, got {out_dim} output channels"
        )));
    }
    let dt = if cfg.physics_weight > 0.0 {
        uniform_step(&train_set.grid)?
    } else {
        0.0
    };

    let labeled_n = cfg.labeled.unwrap_or(n);
    if labeled_n > n {
        return Err(Error::Config(format!(
            "labeled count {labeled_n} exceeds the {n} available samples"
        )));
    }

    let module = spec.build(in_dim, out_dim, len, cfg.seed)?;
    let in_norm = if cfg.standardize_inputs {
        Standardizer::fit(&train_set.inputs, in_dim)?
    } else {
        Standardizer::identity(in_dim)
    };
    // Output statistics come from trusted rows only.
    let out_norm = if cfg.standardize_outputs {
        Standardizer::fit(&train_set.outputs[..labeled_n * len * out_dim], out_dim)?
    } else {
        Standardizer::identity(out_dim)
    };
    let mut model = TrainedModel {
        spec: spec.clone(),
        module,
        in_norm,
        out_norm,
        out_dim,
    };

    let mut norm_inputs = train_set.inputs.clone();
    model.in_norm.apply(&mut norm_inputs);
    let mut norm_outputs = train_set.outputs.clone();
    model.out_norm.apply(&mut norm_outputs);

    let batches_per_epoch = n.div_ceil(cfg.batch_size);
    let total_steps = cfg.epochs * batches_per_epoch;
    let mut opt = Adam::new(model.module.params(), cfg.lr0, total_steps)?;
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    shuffle_rng.set_stream(1);

    let mut train_loss = Vec::with_capacity(cfg.epochs);
    let mut outcome = Outcome::Completed;

    // Step `s` of an epoch takes proportional slices of both index pools so
    // labeled and unlabeled samples traverse once per epoch together.
    fn even_slice(order: &[usize], s: usize, steps: usize) -> &[usize] {
        let n = order.len();
        &order[s * n / steps..(s + 1) * n / steps]
    }

    let gather = |indices: &[usize], source: &[f64], dim: usize| -> Vec<f64> {
        let mut out = Vec::with_capacity(indices.len() * len * dim);
        for &i in indices {
            out.extend_from_slice(&source[i * len * dim..(i + 1) * len * dim]);
        }
        out
    };
    let pk = PkConstants::default();

    let mut lab_order: Vec<usize> = (0..labeled_n).collect();
    let mut unlab_order: Vec<usize> = (labeled_n..n).collect();
    'epochs: for epoch in 0..cfg.epochs {
        if cfg.shuffle {
            lab_order.shuffle(&mut shuffle_rng);
            if !unlab_order.is_empty() {
                unlab_order.shuffle(&mut shuffle_rng);
            }
        }
        let steps = n.div_ceil(cfg.batch_size);
        let mut epoch_loss = 0.0;
        for s in 0..steps {
            let lab = even_slice(&lab_order, s, steps);
            let unlab = even_slice(&unlab_order, s, steps);
            let rows = lab.len() + unlab.len();
            if rows == 0 {
                continue;
            }
            let mut pass = Pass::new(model.module.params());
            let mut data_loss: Option<NodeId> = None;
            let mut resid: Option<NodeId> = None;
            let side = |pass: &mut Pass,
                            module: &dyn Module,
                            batch: &[usize],
                            with_data: bool|
             -> Result<(Option<NodeId>, Option<NodeId>)> {
                let b = batch.len();
                let x = gather(batch, &norm_inputs, in_dim);
                let node = pass.input(Tensor::from_vec(&[b, len, in_dim], x));
                let pred = module.forward(pass, node, &train_set.grid)?;
                let data = if with_data {
                    let y = gather(batch, &norm_outputs, out_dim);
                    let target = Tensor::from_vec(&[b, len, out_dim], y);
                    Some(ssop_autodiff::mse_against(pass, pred, &target)?)
                } else {
                    None
                };
                let r = if cfg.physics_weight > 0.0 {
                    let mut rate = Vec::with_capacity(b * len);
                    for &i in batch {
                        rate.extend(train_set.input(i).chunks_exact(in_dim).map(|f| f[0]));
                    }
                    let rate_node = pass.input(Tensor::from_vec(&[b, len, 1], rate));
                    let raw = pk_residual_node(pass, pred, rate_node, dt, &pk)?;
                    Some(pass.graph.scale(raw, b as f64 / rows as f64))
                } else {
                    None
                };
                Ok((data, r))
            };
            if !lab.is_empty() {
                let (d, r) = side(&mut pass, model.module.as_ref(), lab, true)?;
                data_loss = d;
                resid = r;
            }
            if !unlab.is_empty() && cfg.physics_weight > 0.0 {
                let (_, r) = side(&mut pass, model.module.as_ref(), unlab, false)?;
                resid = match (resid, r) {
                    (Some(a), Some(b)) => Some(pass.graph.add(a, b)?),
                    (a, b) => a.or(b),
                };
            }
            let loss = match (data_loss, resid) {
                (Some(d), Some(r)) => {
                    let weighted = pass.graph.scale(r, cfg.physics_weight);
                    pass.graph.add(d, weighted)?
                }
                (Some(d), None) => d,
                (None, Some(r)) => pass.graph.scale(r, cfg.physics_weight),
                (None, None) => continue,
            };
            let loss_value = pass.value(loss).item()?;
            epoch_loss += loss_value * rows as f64;
            if !loss_value.is_finite() {
                train_loss.push(f64::NAN);
                outcome = Outcome::Diverged { epoch };
                break 'epochs;
            }
            let grads = pass.param_grads(loss)?;
            if opt.step(model.module.params_mut(), &grads)? == StepOutcome::SkippedNonFinite {
                train_loss.push(f64::NAN);
                outcome = Outcome::Diverged { epoch };
                break 'epochs;
            }
        }
        let epoch_loss = epoch_loss / n as f64;
        train_loss.push(epoch_loss);
        if let Some(target) = cfg.target_train_mse {
            if epoch_loss <= target {
                outcome = Outcome::ReachedTarget { epoch };
                break;
            }
        }
    }

    let mut metrics = RunMetrics {
        train_loss,
        final_test_mse: None,
        final_test_rel_l2: None,
        per_time_rel_l2: None,
        wall_seconds: 0.0,
        param_count: model.module.num_params(),
        outcome,
    };
    if let Some(test) = test_set {
        if !outcome.diverged() {
            let pred = model.predict_dataset(test)?;
            metrics.final_test_mse = Some(mse(&pred, &test.outputs)?);
            metrics.final_test_rel_l2 = Some(relative_l2(&pred, &test.outputs, test.n(), true)?);
            // Undefined when some time slice has zero target norm (e.g. all
            // trajectories start at rest); the scalar metrics still stand.
            metrics.per_time_rel_l2 =
                relative_l2_per_time(&pred, &test.outputs, test.n(), test.len(), test.out_dim())
                    .ok();
        }
    }
    metrics.wall_seconds = started.elapsed().as_secs_f64();
    Ok((model, metrics))
}
