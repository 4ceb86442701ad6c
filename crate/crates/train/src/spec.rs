use crate::error::{Error, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use ssop_autodiff::{Linear, Module, NodeId, ParamSet, Pass};
use ssop_baselines::{
    AttentionKind, DeepOnetConfig, DeepOnetModel, FnoConfig, FnoModel, LnoConfig, LnoModel,
    RnnKind, RnnModel, TransformerConfig, TransformerModel,
};
use ssop_ssm::{MambaModel, MambaModelConfig};

/// Frame-wise affine readout, the null baseline: no mixing along time.
struct PointwiseLinear {
    ps: ParamSet,
    layer: Linear,
}

impl PointwiseLinear {
    fn new(in_dim: usize, out_dim: usize, rng: &mut impl rand::Rng) -> Self {
        let mut ps = ParamSet::new();
        let layer = Linear::new(&mut ps, rng, "readout", in_dim, out_dim, true);
        PointwiseLinear { ps, layer }
    }
}

impl Module for PointwiseLinear {
    fn params(&self) -> &ParamSet {
        &self.ps
    }

    fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.ps
    }

    fn forward(&self, pass: &mut Pass, x: NodeId, _grid: &[f64]) -> ssop_autodiff::Result<NodeId> {
        self.layer.apply(pass, x)
    }
}

/// Architecture plus hyperparameters, sufficient to build a fresh model.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ModelSpec {
    Linear,
    Mamba { d_model: usize, n_blocks: usize },
    Gru { hidden: usize },
    Lstm { hidden: usize },
    Transformer { d_model: usize, n_blocks: usize, heads: usize, kind: AttentionKind },
    DeepOnet { width: usize },
    Fno { width: usize, n_layers: usize, modes: usize },
    Lno { width: usize, n_layers: usize, poles: usize, modes: usize },
}

impl ModelSpec {
    pub fn name(&self) -> &'static str {
        match self {
            ModelSpec::Linear => "linear",
            ModelSpec::Mamba { .. } => "mamba",
            ModelSpec::Gru { .. } => "gru",
            ModelSpec::Lstm { .. } => "lstm",
            ModelSpec::Transformer { kind: AttentionKind::ScaleDot, .. } => "transformer",
            ModelSpec::Transformer { kind: AttentionKind::Galerkin, .. } => "galerkin",
            ModelSpec::DeepOnet { .. } => "deeponet",
            ModelSpec::Fno { .. } => "fno",
            ModelSpec::Lno { .. } => "lno",
        }
    }

    /// Canonical desk-scale configuration for a model family name.
    pub fn by_name(name: &str) -> Result<Self> {
        Ok(match name {
            "linear" => ModelSpec::Linear,
            "mamba" => ModelSpec::Mamba { d_model: 16, n_blocks: 2 },
            "gru" => ModelSpec::Gru { hidden: 64 },
            "lstm" => ModelSpec::Lstm { hidden: 64 },
            "transformer" => ModelSpec::Transformer {
                d_model: 24,
                n_blocks: 4,
                heads: 4,
                kind: AttentionKind::ScaleDot,
            },
            "galerkin" => ModelSpec::Transformer {
                d_model: 24,
                n_blocks: 4,
                heads: 4,
                kind: AttentionKind::Galerkin,
            },
            "deeponet" => ModelSpec::DeepOnet { width: 24 },
            "fno" => ModelSpec::Fno { width: 32, n_layers: 3, modes: 8 },
            "lno" => ModelSpec::Lno { width: 16, n_layers: 1, poles: 4, modes: 8 },
            other => {
                return Err(Error::Config(format!(
                    "unknown model '{other}' (expected one of mamba, gru, lstm, transformer, \
                     galerkin, deeponet, fno, lno, linear)"
                )))
            }
        })
    }

    /// Whether the architecture consumes sequences of any length. Operator
    /// baselines are tied to the discretization they were built for, so the
    /// length-extrapolation protocol rejects them up front.
    pub fn supports_variable_length(&self) -> bool {
        !matches!(
            self,
            ModelSpec::DeepOnet { .. } | ModelSpec::Fno { .. } | ModelSpec::Lno { .. }
        )
    }

    /// Instantiates the model with seeded initialization. `n_sensors` is the
    /// sequence length of the training discretization; only branch-trunk
    /// networks consume it.
    pub fn build(
        &self,
        in_dim: usize,
        out_dim: usize,
        n_sensors: usize,
        seed: u64,
    ) -> Result<Box<dyn Module>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok(match self {
            ModelSpec::Linear => Box::new(PointwiseLinear::new(in_dim, out_dim, &mut rng)),
            ModelSpec::Mamba { d_model, n_blocks } => {
                let cfg = MambaModelConfig::new(in_dim, out_dim, *d_model, *n_blocks);
                Box::new(MambaModel::new(cfg, &mut rng)?)
            }
            ModelSpec::Gru { hidden } => {
                Box::new(RnnModel::new(RnnKind::Gru, in_dim, out_dim, *hidden, &mut rng)?)
            }
            ModelSpec::Lstm { hidden } => {
                Box::new(RnnModel::new(RnnKind::Lstm, in_dim, out_dim, *hidden, &mut rng)?)
            }
            ModelSpec::Transformer { d_model, n_blocks, heads, kind } => {
                let mut cfg = TransformerConfig::new(in_dim, out_dim, *d_model, *n_blocks);
                cfg.heads = *heads;
                cfg.d_ffn = 4 * *d_model;
                cfg.kind = *kind;
                Box::new(TransformerModel::new(cfg, &mut rng)?)
            }
            ModelSpec::DeepOnet { width } => {
                if in_dim != 1 {
                    return Err(Error::Capability(format!(
                        "deeponet branch net consumes scalar input functions, got {in_dim} channels"
                    )));
                }
                let cfg = DeepOnetConfig::new(n_sensors, *width);
                Box::new(DeepOnetModel::new(cfg, &mut rng)?)
            }
            ModelSpec::Fno { width, n_layers, modes } => {
                let cfg = FnoConfig::new(in_dim, out_dim, *width, *n_layers, *modes);
                Box::new(FnoModel::new(cfg, &mut rng)?)
            }
            ModelSpec::Lno { width, n_layers, poles, modes } => {
                let cfg = LnoConfig::new(in_dim, out_dim, *width, *n_layers, *poles, *modes);
                Box::new(LnoModel::new(cfg, &mut rng)?)
            }
        })
    }
}
