//! Branch/trunk operator network. The branch net embeds the input
//! function's values at a fixed sensor grid; the trunk net embeds each
//! query time; the output at a query time is the inner product of the two
//! latent vectors. Scalar input and output functions only.

use rand::Rng;

use ssop_autodiff::{Module, NodeId, ParamSet, Pass, Tensor};

use crate::error::{Error, Result};
use crate::mlp::Mlp;

#[derive(Debug, Clone)]
pub struct DeepOnetConfig {
    /// Number of sensor values the branch net consumes; fixed at build.
    pub n_sensors: usize,
    /// Widths of the hidden layers shared by both nets.
    pub hidden: Vec<usize>,
    /// Latent width of the final inner product.
    pub latent: usize,
}

impl DeepOnetConfig {
    /// Five-layer nets (four hidden layers) of the given width.
    pub fn new(n_sensors: usize, width: usize) -> Self {
        DeepOnetConfig {
            n_sensors,
            hidden: vec![width; 4],
            latent: width,
        }
    }
}

pub struct DeepOnetModel {
    cfg: DeepOnetConfig,
    ps: ParamSet,
    branch: Mlp,
    trunk: Mlp,
}

impl DeepOnetModel {
    pub fn new(cfg: DeepOnetConfig, rng: &mut impl Rng) -> Result<Self> {
        if cfg.n_sensors == 0 || cfg.latent == 0 {
            return Err(Error::Domain(format!(
                "sensor count and latent width must be positive: {} and {}",
                cfg.n_sensors, cfg.latent
            )));
        }
        let mut ps = ParamSet::new();
        let mut branch_dims = vec![cfg.n_sensors];
        branch_dims.extend_from_slice(&cfg.hidden);
        branch_dims.push(cfg.latent);
        let mut trunk_dims = vec![1];
        trunk_dims.extend_from_slice(&cfg.hidden);
        trunk_dims.push(cfg.latent);
        let branch = Mlp::new(&mut ps, rng, "branch", &branch_dims);
        let trunk = Mlp::new(&mut ps, rng, "trunk", &trunk_dims);
        Ok(DeepOnetModel {
            cfg,
            ps,
            branch,
            trunk,
        })
    }

    pub fn config(&self) -> &DeepOnetConfig {
        &self.cfg
    }
}

impl Module for DeepOnetModel {
    fn params(&self) -> &ParamSet {
        &self.ps
    }

    fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.ps
    }

    /// x: [B, L, 1] sampled on the sensor grid (L must equal the sensor
    /// count), grid: the L query times. Output: [B, L, 1].
    fn forward(&self, p: &mut Pass, x: NodeId, grid: &[f64]) -> ssop_autodiff::Result<NodeId> {
        let shape = p.graph.shape(x).to_vec();
        if shape.len() != 3 || shape[2] != 1 {
            return Err(ssop_autodiff::Error::invalid(
                "deeponet_forward",
                format!("expected [batch, len, 1] scalar input functions, got {shape:?}"),
            ));
        }
        let (bsz, len) = (shape[0], shape[1]);
        if len != self.cfg.n_sensors {
            return Err(ssop_autodiff::Error::invalid(
                "deeponet_forward",
                format!(
                    "input sampled at {len} points but the branch net expects {} sensors",
                    self.cfg.n_sensors
                ),
            ));
        }
        if grid.len() != len {
            return Err(ssop_autodiff::Error::invalid(
                "deeponet_forward",
                format!("got {} query times for {len} outputs", grid.len()),
            ));
        }
        let sensors = p.graph.reshape(x, &[bsz, len])?;
        let b_lat = self.branch.apply(p, sensors)?;
        let times = Tensor::from_vec(&[len, 1], grid.to_vec());
        let tq = p.input(times);
        let t_lat = self.trunk.apply(p, tq)?;
        // [B, latent] x [latent, L]: batched inner products for every query.
        let t_lat_t = p.graph.transpose2d(t_lat)?;
        let y = p.graph.matmul(b_lat, t_lat_t)?;
        p.graph.reshape(y, &[bsz, len, 1])
    }
}
