//! Plain fully-connected stack with tanh between layers, shared by the
//! branch/trunk networks.

use rand::Rng;

use ssop_autodiff::{Linear, NodeId, ParamSet, Pass, Result};

pub struct Mlp {
    layers: Vec<Linear>,
}

impl Mlp {
    /// `dims` lists every layer width including input and output, so
    /// `[4, 24, 24, 1]` builds three linear layers.
    pub fn new(ps: &mut ParamSet, rng: &mut impl Rng, name: &str, dims: &[usize]) -> Self {
        assert!(dims.len() >= 2, "an MLP needs at least one layer");
        let layers = dims
            .windows(2)
            .enumerate()
            .map(|(i, w)| Linear::new(ps, rng, &format!("{name}.{i}"), w[0], w[1], true))
            .collect();
        Mlp { layers }
    }

    /// tanh after every layer except the last.
    pub fn apply(&self, p: &mut Pass, x: NodeId) -> Result<NodeId> {
        let mut h = x;
        for (i, layer) in self.layers.iter().enumerate() {
            h = layer.apply(p, h)?;
            if i + 1 < self.layers.len() {
                h = p.graph.tanh(h);
            }
        }
        Ok(h)
    }
}
