//! Wengert-tape reverse-mode differentiation.
//!
//! A `Graph` records one forward computation as an append-only list of
//! nodes; node ids are therefore already in topological order. `backward`
//! walks the tape once in reverse from a scalar root, accumulating vector-
//! Jacobian products per node in a fixed order, so repeated runs over the
//! same tape produce bit-identical gradients.

use crate::error::{Error, Result};
use crate::tensor::{zip_map, Tensor};

pub type NodeId = usize;

/// Context handed to an op's backward rule.
pub struct VjpCtx<'a> {
    /// Upstream gradient with the node's output shape.
    pub grad: &'a Tensor,
    /// The node's forward output.
    pub output: &'a Tensor,
    /// Parent values in recorded order.
    pub inputs: &'a [Tensor],
    /// Which parents participate in differentiation.
    pub needs: &'a [bool],
}

/// Backward rule of a recorded operation. Implementations return one
/// gradient per parent (or `None` for parents that need none).
pub trait OpVjp {
    fn name(&self) -> &'static str;
    fn backward(&self, ctx: &VjpCtx) -> Vec<Option<Tensor>>;
    /// Bytes of extra state the op saved for backward, for memory reporting.
    fn saved_bytes(&self) -> usize {
        0
    }
}

struct Node {
    value: Tensor,
    parents: Vec<NodeId>,
    vjp: Option<Box<dyn OpVjp>>,
    /// True if some leaf below this node requires gradients.
    tracked: bool,
}

/// Gradients per node id produced by `Graph::backward`.
pub struct Gradients {
    slots: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn get(&self, id: NodeId) -> Option<&Tensor> {
        self.slots.get(id).and_then(|s| s.as_ref())
    }

    pub fn take(&mut self, id: NodeId) -> Option<Tensor> {
        self.slots.get_mut(id).and_then(|s| s.take())
    }
}

#[derive(Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

impl Graph {
    pub fn new() -> Self {
        Graph { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id].value
    }

    pub fn shape(&self, id: NodeId) -> &[usize] {
        self.nodes[id].value.shape()
    }

    pub fn tracked(&self, id: NodeId) -> bool {
        self.nodes[id].tracked
    }

    /// Record an input node. Gradients flow into it iff the tensor's
    /// `requires_grad` flag is set.
    pub fn leaf(&mut self, t: Tensor) -> NodeId {
        let tracked = t.requires_grad();
        self.nodes.push(Node {
            value: t,
            parents: Vec::new(),
            vjp: None,
            tracked,
        });
        self.nodes.len() - 1
    }

    /// Record an op node. The vjp is dropped when no parent is tracked, so
    /// constant subgraphs cost nothing during backward.
    pub fn push_op(
        &mut self,
        value: Tensor,
        parents: Vec<NodeId>,
        vjp: Box<dyn OpVjp>,
    ) -> NodeId {
        let tracked = parents.iter().any(|&p| self.nodes[p].tracked);
        self.nodes.push(Node {
            value,
            parents,
            vjp: if tracked { Some(vjp) } else { None },
            tracked,
        });
        self.nodes.len() - 1
    }

    /// Approximate resident bytes of the tape: node values plus any state
    /// ops saved for backward.
    pub fn approx_bytes(&self) -> usize {
        self.nodes
            .iter()
            .map(|n| {
                n.value.numel() * 8
                    + n.vjp.as_ref().map(|v| v.saved_bytes()).unwrap_or(0)
            })
            .sum()
    }

    /// Reverse-mode sweep from a scalar root. Returns one gradient slot per
    /// node id; untouched slots are `None`.
    pub fn backward(&self, root: NodeId) -> Result<Gradients> {
        let root_val = self.value(root);
        if root_val.numel() != 1 {
            return Err(Error::NonScalarRoot(root_val.shape().to_vec()));
        }
        let mut slots: Vec<Option<Tensor>> = vec![None; self.nodes.len()];
        slots[root] = Some(Tensor::full(root_val.shape(), 1.0));

        for id in (0..=root).rev() {
            let node = &self.nodes[id];
            let (Some(vjp), Some(grad)) = (&node.vjp, slots[id].clone()) else {
                continue;
            };
            let inputs: Vec<Tensor> = node
                .parents
                .iter()
                .map(|&p| self.nodes[p].value.clone())
                .collect();
            let needs: Vec<bool> = node
                .parents
                .iter()
                .map(|&p| self.nodes[p].tracked)
                .collect();
            let ctx = VjpCtx {
                grad: &grad,
                output: &node.value,
                inputs: &inputs,
                needs: &needs,
            };
            let contribs = vjp.backward(&ctx);
            debug_assert_eq!(contribs.len(), node.parents.len());
            for (slot_idx, contrib) in node.parents.iter().zip(contribs) {
                let Some(c) = contrib else { continue };
                if !self.nodes[*slot_idx].tracked {
                    continue;
                }
                debug_assert_eq!(c.shape(), self.nodes[*slot_idx].value.shape());
                slots[*slot_idx] = Some(match slots[*slot_idx].take() {
                    Some(acc) => zip_map(&acc, &c, |a, b| a + b),
                    None => c,
                });
            }
        }
        Ok(Gradients { slots })
    }
}
