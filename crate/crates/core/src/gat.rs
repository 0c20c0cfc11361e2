//! Dot-product graph attention over a sampled friend tree.
//!
//! Layers run leaf to root. Layer `l` of `L` updates every tree node of
//! depth at most `L - l` from itself and its children, so after `L` layers
//! the root has absorbed information from `L` hops away.

use rand::Rng;

use crate::graphstore::SampledNeighborhood;
use crate::ingest::UserIndex;
use crate::tensor::{Real, Tape, Var};
use crate::{Error, Result};

/// A friend tree plus, for each tree node in level order (root first), the
/// row of the feature table holding its initial representation.
#[derive(Clone, Debug)]
pub struct FeatureGraph<'a> {
    pub tree: &'a SampledNeighborhood,
    pub slots: Vec<usize>,
}

impl<'a> FeatureGraph<'a> {
    pub fn new(tree: &'a SampledNeighborhood, slots: Vec<usize>) -> Result<Self> {
        if slots.len() != tree.num_nodes() {
            return Err(Error::Config(format!(
                "{} feature slots for a tree of {} nodes",
                slots.len(),
                tree.num_nodes()
            )));
        }
        Ok(Self { tree, slots })
    }

    /// Nodes at `depth` (the root alone at depth 0).
    fn width(&self, depth: usize) -> usize {
        match depth {
            0 => 1,
            d => self.tree.layers.get(d - 1).map_or(0, |l| l.len()),
        }
    }
}

/// Root attention weights per layer, self first.
#[derive(Clone, Debug, PartialEq)]
pub struct AttentionTrace {
    pub root: UserIndex,
    /// Sampled friends of the root, in the order of `layers[l][1..]`.
    pub friends: Vec<UserIndex>,
    pub layers: Vec<Vec<f64>>,
}

impl AttentionTrace {
    /// Weight of each distinct friend at `layer`, summed over duplicates.
    pub fn friend_weights(&self, layer: usize) -> Vec<(UserIndex, f64)> {
        let mut out: Vec<(UserIndex, f64)> = Vec::new();
        for (&f, &w) in self.friends.iter().zip(&self.layers[layer][1..]) {
            match out.iter_mut().find(|(g, _)| *g == f) {
                Some((_, acc)) => *acc += w,
                None => out.push((f, w)),
            }
        }
        out
    }
}

#[derive(Clone, Debug)]
pub struct GatOutput {
    /// `1×hidden` root representation after the last layer.
    pub root: Var,
    pub trace: AttentionTrace,
    /// Tree nodes whose features entered the computation.
    pub nodes_touched: usize,
}

/// `softmax(h_u · gᵀ)` over the rows `g` of `group` (self first), `1×m`.
pub fn attention_weights<T: Real>(tape: &mut Tape<'_, T>, h_u: Var, group: Var) -> Result<Var> {
    let logits = tape.matmul_nt(h_u, group)?;
    Ok(tape.softmax_rows(logits)?)
}

/// `ReLU(W Σ_k α_k g_k)` for one node with query `h_u` over `group`.
pub fn propagate_layer<T: Real>(tape: &mut Tape<'_, T>, h_u: Var, group: Var, w: Var) -> Result<Var> {
    let alpha = attention_weights(tape, h_u, group)?;
    let mixed = tape.weighted_sum(alpha, group)?;
    let lin = tape.matmul_nt(mixed, w)?;
    Ok(tape.relu(lin)?)
}

/// Runs `weights.len()` attention layers over `graph`, reading initial
/// node features from the rows of `features`. Dropout is applied to each
/// layer's input in training mode.
pub fn gat_forward<T: Real, R: Rng + ?Sized>(
    tape: &mut Tape<'_, T>,
    features: Var,
    graph: &FeatureGraph<'_>,
    weights: &[Var],
    dropout: f64,
    rng: &mut R,
    train: bool,
) -> Result<GatOutput> {
    let depth = weights.len();
    if depth == 0 {
        return Err(Error::Config("at least one attention layer is required".into()));
    }
    let mut offsets = vec![0usize];
    for d in 0..=depth {
        offsets.push(offsets[d] + graph.width(d));
    }
    let touched = offsets[depth + 1];
    let mut rep = tape.gather_rows(features, &graph.slots[..touched])?;

    let mut trace = AttentionTrace {
        root: graph.tree.root,
        friends: graph.tree.layers.first().map(|l| l.users.clone()).unwrap_or_default(),
        layers: Vec::with_capacity(depth),
    };
    for (l, &w) in weights.iter().enumerate() {
        let top = depth - l - 1;
        let input = tape.dropout(rep, dropout, rng, train)?;
        let mut mixed = Vec::with_capacity(offsets[top + 1]);
        for d in 0..=top {
            for j in 0..graph.width(d) {
                let me = offsets[d] + j;
                let mut rows = vec![me];
                rows.extend(graph.tree.children(d, j).map(|c| offsets[d + 1] + c));
                let query = tape.slice_row(input, me)?;
                let group = tape.gather_rows(input, &rows)?;
                let alpha = attention_weights(tape, query, group)?;
                if d == 0 {
                    trace.layers.push(tape.value(alpha).data().iter().map(|x| x.f64()).collect());
                }
                mixed.push(tape.weighted_sum(alpha, group)?);
            }
        }
        let stacked = if mixed.len() == 1 { mixed[0] } else { tape.concat_rows(&mixed)? };
        let lin = tape.matmul_nt(stacked, w)?;
        rep = tape.relu(lin)?;
    }
    Ok(GatOutput {
        root: rep,
        trace,
        nodes_touched: touched,
    })
}
