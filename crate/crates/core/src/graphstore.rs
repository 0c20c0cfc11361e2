//! Undirected friendship graph and seeded neighbour sampling.
//!
//! A [`SampledNeighborhood`] is a tree rooted at the target user: every node
//! at depth `l` has `fanouts[l]` children drawn from its own friends, so
//! depth `l + 1` holds `fanouts[0] * ... * fanouts[l]` entries. Children are
//! stored contiguously and grouped by parent.

use std::io::{Read, Write};
use std::ops::Range;

use rand::seq::index;
use rand::Rng;

use crate::ingest::{UserIndex, UserVocab};
use crate::{Error, Result};

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SocialGraph {
    adj: Vec<Vec<UserIndex>>,
    edges: usize,
}

impl SocialGraph {
    /// Graph over `num_users` users and no edges.
    pub fn new(num_users: usize) -> Self {
        Self {
            adj: vec![Vec::new(); num_users],
            edges: 0,
        }
    }

    /// Builds a graph from undirected pairs. Self-loops and repeated pairs
    /// (in either direction) are ignored.
    pub fn from_edges<I>(num_users: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (UserIndex, UserIndex)>,
    {
        let mut adj = vec![Vec::new(); num_users];
        for (a, b) in edges {
            for u in [a, b] {
                if u.idx() >= num_users {
                    return Err(Error::OutOfRange {
                        what: "user",
                        index: u.idx(),
                        len: num_users,
                    });
                }
            }
            if a != b {
                adj[a.idx()].push(b);
                adj[b.idx()].push(a);
            }
        }
        let mut edges = 0;
        for list in &mut adj {
            list.sort_unstable();
            list.dedup();
            edges += list.len();
        }
        Ok(Self { adj, edges: edges / 2 })
    }

    pub fn num_users(&self) -> usize {
        self.adj.len()
    }

    /// Undirected edge count.
    pub fn num_edges(&self) -> usize {
        self.edges
    }

    /// Sorted friends of `u`; empty for users outside the graph.
    pub fn neighbors(&self, u: UserIndex) -> &[UserIndex] {
        self.adj.get(u.idx()).map_or(&[], Vec::as_slice)
    }

    pub fn degree(&self, u: UserIndex) -> usize {
        self.neighbors(u).len()
    }

    pub fn edges(&self) -> impl Iterator<Item = (UserIndex, UserIndex)> + '_ {
        self.adj.iter().enumerate().flat_map(|(a, list)| {
            let a = UserIndex(a as u32);
            list.iter().filter(move |&&b| a < b).map(move |&b| (a, b))
        })
    }

    /// Writes `user_id,friend_id` rows, one per undirected edge.
    pub fn write_edges<W: Write>(&self, mut w: W, users: &UserVocab) -> std::io::Result<()> {
        writeln!(w, "user_id,friend_id")?;
        for (a, b) in self.edges() {
            writeln!(w, "{},{}", users.id(a.0), users.id(b.0))?;
        }
        w.flush()
    }
}

#[derive(Clone, Debug)]
pub struct LoadedGraph {
    pub graph: SocialGraph,
    /// Rows naming a user outside the vocabulary.
    pub dropped: usize,
}

/// Reads `user_id,friend_id` rows. A first row that names unknown users and
/// is not numeric is taken as a header.
pub fn load_edges<R: Read>(reader: R, users: &UserVocab) -> Result<LoadedGraph> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut pairs = Vec::new();
    let mut dropped = 0;
    for (row, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| Error::Format(format!("edges: {e}")))?;
        if record.len() < 2 {
            return Err(Error::Format(format!("edges row {} has {} fields", row + 1, record.len())));
        }
        match (users.index(&record[0]), users.index(&record[1])) {
            (Some(a), Some(b)) => pairs.push((UserIndex(a), UserIndex(b))),
            _ if row == 0 && !(is_numeric(&record[0]) && is_numeric(&record[1])) => {}
            _ => dropped += 1,
        }
    }
    Ok(LoadedGraph {
        graph: SocialGraph::from_edges(users.len(), pairs)?,
        dropped,
    })
}

fn is_numeric(s: &str) -> bool {
    !s.is_empty() && s.bytes().all(|b| b.is_ascii_digit())
}

/// `k` friends of `u`: without replacement when `u` has at least `k`
/// friends, otherwise `k` independent uniform draws; empty when `u` is
/// friendless.
pub fn sample_neighbors<R: Rng + ?Sized>(graph: &SocialGraph, u: UserIndex, k: usize, rng: &mut R) -> Vec<UserIndex> {
    let friends = graph.neighbors(u);
    let n = friends.len();
    if n == 0 || k == 0 {
        Vec::new()
    } else if n >= k {
        index::sample(rng, n, k).into_iter().map(|i| friends[i]).collect()
    } else {
        (0..k).map(|_| friends[rng.gen_range(0..n)]).collect()
    }
}

/// One depth of a [`SampledNeighborhood`].
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TreeLayer {
    pub users: Vec<UserIndex>,
    /// Position of each entry's parent in the previous depth (0 = root for
    /// the first depth).
    pub parents: Vec<usize>,
    offsets: Vec<usize>,
}

impl TreeLayer {
    fn from_groups(groups: Vec<Vec<UserIndex>>) -> Self {
        let mut layer = TreeLayer {
            offsets: vec![0],
            ..Default::default()
        };
        for (p, group) in groups.into_iter().enumerate() {
            layer.parents.extend(std::iter::repeat(p).take(group.len()));
            layer.users.extend(group);
            layer.offsets.push(layer.users.len());
        }
        layer
    }

    pub fn len(&self) -> usize {
        self.users.len()
    }

    pub fn is_empty(&self) -> bool {
        self.users.is_empty()
    }

    /// Entries whose parent is `parent`.
    pub fn children(&self, parent: usize) -> Range<usize> {
        match (self.offsets.get(parent), self.offsets.get(parent + 1)) {
            (Some(&a), Some(&b)) => a..b,
            _ => 0..0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SampledNeighborhood {
    pub root: UserIndex,
    pub fanouts: Vec<usize>,
    pub layers: Vec<TreeLayer>,
}

impl SampledNeighborhood {
    /// A tree from explicit child groups: `levels[d][p]` lists the children
    /// of the `p`-th node at depth `d`.
    pub fn from_levels(root: UserIndex, levels: Vec<Vec<Vec<UserIndex>>>) -> Result<Self> {
        let mut width = 1;
        let mut layers = Vec::with_capacity(levels.len());
        for (d, groups) in levels.into_iter().enumerate() {
            if groups.len() != width {
                return Err(Error::Config(format!(
                    "depth {d} has {} child groups for {width} parents",
                    groups.len()
                )));
            }
            let layer = TreeLayer::from_groups(groups);
            width = layer.len();
            layers.push(layer);
        }
        Ok(Self {
            root,
            fanouts: Vec::new(),
            layers,
        })
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    /// Tree nodes including the root.
    pub fn num_nodes(&self) -> usize {
        1 + self.layers.iter().map(TreeLayer::len).sum::<usize>()
    }

    /// Users of the tree level by level, root first.
    pub fn all_users(&self) -> impl Iterator<Item = UserIndex> + '_ {
        std::iter::once(self.root).chain(self.layers.iter().flat_map(|l| l.users.iter().copied()))
    }

    /// Children of the node at position `idx` of depth `depth` (the root is
    /// depth 0, position 0) as a range into depth `depth + 1`.
    pub fn children(&self, depth: usize, idx: usize) -> Range<usize> {
        self.layers.get(depth).map_or(0..0, |l| l.children(idx))
    }

    /// Whether the root has no sampled friends.
    pub fn is_isolated(&self) -> bool {
        self.layers.first().map_or(true, TreeLayer::is_empty)
    }
}

/// Samples the friend tree of `u`: `fanouts[0]` friends of `u`, then
/// `fanouts[1]` friends of each of those, and so on. Deeper levels may
/// revisit `u` itself.
pub fn build_neighborhood<R: Rng + ?Sized>(
    graph: &SocialGraph,
    u: UserIndex,
    fanouts: &[usize],
    rng: &mut R,
) -> SampledNeighborhood {
    expand(u, fanouts.to_vec(), fanouts.len(), |v, depth| {
        sample_neighbors(graph, v, fanouts[depth], rng)
    })
}

/// The unsampled tree of depth `depth`: every node's children are all of its
/// friends in sorted order.
pub fn build_full_neighborhood(graph: &SocialGraph, u: UserIndex, depth: usize) -> SampledNeighborhood {
    expand(u, Vec::new(), depth, |v, _| graph.neighbors(v).to_vec())
}

fn expand(
    root: UserIndex,
    fanouts: Vec<usize>,
    depth: usize,
    mut children_of: impl FnMut(UserIndex, usize) -> Vec<UserIndex>,
) -> SampledNeighborhood {
    let mut layers = Vec::with_capacity(depth);
    let mut frontier = vec![root];
    for d in 0..depth {
        let groups: Vec<Vec<UserIndex>> = frontier.iter().map(|&v| children_of(v, d)).collect();
        let layer = TreeLayer::from_groups(groups);
        frontier = layer.users.clone();
        layers.push(layer);
    }
    SampledNeighborhood { root, fanouts, layers }
}
