//! Immutable undirected graph in compressed-sparse-row form.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Unordered node pair, stored with the smaller id first.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NodePair {
    u: usize,
    v: usize,
}

impl NodePair {
    pub fn new(a: usize, b: usize) -> Result<Self> {
        if a == b {
            return Err(Error::SelfLoop(a));
        }
        Ok(if a < b {
            NodePair { u: a, v: b }
        } else {
            NodePair { u: b, v: a }
        })
    }

    #[inline]
    pub fn u(&self) -> usize {
        self.u
    }

    #[inline]
    pub fn v(&self) -> usize {
        self.v
    }

    pub fn contains(&self, node: usize) -> bool {
        self.u == node || self.v == node
    }
}

impl std::fmt::Display for NodePair {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({}, {})", self.u, self.v)
    }
}

/// Undirected simple graph over dense node ids `0..num_nodes`.
///
/// Neighbor lists are sorted and duplicate-free; every edge is stored in both
/// endpoint rows, so `offsets[num_nodes] == 2 * num_edges`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Graph {
    offsets: Vec<usize>,
    neighbors: Vec<usize>,
    num_edges: usize,
}

impl Graph {
    /// Builds a graph from possibly duplicated or reversed pairs.
    pub fn build(num_nodes: usize, edges: &[NodePair]) -> Result<Graph> {
        for p in edges {
            check_node(p.v, num_nodes)?;
        }
        let mut degree = vec![0usize; num_nodes];
        for p in edges {
            degree[p.u] += 1;
            degree[p.v] += 1;
        }
        let mut offsets = Vec::with_capacity(num_nodes + 1);
        offsets.push(0);
        for d in &degree {
            offsets.push(offsets.last().unwrap() + d);
        }
        let mut fill = offsets[..num_nodes].to_vec();
        let mut scratch = vec![0usize; offsets[num_nodes]];
        for p in edges {
            scratch[fill[p.u]] = p.v;
            fill[p.u] += 1;
            scratch[fill[p.v]] = p.u;
            fill[p.v] += 1;
        }

        // Sort and dedup each row, compacting in place.
        let mut new_offsets = Vec::with_capacity(num_nodes + 1);
        new_offsets.push(0);
        let mut neighbors = Vec::with_capacity(scratch.len());
        for node in 0..num_nodes {
            let row = &mut scratch[offsets[node]..offsets[node + 1]];
            row.sort_unstable();
            let mut last = usize::MAX;
            for &n in row.iter() {
                if n != last {
                    neighbors.push(n);
                    last = n;
                }
            }
            new_offsets.push(neighbors.len());
        }
        let num_edges = neighbors.len() / 2;
        Ok(Graph {
            offsets: new_offsets,
            neighbors,
            num_edges,
        })
    }

    /// Builds a graph from raw `(a, b)` tuples, rejecting self-loops.
    pub fn from_edges(num_nodes: usize, edges: &[(usize, usize)]) -> Result<Graph> {
        let pairs = edges
            .iter()
            .map(|&(a, b)| {
                check_node(a, num_nodes)?;
                check_node(b, num_nodes)?;
                NodePair::new(a, b)
            })
            .collect::<Result<Vec<_>>>()?;
        Graph::build(num_nodes, &pairs)
    }

    pub fn empty(num_nodes: usize) -> Graph {
        Graph {
            offsets: vec![0; num_nodes + 1],
            neighbors: Vec::new(),
            num_edges: 0,
        }
    }

    #[inline]
    pub fn num_nodes(&self) -> usize {
        self.offsets.len() - 1
    }

    #[inline]
    pub fn num_edges(&self) -> usize {
        self.num_edges
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    pub fn neighbor_array(&self) -> &[usize] {
        &self.neighbors
    }

    /// Sorted neighbor list of `node`. Panics on an out-of-range id.
    #[inline]
    pub fn neighbors(&self, node: usize) -> &[usize] {
        &self.neighbors[self.offsets[node]..self.offsets[node + 1]]
    }

    pub fn try_neighbors(&self, node: usize) -> Result<&[usize]> {
        check_node(node, self.num_nodes())?;
        Ok(self.neighbors(node))
    }

    #[inline]
    pub fn degree(&self, node: usize) -> usize {
        self.offsets[node + 1] - self.offsets[node]
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        if a >= self.num_nodes() || b >= self.num_nodes() {
            return false;
        }
        // search the shorter row
        let (x, y) = if self.degree(a) <= self.degree(b) { (a, b) } else { (b, a) };
        self.neighbors(x).binary_search(&y).is_ok()
    }

    pub fn contains(&self, p: &NodePair) -> bool {
        self.has_edge(p.u, p.v)
    }

    /// Common neighbors of the pair, by linear merge of the two sorted rows.
    pub fn common_neighbors(&self, p: &NodePair) -> Result<Vec<usize>> {
        self.check_pair(p)?;
        let mut out = Vec::new();
        merge_intersect(self.neighbors(p.u), self.neighbors(p.v), |n| out.push(n));
        Ok(out)
    }

    pub fn common_neighbor_count(&self, p: &NodePair) -> Result<usize> {
        self.check_pair(p)?;
        let mut count = 0;
        merge_intersect(self.neighbors(p.u), self.neighbors(p.v), |_| count += 1);
        Ok(count)
    }

    /// `d_u + d_v`.
    pub fn degree_pair(&self, p: &NodePair) -> Result<usize> {
        self.check_pair(p)?;
        Ok(self.degree(p.u) + self.degree(p.v))
    }

    /// Canonical edge list, sorted lexicographically.
    pub fn edges(&self) -> impl Iterator<Item = NodePair> + '_ {
        (0..self.num_nodes()).flat_map(move |u| {
            self.neighbors(u)
                .iter()
                .filter(move |&&v| v > u)
                .map(move |&v| NodePair { u, v })
        })
    }

    /// New graph over the union of this graph's edges and `extra`.
    pub fn merge_edges(&self, extra: &[NodePair]) -> Result<Graph> {
        if extra.is_empty() {
            return Ok(self.clone());
        }
        let mut all: Vec<NodePair> = self.edges().collect();
        all.extend_from_slice(extra);
        Graph::build(self.num_nodes(), &all)
    }

    fn check_pair(&self, p: &NodePair) -> Result<()> {
        check_node(p.v, self.num_nodes())
    }
}

#[inline]
fn check_node(node: usize, num_nodes: usize) -> Result<()> {
    if node >= num_nodes {
        Err(Error::NodeOutOfRange { node, num_nodes })
    } else {
        Ok(())
    }
}

#[inline]
fn merge_intersect(a: &[usize], b: &[usize], mut emit: impl FnMut(usize)) {
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                emit(a[i]);
                i += 1;
                j += 1;
            }
        }
    }
}
