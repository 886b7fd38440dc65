//! Datasets: loading, splitting, synthetic generation, downsampling and
//! persistence.

pub mod checkpoint;
pub mod io;
pub mod split;
pub mod synthetic;

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::encoder::Features;
use crate::error::{Error, Result};
use crate::graph::{Graph, NodePair};

pub use split::{downsample_edges, sample_non_edges, split_dataset, SplitConfig};

/// A node pair with its binary link label.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LabeledPair {
    pub pair: NodePair,
    pub label: bool,
}

impl LabeledPair {
    pub fn positive(pair: NodePair) -> Self {
        LabeledPair { pair, label: true }
    }

    pub fn negative(pair: NodePair) -> Self {
        LabeledPair { pair, label: false }
    }

    #[inline]
    pub fn y(&self) -> f64 {
        if self.label {
            1.0
        } else {
            0.0
        }
    }

    /// Index of the class center this pair is pulled toward.
    #[inline]
    pub fn class(&self) -> usize {
        self.label as usize
    }
}

/// A split link-prediction dataset.
///
/// `graph` is the message-passing graph built from the training positives
/// only. `full_graph` holds every observed edge and is used to certify
/// negatives as true non-edges.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub graph: Graph,
    pub full_graph: Graph,
    pub features: Features,
    pub train: Vec<LabeledPair>,
    pub val: Vec<LabeledPair>,
    pub test: Vec<LabeledPair>,
}

impl Dataset {
    pub fn num_nodes(&self) -> usize {
        self.graph.num_nodes()
    }

    pub fn train_positives(&self) -> impl Iterator<Item = NodePair> + '_ {
        self.train.iter().filter(|p| p.label).map(|p| p.pair)
    }

    pub fn num_train_negatives(&self) -> usize {
        self.train.iter().filter(|p| !p.label).count()
    }

    /// Positive pairs of the validation and test splits.
    pub fn held_out_positives(&self) -> HashSet<NodePair> {
        self.val
            .iter()
            .chain(self.test.iter())
            .filter(|p| p.label)
            .map(|p| p.pair)
            .collect()
    }

    /// Checks every structural invariant of a split dataset.
    ///
    /// `graph` may be a superset of the training positives (after
    /// augmentation) but must never contain a held-out positive.
    pub fn validate(&self) -> Result<()> {
        let n = self.full_graph.num_nodes();
        if self.graph.num_nodes() != n {
            return Err(Error::InvalidInput("graph node counts differ".into()));
        }
        if self.features.rows() != n {
            return Err(Error::Shape(format!(
                "feature rows {} != node count {}",
                self.features.rows(),
                n
            )));
        }
        for (name, split) in [("train", &self.train), ("val", &self.val), ("test", &self.test)] {
            let pos = split.iter().filter(|p| p.label).count();
            if pos != split.len() - pos {
                return Err(Error::InvalidInput(format!(
                    "{name} split is unbalanced: {pos} positives of {}",
                    split.len()
                )));
            }
            for p in split {
                if p.pair.v() >= n {
                    return Err(Error::NodeOutOfRange { node: p.pair.v(), num_nodes: n });
                }
                if p.label && !self.full_graph.contains(&p.pair) {
                    return Err(Error::InvalidInput(format!("{name} positive {} is not an edge", p.pair)));
                }
                if !p.label && self.full_graph.contains(&p.pair) {
                    return Err(Error::InvalidInput(format!("{name} negative {} is an edge", p.pair)));
                }
            }
        }
        for p in self.train_positives() {
            if !self.graph.contains(&p) {
                return Err(Error::InvalidInput(format!("train positive {p} missing from graph")));
            }
        }
        for p in self.held_out_positives() {
            if self.graph.contains(&p) {
                return Err(Error::InvalidInput(format!("held-out positive {p} leaks into graph")));
            }
        }
        Ok(())
    }
}
