//! Discrete convolution `p^n = sum_k omega_{n-k} e^k` over a stored field history.
//!
//! Engines work on the dispersive nodes only. Nodes whose material has no poles
//! have identically zero weights and are skipped; engine outputs are zero there.

mod focq;
mod history;

pub use focq::{BlockLadder, ContourQuadrature, FocqConfig, FocqEngine};
pub use history::{direct_convolve, DirectEngine, HistoryBuffer};

use std::collections::BTreeMap;

use crate::discretization::DiscreteOperators;
use crate::error::{Error, Result};
use crate::material::MaterialModel;
use crate::weights::WeightTable;

/// Weight table and node set of one dispersive material region.
#[derive(Debug, Clone)]
pub struct RegionSegment {
    pub model: MaterialModel,
    pub weights: WeightTable,
    /// Global node indices, ascending.
    pub nodes: Vec<usize>,
    /// Position of the first node of this segment in compact storage.
    pub offset: usize,
}

/// Per-region weights laid out over the compact vector of dispersive nodes.
#[derive(Debug, Clone)]
pub struct RegionWeights {
    pub n_nodes: usize,
    pub segments: Vec<RegionSegment>,
}

impl RegionWeights {
    /// One segment per dispersive region of `ops`, using `tables[name]`.
    pub fn from_operators(ops: &DiscreteOperators, tables: &BTreeMap<String, WeightTable>) -> Result<Self> {
        let mut segments = Vec::new();
        let mut offset = 0;
        for (region, name) in ops.regions.names.iter().enumerate() {
            let model = &ops.materials[region];
            if !model.is_dispersive() {
                continue;
            }
            let weights = tables.get(name).ok_or_else(|| Error::UnknownMaterial(name.clone()))?;
            let nodes = ops.regions.nodes_of(region);
            let len = nodes.len();
            segments.push(RegionSegment {
                model: model.clone(),
                weights: weights.clone(),
                nodes,
                offset,
            });
            offset += len;
        }
        Ok(Self {
            n_nodes: ops.n_nodes(),
            segments,
        })
    }

    /// A single dispersive node, for scalar histories.
    pub fn scalar(model: MaterialModel, weights: WeightTable) -> Self {
        Self {
            n_nodes: 1,
            segments: vec![RegionSegment {
                model,
                weights,
                nodes: vec![0],
                offset: 0,
            }],
        }
    }

    pub fn n_active(&self) -> usize {
        self.segments.iter().map(|s| s.nodes.len()).sum()
    }

    pub fn tau_step(&self) -> Option<f64> {
        self.segments.first().map(|s| s.weights.tau_step)
    }

    /// Shortest weight table over all segments.
    pub fn min_table_len(&self) -> usize {
        self.segments.iter().map(|s| s.weights.len()).min().unwrap_or(usize::MAX)
    }

    pub fn gather(&self, full: &[f64], compact: &mut [f64]) {
        for seg in &self.segments {
            for (i, &node) in seg.nodes.iter().enumerate() {
                compact[seg.offset + i] = full[node];
            }
        }
    }

    /// Writes compact values into `full` and zeros every other node.
    pub fn scatter(&self, compact: &[f64], full: &mut [f64]) {
        full.iter_mut().for_each(|v| *v = 0.0);
        for seg in &self.segments {
            for (i, &node) in seg.nodes.iter().enumerate() {
                full[node] = compact[seg.offset + i];
            }
        }
    }

    /// `omega_0` per node; zero on non-dispersive nodes.
    pub fn leading_weights(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.n_nodes];
        for seg in &self.segments {
            let w0 = seg.weights.weights.first().copied().unwrap_or(0.0);
            for &node in &seg.nodes {
                out[node] = w0;
            }
        }
        out
    }

    fn check_len(&self, what: &'static str, v: &[f64]) -> Result<()> {
        if v.len() != self.n_nodes {
            return Err(Error::DimensionMismatch {
                what,
                expected: self.n_nodes,
                actual: v.len(),
            });
        }
        Ok(())
    }
}

/// Stateful evaluator of the convolution sum over an appended field history.
pub trait ConvolutionEngine: Send {
    /// Number of appended field vectors.
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Appends `e^{len}` (full nodal vector).
    fn push(&mut self, e: &[f64]) -> Result<()>;

    /// `sum_{k < len} omega_{t-k} e^k` for `t` in `{len - 1, len}`.
    fn sum_at(&mut self, t: usize, out: &mut [f64]) -> Result<()>;

    /// Memory term for the next step: the sum at `t = len`, without the unknown `e^{len}`.
    fn history_sum(&mut self, out: &mut [f64]) -> Result<()> {
        let t = self.len();
        self.sum_at(t, out)
    }

    /// Current polarization `p^{len-1}`.
    fn query(&mut self, out: &mut [f64]) -> Result<()> {
        if self.is_empty() {
            return Err(Error::NotComputable("convolution of an empty history"));
        }
        let t = self.len() - 1;
        self.sum_at(t, out)
    }

    /// Resident vectors of dispersive-node length (complex vectors count twice).
    fn stored_vectors(&self) -> usize;

    /// Set once an approximation exceeded its configured tolerance.
    fn degraded(&self) -> bool {
        false
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EngineKind {
    Direct,
    Focq,
}
