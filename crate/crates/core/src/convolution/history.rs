use super::{ConvolutionEngine, RegionWeights};
use crate::error::{Error, Result};
use crate::weights::WeightTable;

/// Every appended field vector, oldest first.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct HistoryBuffer {
    entries: Vec<Vec<f64>>,
    width: usize,
}

impl HistoryBuffer {
    pub fn new(width: usize) -> Self {
        Self {
            entries: Vec::new(),
            width,
        }
    }

    /// Reserves room for `steps` entries up front.
    pub fn with_capacity(width: usize, steps: usize) -> Self {
        Self {
            entries: Vec::with_capacity(steps),
            width,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn push(&mut self, e: Vec<f64>) -> Result<()> {
        if e.len() != self.width {
            return Err(Error::DimensionMismatch {
                what: "history entry",
                expected: self.width,
                actual: e.len(),
            });
        }
        self.entries.push(e);
        Ok(())
    }

    pub fn get(&self, k: usize) -> Option<&[f64]> {
        self.entries.get(k).map(Vec::as_slice)
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.entries.iter().map(Vec::as_slice)
    }
}

/// `p^n = sum_{k=0}^{n} omega_{n-k} e^k` with one table for every entry.
pub fn direct_convolve(weights: &WeightTable, history: &HistoryBuffer, n: usize) -> Result<Vec<f64>> {
    if history.len() <= n {
        return Err(Error::DimensionMismatch {
            what: "history length",
            expected: n + 1,
            actual: history.len(),
        });
    }
    if weights.len() <= n {
        return Err(Error::InsufficientWeights {
            material: weights.material_name.clone(),
            available: weights.len(),
            required: n,
        });
    }
    let mut out = vec![0.0; history.width()];
    for (k, e) in history.iter().take(n + 1).enumerate() {
        let w = weights.weights[n - k];
        for (o, v) in out.iter_mut().zip(e) {
            *o += w * v;
        }
    }
    Ok(out)
}

/// Direct evaluation over the full stored history: `O(n)` work and memory per step.
#[derive(Debug, Clone)]
pub struct DirectEngine {
    weights: RegionWeights,
    history: HistoryBuffer,
    compact: Vec<f64>,
}

impl DirectEngine {
    pub fn new(weights: RegionWeights) -> Self {
        let width = weights.n_active();
        Self {
            history: HistoryBuffer::new(width),
            compact: vec![0.0; width],
            weights,
        }
    }

    pub fn with_capacity(weights: RegionWeights, steps: usize) -> Self {
        let width = weights.n_active();
        Self {
            history: HistoryBuffer::with_capacity(width, steps),
            compact: vec![0.0; width],
            weights,
        }
    }

    pub fn history(&self) -> &HistoryBuffer {
        &self.history
    }

    pub fn weights(&self) -> &RegionWeights {
        &self.weights
    }
}

impl ConvolutionEngine for DirectEngine {
    fn len(&self) -> usize {
        self.history.len()
    }

    fn push(&mut self, e: &[f64]) -> Result<()> {
        self.weights.check_len("field vector", e)?;
        let mut compact = vec![0.0; self.history.width()];
        self.weights.gather(e, &mut compact);
        self.history.push(compact)
    }

    fn sum_at(&mut self, t: usize, out: &mut [f64]) -> Result<()> {
        self.weights.check_len("output vector", out)?;
        let len = self.history.len();
        if t + 1 < len {
            return Err(Error::InvalidParameter {
                name: "t",
                reason: format!("target {t} precedes the newest entry {}", len.saturating_sub(1)),
            });
        }
        self.compact.iter_mut().for_each(|v| *v = 0.0);
        for seg in &self.weights.segments {
            let table = &seg.weights.weights;
            if len > 0 && table.len() <= t {
                return Err(Error::InsufficientWeights {
                    material: seg.weights.material_name.clone(),
                    available: table.len(),
                    required: t,
                });
            }
            let range = seg.offset..seg.offset + seg.nodes.len();
            let acc = &mut self.compact[range.clone()];
            for (k, e) in self.history.iter().enumerate() {
                let w = table[t - k];
                for (a, v) in acc.iter_mut().zip(&e[range.clone()]) {
                    *a += w * v;
                }
            }
        }
        self.weights.scatter(&self.compact, out);
        Ok(())
    }

    fn stored_vectors(&self) -> usize {
        self.history.len()
    }
}
