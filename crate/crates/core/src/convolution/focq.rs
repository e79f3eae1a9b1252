//! Fast and oblivious evaluation of the convolution sum.
//!
//! Lags are split into exponentially growing ranges. With block size `P = B^l`
//! and boundary `b_l(t) = P * max(0, floor(t / P) - 1)`, level `l` sums the
//! sources `m` in `[b_{l+1}(t), b_l(t))`, whose lags `t - m` lie in
//! `[P + 1, 2BP - 1]`. Sources at or after `b_{l0}(t)` are summed exactly from a
//! short buffer of raw field vectors (the head).
//!
//! On a level the weights are replaced by a contour integral of the kernel,
//!
//! ```text
//! omega_k ~ 2 Re sum_j w_j eps0 chi(z_j / tau) (1 + R_j) R_j^(k-1) / (2 - z_j),
//! R_j = (2 + z_j) / (2 - z_j),
//! ```
//!
//! on a Talbot contour scaled to the level's lag range. Each aligned block of
//! `P` sources then needs one complex state per contour node,
//! `y_j = sum_m R_j^(ref - m) g^m`, which is what the ladder stores instead of
//! the field history. Blocks that a level will only ever use together are
//! merged, so each level holds a bounded number of states.
//!
//! Every level has to see its sources from the first step, so the number of
//! levels is fixed from a planned horizon. Targets beyond it are still
//! evaluated, with the top level stretched over longer lags, and flag the
//! engine as degraded.

use std::collections::VecDeque;
use std::f64::consts::PI;

use num_complex::Complex64;

use super::{ConvolutionEngine, RegionWeights};
use crate::error::{Error, Result};
use crate::material::{MaterialModel, PhysicalConstants};

/// Talbot contour shape parameters (Weideman's optimized values).
const TALBOT_SHIFT: f64 = -0.6122;
const TALBOT_COT_SCALE: f64 = 0.5017;
const TALBOT_COT_FREQ: f64 = 0.6407;
const TALBOT_IMAG: f64 = 0.2645;

/// The contour of a level is scaled to `SPAN_FACTOR * 2 B P` steps.
const SPAN_FACTOR: f64 = 0.85;

/// Lags sampled per level for the accuracy estimate.
const ESTIMATE_SAMPLES: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FocqConfig {
    /// Growth factor `B >= 2` of consecutive lag ranges.
    pub base: usize,
    /// Contour nodes in the upper half plane (`K_q`); the full contour has `2 K_q`.
    pub contour_nodes: usize,
    /// Admissible summed weight error relative to `eps0 chi(0)`.
    pub tolerance: f64,
    /// The exact head covers at least `2 * head_block` lags.
    pub head_block: usize,
    /// Largest target step the level structure is planned for.
    pub horizon: usize,
}

impl Default for FocqConfig {
    fn default() -> Self {
        Self {
            base: 2,
            contour_nodes: 24,
            tolerance: 1e-6,
            head_block: 16,
            horizon: 1 << 14,
        }
    }
}

impl FocqConfig {
    fn validate(&self) -> Result<()> {
        let bad = |name: &'static str, reason: String| Err(Error::InvalidParameter { name, reason });
        if self.base < 2 {
            return bad("base", format!("must be at least 2 (got {})", self.base));
        }
        if self.contour_nodes == 0 {
            return bad("contour_nodes", "must be positive".into());
        }
        if self.head_block == 0 {
            return bad("head_block", "must be positive".into());
        }
        if !(self.tolerance > 0.0 && self.tolerance.is_finite()) {
            return bad("tolerance", format!("{} is not a positive number", self.tolerance));
        }
        Ok(())
    }

    /// Block size of the lowest approximated level.
    pub fn first_block(&self) -> usize {
        let mut p = 1usize;
        while p < self.head_block {
            p = p.saturating_mul(self.base);
        }
        p
    }

    /// Block sizes of all levels needed to reach `horizon`.
    pub fn level_blocks(&self) -> Vec<usize> {
        let mut blocks = Vec::new();
        let mut p = self.first_block();
        if 2 * p > self.horizon {
            return blocks;
        }
        loop {
            blocks.push(p);
            let next = p.saturating_mul(self.base);
            if next.saturating_mul(2) > self.horizon || next == usize::MAX {
                return blocks;
            }
            p = next;
        }
    }
}

/// Quadrature on a Talbot contour in the scaled variable `z = tau * lambda`.
#[derive(Debug, Clone, PartialEq)]
pub struct ContourQuadrature {
    /// Nodes in the upper half plane.
    pub nodes: Vec<Complex64>,
    /// Weights including the `1 / (2 pi i)` of the Cauchy integral.
    pub weights: Vec<Complex64>,
}

impl ContourQuadrature {
    /// Midpoint rule with `2 * half_nodes` points on the contour for lags around `span` steps.
    pub fn talbot(half_nodes: usize, span: f64) -> Self {
        let full = 2.0 * half_nodes as f64;
        let scale = full / span;
        let mut nodes = Vec::with_capacity(half_nodes);
        let mut weights = Vec::with_capacity(half_nodes);
        for j in 0..half_nodes {
            let theta = (j as f64 + 0.5) * PI / half_nodes as f64;
            let arg = TALBOT_COT_FREQ * theta;
            let cot = arg.cos() / arg.sin();
            let z = scale * Complex64::new(TALBOT_SHIFT + TALBOT_COT_SCALE * theta * cot, TALBOT_IMAG * theta);
            let dz = scale
                * Complex64::new(
                    TALBOT_COT_SCALE * (cot - arg / arg.sin().powi(2)),
                    TALBOT_IMAG,
                );
            nodes.push(z);
            weights.push(dz / (Complex64::i() * full));
        }
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Per-node amplification `R_j` of one trapezoidal step.
    pub fn ratios(&self) -> Vec<Complex64> {
        self.nodes.iter().map(|z| (2.0 + z) / (2.0 - z)).collect()
    }

    /// Coefficients `kappa_j` with `omega_k ~ 2 Re sum_j kappa_j R_j^(k-1)` for `k >= 1`.
    pub fn coefficients(
        &self,
        model: &MaterialModel,
        constants: &PhysicalConstants,
        tau_step: f64,
    ) -> Result<Vec<Complex64>> {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&z, &w)| {
                let denom = 2.0 - z;
                if denom.norm() < 1e-3 {
                    return Err(Error::InvalidParameter {
                        name: "contour_nodes",
                        reason: format!("contour node {z} is too close to the trapezoidal pole z = 2"),
                    });
                }
                let kernel = constants.eps0 * model.chi_hat(z / tau_step)?;
                Ok(w * kernel * (1.0 + (2.0 + z) / denom) / denom)
            })
            .collect()
    }

    /// Approximate weight at `lag >= 1`.
    pub fn weight(&self, coefficients: &[Complex64], lag: usize) -> f64 {
        let ratios = self.ratios();
        2.0 * coefficients
            .iter()
            .zip(&ratios)
            .map(|(k, r)| (k * r.powi(lag as i32 - 1)).re)
            .sum::<f64>()
    }
}

#[derive(Debug, Clone)]
struct Block {
    start: usize,
    /// Exclusive.
    end: usize,
    /// Source index the states are referred to: `y_j = sum_m R_j^(reference - m) g^m`.
    reference: usize,
    /// `states[j * width + i]` for contour node `j` and compact node `i`.
    states: Vec<Complex64>,
}

#[derive(Debug, Clone)]
struct Level {
    block: usize,
    ratios: Vec<Complex64>,
    /// Per segment, per contour node.
    coefficients: Vec<Vec<Complex64>>,
    blocks: VecDeque<Block>,
}

#[derive(Debug, Clone)]
struct SegmentSpan {
    offset: usize,
    len: usize,
    /// Exact weights for the head lags.
    head_weights: Vec<f64>,
}

/// Logarithmic-memory state for the convolution over compact (dispersive-node) vectors.
#[derive(Debug, Clone)]
pub struct BlockLadder {
    config: FocqConfig,
    width: usize,
    segments: Vec<SegmentSpan>,
    levels: Vec<Level>,
    head: VecDeque<(usize, Vec<f64>)>,
    len: usize,
    estimated_error: f64,
    degraded: bool,
    scratch: Vec<f64>,
}

impl BlockLadder {
    pub fn new(weights: &RegionWeights, constants: &PhysicalConstants, config: FocqConfig) -> Result<Self> {
        config.validate()?;
        let tau = weights.tau_step().unwrap_or(1.0);
        let blocks = config.level_blocks();
        // the head must reach every lag below the first level, or every planned lag without levels
        let head_lags = if blocks.is_empty() {
            config.horizon + 1
        } else {
            2 * blocks[0]
        };

        let mut segments = Vec::with_capacity(weights.segments.len());
        for seg in &weights.segments {
            if seg.weights.len() < head_lags {
                return Err(Error::InsufficientWeights {
                    material: seg.weights.material_name.clone(),
                    available: seg.weights.len(),
                    required: head_lags - 1,
                });
            }
            segments.push(SegmentSpan {
                offset: seg.offset,
                len: seg.nodes.len(),
                head_weights: seg.weights.weights[..head_lags].to_vec(),
            });
        }

        let mut levels = Vec::with_capacity(blocks.len());
        let mut estimated_error = 0.0;
        for &p in &blocks {
            let span = SPAN_FACTOR * 2.0 * (config.base * p) as f64;
            let quad = ContourQuadrature::talbot(config.contour_nodes, span);
            let fine = ContourQuadrature::talbot(2 * config.contour_nodes, span);
            let mut coefficients = Vec::with_capacity(weights.segments.len());
            let mut level_error: f64 = 0.0;
            for seg in &weights.segments {
                let coarse = quad.coefficients(&seg.model, constants, tau)?;
                let reference = fine.coefficients(&seg.model, constants, tau)?;
                let scale = (constants.eps0 * seg.model.static_susceptibility()).max(seg.weights.max_abs());
                let err = sampled_range_error(&quad, &coarse, &fine, &reference, p, config.base);
                level_error = level_error.max(err / scale);
                coefficients.push(coarse);
            }
            estimated_error += level_error;
            levels.push(Level {
                block: p,
                ratios: quad.ratios(),
                coefficients,
                blocks: VecDeque::new(),
            });
        }

        let width = weights.n_active();
        Ok(Self {
            degraded: estimated_error > config.tolerance,
            config,
            width,
            segments,
            levels,
            head: VecDeque::new(),
            len: 0,
            estimated_error,
            scratch: vec![0.0; width],
        })
    }

    pub fn config(&self) -> &FocqConfig {
        &self.config
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn level_count(&self) -> usize {
        self.levels.len()
    }

    /// Summed weight error over all levels, relative to `eps0 chi(0)`, estimated by doubling the node count.
    pub fn estimated_error(&self) -> f64 {
        self.estimated_error
    }

    pub fn degraded(&self) -> bool {
        self.degraded
    }

    /// Raw head vectors plus two real vectors per complex block state.
    pub fn stored_vectors(&self) -> usize {
        let states: usize = self.levels.iter().map(|l| l.blocks.len()).sum();
        self.head.len() + 2 * self.config.contour_nodes * states
    }

    fn boundary(&self, level: usize, t: usize) -> usize {
        match self.levels.get(level) {
            Some(l) => l.block * (t / l.block).saturating_sub(1),
            None => 0,
        }
    }

    pub fn append(&mut self, g: &[f64]) -> Result<()> {
        if g.len() != self.width {
            return Err(Error::DimensionMismatch {
                what: "ladder input",
                expected: self.width,
                actual: g.len(),
            });
        }
        let n = self.len;
        let width = self.width;
        let kq = self.config.contour_nodes;
        for level in &mut self.levels {
            let open = level.blocks.back().is_some_and(|b| n < b.end);
            if !open {
                let start = n - n % level.block;
                level.blocks.push_back(Block {
                    start,
                    end: start + level.block,
                    reference: n,
                    states: vec![Complex64::new(0.0, 0.0); kq * width],
                });
            }
            let block = level.blocks.back_mut().expect("open block");
            let shift = (n - block.reference) as i32;
            for (j, r) in level.ratios.iter().enumerate() {
                let factor = r.powi(shift);
                let row = &mut block.states[j * width..(j + 1) * width];
                for (y, v) in row.iter_mut().zip(g) {
                    *y = *y * factor + v;
                }
            }
            block.reference = n;
        }
        self.head.push_back((n, g.to_vec()));
        self.len += 1;
        self.compact(n);
        if self.top_exceeded(n + 1) {
            self.degraded = true;
        }
        Ok(())
    }

    /// Whether target `t` needs lags the top level was not planned for.
    fn top_exceeded(&self, t: usize) -> bool {
        match self.levels.last() {
            Some(top) => t / (top.block * self.config.base) >= 2,
            None => t > self.config.horizon,
        }
    }

    /// Drops or merges everything no target `>= n` can use separately.
    fn compact(&mut self, n: usize) {
        let head_start = self.boundary(0, n);
        while self.head.front().is_some_and(|(m, _)| *m < head_start) {
            self.head.pop_front();
        }
        let bounds: Vec<(usize, usize)> = (0..self.levels.len())
            .map(|i| (self.boundary(i + 1, n), self.boundary(i, n)))
            .collect();
        let base = self.config.base;
        let width = self.width;
        for (level, (lo, hi)) in self.levels.iter_mut().zip(bounds) {
            while level.blocks.front().is_some_and(|b| b.end <= lo) {
                level.blocks.pop_front();
            }
            let superblock = level.block * base;
            let mut merged: VecDeque<Block> = VecDeque::with_capacity(level.blocks.len());
            for block in level.blocks.drain(..) {
                let mergeable = block.end <= hi;
                match merged.back_mut() {
                    Some(prev) if mergeable && prev.end <= hi && prev.start / superblock == block.start / superblock => {
                        let shift = (block.reference - prev.reference) as i32;
                        for (j, r) in level.ratios.iter().enumerate() {
                            let factor = r.powi(shift);
                            let dst = &mut prev.states[j * width..(j + 1) * width];
                            let src = &block.states[j * width..(j + 1) * width];
                            for (a, b) in dst.iter_mut().zip(src) {
                                *a = *a * factor + b;
                            }
                        }
                        prev.end = block.end;
                        prev.reference = block.reference;
                    }
                    _ => merged.push_back(block),
                }
            }
            level.blocks = merged;
        }
    }

    /// `sum_{m < len} omega_{t-m} g^m` for `t` in `{len - 1, len}` into a compact vector.
    pub fn sum_at(&self, t: usize, out: &mut [f64]) -> Result<()> {
        if self.len == 0 || t + 1 < self.len || t > self.len {
            return Err(Error::InvalidParameter {
                name: "t",
                reason: format!("target {t} is not the current or next step of a ladder with {} entries", self.len),
            });
        }
        if out.len() != self.width {
            return Err(Error::DimensionMismatch {
                what: "ladder output",
                expected: self.width,
                actual: out.len(),
            });
        }
        out.iter_mut().for_each(|v| *v = 0.0);

        let head_start = self.boundary(0, t);
        for (m, g) in self.head.iter().filter(|(m, _)| *m >= head_start) {
            let lag = t - m;
            for seg in &self.segments {
                let w = *seg.head_weights.get(lag).ok_or_else(|| Error::InsufficientWeights {
                    material: String::from("head"),
                    available: seg.head_weights.len(),
                    required: lag,
                })?;
                let range = seg.offset..seg.offset + seg.len;
                for (o, v) in out[range.clone()].iter_mut().zip(&g[range]) {
                    *o += w * v;
                }
            }
        }

        let width = self.width;
        for (i, level) in self.levels.iter().enumerate() {
            let lo = self.boundary(i + 1, t);
            let hi = self.boundary(i, t);
            for block in level.blocks.iter().filter(|b| b.start >= lo && b.end <= hi) {
                let shift = (t - 1 - block.reference) as i32;
                let powers: Vec<Complex64> = level.ratios.iter().map(|r| r.powi(shift)).collect();
                for (s, seg) in self.segments.iter().enumerate() {
                    let range = seg.offset..seg.offset + seg.len;
                    for (j, (kappa, power)) in level.coefficients[s].iter().zip(&powers).enumerate() {
                        let c = 2.0 * kappa * power;
                        let row = &block.states[j * width + seg.offset..j * width + seg.offset + seg.len];
                        for (o, y) in out[range.clone()].iter_mut().zip(row) {
                            *o += c.re * y.re - c.im * y.im;
                        }
                    }
                }
            }
            debug_assert!(level
                .blocks
                .iter()
                .all(|b| (b.start >= lo && b.end <= hi) || b.end <= lo || b.start >= hi));
        }
        Ok(())
    }

    /// Current convolution value `p^{len-1}`.
    pub fn query(&self, out: &mut [f64]) -> Result<()> {
        if self.len == 0 {
            return Err(Error::NotComputable("convolution of an empty history"));
        }
        self.sum_at(self.len - 1, out)
    }
}

/// Summed absolute weight difference over the level's lag range, from equally spaced samples.
fn sampled_range_error(
    quad: &ContourQuadrature,
    coarse: &[Complex64],
    fine_quad: &ContourQuadrature,
    fine: &[Complex64],
    block: usize,
    base: usize,
) -> f64 {
    let first = block + 1;
    let last = 2 * base * block - 1;
    let count = last - first + 1;
    let samples = ESTIMATE_SAMPLES.min(count);
    let mut total = 0.0;
    for s in 0..samples {
        let lag = first + s * (count - 1) / (samples - 1).max(1);
        total += (quad.weight(coarse, lag) - fine_quad.weight(fine, lag)).abs();
    }
    total * count as f64 / samples as f64
}

/// Convolution engine over full nodal vectors backed by a [`BlockLadder`].
#[derive(Debug, Clone)]
pub struct FocqEngine {
    weights: RegionWeights,
    ladder: BlockLadder,
    compact: Vec<f64>,
}

impl FocqEngine {
    pub fn new(weights: RegionWeights, constants: &PhysicalConstants, config: FocqConfig) -> Result<Self> {
        let ladder = BlockLadder::new(&weights, constants, config)?;
        Ok(Self {
            compact: vec![0.0; weights.n_active()],
            weights,
            ladder,
        })
    }

    pub fn ladder(&self) -> &BlockLadder {
        &self.ladder
    }
}

impl ConvolutionEngine for FocqEngine {
    fn len(&self) -> usize {
        self.ladder.len()
    }

    fn push(&mut self, e: &[f64]) -> Result<()> {
        self.weights.check_len("field vector", e)?;
        self.weights.gather(e, &mut self.compact);
        let compact = std::mem::take(&mut self.compact);
        let result = self.ladder.append(&compact);
        self.compact = compact;
        result
    }

    fn sum_at(&mut self, t: usize, out: &mut [f64]) -> Result<()> {
        self.weights.check_len("output vector", out)?;
        if self.ladder.is_empty() {
            out.iter_mut().for_each(|v| *v = 0.0);
            return Ok(());
        }
        let mut compact = std::mem::take(&mut self.ladder.scratch);
        let result = self.ladder.sum_at(t, &mut compact);
        self.weights.scatter(&compact, out);
        self.ladder.scratch = compact;
        result
    }

    fn stored_vectors(&self) -> usize {
        self.ladder.stored_vectors()
    }

    fn degraded(&self) -> bool {
        self.ladder.degraded()
    }
}

#[cfg(test)]
mod tests {
    use super::super::{direct_convolve, HistoryBuffer};
    use super::*;
    use crate::material::DebyePole;
    use crate::weights::weights_debye_model;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const TAU: f64 = 2.9316e-12;

    /// Exact block recurrence for Debye kernels: each pole's weights are geometric,
    /// so the convolution obeys a per-pole two-term recursion. Test-only oracle.
    struct DebyeBlockOracle {
        poles: Vec<(f64, f64, f64)>,
        state: Vec<f64>,
        prev: f64,
    }

    impl DebyeBlockOracle {
        fn new(model: &MaterialModel, c: &PhysicalConstants, tau: f64) -> Self {
            let poles = model
                .poles
                .iter()
                .map(|p| {
                    let r = p.tau_relax / tau;
                    ((2.0 * r - 1.0) / (2.0 * r + 1.0), c.eps0 * p.delta_eps / (2.0 * r + 1.0), 0.0)
                })
                .collect::<Vec<_>>();
            let n = poles.len();
            Self {
                poles,
                state: vec![0.0; n],
                prev: 0.0,
            }
        }

        fn push(&mut self, e: f64) -> f64 {
            let mut total = 0.0;
            for ((a, b, _), p) in self.poles.iter().zip(self.state.iter_mut()) {
                *p = a * *p + b * (e + self.prev);
                total += *p;
            }
            self.prev = e;
            total
        }
    }

    fn tissue() -> MaterialModel {
        MaterialModel::five_pole_tissue()
    }

    fn history(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect()
    }

    fn scalar_weights(model: &MaterialModel, n: usize) -> RegionWeights {
        let c = PhysicalConstants::default();
        RegionWeights::scalar(model.clone(), weights_debye_model(model, &c, TAU, n).unwrap())
    }

    #[test]
    fn contour_reproduces_single_pole_weights() {
        let c = PhysicalConstants { eps0: 1.0, mu0: 1.0 };
        let model = MaterialModel::new("p", 0.0, vec![DebyePole::new(1.0, 5.0)]).unwrap();
        let exact = weights_debye_model(&model, &c, 1.0, 200).unwrap();
        let quad = ContourQuadrature::talbot(24, SPAN_FACTOR * 2.0 * 64.0);
        let kappa = quad.coefficients(&model, &c, 1.0).unwrap();
        for lag in 33..128 {
            let err = (quad.weight(&kappa, lag) - exact.weights[lag]).abs();
            assert!(err <= 1e-9 * exact.weights[1], "lag {lag}: {err}");
        }
    }

    #[test]
    fn oracle_agrees_with_direct() {
        let model = tissue();
        let e = history(300, 1);
        let w = scalar_weights(&model, 300);
        let mut oracle = DebyeBlockOracle::new(&model, &PhysicalConstants::default(), TAU);
        let mut hist = HistoryBuffer::new(1);
        for (n, &v) in e.iter().enumerate() {
            let p = oracle.push(v);
            hist.push(vec![v]).unwrap();
            let d = direct_convolve(&w.segments[0].weights, &hist, n).unwrap()[0];
            assert!((p - d).abs() <= 1e-12 * d.abs().max(1e-12), "{n}");
        }
    }

    #[test]
    fn level_layout() {
        let cfg = FocqConfig {
            horizon: 4096,
            ..FocqConfig::default()
        };
        assert_eq!(cfg.first_block(), 16);
        assert_eq!(cfg.level_blocks(), vec![16, 32, 64, 128, 256, 512, 1024, 2048]);
        let b4 = FocqConfig { base: 4, ..cfg };
        assert_eq!(b4.level_blocks(), vec![16, 64, 256, 1024]);
        let tiny = FocqConfig { horizon: 31, ..cfg };
        assert!(tiny.level_blocks().is_empty());
        assert!(FocqConfig { base: 1, ..cfg }.validate().is_err());
    }

    #[test]
    fn exact_while_head_covers_history() {
        let model = tissue();
        let e = history(31, 2);
        let w = scalar_weights(&model, 64);
        let table = w.segments[0].weights.clone();
        let mut engine = FocqEngine::new(w, &PhysicalConstants::default(), FocqConfig::default()).unwrap();
        let mut hist = HistoryBuffer::new(1);
        let mut out = [0.0];
        for (n, &v) in e.iter().enumerate() {
            engine.push(&[v]).unwrap();
            hist.push(vec![v]).unwrap();
            engine.query(&mut out).unwrap();
            let d = direct_convolve(&table, &hist, n).unwrap()[0];
            assert!((out[0] - d).abs() <= 1e-15 * d.abs(), "{n}: {} vs {d}", out[0]);
        }
    }

    #[test]
    fn tissue_history_matches_oracle() {
        let model = tissue();
        let n = 4096;
        let e = history(n, 4);
        let c = PhysicalConstants::default();
        for base in [2, 4] {
            let cfg = FocqConfig {
                base,
                horizon: n,
                ..FocqConfig::default()
            };
            let mut engine = FocqEngine::new(scalar_weights(&model, 64), &c, cfg).unwrap();
            let mut oracle = DebyeBlockOracle::new(&model, &c, TAU);
            let scale = c.eps0 * model.static_susceptibility();
            let mut out = [0.0];
            let mut next = [0.0];
            let mut worst: f64 = 0.0;
            for &v in &e {
                engine.push(&[v]).unwrap();
                engine.query(&mut out).unwrap();
                worst = worst.max((out[0] - oracle.push(v)).abs());
            }
            engine.history_sum(&mut next).unwrap();
            assert!(next[0].is_finite());
            assert!(worst <= 1e-6 * scale, "base {base}: {:e}", worst / scale);
            assert!(!engine.degraded());
            assert!(engine.ladder().estimated_error() < 1e-6);
        }
    }

    #[test]
    fn zero_input_gives_zero() {
        let model = tissue();
        let mut engine = FocqEngine::new(scalar_weights(&model, 64), &PhysicalConstants::default(), FocqConfig::default()).unwrap();
        let mut out = [1.0];
        for _ in 0..500 {
            engine.push(&[0.0]).unwrap();
            engine.history_sum(&mut out).unwrap();
            assert_eq!(out[0], 0.0);
        }
    }

    #[test]
    fn memory_grows_logarithmically() {
        let model = tissue();
        let cfg = FocqConfig {
            horizon: 10_000,
            ..FocqConfig::default()
        };
        let mut engine = FocqEngine::new(scalar_weights(&model, 64), &PhysicalConstants::default(), cfg).unwrap();
        let levels = engine.ladder().level_count();
        let per_state = 2 * cfg.contour_nodes;
        let mut peak = 0;
        for n in 1..=10_000 {
            engine.push(&[1.0]).unwrap();
            peak = peak.max(engine.stored_vectors());
            let bound = 5 * per_state * levels + 2 * cfg.first_block() + 1;
            assert!(engine.stored_vectors() <= bound, "n = {n}");
        }
        assert!(peak > 0);
    }

    #[test]
    fn past_horizon_sets_flag() {
        let model = tissue();
        let cfg = FocqConfig {
            horizon: 100,
            ..FocqConfig::default()
        };
        let mut engine = FocqEngine::new(scalar_weights(&model, 64), &PhysicalConstants::default(), cfg).unwrap();
        for _ in 0..100 {
            engine.push(&[1.0]).unwrap();
        }
        assert!(!engine.degraded());
        for _ in 0..100 {
            engine.push(&[1.0]).unwrap();
        }
        assert!(engine.degraded());
    }

    #[test]
    fn short_table_is_rejected() {
        let model = tissue();
        let err = FocqEngine::new(scalar_weights(&model, 8), &PhysicalConstants::default(), FocqConfig::default());
        assert!(matches!(err, Err(Error::InsufficientWeights { .. })));
    }
}
