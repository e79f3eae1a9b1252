//! Time stepping and energy diagnostics.
//!
//! Both schemes share the staggered layout: at step `n` the state holds
//! `h^{n+1/2}`, `h^{n-1/2}` (cells) and `e^n` (nodes). The magnetic update is
//!
//! ```text
//! M_h (h^{n+3/2} - h^{n+1/2}) / tau + C e^{n+1} = 0
//! ```
//!
//! and the electric update is
//!
//! ```text
//! M_e (e^{n+1} - e^n) / tau + M_l (p^{n+1} - p^n) / tau = C^T h^{n+1/2}.
//! ```
//!
//! The ADE scheme closes it with one trapezoidal recursion per pole; the CQ
//! scheme with the convolution sum over the stored electric history.

use std::collections::BTreeMap;

use crate::convolution::{ConvolutionEngine, DirectEngine, FocqConfig, FocqEngine, RegionWeights};
use crate::discretization::DiscreteOperators;
use crate::error::{Error, Result};
use crate::material::PhysicalConstants;
use crate::weights::WeightTable;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitialCondition {
    Zero,
    /// `amplitude * exp(-width * (z - center)^2)`.
    Gaussian { amplitude: f64, width: f64, center: f64 },
    Constant { value: f64 },
}

impl InitialCondition {
    pub fn sample(&self, z: f64) -> f64 {
        match *self {
            InitialCondition::Zero => 0.0,
            InitialCondition::Gaussian { amplitude, width, center } => amplitude * (-width * (z - center).powi(2)).exp(),
            InitialCondition::Constant { value } => value,
        }
    }

    pub fn is_zero(&self) -> bool {
        match *self {
            InitialCondition::Zero => true,
            InitialCondition::Gaussian { amplitude, .. } => amplitude == 0.0,
            InitialCondition::Constant { value } => value == 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub step: usize,
    /// `h^{n+1/2}` per cell.
    pub h_half: Vec<f64>,
    /// `h^{n-1/2}` per cell.
    pub h_half_prev: Vec<f64>,
    /// `e^n` per node.
    pub e: Vec<f64>,
    /// Total polarization `p^n` per node.
    pub p_total: Vec<f64>,
    /// Per pole group of the operators, values on the group's nodes. `None` when
    /// the scheme does not track individual poles.
    pub poles: Option<Vec<Vec<f64>>>,
}

impl SimState {
    pub fn time(&self, tau: f64) -> f64 {
        self.step as f64 * tau
    }

    pub fn is_finite(&self) -> bool {
        self.h_half.iter().chain(&self.e).chain(&self.p_total).all(|v| v.is_finite())
    }

    /// `h` at integer time `n`, the mean of the two stored half steps.
    pub fn h_at_step(&self) -> Vec<f64> {
        self.h_half.iter().zip(&self.h_half_prev).map(|(a, b)| 0.5 * (a + b)).collect()
    }
}

/// Initial state at `n = 0`: `h^{-1/2} = h^{1/2}` sampled at cell midpoints, `e^0 = p^0 = 0`.
pub fn init_state(
    ops: &DiscreteOperators,
    magnetic: &InitialCondition,
    electric: &InitialCondition,
    track_poles: bool,
) -> Result<SimState> {
    if !electric.is_zero() {
        return Err(Error::UnsupportedInitialCondition(format!(
            "the electric field must start at zero (got {electric:?})"
        )));
    }
    let h: Vec<f64> = ops.mesh.midpoints().into_iter().map(|z| magnetic.sample(z)).collect();
    let n = ops.n_nodes();
    Ok(SimState {
        step: 0,
        h_half_prev: h.clone(),
        h_half: h,
        e: vec![0.0; n],
        p_total: vec![0.0; n],
        poles: track_poles.then(|| ops.pole_groups.iter().map(|g| vec![0.0; g.nodes.len()]).collect()),
    })
}

/// Trapezoidal update `p_i^{n+1} = A_i p_i^n + B_i (e^{n+1} + e^n) / 2` for every pole group.
#[derive(Debug, Clone)]
struct PoleRecursion {
    /// `(A_i, B_i)` per pole group.
    coefficients: Vec<(f64, f64)>,
}

impl PoleRecursion {
    fn new(ops: &DiscreteOperators, tau: f64) -> Self {
        let coefficients = ops
            .pole_groups
            .iter()
            .map(|g| {
                let r = g.pole.tau_relax / tau;
                let a = (2.0 * r - 1.0) / (2.0 * r + 1.0);
                let b = 2.0 * ops.constants.eps0 * g.pole.delta_eps / (2.0 * r + 1.0);
                (a, b)
            })
            .collect();
        Self { coefficients }
    }

    fn advance(&self, ops: &DiscreteOperators, poles: &mut [Vec<f64>], e_old: &[f64], e_new: &[f64]) {
        for ((group, p), &(a, b)) in ops.pole_groups.iter().zip(poles.iter_mut()).zip(&self.coefficients) {
            for (pi, &k) in p.iter_mut().zip(&group.nodes) {
                *pi = a * *pi + b * 0.5 * (e_new[k] + e_old[k]);
            }
        }
    }
}

fn sum_poles(ops: &DiscreteOperators, poles: &[Vec<f64>], out: &mut [f64]) {
    out.iter_mut().for_each(|v| *v = 0.0);
    for (group, p) in ops.pole_groups.iter().zip(poles) {
        for (&k, v) in group.nodes.iter().zip(p) {
            out[k] += v;
        }
    }
}

fn advance_magnetic(ops: &DiscreteOperators, tau: f64, state: &mut SimState, scratch: &mut [f64]) {
    ops.curl.apply(&state.e, scratch);
    std::mem::swap(&mut state.h_half_prev, &mut state.h_half);
    for (j, h) in state.h_half.iter_mut().enumerate() {
        *h = state.h_half_prev[j] - tau * scratch[j] / ops.m_h[j];
    }
}

pub trait Stepper: Send {
    /// Advances the state from step `n` to `n + 1`.
    fn step(&mut self) -> Result<()>;
    fn state(&self) -> &SimState;
    fn operators(&self) -> &DiscreteOperators;
    fn tau(&self) -> f64;

    /// Set when an approximate convolution engine exceeded its tolerance.
    fn degraded(&self) -> bool {
        false
    }

    /// Resident history vectors of the convolution engine, if any.
    fn stored_vectors(&self) -> Option<usize> {
        None
    }
}

/// Leapfrog with one auxiliary trapezoidal recursion per Debye pole.
#[derive(Debug, Clone)]
pub struct AdeStepper {
    ops: DiscreteOperators,
    tau: f64,
    state: SimState,
    recursion: PoleRecursion,
    /// `M_e + M_l sum_i B_i / 2` per node.
    diagonal: Vec<f64>,
    e_next: Vec<f64>,
    scratch: Vec<f64>,
}

impl AdeStepper {
    pub fn new(ops: DiscreteOperators, tau: f64, magnetic: &InitialCondition) -> Result<Self> {
        check_tau(tau)?;
        let state = init_state(&ops, magnetic, &InitialCondition::Zero, true)?;
        let recursion = PoleRecursion::new(&ops, tau);
        let mut diagonal = ops.m_e.clone();
        for (group, &(_, b)) in ops.pole_groups.iter().zip(&recursion.coefficients) {
            for &k in &group.nodes {
                diagonal[k] += ops.m_lumped[k] * 0.5 * b;
            }
        }
        let n = ops.n_nodes();
        Ok(Self {
            tau,
            state,
            recursion,
            diagonal,
            e_next: vec![0.0; n],
            scratch: vec![0.0; n],
            ops,
        })
    }
}

impl Stepper for AdeStepper {
    fn step(&mut self) -> Result<()> {
        let ops = &self.ops;
        let state = &mut self.state;
        let tau = self.tau;
        ops.curl.apply_transpose(&state.h_half, &mut self.scratch);
        for k in 0..ops.n_nodes() {
            self.e_next[k] = ops.m_e[k] * state.e[k] + tau * self.scratch[k];
        }
        let poles = state.poles.as_mut().expect("ADE state tracks poles");
        for ((group, p), &(a, b)) in ops.pole_groups.iter().zip(poles.iter()).zip(&self.recursion.coefficients) {
            for (&k, pi) in group.nodes.iter().zip(p) {
                self.e_next[k] -= ops.m_lumped[k] * ((a - 1.0) * pi + 0.5 * b * state.e[k]);
            }
        }
        for (e, d) in self.e_next.iter_mut().zip(&self.diagonal) {
            *e /= d;
        }
        self.recursion.advance(ops, poles, &state.e, &self.e_next);
        sum_poles(ops, poles, &mut state.p_total);
        std::mem::swap(&mut state.e, &mut self.e_next);
        advance_magnetic(ops, tau, state, &mut self.scratch);
        state.step += 1;
        Ok(())
    }

    fn state(&self) -> &SimState {
        &self.state
    }

    fn operators(&self) -> &DiscreteOperators {
        &self.ops
    }

    fn tau(&self) -> f64 {
        self.tau
    }
}

/// Leapfrog closed by the convolution-quadrature polarization.
pub struct CqStepper {
    ops: DiscreteOperators,
    tau: f64,
    state: SimState,
    engine: Box<dyn ConvolutionEngine>,
    /// `omega_0` per node.
    leading: Vec<f64>,
    /// Pole recursion driven by the CQ field, for energy diagnostics only.
    shadow: Option<PoleRecursion>,
    memory: Vec<f64>,
    e_next: Vec<f64>,
    scratch: Vec<f64>,
}

impl CqStepper {
    /// `engine` must be empty; `e^0` is appended here.
    pub fn new(
        ops: DiscreteOperators,
        tau: f64,
        magnetic: &InitialCondition,
        mut engine: Box<dyn ConvolutionEngine>,
        leading: Vec<f64>,
        shadow: bool,
    ) -> Result<Self> {
        check_tau(tau)?;
        if !engine.is_empty() {
            return Err(Error::InvalidParameter {
                name: "engine",
                reason: "the convolution engine already holds history".into(),
            });
        }
        if leading.len() != ops.n_nodes() {
            return Err(Error::DimensionMismatch {
                what: "leading weights",
                expected: ops.n_nodes(),
                actual: leading.len(),
            });
        }
        let state = init_state(&ops, magnetic, &InitialCondition::Zero, shadow)?;
        engine.push(&state.e)?;
        let n = ops.n_nodes();
        Ok(Self {
            shadow: shadow.then(|| PoleRecursion::new(&ops, tau)),
            tau,
            state,
            engine,
            leading,
            memory: vec![0.0; n],
            e_next: vec![0.0; n],
            scratch: vec![0.0; n],
            ops,
        })
    }

    /// Direct engine over per-material weight tables covering `steps` steps.
    pub fn direct(
        ops: DiscreteOperators,
        tau: f64,
        magnetic: &InitialCondition,
        tables: &BTreeMap<String, WeightTable>,
        steps: usize,
        shadow: bool,
    ) -> Result<Self> {
        let weights = RegionWeights::from_operators(&ops, tables)?;
        if weights.n_active() > 0 && weights.min_table_len() <= steps {
            return Err(Error::InsufficientWeights {
                material: weights.segments[0].weights.material_name.clone(),
                available: weights.min_table_len(),
                required: steps,
            });
        }
        let leading = weights.leading_weights();
        let engine = Box::new(DirectEngine::with_capacity(weights, steps + 1));
        Self::new(ops, tau, magnetic, engine, leading, shadow)
    }

    pub fn focq(
        ops: DiscreteOperators,
        tau: f64,
        magnetic: &InitialCondition,
        tables: &BTreeMap<String, WeightTable>,
        constants: &PhysicalConstants,
        config: FocqConfig,
        shadow: bool,
    ) -> Result<Self> {
        let weights = RegionWeights::from_operators(&ops, tables)?;
        let leading = weights.leading_weights();
        let engine = Box::new(FocqEngine::new(weights, constants, config)?);
        Self::new(ops, tau, magnetic, engine, leading, shadow)
    }

    pub fn engine(&self) -> &dyn ConvolutionEngine {
        self.engine.as_ref()
    }
}

impl Stepper for CqStepper {
    fn step(&mut self) -> Result<()> {
        let ops = &self.ops;
        let state = &mut self.state;
        let tau = self.tau;
        self.engine.history_sum(&mut self.memory)?;
        ops.curl.apply_transpose(&state.h_half, &mut self.scratch);
        for k in 0..ops.n_nodes() {
            let rhs = ops.m_e[k] * state.e[k] + ops.m_lumped[k] * (state.p_total[k] - self.memory[k]) + tau * self.scratch[k];
            self.e_next[k] = rhs / (ops.m_e[k] + self.leading[k] * ops.m_lumped[k]);
            state.p_total[k] = self.leading[k] * self.e_next[k] + self.memory[k];
        }
        self.engine.push(&self.e_next)?;
        if let (Some(recursion), Some(poles)) = (&self.shadow, state.poles.as_mut()) {
            recursion.advance(ops, poles, &state.e, &self.e_next);
        }
        std::mem::swap(&mut state.e, &mut self.e_next);
        advance_magnetic(ops, tau, state, &mut self.scratch);
        state.step += 1;
        Ok(())
    }

    fn state(&self) -> &SimState {
        &self.state
    }

    fn operators(&self) -> &DiscreteOperators {
        &self.ops
    }

    fn tau(&self) -> f64 {
        self.tau
    }

    fn degraded(&self) -> bool {
        self.engine.degraded()
    }

    fn stored_vectors(&self) -> Option<usize> {
        Some(self.engine.stored_vectors())
    }
}

fn check_tau(tau: f64) -> Result<()> {
    if tau > 0.0 && tau.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name: "tau",
            reason: format!("{tau} is not a positive time step"),
        })
    }
}

/// Discrete energy per unit cross-section (J/m^2).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyReport {
    pub step: usize,
    pub energy: f64,
    /// False when the state carries no per-pole polarizations and their energy is left out.
    pub polarization_included: bool,
    /// `sum_i |(p_i^{n} - p_i^{n-1}) / tau|^2_{M_d,i}` over the step that produced this state.
    pub dissipation: Option<f64>,
    /// `(E^n - E^{n-1}) / tau + dissipation`; vanishes to round-off.
    pub residual: Option<f64>,
}

/// `E^n = 1/2 [ (h^{n+1/2}, h^{n-1/2})_{M_h} + |e^n|^2_{M_e} + sum_i |p_i^n|^2_{M_p,i} ]`.
pub fn energy(state: &SimState, ops: &DiscreteOperators) -> EnergyReport {
    let magnetic: f64 = state
        .h_half
        .iter()
        .zip(&state.h_half_prev)
        .zip(&ops.m_h)
        .map(|((a, b), m)| a * b * m)
        .sum();
    let electric: f64 = state.e.iter().zip(&ops.m_e).map(|(e, m)| e * e * m).sum();
    let polarization: f64 = match &state.poles {
        Some(poles) => ops
            .pole_groups
            .iter()
            .zip(poles)
            .map(|(group, p)| group.nodes.iter().zip(p).map(|(&k, v)| v * v * ops.m_p(group, k)).sum::<f64>())
            .sum(),
        None => 0.0,
    };
    EnergyReport {
        step: state.step,
        energy: 0.5 * (magnetic + electric + polarization),
        polarization_included: state.poles.is_some() || ops.pole_groups.is_empty(),
        dissipation: None,
        residual: None,
    }
}

/// Energy of `next` with the dissipation and balance residual of the step from `prev`.
pub fn dissipation_residual(
    prev: &SimState,
    next: &SimState,
    ops: &DiscreteOperators,
    tau: f64,
) -> Result<EnergyReport> {
    if next.step != prev.step + 1 {
        return Err(Error::InvalidParameter {
            name: "next",
            reason: format!("states {} and {} are not consecutive", prev.step, next.step),
        });
    }
    let dissipation = match (&prev.poles, &next.poles) {
        (Some(a), Some(b)) => ops
            .pole_groups
            .iter()
            .zip(a.iter().zip(b))
            .map(|(group, (pa, pb))| {
                group
                    .nodes
                    .iter()
                    .zip(pa.iter().zip(pb))
                    .map(|(&k, (x, y))| ((y - x) / tau).powi(2) * ops.m_d(group, k))
                    .sum::<f64>()
            })
            .sum(),
        _ if ops.pole_groups.is_empty() => 0.0,
        _ => return Err(Error::NotComputable("dissipation without per-pole polarizations")),
    };
    let before = energy(prev, ops).energy;
    let mut report = energy(next, ops);
    report.dissipation = Some(dissipation);
    report.residual = Some((report.energy - before) / tau + dissipation);
    Ok(report)
}
