//! Wiring from a validated configuration to steppers and output files.

use std::collections::BTreeMap;
use std::path::PathBuf;

use crate::config::{ConfigError, Scheme, SimConfig, StepSize};
use crate::discretization::{build_mesh, build_operators, cfl_bound, CflEstimate, DiscreteOperators, MaterialLayout};
use crate::error::Error;
use crate::material::{MaterialModel, PhysicalConstants};
use crate::output::{self, CsvSeries, COMPARISON_HEADER, ENERGY_HEADER};
use crate::stepper::{dissipation_residual, energy, AdeStepper, CqStepper, InitialCondition, SimState, Stepper};
use crate::weights::{weights_for_layout, WeightTable};

#[derive(Debug, thiserror::Error)]
pub enum AppError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Setup(Error),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("i/o error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl AppError {
    /// Process exit status: 1 for configuration and I/O problems, 2 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Config(_) | AppError::Setup(_) | AppError::Io { .. } => 1,
            AppError::Numerical(_) => 2,
        }
    }
}

fn io_err(path: &std::path::Path) -> impl FnOnce(std::io::Error) -> AppError + '_ {
    move |source| AppError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn numerical(e: Error) -> AppError {
    AppError::Numerical(e.to_string())
}

/// Everything derived from the configuration before the first step.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub config: SimConfig,
    pub constants: PhysicalConstants,
    pub materials: BTreeMap<String, MaterialModel>,
    pub layout: MaterialLayout,
    pub ops: DiscreteOperators,
    pub cfl: CflEstimate,
    pub tau: f64,
    pub initial: InitialCondition,
    pub warnings: Vec<String>,
}

pub fn prepare(config: &SimConfig) -> Result<Prepared, AppError> {
    config.validate()?;
    let constants = PhysicalConstants::default();
    let materials = config.materials()?;
    let layout = config.material_layout();
    let d = &config.domain;
    let mesh = build_mesh(d.z_min, d.z_max, d.n_cells).map_err(AppError::Setup)?;
    let ops = build_operators(&mesh, &layout, &materials, &constants).map_err(AppError::Setup)?;
    let cfl = cfl_bound(&ops).map_err(numerical)?;
    let mut warnings = Vec::new();
    let tau = match config.step_size()? {
        StepSize::Explicit(dt) => {
            if dt > cfl.tau_max {
                warnings.push(format!(
                    "dt = {dt:e} s exceeds the stable step {:e} s; the discrete energy is not guaranteed positive",
                    cfl.tau_max
                ));
            }
            dt
        }
        StepSize::CflFraction(f) => f * cfl.tau_max,
    };
    Ok(Prepared {
        initial: config.initial_condition(),
        config: config.clone(),
        constants,
        materials,
        layout,
        ops,
        cfl,
        tau,
        warnings,
    })
}

impl Prepared {
    pub fn n_steps(&self) -> usize {
        self.config.time.n_steps
    }

    /// Weight tables with `n_weights` entries per material of the layout.
    pub fn weight_tables(&self, n_weights: usize) -> Result<BTreeMap<String, WeightTable>, AppError> {
        let method = self.config.weight_method(n_weights);
        weights_for_layout(&self.layout, &self.materials, &self.constants, self.tau, n_weights, method).map_err(numerical)
    }

    /// Table length a scheme needs for the configured step count.
    pub fn weights_needed(&self, scheme: Scheme) -> Result<usize, AppError> {
        Ok(match scheme {
            Scheme::Ade | Scheme::CqDirect => self.n_steps() + 1,
            Scheme::CqFocq => {
                let cfg = self.config.focq_config()?;
                match cfg.level_blocks().first() {
                    Some(&p) => 2 * p,
                    None => self.n_steps() + 1,
                }
            }
        })
    }

    /// `shadow` adds the per-pole recursion to CQ schemes so their energy can be evaluated.
    pub fn build_stepper(
        &self,
        scheme: Scheme,
        tables: Option<&BTreeMap<String, WeightTable>>,
        shadow: bool,
    ) -> Result<Box<dyn Stepper>, AppError> {
        let ops = self.ops.clone();
        let owned;
        let tables = match (scheme, tables) {
            (Scheme::Ade, _) => None,
            (_, Some(t)) => Some(t),
            (_, None) => {
                owned = self.weight_tables(self.weights_needed(scheme)?)?;
                Some(&owned)
            }
        };
        let stepper: Box<dyn Stepper> = match scheme {
            Scheme::Ade => Box::new(AdeStepper::new(ops, self.tau, &self.initial).map_err(AppError::Setup)?),
            Scheme::CqDirect => Box::new(
                CqStepper::direct(ops, self.tau, &self.initial, tables.expect("tables"), self.n_steps(), shadow)
                    .map_err(AppError::Setup)?,
            ),
            Scheme::CqFocq => Box::new(
                CqStepper::focq(
                    ops,
                    self.tau,
                    &self.initial,
                    tables.expect("tables"),
                    &self.constants,
                    self.config.focq_config()?,
                    shadow,
                )
                .map_err(AppError::Setup)?,
            ),
        };
        Ok(stepper)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub scheme: Scheme,
    pub steps: usize,
    pub tau: f64,
    pub tau_max: f64,
    pub initial_energy: f64,
    pub final_energy: f64,
    /// Largest `tau * |residual|` over all steps, when energies were recorded.
    pub max_step_imbalance: Option<f64>,
    pub stored_vectors: Option<usize>,
    pub degraded: bool,
    pub warnings: Vec<String>,
    pub written: Vec<PathBuf>,
}

fn check_finite(state: &SimState) -> Result<(), AppError> {
    if state.is_finite() {
        Ok(())
    } else {
        Err(AppError::Numerical(format!("non-finite field values at step {}", state.step)))
    }
}

fn with_warnings(e: AppError, warnings: &[String]) -> AppError {
    match e {
        AppError::Numerical(msg) if !warnings.is_empty() => {
            AppError::Numerical(format!("{msg} (warning: {})", warnings.join("; warning: ")))
        }
        other => other,
    }
}

/// Steps the configured scheme `n_steps` times and writes the configured outputs.
pub fn run_simulation(config: &SimConfig, dump_weights: Option<&std::path::Path>) -> Result<RunSummary, AppError> {
    let prep = prepare(config)?;
    let scheme = config.scheme;
    let outputs = &config.outputs;
    let mut written = Vec::new();

    let tables = if scheme.is_cq() || dump_weights.is_some() || config.weights.dump_path.is_some() {
        let n = if scheme.is_cq() { prep.weights_needed(scheme)? } else { prep.n_steps() + 1 };
        Some(prep.weight_tables(n)?)
    } else {
        None
    };
    if let Some(tables) = &tables {
        for dir in [dump_weights, config.weights.dump_path.as_deref()].into_iter().flatten() {
            written.extend(output::dump_weights(dir, tables).map_err(io_err(dir))?);
        }
    }

    let track_energy = outputs.energy_path.is_some();
    let mut stepper = prep.build_stepper(scheme, tables.as_ref(), track_energy)?;
    let tau = prep.tau;
    let mesh = prep.ops.mesh;

    let mut energy_csv = match &outputs.energy_path {
        Some(p) => Some(CsvSeries::create(p, ENERGY_HEADER).map_err(io_err(p))?),
        None => None,
    };
    let mut snapshots = Vec::new();
    let save = |state: &SimState, snapshots: &mut Vec<(usize, f64, PathBuf)>| -> Result<(), AppError> {
        if let Some(dir) = &outputs.snapshot_dir {
            let path = output::snapshot_path(dir, state.step);
            output::save_snapshot(&path, &mesh, state).map_err(io_err(&path))?;
            snapshots.push((state.step, state.time(tau), path));
        }
        Ok(())
    };

    let initial_energy = energy(stepper.state(), &prep.ops).energy;
    if let Some(csv) = energy_csv.as_mut() {
        csv.row(0, &[0.0, initial_energy, 0.0, 0.0]).map_err(io_err(outputs.energy_path.as_ref().unwrap()))?;
    }
    save(stepper.state(), &mut snapshots)?;

    let mut max_imbalance: Option<f64> = None;
    let mut last_energy = initial_energy;
    for _ in 0..prep.n_steps() {
        let prev = track_energy.then(|| stepper.state().clone());
        stepper.step().map_err(numerical)?;
        let state = stepper.state();
        check_finite(state).map_err(|e| with_warnings(e, &prep.warnings))?;
        if let (Some(prev), Some(csv)) = (prev, energy_csv.as_mut()) {
            let report = dissipation_residual(&prev, state, &prep.ops, tau).map_err(numerical)?;
            let d = report.dissipation.unwrap_or(0.0);
            let r = report.residual.unwrap_or(0.0);
            csv.row(state.step, &[state.time(tau), report.energy, d, r])
                .map_err(io_err(outputs.energy_path.as_ref().unwrap()))?;
            let imbalance = tau * r.abs();
            max_imbalance = Some(max_imbalance.map_or(imbalance, |m| m.max(imbalance)));
            last_energy = report.energy;
        }
        if state.step % outputs.snapshot_stride == 0 {
            save(state, &mut snapshots)?;
        }
    }
    if !track_energy {
        last_energy = energy(stepper.state(), &prep.ops).energy;
    }
    if let (Some(csv), Some(p)) = (energy_csv, &outputs.energy_path) {
        csv.finish().map_err(io_err(p))?;
        written.push(p.clone());
    }
    written.extend(snapshots.iter().map(|(_, _, p)| p.clone()));
    if let Some(p) = &outputs.plot_path {
        let script = output::plot_script(&snapshots, outputs.energy_path.as_deref(), None);
        output::save_plot_script(p, &script).map_err(io_err(p))?;
        written.push(p.clone());
    }

    let mut warnings = prep.warnings.clone();
    if stepper.degraded() {
        warnings.push("the fast convolution exceeded its configured tolerance".into());
    }
    Ok(RunSummary {
        scheme,
        steps: prep.n_steps(),
        tau,
        tau_max: prep.cfl.tau_max,
        initial_energy,
        final_energy: last_energy,
        max_step_imbalance: max_imbalance,
        stored_vectors: stepper.stored_vectors(),
        degraded: stepper.degraded(),
        warnings,
        written,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport {
    pub schemes: Vec<Scheme>,
    pub steps: usize,
    /// Largest absolute differences to the first scheme over the whole run, `(e, h, p)`.
    pub max_diff: [f64; 3],
    /// Largest absolute field values over all schemes and steps, `(e, h, p)`.
    pub max_magnitude: [f64; 3],
    pub tolerance: f64,
    pub written: Vec<PathBuf>,
}

impl ComparisonReport {
    /// Largest per-field difference relative to that field's magnitude.
    pub fn relative_difference(&self) -> f64 {
        self.max_diff
            .iter()
            .zip(&self.max_magnitude)
            .map(|(&d, &m)| if d == 0.0 { 0.0 } else if m > 0.0 { d / m } else { f64::INFINITY })
            .fold(0.0, f64::max)
    }

    pub fn passed(&self) -> bool {
        self.relative_difference() <= self.tolerance
    }
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn max_abs(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Runs `schemes` in lockstep on identical inputs and records differences to the first.
pub fn compare_schemes(config: &SimConfig, schemes: &[Scheme], tolerance: f64) -> Result<ComparisonReport, AppError> {
    if schemes.len() < 2 {
        return Err(ConfigError::Invalid {
            field: "schemes".into(),
            reason: "at least two schemes are required".into(),
        }
        .into());
    }
    let prep = prepare(config)?;
    let mut steppers = schemes
        .iter()
        .map(|&s| prep.build_stepper(s, None, false))
        .collect::<Result<Vec<_>, _>>()?;
    let n = prep.ops.n_nodes();
    for s in &steppers {
        let st = s.state();
        if st.e.len() != n || st.h_half.len() != prep.ops.n_cells() {
            return Err(ConfigError::Invalid {
                field: "schemes".into(),
                reason: "schemes were built on different discretizations".into(),
            }
            .into());
        }
    }
    let tau = prep.tau;
    let mut csv = match &config.outputs.comparison_path {
        Some(p) => Some(CsvSeries::create(p, COMPARISON_HEADER).map_err(io_err(p))?),
        None => None,
    };
    let mut max_diff = [0.0f64; 3];
    let mut max_magnitude = [0.0f64; 3];
    for step in 0..=prep.n_steps() {
        if step > 0 {
            for s in steppers.iter_mut() {
                s.step().map_err(numerical)?;
                check_finite(s.state()).map_err(|e| with_warnings(e, &prep.warnings))?;
            }
        }
        let reference = steppers[0].state();
        let mut diff = [0.0f64; 3];
        for s in &steppers {
            let st = s.state();
            diff[0] = diff[0].max(max_abs_diff(&reference.e, &st.e));
            diff[1] = diff[1].max(max_abs_diff(&reference.h_half, &st.h_half));
            diff[2] = diff[2].max(max_abs_diff(&reference.p_total, &st.p_total));
            max_magnitude[0] = max_magnitude[0].max(max_abs(&st.e));
            max_magnitude[1] = max_magnitude[1].max(max_abs(&st.h_half));
            max_magnitude[2] = max_magnitude[2].max(max_abs(&st.p_total));
        }
        for (m, d) in max_diff.iter_mut().zip(diff) {
            *m = m.max(d);
        }
        if let Some(csv) = csv.as_mut() {
            csv.row(step, &[step as f64 * tau, diff[0], diff[1], diff[2]])
                .map_err(io_err(config.outputs.comparison_path.as_ref().unwrap()))?;
        }
    }
    let mut written = Vec::new();
    if let (Some(csv), Some(p)) = (csv, &config.outputs.comparison_path) {
        csv.finish().map_err(io_err(p))?;
        written.push(p.clone());
    }
    Ok(ComparisonReport {
        schemes: schemes.to_vec(),
        steps: prep.n_steps(),
        max_diff,
        max_magnitude,
        tolerance,
        written,
    })
}
