//! TOML run configuration.
//!
//! `presets/tissue-interface.toml` is a complete annotated example.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Deserialize;

use crate::convolution::FocqConfig;
use crate::discretization::{LayoutRegion, MaterialLayout};
use crate::material::{validate_model, DebyePole, MaterialModel};
use crate::stepper::InitialCondition;
use crate::weights::{ContourParams, WeightMethod};

pub const TISSUE_INTERFACE: &str = include_str!("../presets/tissue-interface.toml");

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Parse(#[from] toml::de::Error),
    #[error("{field}: {reason}")]
    Invalid { field: String, reason: String },
    #[error("unknown preset `{0}` (available: tissue-interface)")]
    UnknownPreset(String),
}

fn invalid(field: impl Into<String>, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field: field.into(),
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    Ade,
    CqDirect,
    CqFocq,
}

impl Scheme {
    pub fn name(&self) -> &'static str {
        match self {
            Scheme::Ade => "ade",
            Scheme::CqDirect => "cq-direct",
            Scheme::CqFocq => "cq-focq",
        }
    }

    pub fn is_cq(&self) -> bool {
        !matches!(self, Scheme::Ade)
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "ade" => Ok(Scheme::Ade),
            "cq-direct" => Ok(Scheme::CqDirect),
            "cq-focq" => Ok(Scheme::CqFocq),
            other => Err(invalid(
                "scheme",
                format!("unknown scheme `{other}` (expected ade, cq-direct or cq-focq)"),
            )),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainConfig {
    pub z_min: f64,
    pub z_max: f64,
    pub n_cells: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    pub dt: Option<f64>,
    pub cfl_fraction: Option<f64>,
    pub n_steps: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepSize {
    Explicit(f64),
    CflFraction(f64),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoleConfig {
    pub delta_eps: f64,
    pub tau_relax: Option<f64>,
    pub omega_corner: Option<f64>,
    pub omega_corner_over_pi: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialConfig {
    pub name: String,
    #[serde(default)]
    pub eps_inf_prime: f64,
    #[serde(default)]
    pub poles: Vec<PoleConfig>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionConfig {
    pub z_start: f64,
    pub z_end: f64,
    pub material: String,
}

#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum InitialConditionConfig {
    #[default]
    Zero,
    Gaussian { amplitude: f64, width: f64, center: f64 },
    Constant { value: f64 },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FocqSection {
    pub base: usize,
    pub contour_nodes: usize,
    pub tolerance: f64,
    pub head_block: usize,
}

impl Default for FocqSection {
    fn default() -> Self {
        let d = FocqConfig::default();
        Self {
            base: d.base,
            contour_nodes: d.contour_nodes,
            tolerance: d.tolerance,
            head_block: d.head_block,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum WeightMethodName {
    #[default]
    Recurrence,
    Fft,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WeightsSection {
    pub method: WeightMethodName,
    pub rho: Option<f64>,
    pub fft_length: Option<usize>,
    pub dump_path: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputsSection {
    pub snapshot_stride: usize,
    pub snapshot_dir: Option<PathBuf>,
    pub energy_path: Option<PathBuf>,
    pub comparison_path: Option<PathBuf>,
    pub plot_path: Option<PathBuf>,
}

impl Default for OutputsSection {
    fn default() -> Self {
        Self {
            snapshot_stride: 100,
            snapshot_dir: None,
            energy_path: None,
            comparison_path: None,
            plot_path: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CompareSection {
    pub tolerance: f64,
}

impl Default for CompareSection {
    fn default() -> Self {
        Self { tolerance: 1e-10 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    #[serde(default = "default_scheme")]
    pub scheme: Scheme,
    pub domain: DomainConfig,
    pub time: TimeConfig,
    #[serde(default)]
    pub materials: Vec<MaterialConfig>,
    #[serde(default)]
    pub layout: Vec<RegionConfig>,
    #[serde(default)]
    pub initial_condition: InitialConditionConfig,
    #[serde(default)]
    pub focq: FocqSection,
    #[serde(default)]
    pub weights: WeightsSection,
    #[serde(default)]
    pub outputs: OutputsSection,
    #[serde(default)]
    pub compare: CompareSection,
}

fn default_scheme() -> Scheme {
    Scheme::Ade
}

pub fn load_config(path: &Path) -> Result<SimConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config(&text)
}

pub fn parse_config(text: &str) -> Result<SimConfig, ConfigError> {
    let config: SimConfig = toml::from_str(text)?;
    config.validate()?;
    Ok(config)
}

pub fn preset(name: &str) -> Result<SimConfig, ConfigError> {
    match name {
        "tissue-interface" => parse_config(TISSUE_INTERFACE),
        other => Err(ConfigError::UnknownPreset(other.to_string())),
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let d = &self.domain;
        if !(d.z_min.is_finite() && d.z_max.is_finite() && d.z_max > d.z_min) {
            return Err(invalid("domain", format!("z_max ({}) must exceed z_min ({})", d.z_max, d.z_min)));
        }
        if d.n_cells < 2 {
            return Err(invalid("domain.n_cells", "at least 2 cells are required"));
        }
        self.step_size()?;
        if self.outputs.snapshot_stride == 0 {
            return Err(invalid("outputs.snapshot_stride", "must be at least 1"));
        }
        if !(self.compare.tolerance > 0.0) {
            return Err(invalid("compare.tolerance", "must be positive"));
        }
        if let Some(rho) = self.weights.rho {
            if !(rho > 0.0 && rho < 1.0) {
                return Err(invalid("weights.rho", format!("{rho} is not in (0, 1)")));
            }
        }
        if let Some(len) = self.weights.fft_length {
            if len < self.time.n_steps + 1 {
                return Err(invalid("weights.fft_length", format!("{len} is shorter than n_steps + 1")));
            }
        }
        self.focq_config()?;
        let materials = self.materials()?;
        let layout = self.material_layout();
        for (i, region) in self.layout.iter().enumerate() {
            if !materials.contains_key(&region.material) {
                return Err(invalid(
                    format!("layout[{i}].material"),
                    format!("unknown material `{}`", region.material),
                ));
            }
        }
        let mesh = crate::discretization::Mesh1D {
            z_min: d.z_min,
            z_max: d.z_max,
            n_cells: d.n_cells,
        };
        layout.validate(&mesh).map_err(|e| invalid("layout", e.to_string()))?;
        Ok(())
    }

    pub fn step_size(&self) -> Result<StepSize, ConfigError> {
        match (self.time.dt, self.time.cfl_fraction) {
            (Some(dt), None) if dt > 0.0 && dt.is_finite() => Ok(StepSize::Explicit(dt)),
            (Some(dt), None) => Err(invalid("time.dt", format!("{dt} is not a positive time step"))),
            (None, Some(f)) if f > 0.0 && f <= 1.0 => Ok(StepSize::CflFraction(f)),
            (None, Some(f)) => Err(invalid("time.cfl_fraction", format!("{f} is not in (0, 1]"))),
            _ => Err(invalid("time", "exactly one of `dt` and `cfl_fraction` must be given")),
        }
    }

    pub fn materials(&self) -> Result<BTreeMap<String, MaterialModel>, ConfigError> {
        let mut out = BTreeMap::new();
        for (i, m) in self.materials.iter().enumerate() {
            let mut poles = Vec::with_capacity(m.poles.len());
            for (j, p) in m.poles.iter().enumerate() {
                let field = format!("materials[{i}].poles[{j}]");
                let tau = match (p.tau_relax, p.omega_corner, p.omega_corner_over_pi) {
                    (Some(t), None, None) => t,
                    (None, Some(w), None) => 1.0 / w,
                    (None, None, Some(w)) => 1.0 / (w * std::f64::consts::PI),
                    _ => {
                        return Err(invalid(
                            field,
                            "exactly one of tau_relax, omega_corner and omega_corner_over_pi is required",
                        ))
                    }
                };
                poles.push(DebyePole::new(p.delta_eps, tau));
            }
            let report = validate_model(&MaterialModel {
                name: m.name.clone(),
                eps_inf_prime: m.eps_inf_prime,
                poles: poles.clone(),
            });
            if !report.valid {
                return Err(invalid(format!("materials[{i}]"), report.violations.join("; ")));
            }
            let model = MaterialModel::new(&m.name, m.eps_inf_prime, poles)
                .map_err(|e| invalid(format!("materials[{i}]"), e.to_string()))?;
            if out.insert(m.name.clone(), model).is_some() {
                return Err(invalid(format!("materials[{i}].name"), format!("duplicate material `{}`", m.name)));
            }
        }
        Ok(out)
    }

    pub fn material_layout(&self) -> MaterialLayout {
        MaterialLayout {
            regions: self
                .layout
                .iter()
                .map(|r| LayoutRegion::new(r.z_start, r.z_end, &r.material))
                .collect(),
        }
    }

    pub fn initial_condition(&self) -> InitialCondition {
        match self.initial_condition {
            InitialConditionConfig::Zero => InitialCondition::Zero,
            InitialConditionConfig::Gaussian { amplitude, width, center } => {
                InitialCondition::Gaussian { amplitude, width, center }
            }
            InitialConditionConfig::Constant { value } => InitialCondition::Constant { value },
        }
    }

    /// Ladder settings planned for `n_steps`.
    pub fn focq_config(&self) -> Result<FocqConfig, ConfigError> {
        let f = &self.focq;
        if f.base < 2 {
            return Err(invalid("focq.base", "must be at least 2"));
        }
        if f.contour_nodes == 0 {
            return Err(invalid("focq.contour_nodes", "must be positive"));
        }
        if f.head_block == 0 {
            return Err(invalid("focq.head_block", "must be positive"));
        }
        if !(f.tolerance > 0.0) {
            return Err(invalid("focq.tolerance", "must be positive"));
        }
        Ok(FocqConfig {
            base: f.base,
            contour_nodes: f.contour_nodes,
            tolerance: f.tolerance,
            head_block: f.head_block,
            horizon: self.time.n_steps.max(1),
        })
    }

    pub fn weight_method(&self, n_weights: usize) -> WeightMethod {
        match self.weights.method {
            WeightMethodName::Recurrence => WeightMethod::Recurrence,
            WeightMethodName::Fft => {
                let mut params = ContourParams::default_for(n_weights);
                if let Some(rho) = self.weights.rho {
                    params.radius = rho;
                }
                if let Some(len) = self.weights.fft_length {
                    params.fft_length = len.max(n_weights);
                }
                WeightMethod::Fft(Some(params))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn preset_matches_tissue_model() {
        let cfg = preset("tissue-interface").unwrap();
        let materials = cfg.materials().unwrap();
        let tissue = &materials["tissue"];
        let reference = MaterialModel::five_pole_tissue();
        assert_eq!(tissue.poles.len(), 5);
        for (a, b) in tissue.poles.iter().zip(&reference.poles) {
            assert_eq!(a.delta_eps, b.delta_eps);
            assert_relative_eq!(a.tau_relax, b.tau_relax, max_relative = 1e-15);
        }
        assert_eq!(tissue.eps_inf(), 4.3);
        assert_eq!(cfg.domain.n_cells, 1024);
        assert_eq!(cfg.step_size().unwrap(), StepSize::CflFraction(0.9));
        let tissue_region = cfg.material_layout().regions.into_iter().find(|r| r.material == "tissue").unwrap();
        assert_eq!((tissue_region.z_start, tissue_region.z_end), (0.5, 0.7));
        assert_eq!(
            cfg.initial_condition(),
            InitialCondition::Gaussian {
                amplitude: 10.0,
                width: 10.0,
                center: 0.0
            }
        );
    }

    fn with(find: &str, replace: &str) -> Result<SimConfig, ConfigError> {
        assert!(TISSUE_INTERFACE.contains(find), "{find}");
        parse_config(&TISSUE_INTERFACE.replacen(find, replace, 1))
    }

    #[test]
    fn overlapping_layout_is_rejected() {
        let err = with("z_start = 0.5\nz_end = 0.7", "z_start = 0.4\nz_end = 0.7").unwrap_err();
        assert!(matches!(err, ConfigError::Invalid { ref field, .. } if field == "layout"), "{err}");
    }

    #[test]
    fn schema_errors_name_the_field() {
        let err = with("scheme = \"ade\"", "scheme = \"euler\"").unwrap_err();
        assert!(matches!(err, ConfigError::Parse(_)));
        assert!(err.to_string().contains("scheme"), "{err}");

        let err = with("cfl_fraction = 0.9", "cfl_fraction = 0.9\ndt = 1e-12").unwrap_err();
        assert!(err.to_string().starts_with("time:"), "{err}");

        let err = with("{ delta_eps = 32.0, omega_corner_over_pi = 460.0e6 }", "{ delta_eps = 32.0 }").unwrap_err();
        assert!(err.to_string().starts_with("materials[1].poles[3]"), "{err}");

        let err = with("{ delta_eps = 32.0,", "{ delta_eps = -32.0,").unwrap_err();
        assert!(err.to_string().contains("delta_eps must be positive"), "{err}");

        let err = with("material = \"tissue\"", "material = \"bone\"").unwrap_err();
        assert!(err.to_string().contains("unknown material `bone`"), "{err}");

        assert!(matches!(preset("skin"), Err(ConfigError::UnknownPreset(_))));
    }

    #[test]
    fn scheme_names_round_trip() {
        for s in [Scheme::Ade, Scheme::CqDirect, Scheme::CqFocq] {
            assert_eq!(s.name().parse::<Scheme>().unwrap(), s);
        }
        assert!("cq".parse::<Scheme>().is_err());
    }
}
