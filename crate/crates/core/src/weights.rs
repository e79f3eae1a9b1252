//! Convolution quadrature weights for the trapezoidal symbol.
//!
//! The weights `omega_n` are the power-series coefficients of
//! `eps0 * chi(s(xi))` with `s(xi) = 2 (1 - xi) / (tau (1 + xi))`. Two routes:
//!
//! * [`weights_fft`] samples the generating function on a circle of radius `rho`
//!   and inverts with one FFT. Works for any kernel that can be evaluated.
//! * [`weights_debye_recurrence`] expands the degree-one rational function a
//!   single Debye pole produces. Exact up to round-off.
//!
//! With the default contour the FFT route delivers roughly half machine
//! precision relative to the largest weight: sampling error is `O(rho^L)` while
//! round-off is amplified by `rho^-n`, which reaches `eps^-1/2` at `n = N`.

use std::collections::BTreeMap;
use std::io::Write;

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::discretization::MaterialLayout;
use crate::error::{Error, Result};
use crate::material::{DebyePole, MaterialModel, PhysicalConstants};

/// Limit on `max |Im g_n| / max |g_n|` of the raw inverse transform.
pub const REALNESS_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct WeightTable {
    pub tau_step: f64,
    /// `omega_0 .. omega_N` in F/m.
    pub weights: Vec<f64>,
    pub material_name: String,
}

impl WeightTable {
    pub fn zeros(material_name: impl Into<String>, tau_step: f64, n_weights: usize) -> Self {
        Self {
            tau_step,
            weights: vec![0.0; n_weights],
            material_name: material_name.into(),
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.weights.iter().all(|&w| w == 0.0)
    }

    pub fn max_abs(&self) -> f64 {
        self.weights.iter().fold(0.0, |m, w| m.max(w.abs()))
    }

    /// Truncated generating function `sum_n omega_n xi^n` (Horner).
    pub fn generating_function(&self, xi: Complex64) -> Complex64 {
        self.weights
            .iter()
            .rev()
            .fold(Complex64::new(0.0, 0.0), |acc, &w| acc * xi + w)
    }

    /// Writes `n,omega_n` rows.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "n,omega_n")?;
        for (n, w) in self.weights.iter().enumerate() {
            writeln!(out, "{n},{w:.16e}")?;
        }
        Ok(())
    }

    fn add_assign(&mut self, other: &WeightTable) {
        for (a, b) in self.weights.iter_mut().zip(&other.weights) {
            *a += b;
        }
    }
}

/// Sampling circle for the FFT route.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContourParams {
    /// Number of samples `L`, at least the number of weights.
    pub fft_length: usize,
    /// Circle radius `rho`, strictly inside the unit disc.
    pub radius: f64,
}

impl ContourParams {
    /// `rho = eps^(1/(2N))`, `L` the smallest power of two `>= max(2N, 512)`.
    pub fn default_for(n_weights: usize) -> Self {
        let n = n_weights.saturating_sub(1).max(1);
        Self {
            fft_length: (2 * n).max(512).next_power_of_two(),
            radius: f64::EPSILON.powf(1.0 / (2.0 * n as f64)),
        }
    }

    fn check(&self, n_weights: usize) -> Result<()> {
        if self.fft_length < n_weights {
            return Err(Error::InvalidParameter {
                name: "fft_length",
                reason: format!("{} is shorter than the {} requested weights", self.fft_length, n_weights),
            });
        }
        if !(self.radius > 0.0 && self.radius < 1.0) {
            return Err(Error::InvalidParameter {
                name: "radius",
                reason: format!("{} is not in (0, 1)", self.radius),
            });
        }
        Ok(())
    }
}

/// Maps the power-series variable to the Laplace variable, `2 (1 - xi) / (tau (1 + xi))`.
pub fn trapezoidal_symbol(xi: Complex64, tau_step: f64) -> Complex64 {
    (2.0 / tau_step) * (1.0 - xi) / (1.0 + xi)
}

fn check_step(tau_step: f64, n_weights: usize) -> Result<()> {
    if !(tau_step > 0.0 && tau_step.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "tau_step",
            reason: format!("{tau_step} is not a positive time step"),
        });
    }
    if n_weights == 0 {
        return Err(Error::InvalidParameter {
            name: "n_weights",
            reason: "at least one weight is required".into(),
        });
    }
    Ok(())
}

pub fn weights_fft(
    model: &MaterialModel,
    constants: &PhysicalConstants,
    tau_step: f64,
    n_weights: usize,
    params: &ContourParams,
) -> Result<WeightTable> {
    check_step(tau_step, n_weights)?;
    params.check(n_weights)?;
    if !model.is_dispersive() {
        return Ok(WeightTable::zeros(&model.name, tau_step, n_weights));
    }

    let len = params.fft_length;
    let rho = params.radius;
    let mut samples = vec![Complex64::new(0.0, 0.0); len];
    // Sample the upper half of the circle and mirror, so the inverse transform is real.
    for l in 0..=len / 2 {
        let phi = 2.0 * std::f64::consts::PI * l as f64 / len as f64;
        let xi = Complex64::from_polar(rho, phi);
        let value = constants.eps0 * model.chi_hat(trapezoidal_symbol(xi, tau_step))?;
        samples[l] = value;
        if l != 0 && l != len - l {
            samples[len - l] = value.conj();
        }
    }
    samples[0].im = 0.0;
    if len.is_multiple_of(2) {
        samples[len / 2].im = 0.0;
    }

    FftPlanner::new().plan_fft_forward(len).process(&mut samples);

    let head = &samples[..n_weights];
    let max_abs = head.iter().fold(0.0f64, |m, g| m.max(g.norm()));
    let max_imag = head.iter().fold(0.0f64, |m, g| m.max(g.im.abs()));
    let limit = REALNESS_TOLERANCE * max_abs;
    if max_imag > limit {
        return Err(Error::WeightsNotConverged { max_imag, limit });
    }

    let ln_rho = rho.ln();
    let weights = head
        .iter()
        .enumerate()
        .map(|(n, g)| g.re / len as f64 * (-(n as f64) * ln_rho).exp())
        .collect();
    Ok(WeightTable {
        tau_step,
        weights,
        material_name: model.name.clone(),
    })
}

/// Closed-form weights of one Debye pole.
///
/// With `r = tau_relax / tau_step`, `a = 1 + 2r`, `b = 1 - 2r` the generating
/// function is `eps0 delta (1 + xi) / (a + b xi)`, so `omega_0 = eps0 delta / a`,
/// `omega_1 = eps0 delta (a - b) / a^2` and `omega_n = (-b/a) omega_{n-1}` after that.
pub fn weights_debye_recurrence(
    pole: &DebyePole,
    constants: &PhysicalConstants,
    tau_step: f64,
    n_weights: usize,
) -> Result<WeightTable> {
    check_step(tau_step, n_weights)?;
    let r = pole.tau_relax / tau_step;
    let a = 1.0 + 2.0 * r;
    let b = 1.0 - 2.0 * r;
    let scale = constants.eps0 * pole.delta_eps;
    let ratio = -b / a;
    let mut weights = Vec::with_capacity(n_weights);
    weights.push(scale / a);
    if n_weights > 1 {
        weights.push(scale * (a - b) / (a * a));
    }
    while weights.len() < n_weights {
        let prev = weights[weights.len() - 1];
        weights.push(prev * ratio);
    }
    Ok(WeightTable {
        tau_step,
        weights,
        material_name: String::new(),
    })
}

/// Entrywise sum of the per-pole recurrence tables.
pub fn weights_debye_model(
    model: &MaterialModel,
    constants: &PhysicalConstants,
    tau_step: f64,
    n_weights: usize,
) -> Result<WeightTable> {
    check_step(tau_step, n_weights)?;
    let mut table = WeightTable::zeros(&model.name, tau_step, n_weights);
    for pole in &model.poles {
        table.add_assign(&weights_debye_recurrence(pole, constants, tau_step, n_weights)?);
    }
    Ok(table)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WeightMethod {
    /// FFT on a circle; `None` selects [`ContourParams::default_for`].
    Fft(Option<ContourParams>),
    /// Exact per-pole recurrence (Debye kernels only).
    Recurrence,
}

pub fn weights_for_model(
    model: &MaterialModel,
    constants: &PhysicalConstants,
    tau_step: f64,
    n_weights: usize,
    method: WeightMethod,
) -> Result<WeightTable> {
    match method {
        WeightMethod::Fft(params) => {
            let params = params.unwrap_or_else(|| ContourParams::default_for(n_weights));
            weights_fft(model, constants, tau_step, n_weights, &params)
        }
        WeightMethod::Recurrence => weights_debye_model(model, constants, tau_step, n_weights),
    }
}

/// One table per distinct material referenced by the layout.
pub fn weights_for_layout(
    layout: &MaterialLayout,
    materials: &BTreeMap<String, MaterialModel>,
    constants: &PhysicalConstants,
    tau_step: f64,
    n_weights: usize,
    method: WeightMethod,
) -> Result<BTreeMap<String, WeightTable>> {
    let mut tables = BTreeMap::new();
    for region in &layout.regions {
        if tables.contains_key(&region.material) {
            continue;
        }
        let model = materials
            .get(&region.material)
            .ok_or_else(|| Error::UnknownMaterial(region.material.clone()))?;
        let table = weights_for_model(model, constants, tau_step, n_weights, method)?;
        tables.insert(region.material.clone(), table);
    }
    Ok(tables)
}
