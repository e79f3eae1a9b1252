//! Multipole Debye media.
//!
//! A material is a high-frequency susceptibility `eps_inf_prime` plus a list of
//! Debye poles. The memory part of the susceptibility is the transfer function
//!
//! ```text
//! chi(s) = sum_i delta_eps_i / (1 + s * tau_i)
//! ```
//!
//! Poles are summed in the order they are listed, so round-off is reproducible
//! between runs and between the time-stepping schemes that consume the model.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Poles with a susceptibility increment below this are dropped when a model is built.
pub const NEGLIGIBLE_DELTA_EPS: f64 = 1e-30;

/// Relative distance to `s = -1/tau` below which evaluation is refused.
pub const POLE_TOLERANCE: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalConstants {
    /// Vacuum permittivity, F/m.
    pub eps0: f64,
    /// Vacuum permeability, H/m.
    pub mu0: f64,
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        Self {
            eps0: 8.8541878128e-12,
            mu0: 4e-7 * PI,
        }
    }
}

impl PhysicalConstants {
    pub fn speed_of_light(&self) -> f64 {
        1.0 / (self.eps0 * self.mu0).sqrt()
    }
}

/// A single first-order relaxation term `delta_eps / (1 + s tau_relax)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DebyePole {
    /// Susceptibility increment `eps_s - eps_inf'` of this pole (dimensionless).
    pub delta_eps: f64,
    /// Relaxation time in seconds.
    pub tau_relax: f64,
}

impl DebyePole {
    pub fn new(delta_eps: f64, tau_relax: f64) -> Self {
        Self { delta_eps, tau_relax }
    }

    /// Builds a pole from its corner angular frequency, `tau = 1 / omega_corner`.
    ///
    /// Tabulated tissue data is usually written as `delta / (1 + j omega / omega_c)`;
    /// this conversion makes the transfer function match such a table term by term.
    pub fn from_corner_frequency(delta_eps: f64, omega_corner: f64) -> Self {
        Self::new(delta_eps, 1.0 / omega_corner)
    }

    pub fn chi_hat(&self, s: Complex64) -> Result<Complex64> {
        chi_hat_pole(self, s)
    }

    fn violations(&self, index: usize) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.delta_eps > 0.0 && self.delta_eps.is_finite()) {
            out.push(format!("pole {index}: delta_eps must be positive (got {})", self.delta_eps));
        }
        if !(self.tau_relax > 0.0 && self.tau_relax.is_finite()) {
            out.push(format!("pole {index}: tau_relax must be positive (got {})", self.tau_relax));
        }
        out
    }
}

/// `delta_eps / (1 + s tau_relax)`, refusing to evaluate on top of the pole.
pub fn chi_hat_pole(pole: &DebyePole, s: Complex64) -> Result<Complex64> {
    let st = s * pole.tau_relax;
    let denom = Complex64::new(1.0, 0.0) + st;
    if denom.norm() < POLE_TOLERANCE * (1.0 + st.norm()) {
        return Err(Error::TransferPole { s, tau_relax: pole.tau_relax });
    }
    Ok(pole.delta_eps / denom)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaterialModel {
    pub name: String,
    /// Global high-frequency susceptibility `eps_inf' = sum_i eps'_{i,inf}`.
    pub eps_inf_prime: f64,
    pub poles: Vec<DebyePole>,
}

impl MaterialModel {
    /// Validates the model and drops poles whose increment is negligible.
    pub fn new(name: impl Into<String>, eps_inf_prime: f64, poles: Vec<DebyePole>) -> Result<Self> {
        let mut model = Self {
            name: name.into(),
            eps_inf_prime,
            poles,
        };
        let report = validate_model(&model);
        if !report.valid {
            return Err(Error::InvalidMaterial {
                name: model.name,
                violations: report.violations,
            });
        }
        model.poles.retain(|p| p.delta_eps >= NEGLIGIBLE_DELTA_EPS);
        Ok(model)
    }

    pub fn vacuum(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            eps_inf_prime: 0.0,
            poles: Vec::new(),
        }
    }

    /// Five-pole Debye model of human tissue with `eps_inf' = 3.3`.
    ///
    /// Corner frequencies (rad/s): 138π, 86π·10³, 1.34π·10⁶, 460π·10⁶, 40π·10⁹.
    pub fn five_pole_tissue() -> Self {
        let poles = [
            (8.5e5, 138.0),
            (8.19e3, 86e3),
            (1.19e3, 1.34e6),
            (32.0, 460e6),
            (45.8, 40e9),
        ]
        .into_iter()
        .map(|(delta, w_over_pi)| DebyePole::from_corner_frequency(delta, w_over_pi * PI))
        .collect();
        Self {
            name: "tissue".into(),
            eps_inf_prime: 3.3,
            poles,
        }
    }

    /// Relative high-frequency permittivity `1 + eps_inf'`.
    pub fn eps_inf(&self) -> f64 {
        1.0 + self.eps_inf_prime
    }

    pub fn is_dispersive(&self) -> bool {
        !self.poles.is_empty()
    }

    pub fn chi_hat(&self, s: Complex64) -> Result<Complex64> {
        chi_hat(self, s)
    }

    /// `chi(0)`, the sum of the pole increments.
    pub fn static_susceptibility(&self) -> f64 {
        self.poles.iter().fold(0.0, |acc, p| acc + p.delta_eps)
    }
}

/// Sum of the per-pole transfer functions, in listed order. Empty models give zero.
pub fn chi_hat(model: &MaterialModel, s: Complex64) -> Result<Complex64> {
    model
        .poles
        .iter()
        .try_fold(Complex64::new(0.0, 0.0), |acc, p| Ok(acc + chi_hat_pole(p, s)?))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub valid: bool,
    pub eps_inf: f64,
    pub static_susceptibility: f64,
    pub violations: Vec<String>,
}

pub fn validate_model(model: &MaterialModel) -> ValidationReport {
    let mut violations = Vec::new();
    if !(model.eps_inf_prime >= 0.0 && model.eps_inf_prime.is_finite()) {
        violations.push(format!(
            "eps_inf_prime must be non-negative (got {})",
            model.eps_inf_prime
        ));
    }
    for (i, pole) in model.poles.iter().enumerate() {
        violations.extend(pole.violations(i));
    }
    ValidationReport {
        valid: violations.is_empty(),
        eps_inf: model.eps_inf(),
        static_susceptibility: model.static_susceptibility(),
        violations,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn static_limit_is_delta_eps() {
        let pole = DebyePole::from_corner_frequency(45.8, 40e9 * PI);
        assert_eq!(chi_hat_pole(&pole, c(0.0, 0.0)).unwrap(), c(45.8, 0.0));
    }

    #[test]
    fn first_tissue_pole_at_its_corner() {
        let pole = DebyePole::from_corner_frequency(8.5e5, 138.0 * PI);
        let v = chi_hat_pole(&pole, c(0.0, 138.0 * PI)).unwrap();
        assert_relative_eq!(v.re, 4.25e5, max_relative = 1e-14);
        assert_relative_eq!(v.im, -4.25e5, max_relative = 1e-14);
    }

    #[test]
    fn modulus_decays_along_positive_axis() {
        let pole = DebyePole::new(3.0, 1e-9);
        let mut last = f64::INFINITY;
        for k in 0..40 {
            let s = 10f64.powi(k - 5);
            let m = chi_hat_pole(&pole, c(s, 0.0)).unwrap().norm();
            assert!(m <= last);
            last = m;
        }
        assert!(last < 1e-20);
    }

    #[test]
    fn evaluation_at_pole_is_an_error() {
        let pole = DebyePole::new(1.0, 2.0);
        assert!(matches!(
            chi_hat_pole(&pole, c(-0.5, 0.0)),
            Err(Error::TransferPole { .. })
        ));
        assert!(chi_hat_pole(&pole, c(-0.5, 1e-6)).is_ok());
    }

    #[test]
    fn tissue_static_susceptibility() {
        let m = MaterialModel::five_pole_tissue();
        let v = chi_hat(&m, c(0.0, 0.0)).unwrap();
        assert_relative_eq!(v.re, 859457.8, max_relative = 1e-15);
        assert_eq!(v.im, 0.0);
    }

    #[test]
    fn vacuum_is_zero_everywhere() {
        let m = MaterialModel::vacuum("air");
        for s in [c(0.0, 0.0), c(1e9, -3e9), c(-1.0, 0.0)] {
            assert_eq!(chi_hat(&m, s).unwrap(), c(0.0, 0.0));
        }
    }

    #[test]
    fn validation_reports() {
        let tissue = validate_model(&MaterialModel::five_pole_tissue());
        assert!(tissue.valid);
        assert_relative_eq!(tissue.eps_inf, 4.3, max_relative = 1e-15);

        let bad = MaterialModel {
            name: "bad".into(),
            eps_inf_prime: 0.0,
            poles: vec![DebyePole::new(-1.0, 1.0)],
        };
        let r = validate_model(&bad);
        assert!(!r.valid);
        assert!(r.violations[0].contains("delta_eps must be positive"));

        let neg = MaterialModel {
            name: "neg".into(),
            eps_inf_prime: -0.5,
            poles: vec![DebyePole::new(1.0, 0.0)],
        };
        assert_eq!(validate_model(&neg).violations.len(), 2);

        let vac = validate_model(&MaterialModel::vacuum("air"));
        assert!(vac.valid);
        assert_eq!(vac.static_susceptibility, 0.0);
    }

    #[test]
    fn negligible_poles_are_dropped_on_build() {
        let m = MaterialModel::new("m", 1.0, vec![DebyePole::new(1e-40, 1.0), DebyePole::new(2.0, 1.0)])
            .unwrap();
        assert_eq!(m.poles.len(), 1);
        assert!(MaterialModel::new("m", 1.0, vec![DebyePole::new(-2.0, 1.0)]).is_err());
    }

    proptest! {
        #[test]
        fn passive_on_right_half_plane(re in 0.0f64..1e12, im in -1e12f64..1e12) {
            let m = MaterialModel::five_pole_tissue();
            let v = chi_hat(&m, c(re, im)).unwrap();
            prop_assert!(v.re >= 0.0);
            prop_assert!(v.norm() <= m.static_susceptibility() * (1.0 + 1e-15));
            for p in &m.poles {
                let vp = chi_hat_pole(p, c(re, im)).unwrap();
                prop_assert!(vp.re >= 0.0);
                prop_assert!(vp.norm() <= p.delta_eps * (1.0 + 1e-15));
            }
        }

        #[test]
        fn sum_matches_per_pole_fold(re in -1e10f64..1e10, im in 1.0f64..1e10) {
            let m = MaterialModel::five_pole_tissue();
            let s = c(re, im);
            let mut acc = c(0.0, 0.0);
            for p in &m.poles {
                acc += chi_hat_pole(p, s).unwrap();
            }
            prop_assert_eq!(chi_hat(&m, s).unwrap(), acc);
        }

        #[test]
        fn conjugate_symmetry(re in -1e10f64..1e10, im in 1.0f64..1e10) {
            let m = MaterialModel::five_pole_tissue();
            let s = c(re, im);
            prop_assert_eq!(chi_hat(&m, s.conj()).unwrap(), chi_hat(&m, s).unwrap().conj());
        }

        #[test]
        fn real_axis_gives_real_values(s in 0.0f64..1e13) {
            let m = MaterialModel::five_pole_tissue();
            prop_assert_eq!(chi_hat(&m, c(s, 0.0)).unwrap().im, 0.0);
        }
    }
}
