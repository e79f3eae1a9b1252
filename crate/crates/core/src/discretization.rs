//! Uniform periodic 1D mesh, lumped mass matrices and the discrete curl.
//!
//! The electric field and polarizations are continuous piecewise linears
//! (one value per node), the magnetic field is piecewise constant (one value per
//! cell). Vertex-rule quadrature makes every mass matrix diagonal. With `n`
//! cells on a periodic interval there are `n` nodes; cell `j` spans nodes `j`
//! and `j + 1 (mod n)`.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::material::{DebyePole, MaterialModel, PhysicalConstants};

/// Seed of the start vector for the power iteration in [`cfl_bound`].
pub const CFL_SEED: u64 = 0x5eed_cf1;

/// Iteration cap of the power iteration in [`cfl_bound`].
pub const POWER_ITERATION_CAP: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mesh1D {
    pub z_min: f64,
    pub z_max: f64,
    pub n_cells: usize,
}

impl Mesh1D {
    pub fn h(&self) -> f64 {
        (self.z_max - self.z_min) / self.n_cells as f64
    }

    pub fn n_nodes(&self) -> usize {
        self.n_cells
    }

    pub fn node(&self, j: usize) -> f64 {
        self.z_min + j as f64 * self.h()
    }

    pub fn midpoint(&self, j: usize) -> f64 {
        self.z_min + (j as f64 + 0.5) * self.h()
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n_nodes()).map(|j| self.node(j)).collect()
    }

    pub fn midpoints(&self) -> Vec<f64> {
        (0..self.n_cells).map(|j| self.midpoint(j)).collect()
    }
}

pub fn build_mesh(z_min: f64, z_max: f64, n_cells: usize) -> Result<Mesh1D> {
    if !(z_min.is_finite() && z_max.is_finite() && z_max > z_min) {
        return Err(Error::InvalidParameter {
            name: "domain",
            reason: format!("z_max ({z_max}) must exceed z_min ({z_min})"),
        });
    }
    if n_cells < 2 {
        return Err(Error::InvalidParameter {
            name: "n_cells",
            reason: format!("a periodic mesh needs at least 2 cells (got {n_cells})"),
        });
    }
    Ok(Mesh1D { z_min, z_max, n_cells })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayoutRegion {
    pub z_start: f64,
    pub z_end: f64,
    pub material: String,
}

impl LayoutRegion {
    pub fn new(z_start: f64, z_end: f64, material: impl Into<String>) -> Self {
        Self {
            z_start,
            z_end,
            material: material.into(),
        }
    }
}

/// Intervals tagged with material names.
///
/// A cell takes the material of the region containing its midpoint. A node
/// takes the material of the cell to its right, so a node sitting exactly on an
/// interface belongs to the region that starts there.
#[derive(Debug, Clone, PartialEq)]
pub struct MaterialLayout {
    pub regions: Vec<LayoutRegion>,
}

impl MaterialLayout {
    pub fn uniform(mesh: &Mesh1D, material: impl Into<String>) -> Self {
        Self {
            regions: vec![LayoutRegion::new(mesh.z_min, mesh.z_max, material)],
        }
    }

    /// Checks ordering, overlaps and coverage of `[z_min, z_max]`.
    pub fn validate(&self, mesh: &Mesh1D) -> Result<()> {
        let tol = 1e-12 * (mesh.z_max - mesh.z_min);
        if self.regions.is_empty() {
            return Err(Error::InvalidLayout("no regions".into()));
        }
        let mut sorted: Vec<&LayoutRegion> = self.regions.iter().collect();
        sorted.sort_by(|a, b| a.z_start.total_cmp(&b.z_start));
        for r in &sorted {
            if !(r.z_end > r.z_start) {
                return Err(Error::InvalidLayout(format!(
                    "region `{}` has empty extent [{}, {}]",
                    r.material, r.z_start, r.z_end
                )));
            }
        }
        if sorted[0].z_start > mesh.z_min + tol {
            return Err(Error::InvalidLayout(format!("z in [{}, {}) is not covered", mesh.z_min, sorted[0].z_start)));
        }
        let last = sorted[sorted.len() - 1];
        if last.z_end < mesh.z_max - tol {
            return Err(Error::InvalidLayout(format!("z in ({}, {}] is not covered", last.z_end, mesh.z_max)));
        }
        for pair in sorted.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            if b.z_start < a.z_end - tol {
                return Err(Error::InvalidLayout(format!(
                    "regions `{}` [{}, {}] and `{}` [{}, {}] overlap",
                    a.material, a.z_start, a.z_end, b.material, b.z_start, b.z_end
                )));
            }
            if b.z_start > a.z_end + tol {
                return Err(Error::InvalidLayout(format!("gap between {} and {}", a.z_end, b.z_start)));
            }
        }
        Ok(())
    }

    fn material_at(&self, z: f64) -> Option<&str> {
        self.regions
            .iter()
            .find(|r| z >= r.z_start && z < r.z_end)
            .map(|r| r.material.as_str())
    }

    /// Region index per node, into the returned list of distinct material names.
    pub fn assign_nodes(&self, mesh: &Mesh1D) -> Result<NodeRegions> {
        self.validate(mesh)?;
        let mut names: Vec<String> = Vec::new();
        let mut of_node = Vec::with_capacity(mesh.n_nodes());
        for j in 0..mesh.n_nodes() {
            let name = self
                .material_at(mesh.midpoint(j))
                .ok_or_else(|| Error::InvalidLayout(format!("cell {j} is not covered")))?;
            let idx = match names.iter().position(|n| n == name) {
                Some(i) => i,
                None => {
                    names.push(name.to_string());
                    names.len() - 1
                }
            };
            of_node.push(idx);
        }
        Ok(NodeRegions { names, of_node })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeRegions {
    pub names: Vec<String>,
    pub of_node: Vec<usize>,
}

impl NodeRegions {
    pub fn n_regions(&self) -> usize {
        self.names.len()
    }

    pub fn nodes_of(&self, region: usize) -> Vec<usize> {
        (0..self.of_node.len()).filter(|&k| self.of_node[k] == region).collect()
    }
}

/// The periodic difference matrix `(C e)_j = e_{j+1} - e_j`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DifferenceMatrix {
    pub n: usize,
}

impl DifferenceMatrix {
    pub fn apply(&self, e: &[f64], out: &mut [f64]) {
        let n = self.n;
        for j in 0..n {
            out[j] = e[(j + 1) % n] - e[j];
        }
    }

    /// `(C^T h)_k = h_{k-1} - h_k`.
    pub fn apply_transpose(&self, h: &[f64], out: &mut [f64]) {
        let n = self.n;
        for k in 0..n {
            out[k] = h[(k + n - 1) % n] - h[k];
        }
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = self.n;
        let mut m = vec![vec![0.0; n]; n];
        for (j, row) in m.iter_mut().enumerate() {
            row[(j + 1) % n] += 1.0;
            row[j] -= 1.0;
        }
        m
    }
}

/// Polarization pole active on a set of nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct PoleGroup {
    pub region: usize,
    pub pole: DebyePole,
    pub nodes: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct DiscreteOperators {
    pub mesh: Mesh1D,
    pub constants: PhysicalConstants,
    /// `mu0 h` per cell.
    pub m_h: Vec<f64>,
    /// `eps0 eps_inf(node) h` per node.
    pub m_e: Vec<f64>,
    /// Lumped nodal mass `h`; couples polarization rates into the electric equation.
    pub m_lumped: Vec<f64>,
    pub curl: DifferenceMatrix,
    pub regions: NodeRegions,
    /// Material model per region, indexed like `regions.names`.
    pub materials: Vec<MaterialModel>,
    pub pole_groups: Vec<PoleGroup>,
}

impl DiscreteOperators {
    pub fn n_nodes(&self) -> usize {
        self.m_e.len()
    }

    pub fn n_cells(&self) -> usize {
        self.m_h.len()
    }

    /// Diagonal of `M_{d,i}` on the nodes of `group`: `tau_i / (eps0 delta_i) * M_lumped`.
    pub fn m_d(&self, group: &PoleGroup, node: usize) -> f64 {
        group.pole.tau_relax / (self.constants.eps0 * group.pole.delta_eps) * self.m_lumped[node]
    }

    /// Diagonal of `M_{p,i}`: `1 / (eps0 delta_i) * M_lumped`.
    pub fn m_p(&self, group: &PoleGroup, node: usize) -> f64 {
        self.m_lumped[node] / (self.constants.eps0 * group.pole.delta_eps)
    }

    pub fn material_of_node(&self, node: usize) -> &MaterialModel {
        &self.materials[self.regions.of_node[node]]
    }

    pub fn total_poles(&self) -> usize {
        self.pole_groups.len()
    }
}

pub fn build_operators(
    mesh: &Mesh1D,
    layout: &MaterialLayout,
    materials: &BTreeMap<String, MaterialModel>,
    constants: &PhysicalConstants,
) -> Result<DiscreteOperators> {
    let regions = layout.assign_nodes(mesh)?;
    let models = regions
        .names
        .iter()
        .map(|name| materials.get(name).cloned().ok_or_else(|| Error::UnknownMaterial(name.clone())))
        .collect::<Result<Vec<_>>>()?;
    for m in &models {
        let report = crate::material::validate_model(m);
        if !report.valid {
            return Err(Error::InvalidMaterial {
                name: m.name.clone(),
                violations: report.violations,
            });
        }
    }

    let h = mesh.h();
    let n = mesh.n_nodes();
    let m_h = vec![constants.mu0 * h; mesh.n_cells];
    let m_e = (0..n)
        .map(|k| constants.eps0 * models[regions.of_node[k]].eps_inf() * h)
        .collect();
    let m_lumped = vec![h; n];

    let mut pole_groups = Vec::new();
    for (region, model) in models.iter().enumerate() {
        let nodes = regions.nodes_of(region);
        if nodes.is_empty() {
            continue;
        }
        for pole in &model.poles {
            pole_groups.push(PoleGroup {
                region,
                pole: *pole,
                nodes: nodes.clone(),
            });
        }
    }

    Ok(DiscreteOperators {
        mesh: *mesh,
        constants: *constants,
        m_h,
        m_e,
        m_lumped,
        curl: DifferenceMatrix { n },
        regions,
        materials: models,
        pole_groups,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CflEstimate {
    /// Largest step with `tau^2 |C e|^2_{M_h^-1} <= |e|^2_{M_e}` for all `e`.
    pub tau_max: f64,
    /// Largest eigenvalue of `C^T M_h^-1 C` relative to `M_e`.
    pub lambda_max: f64,
    pub power_iterations: usize,
}

/// Symmetric cyclic tridiagonal `K - x M_e` with `K = C^T M_h^-1 C`.
struct Pencil<'a> {
    cell_inv: Vec<f64>,
    m_e: &'a [f64],
}

impl<'a> Pencil<'a> {
    fn new(ops: &'a DiscreteOperators) -> Self {
        Self {
            cell_inv: ops.m_h.iter().map(|m| 1.0 / m).collect(),
            m_e: &ops.m_e,
        }
    }

    fn n(&self) -> usize {
        self.m_e.len()
    }

    /// `y = K x`.
    fn apply_stiffness(&self, x: &[f64], y: &mut [f64]) {
        let n = self.n();
        for k in 0..n {
            let left = (k + n - 1) % n;
            let right = (k + 1) % n;
            y[k] = self.cell_inv[left] * (x[k] - x[left]) + self.cell_inv[k] * (x[k] - x[right]);
        }
    }

    /// Upper bound on the generalized spectrum from Gershgorin on `M_e^-1/2 K M_e^-1/2`.
    fn gershgorin(&self) -> f64 {
        let n = self.n();
        (0..n)
            .map(|k| {
                let left = (k + n - 1) % n;
                let right = (k + 1) % n;
                let d = (self.cell_inv[left] + self.cell_inv[k]) / self.m_e[k];
                let off = self.cell_inv[left] / (self.m_e[k] * self.m_e[left]).sqrt()
                    + self.cell_inv[k] / (self.m_e[k] * self.m_e[right]).sqrt();
                d + off
            })
            .fold(0.0, f64::max)
    }

    /// Number of generalized eigenvalues below `x`, from the inertia of `K - x M_e`.
    fn count_below(&self, x: f64) -> usize {
        let n = self.n();
        let diag: Vec<f64> = (0..n)
            .map(|k| self.cell_inv[(k + n - 1) % n] + self.cell_inv[k] - x * self.m_e[k])
            .collect();
        // off[k] couples k and k+1; corner couples 0 and n-1.
        let mut off: Vec<f64> = (0..n - 1).map(|k| -self.cell_inv[k]).collect();
        let corner = -self.cell_inv[n - 1];
        if n == 2 {
            off[0] += corner;
            return sign_count_dense2(diag[0], off[0], diag[1]);
        }
        let mut d = diag;
        let mut last_col = vec![0.0; n];
        last_col[0] = corner;
        let mut negatives = 0;
        let guard = |p: f64| if p == 0.0 { -f64::MIN_POSITIVE } else { p };
        for k in 0..n - 2 {
            let p = guard(d[k]);
            if p < 0.0 {
                negatives += 1;
            }
            let a = off[k];
            let b = last_col[k];
            d[k + 1] -= a * a / p;
            if k + 1 == n - 2 {
                off[n - 2] -= a * b / p;
            } else {
                last_col[k + 1] -= a * b / p;
            }
            d[n - 1] -= b * b / p;
        }
        let p = guard(d[n - 2]);
        if p < 0.0 {
            negatives += 1;
        }
        d[n - 1] -= off[n - 2] * off[n - 2] / p;
        if guard(d[n - 1]) < 0.0 {
            negatives += 1;
        }
        negatives
    }
}

fn sign_count_dense2(a: f64, b: f64, c: f64) -> usize {
    let p = if a == 0.0 { -f64::MIN_POSITIVE } else { a };
    let s = c - b * b / p;
    usize::from(p < 0.0) + usize::from(s < 0.0)
}

/// Largest stable step of the energy bound `tau^2 |Ce|^2_{M_h^-1} <= |e|^2_{M_e}`.
///
/// A power iteration (fixed seed [`CFL_SEED`]) gives a Rayleigh-quotient lower
/// bound on the top of the spectrum. Periodic meshes have nearly degenerate
/// top eigenvalues, so the estimate is then refined by bisection on the
/// inertia of `K - x M_e` until the bracket is below `1e-13` relative.
pub fn cfl_bound(ops: &DiscreteOperators) -> Result<CflEstimate> {
    let pencil = Pencil::new(ops);
    let n = pencil.n();
    let mut rng = ChaCha8Rng::seed_from_u64(CFL_SEED);
    // Iterate on the symmetric form y = M_e^-1/2 K M_e^-1/2 x.
    let scale: Vec<f64> = ops.m_e.iter().map(|m| 1.0 / m.sqrt()).collect();
    let mut x: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
    let mut tmp = vec![0.0; n];
    let mut y = vec![0.0; n];
    let mut rayleigh = 0.0;
    let mut iterations = 0;
    for it in 1..=POWER_ITERATION_CAP {
        iterations = it;
        let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::EigenNotConverged { iterations: it });
        }
        for xi in x.iter_mut() {
            *xi /= norm;
        }
        for k in 0..n {
            tmp[k] = x[k] * scale[k];
        }
        pencil.apply_stiffness(&tmp, &mut y);
        for k in 0..n {
            y[k] *= scale[k];
        }
        let next: f64 = x.iter().zip(&y).map(|(a, b)| a * b).sum();
        let settled = (next - rayleigh).abs() <= 1e-6 * next.abs();
        rayleigh = next;
        std::mem::swap(&mut x, &mut y);
        if settled {
            break;
        }
    }
    if !(rayleigh.is_finite() && rayleigh > 0.0) {
        return Err(Error::EigenNotConverged { iterations });
    }

    let mut lo = rayleigh * (1.0 - 1e-12);
    let mut hi = pencil.gershgorin() * (1.0 + 1e-12);
    if pencil.count_below(hi) != n || pencil.count_below(lo) == n {
        return Err(Error::EigenNotConverged { iterations });
    }
    for _ in 0..200 {
        if hi - lo <= 1e-13 * hi {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if pencil.count_below(mid) == n {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let lambda_max = 0.5 * (lo + hi);
    Ok(CflEstimate {
        tau_max: 1.0 / lambda_max.sqrt(),
        lambda_max,
        power_iterations: iterations,
    })
}
