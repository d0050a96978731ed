//! Global P1 operators for the Poisson and Nernst–Planck equations.
//!
//! Every Nernst–Planck operator acts on one species' nodal concentrations and
//! is returned before any boundary treatment; [`apply_dirichlet`] then turns
//! constrained rows into identity rows and lifts the boundary values into the
//! right-hand side.

mod bernoulli;

pub use bernoulli::{bernoulli, edge_harmonic_average};

use std::str::FromStr;

use thiserror::Error;

use crate::linalg::{CsrMatrix, LinalgError};
use crate::mesh::{dot, Point, TetMesh, LOCAL_EDGES};
use crate::quadrature::TetRule;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AssemblyError {
    #[error("vector has {found} entries, mesh has {expected} nodes")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("time step must be positive and finite, got {0}")]
    InvalidTimeStep(f64),
    #[error("invalid scheme configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Discretization of the Nernst–Planck operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    Fem,
    Supg,
    Eafe,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [Scheme::Fem, Scheme::Supg, Scheme::Eafe];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Fem => "fem",
            Scheme::Supg => "supg",
            Scheme::Eafe => "eafe",
        }
    }
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = AssemblyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "fem" => Ok(Scheme::Fem),
            "supg" => Ok(Scheme::Supg),
            "eafe" => Ok(Scheme::Eafe),
            other => Err(AssemblyError::InvalidConfig(format!("unknown scheme '{other}'"))),
        }
    }
}

/// Scheme selection and species coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct SchemeConfig {
    pub scheme: Scheme,
    /// Coupling of each species' concentration into the Poisson right-hand side.
    pub charges: [f64; 2],
    /// Coefficient `c_i` of the drift term `c_i p ∇φ` in each species' flux.
    pub drift: [f64; 2],
    /// SUPG scale `τ̃` in the element parameter `C_K`.
    pub supg_scale: f64,
    /// Polynomial degree the source quadrature integrates exactly.
    pub quadrature_order: usize,
    /// Use the consistent mass matrix in the time derivative instead of the
    /// lumped one.
    pub consistent_mass: bool,
}

impl SchemeConfig {
    pub fn new(scheme: Scheme, charges: [f64; 2], drift: [f64; 2]) -> Self {
        Self {
            scheme,
            charges,
            drift,
            supg_scale: 1.0,
            quadrature_order: 2,
            consistent_mass: false,
        }
    }

    pub fn validate(&self) -> Result<(), AssemblyError> {
        if !self.drift.iter().chain(&self.charges).all(|v| v.is_finite()) {
            return Err(AssemblyError::InvalidConfig(
                "charges and drift coefficients must be finite".into(),
            ));
        }
        if !(self.supg_scale > 0.0 && self.supg_scale.is_finite()) {
            return Err(AssemblyError::InvalidConfig(format!(
                "supg_scale must be positive, got {}",
                self.supg_scale
            )));
        }
        Ok(())
    }
}

/// One species' Nernst–Planck system `(M + τ Ã) P = F`. The right-hand side
/// holds only the scheme's own contribution (SUPG stabilization); the time
/// stepper adds `τ G + M Pⁿ`.
#[derive(Debug, Clone, PartialEq)]
pub struct AssembledNp {
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
    pub species: usize,
}

/// Per-species inputs for one Nernst–Planck assembly.
#[derive(Debug, Clone, Copy)]
pub struct NpInputs<'a> {
    pub phi: &'a [f64],
    pub drift: f64,
    pub tau: f64,
    pub species: usize,
    /// SUPG: `∫_K F` for every tet at the new time level.
    pub source_per_tet: Option<&'a [f64]>,
    /// SUPG: concentrations at the previous time level.
    pub previous: Option<&'a [f64]>,
}

/// Shared sparsity pattern and element scatter map for a mesh.
#[derive(Debug, Clone)]
pub struct Assembler<'m> {
    mesh: &'m TetMesh,
    pattern: CsrMatrix,
    slots: Vec<[usize; 16]>,
    lumped: Vec<f64>,
}

impl<'m> Assembler<'m> {
    pub fn new(mesh: &'m TetMesh) -> Self {
        let n = mesh.num_nodes();
        let mut triplets: Vec<(usize, usize, f64)> = (0..n).map(|i| (i, i, 0.0)).collect();
        for &(a, b) in mesh.edges() {
            triplets.push((a, b, 0.0));
            triplets.push((b, a, 0.0));
        }
        let pattern = CsrMatrix::from_triplets(n, n, &triplets).expect("edge indices are node indices");
        let slots = mesh
            .tets()
            .iter()
            .map(|tet| {
                let mut s = [0; 16];
                for i in 0..4 {
                    for j in 0..4 {
                        s[4 * i + j] = pattern
                            .position(tet[i], tet[j])
                            .expect("tet entries are in the pattern");
                    }
                }
                s
            })
            .collect();
        let mut lumped = vec![0.0; n];
        for (tet, g) in mesh.tets().iter().zip(mesh.geometries()) {
            for &v in tet {
                lumped[v] += g.volume / 4.0;
            }
        }
        Self {
            mesh,
            pattern,
            slots,
            lumped,
        }
    }

    pub fn mesh(&self) -> &'m TetMesh {
        self.mesh
    }

    fn check_len(&self, v: &[f64]) -> Result<(), AssemblyError> {
        if v.len() != self.mesh.num_nodes() {
            return Err(AssemblyError::DimensionMismatch {
                expected: self.mesh.num_nodes(),
                found: v.len(),
            });
        }
        Ok(())
    }

    /// Accumulates element matrices in fixed element order.
    fn assemble_with<F>(&self, mut element: F) -> CsrMatrix
    where
        F: FnMut(usize, &mut [[f64; 4]; 4]),
    {
        let mut m = self.pattern.zeroed_like();
        let values = m.values_mut();
        for (t, slots) in self.slots.iter().enumerate() {
            let mut local = [[0.0; 4]; 4];
            element(t, &mut local);
            for i in 0..4 {
                for j in 0..4 {
                    values[slots[4 * i + j]] += local[i][j];
                }
            }
        }
        m
    }

    /// Stiffness matrix `(∇ψ_j, ∇ψ_i)` without boundary treatment.
    pub fn stiffness(&self) -> CsrMatrix {
        self.assemble_with(|t, local| *local = self.mesh.geometry(t).stiffness())
    }

    /// Diagonal of the lumped mass matrix, `|Ω_k| / 4`.
    pub fn lumped_mass_diagonal(&self) -> &[f64] {
        &self.lumped
    }

    pub fn lumped_mass(&self) -> CsrMatrix {
        let mut m = self.pattern.zeroed_like();
        for (k, &v) in self.lumped.iter().enumerate() {
            let pos = m.position(k, k).expect("diagonal is stored");
            m.values_mut()[pos] = v;
        }
        m
    }

    /// Consistent P1 mass matrix `(ψ_j, ψ_i)`.
    pub fn consistent_mass(&self) -> CsrMatrix {
        self.assemble_with(|t, local| {
            let v = self.mesh.geometry(t).volume;
            for (i, row) in local.iter_mut().enumerate() {
                for (j, e) in row.iter_mut().enumerate() {
                    *e = if i == j { v / 10.0 } else { v / 20.0 };
                }
            }
        })
    }

    /// Convection matrix `C(Φ)_{ij} = (ψ_j ∇φ_h, ∇ψ_i)`.
    pub fn convection(&self, phi: &[f64]) -> Result<CsrMatrix, AssemblyError> {
        self.check_len(phi)?;
        Ok(self.assemble_with(|t, local| {
            let g = self.mesh.geometry(t);
            let grad = g.gradient(self.tet_values(t, phi));
            for i in 0..4 {
                let v = g.volume / 4.0 * dot(grad, g.grad_lambda[i]);
                local[i] = [v; 4];
            }
        }))
    }

    fn tet_values(&self, t: usize, v: &[f64]) -> [f64; 4] {
        let tet = self.mesh.tets()[t];
        [v[tet[0]], v[tet[1]], v[tet[2]], v[tet[3]]]
    }

    /// Load vector `(g(·, t), ψ_k)` with a rule exact to `order`.
    pub fn load<G: Fn(Point, f64) -> f64>(&self, g: G, t: f64, order: usize) -> Vec<f64> {
        self.load_and_element_integrals(g, t, order).0
    }

    /// Load vector together with `∫_K g` for every element.
    pub fn load_and_element_integrals<G: Fn(Point, f64) -> f64>(
        &self,
        g: G,
        t: f64,
        order: usize,
    ) -> (Vec<f64>, Vec<f64>) {
        let rule = TetRule::with_degree(order);
        let mut load = vec![0.0; self.mesh.num_nodes()];
        let mut per_tet = Vec::with_capacity(self.mesh.num_tets());
        for (k, tet) in self.mesh.tets().iter().enumerate() {
            let vol = self.mesh.geometry(k).volume;
            let xs = rule.physical_points(&self.mesh.tet_vertices(k));
            let mut total = 0.0;
            for ((x, lam), w) in xs.iter().zip(&rule.points).zip(&rule.weights) {
                let gw = w * vol * g(*x, t);
                total += gw;
                for m in 0..4 {
                    load[tet[m]] += gw * lam[m];
                }
            }
            per_tet.push(total);
        }
        (load, per_tet)
    }

    fn mass_for(&self, consistent: bool) -> CsrMatrix {
        if consistent {
            self.consistent_mass()
        } else {
            self.lumped_mass()
        }
    }

    fn check_np(&self, inputs: &NpInputs<'_>) -> Result<(), AssemblyError> {
        self.check_len(inputs.phi)?;
        if !(inputs.tau > 0.0 && inputs.tau.is_finite()) {
            return Err(AssemblyError::InvalidTimeStep(inputs.tau));
        }
        if let Some(prev) = inputs.previous {
            self.check_len(prev)?;
        }
        if let Some(src) = inputs.source_per_tet {
            if src.len() != self.mesh.num_tets() {
                return Err(AssemblyError::DimensionMismatch {
                    expected: self.mesh.num_tets(),
                    found: src.len(),
                });
            }
        }
        Ok(())
    }

    /// Standard Galerkin operator `A_L + c C(Φ)`.
    pub fn fem_operator(&self, phi: &[f64], drift: f64) -> Result<CsrMatrix, AssemblyError> {
        self.check_len(phi)?;
        Ok(self.assemble_with(|t, local| {
            let g = self.mesh.geometry(t);
            let grad = g.gradient(self.tet_values(t, phi));
            *local = g.stiffness();
            for i in 0..4 {
                let v = drift * g.volume / 4.0 * dot(grad, g.grad_lambda[i]);
                for e in &mut local[i] {
                    *e += v;
                }
            }
        }))
    }

    /// `M + τ (A_L + c C(Φ))`.
    pub fn np_fem(&self, inputs: &NpInputs<'_>, consistent_mass: bool) -> Result<AssembledNp, AssemblyError> {
        self.check_np(inputs)?;
        let op = self.fem_operator(inputs.phi, inputs.drift)?;
        let matrix = self.mass_for(consistent_mass).add_scaled(inputs.tau, &op)?;
        Ok(AssembledNp {
            matrix,
            rhs: vec![0.0; self.mesh.num_nodes()],
            species: inputs.species,
        })
    }

    /// Edge-averaged operator `Ã(Φ)`. Off-diagonal `(i, j)` is
    /// `−ω_E B(c φ_i − c φ_j)`; diagonals make every column sum vanish.
    pub fn eafe_operator(&self, phi: &[f64], drift: f64) -> Result<CsrMatrix, AssemblyError> {
        self.check_len(phi)?;
        Ok(self.assemble_with(|t, local| {
            let g = self.mesh.geometry(t);
            let s = self.tet_values(t, phi).map(|p| drift * p);
            for (e, &(a, b)) in LOCAL_EDGES.iter().enumerate() {
                let w = g.omega[e];
                let ab = -w * bernoulli(s[a] - s[b]);
                let ba = -w * bernoulli(s[b] - s[a]);
                local[a][b] += ab;
                local[b][a] += ba;
                local[b][b] -= ab;
                local[a][a] -= ba;
            }
        }))
    }

    /// `M + τ Ã(Φ)`.
    pub fn np_eafe(&self, inputs: &NpInputs<'_>, consistent_mass: bool) -> Result<AssembledNp, AssemblyError> {
        self.check_np(inputs)?;
        let op = self.eafe_operator(inputs.phi, inputs.drift)?;
        let matrix = self.mass_for(consistent_mass).add_scaled(inputs.tau, &op)?;
        Ok(AssembledNp {
            matrix,
            rhs: vec![0.0; self.mesh.num_nodes()],
            species: inputs.species,
        })
    }

    /// SUPG pieces for drift `c`: the streamline diffusion matrix
    /// `Σ_K C_K |K| (β·∇λ_i)(β·∇λ_j)` with `β = c∇φ_h`, and the weights
    /// `w_i = −C_K β·∇λ_i` per element.
    pub fn supg_parts(&self, phi: &[f64], drift: f64, supg_scale: f64) -> Result<SupgParts, AssemblyError> {
        self.check_len(phi)?;
        let mut weights = Vec::with_capacity(self.mesh.num_tets());
        let stabilization = self.assemble_with(|t, local| {
            let g = self.mesh.geometry(t);
            let grad = g.gradient(self.tet_values(t, phi));
            let beta = grad.map(|x| drift * x);
            let ck = supg_parameter(g.diameter, dot(beta, beta).sqrt(), supg_scale);
            let bl = [0, 1, 2, 3].map(|m| dot(beta, g.grad_lambda[m]));
            for i in 0..4 {
                for j in 0..4 {
                    local[i][j] = ck * g.volume * bl[i] * bl[j];
                }
            }
            weights.push(bl.map(|b| -ck * b));
        });
        Ok(SupgParts { stabilization, weights })
    }

    /// SUPG system: FEM matrix plus `τ` times the streamline term plus the
    /// time-derivative stabilization `(ψ_j, w_i)`. The right-hand side holds
    /// `Σ_K w_i (τ ∫_K F + ∫_K pⁿ_h)`.
    pub fn np_supg(
        &self,
        inputs: &NpInputs<'_>,
        supg_scale: f64,
        consistent_mass: bool,
    ) -> Result<AssembledNp, AssemblyError> {
        self.check_np(inputs)?;
        let parts = self.supg_parts(inputs.phi, inputs.drift, supg_scale)?;
        let op = self.fem_operator(inputs.phi, inputs.drift)?;
        let mut matrix = self
            .mass_for(consistent_mass)
            .add_scaled(inputs.tau, &op)?
            .add_scaled(inputs.tau, &parts.stabilization)?;
        let time_block = self.assemble_with(|t, local| {
            let vol = self.mesh.geometry(t).volume;
            for i in 0..4 {
                local[i] = [parts.weights[t][i] * vol / 4.0; 4];
            }
        });
        matrix = matrix.add_scaled(1.0, &time_block)?;

        let mut rhs = vec![0.0; self.mesh.num_nodes()];
        for (t, tet) in self.mesh.tets().iter().enumerate() {
            let vol = self.mesh.geometry(t).volume;
            let mut integral = 0.0;
            if let Some(src) = inputs.source_per_tet {
                integral += inputs.tau * src[t];
            }
            if let Some(prev) = inputs.previous {
                integral += vol / 4.0 * tet.iter().map(|&v| prev[v]).sum::<f64>();
            }
            for i in 0..4 {
                rhs[tet[i]] += parts.weights[t][i] * integral;
            }
        }
        Ok(AssembledNp {
            matrix,
            rhs,
            species: inputs.species,
        })
    }

    /// Dispatches on the configured scheme.
    pub fn np_system(&self, cfg: &SchemeConfig, inputs: &NpInputs<'_>) -> Result<AssembledNp, AssemblyError> {
        match cfg.scheme {
            Scheme::Fem => self.np_fem(inputs, cfg.consistent_mass),
            Scheme::Supg => self.np_supg(inputs, cfg.supg_scale, cfg.consistent_mass),
            Scheme::Eafe => self.np_eafe(inputs, cfg.consistent_mass),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SupgParts {
    pub stabilization: CsrMatrix,
    pub weights: Vec<[f64; 4]>,
}

/// Element parameter `C_K`: `τ̃ h_K / (2|β|)` when the Péclet number
/// `P_K = h_K |β| / 2` is at least one, `τ̃ h_K² / 4` otherwise.
pub fn supg_parameter(h_k: f64, beta_norm: f64, supg_scale: f64) -> f64 {
    let peclet = h_k * beta_norm / 2.0;
    if peclet >= 1.0 {
        supg_scale * h_k / (2.0 * beta_norm)
    } else {
        supg_scale * h_k * h_k / 4.0
    }
}

/// Imposes Dirichlet values on the nodes flagged in `constrained`.
pub fn apply_dirichlet(
    matrix: &mut CsrMatrix,
    rhs: &mut [f64],
    constrained: &[bool],
    values: &[f64],
) -> Result<(), AssemblyError> {
    matrix.apply_dirichlet(rhs, constrained, values)?;
    Ok(())
}

pub fn assemble_stiffness(mesh: &TetMesh) -> CsrMatrix {
    Assembler::new(mesh).stiffness()
}

pub fn assemble_lumped_mass(mesh: &TetMesh) -> CsrMatrix {
    Assembler::new(mesh).lumped_mass()
}

pub fn assemble_convection(mesh: &TetMesh, phi: &[f64]) -> Result<CsrMatrix, AssemblyError> {
    Assembler::new(mesh).convection(phi)
}

/// Load vector with the default degree-2 rule.
pub fn assemble_load<G: Fn(Point, f64) -> f64>(mesh: &TetMesh, g: G, t: f64) -> Vec<f64> {
    Assembler::new(mesh).load(g, t, 2)
}

pub fn assemble_np_fem(mesh: &TetMesh, phi: &[f64], drift: f64, tau: f64) -> Result<AssembledNp, AssemblyError> {
    Assembler::new(mesh).np_fem(&simple_inputs(phi, drift, tau), false)
}

pub fn assemble_np_eafe(mesh: &TetMesh, phi: &[f64], drift: f64, tau: f64) -> Result<AssembledNp, AssemblyError> {
    Assembler::new(mesh).np_eafe(&simple_inputs(phi, drift, tau), false)
}

pub fn assemble_np_supg(
    mesh: &TetMesh,
    phi: &[f64],
    drift: f64,
    tau: f64,
    supg_scale: f64,
) -> Result<AssembledNp, AssemblyError> {
    Assembler::new(mesh).np_supg(&simple_inputs(phi, drift, tau), supg_scale, false)
}

fn simple_inputs(phi: &[f64], drift: f64, tau: f64) -> NpInputs<'_> {
    NpInputs {
        phi,
        drift,
        tau,
        species: 0,
        source_per_tet: None,
        previous: None,
    }
}
