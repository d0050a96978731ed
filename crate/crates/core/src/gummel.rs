//! Decoupled fixed-point iteration over one backward-Euler step: a Poisson
//! solve with the previous concentration iterate, then one Nernst–Planck
//! solve per species with the new potential.

use thiserror::Error;

use crate::assembly::{apply_dirichlet, AssembledNp, Assembler, AssemblyError, NpInputs, SchemeConfig};
use crate::linalg::{norm_inf, solve_general, solve_spd, CsrMatrix, LinalgError, SolverOptions};
use crate::problem::PnpProblem;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GummelError {
    #[error("assembly failed: {0}")]
    Assembly(#[from] AssemblyError),
    #[error("{equation} solve failed at Gummel iterate {iterate}: {source}")]
    Solve {
        equation: &'static str,
        iterate: usize,
        #[source]
        source: LinalgError,
    },
    #[error("state has {found} entries per field, mesh has {expected} nodes")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("contraction statistics need at least one report")]
    EmptyReports,
}

/// Potential and the two species' concentrations at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub phi: Vec<f64>,
    pub p: [Vec<f64>; 2],
    pub t: f64,
}

impl State {
    pub fn zeros(n: usize, t: f64) -> Self {
        Self {
            phi: vec![0.0; n],
            p: [vec![0.0; n], vec![0.0; n]],
            t,
        }
    }

    pub fn len(&self) -> usize {
        self.phi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phi.is_empty()
    }

    fn check(&self, n: usize) -> Result<(), GummelError> {
        for v in [&self.phi, &self.p[0], &self.p[1]] {
            if v.len() != n {
                return Err(GummelError::DimensionMismatch {
                    expected: n,
                    found: v.len(),
                });
            }
        }
        Ok(())
    }
}

/// Increment norms of one Gummel iterate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Increment {
    /// Discrete L2 norms `(‖ΔP¹‖, ‖ΔP²‖, ‖ΔΦ‖)`.
    pub l2: [f64; 3],
    /// Max norms in the same order.
    pub max: [f64; 3],
}

impl Increment {
    pub fn l2_total(&self) -> f64 {
        self.l2.iter().sum()
    }

    /// Max norm of the concatenated concentration increment.
    pub fn concentration_max(&self) -> f64 {
        self.max[0].max(self.max[1])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GummelReport {
    pub iterations: usize,
    pub increments: Vec<Increment>,
    /// `α^(l) = ‖P^{l+1} − P^l‖_∞ / ‖P^l − P^{l−1}‖_∞`, for `l ≥ 1`.
    pub ratios: Vec<f64>,
    /// Mean of `ratios`; `None` when no ratio was formed.
    pub alpha_bar: Option<f64>,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GummelOptions {
    pub eps: f64,
    pub max_iter: usize,
    pub solver: SolverOptions,
}

impl Default for GummelOptions {
    fn default() -> Self {
        Self {
            eps: 1e-6,
            max_iter: 500,
            solver: SolverOptions {
                tol: 1e-12,
                ..SolverOptions::default()
            },
        }
    }
}

/// Everything that is fixed during the iteration of one time step.
#[derive(Debug, Clone)]
pub struct StepContext<'a> {
    pub assembler: &'a Assembler<'a>,
    pub scheme: &'a SchemeConfig,
    pub tau: f64,
    /// Time level `n`.
    pub prev: &'a State,
    /// New time `t^{n+1}`.
    pub t_next: f64,
    poisson_matrix: CsrMatrix,
    /// Lifted Poisson right-hand side without the concentration coupling.
    poisson_rhs: Vec<f64>,
    mass: Option<CsrMatrix>,
    /// `τ G^{n+1} + M Pⁿ` per species, before boundary treatment.
    np_rhs: [Vec<f64>; 2],
    /// `∫_K F` per tet and species.
    source_per_tet: [Vec<f64>; 2],
    phi_boundary: Vec<f64>,
    p_boundary: [Vec<f64>; 2],
    /// `G^{n+1}` per species.
    loads: [Vec<f64>; 2],
}

impl<'a> StepContext<'a> {
    /// Assembles the time-step data for `prev → t_next = prev.t + tau`.
    /// `stiffness` is the unconstrained Laplacian of the mesh.
    pub fn new(
        assembler: &'a Assembler<'a>,
        stiffness: &CsrMatrix,
        scheme: &'a SchemeConfig,
        problem: &dyn PnpProblem,
        prev: &'a State,
        tau: f64,
    ) -> Result<Self, GummelError> {
        scheme.validate()?;
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(AssemblyError::InvalidTimeStep(tau).into());
        }
        let mesh = assembler.mesh();
        let n = mesh.num_nodes();
        prev.check(n)?;
        let t_next = prev.t + tau;
        let order = scheme.quadrature_order;
        let boundary = mesh.boundary();

        let nodal =
            |f: &dyn Fn(usize) -> f64| -> Vec<f64> { (0..n).map(|k| if boundary[k] { f(k) } else { 0.0 }).collect() };
        let nodes = mesh.nodes();
        let phi_boundary = nodal(&|k| problem.boundary_potential(nodes[k], t_next));
        let p_boundary = [0, 1].map(|s| nodal(&|k| problem.boundary_concentration(s, nodes[k], t_next)));

        let g_phi = assembler.load(|x, t| problem.poisson_source(x, t), t_next, order);
        let mut poisson_matrix = stiffness.clone();
        let mut poisson_rhs = g_phi;
        apply_dirichlet(&mut poisson_matrix, &mut poisson_rhs, boundary, &phi_boundary)?;

        let mass = scheme.consistent_mass.then(|| assembler.consistent_mass());
        let mut loads: [Vec<f64>; 2] = Default::default();
        let mut source_per_tet: [Vec<f64>; 2] = Default::default();
        let mut np_rhs: [Vec<f64>; 2] = Default::default();
        for s in 0..2 {
            let (load, per_tet) =
                assembler.load_and_element_integrals(|x, t| problem.species_source(s, x, t), t_next, order);
            let mp = apply_mass(assembler, mass.as_ref(), &prev.p[s]);
            np_rhs[s] = load.iter().zip(&mp).map(|(g, m)| tau * g + m).collect();
            loads[s] = load;
            source_per_tet[s] = per_tet;
        }
        Ok(Self {
            assembler,
            scheme,
            tau,
            prev,
            t_next,
            poisson_matrix,
            poisson_rhs,
            mass,
            np_rhs,
            source_per_tet,
            phi_boundary,
            p_boundary,
            loads,
        })
    }

    /// `F^n = τ G^{n+1} + M Pⁿ` for `species`, before boundary treatment.
    pub fn np_base_rhs(&self, species: usize) -> &[f64] {
        &self.np_rhs[species]
    }

    /// `G^{n+1}` for `species`.
    pub fn load(&self, species: usize) -> &[f64] {
        &self.loads[species]
    }

    pub fn mass_times(&self, v: &[f64]) -> Vec<f64> {
        apply_mass(self.assembler, self.mass.as_ref(), v)
    }

    /// Poisson system for the concentration iterate `p`, boundary rows
    /// included.
    pub fn poisson_system(&self, p: &[Vec<f64>; 2]) -> (&CsrMatrix, Vec<f64>) {
        let boundary = self.assembler.mesh().boundary();
        let mut rhs = self.poisson_rhs.clone();
        for (s, ps) in p.iter().enumerate() {
            let z = self.scheme.charges[s];
            if z == 0.0 {
                continue;
            }
            let mp = self.mass_times(ps);
            for k in 0..rhs.len() {
                if !boundary[k] {
                    rhs[k] += z * mp[k];
                }
            }
        }
        (&self.poisson_matrix, rhs)
    }

    /// Species system for the potential `phi`, before boundary treatment;
    /// the right-hand side already contains `F^n`.
    pub fn np_system(&self, species: usize, phi: &[f64]) -> Result<AssembledNp, GummelError> {
        let inputs = NpInputs {
            phi,
            drift: self.scheme.drift[species],
            tau: self.tau,
            species,
            source_per_tet: Some(&self.source_per_tet[species]),
            previous: Some(&self.prev.p[species]),
        };
        let mut sys = self.assembler.np_system(self.scheme, &inputs)?;
        for (r, f) in sys.rhs.iter_mut().zip(&self.np_rhs[species]) {
            *r += f;
        }
        Ok(sys)
    }

    fn discrete_l2(&self, a: &[f64], b: &[f64]) -> f64 {
        let m = self.assembler.lumped_mass_diagonal();
        a.iter()
            .zip(b)
            .zip(m)
            .map(|((x, y), w)| w * (x - y) * (x - y))
            .sum::<f64>()
            .sqrt()
    }
}

fn apply_mass(assembler: &Assembler<'_>, mass: Option<&CsrMatrix>, v: &[f64]) -> Vec<f64> {
    match mass {
        Some(m) => m.spmv(v).expect("mass matrix matches the mesh"),
        None => assembler
            .lumped_mass_diagonal()
            .iter()
            .zip(v)
            .map(|(m, x)| m * x)
            .collect(),
    }
}

/// One Gummel iterate `l → l + 1`. `iterate_index` labels solver errors.
pub fn gummel_step(
    ctx: &StepContext<'_>,
    iterate: &State,
    iterate_index: usize,
    solver: &SolverOptions,
) -> Result<State, GummelError> {
    let n = ctx.assembler.mesh().num_nodes();
    iterate.check(n)?;
    let boundary = ctx.assembler.mesh().boundary();

    let (a, rhs) = ctx.poisson_system(&iterate.p);
    let (phi, _) = solve_spd(a, &rhs, Some(&iterate.phi), solver).map_err(|source| GummelError::Solve {
        equation: "poisson",
        iterate: iterate_index,
        source,
    })?;

    let mut p: [Vec<f64>; 2] = Default::default();
    for s in 0..2 {
        let mut sys = ctx.np_system(s, &phi)?;
        apply_dirichlet(&mut sys.matrix, &mut sys.rhs, boundary, &ctx.p_boundary[s])?;
        let (ps, _) =
            solve_general(&sys.matrix, &sys.rhs, Some(&iterate.p[s]), solver).map_err(|source| GummelError::Solve {
                equation: "nernst-planck",
                iterate: iterate_index,
                source,
            })?;
        p[s] = ps;
    }
    // Boundary rows are identity rows; copy the data exactly.
    let mut phi = phi;
    for k in 0..n {
        if boundary[k] {
            phi[k] = ctx.phi_boundary[k];
            p[0][k] = ctx.p_boundary[0][k];
            p[1][k] = ctx.p_boundary[1][k];
        }
    }
    Ok(State { phi, p, t: ctx.t_next })
}

/// Iterates from the previous time level until the summed discrete L2
/// increment drops to `eps` or `max_iter` iterates were taken. Hitting the
/// cap is reported through `converged = false`, not as an error.
pub fn gummel_solve(ctx: &StepContext<'_>, opts: &GummelOptions) -> Result<(State, GummelReport), GummelError> {
    let mut iterate = ctx.prev.clone();
    iterate.t = ctx.t_next;
    let mut increments = Vec::new();
    let mut ratios = Vec::new();
    let mut converged = false;
    for l in 0..opts.max_iter {
        let next = gummel_step(ctx, &iterate, l, &opts.solver)?;
        let inc = increment(ctx, &iterate, &next);
        if let Some(last) = increments.last().map(Increment::concentration_max) {
            if last > 0.0 {
                ratios.push(inc.concentration_max() / last);
            }
        }
        increments.push(inc);
        iterate = next;
        if inc.l2_total() <= opts.eps {
            converged = true;
            break;
        }
    }
    let alpha_bar = mean(&ratios);
    Ok((
        iterate,
        GummelReport {
            iterations: increments.len(),
            increments,
            ratios,
            alpha_bar,
            converged,
        },
    ))
}

fn increment(ctx: &StepContext<'_>, old: &State, new: &State) -> Increment {
    let diff_max = |a: &[f64], b: &[f64]| norm_inf(&a.iter().zip(b).map(|(x, y)| x - y).collect::<Vec<_>>());
    Increment {
        l2: [
            ctx.discrete_l2(&new.p[0], &old.p[0]),
            ctx.discrete_l2(&new.p[1], &old.p[1]),
            ctx.discrete_l2(&new.phi, &old.phi),
        ],
        max: [
            diff_max(&new.p[0], &old.p[0]),
            diff_max(&new.p[1], &old.p[1]),
            diff_max(&new.phi, &old.phi),
        ],
    }
}

fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

/// Run-level contraction summary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContractionSummary {
    /// Mean of the per-step `ᾱ` over steps that formed at least one ratio.
    pub alpha_bar: f64,
    /// Largest single ratio seen in the run.
    pub alpha_max: f64,
    pub steps_with_ratios: usize,
    pub total_iterations: usize,
    pub max_iterations: usize,
    pub all_converged: bool,
}

pub fn contraction_stats(reports: &[GummelReport]) -> Result<ContractionSummary, GummelError> {
    if reports.is_empty() {
        return Err(GummelError::EmptyReports);
    }
    let per_step: Vec<f64> = reports.iter().filter_map(|r| r.alpha_bar).collect();
    Ok(ContractionSummary {
        alpha_bar: mean(&per_step).unwrap_or(0.0),
        alpha_max: reports
            .iter()
            .flat_map(|r| r.ratios.iter().copied())
            .fold(0.0, f64::max),
        steps_with_ratios: per_step.len(),
        total_iterations: reports.iter().map(|r| r.iterations).sum(),
        max_iterations: reports.iter().map(|r| r.iterations).max().unwrap_or(0),
        all_converged: reports.iter().all(|r| r.converged),
    })
}

/// `ᾱ(previous τ) / ᾱ(current τ)` for each consecutive pair; the first entry
/// has no predecessor.
pub fn successive_rates(alpha_bars: &[f64]) -> Vec<Option<f64>> {
    alpha_bars
        .iter()
        .enumerate()
        .map(|(i, &a)| (i > 0 && a > 0.0).then(|| alpha_bars[i - 1] / a))
        .collect()
}
