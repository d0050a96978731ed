//! Backward-Euler driver with one Gummel solve per step, plus per-step
//! positivity and M-matrix diagnostics on the interior nodes.

use std::fmt::Write as _;

use thiserror::Error;

use crate::assembly::{Assembler, AssemblyError, SchemeConfig};
use crate::gummel::{gummel_solve, GummelError, GummelOptions, GummelReport, State, StepContext};
use crate::linalg::column_mmatrix_check;
use crate::mesh::TetMesh;
use crate::problem::PnpProblem;

#[derive(Debug, Error)]
pub enum TimestepError {
    #[error("invalid transient configuration: {0}")]
    InvalidConfig(String),
    #[error("time step {step}: {source}")]
    Gummel {
        step: usize,
        #[source]
        source: GummelError,
    },
    #[error("Gummel iteration did not converge at time step {step} after {iterations} iterates")]
    NotConverged {
        step: usize,
        iterations: usize,
        partial: Box<TransientOutcome>,
    },
    #[error("nonpositive lumped mass entry {value} at node {node}")]
    NonpositiveMass { node: usize, value: f64 },
}

#[derive(Debug, Clone)]
pub struct TransientConfig {
    pub t_final: f64,
    pub tau: f64,
    /// Replaces the problem's initial values when set.
    pub initial: Option<State>,
    pub gummel: GummelOptions,
    pub diagnostics: bool,
}

impl TransientConfig {
    pub fn new(t_final: f64, tau: f64) -> Self {
        Self {
            t_final,
            tau,
            initial: None,
            gummel: GummelOptions::default(),
            diagnostics: true,
        }
    }

    /// `N = ⌈T/τ⌉` steps of the uniform length `T/N`.
    pub fn grid(&self) -> Result<(usize, f64), TimestepError> {
        if !(self.t_final > 0.0 && self.t_final.is_finite()) {
            return Err(TimestepError::InvalidConfig(format!(
                "T must be positive, got {}",
                self.t_final
            )));
        }
        if !(self.tau > 0.0 && self.tau <= self.t_final) {
            return Err(TimestepError::InvalidConfig(format!(
                "time step must satisfy 0 < tau <= T, got {}",
                self.tau
            )));
        }
        if !(self.gummel.eps > 0.0) || self.gummel.max_iter == 0 {
            return Err(TimestepError::InvalidConfig(
                "Gummel tolerance and iteration cap must be positive".into(),
            ));
        }
        let steps = (self.t_final / self.tau - 1e-12).ceil().max(1.0) as usize;
        Ok((steps, self.t_final / steps as f64))
    }
}

/// Per-species bound diagnostics of one step.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundConstants {
    /// `C_J`: sum of the interior entries of `F^J`.
    pub c_j: f64,
    /// `C_k = 4 C_J / |Ω_k|` for every interior node.
    pub c_k: Vec<f64>,
    /// Positivity step bound `τ_*`; infinite for a zero load.
    pub tau_star: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsRecord {
    pub step: usize,
    pub t: f64,
    /// Interior minima and maxima of each species after the step.
    pub min: [f64; 2],
    pub max: [f64; 2],
    pub bounds: [BoundConstants; 2],
    /// Column M-matrix verdict of the interior block of each species' final
    /// system matrix.
    pub mmatrix_ok: [bool; 2],
}

impl DiagnosticsRecord {
    pub fn tau_star(&self) -> f64 {
        self.bounds[0].tau_star.min(self.bounds[1].tau_star)
    }
}

#[derive(Debug, Clone)]
pub struct TransientOutcome {
    pub state: State,
    pub reports: Vec<GummelReport>,
    pub diagnostics: Vec<DiagnosticsRecord>,
    pub tau: f64,
}

/// Bound diagnostics `C_J = Σ F^J`, `C_k = 4 C_J / |Ω_k|` and
/// `τ_* = C_p min_k |Ω_k| / (4 ‖G‖_∞)`, where `lumped[k] = |Ω_k| / 4`.
pub fn bound_constants(f_j: &[f64], lumped: &[f64], g_next: &[f64], c_p: f64) -> Result<BoundConstants, TimestepError> {
    if let Some((node, &value)) = lumped.iter().enumerate().find(|(_, &m)| !(m > 0.0)) {
        return Err(TimestepError::NonpositiveMass { node, value });
    }
    let c_j: f64 = f_j.iter().sum();
    let c_k = lumped.iter().map(|m| c_j / m).collect();
    let g_max = g_next.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let min_support = 4.0 * lumped.iter().copied().fold(f64::INFINITY, f64::min);
    let tau_star = if g_max == 0.0 {
        f64::INFINITY
    } else {
        c_p * min_support / (4.0 * g_max)
    };
    Ok(BoundConstants { c_j, c_k, tau_star })
}

fn initial_state(mesh: &TetMesh, problem: &dyn PnpProblem, cfg: &TransientConfig) -> Result<State, TimestepError> {
    if let Some(init) = &cfg.initial {
        let n = mesh.num_nodes();
        if init.phi.len() != n || init.p.iter().any(|p| p.len() != n) {
            return Err(TimestepError::InvalidConfig(format!(
                "initial state does not match the mesh's {n} nodes"
            )));
        }
        let mut s = init.clone();
        s.t = 0.0;
        return Ok(s);
    }
    let nodes = mesh.nodes();
    Ok(State {
        phi: nodes.iter().map(|&x| problem.initial_potential(x)).collect(),
        p: [0, 1].map(|s| nodes.iter().map(|&x| problem.initial_concentration(s, x)).collect()),
        t: 0.0,
    })
}

/// Advances from `t = 0` to `T`. On non-convergence the history up to and
/// including the failed step is returned inside the error.
pub fn run_transient(
    mesh: &TetMesh,
    scheme: &SchemeConfig,
    problem: &dyn PnpProblem,
    cfg: &TransientConfig,
) -> Result<TransientOutcome, TimestepError> {
    let (steps, tau) = cfg.grid()?;
    scheme
        .validate()
        .map_err(|e| TimestepError::InvalidConfig(e.to_string()))?;
    let assembler = Assembler::new(mesh);
    let stiffness = assembler.stiffness();
    let interior: Vec<usize> = (0..mesh.num_nodes()).filter(|&k| !mesh.is_boundary(k)).collect();

    let mut state = initial_state(mesh, problem, cfg)?;
    let mut reports = Vec::with_capacity(steps);
    let mut diagnostics = Vec::new();
    for step in 0..steps {
        let prev = state;
        // Land exactly on the final time.
        let dt = if step + 1 == steps { cfg.t_final - prev.t } else { tau };
        let gummel = |source| TimestepError::Gummel { step, source };
        let ctx = StepContext::new(&assembler, &stiffness, scheme, problem, &prev, dt).map_err(gummel)?;
        let (next, report) = gummel_solve(&ctx, &cfg.gummel).map_err(gummel)?;
        if cfg.diagnostics {
            diagnostics.push(step_diagnostics(step, &ctx, &next, &interior).map_err(gummel)?);
        }
        let converged = report.converged;
        let iterations = report.iterations;
        reports.push(report);
        drop(ctx);
        state = next;
        if !converged {
            return Err(TimestepError::NotConverged {
                step,
                iterations,
                partial: Box::new(TransientOutcome {
                    state,
                    reports,
                    diagnostics,
                    tau,
                }),
            });
        }
    }
    Ok(TransientOutcome {
        state,
        reports,
        diagnostics,
        tau,
    })
}

fn step_diagnostics(
    step: usize,
    ctx: &StepContext<'_>,
    next: &State,
    interior: &[usize],
) -> Result<DiagnosticsRecord, GummelError> {
    let lumped = ctx.assembler.lumped_mass_diagonal();
    let pick = |v: &[f64]| -> Vec<f64> { interior.iter().map(|&k| v[k]).collect() };
    let lumped_int = pick(lumped);
    let mut min = [0.0; 2];
    let mut max = [0.0; 2];
    let mut mmatrix_ok = [false; 2];
    let mut bounds: [Option<BoundConstants>; 2] = [None, None];
    for s in 0..2 {
        let vals = pick(&next.p[s]);
        min[s] = vals.iter().copied().fold(f64::INFINITY, f64::min);
        max[s] = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let prev_int = pick(&ctx.prev.p[s]);
        let c_p = prev_int.iter().copied().fold(f64::INFINITY, f64::min).max(1e-12);
        let b = bound_constants(&pick(ctx.np_base_rhs(s)), &lumped_int, &pick(ctx.load(s)), c_p)
            .map_err(|_| AssemblyError::InvalidConfig("nonpositive lumped mass".into()))?;
        bounds[s] = Some(b);
        let sys = ctx.np_system(s, &next.phi)?;
        mmatrix_ok[s] = column_mmatrix_check(&sys.matrix.principal_submatrix(interior)).verdict();
    }
    let [b0, b1] = bounds;
    Ok(DiagnosticsRecord {
        step,
        t: next.t,
        min,
        max,
        bounds: [b0.expect("set above"), b1.expect("set above")],
        mmatrix_ok,
    })
}

/// Per-step history table; floats in shortest round-trip form. `C_J` and `tau_star` report the smaller of the two
/// species' values; `mmatrix_ok` requires both species to pass.
pub fn history_csv(outcome: &TransientOutcome) -> String {
    let mut out = String::from("step,t,gummel_iterations,alpha_bar,min_p1,min_p2,C_J,tau_star,mmatrix_ok\n");
    for (i, rep) in outcome.reports.iter().enumerate() {
        let alpha = rep.alpha_bar.map_or_else(String::new, |a| format!("{a:?}"));
        match outcome.diagnostics.get(i) {
            Some(d) => {
                let c_j = d.bounds[0].c_j.min(d.bounds[1].c_j);
                let _ = writeln!(
                    out,
                    "{},{:?},{},{},{:?},{:?},{:?},{:?},{}",
                    i,
                    d.t,
                    rep.iterations,
                    alpha,
                    d.min[0],
                    d.min[1],
                    c_j,
                    d.tau_star(),
                    d.mmatrix_ok[0] && d.mmatrix_ok[1]
                );
            }
            None => {
                let _ = writeln!(out, "{},,{},{},,,,,", i, rep.iterations, alpha);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::Scheme;
    use crate::manufactured::Benchmark;
    use crate::problem::HomogeneousProblem;

    #[test]
    fn bound_constant_examples() {
        let b = bound_constants(&[1.0; 8], &[0.125; 8], &[0.0; 8], 1.0).unwrap();
        assert_eq!(b.c_j, 8.0);
        assert_eq!(b.tau_star, f64::INFINITY);
        let b = bound_constants(
            &[1.0; 8],
            &[0.125, 0.25, 0.25, 0.25, 0.25, 0.25, 0.25, 0.25],
            &[2.0; 8],
            0.5,
        )
        .unwrap();
        // |Ω_0| = 0.5 gives C_0 = 4 · 8 / 0.5.
        assert_eq!(b.c_k[0], 64.0);
        assert_eq!(b.tau_star, 0.5 * 0.5 / 8.0);
        assert!(matches!(
            bound_constants(&[1.0], &[0.0], &[1.0], 1.0),
            Err(TimestepError::NonpositiveMass { node: 0, .. })
        ));
    }

    #[test]
    fn grid_is_uniform_and_lands_on_t() {
        let (n, tau) = TransientConfig::new(0.25, 1.0 / 256.0).grid().unwrap();
        assert_eq!(n, 64);
        assert_eq!(tau, 1.0 / 256.0);
        let (n, tau) = TransientConfig::new(1.0, 0.3).grid().unwrap();
        assert_eq!(n, 4);
        assert_eq!(tau, 0.25);
        assert!(TransientConfig::new(0.25, 0.0).grid().is_err());
        assert!(TransientConfig::new(0.25, 0.5).grid().is_err());
    }

    #[test]
    fn zero_data_gives_zero_history() {
        let mesh = TetMesh::unit_cube(2).unwrap();
        let cfg = SchemeConfig::new(Scheme::Supg, [1.0, -1.0], [1.0, -1.0]);
        let out = run_transient(&mesh, &cfg, &HomogeneousProblem, &TransientConfig::new(0.1, 0.05)).unwrap();
        assert_eq!(out.reports.len(), 2);
        assert!(out.reports.iter().all(|r| r.iterations <= 1 && r.converged));
        assert!(out.state.p[0].iter().all(|&v| v == 0.0));
        assert_eq!(out.state.t, 0.1);
        let csv = history_csv(&out);
        assert_eq!(csv.lines().count(), 3);
        assert!(csv.starts_with("step,t,gummel_iterations"));
    }

    #[test]
    fn step_rhs_and_poisson_consistency() {
        let mesh = Benchmark::mesh(3);
        let prob = Benchmark::default();
        let cfg = prob.scheme_config(Scheme::Eafe);
        let asm = Assembler::new(&mesh);
        let a = asm.stiffness();
        let prev = State {
            phi: vec![0.0; mesh.num_nodes()],
            p: [vec![0.5; mesh.num_nodes()], vec![0.25; mesh.num_nodes()]],
            t: 0.0,
        };
        let tau = 0.01;
        let ctx = StepContext::new(&asm, &a, &cfg, &prob, &prev, tau).unwrap();
        for s in 0..2 {
            let m = ctx.mass_times(&prev.p[s]);
            for ((f, mp), g) in ctx.np_base_rhs(s).iter().zip(&m).zip(ctx.load(s)) {
                assert!((f - mp - tau * g).abs() <= 1e-15 * f.abs().max(1.0));
            }
        }
        let (state, _) = gummel_solve(&ctx, &GummelOptions::default()).unwrap();
        let (matrix, rhs) = ctx.poisson_system(&state.p);
        let r = matrix.spmv(&state.phi).unwrap();
        let res: f64 = r.iter().zip(&rhs).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
        let norm: f64 = rhs.iter().map(|v| v * v).sum::<f64>().sqrt();
        // Φ solves the Poisson system for the previous iterate, which lies
        // within the Gummel tolerance of the final one.
        assert!(res <= 1e-5 * norm.max(1.0), "{res}");
    }

    #[test]
    fn nonconvergence_keeps_partial_history() {
        let mesh = Benchmark::mesh(2);
        let prob = Benchmark::default();
        let mut cfg = TransientConfig::new(0.1, 0.05);
        cfg.gummel.eps = 1e-300;
        cfg.gummel.max_iter = 2;
        match run_transient(&mesh, &prob.scheme_config(Scheme::Fem), &prob, &cfg) {
            Err(TimestepError::NotConverged { step, partial, .. }) => {
                assert_eq!(step, 0);
                assert_eq!(partial.reports.len(), 1);
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
