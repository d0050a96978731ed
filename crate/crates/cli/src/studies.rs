//! Study drivers. Every cell is an independent transient run of the
//! benchmark problem; cells run in parallel and are reported in input order.

use std::time::Instant;

use rayon::prelude::*;

use pnp_core::assembly::Scheme;
use pnp_core::gummel::{contraction_stats, successive_rates, ContractionSummary};
use pnp_core::manufactured::{error_norms, Benchmark, ErrorNorms, Field};
use pnp_core::mesh::{mesh_quality_report, MeshQualityReport};
use pnp_core::timestepper::{history_csv, run_transient, TimestepError, TransientConfig, TransientOutcome};

use crate::config::RunConfig;
use crate::csv::{config_hash, num, opt, CsvTable};
use crate::CliError;

#[derive(Debug, Clone, PartialEq)]
pub enum CellStatus {
    Ok,
    NotConverged,
    Failed(String),
}

impl CellStatus {
    pub fn is_ok(&self) -> bool {
        *self == CellStatus::Ok
    }

    fn label(&self) -> &'static str {
        match self {
            CellStatus::Ok => "ok",
            CellStatus::NotConverged => "not_converged",
            CellStatus::Failed(_) => "failed",
        }
    }
}

/// One `(scheme, n, τ)` run.
#[derive(Debug, Clone)]
pub struct CellResult {
    pub scheme: Scheme,
    pub n: usize,
    /// Effective uniform step `T/N`.
    pub tau: f64,
    pub steps: usize,
    pub status: CellStatus,
    /// Errors of `u`, `p`, `n` at the final time; only for completed runs.
    pub errors: Option<[ErrorNorms; 3]>,
    /// Covers the steps that were taken, including a failed last one.
    pub summary: Option<ContractionSummary>,
    pub seconds: f64,
}

fn transient_config(cfg: &RunConfig, tau: f64, diagnostics: bool) -> TransientConfig {
    let mut tc = TransientConfig::new(cfg.t_final, tau);
    tc.gummel.eps = cfg.eps;
    tc.gummel.max_iter = cfg.max_iter;
    tc.diagnostics = diagnostics;
    tc
}

/// Runs the benchmark and sorts the result into a completed outcome, a
/// partial one, or a hard failure.
fn run_benchmark(
    cfg: &RunConfig,
    scheme: Scheme,
    n: usize,
    tau: f64,
    diagnostics: bool,
) -> Result<(TransientOutcome, CellStatus), CliError> {
    let mesh = cfg.mesh(n)?;
    let problem = Benchmark::default();
    let mut sc = problem.scheme_config(scheme);
    sc.supg_scale = cfg.supg_scale;
    match run_transient(&mesh, &sc, &problem, &transient_config(cfg, tau, diagnostics)) {
        Ok(o) => Ok((o, CellStatus::Ok)),
        Err(TimestepError::NotConverged { partial, .. }) => Ok((*partial, CellStatus::NotConverged)),
        Err(TimestepError::InvalidConfig(m)) => Err(CliError::Config(m)),
        Err(e) => Err(CliError::Solver(e.to_string())),
    }
}

fn final_errors(cfg: &RunConfig, n: usize, o: &TransientOutcome) -> Result<[ErrorNorms; 3], CliError> {
    let mesh = cfg.mesh(n)?;
    let t = o.state.t;
    let e = |dofs: &[f64], f| error_norms(&mesh, dofs, f, t).map_err(|e| CliError::Solver(e.to_string()));
    Ok([
        e(&o.state.phi, Field::U)?,
        e(&o.state.p[0], Field::P)?,
        e(&o.state.p[1], Field::N)?,
    ])
}

pub fn run_cell(cfg: &RunConfig, scheme: Scheme, n: usize, tau: f64) -> CellResult {
    let start = Instant::now();
    let (steps, eff_tau) = transient_config(cfg, tau, false).grid().unwrap_or((0, tau));
    let mut cell = CellResult {
        scheme,
        n,
        tau: eff_tau,
        steps,
        status: CellStatus::Ok,
        errors: None,
        summary: None,
        seconds: 0.0,
    };
    let run = run_benchmark(cfg, scheme, n, tau, false).and_then(|(o, status)| {
        let errors = if status.is_ok() {
            Some(final_errors(cfg, n, &o)?)
        } else {
            None
        };
        Ok((o, status, errors))
    });
    match run {
        Ok((o, status, errors)) => {
            cell.summary = contraction_stats(&o.reports).ok();
            cell.status = status;
            cell.errors = errors;
        }
        Err(e) => cell.status = CellStatus::Failed(e.to_string()),
    }
    cell.seconds = start.elapsed().as_secs_f64();
    cell
}

fn run_cells(cfg: &RunConfig, cells: &[(Scheme, usize, f64)]) -> Vec<CellResult> {
    cells.par_iter().map(|&(s, n, tau)| run_cell(cfg, s, n, tau)).collect()
}

fn status_error(cells: &[CellResult]) -> Option<CliError> {
    let bad: Vec<String> = cells
        .iter()
        .filter(|c| !c.status.is_ok())
        .map(|c| match &c.status {
            CellStatus::Failed(m) => format!("{} n={} tau={}: {m}", c.scheme, c.n, c.tau),
            _ => format!("{} n={} tau={}", c.scheme, c.n, c.tau),
        })
        .collect();
    if bad.is_empty() {
        None
    } else if cells.iter().any(|c| matches!(c.status, CellStatus::Failed(_))) {
        Some(CliError::Solver(bad.join("; ")))
    } else {
        Some(CliError::NotConverged(bad.join("; ")))
    }
}

/// `ln(e_coarse/e_fine) / ln(h_coarse/h_fine)`.
pub fn observed_rate(e_coarse: f64, e_fine: f64, n_coarse: usize, n_fine: usize) -> Option<f64> {
    (e_coarse > 0.0 && e_fine > 0.0 && n_fine != n_coarse)
        .then(|| (e_coarse / e_fine).ln() / (n_fine as f64 / n_coarse as f64).ln())
}

#[derive(Debug, Clone)]
pub struct ConvergenceRow {
    pub cell: CellResult,
    /// Rates of `L2_u, H1_u, L2_p, H1_p, L2_n, H1_n` against the previous size.
    pub rates: [Option<f64>; 6],
}

#[derive(Debug, Clone)]
pub struct ConvergenceStudy {
    pub rows: Vec<ConvergenceRow>,
    pub hash: String,
    pub deterministic: bool,
}

fn flatten(e: &[ErrorNorms; 3]) -> [f64; 6] {
    [e[0].l2, e[0].h1_semi, e[1].l2, e[1].h1_semi, e[2].l2, e[2].h1_semi]
}

const ERROR_COLUMNS: [&str; 6] = ["L2_u", "H1_u", "L2_p", "H1_p", "L2_n", "H1_n"];

/// One run per `(scheme, size)` with `τ` from the configured rule at each
/// size, errors at the final time, and rates between consecutive sizes.
pub fn run_convergence_study(cfg: &RunConfig, sizes: &[usize]) -> Result<ConvergenceStudy, CliError> {
    if sizes.len() < 2 {
        return Err(CliError::Config(
            "the convergence study needs at least 2 mesh sizes".into(),
        ));
    }
    for &n in sizes {
        let mut c = cfg.clone();
        c.n = n;
        c.validate()?;
    }
    let cells: Vec<(Scheme, usize, f64)> = cfg
        .schemes()
        .into_iter()
        .flat_map(|s| sizes.iter().map(move |&n| (s, n, cfg.tau_rule.resolve(1.0 / n as f64))))
        .collect();
    let results = run_cells(cfg, &cells);
    let mut rows: Vec<ConvergenceRow> = Vec::with_capacity(results.len());
    for cell in results {
        let mut rates = [None; 6];
        if let Some(prev) = rows.last().filter(|r| r.cell.scheme == cell.scheme) {
            if let (Some(a), Some(b)) = (&prev.cell.errors, &cell.errors) {
                let (a, b) = (flatten(a), flatten(b));
                for k in 0..6 {
                    rates[k] = observed_rate(a[k], b[k], prev.cell.n, cell.n);
                }
            }
        }
        rows.push(ConvergenceRow { cell, rates });
    }
    let mut sized = cfg.clone();
    sized.sizes = sizes.to_vec();
    Ok(ConvergenceStudy {
        rows,
        hash: config_hash("converge", &sized),
        deterministic: cfg.deterministic,
    })
}

fn with_seconds(mut header: Vec<&'static str>, deterministic: bool) -> Vec<&'static str> {
    if !deterministic {
        header.push("seconds");
    }
    header
}

impl ConvergenceStudy {
    pub fn table(&self) -> CsvTable {
        let mut header = vec!["scheme", "n", "h", "tau"];
        header.extend(ERROR_COLUMNS);
        header.extend([
            "rate_L2_u",
            "rate_H1_u",
            "rate_L2_p",
            "rate_H1_p",
            "rate_L2_n",
            "rate_H1_n",
            "status",
        ]);
        let mut t = CsvTable::new(&with_seconds(header, self.deterministic));
        for r in &self.rows {
            let c = &r.cell;
            let mut row = vec![c.scheme.to_string(), c.n.to_string(), num(1.0 / c.n as f64), num(c.tau)];
            let errs = c.errors.as_ref().map(flatten);
            row.extend((0..6).map(|k| opt(errs.map(|e| e[k]))));
            row.extend(r.rates.iter().map(|&x| opt(x)));
            row.push(c.status.label().into());
            if !self.deterministic {
                row.push(num(c.seconds));
            }
            t.push(row);
        }
        t
    }

    pub fn to_csv(&self) -> String {
        self.table().render(&self.hash)
    }

    pub fn failure(&self) -> Option<CliError> {
        status_error(&self.rows.iter().map(|r| r.cell.clone()).collect::<Vec<_>>())
    }
}

#[derive(Debug, Clone)]
pub struct ContractionRow {
    pub cell: CellResult,
    pub multiplier: f64,
    /// `ᾱ(previous τ) / ᾱ(this τ)` within the same scheme.
    pub rate: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct ContractionStudy {
    pub rows: Vec<ContractionRow>,
    pub hash: String,
    pub deterministic: bool,
}

/// Mean Gummel contraction `ᾱ` at `τ = m·h²` for each multiplier `m`, on the
/// configured mesh, for the configured schemes.
pub fn run_contraction_study(cfg: &RunConfig, multipliers: &[f64]) -> Result<ContractionStudy, CliError> {
    if multipliers.is_empty() {
        return Err(CliError::Config(
            "the contraction study needs at least one multiplier".into(),
        ));
    }
    let mut c = cfg.clone();
    c.multipliers = multipliers.to_vec();
    c.validate()?;
    let h2 = cfg.h() * cfg.h();
    if multipliers.iter().any(|m| m * h2 > cfg.t_final) {
        return Err(CliError::Config("a multiplier gives tau larger than T".into()));
    }
    let cells: Vec<(Scheme, usize, f64)> = cfg
        .schemes()
        .into_iter()
        .flat_map(|s| multipliers.iter().map(move |&m| (s, cfg.n, m * h2)))
        .collect();
    let results = run_cells(cfg, &cells);
    let mut rows = Vec::with_capacity(results.len());
    for chunk in results.chunks(multipliers.len()) {
        // A missing ᾱ breaks the chain rather than producing a bogus rate.
        let alphas: Vec<f64> = chunk
            .iter()
            .map(|c| c.summary.filter(|_| c.status.is_ok()).map_or(f64::NAN, |s| s.alpha_bar))
            .collect();
        let rates = successive_rates(&alphas);
        for ((cell, &m), rate) in chunk.iter().zip(multipliers).zip(rates) {
            rows.push(ContractionRow {
                cell: cell.clone(),
                multiplier: m,
                rate: rate.filter(|r| r.is_finite()),
            });
        }
    }
    Ok(ContractionStudy {
        rows,
        hash: config_hash("contract", &c),
        deterministic: cfg.deterministic,
    })
}

impl ContractionStudy {
    pub fn table(&self) -> CsvTable {
        let header = vec![
            "scheme",
            "n",
            "tau_multiplier",
            "tau",
            "steps",
            "alpha_bar",
            "alpha_max",
            "max_gummel_iterations",
            "rate",
            "status",
        ];
        let mut t = CsvTable::new(&with_seconds(header, self.deterministic));
        for r in &self.rows {
            let c = &r.cell;
            let mut row = vec![
                c.scheme.to_string(),
                c.n.to_string(),
                num(r.multiplier),
                num(c.tau),
                c.steps.to_string(),
                opt(c.summary.map(|s| s.alpha_bar)),
                opt(c.summary.map(|s| s.alpha_max)),
                c.summary.map_or_else(String::new, |s| s.max_iterations.to_string()),
                opt(r.rate),
                c.status.label().into(),
            ];
            if !self.deterministic {
                row.push(num(c.seconds));
            }
            t.push(row);
        }
        t
    }

    pub fn to_csv(&self) -> String {
        self.table().render(&self.hash)
    }

    pub fn failure(&self) -> Option<CliError> {
        status_error(&self.rows.iter().map(|r| r.cell.clone()).collect::<Vec<_>>())
    }

    /// `ᾱ` per multiplier for one scheme, in input order.
    pub fn alpha_bars(&self, scheme: Scheme) -> Vec<Option<f64>> {
        self.rows
            .iter()
            .filter(|r| r.cell.scheme == scheme)
            .map(|r| r.cell.summary.map(|s| s.alpha_bar))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuditRow {
    pub step: usize,
    pub t: f64,
    pub species: usize,
    pub mmatrix_ok: bool,
    pub tau_star: f64,
    pub min_interior: f64,
}

#[derive(Debug, Clone)]
pub struct MMatrixAudit {
    pub scheme: Scheme,
    pub tau: f64,
    pub quality: MeshQualityReport,
    pub rows: Vec<AuditRow>,
    pub status: CellStatus,
    pub hash: String,
}

/// Runs the configured scheme on the configured (possibly stretched) box and
/// records, per step and species, the edge-weight signs of the mesh, the
/// M-matrix verdict of the final interior NP matrix and `τ_*`.
pub fn run_mmatrix_audit(cfg: &RunConfig) -> Result<MMatrixAudit, CliError> {
    cfg.validate()?;
    let scheme = cfg.single_scheme();
    let quality = mesh_quality_report(&cfg.mesh(cfg.n)?);
    let (outcome, status) = run_benchmark(cfg, scheme, cfg.n, cfg.tau(), true)?;
    let rows = outcome
        .diagnostics
        .iter()
        .flat_map(|d| {
            (0..2).map(move |s| AuditRow {
                step: d.step,
                t: d.t,
                species: s,
                mmatrix_ok: d.mmatrix_ok[s],
                tau_star: d.bounds[s].tau_star,
                min_interior: d.min[s],
            })
        })
        .collect();
    Ok(MMatrixAudit {
        scheme,
        tau: outcome.tau,
        quality,
        rows,
        status,
        hash: config_hash("audit", cfg),
    })
}

impl MMatrixAudit {
    pub fn table(&self) -> CsvTable {
        let q = &self.quality;
        let mut t = CsvTable::new(&[
            "step",
            "t",
            "species",
            "omega_positive_fraction",
            "omega_nonpositive",
            "omega_negative",
            "omega_all_positive",
            "mmatrix_ok",
            "tau_star",
            "min_interior",
        ]);
        for r in &self.rows {
            t.push(vec![
                r.step.to_string(),
                num(r.t),
                r.species.to_string(),
                num(q.positive_fraction),
                q.violations.len().to_string(),
                q.negative_count().to_string(),
                q.all_positive.to_string(),
                r.mmatrix_ok.to_string(),
                num(r.tau_star),
                num(r.min_interior),
            ]);
        }
        t
    }

    pub fn to_csv(&self) -> String {
        self.table().render(&self.hash)
    }

    pub fn failure(&self) -> Option<CliError> {
        (!self.status.is_ok()).then(|| CliError::NotConverged(format!("audit run with {}", self.scheme)))
    }
}

#[derive(Debug, Clone)]
pub struct SingleRun {
    pub scheme: Scheme,
    pub outcome: TransientOutcome,
    pub status: CellStatus,
    pub errors: Option<[ErrorNorms; 3]>,
    pub hash: String,
}

/// One transient of the benchmark with full diagnostics.
pub fn run_single(cfg: &RunConfig) -> Result<SingleRun, CliError> {
    cfg.validate()?;
    let scheme = cfg.single_scheme();
    let (outcome, status) = run_benchmark(cfg, scheme, cfg.n, cfg.tau(), true)?;
    let errors = if status.is_ok() {
        Some(final_errors(cfg, cfg.n, &outcome)?)
    } else {
        None
    };
    Ok(SingleRun {
        scheme,
        outcome,
        status,
        errors,
        hash: config_hash("run", cfg),
    })
}

impl SingleRun {
    pub fn to_csv(&self) -> String {
        let mut s = history_csv(&self.outcome);
        s.push_str("# config-hash ");
        s.push_str(&self.hash);
        s.push('\n');
        s
    }

    pub fn failure(&self) -> Option<CliError> {
        (!self.status.is_ok()).then(|| {
            CliError::NotConverged(format!(
                "{} stopped after {} steps",
                self.scheme,
                self.outcome.reports.len()
            ))
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> RunConfig {
        RunConfig {
            n: 2,
            t_final: 0.5,
            sizes: vec![2, 4],
            ..RunConfig::default()
        }
    }

    #[test]
    fn rates_follow_size_ratio() {
        assert_eq!(observed_rate(4.0, 1.0, 4, 8), Some(2.0));
        assert!((observed_rate(9.0, 1.0, 2, 6).unwrap() - 2.0).abs() < 1e-12);
        assert_eq!(observed_rate(0.0, 1.0, 4, 8), None);
    }

    #[test]
    fn convergence_needs_two_sizes() {
        assert!(matches!(
            run_convergence_study(&small(), &[4]),
            Err(CliError::Config(_))
        ));
    }

    #[test]
    fn convergence_rows_are_ordered_and_rated() {
        let mut cfg = small();
        cfg.scheme = Some(Scheme::Eafe);
        let s = run_convergence_study(&cfg, &[2, 4]).unwrap();
        assert_eq!(s.rows.len(), 2);
        assert_eq!((s.rows[0].cell.n, s.rows[1].cell.n), (2, 4));
        assert!(s.rows[0].rates.iter().all(Option::is_none));
        assert!(s.rows[1].rates.iter().all(Option::is_some));
        assert!(s.failure().is_none());
        let csv = s.to_csv();
        assert_eq!(csv.lines().count(), 4);
        assert!(csv.lines().last().unwrap().starts_with("# config-hash "));
    }

    #[test]
    fn non_convergence_is_reported_per_cell() {
        let mut cfg = small();
        cfg.scheme = Some(Scheme::Fem);
        cfg.max_iter = 1;
        let s = run_contraction_study(&cfg, &[2.0, 1.0]).unwrap();
        assert!(s.rows.iter().all(|r| r.cell.status == CellStatus::NotConverged));
        assert!(s.rows.iter().all(|r| r.rate.is_none()));
        assert!(matches!(s.failure(), Some(CliError::NotConverged(_))));
    }

    #[test]
    fn audit_rows_cover_steps_and_species() {
        let mut cfg = small();
        cfg.scheme = Some(Scheme::Eafe);
        let a = run_mmatrix_audit(&cfg).unwrap();
        assert_eq!(a.rows.len(), 2 * 2);
        assert!(a.rows.iter().all(|r| r.mmatrix_ok));
        let mut bad = cfg.clone();
        bad.tau_rule = crate::config::TauRule::Value(0.0);
        assert!(matches!(run_mmatrix_audit(&bad), Err(CliError::Config(_))));
    }
}
