use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use pnp_cli::{
    run_contraction_study, run_convergence_study, run_mmatrix_audit, run_single, write_output, CliError, RunConfig,
};
use pnp_core::mesh::mesh_quality_report;

#[derive(Parser)]
#[command(
    name = "pnp",
    about = "Poisson-Nernst-Planck solver studies on the manufactured benchmark"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Error norms and observed rates over mesh sizes (errors.csv).
    Converge(Common),
    /// Mean Gummel contraction over time-step multipliers (contraction.csv).
    Contract(Common),
    /// Edge-weight signs, M-matrix verdicts and tau_* per step (audit.csv).
    Audit(Common),
    /// One transient with per-step history (history.csv).
    Run(Common),
    /// Dump the mesh (mesh.txt).
    Mesh(Common),
}

/// Flags override the config file, which overrides the defaults.
#[derive(Args)]
struct Common {
    #[arg(long)]
    config: Option<PathBuf>,
    /// fem, supg, eafe or all.
    #[arg(long)]
    scheme: Option<String>,
    #[arg(long)]
    n: Option<String>,
    /// A number, or h2, 2h2, 4h2.
    #[arg(long)]
    tau: Option<String>,
    #[arg(long = "T")]
    t_final: Option<String>,
    #[arg(long)]
    eps: Option<String>,
    #[arg(long)]
    max_iter: Option<String>,
    #[arg(long)]
    supg_scale: Option<String>,
    /// Comma-separated mesh sizes for `converge`.
    #[arg(long)]
    sizes: Option<String>,
    /// Comma-separated multiples of h^2 for `contract`.
    #[arg(long)]
    multipliers: Option<String>,
    /// Box length along x relative to y and z.
    #[arg(long)]
    aspect: Option<String>,
    /// Add a wall-clock column to study tables.
    #[arg(long)]
    timings: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn resolve(&self) -> Result<RunConfig, CliError> {
        let mut cfg = RunConfig::default();
        if let Some(p) = &self.config {
            cfg.apply_file(p)?;
        }
        let flags = [
            ("scheme", &self.scheme),
            ("n", &self.n),
            ("tau", &self.tau),
            ("T", &self.t_final),
            ("eps", &self.eps),
            ("max_iter", &self.max_iter),
            ("supg_scale", &self.supg_scale),
            ("sizes", &self.sizes),
            ("multipliers", &self.multipliers),
            ("aspect", &self.aspect),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                cfg.set(key, v)?;
            }
        }
        if self.timings {
            cfg.deterministic = false;
        }
        if let Some(out) = &self.out {
            cfg.out = out.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn execute(command: Command) -> Result<(), CliError> {
    match command {
        Command::Converge(c) => {
            let cfg = c.resolve()?;
            let study = run_convergence_study(&cfg, &cfg.sizes)?;
            let path = write_output(&cfg.out, "errors.csv", &study.to_csv())?;
            println!("wrote {}", path.display());
            study.failure().map_or(Ok(()), Err)
        }
        Command::Contract(c) => {
            let cfg = c.resolve()?;
            let study = run_contraction_study(&cfg, &cfg.multipliers)?;
            let path = write_output(&cfg.out, "contraction.csv", &study.to_csv())?;
            println!("wrote {}", path.display());
            study.failure().map_or(Ok(()), Err)
        }
        Command::Audit(c) => {
            let cfg = c.resolve()?;
            let audit = run_mmatrix_audit(&cfg)?;
            let path = write_output(&cfg.out, "audit.csv", &audit.to_csv())?;
            let q = &audit.quality;
            println!(
                "omega: {} of {} weights not strictly positive ({} negative)",
                q.violations.len(),
                6 * q.positive_per_tet.len(),
                q.negative_count()
            );
            println!("wrote {}", path.display());
            audit.failure().map_or(Ok(()), Err)
        }
        Command::Run(c) => {
            let cfg = c.resolve()?;
            let run = run_single(&cfg)?;
            let path = write_output(&cfg.out, "history.csv", &run.to_csv())?;
            if let Some(e) = &run.errors {
                for (name, n) in ["u", "p", "n"].iter().zip(e) {
                    println!("{name}: L2 {} H1 {}", n.l2, n.h1_semi);
                }
            }
            println!("wrote {}", path.display());
            run.failure().map_or(Ok(()), Err)
        }
        Command::Mesh(c) => {
            let cfg = c.resolve()?;
            let mesh = cfg.mesh(cfg.n)?;
            let path = write_output(&cfg.out, "mesh.txt", &mesh.to_text())?;
            let q = mesh_quality_report(&mesh);
            println!(
                "{} nodes, {} tets, positive edge-weight fraction {}",
                mesh.num_nodes(),
                mesh.num_tets(),
                q.positive_fraction
            );
            println!("wrote {}", path.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
