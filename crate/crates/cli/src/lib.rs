//! Front end for the PNP solver: configuration, the convergence,
//! contraction and M-matrix studies, and their CSV output.

use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

pub mod config;
pub mod csv;
pub mod studies;

pub use config::{RunConfig, TauRule};
pub use studies::{
    run_contraction_study, run_convergence_study, run_mmatrix_audit, run_single, CellResult, CellStatus,
    ContractionStudy, ConvergenceStudy, MMatrixAudit, SingleRun,
};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("Gummel iteration did not converge: {0}")]
    NotConverged(String),
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

impl CliError {
    /// 2 for configuration, 3 for solver trouble, 4 for I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::NotConverged(_) | CliError::Solver(_) => 3,
            CliError::Io { .. } => 4,
        }
    }
}

/// Writes `contents` to `dir/name`, creating `dir` if needed.
pub fn write_output(dir: &Path, name: &str, contents: &str) -> Result<PathBuf, CliError> {
    let io_err = |path: &Path| {
        let path = path.to_path_buf();
        move |source| CliError::Io { path, source }
    };
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(io_err(&path))?;
    Ok(path)
}
