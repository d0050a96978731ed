//! Run configuration: defaults, then a flat `key=value` file, then flags.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use pnp_core::assembly::Scheme;
use pnp_core::manufactured::{DOMAIN_HI, DOMAIN_LO};
use pnp_core::mesh::TetMesh;

use crate::CliError;

/// How the time step follows from the mesh size `h = 1/n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TauRule {
    H2,
    TwoH2,
    FourH2,
    Value(f64),
}

impl TauRule {
    pub fn resolve(self, h: f64) -> f64 {
        match self {
            TauRule::H2 => h * h,
            TauRule::TwoH2 => 2.0 * h * h,
            TauRule::FourH2 => 4.0 * h * h,
            TauRule::Value(v) => v,
        }
    }
}

impl FromStr for TauRule {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "h2" => Ok(TauRule::H2),
            "2h2" => Ok(TauRule::TwoH2),
            "4h2" => Ok(TauRule::FourH2),
            v => v
                .parse::<f64>()
                .map(TauRule::Value)
                .map_err(|_| format!("tau must be h2, 2h2, 4h2 or a number, got `{v}`")),
        }
    }
}

impl fmt::Display for TauRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TauRule::H2 => f.write_str("h2"),
            TauRule::TwoH2 => f.write_str("2h2"),
            TauRule::FourH2 => f.write_str("4h2"),
            TauRule::Value(v) => write!(f, "{v}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// `None` runs every scheme in the studies and FEM for single runs.
    pub scheme: Option<Scheme>,
    pub n: usize,
    pub tau_rule: TauRule,
    pub t_final: f64,
    pub eps: f64,
    pub max_iter: usize,
    pub supg_scale: f64,
    pub out: PathBuf,
    /// When false, study tables gain a wall-clock `seconds` column and are
    /// no longer reproducible byte for byte.
    pub deterministic: bool,
    /// Mesh subdivisions for the convergence study.
    pub sizes: Vec<usize>,
    /// Multiples of `h²` for the contraction study.
    pub multipliers: Vec<f64>,
    /// Length of the box along x relative to y and z.
    pub aspect: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            scheme: None,
            n: 16,
            tau_rule: TauRule::H2,
            t_final: 0.25,
            eps: 1e-6,
            max_iter: 500,
            supg_scale: 1.0,
            out: PathBuf::from("."),
            deterministic: true,
            sizes: vec![4, 8, 16],
            multipliers: vec![4.0, 2.0, 1.0],
            aspect: 1.0,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, CliError> {
    value
        .trim()
        .parse()
        .map_err(|_| CliError::Config(format!("cannot parse `{value}` for key `{key}`")))
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>, CliError> {
    value.split(',').map(|v| parse(key, v)).collect()
}

impl RunConfig {
    /// Sets one key. Keys match the long flag names.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        let value = value.trim();
        match key.trim() {
            "scheme" => {
                self.scheme = match value {
                    "all" => None,
                    v => Some(
                        v.parse()
                            .map_err(|e: pnp_core::assembly::AssemblyError| CliError::Config(e.to_string()))?,
                    ),
                }
            }
            "n" => self.n = parse(key, value)?,
            "tau" => self.tau_rule = value.parse().map_err(CliError::Config)?,
            "T" => self.t_final = parse(key, value)?,
            "eps" => self.eps = parse(key, value)?,
            "max_iter" => self.max_iter = parse(key, value)?,
            "supg_scale" => self.supg_scale = parse(key, value)?,
            "out" => self.out = PathBuf::from(value),
            "deterministic" => self.deterministic = parse(key, value)?,
            "sizes" => self.sizes = parse_list(key, value)?,
            "multipliers" => self.multipliers = parse_list(key, value)?,
            "aspect" => self.aspect = parse(key, value)?,
            other => return Err(CliError::Config(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    /// Applies a config file: one `key=value` per line, `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<(), CliError> {
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("line {}: expected key=value", no + 1)))?;
            self.set(k, v)?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<(), CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        self.apply_text(&text)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        if self.n == 0 {
            return bad("n must be positive".into());
        }
        let tau = self.tau_rule.resolve(self.h());
        if !(tau > 0.0 && tau.is_finite()) {
            return bad(format!("tau must be positive, got {tau}"));
        }
        if !(self.t_final > 0.0 && self.t_final.is_finite()) {
            return bad(format!("T must be positive, got {}", self.t_final));
        }
        if tau > self.t_final {
            return bad(format!("tau {tau} exceeds T {}", self.t_final));
        }
        if !(self.eps > 0.0) || self.max_iter == 0 {
            return bad("eps and max_iter must be positive".into());
        }
        if !(self.supg_scale > 0.0 && self.supg_scale.is_finite()) {
            return bad("supg_scale must be positive".into());
        }
        if self.sizes.contains(&0) {
            return bad("mesh sizes must be positive".into());
        }
        if self.multipliers.iter().any(|&m| !(m > 0.0 && m.is_finite())) {
            return bad("tau multipliers must be positive".into());
        }
        if !(self.aspect > 0.0 && self.aspect.is_finite()) {
            return bad("aspect must be positive".into());
        }
        Ok(())
    }

    pub fn h(&self) -> f64 {
        1.0 / self.n as f64
    }

    pub fn tau(&self) -> f64 {
        self.tau_rule.resolve(self.h())
    }

    pub fn schemes(&self) -> Vec<Scheme> {
        self.scheme.map_or_else(|| Scheme::ALL.to_vec(), |s| vec![s])
    }

    pub fn single_scheme(&self) -> Scheme {
        self.scheme.unwrap_or(Scheme::Fem)
    }

    /// The benchmark box with `n` cells per axis, stretched along x by
    /// `aspect`.
    pub fn mesh(&self, n: usize) -> Result<TetMesh, CliError> {
        let mut lo = DOMAIN_LO;
        let mut hi = DOMAIN_HI;
        lo[0] *= self.aspect;
        hi[0] *= self.aspect;
        TetMesh::build_box(n, lo, hi).map_err(|e| CliError::Config(e.to_string()))
    }

    /// Every field except the output directory, one `key=value` per line in
    /// fixed order. Hashed into the CSV metadata line.
    pub fn canonical(&self) -> String {
        let scheme = self.scheme.map_or("all", |s| s.name());
        let join = |v: Vec<String>| v.join(",");
        format!(
            "scheme={scheme}\nn={}\ntau={}\nT={}\neps={}\nmax_iter={}\nsupg_scale={}\ndeterministic={}\nsizes={}\nmultipliers={}\naspect={}\n",
            self.n,
            self.tau_rule,
            self.t_final,
            self.eps,
            self.max_iter,
            self.supg_scale,
            self.deterministic,
            join(self.sizes.iter().map(|s| s.to_string()).collect()),
            join(self.multipliers.iter().map(|m| m.to_string()).collect()),
            self.aspect,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tau_rules_resolve() {
        assert_eq!("h2".parse::<TauRule>().unwrap().resolve(0.25), 0.0625);
        assert_eq!("4h2".parse::<TauRule>().unwrap().resolve(0.5), 1.0);
        assert_eq!("0.01".parse::<TauRule>().unwrap(), TauRule::Value(0.01));
        assert!("h3".parse::<TauRule>().is_err());
    }

    #[test]
    fn file_overrides_defaults() {
        let mut c = RunConfig::default();
        c.apply_text("# comment\nscheme = eafe\nn=8 # trailing\n\nsizes=2,4\ntau=2h2\n")
            .unwrap();
        assert_eq!(c.scheme, Some(Scheme::Eafe));
        assert_eq!(c.n, 8);
        assert_eq!(c.sizes, vec![2, 4]);
        assert_eq!(c.tau(), 2.0 / 64.0);
        c.validate().unwrap();
    }

    #[test]
    fn bad_input_is_a_config_error() {
        let mut c = RunConfig::default();
        assert!(matches!(c.apply_text("bogus=1"), Err(CliError::Config(_))));
        assert!(matches!(c.apply_text("n"), Err(CliError::Config(_))));
        assert!(matches!(c.set("n", "-3"), Err(CliError::Config(_))));
        c.set("tau", "0").unwrap();
        assert!(matches!(c.validate(), Err(CliError::Config(_))));
        let mut c = RunConfig::default();
        c.set("multipliers", "1,-2").unwrap();
        assert!(c.validate().is_err());
    }

    #[test]
    fn canonical_form_ignores_output_dir() {
        let a = RunConfig::default();
        let mut b = a.clone();
        b.out = PathBuf::from("/elsewhere");
        assert_eq!(a.canonical(), b.canonical());
        b.n = 5;
        assert_ne!(a.canonical(), b.canonical());
    }

    #[test]
    fn stretched_mesh_spans_aspect() {
        let c = RunConfig {
            aspect: 10.0,
            ..RunConfig::default()
        };
        let m = c.mesh(2).unwrap();
        assert!((m.total_volume() - 10.0).abs() < 1e-12);
    }
}
