//! Plain CSV tables with a trailing `# config-hash <hex>` line.

use sha2::{Digest, Sha256};

use crate::config::RunConfig;

/// SHA-256 of the study name and the canonical config.
pub fn config_hash(study: &str, cfg: &RunConfig) -> String {
    let mut h = Sha256::new();
    h.update(study.as_bytes());
    h.update(b"\n");
    h.update(cfg.canonical().as_bytes());
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Shortest round-trip decimal; exponent form outside `[1e-5, 1e16)`.
pub fn num(x: f64) -> String {
    format!("{x:?}")
}

pub fn opt(x: Option<f64>) -> String {
    x.map_or_else(String::new, num)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn render(&self, hash: &str) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for r in &self.rows {
            out.push_str(&r.join(","));
            out.push('\n');
        }
        out.push_str("# config-hash ");
        out.push_str(hash);
        out.push('\n');
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_is_stable_hex() {
        let cfg = RunConfig::default();
        let a = config_hash("converge", &cfg);
        assert_eq!(a.len(), 64);
        assert!(a.chars().all(|c| c.is_ascii_hexdigit()));
        assert_eq!(a, config_hash("converge", &cfg));
        assert_ne!(a, config_hash("contract", &cfg));
    }

    #[test]
    fn numbers_round_trip() {
        for x in [0.1, 1.0 / 3.0, 4.4e-2, 1e-300, 12345.0] {
            assert_eq!(num(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(opt(None), "");
    }

    #[test]
    fn render_has_header_and_trailer() {
        let mut t = CsvTable::new(&["a", "b"]);
        t.push(vec!["1".into(), "2".into()]);
        assert_eq!(t.render("ff"), "a,b\n1,2\n# config-hash ff\n");
    }
}
