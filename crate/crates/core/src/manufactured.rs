//! Exact solution of the semiconductor benchmark on `[-1/2, 1/2]³`:
//!
//! ```text
//! u = (1 − e^{−t}) C,   p = 3π² sin t (1 + C/2),   n = 3π² sin 2t (1 − C/2),
//! C = cos πx cos πy cos πz
//! ```
//!
//! with `−Δu − (p − n) = F1`, `∂ₜp − ∇·(∇p + c p∇u) = F2` and
//! `∂ₜn − ∇·(∇n − c n∇u) = F3`.

use std::f64::consts::PI;

use crate::assembly::{AssemblyError, Scheme, SchemeConfig};
use crate::mesh::{Point, TetMesh};
use crate::problem::PnpProblem;
use crate::quadrature::TetRule;

pub const C_LAMBDA: f64 = 0.179;
pub const DOMAIN_LO: Point = [-0.5; 3];
pub const DOMAIN_HI: Point = [0.5; 3];

const PI2: f64 = PI * PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Field {
    U,
    P,
    N,
}

impl Field {
    pub const ALL: [Field; 3] = [Field::U, Field::P, Field::N];

    pub fn name(self) -> &'static str {
        match self {
            Field::U => "u",
            Field::P => "p",
            Field::N => "n",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldValue {
    pub value: f64,
    pub gradient: Point,
    pub time_derivative: f64,
}

/// `C` and `∇C`.
fn cosines(x: Point) -> (f64, Point) {
    let [cx, cy, cz] = x.map(|v| (PI * v).cos());
    let [sx, sy, sz] = x.map(|v| (PI * v).sin());
    let c = cx * cy * cz;
    (c, [-PI * sx * cy * cz, -PI * cx * sy * cz, -PI * cx * cy * sz])
}

fn amplitudes(field: Field, t: f64) -> (f64, f64, f64) {
    // (amplitude, its time derivative, sign of the C/2 term); u has no offset.
    match field {
        Field::U => ((1.0 - (-t).exp()), (-t).exp(), 0.0),
        Field::P => (3.0 * PI2 * t.sin(), 3.0 * PI2 * t.cos(), 0.5),
        Field::N => (3.0 * PI2 * (2.0 * t).sin(), 6.0 * PI2 * (2.0 * t).cos(), -0.5),
    }
}

pub fn exact_eval(field: Field, x: Point, t: f64) -> FieldValue {
    let (c, gc) = cosines(x);
    let (a, da, k) = amplitudes(field, t);
    let (shape, dshape) = match field {
        Field::U => (c, 1.0),
        _ => (1.0 + k * c, k),
    };
    FieldValue {
        value: a * shape,
        gradient: gc.map(|g| a * dshape * g),
        time_derivative: da * shape,
    }
}

/// `(F1, F2, F3)` for the drift coefficient `c`.
pub fn source_terms_with(x: Point, t: f64, c: f64) -> [f64; 3] {
    let (cc, gc) = cosines(x);
    let grad_c2 = gc[0] * gc[0] + gc[1] * gc[1] + gc[2] * gc[2];
    let a = 1.0 - (-t).exp();
    let (s1, ds1, _) = amplitudes(Field::P, t);
    let (s2, ds2, _) = amplitudes(Field::N, t);
    let p = s1 * (1.0 + 0.5 * cc);
    let n = s2 * (1.0 - 0.5 * cc);
    let f1 = 3.0 * PI2 * a * cc - (p - n);
    let f2 = ds1 * (1.0 + 0.5 * cc) + 1.5 * PI2 * s1 * cc - c * (0.5 * s1 * a * grad_c2 - 3.0 * PI2 * a * cc * p);
    let f3 = ds2 * (1.0 - 0.5 * cc) - 1.5 * PI2 * s2 * cc + c * (-0.5 * s2 * a * grad_c2 - 3.0 * PI2 * a * cc * n);
    [f1, f2, f3]
}

pub fn source_terms(x: Point, t: f64) -> [f64; 3] {
    source_terms_with(x, t, C_LAMBDA)
}

/// The benchmark as a [`PnpProblem`]; species 0 is `p`, species 1 is `n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Benchmark {
    pub c_lambda: f64,
}

impl Default for Benchmark {
    fn default() -> Self {
        Self { c_lambda: C_LAMBDA }
    }
}

impl Benchmark {
    /// Poisson coupling `+p − n`, drift `+c p∇u` and `−c n∇u`.
    pub fn scheme_config(&self, scheme: Scheme) -> SchemeConfig {
        SchemeConfig::new(scheme, [1.0, -1.0], [self.c_lambda, -self.c_lambda])
    }

    pub fn mesh(n: usize) -> TetMesh {
        TetMesh::build_box(n, DOMAIN_LO, DOMAIN_HI).expect("n > 0 gives a valid box mesh")
    }
}

fn species_field(species: usize) -> Field {
    match species {
        0 => Field::P,
        1 => Field::N,
        _ => panic!("species index {species} out of range"),
    }
}

impl PnpProblem for Benchmark {
    fn poisson_source(&self, x: Point, t: f64) -> f64 {
        source_terms_with(x, t, self.c_lambda)[0]
    }

    fn species_source(&self, species: usize, x: Point, t: f64) -> f64 {
        source_terms_with(x, t, self.c_lambda)[1 + species]
    }

    fn boundary_potential(&self, x: Point, t: f64) -> f64 {
        exact_eval(Field::U, x, t).value
    }

    fn boundary_concentration(&self, species: usize, x: Point, t: f64) -> f64 {
        exact_eval(species_field(species), x, t).value
    }

    fn initial_potential(&self, x: Point) -> f64 {
        exact_eval(Field::U, x, 0.0).value
    }

    fn initial_concentration(&self, species: usize, x: Point) -> f64 {
        exact_eval(species_field(species), x, 0.0).value
    }
}

/// Nodal interpolant of `field` at time `t`.
pub fn interpolate(mesh: &TetMesh, field: Field, t: f64) -> Vec<f64> {
    mesh.nodes().iter().map(|&x| exact_eval(field, x, t).value).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorNorms {
    pub l2: f64,
    pub h1_semi: f64,
}

/// Quadrature degree used by [`error_norms`].
pub const ERROR_QUADRATURE_DEGREE: usize = 4;

/// `‖u_h − u‖_{L²}` and `|u_h − u|_{H¹}` with a rule exact to degree 4 on
/// every tet.
pub fn error_norms(mesh: &TetMesh, dofs: &[f64], field: Field, t: f64) -> Result<ErrorNorms, AssemblyError> {
    error_norms_with(mesh, dofs, ERROR_QUADRATURE_DEGREE, |x| exact_eval(field, x, t))
}

/// Error norms against an arbitrary exact field, with a rule exact to
/// `degree`.
pub fn error_norms_with<F: Fn(Point) -> FieldValue>(
    mesh: &TetMesh,
    dofs: &[f64],
    degree: usize,
    exact: F,
) -> Result<ErrorNorms, AssemblyError> {
    if dofs.len() != mesh.num_nodes() {
        return Err(AssemblyError::DimensionMismatch {
            expected: mesh.num_nodes(),
            found: dofs.len(),
        });
    }
    let rule = TetRule::with_degree(degree);
    let mut l2 = 0.0;
    let mut h1 = 0.0;
    for (k, tet) in mesh.tets().iter().enumerate() {
        let g = mesh.geometry(k);
        let local = tet.map(|v| dofs[v]);
        let grad_h = g.gradient(local);
        let xs = rule.physical_points(&mesh.tet_vertices(k));
        for ((x, lam), w) in xs.iter().zip(&rule.points).zip(&rule.weights) {
            let e = exact(*x);
            let uh: f64 = (0..4).map(|m| lam[m] * local[m]).sum();
            let d = uh - e.value;
            let dg = [0, 1, 2].map(|i| grad_h[i] - e.gradient[i]);
            l2 += w * g.volume * d * d;
            h1 += w * g.volume * (dg[0] * dg[0] + dg[1] * dg[1] + dg[2] * dg[2]);
        }
    }
    Ok(ErrorNorms {
        l2: l2.sqrt(),
        h1_semi: h1.sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_values() {
        assert_eq!(exact_eval(Field::U, [0.0; 3], 0.0).value, 0.0);
        let u = exact_eval(Field::U, [0.0; 3], 0.25).value;
        assert!((u - 0.221_199_216_928_595).abs() < 1e-12);
        for t in [0.1, 0.7, 2.0] {
            let p = exact_eval(Field::P, [0.5, 0.13, -0.31], t).value;
            assert!((p - 3.0 * PI2 * t.sin()).abs() < 1e-12);
            let n = exact_eval(Field::N, [0.2, -0.5, 0.1], t).value;
            assert!((n - 3.0 * PI2 * (2.0 * t).sin()).abs() < 1e-12);
        }
    }

    #[test]
    fn sources_at_initial_time() {
        let x = [0.1, -0.2, 0.3];
        assert_eq!(source_terms(x, 0.0)[0], 0.0);
        let f2 = source_terms([0.0; 3], 0.0)[1];
        assert!((f2 - 4.5 * PI2).abs() < 1e-12);
        assert!((f2 - 44.413_219_804_902).abs() < 1e-7);
    }

    #[test]
    fn boundary_traces_match_fields() {
        let prob = Benchmark::default();
        let x = [-0.5, 0.3, 0.1];
        assert_eq!(
            prob.boundary_concentration(0, x, 0.4),
            exact_eval(Field::P, x, 0.4).value
        );
        assert_eq!(
            prob.boundary_concentration(1, x, 0.4),
            exact_eval(Field::N, x, 0.4).value
        );
        assert_eq!(prob.boundary_potential(x, 0.4), exact_eval(Field::U, x, 0.4).value);
        assert!(prob.boundary_potential(x, 0.4).abs() < 1e-16);
    }

    #[test]
    fn linear_fields_have_zero_error() {
        let mesh = Benchmark::mesh(3);
        let f = |x: Point| 1.0 + 2.0 * x[0] - x[1] + 0.5 * x[2];
        let dofs: Vec<f64> = mesh.nodes().iter().map(|&x| f(x)).collect();
        let e = error_norms_with(&mesh, &dofs, 4, |x| FieldValue {
            value: f(x),
            gradient: [2.0, -1.0, 0.5],
            time_derivative: 0.0,
        })
        .unwrap();
        assert!(e.l2 < 1e-13 && e.h1_semi < 1e-12);
        assert!(error_norms(&mesh, &[0.0; 2], Field::U, 0.0).is_err());
    }

    #[test]
    fn interpolation_error_is_second_order() {
        let t = 0.25;
        let errs: Vec<f64> = [4, 8]
            .iter()
            .map(|&n| {
                let mesh = Benchmark::mesh(n);
                error_norms(&mesh, &interpolate(&mesh, Field::U, t), Field::U, t)
                    .unwrap()
                    .l2
            })
            .collect();
        let ratio = errs[0] / errs[1];
        assert!((3.5..=4.5).contains(&ratio), "{ratio}");
    }
}
