//! Quadrature rules on intervals and tetrahedra.

use crate::mesh::Point;

/// A rule on a tetrahedron: barycentric coordinates and weights that sum to 1
/// (multiply by the element volume).
#[derive(Debug, Clone)]
pub struct TetRule {
    pub points: Vec<[f64; 4]>,
    pub weights: Vec<f64>,
}

impl TetRule {
    /// The symmetric 4-point rule, exact for polynomials of degree 2.
    pub fn degree2() -> Self {
        let a = 0.585_410_196_624_968_5;
        let b = 0.138_196_601_125_010_5;
        Self {
            points: vec![[a, b, b, b], [b, a, b, b], [b, b, a, b], [b, b, b, a]],
            weights: vec![0.25; 4],
        }
    }

    /// Collapsed (Duffy) product of `m`-point Gauss–Legendre rules. Exact
    /// for polynomials of degree `2m − 3` on the tetrahedron.
    pub fn collapsed(m: usize) -> Self {
        let (x, w) = gauss_legendre_unit(m);
        let mut points = Vec::with_capacity(m * m * m);
        let mut weights = Vec::with_capacity(m * m * m);
        for (i, &a) in x.iter().enumerate() {
            for (j, &b) in x.iter().enumerate() {
                for (k, &c) in x.iter().enumerate() {
                    let l3 = c;
                    let l2 = b * (1.0 - c);
                    let l1 = a * (1.0 - b) * (1.0 - c);
                    let l0 = 1.0 - l1 - l2 - l3;
                    points.push([l0, l1, l2, l3]);
                    // Jacobian (1 − b)(1 − c)², times 6 so weights sum to 1.
                    weights.push(6.0 * w[i] * w[j] * w[k] * (1.0 - b) * (1.0 - c) * (1.0 - c));
                }
            }
        }
        Self { points, weights }
    }

    /// Rule exact to at least `degree`.
    pub fn with_degree(degree: usize) -> Self {
        if degree <= 2 {
            Self::degree2()
        } else {
            Self::collapsed((degree + 4) / 2)
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Physical coordinates of every point for the tet with `vertices`.
    pub fn physical_points(&self, vertices: &[Point; 4]) -> Vec<Point> {
        self.points
            .iter()
            .map(|l| {
                let mut x = [0.0; 3];
                for m in 0..4 {
                    for d in 0..3 {
                        x[d] += l[m] * vertices[m][d];
                    }
                }
                x
            })
            .collect()
    }
}

/// Gauss–Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre_unit(m: usize) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(m);
    (
        x.iter().map(|t| 0.5 * (t + 1.0)).collect(),
        w.iter().map(|v| 0.5 * v).collect(),
    )
}

/// Gauss–Legendre nodes and weights on `[−1, 1]`, by Newton iteration on
/// the three-term recurrence.
pub fn gauss_legendre(m: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(m > 0, "need at least one Gauss point");
    let mut nodes = vec![0.0; m];
    let mut weights = vec![0.0; m];
    let n = m as f64;
    for i in 0..m.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(m, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(m, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[m - 1 - i] = x;
        weights[i] = w;
        weights[m - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre(m: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if m == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=m {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let n = m as f64;
    (p1, n * (x * p1 - p0) / (x * x - 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn factorial(n: u32) -> f64 {
        (1..=n).map(f64::from).product()
    }

    /// ∫ over the reference simplex of λ1^a λ2^b λ3^c, times 6.
    fn monomial(a: u32, b: u32, c: u32) -> f64 {
        6.0 * factorial(a) * factorial(b) * factorial(c) / factorial(a + b + c + 3)
    }

    fn check(rule: &TetRule, degree: u32) {
        for a in 0..=degree {
            for b in 0..=degree - a {
                for c in 0..=degree - a - b {
                    let q: f64 = rule
                        .points
                        .iter()
                        .zip(&rule.weights)
                        .map(|(l, w)| w * l[1].powi(a as i32) * l[2].powi(b as i32) * l[3].powi(c as i32))
                        .sum();
                    let exact = monomial(a, b, c);
                    assert!(
                        (q - exact).abs() < 1e-13 * exact.max(1.0),
                        "{a},{b},{c}: {q} vs {exact}"
                    );
                }
            }
        }
    }

    #[test]
    fn gauss_legendre_low_orders() {
        let (x, w) = gauss_legendre(2);
        assert!((x[1] - 1.0 / 3f64.sqrt()).abs() < 1e-15);
        assert!((w[0] - 1.0).abs() < 1e-15);
        let (x, w) = gauss_legendre(5);
        assert!(x[2].abs() < 1e-16);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn tet_rules_are_exact() {
        check(&TetRule::degree2(), 2);
        check(&TetRule::with_degree(4), 4);
        check(&TetRule::with_degree(8), 8);
    }
}
