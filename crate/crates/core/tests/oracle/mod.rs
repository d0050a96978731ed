//! Brute-force reference assembly built from the bilinear forms themselves,
//! sharing no code with the production assemblers. Gauss rules come from the
//! Golub–Welsch eigenvalue method and barycentric coordinates from a dense
//! inverse of the vertex matrix.

#![allow(dead_code)]

use nalgebra::{DMatrix, Matrix4, SymmetricEigen};
use pnp_core::mesh::TetMesh;

pub type Dense = DMatrix<f64>;

/// Gauss–Legendre rule on `[0, 1]` from the eigen-decomposition of the
/// Jacobi matrix.
pub fn gauss_legendre(m: usize) -> (Vec<f64>, Vec<f64>) {
    let mut j = DMatrix::<f64>::zeros(m, m);
    for k in 1..m {
        let b = k as f64 / ((4 * k * k - 1) as f64).sqrt();
        j[(k, k - 1)] = b;
        j[(k - 1, k)] = b;
    }
    let eig = SymmetricEigen::new(j);
    let mut pairs: Vec<(f64, f64)> = (0..m)
        .map(|i| {
            let v0 = eig.eigenvectors[(0, i)];
            (0.5 * (eig.eigenvalues[i] + 1.0), v0 * v0)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    pairs.into_iter().unzip()
}

/// Reference-tetrahedron rule in barycentric form (weights sum to 1), built
/// as a conical product; exact to degree `2m − 3`.
pub fn tet_rule(m: usize) -> Vec<([f64; 4], f64)> {
    let (x, w) = gauss_legendre(m);
    let mut out = Vec::new();
    for i in 0..m {
        for j in 0..m {
            for k in 0..m {
                // Map (u, v, s) ∈ [0,1]³ to the simplex by successive scaling.
                let z = x[k];
                let y = x[j] * (1.0 - z);
                let xx = x[i] * (1.0 - z - y);
                let jac = (1.0 - z) * (1.0 - z - y);
                let l = [1.0 - xx - y - z, xx, y, z];
                out.push((l, 6.0 * w[i] * w[j] * w[k] * jac));
            }
        }
    }
    out
}

/// Affine data of one element: `λ_i(x) = coef[i][0] + Σ_d coef[i][d+1] x_d`.
#[derive(Debug, Clone)]
pub struct Element {
    pub nodes: [usize; 4],
    pub verts: [[f64; 3]; 4],
    pub volume: f64,
    pub coef: [[f64; 4]; 4],
    pub diameter: f64,
}

impl Element {
    pub fn new(mesh: &TetMesh, k: usize) -> Self {
        let nodes = mesh.tets()[k];
        let verts = nodes.map(|v| mesh.nodes()[v]);
        let mut a = Matrix4::<f64>::zeros();
        for (r, v) in verts.iter().enumerate() {
            a[(r, 0)] = 1.0;
            for d in 0..3 {
                a[(r, d + 1)] = v[d];
            }
        }
        let volume = a.determinant().abs() / 6.0;
        // Column i of A⁻¹ holds the coefficients of λ_i.
        let inv = a.try_inverse().expect("nondegenerate element");
        let mut coef = [[0.0; 4]; 4];
        for i in 0..4 {
            for c in 0..4 {
                coef[i][c] = inv[(c, i)];
            }
        }
        let mut diameter: f64 = 0.0;
        for i in 0..4 {
            for j in i + 1..4 {
                let d: f64 = (0..3).map(|c| (verts[i][c] - verts[j][c]).powi(2)).sum::<f64>().sqrt();
                diameter = diameter.max(d);
            }
        }
        Self {
            nodes,
            verts,
            volume,
            coef,
            diameter,
        }
    }

    pub fn grad(&self, i: usize) -> [f64; 3] {
        [self.coef[i][1], self.coef[i][2], self.coef[i][3]]
    }

    pub fn point(&self, l: &[f64; 4]) -> [f64; 3] {
        let mut x = [0.0; 3];
        for m in 0..4 {
            for d in 0..3 {
                x[d] += l[m] * self.verts[m][d];
            }
        }
        x
    }

    /// `λ_i` evaluated from the affine coefficients at a physical point.
    pub fn lambda(&self, i: usize, x: [f64; 3]) -> f64 {
        self.coef[i][0] + self.coef[i][1] * x[0] + self.coef[i][2] * x[1] + self.coef[i][3] * x[2]
    }

    /// Gradient of the P1 interpolant of `v`.
    pub fn grad_of(&self, v: &[f64]) -> [f64; 3] {
        let mut g = [0.0; 3];
        for m in 0..4 {
            for d in 0..3 {
                g[d] += v[self.nodes[m]] * self.grad(m)[d];
            }
        }
        g
    }
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub struct Oracle {
    pub elements: Vec<Element>,
    pub rule: Vec<([f64; 4], f64)>,
    pub n: usize,
}

impl Oracle {
    /// Degree-8 reference assembly (a 6-point conical product, exact to 9).
    pub fn new(mesh: &TetMesh) -> Self {
        Self {
            elements: (0..mesh.num_tets()).map(|k| Element::new(mesh, k)).collect(),
            rule: tet_rule(6),
            n: mesh.num_nodes(),
        }
    }

    /// `∫_K f(x, λ(x))` summed into a local 4×4 block via quadrature.
    fn integrate_block<F: Fn(&Element, [f64; 3], usize, usize) -> f64>(&self, f: F) -> Dense {
        let mut a = Dense::zeros(self.n, self.n);
        for e in &self.elements {
            for (l, w) in &self.rule {
                let x = e.point(l);
                for i in 0..4 {
                    for j in 0..4 {
                        a[(e.nodes[i], e.nodes[j])] += w * e.volume * f(e, x, i, j);
                    }
                }
            }
        }
        a
    }

    pub fn stiffness(&self) -> Dense {
        self.integrate_block(|e, _, i, j| dot(e.grad(i), e.grad(j)))
    }

    /// Row sums of the consistent mass, `∫ ψ_i`, placed on the diagonal.
    pub fn lumped_mass(&self) -> Dense {
        let mut m = Dense::zeros(self.n, self.n);
        for e in &self.elements {
            for (l, w) in &self.rule {
                let x = e.point(l);
                for i in 0..4 {
                    m[(e.nodes[i], e.nodes[i])] += w * e.volume * e.lambda(i, x);
                }
            }
        }
        m
    }

    /// `(∇ψ_j, ∇ψ_i) + c (ψ_j ∇φ_h, ∇ψ_i)`.
    pub fn fem_operator(&self, phi: &[f64], c: f64) -> Dense {
        self.integrate_block(|e, x, i, j| {
            let gphi = e.grad_of(phi);
            dot(e.grad(j), e.grad(i)) + c * e.lambda(j, x) * dot(gphi, e.grad(i))
        })
    }

    /// Edge weights `ω_E^K = −(∇λ_a, ∇λ_b)_K`, by quadrature.
    fn omega(&self, e: &Element, a: usize, b: usize) -> f64 {
        let mut s = 0.0;
        for (_, w) in &self.rule {
            s += w * e.volume * dot(e.grad(a), e.grad(b));
        }
        -s
    }

    /// `Σ_K Σ_E ω_E^K H_E δ_E(e^{cφ} u) δ_E v` with `H_E` the inverse of the
    /// edge mean of `e^{cφ_h}`, integrated numerically along each edge.
    pub fn eafe_operator(&self, phi: &[f64], c: f64) -> Dense {
        let (gx, gw) = gauss_legendre(40);
        let mut a = Dense::zeros(self.n, self.n);
        for e in &self.elements {
            for la in 0..4 {
                for lb in la + 1..4 {
                    let (na, nb) = (e.nodes[la], e.nodes[lb]);
                    let (sa, sb) = (c * phi[na], c * phi[nb]);
                    let mean: f64 = gx.iter().zip(&gw).map(|(t, w)| w * (sa + t * (sb - sa)).exp()).sum();
                    let weight = self.omega(e, la, lb) / mean;
                    // Trial ψ_j contributes δ(e^s ψ_j) = e^{s_b}[j=b] − e^{s_a}[j=a],
                    // test ψ_i gives δψ_i = [i=b] − [i=a].
                    for (i, si) in [(na, -1.0), (nb, 1.0)] {
                        for (j, sj) in [(na, -sa.exp()), (nb, sb.exp())] {
                            a[(i, j)] += weight * sj * si;
                        }
                    }
                }
            }
        }
        a
    }

    /// SUPG system matrix `M + τ(A + S) + T` and the previous-level part of
    /// the right-hand side, `Σ_K (pⁿ_h, w_i)_K` with
    /// `w_i = −C_K β·∇ψ_i`, `β = c∇φ_h`.
    pub fn supg_system(&self, phi: &[f64], c: f64, tau: f64, scale: f64, prev: &[f64]) -> (Dense, Vec<f64>) {
        let weight = |e: &Element, i: usize| {
            let g = e.grad_of(phi);
            let beta = [c * g[0], c * g[1], c * g[2]];
            let bn = dot(beta, beta).sqrt();
            let ck = if e.diameter * bn / 2.0 >= 1.0 {
                scale * e.diameter / (2.0 * bn)
            } else {
                scale * e.diameter * e.diameter / 4.0
            };
            (ck, beta, -ck * dot(beta, e.grad(i)))
        };
        let stab = self.integrate_block(|e, _, i, j| {
            let (ck, beta, _) = weight(e, i);
            ck * dot(beta, e.grad(i)) * dot(beta, e.grad(j))
        });
        let time = self.integrate_block(|e, x, i, j| weight(e, i).2 * e.lambda(j, x));
        let a = self.lumped_mass() + (self.fem_operator(phi, c) + stab) * tau + time;
        let mut rhs = vec![0.0; self.n];
        for e in &self.elements {
            for (l, w) in &self.rule {
                let x = e.point(l);
                let ph: f64 = (0..4).map(|m| prev[e.nodes[m]] * e.lambda(m, x)).sum();
                for i in 0..4 {
                    rhs[e.nodes[i]] += w * e.volume * ph * weight(e, i).2;
                }
            }
        }
        (a, rhs)
    }

    /// `(f, ψ_i)` for a smooth function.
    pub fn load<F: Fn([f64; 3]) -> f64>(&self, f: F) -> Vec<f64> {
        let mut b = vec![0.0; self.n];
        for e in &self.elements {
            for (l, w) in &self.rule {
                let x = e.point(l);
                let fx = f(x);
                for i in 0..4 {
                    b[e.nodes[i]] += w * e.volume * fx * e.lambda(i, x);
                }
            }
        }
        b
    }
}

pub fn to_dense(a: &pnp_core::linalg::CsrMatrix) -> Dense {
    let mut d = Dense::zeros(a.nrows(), a.ncols());
    for (r, c, v) in a.triplets() {
        d[(r, c)] += v;
    }
    d
}

pub fn max_abs_diff(a: &Dense, b: &Dense) -> f64 {
    (a - b).abs().max()
}

/// Kuhn box mesh with every interior node displaced by up to `amp` times
/// the grid spacing in each coordinate.
pub fn jittered_box<R: rand::Rng>(n: usize, amp: f64, rng: &mut R) -> TetMesh {
    let base = TetMesh::build_box(n, [0.0; 3], [1.0; 3]).unwrap();
    let h = 1.0 / n as f64;
    let nodes = base
        .nodes()
        .iter()
        .enumerate()
        .map(|(k, &x)| {
            if base.is_boundary(k) {
                x
            } else {
                x.map(|c| c + amp * h * rng.gen_range(-1.0..1.0))
            }
        })
        .collect();
    TetMesh::from_parts(nodes, base.tets().to_vec()).unwrap()
}
