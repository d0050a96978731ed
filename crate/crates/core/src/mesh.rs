//! Structured tetrahedral meshes of axis-aligned boxes and per-element P1 geometry.
//!
//! Boxes are split with the Kuhn (Freudenthal) subdivision: every subcube is cut
//! into six tetrahedra sharing the main diagonal. Nodes are numbered
//! lexicographically in `(x, y, z)` so sparsity patterns are reproducible.

use std::collections::HashMap;
use std::fmt::Write as _;

use thiserror::Error;

/// Local vertex pairs `(ν, μ)` with `ν < μ`, in the order used for every
/// per-element edge array.
pub const LOCAL_EDGES: [(usize, usize); 6] = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];

pub type Point = [f64; 3];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeshError {
    #[error("number of subdivisions must be at least 1")]
    ZeroSubdivisions,
    #[error("degenerate box: hi must exceed lo in every coordinate (lo = {lo:?}, hi = {hi:?})")]
    DegenerateBox { lo: Point, hi: Point },
    #[error("tet {tet} has zero volume")]
    DegenerateTet { tet: usize },
    #[error("tet {tet} is inverted (signed volume {volume:e})")]
    InvertedTet { tet: usize, volume: f64 },
    #[error("tet {tet} references node {node}, but the mesh has {num_nodes} nodes")]
    NodeOutOfRange { tet: usize, node: usize, num_nodes: usize },
    #[error("tet index {tet} out of range ({num_tets} tets)")]
    TetOutOfRange { tet: usize, num_tets: usize },
}

/// Volume, barycentric gradients and edge weights of one P1 tetrahedron.
#[derive(Debug, Clone, PartialEq)]
pub struct TetGeometry {
    pub volume: f64,
    /// Gradients of the barycentric coordinates, one per local vertex.
    pub grad_lambda: [Point; 4],
    /// `ω_E = −volume · (∇λ_μ · ∇λ_ν)`, indexed like [`LOCAL_EDGES`].
    pub omega: [f64; 6],
    /// Element diameter (longest edge).
    pub diameter: f64,
}

impl TetGeometry {
    /// Computes the geometry of the tet `(x0, x1, x2, x3)`. The vertex order
    /// must give a positive signed volume.
    pub fn from_vertices(vertices: &[Point; 4]) -> Result<Self, MeshError> {
        Self::compute(vertices, 0)
    }

    fn compute(v: &[Point; 4], tet: usize) -> Result<Self, MeshError> {
        let e1 = sub(v[1], v[0]);
        let e2 = sub(v[2], v[0]);
        let e3 = sub(v[3], v[0]);
        let det = dot(e1, cross(e2, e3));
        let scale = norm(e1) * norm(e2) * norm(e3);
        if det == 0.0 || !det.is_finite() || det.abs() <= f64::EPSILON * scale {
            return Err(MeshError::DegenerateTet { tet });
        }
        if det < 0.0 {
            return Err(MeshError::InvertedTet { tet, volume: det / 6.0 });
        }
        // Rows of the inverse Jacobian are the gradients of λ1..λ3.
        let g1 = scale_vec(cross(e2, e3), 1.0 / det);
        let g2 = scale_vec(cross(e3, e1), 1.0 / det);
        let g3 = scale_vec(cross(e1, e2), 1.0 / det);
        let g0 = [
            -(g1[0] + g2[0] + g3[0]),
            -(g1[1] + g2[1] + g3[1]),
            -(g1[2] + g2[2] + g3[2]),
        ];
        let grad_lambda = [g0, g1, g2, g3];
        let volume = det / 6.0;
        let mut omega = [0.0; 6];
        let mut diameter: f64 = 0.0;
        for (e, &(a, b)) in LOCAL_EDGES.iter().enumerate() {
            omega[e] = -volume * dot(grad_lambda[a], grad_lambda[b]);
            diameter = diameter.max(norm(sub(v[b], v[a])));
        }
        Ok(Self {
            volume,
            grad_lambda,
            omega,
            diameter,
        })
    }

    /// Gradient of the linear interpolant with nodal values `values`.
    pub fn gradient(&self, values: [f64; 4]) -> Point {
        let mut g = [0.0; 3];
        for (m, gl) in self.grad_lambda.iter().enumerate() {
            for d in 0..3 {
                g[d] += values[m] * gl[d];
            }
        }
        g
    }

    /// `volume · (∇λ_i · ∇λ_j)`, the element stiffness matrix.
    pub fn stiffness(&self) -> [[f64; 4]; 4] {
        let mut k = [[0.0; 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                k[i][j] = self.volume * dot(self.grad_lambda[i], self.grad_lambda[j]);
            }
        }
        k
    }
}

/// Conforming tetrahedral mesh with edge bookkeeping.
#[derive(Debug, Clone)]
pub struct TetMesh {
    nodes: Vec<Point>,
    tets: Vec<[usize; 4]>,
    edges: Vec<(usize, usize)>,
    tet_edges: Vec<[usize; 6]>,
    boundary: Vec<bool>,
    geometry: Vec<TetGeometry>,
    subdivisions: Option<usize>,
    h: f64,
}

/// Structured box meshes are ordinary [`TetMesh`] values.
pub type BoxMesh = TetMesh;

impl TetMesh {
    /// Kuhn triangulation of the box `[lo, hi]` with `n` subdivisions per axis.
    pub fn build_box(n: usize, lo: Point, hi: Point) -> Result<Self, MeshError> {
        if n == 0 {
            return Err(MeshError::ZeroSubdivisions);
        }
        if (0..3).any(|d| !(hi[d] > lo[d]) || !lo[d].is_finite() || !hi[d].is_finite()) {
            return Err(MeshError::DegenerateBox { lo, hi });
        }
        let np = n + 1;
        let index = |i: usize, j: usize, k: usize| (i * np + j) * np + k;
        let coord = |d: usize, i: usize| {
            if i == n {
                hi[d]
            } else {
                lo[d] + (hi[d] - lo[d]) * i as f64 / n as f64
            }
        };

        let mut nodes = Vec::with_capacity(np * np * np);
        let mut boundary = Vec::with_capacity(np * np * np);
        for i in 0..np {
            for j in 0..np {
                for k in 0..np {
                    nodes.push([coord(0, i), coord(1, j), coord(2, k)]);
                    boundary.push([i, j, k].iter().any(|&c| c == 0 || c == n));
                }
            }
        }

        // Each permutation of the axes walks from the low corner to the high
        // corner of the subcube; odd permutations get two vertices swapped to
        // keep the orientation positive.
        const PERMUTATIONS: [([usize; 3], bool); 6] = [
            ([0, 1, 2], false),
            ([1, 2, 0], false),
            ([2, 0, 1], false),
            ([0, 2, 1], true),
            ([1, 0, 2], true),
            ([2, 1, 0], true),
        ];
        let mut tets = Vec::with_capacity(6 * n * n * n);
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for (perm, odd) in PERMUTATIONS {
                        let mut c = [i, j, k];
                        let mut tet = [index(c[0], c[1], c[2]); 4];
                        for (step, &axis) in perm.iter().enumerate() {
                            c[axis] += 1;
                            tet[step + 1] = index(c[0], c[1], c[2]);
                        }
                        if odd {
                            tet.swap(2, 3);
                        }
                        tets.push(tet);
                    }
                }
            }
        }
        let mut mesh = Self::assemble(nodes, tets, boundary)?;
        mesh.subdivisions = Some(n);
        Ok(mesh)
    }

    /// Unit-spaced cube `[0, 1]³`.
    pub fn unit_cube(n: usize) -> Result<Self, MeshError> {
        Self::build_box(n, [0.0; 3], [1.0; 3])
    }

    /// Mesh from explicit nodes and positively oriented tets. Boundary nodes
    /// are those on a face that belongs to exactly one tet.
    pub fn from_parts(nodes: Vec<Point>, tets: Vec<[usize; 4]>) -> Result<Self, MeshError> {
        for (t, tet) in tets.iter().enumerate() {
            if let Some(&node) = tet.iter().find(|&&v| v >= nodes.len()) {
                return Err(MeshError::NodeOutOfRange {
                    tet: t,
                    node,
                    num_nodes: nodes.len(),
                });
            }
        }
        let mut face_count: HashMap<[usize; 3], usize> = HashMap::new();
        for tet in &tets {
            for skip in 0..4 {
                let mut face = [0; 3];
                let mut f = 0;
                for (m, &v) in tet.iter().enumerate() {
                    if m != skip {
                        face[f] = v;
                        f += 1;
                    }
                }
                face.sort_unstable();
                *face_count.entry(face).or_insert(0) += 1;
            }
        }
        let mut boundary = vec![false; nodes.len()];
        for (face, count) in &face_count {
            if *count == 1 {
                for &v in face {
                    boundary[v] = true;
                }
            }
        }
        Self::assemble(nodes, tets, boundary)
    }

    fn assemble(nodes: Vec<Point>, tets: Vec<[usize; 4]>, boundary: Vec<bool>) -> Result<Self, MeshError> {
        let mut geometry = Vec::with_capacity(tets.len());
        let mut h: f64 = 0.0;
        for (t, tet) in tets.iter().enumerate() {
            let v = [nodes[tet[0]], nodes[tet[1]], nodes[tet[2]], nodes[tet[3]]];
            let g = TetGeometry::compute(&v, t)?;
            h = h.max(g.diameter);
            geometry.push(g);
        }

        let mut edges: Vec<(usize, usize)> = tets
            .iter()
            .flat_map(|tet| {
                LOCAL_EDGES.iter().map(move |&(a, b)| {
                    let (p, q) = (tet[a], tet[b]);
                    (p.min(q), p.max(q))
                })
            })
            .collect();
        edges.sort_unstable();
        edges.dedup();
        let tet_edges = tets
            .iter()
            .map(|tet| {
                let mut ids = [0; 6];
                for (e, &(a, b)) in LOCAL_EDGES.iter().enumerate() {
                    let key = (tet[a].min(tet[b]), tet[a].max(tet[b]));
                    ids[e] = edges.binary_search(&key).expect("edge collected above");
                }
                ids
            })
            .collect();

        Ok(Self {
            nodes,
            tets,
            edges,
            tet_edges,
            boundary,
            geometry,
            subdivisions: None,
            h,
        })
    }

    pub fn nodes(&self) -> &[Point] {
        &self.nodes
    }

    pub fn tets(&self) -> &[[usize; 4]] {
        &self.tets
    }

    /// Global edges `(k_ν, k_μ)` with `k_ν < k_μ`, sorted.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// Global edge index of each local edge of each tet.
    pub fn tet_edges(&self) -> &[[usize; 6]] {
        &self.tet_edges
    }

    pub fn boundary(&self) -> &[bool] {
        &self.boundary
    }

    pub fn is_boundary(&self, node: usize) -> bool {
        self.boundary[node]
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_tets(&self) -> usize {
        self.tets.len()
    }

    /// Subdivisions per axis for box meshes.
    pub fn subdivisions(&self) -> Option<usize> {
        self.subdivisions
    }

    /// Largest element diameter.
    pub fn h(&self) -> f64 {
        self.h
    }

    /// Cached geometry of tet `t`.
    pub fn geometry(&self, t: usize) -> &TetGeometry {
        &self.geometry[t]
    }

    pub fn geometries(&self) -> &[TetGeometry] {
        &self.geometry
    }

    pub fn tet_vertices(&self, t: usize) -> [Point; 4] {
        let tet = self.tets[t];
        [
            self.nodes[tet[0]],
            self.nodes[tet[1]],
            self.nodes[tet[2]],
            self.nodes[tet[3]],
        ]
    }

    pub fn total_volume(&self) -> f64 {
        self.geometry.iter().map(|g| g.volume).sum()
    }

    /// Plain-text dump: a `nodes <N> tets <M>` header, one `x y z` line per
    /// node, then one line of four zero-based indices per tet.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "nodes {} tets {}", self.nodes.len(), self.tets.len());
        for p in &self.nodes {
            let _ = writeln!(out, "{} {} {}", p[0], p[1], p[2]);
        }
        for t in &self.tets {
            let _ = writeln!(out, "{} {} {} {}", t[0], t[1], t[2], t[3]);
        }
        out
    }
}

/// Recomputes the geometry of tet `t` from the node coordinates.
pub fn tet_geometry(mesh: &TetMesh, t: usize) -> Result<TetGeometry, MeshError> {
    if t >= mesh.num_tets() {
        return Err(MeshError::TetOutOfRange {
            tet: t,
            num_tets: mesh.num_tets(),
        });
    }
    TetGeometry::compute(&mesh.tet_vertices(t), t)
}

/// A `(tet, local edge)` pair whose weight fails the strict positivity condition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OmegaViolation {
    pub tet: usize,
    pub local_edge: usize,
    pub global_edge: usize,
    pub omega: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeshQualityReport {
    /// Number of strictly positive weights per tet (0..=6).
    pub positive_per_tet: Vec<usize>,
    /// Fraction of all `(tet, edge)` weights that are strictly positive.
    pub positive_fraction: f64,
    /// Every weight of every tet is strictly positive.
    pub all_positive: bool,
    /// Every weight is nonnegative.
    pub all_nonnegative: bool,
    /// Every tet has at least one strictly positive weight.
    pub each_tet_has_positive: bool,
    /// Weights that are not strictly positive.
    pub violations: Vec<OmegaViolation>,
}

impl MeshQualityReport {
    /// The weaker condition under which EAFE off-diagonals are nonpositive:
    /// all weights ≥ 0 and each element keeps at least one positive weight.
    pub fn nonobtuse(&self) -> bool {
        self.all_nonnegative && self.each_tet_has_positive
    }

    pub fn negative_count(&self) -> usize {
        self.violations.iter().filter(|v| v.omega < 0.0).count()
    }
}

/// Tabulates the sign of every edge weight. Weights with magnitude below
/// `1e-14 · volume / diameter²` are treated as exactly zero.
pub fn mesh_quality_report(mesh: &TetMesh) -> MeshQualityReport {
    let mut positive_per_tet = Vec::with_capacity(mesh.num_tets());
    let mut violations = Vec::new();
    let mut all_nonnegative = true;
    for (t, g) in mesh.geometries().iter().enumerate() {
        let zero = 1e-14 * g.volume / (g.diameter * g.diameter);
        let mut count = 0;
        for (e, &w) in g.omega.iter().enumerate() {
            if w > zero {
                count += 1;
            } else {
                let omega = if w.abs() <= zero { 0.0 } else { w };
                if omega < 0.0 {
                    all_nonnegative = false;
                }
                violations.push(OmegaViolation {
                    tet: t,
                    local_edge: e,
                    global_edge: mesh.tet_edges()[t][e],
                    omega,
                });
            }
        }
        positive_per_tet.push(count);
    }
    let total = 6 * mesh.num_tets();
    let positive: usize = positive_per_tet.iter().sum();
    MeshQualityReport {
        each_tet_has_positive: positive_per_tet.iter().all(|&c| c > 0),
        positive_fraction: positive as f64 / total as f64,
        all_positive: violations.is_empty(),
        all_nonnegative,
        positive_per_tet,
        violations,
    }
}

pub(crate) fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub(crate) fn dot(a: Point, b: Point) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub(crate) fn cross(a: Point, b: Point) -> Point {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub(crate) fn norm(a: Point) -> f64 {
    dot(a, a).sqrt()
}

fn scale_vec(a: Point, s: f64) -> Point {
    [a[0] * s, a[1] * s, a[2] * s]
}
