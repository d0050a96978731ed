mod oracle;

use oracle::{jittered_box, max_abs_diff, to_dense, Oracle};
use pnp_core::assembly::{Assembler, NpInputs};
use pnp_core::mesh::TetMesh;
use pnp_core::quadrature::{gauss_legendre_unit, TetRule};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn small_meshes() -> Vec<TetMesh> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    vec![
        TetMesh::unit_cube(1).unwrap(),
        TetMesh::build_box(2, [-0.5; 3], [0.5; 3]).unwrap(),
        TetMesh::build_box(2, [0.0; 3], [2.0, 1.0, 0.5]).unwrap(),
        jittered_box(2, 0.2, &mut rng),
    ]
}

fn random_potential(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect()
}

#[test]
fn gauss_rules_agree_with_eigenvalue_construction() {
    for m in [1, 2, 5, 9] {
        let (x, w) = gauss_legendre_unit(m);
        let (xo, wo) = oracle::gauss_legendre(m);
        for i in 0..m {
            assert!((x[i] - xo[i]).abs() < 1e-13, "m={m}");
            assert!((w[i] - wo[i]).abs() < 1e-13, "m={m}");
        }
    }
}

#[test]
fn tet_rules_integrate_polynomials_like_the_oracle() {
    let reference = oracle::tet_rule(7);
    for degree in [2, 4, 6] {
        let rule = TetRule::with_degree(degree);
        // x^a y^b z^c with a + b + c = degree, in barycentric form.
        for a in 0..=degree {
            for b in 0..=degree - a {
                let c = degree - a - b;
                let f = |l: &[f64; 4]| l[1].powi(a as i32) * l[2].powi(b as i32) * l[3].powi(c as i32);
                let ours: f64 = rule.points.iter().zip(&rule.weights).map(|(l, w)| w * f(l)).sum();
                let theirs: f64 = reference.iter().map(|(l, w)| w * f(l)).sum();
                assert!((ours - theirs).abs() < 1e-14, "{a} {b} {c}");
            }
        }
    }
}

#[test]
fn stiffness_and_mass_match_oracle() {
    for mesh in small_meshes() {
        let asm = Assembler::new(&mesh);
        let o = Oracle::new(&mesh);
        assert!(max_abs_diff(&to_dense(&asm.stiffness()), &o.stiffness()) < 1e-12);
        assert!(max_abs_diff(&to_dense(&asm.lumped_mass()), &o.lumped_mass()) < 1e-14);
    }
}

#[test]
fn scheme_operators_match_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for mesh in small_meshes() {
        let asm = Assembler::new(&mesh);
        let o = Oracle::new(&mesh);
        for _ in 0..5 {
            let phi = random_potential(mesh.num_nodes(), &mut rng);
            let c = rng.gen_range(-1.5..1.5);
            let fem = asm.fem_operator(&phi, c).unwrap();
            assert!(max_abs_diff(&to_dense(&fem), &o.fem_operator(&phi, c)) < 1e-11);
            let eafe = asm.eafe_operator(&phi, c).unwrap();
            assert!(max_abs_diff(&to_dense(&eafe), &o.eafe_operator(&phi, c)) < 1e-11);
        }
    }
}

#[test]
fn supg_system_matches_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for mesh in small_meshes() {
        let asm = Assembler::new(&mesh);
        let o = Oracle::new(&mesh);
        for _ in 0..5 {
            let phi = random_potential(mesh.num_nodes(), &mut rng);
            let prev: Vec<f64> = (0..mesh.num_nodes()).map(|_| rng.gen_range(0.0..3.0)).collect();
            let c = rng.gen_range(-1.5..1.5);
            let tau = rng.gen_range(0.01..0.5);
            let inputs = NpInputs {
                phi: &phi,
                drift: c,
                tau,
                species: 0,
                source_per_tet: None,
                previous: Some(&prev),
            };
            let sys = asm.np_supg(&inputs, 1.0, false).unwrap();
            let (a, rhs) = o.supg_system(&phi, c, tau, 1.0, &prev);
            assert!(max_abs_diff(&to_dense(&sys.matrix), &a) < 1e-11);
            for (x, y) in sys.rhs.iter().zip(&rhs) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn load_vector_matches_oracle_for_polynomials() {
    // Quadratic integrand times a linear basis function: degree 3, so use
    // the production rule exact to degree 4.
    let f = |x: [f64; 3]| 1.0 + x[0] * x[1] - 2.0 * x[2] * x[2];
    for mesh in small_meshes() {
        let ours = Assembler::new(&mesh).load(|x, _| f(x), 0.0, 4);
        let theirs = Oracle::new(&mesh).load(f);
        for (a, b) in ours.iter().zip(&theirs) {
            assert!((a - b).abs() < 1e-14);
        }
    }
}
