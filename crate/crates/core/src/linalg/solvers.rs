use super::{dense_solve, dot, CsrMatrix, LinalgError};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Relative residual target `‖D⁻¹(b − Ax)‖₂ ≤ tol · ‖D⁻¹b‖₂` with `D` the
    /// diagonal of `A`, so rows of very different scale (identity Dirichlet
    /// rows next to mass-scaled rows) are weighed alike.
    pub tol: f64,
    pub max_iter: usize,
    /// Systems up to this size fall back to dense elimination when the
    /// Krylov iteration fails.
    pub dense_fallback_limit: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 5000,
            dense_fallback_limit: 2000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveStats {
    pub method: &'static str,
    pub iterations: usize,
    pub relative_residual: f64,
}

fn check_dims(a: &CsrMatrix, b: &[f64], guess: Option<&[f64]>) -> Result<(), LinalgError> {
    if !a.is_square() {
        return Err(LinalgError::NotSquare {
            rows: a.nrows(),
            cols: a.ncols(),
        });
    }
    for len in std::iter::once(b.len()).chain(guess.map(<[f64]>::len)) {
        if len != a.nrows() {
            return Err(LinalgError::DimensionMismatch {
                expected: a.nrows(),
                found: len,
            });
        }
    }
    Ok(())
}

fn inverse_diagonal(a: &CsrMatrix) -> Vec<f64> {
    a.diagonal()
        .into_iter()
        .map(|d| if d != 0.0 { 1.0 / d } else { 1.0 })
        .collect()
}

fn scaled_norm(v: &[f64], dinv: &[f64]) -> f64 {
    v.iter().zip(dinv).map(|(x, d)| (x * d) * (x * d)).sum::<f64>().sqrt()
}

fn residual(a: &CsrMatrix, x: &[f64], b: &[f64], r: &mut [f64]) {
    a.spmv_into(x, r);
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
}

/// Jacobi-preconditioned conjugate gradients for symmetric positive definite
/// systems.
pub fn solve_spd(
    a: &CsrMatrix,
    b: &[f64],
    guess: Option<&[f64]>,
    opts: &SolverOptions,
) -> Result<(Vec<f64>, SolveStats), LinalgError> {
    check_dims(a, b, guess)?;
    let n = b.len();
    let dinv = inverse_diagonal(a);
    let bnorm = scaled_norm(b, &dinv);
    if bnorm == 0.0 {
        return Ok((
            vec![0.0; n],
            SolveStats {
                method: "cg",
                iterations: 0,
                relative_residual: 0.0,
            },
        ));
    }
    let target = opts.tol * bnorm;
    let mut x = guess.map_or_else(|| vec![0.0; n], <[f64]>::to_vec);
    let mut r = vec![0.0; n];
    residual(a, &x, b, &mut r);
    let mut rnorm = scaled_norm(&r, &dinv);
    if rnorm <= target {
        return Ok((
            x,
            SolveStats {
                method: "cg",
                iterations: 0,
                relative_residual: rnorm / bnorm,
            },
        ));
    }
    let mut z: Vec<f64> = r.iter().zip(&dinv).map(|(ri, di)| ri * di).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = dot(&r, &z);
    for it in 1..=opts.max_iter {
        a.spmv_into(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 || !pap.is_finite() {
            return Err(LinalgError::Breakdown {
                method: "cg",
                iteration: it,
            });
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        rnorm = scaled_norm(&r, &dinv);
        if rnorm <= target {
            // Confirm against the true residual before accepting.
            residual(a, &x, b, &mut r);
            rnorm = scaled_norm(&r, &dinv);
            if rnorm <= target {
                return Ok((
                    x,
                    SolveStats {
                        method: "cg",
                        iterations: it,
                        relative_residual: rnorm / bnorm,
                    },
                ));
            }
        }
        for i in 0..n {
            z[i] = r[i] * dinv[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(LinalgError::NotConverged {
        method: "cg",
        iterations: opts.max_iter,
        residual: rnorm / bnorm,
    })
}

/// Jacobi-preconditioned BiCGSTAB for general nonsymmetric systems, with a
/// dense elimination fallback for small systems.
pub fn solve_general(
    a: &CsrMatrix,
    b: &[f64],
    guess: Option<&[f64]>,
    opts: &SolverOptions,
) -> Result<(Vec<f64>, SolveStats), LinalgError> {
    check_dims(a, b, guess)?;
    match bicgstab(a, b, guess, opts) {
        Ok(out) => Ok(out),
        Err(err) if a.nrows() <= opts.dense_fallback_limit => {
            let x = dense_solve(a, b)?;
            let mut r = vec![0.0; b.len()];
            residual(a, &x, b, &mut r);
            let dinv = inverse_diagonal(a);
            let bnorm = scaled_norm(b, &dinv);
            let rnorm = scaled_norm(&r, &dinv);
            let rel = if bnorm > 0.0 { rnorm / bnorm } else { rnorm };
            if rel <= opts.tol || bnorm == 0.0 {
                Ok((
                    x,
                    SolveStats {
                        method: "dense",
                        iterations: 1,
                        relative_residual: rel,
                    },
                ))
            } else {
                Err(err)
            }
        }
        Err(err) => Err(err),
    }
}

fn bicgstab(
    a: &CsrMatrix,
    b: &[f64],
    guess: Option<&[f64]>,
    opts: &SolverOptions,
) -> Result<(Vec<f64>, SolveStats), LinalgError> {
    let n = b.len();
    let dinv = inverse_diagonal(a);
    let bnorm = scaled_norm(b, &dinv);
    if bnorm == 0.0 {
        return Ok((
            vec![0.0; n],
            SolveStats {
                method: "bicgstab",
                iterations: 0,
                relative_residual: 0.0,
            },
        ));
    }
    let target = opts.tol * bnorm;
    let mut x = guess.map_or_else(|| vec![0.0; n], <[f64]>::to_vec);
    let mut r = vec![0.0; n];
    residual(a, &x, b, &mut r);
    let mut rnorm = scaled_norm(&r, &dinv);
    let done = |it, rnorm: f64, x| {
        Ok((
            x,
            SolveStats {
                method: "bicgstab",
                iterations: it,
                relative_residual: rnorm / bnorm,
            },
        ))
    };
    if rnorm <= target {
        return done(0, rnorm, x);
    }
    let r_hat = r.clone();
    let mut rho = 1.0;
    let mut alpha = 1.0;
    let mut omega = 1.0;
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut p_hat = vec![0.0; n];
    let mut s = vec![0.0; n];
    let mut s_hat = vec![0.0; n];
    let mut t = vec![0.0; n];
    for it in 1..=opts.max_iter {
        let rho_new = dot(&r_hat, &r);
        if rho_new == 0.0 || !rho_new.is_finite() {
            return Err(LinalgError::Breakdown {
                method: "bicgstab",
                iteration: it,
            });
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
            p_hat[i] = p[i] * dinv[i];
        }
        a.spmv_into(&p_hat, &mut v);
        let rv = dot(&r_hat, &v);
        if rv == 0.0 {
            return Err(LinalgError::Breakdown {
                method: "bicgstab",
                iteration: it,
            });
        }
        alpha = rho / rv;
        for i in 0..n {
            s[i] = r[i] - alpha * v[i];
        }
        if scaled_norm(&s, &dinv) <= target {
            for i in 0..n {
                x[i] += alpha * p_hat[i];
            }
            residual(a, &x, b, &mut r);
            rnorm = scaled_norm(&r, &dinv);
            if rnorm <= target {
                return done(it, rnorm, x);
            }
            continue;
        }
        for i in 0..n {
            s_hat[i] = s[i] * dinv[i];
        }
        a.spmv_into(&s_hat, &mut t);
        let tt = dot(&t, &t);
        if tt == 0.0 {
            return Err(LinalgError::Breakdown {
                method: "bicgstab",
                iteration: it,
            });
        }
        omega = dot(&t, &s) / tt;
        for i in 0..n {
            x[i] += alpha * p_hat[i] + omega * s_hat[i];
            r[i] = s[i] - omega * t[i];
        }
        rnorm = scaled_norm(&r, &dinv);
        if rnorm <= target {
            residual(a, &x, b, &mut r);
            rnorm = scaled_norm(&r, &dinv);
            if rnorm <= target {
                return done(it, rnorm, x);
            }
        }
        if omega == 0.0 {
            return Err(LinalgError::Breakdown {
                method: "bicgstab",
                iteration: it,
            });
        }
    }
    Err(LinalgError::NotConverged {
        method: "bicgstab",
        iterations: opts.max_iter,
        residual: rnorm / bnorm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tridiag(n: usize) -> CsrMatrix {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i > 0 {
                t.push((i, i - 1, -1.0));
            }
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
            }
        }
        CsrMatrix::from_triplets(n, n, &t).unwrap()
    }

    #[test]
    fn identity_in_one_iteration() {
        let b = vec![1.0, -3.0, 0.5];
        let (x, stats) = solve_spd(&CsrMatrix::identity(3), &b, None, &SolverOptions::default()).unwrap();
        assert_eq!(x, b);
        assert!(stats.iterations <= 1);
    }

    #[test]
    fn laplacian_3x3() {
        let (x, _) = solve_spd(&tridiag(3), &[1.0; 3], None, &SolverOptions::default()).unwrap();
        for (xi, ei) in x.iter().zip([1.5, 2.0, 1.5]) {
            assert!((xi - ei).abs() < 1e-12);
        }
    }

    #[test]
    fn general_examples() {
        let d = CsrMatrix::from_diagonal(&[2.0, 4.0, 8.0]);
        let (x, _) = solve_general(&d, &[1.0, 1.0, 1.0], None, &SolverOptions::default()).unwrap();
        assert_eq!(x, vec![0.5, 0.25, 0.125]);
        let (x, _) = solve_general(&tridiag(2), &[1.0, 0.0], None, &SolverOptions::default()).unwrap();
        assert!((x[0] - 2.0 / 3.0).abs() < 1e-12 && (x[1] - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn nonconvergence_carries_residual() {
        let opts = SolverOptions {
            tol: 1e-14,
            max_iter: 2,
            dense_fallback_limit: 0,
        };
        match solve_spd(&tridiag(50), &[1.0; 50], None, &opts) {
            Err(LinalgError::NotConverged {
                residual, iterations, ..
            }) => {
                assert_eq!(iterations, 2);
                assert!(residual > 1e-14);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn dense_fallback_rescues_small_systems() {
        let opts = SolverOptions {
            tol: 1e-12,
            max_iter: 1,
            dense_fallback_limit: 100,
        };
        let (x, stats) = solve_general(&tridiag(40), &[1.0; 40], None, &opts).unwrap();
        assert_eq!(stats.method, "dense");
        let r = tridiag(40).spmv(&x).unwrap();
        assert!(r.iter().all(|v| (v - 1.0).abs() < 1e-10));
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let (x, _) = solve_general(&tridiag(4), &[0.0; 4], None, &SolverOptions::default()).unwrap();
        assert_eq!(x, vec![0.0; 4]);
    }
}
