use ndarray::Array2;

use crate::{Error, Result};

/// Eigen-decomposition of a symmetric matrix, eigenvalues ascending and
/// eigenvectors stored as the matching columns.
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    pub values: Vec<f64>,
    pub vectors: Array2<f64>,
}

const MAX_SWEEPS: usize = 100;

fn off_diagonal_norm(a: &Array2<f64>) -> f64 {
    let n = a.nrows();
    let mut s = 0.0;
    for p in 0..n {
        for q in 0..n {
            if p != q {
                s += a[[p, q]] * a[[p, q]];
            }
        }
    }
    s.sqrt()
}

/// Cyclic Jacobi rotations until the off-diagonal Frobenius norm falls below
/// `tol` times `max(1, ‖A‖_F)`.
pub fn symmetric_eigen(matrix: &Array2<f64>, tol: f64) -> Result<SymmetricEigen> {
    let n = matrix.nrows();
    if n != matrix.ncols() {
        return Err(Error::invalid(format!("eigen-solve needs a square matrix, got {:?}", matrix.shape())));
    }
    if matrix.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numeric {
            term: "eigen-solver input".into(),
        });
    }
    let mut a = matrix.clone();
    // Symmetrize away any rounding asymmetry in the caller's input.
    for p in 0..n {
        for q in p + 1..n {
            let m = 0.5 * (a[[p, q]] + a[[q, p]]);
            a[[p, q]] = m;
            a[[q, p]] = m;
        }
    }
    let scale = a.iter().map(|x| x * x).sum::<f64>().sqrt().max(1.0);
    let mut v = Array2::<f64>::eye(n);
    let mut converged = off_diagonal_norm(&a) <= tol * scale;
    let mut sweeps = 0;
    while !converged && sweeps < MAX_SWEEPS {
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[[p, q]];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[[q, q]] - a[[p, p]]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[[k, p]], a[[k, q]]);
                    a[[k, p]] = c * akp - s * akq;
                    a[[k, q]] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[[p, k]], a[[q, k]]);
                    a[[p, k]] = c * apk - s * aqk;
                    a[[q, k]] = s * apk + c * aqk;
                }
                a[[p, q]] = 0.0;
                a[[q, p]] = 0.0;
                for k in 0..n {
                    let (vkp, vkq) = (v[[k, p]], v[[k, q]]);
                    v[[k, p]] = c * vkp - s * vkq;
                    v[[k, q]] = s * vkp + c * vkq;
                }
            }
        }
        sweeps += 1;
        converged = off_diagonal_norm(&a) <= tol * scale;
    }
    if !converged {
        return Err(Error::Numeric {
            term: format!("Jacobi eigen-solver (no convergence after {MAX_SWEEPS} sweeps)"),
        });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[[i, i]].total_cmp(&a[[j, j]]).then(i.cmp(&j)));
    let values = order.iter().map(|&i| a[[i, i]]).collect();
    let vectors = Array2::from_shape_fn((n, n), |(r, c)| v[[r, order[c]]]);
    Ok(SymmetricEigen { values, vectors })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_symmetric(n: usize, seed: u64) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = Array2::from_shape_fn((n, n), |_| rng.random_range(-1.0..1.0));
        &m + &m.t()
    }

    #[test]
    fn diagonal_is_sorted() {
        let a = Array2::from_diag(&ndarray::arr1(&[3.0, -1.0, 2.0]));
        let e = symmetric_eigen(&a, 1e-12).unwrap();
        assert_eq!(e.values, vec![-1.0, 2.0, 3.0]);
        assert_eq!(e.vectors[[1, 0]].abs(), 1.0);
    }

    #[test]
    fn residuals_and_orthonormality() {
        for seed in 0..5 {
            let a = random_symmetric(12, seed);
            let e = symmetric_eigen(&a, 1e-12).unwrap();
            for (k, &lam) in e.values.iter().enumerate() {
                let u = e.vectors.column(k);
                let r = a.dot(&u) - &u * lam;
                assert!(r.dot(&r).sqrt() < 1e-9);
            }
            let gram = e.vectors.t().dot(&e.vectors);
            let eye = Array2::<f64>::eye(12);
            assert!((&gram - &eye).iter().all(|x| x.abs() < 1e-10));
            assert!(e.values.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn rejects_non_square() {
        assert!(symmetric_eigen(&Array2::zeros((2, 3)), 1e-10).is_err());
    }
}
