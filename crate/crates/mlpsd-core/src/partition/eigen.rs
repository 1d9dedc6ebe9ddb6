//! Dense symmetric eigendecomposition via cyclic Jacobi rotations.
//!
//! Deterministic and accurate for the matrix sizes this crate sees (the
//! category count, at most a few hundred). Eigenvalues come back ascending
//! with their eigenvectors as the columns of the second return value.

use alloc::vec::Vec;

use ndarray::Array2;

const MAX_SWEEPS: usize = 100;

pub(crate) fn symmetric_eigen(a: &Array2<f64>) -> (Vec<f64>, Array2<f64>) {
    let n = a.nrows();
    let mut d = a.clone();
    let mut v = Array2::<f64>::eye(n);
    if n <= 1 {
        return ((0..n).map(|i| d[[i, i]]).collect(), v);
    }

    let scale = a.iter().fold(1.0f64, |acc, x| acc.max(libm::fabs(*x)));
    let tol = 1e-14 * scale;

    for _ in 0..MAX_SWEEPS {
        let mut max_off = 0.0f64;
        for p in 0..n - 1 {
            for q in p + 1..n {
                max_off = max_off.max(libm::fabs(d[[p, q]]));
            }
        }
        if max_off <= tol {
            break;
        }

        for p in 0..n - 1 {
            for q in p + 1..n {
                let apq = d[[p, q]];
                if libm::fabs(apq) <= tol {
                    continue;
                }
                let app = d[[p, p]];
                let aqq = d[[q, q]];
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta >= 0.0 {
                    1.0 / (theta + libm::sqrt(1.0 + theta * theta))
                } else {
                    -1.0 / (-theta + libm::sqrt(1.0 + theta * theta))
                };
                let c = 1.0 / libm::sqrt(1.0 + t * t);
                let s = t * c;

                for i in 0..n {
                    if i != p && i != q {
                        let dip = d[[i, p]];
                        let diq = d[[i, q]];
                        d[[i, p]] = c * dip - s * diq;
                        d[[p, i]] = d[[i, p]];
                        d[[i, q]] = s * dip + c * diq;
                        d[[q, i]] = d[[i, q]];
                    }
                }
                d[[p, p]] = c * c * app - 2.0 * s * c * apq + s * s * aqq;
                d[[q, q]] = s * s * app + 2.0 * s * c * apq + c * c * aqq;
                d[[p, q]] = 0.0;
                d[[q, p]] = 0.0;

                for i in 0..n {
                    let vip = v[[i, p]];
                    let viq = v[[i, q]];
                    v[[i, p]] = c * vip - s * viq;
                    v[[i, q]] = s * vip + c * viq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| d[[i, i]].total_cmp(&d[[j, j]]));

    let values = order.iter().map(|&i| d[[i, i]]).collect();
    let mut vectors = Array2::<f64>::zeros((n, n));
    for (out, &src) in order.iter().enumerate() {
        for i in 0..n {
            vectors[[i, out]] = v[[i, src]];
        }
    }
    (values, vectors)
}
