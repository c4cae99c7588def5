//! Brute-force reference implementations shared by the oracle and
//! acceptance suites.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn random_matrix(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Vec<Vec<f64>> {
    (0..n).map(|_| (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect()
}

/// Cyclic Jacobi rotations on a symmetric matrix; returns (eigenvalues,
/// eigenvectors as columns).
pub fn jacobi_eigen(mut a: Vec<Vec<f64>>) -> (Vec<f64>, Vec<Vec<f64>>) {
    let d = a.len();
    let mut v: Vec<Vec<f64>> = (0..d).map(|i| (0..d).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
    for _sweep in 0..100 {
        let off: f64 = (0..d).flat_map(|i| (0..d).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| a[i][j] * a[i][j]).sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..d {
            for q in p + 1..d {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..d {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..d {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let (vp, vq) = (row[p], row[q]);
                    row[p] = c * vp - s * vq;
                    row[q] = s * vp + c * vq;
                }
            }
        }
    }
    ((0..d).map(|i| a[i][i]).collect(), v)
}

pub fn covariance(x: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let (n, d) = (x.len(), x[0].len());
    let mean: Vec<f64> = (0..d).map(|j| x.iter().map(|r| r[j]).sum::<f64>() / n as f64).collect();
    (0..d)
        .map(|i| (0..d).map(|j| x.iter().map(|r| (r[i] - mean[i]) * (r[j] - mean[j])).sum::<f64>() / (n - 1) as f64).collect())
        .collect()
}

/// Normal equations solved by Gaussian elimination with partial pivoting.
pub fn normal_equation_oracle(x: &[Vec<f64>], y: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let d = x[0].len();
    let mut aug: Vec<Vec<f64>> = (0..d)
        .map(|i| {
            let mut row: Vec<f64> = (0..d).map(|j| x.iter().map(|r| r[i] * r[j]).sum()).collect();
            row.extend((0..d).map(|j| x.iter().zip(y).map(|(r, s)| r[i] * s[j]).sum::<f64>()));
            row
        })
        .collect();
    for col in 0..d {
        let piv = (col..d).max_by(|&a, &b| aug[a][col].abs().total_cmp(&aug[b][col].abs())).unwrap();
        aug.swap(col, piv);
        for r in 0..d {
            if r != col {
                let f = aug[r][col] / aug[col][col];
                for c in 0..2 * d {
                    aug[r][c] -= f * aug[col][c];
                }
            }
        }
    }
    // solution column j of M^T is in aug[.][d + j] / pivot; M[j][i] = M^T[i][j]
    (0..d).map(|j| (0..d).map(|i| aug[i][d + j] / aug[i][i]).collect()).collect()
}
