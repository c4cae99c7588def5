//! Leading eigenpairs of a symmetric matrix through Householder
//! tridiagonalization, implicit QL and inverse iteration.

use nalgebra::linalg::SymmetricTridiagonal;
use nalgebra::{DMatrix, DVector};

const INVERSE_STEPS: usize = 4;
const MAX_QL_SWEEPS: usize = 60;
/// Relative eigenvalue distance below which vectors are kept orthogonal
/// explicitly.
const CLUSTER: f64 = 1e-3;

pub(crate) struct Tridiagonal {
    q: DMatrix<f64>,
    diag: Vec<f64>,
    off: Vec<f64>,
    norm: f64,
}

impl Tridiagonal {
    pub(crate) fn new(a: DMatrix<f64>) -> Self {
        let (q, diag, off) = SymmetricTridiagonal::new(a).unpack();
        let diag: Vec<f64> = diag.iter().copied().collect();
        let off: Vec<f64> = off.iter().copied().collect();
        let norm = (0..diag.len())
            .map(|i| {
                let left = if i > 0 { off[i - 1].abs() } else { 0.0 };
                let right = off.get(i).map_or(0.0, |v| v.abs());
                diag[i].abs() + left + right
            })
            .fold(0.0, f64::max);
        Tridiagonal { q, diag, off, norm }
    }

    /// All eigenvalues, descending, by implicit QL iteration.
    pub(crate) fn eigenvalues(&self) -> Vec<f64> {
        let n = self.diag.len();
        let mut d = self.diag.clone();
        let mut e = self.off.clone();
        e.push(0.0);
        for l in 0..n {
            for _ in 0..MAX_QL_SWEEPS {
                let mut m = l;
                while m + 1 < n {
                    let dd = d[m].abs() + d[m + 1].abs();
                    if e[m].abs() <= f64::EPSILON * dd {
                        break;
                    }
                    m += 1;
                }
                if m == l {
                    break;
                }
                let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
                let r = g.hypot(1.0);
                g = d[m] - d[l] + e[l] / (g + r.copysign(g));
                let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
                let mut deflated = false;
                for i in (l..m).rev() {
                    let f = s * e[i];
                    let b = c * e[i];
                    let r = f.hypot(g);
                    e[i + 1] = r;
                    if r == 0.0 {
                        d[i + 1] -= p;
                        e[m] = 0.0;
                        deflated = true;
                        break;
                    }
                    s = f / r;
                    c = g / r;
                    g = d[i + 1] - p;
                    let r = (d[i] - g) * s + 2.0 * c * b;
                    p = s * r;
                    d[i + 1] = g + p;
                    g = c * r - b;
                }
                if !deflated {
                    d[l] -= p;
                    e[l] = g;
                    e[m] = 0.0;
                }
            }
        }
        d.sort_by(|a, b| b.total_cmp(a));
        d
    }

    /// Solve `(T - sigma I) y = x` in place by Gaussian elimination with
    /// partial pivoting; tiny pivots are replaced so the solve never fails.
    fn shifted_solve(&self, sigma: f64, x: &mut [f64]) {
        let n = self.diag.len();
        let tiny = f64::EPSILON * self.norm.max(f64::MIN_POSITIVE);
        let mut u0: Vec<f64> = self.diag.iter().map(|d| d - sigma).collect();
        let mut u1 = self.off.clone();
        let mut u2 = vec![0.0; n.saturating_sub(2)];
        for i in 0..n.saturating_sub(1) {
            let sub = self.off[i];
            if u0[i].abs() >= sub.abs() {
                if u0[i].abs() < tiny {
                    u0[i] = if u0[i] < 0.0 { -tiny } else { tiny };
                }
                let mult = sub / u0[i];
                u0[i + 1] -= mult * u1[i];
                x[i + 1] -= mult * x[i];
            } else {
                let mult = u0[i] / sub;
                let next_diag = u0[i + 1];
                u0[i] = sub;
                u0[i + 1] = u1[i] - mult * next_diag;
                u1[i] = next_diag;
                if i + 2 < n {
                    u2[i] = u1[i + 1];
                    u1[i + 1] *= -mult;
                }
                x.swap(i, i + 1);
                x[i + 1] -= mult * x[i];
            }
        }
        if u0[n - 1].abs() < tiny {
            u0[n - 1] = if u0[n - 1] < 0.0 { -tiny } else { tiny };
        }
        for i in (0..n).rev() {
            let mut v = x[i];
            if i + 1 < n {
                v -= u1[i] * x[i + 1];
            }
            if i + 2 < n {
                v -= u2[i] * x[i + 2];
            }
            x[i] = v / u0[i];
        }
    }

    /// Eigenvectors of the original matrix for `values` (descending, taken
    /// from [`Tridiagonal::eigenvalues`]).
    pub(crate) fn eigenvectors(&self, values: &[f64]) -> Vec<Vec<f64>> {
        let n = self.diag.len();
        let gap = CLUSTER * self.norm;
        let nudge = 10.0 * f64::EPSILON * self.norm.max(f64::MIN_POSITIVE);
        let mut found: Vec<Vec<f64>> = Vec::with_capacity(values.len());
        let mut prev_sigma = f64::INFINITY;
        for (j, &lambda) in values.iter().enumerate() {
            // shifts of equal eigenvalues must differ
            let sigma = if prev_sigma - lambda < nudge { prev_sigma - nudge } else { lambda };
            prev_sigma = sigma;
            let cluster_start = (0..j).rev().take_while(|&i| values[i] - lambda <= gap).last().unwrap_or(j);
            let mut state = 0x9e37_79b9_7f4a_7c15u64 ^ (j as u64).wrapping_mul(0xbf58_476d_1ce4_e5b9);
            let mut y: Vec<f64> = (0..n)
                .map(|_| {
                    state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                    ((state >> 11) as f64 / (1u64 << 53) as f64) - 0.5
                })
                .collect();
            for _ in 0..INVERSE_STEPS {
                self.shifted_solve(sigma, &mut y);
                for prev in &found[cluster_start..j] {
                    let dot: f64 = prev.iter().zip(&y).map(|(a, b)| a * b).sum();
                    y.iter_mut().zip(prev).for_each(|(v, p)| *v -= dot * p);
                }
                let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
                if !(norm > 0.0) || !norm.is_finite() {
                    y = (0..n).map(|i| if i == j % n { 1.0 } else { 0.0 }).collect();
                    continue;
                }
                y.iter_mut().for_each(|v| *v /= norm);
            }
            found.push(y);
        }
        found
            .into_iter()
            .map(|u| (&self.q * DVector::from_vec(u)).iter().copied().collect())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::SymmetricEigen;
    use rand::Rng;

    fn covariance_like(n: usize, d: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = crate::seeding::rng(seed);
        let signal = DMatrix::from_fn(5, d, |_, _| rng.gen_range(-1.0..1.0));
        let x = DMatrix::from_fn(n, 5, |_, c| rng.gen_range(-1.0..1.0) * (5 - c) as f64) * signal
            + DMatrix::from_fn(n, d, |_, _| rng.gen_range(-0.1..0.1));
        x.transpose() * x / (n - 1) as f64
    }

    #[test]
    fn matches_dense_solver() {
        for (n, d, seed) in [(120, 60, 1), (300, 150, 2), (40, 80, 3)] {
            let a = covariance_like(n, d, seed);
            let full = SymmetricEigen::new(a.clone());
            let mut expect: Vec<(f64, Vec<f64>)> = (0..d)
                .map(|i| (full.eigenvalues[i], full.eigenvectors.column(i).iter().copied().collect()))
                .collect();
            expect.sort_by(|x, y| y.0.total_cmp(&x.0));
            let t = Tridiagonal::new(a.clone());
            let values = t.eigenvalues();
            for (v, (e, _)) in values.iter().zip(&expect) {
                assert!((v - e).abs() < 1e-10 * t.norm, "{v} vs {e}");
            }
            let vectors = t.eigenvectors(&values[..8]);
            for (i, v) in vectors.iter().enumerate() {
                let dot: f64 = v.iter().zip(&expect[i].1).map(|(a, b)| a * b).sum();
                assert!((dot.abs() - 1.0).abs() < 1e-9, "vector {i}: |dot| {dot}");
                let av = &a * DVector::from_column_slice(v);
                let resid = av.iter().zip(v).map(|(p, q)| (p - values[i] * q).powi(2)).sum::<f64>().sqrt();
                assert!(resid < 1e-10 * t.norm);
            }
        }
    }

    #[test]
    fn repeated_eigenvalues_get_orthonormal_vectors() {
        let d = 40;
        let mut a = DMatrix::<f64>::identity(d, d) * 2.0;
        a[(0, 0)] = 5.0;
        let t = Tridiagonal::new(a);
        let values = t.eigenvalues();
        assert!((values[0] - 5.0).abs() < 1e-12 && values[1..].iter().all(|v| (v - 2.0).abs() < 1e-12));
        let vectors = t.eigenvectors(&values[..6]);
        assert!(vectors[0][0].abs() > 1.0 - 1e-12);
        for i in 0..6 {
            for j in 0..6 {
                let dot: f64 = vectors[i].iter().zip(&vectors[j]).map(|(a, b)| a * b).sum();
                assert!((dot - f64::from(u8::from(i == j))).abs() < 1e-10, "{i},{j}: {dot}");
            }
        }
    }
}
