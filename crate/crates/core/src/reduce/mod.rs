//! Layer 2: PCA with variance-retention selection and block fusion.

mod eigen;

use std::io::{Read, Write};

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::binfmt::FloatRecord;
use eigen::Tridiagonal;
use crate::error::{Error, Result};
use crate::represent::Representation;

const PCA_KIND: &[u8; 4] = b"PCA\0";
const ZERO_VARIANCE: f64 = 1e-12;
/// Below this dimension, or when more than a quarter of the components are
/// kept, PCA uses the dense eigensolver.
const DENSE_MAX_DIMS: usize = 32;

/// Fitted principal component model.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaModel {
    mean: Vec<f64>,
    /// `k` rows of length `d`.
    basis: Vec<Vec<f64>>,
    /// All `d` eigenvalues of the sample covariance, descending.
    eigenvalues: Vec<f64>,
    retention: f64,
}

fn check_matrix(rows: &[Vec<f64>]) -> Result<usize> {
    let d = rows.first().map_or(0, Vec::len);
    if d == 0 {
        return Err(Error::input("feature matrix has no columns"));
    }
    if rows.iter().any(|r| r.len() != d) {
        return Err(Error::input("feature matrix rows have different lengths"));
    }
    if rows.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::input("feature matrix contains non-finite values"));
    }
    Ok(d)
}

/// Smallest `k` whose leading eigenvalues hold at least `retention` of the
/// total variance.
fn components_for(eigenvalues: &[f64], retention: f64) -> usize {
    let total: f64 = eigenvalues.iter().sum();
    if total <= 0.0 {
        return 1;
    }
    let mut acc = 0.0;
    for (i, v) in eigenvalues.iter().enumerate() {
        acc += v;
        // tolerate rounding so that retention 1.0 is reachable
        if acc / total >= retention - 1e-12 {
            return i + 1;
        }
    }
    eigenvalues.len()
}

/// Flip `v` so that its largest-magnitude entry (first on ties) is
/// non-negative.
pub(crate) fn canonical_sign(v: &mut [f64]) {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v[best] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// Fit PCA on `train` (samples x features) keeping the fewest components
/// that retain `retention` of the variance.
pub fn fit_pca(train: &[Vec<f64>], retention: f64) -> Result<PcaModel> {
    if !(retention > 0.0 && retention <= 1.0) {
        return Err(Error::param(format!("retention {retention} outside (0, 1]")));
    }
    if train.len() < 2 {
        return Err(Error::input("PCA needs at least 2 samples"));
    }
    let d = check_matrix(train)?;
    let n = train.len();
    let mut mean = vec![0.0; d];
    for row in train {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let centered = DMatrix::from_fn(n, d, |i, j| train[i][j] - mean[j]);
    let mut cov = centered.transpose() * &centered;
    cov /= (n - 1) as f64;
    // exact symmetry for the eigensolver
    for i in 0..d {
        for j in 0..i {
            let v = 0.5 * (cov[(i, j)] + cov[(j, i)]);
            cov[(i, j)] = v;
            cov[(j, i)] = v;
        }
    }
    if d > DENSE_MAX_DIMS {
        let tri = Tridiagonal::new(cov.clone());
        let values = tri.eigenvalues();
        let eigenvalues: Vec<f64> = values.iter().map(|v| v.max(0.0)).collect();
        let k = components_for(&eigenvalues, retention);
        if 4 * k <= d {
            let basis = tri
                .eigenvectors(&values[..k])
                .into_iter()
                .map(|mut v| {
                    canonical_sign(&mut v);
                    v
                })
                .collect();
            return Ok(PcaModel { mean, basis, eigenvalues, retention });
        }
    }
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i].max(0.0)).collect();
    let k = components_for(&eigenvalues, retention);
    let basis = order[..k]
        .iter()
        .map(|&i| {
            let mut v: Vec<f64> = eig.eigenvectors.column(i).iter().copied().collect();
            canonical_sign(&mut v);
            v
        })
        .collect();
    Ok(PcaModel { mean, basis, eigenvalues, retention })
}

impl PcaModel {
    pub fn dims(&self) -> usize {
        self.mean.len()
    }

    pub fn k(&self) -> usize {
        self.basis.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn basis(&self) -> &[Vec<f64>] {
        &self.basis
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn retention(&self) -> f64 {
        self.retention
    }

    /// Share of total variance held by the retained components.
    pub fn retained_share(&self) -> f64 {
        let total: f64 = self.eigenvalues.iter().sum();
        if total <= 0.0 {
            return 1.0;
        }
        self.eigenvalues[..self.k()].iter().sum::<f64>() / total
    }

    /// The same model restricted to its leading `k` components.
    pub fn truncated(&self, k: usize) -> Result<PcaModel> {
        if k == 0 || k > self.k() {
            return Err(Error::param(format!("cannot truncate {} components to {k}", self.k())));
        }
        let mut m = self.clone();
        m.basis.truncate(k);
        Ok(m)
    }

    /// `basis * (x - mean)`.
    pub fn project_values(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dims() {
            return Err(Error::input(format!(
                "vector has {} features but the model expects {}",
                x.len(),
                self.dims()
            )));
        }
        Ok(self
            .basis
            .iter()
            .map(|row| row.iter().zip(x).zip(&self.mean).map(|((b, v), m)| b * (v - m)).sum())
            .collect())
    }

    /// Map projected coordinates back to feature space.
    pub fn reconstruct(&self, z: &[f64]) -> Result<Vec<f64>> {
        if z.len() != self.k() {
            return Err(Error::input("coordinate count does not match k"));
        }
        let mut out = self.mean.clone();
        for (row, c) in self.basis.iter().zip(z) {
            for (o, b) in out.iter_mut().zip(row) {
                *o += c * b;
            }
        }
        Ok(out)
    }

    pub fn to_record(&self) -> FloatRecord {
        FloatRecord {
            kind: *PCA_KIND,
            ints: vec![self.dims() as u64, self.k() as u64],
            reals: vec![self.retention],
            arrays: vec![self.mean.clone(), self.eigenvalues.clone(), self.basis.concat()],
        }
    }

    pub fn from_record(rec: &FloatRecord) -> Result<Self> {
        rec.expect_shape(2, 1, 3)?;
        let (d, k) = (rec.ints[0] as usize, rec.ints[1] as usize);
        let (mean, eigenvalues, flat) = (&rec.arrays[0], &rec.arrays[1], &rec.arrays[2]);
        if d == 0 || k == 0 || k > d || mean.len() != d || eigenvalues.len() != d || flat.len() != k * d {
            return Err(Error::format("PCA record arrays do not match its header"));
        }
        Ok(PcaModel {
            mean: mean.clone(),
            basis: flat.chunks(d).map(<[f64]>::to_vec).collect(),
            eigenvalues: eigenvalues.clone(),
            retention: rec.reals[0],
        })
    }

    pub fn save(&self, w: impl Write) -> Result<()> {
        self.to_record().write_to(w)
    }

    pub fn load(r: impl Read) -> Result<Self> {
        Self::from_record(&FloatRecord::read_from(r, PCA_KIND)?)
    }
}

pub fn project(model: &PcaModel, rep: &Representation) -> Result<Vec<f64>> {
    model.project_values(&rep.values)
}

/// Per-coordinate training mean and standard deviation (divisor `n - 1`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl BlockStats {
    pub fn fit(rows: &[Vec<f64>]) -> Result<Self> {
        if rows.len() < 2 {
            return Err(Error::input("block statistics need at least 2 samples"));
        }
        let d = check_matrix(rows)?;
        let n = rows.len() as f64;
        let mut mean = vec![0.0; d];
        for r in rows {
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; d];
        for r in rows {
            for ((s, v), m) in var.iter_mut().zip(r).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let std = var.into_iter().map(|s| (s / (n - 1.0)).sqrt()).collect();
        Ok(BlockStats { mean, std })
    }

    pub fn dims(&self) -> usize {
        self.mean.len()
    }

    /// Center every coordinate and scale those with non-zero spread.
    pub fn standardize(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dims() {
            return Err(Error::input(format!(
                "block has {} coordinates but statistics cover {}",
                x.len(),
                self.dims()
            )));
        }
        Ok(x.iter()
            .zip(&self.mean)
            .zip(&self.std)
            .map(|((v, m), s)| if *s > ZERO_VARIANCE { (v - m) / s } else { v - m })
            .collect())
    }
}

/// Training statistics for the invariant and equivariant blocks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FuseStats {
    pub invariant: BlockStats,
    pub equivariant: BlockStats,
}

impl FuseStats {
    pub fn fit(inv_train: &[Vec<f64>], eq_train: &[Vec<f64>]) -> Result<Self> {
        Ok(FuseStats { invariant: BlockStats::fit(inv_train)?, equivariant: BlockStats::fit(eq_train)? })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusedFeatures {
    pub values: Vec<f64>,
    /// `(invariant, equivariant)` coordinate counts.
    pub block_sizes: (usize, usize),
}

/// Standardize each block with its training statistics and concatenate,
/// invariant block first.
pub fn fuse(inv: &[f64], eq: &[f64], stats: &FuseStats) -> Result<FusedFeatures> {
    let mut values = stats.invariant.standardize(inv)?;
    values.extend(stats.equivariant.standardize(eq)?);
    Ok(FusedFeatures { values, block_sizes: (inv.len(), eq.len()) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn random_matrix(n: usize, d: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = crate::seeding::rng(seed);
        (0..n).map(|_| (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect()
    }

    #[test]
    fn rank_one_line() {
        let x: Vec<Vec<f64>> = (0..100).map(|i| vec![i as f64 * 0.1, i as f64 * 0.2]).collect();
        for r in [0.5, 0.8, 1.0] {
            let m = fit_pca(&x, r).unwrap();
            assert_eq!(m.k(), 1);
            assert!(m.eigenvalues()[1].abs() < 1e-9 * m.eigenvalues()[0]);
        }
        let m = fit_pca(&x, 0.8).unwrap();
        let s = 1.0 / 5f64.sqrt();
        assert!((m.basis()[0][0] - s).abs() < 1e-12 && (m.basis()[0][1] - 2.0 * s).abs() < 1e-12);
    }

    #[test]
    fn isotropic_needs_both_components() {
        let x = vec![vec![1.0, 0.0], vec![-1.0, 0.0], vec![0.0, 1.0], vec![0.0, -1.0]];
        let m = fit_pca(&x, 0.8).unwrap();
        assert_eq!(m.k(), 2);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(fit_pca(&[vec![1.0]], 0.8), Err(Error::Input(_))));
        assert!(matches!(fit_pca(&[vec![1.0], vec![f64::NAN]], 0.8), Err(Error::Input(_))));
        assert!(matches!(fit_pca(&[vec![1.0], vec![2.0]], 0.0), Err(Error::Parameter(_))));
        let m = fit_pca(&random_matrix(5, 3, 1), 0.8).unwrap();
        assert!(matches!(m.project_values(&[1.0]), Err(Error::Input(_))));
    }

    #[test]
    fn mean_projects_to_zero_and_projection_shrinks() {
        let x = random_matrix(30, 6, 2);
        let m = fit_pca(&x, 0.8).unwrap();
        assert!(m.project_values(m.mean()).unwrap().iter().all(|v| *v == 0.0));
        for row in &x {
            let z = m.project_values(row).unwrap();
            let zn: f64 = z.iter().map(|v| v * v).sum();
            let xn: f64 = row.iter().zip(m.mean()).map(|(a, b)| (a - b).powi(2)).sum();
            assert!(zn <= xn + 1e-12);
        }
    }

    #[test]
    fn binary_round_trip() {
        let m = fit_pca(&random_matrix(12, 5, 3), 0.9).unwrap();
        let mut buf = Vec::new();
        m.save(&mut buf).unwrap();
        assert_eq!(PcaModel::load(buf.as_slice()).unwrap(), m);
        buf[8] = b'X';
        assert!(matches!(PcaModel::load(buf.as_slice()), Err(Error::Format(_))));
    }

    #[test]
    fn fuse_standardizes_and_guards_zero_variance() {
        let inv = vec![vec![1.0, 5.0], vec![3.0, 5.0], vec![5.0, 5.0]];
        let eq = vec![vec![10.0], vec![20.0], vec![30.0]];
        let stats = FuseStats::fit(&inv, &eq).unwrap();
        let f = fuse(&inv[0], &eq[2], &stats).unwrap();
        assert_eq!(f.block_sizes, (2, 1));
        assert_eq!(f.values, vec![-1.0, 0.0, 1.0]);
        let g = fuse(&[3.0, 7.0], &[20.0], &stats).unwrap();
        assert_eq!(g.values, vec![0.0, 2.0, 0.0]);
        assert!(matches!(fuse(&[1.0], &[1.0], &stats), Err(Error::Input(_))));
    }
}
