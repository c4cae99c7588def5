use nalgebra::{Cholesky, DMatrix};
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Image;
use crate::error::{Error, Result};
use crate::represent::Provenance;
use crate::seeding::rng;
use crate::transform::{apply, sweep_family, Family, GroupTransform};

/// Linear map fitted between a representation and its transformed copy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquivarianceMap {
    /// `d` rows of length `d`; `y ~ matrix * x`.
    pub matrix: Vec<Vec<f64>>,
    pub lambda: f64,
    /// Mean absolute entry of the training residual.
    pub fit_residual: f64,
}

/// How the ridge coefficient is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum Ridge {
    Absolute(f64),
    /// Multiple of `trace(X^T X) / d` for the fitting matrix `X`.
    Relative(f64),
}

impl Default for Ridge {
    fn default() -> Self {
        Ridge::Relative(1e-3)
    }
}

impl Ridge {
    pub fn resolve(self, phi_x: &[Vec<f64>]) -> f64 {
        match self {
            Ridge::Absolute(l) => l,
            Ridge::Relative(s) => s * default_lambda(phi_x),
        }
    }
}

/// `trace(X^T X) / d`, the mean squared column norm.
pub fn default_lambda(phi_x: &[Vec<f64>]) -> f64 {
    let d = phi_x.first().map_or(1, Vec::len).max(1);
    phi_x.iter().flatten().map(|v| v * v).sum::<f64>() / d as f64
}

fn to_matrix(rows: &[Vec<f64>], what: &str) -> Result<DMatrix<f64>> {
    let d = rows.first().map_or(0, Vec::len);
    if rows.is_empty() || d == 0 || rows.iter().any(|r| r.len() != d) {
        return Err(Error::input(format!("{what} must be a non-empty rectangular matrix")));
    }
    if rows.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::input(format!("{what} contains non-finite values")));
    }
    Ok(DMatrix::from_fn(rows.len(), d, |i, j| rows[i][j]))
}

impl EquivarianceMap {
    pub fn identity(d: usize) -> Self {
        EquivarianceMap {
            matrix: (0..d).map(|i| (0..d).map(|j| f64::from(u8::from(i == j))).collect()).collect(),
            lambda: 0.0,
            fit_residual: 0.0,
        }
    }

    pub fn dims(&self) -> usize {
        self.matrix.len()
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dims() {
            return Err(Error::input(format!("vector has {} entries, map expects {}", x.len(), self.dims())));
        }
        Ok(self.matrix.iter().map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum()).collect())
    }
}

fn mean_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q).abs()).sum::<f64>() / a.len() as f64
}

/// Ridge solution of `phi_x * M^T ~ phi_gx` from the normal equations
/// `(X^T X + lambda I) M^T = X^T Y`.
pub fn estimate_map(phi_x: &[Vec<f64>], phi_gx: &[Vec<f64>], lambda: f64) -> Result<EquivarianceMap> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::param(format!("ridge coefficient {lambda} must be finite and non-negative")));
    }
    let x = to_matrix(phi_x, "phi_x")?;
    let y = to_matrix(phi_gx, "phi_gx")?;
    if x.shape() != y.shape() {
        return Err(Error::input(format!("shapes {:?} and {:?} differ", x.shape(), y.shape())));
    }
    let d = x.ncols();
    let mut a = x.tr_mul(&x);
    for i in 0..d {
        a[(i, i)] += lambda;
    }
    let rhs = x.tr_mul(&y);
    let singular = || {
        Error::numerical(if lambda == 0.0 {
            "normal matrix is singular; use a positive ridge coefficient".to_string()
        } else {
            format!("normal matrix is not positive definite at lambda {lambda}")
        })
    };
    let chol = Cholesky::new(a).ok_or_else(singular)?;
    let diag = chol.l_dirty().diagonal();
    let (lo, hi) = diag.iter().fold((f64::MAX, 0f64), |(lo, hi), v| (lo.min(v.abs()), hi.max(v.abs())));
    if lo * lo <= 1e-14 * hi * hi {
        return Err(singular());
    }
    let mt = chol.solve(&rhs);
    let matrix: Vec<Vec<f64>> = (0..d).map(|i| (0..d).map(|j| mt[(j, i)]).collect()).collect();
    if matrix.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::numerical("fitted map has non-finite entries"));
    }
    let residual = &x * &mt - &y;
    let fit_residual = residual.iter().map(|v| v.abs()).sum::<f64>() / residual.len() as f64;
    Ok(EquivarianceMap { matrix, lambda, fit_residual })
}

/// `E_q` from precomputed features: the mean over rows of the mean
/// absolute entry of `phi_x - M phi_ginv_x`.
pub fn equivariance_error_pairs(phi_x: &[Vec<f64>], phi_ginv_x: &[Vec<f64>], map: &EquivarianceMap) -> Result<f64> {
    if phi_x.len() != phi_ginv_x.len() || phi_x.is_empty() {
        return Err(Error::input("paired feature sets must be non-empty and of equal length"));
    }
    let mut total = 0.0;
    for (a, b) in phi_x.iter().zip(phi_ginv_x) {
        if a.len() != map.dims() {
            return Err(Error::input(format!("features have {} entries, map expects {}", a.len(), map.dims())));
        }
        total += mean_abs_diff(a, &map.apply(b)?);
    }
    Ok(total / phi_x.len() as f64)
}

/// Mean absolute entry over a feature set, used as the scale reference.
pub fn mean_abs_magnitude(rows: &[Vec<f64>]) -> f64 {
    let n: usize = rows.iter().map(Vec::len).sum();
    if n == 0 {
        return 0.0;
    }
    rows.iter().flatten().map(|v| v.abs()).sum::<f64>() / n as f64
}

/// A representation function usable from worker threads.
pub type RepFn<'a> = dyn Fn(&Image) -> Result<Vec<f64>> + Sync + 'a;

fn represent_all(rep: &RepFn<'_>, images: &[Image], t: Option<&GroupTransform>) -> Result<Vec<Vec<f64>>> {
    images
        .par_iter()
        .map(|im| match t {
            Some(t) => rep(&apply(t, im)),
            None => rep(im),
        })
        .collect()
}

/// `E_q` of `map` for transform `g` on `eval_set`.
pub fn equivariance_error(rep: &RepFn<'_>, map: &EquivarianceMap, g: &GroupTransform, eval_set: &[Image]) -> Result<f64> {
    let phi = represent_all(rep, eval_set, None)?;
    let phi_inv = represent_all(rep, eval_set, Some(&g.inverse()))?;
    equivariance_error_pairs(&phi, &phi_inv, map)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformRow {
    pub transform: String,
    pub family: Option<Family>,
    pub e_q: f64,
    /// `E_q` of a map fitted on randomly re-paired samples.
    pub control_e_q: f64,
    /// `E_q` with the identity map, i.e. plain invariance.
    pub identity_map_e_q: f64,
    pub fit_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyAverage {
    pub family: Family,
    pub members: usize,
    pub e_q: f64,
    pub control_e_q: f64,
    pub identity_map_e_q: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquivarianceReport {
    pub provenance: Provenance,
    pub n_fit: usize,
    pub n_eval: usize,
    pub lambda: f64,
    /// Mean absolute feature value on the evaluation set.
    pub scale: f64,
    pub rows: Vec<TransformRow>,
    pub families: Vec<FamilyAverage>,
}

impl EquivarianceReport {
    pub fn row(&self, transform: &str) -> Option<&TransformRow> {
        self.rows.iter().find(|r| r.transform == transform)
    }

    pub fn family(&self, family: Family) -> Option<&FamilyAverage> {
        self.families.iter().find(|f| f.family == family)
    }

    /// CSV with one row per transform.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("transform,family,e_q,control_e_q,identity_map_e_q,scale\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.transform,
                r.family.map_or("identity", Family::name),
                r.e_q,
                r.control_e_q,
                r.identity_map_e_q,
                self.scale
            ));
        }
        out
    }
}

/// Fit a map per transform on `fit_set` and evaluate it on `eval_set`, for
/// the identity and every member of the three sweep families.
pub fn run_sweep(
    rep: &RepFn<'_>,
    provenance: Provenance,
    fit_set: &[Image],
    eval_set: &[Image],
    ridge: Ridge,
    seed: u64,
) -> Result<EquivarianceReport> {
    if fit_set.is_empty() || eval_set.is_empty() {
        return Err(Error::input("fit and evaluation sets must be non-empty"));
    }
    let phi_fit = represent_all(rep, fit_set, None)?;
    let phi_eval = represent_all(rep, eval_set, None)?;
    let lambda = ridge.resolve(&phi_fit);
    let mut perm: Vec<usize> = (0..fit_set.len()).collect();
    perm.shuffle(&mut rng(seed));

    let mut transforms = vec![GroupTransform::Identity];
    for f in Family::ALL {
        transforms.extend(sweep_family(f));
    }
    let identity = EquivarianceMap::identity(phi_fit[0].len());
    let mut rows = Vec::with_capacity(transforms.len());
    for t in &transforms {
        let phi_g = represent_all(rep, fit_set, Some(t))?;
        let map = estimate_map(&phi_fit, &phi_g, lambda)?;
        let shuffled: Vec<Vec<f64>> = perm.iter().map(|&i| phi_g[i].clone()).collect();
        let control = estimate_map(&phi_fit, &shuffled, lambda)?;
        let phi_inv = represent_all(rep, eval_set, Some(&t.inverse()))?;
        rows.push(TransformRow {
            transform: t.to_string(),
            family: t.family(),
            e_q: equivariance_error_pairs(&phi_eval, &phi_inv, &map)?,
            control_e_q: equivariance_error_pairs(&phi_eval, &phi_inv, &control)?,
            identity_map_e_q: equivariance_error_pairs(&phi_eval, &phi_inv, &identity)?,
            fit_residual: map.fit_residual,
        });
    }
    let families = Family::ALL
        .iter()
        .map(|&f| {
            let members: Vec<&TransformRow> = rows.iter().filter(|r| r.family == Some(f)).collect();
            let mean = |g: fn(&TransformRow) -> f64| members.iter().map(|r| g(r)).sum::<f64>() / members.len() as f64;
            FamilyAverage {
                family: f,
                members: members.len(),
                e_q: mean(|r| r.e_q),
                control_e_q: mean(|r| r.control_e_q),
                identity_map_e_q: mean(|r| r.identity_map_e_q),
            }
        })
        .collect();
    Ok(EquivarianceReport {
        provenance,
        n_fit: fit_set.len(),
        n_eval: eval_set.len(),
        lambda,
        scale: mean_abs_magnitude(&phi_eval),
        rows,
        families,
    })
}

/// Read a headerless or headed CSV of numbers, one row per sample.
pub fn read_feature_csv(text: &str) -> Result<Vec<Vec<f64>>> {
    let mut rows = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let parsed: std::result::Result<Vec<f64>, _> = line.split(',').map(|c| c.trim().parse::<f64>()).collect();
        match parsed {
            Ok(r) => rows.push(r),
            Err(_) if lineno == 0 => continue,
            Err(e) => return Err(Error::format(format!("line {}: {e}", lineno + 1))),
        }
    }
    if rows.is_empty() {
        return Err(Error::input("feature CSV has no data rows"));
    }
    let d = rows[0].len();
    if rows.iter().any(|r| r.len() != d) {
        return Err(Error::format("feature CSV rows have different lengths"));
    }
    Ok(rows)
}
