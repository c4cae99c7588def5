//! RBF support vector machine trained with Platt's sequential minimal
//! optimization.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::check_training;
use crate::binfmt::FloatRecord;
use crate::error::{Error, Result};

const SVM_KIND: &[u8; 4] = b"SVM\0";
/// Minimum relative change of an alpha for a step to count.
const STEP_EPS: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SvmParams {
    pub c: f64,
    /// `None` selects `1 / (d * mean column variance)`.
    pub gamma: Option<f64>,
    pub tol: f64,
    /// Cap on full or non-bound sweeps; `None` means `10 * n`.
    pub max_passes: Option<usize>,
}

impl Default for SvmParams {
    fn default() -> Self {
        SvmParams { c: 1.0, gamma: None, tol: 1e-3, max_passes: None }
    }
}

/// Fitted model holding only the support vectors (`alpha > 0`).
#[derive(Debug, Clone, PartialEq)]
pub struct SvmModel {
    pub alphas: Vec<f64>,
    /// `-1.0` or `+1.0` per support vector.
    pub labels: Vec<f64>,
    pub support: Vec<Vec<f64>>,
    pub bias: f64,
    pub gamma: f64,
    pub c: f64,
    pub tol: f64,
    pub converged: bool,
    pub passes: usize,
}

pub fn rbf(a: &[f64], b: &[f64], gamma: f64) -> f64 {
    let d: f64 = a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum();
    (-gamma * d).exp()
}

/// `1 / (d * mean per-column variance)`, or `1 / d` for constant data.
pub fn default_gamma(x: &[Vec<f64>]) -> f64 {
    let (n, d) = (x.len() as f64, x[0].len());
    let mut total = 0.0;
    for j in 0..d {
        let mean = x.iter().map(|r| r[j]).sum::<f64>() / n;
        total += x.iter().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / n;
    }
    let var = total / d as f64;
    if var > 0.0 {
        1.0 / (d as f64 * var)
    } else {
        1.0 / d as f64
    }
}

struct Smo<'a> {
    kernel: Vec<f64>,
    n: usize,
    y: &'a [f64],
    alpha: Vec<f64>,
    errors: Vec<f64>,
    b: f64,
    c: f64,
    tol: f64,
}

impl Smo<'_> {
    fn k(&self, i: usize, j: usize) -> f64 {
        self.kernel[i * self.n + j]
    }

    fn non_bound(&self, i: usize) -> bool {
        self.alpha[i] > 0.0 && self.alpha[i] < self.c
    }

    fn take_step(&mut self, i1: usize, i2: usize) -> bool {
        if i1 == i2 {
            return false;
        }
        let (a1, a2) = (self.alpha[i1], self.alpha[i2]);
        let (y1, y2) = (self.y[i1], self.y[i2]);
        let (e1, e2) = (self.errors[i1], self.errors[i2]);
        let s = y1 * y2;
        let (lo, hi) = if s < 0.0 {
            ((a2 - a1).max(0.0), (self.c + a2 - a1).min(self.c))
        } else {
            ((a1 + a2 - self.c).max(0.0), (a1 + a2).min(self.c))
        };
        if lo >= hi {
            return false;
        }
        let (k11, k12, k22) = (self.k(i1, i1), self.k(i1, i2), self.k(i2, i2));
        let eta = k11 + k22 - 2.0 * k12;
        let mut new2 = if eta > 0.0 {
            (a2 + y2 * (e1 - e2) / eta).clamp(lo, hi)
        } else {
            let f1 = y1 * (e1 - self.b) - a1 * k11 - s * a2 * k12;
            let f2 = y2 * (e2 - self.b) - s * a1 * k12 - a2 * k22;
            let obj = |a: f64| {
                let a1n = a1 + s * (a2 - a);
                a1n * f1 + a * f2 + 0.5 * a1n * a1n * k11 + 0.5 * a * a * k22 + s * a * a1n * k12
            };
            let (lobj, hobj) = (obj(lo), obj(hi));
            if lobj < hobj - STEP_EPS {
                lo
            } else if lobj > hobj + STEP_EPS {
                hi
            } else {
                a2
            }
        };
        // snap to the box to keep bound membership exact
        if new2 < 1e-12 {
            new2 = 0.0;
        } else if new2 > self.c - 1e-12 * self.c {
            new2 = self.c;
        }
        if (new2 - a2).abs() < STEP_EPS * (new2 + a2 + STEP_EPS) {
            return false;
        }
        let mut new1 = a1 + s * (a2 - new2);
        if new1 < 1e-12 {
            new1 = 0.0;
        } else if new1 > self.c - 1e-12 * self.c {
            new1 = self.c;
        }
        let (d1, d2) = (y1 * (new1 - a1), y2 * (new2 - a2));
        let b1 = self.b - e1 - d1 * k11 - d2 * k12;
        let b2 = self.b - e2 - d1 * k12 - d2 * k22;
        let new_b = if new1 > 0.0 && new1 < self.c {
            b1
        } else if new2 > 0.0 && new2 < self.c {
            b2
        } else {
            0.5 * (b1 + b2)
        };
        let db = new_b - self.b;
        for k in 0..self.n {
            self.errors[k] += d1 * self.kernel[i1 * self.n + k] + d2 * self.kernel[i2 * self.n + k] + db;
        }
        self.alpha[i1] = new1;
        self.alpha[i2] = new2;
        self.b = new_b;
        true
    }

    fn examine(&mut self, i2: usize) -> bool {
        let y2 = self.y[i2];
        let a2 = self.alpha[i2];
        let e2 = self.errors[i2];
        let r2 = e2 * y2;
        if !((r2 < -self.tol && a2 < self.c) || (r2 > self.tol && a2 > 0.0)) {
            return false;
        }
        // second-choice heuristic: maximize |E1 - E2| among non-bound points
        let mut best = None;
        let mut gap = -1.0;
        for i in 0..self.n {
            if self.non_bound(i) {
                let g = (self.errors[i] - e2).abs();
                if g > gap {
                    gap = g;
                    best = Some(i);
                }
            }
        }
        if let Some(i1) = best {
            if self.take_step(i1, i2) {
                return true;
            }
        }
        let start = i2 % self.n;
        for off in 0..self.n {
            let i1 = (start + off) % self.n;
            if self.non_bound(i1) && self.take_step(i1, i2) {
                return true;
            }
        }
        for off in 0..self.n {
            let i1 = (start + off) % self.n;
            if self.take_step(i1, i2) {
                return true;
            }
        }
        false
    }
}

pub fn fit_svm_rbf(x: &[Vec<f64>], y: &[u8], params: &SvmParams) -> Result<SvmModel> {
    check_training(x, y)?;
    if !y.contains(&0) || !y.contains(&1) {
        return Err(Error::input("SVM training needs both classes"));
    }
    if !(params.c > 0.0) || !(params.tol > 0.0) {
        return Err(Error::param("SVM needs C > 0 and tol > 0"));
    }
    let gamma = match params.gamma {
        Some(g) if g > 0.0 => g,
        Some(g) => return Err(Error::param(format!("gamma {g} must be positive"))),
        None => default_gamma(x),
    };
    let n = x.len();
    let ys: Vec<f64> = y.iter().map(|&l| if l == 1 { 1.0 } else { -1.0 }).collect();
    let mut kernel = vec![0.0; n * n];
    for i in 0..n {
        kernel[i * n + i] = 1.0;
        for j in 0..i {
            let v = rbf(&x[i], &x[j], gamma);
            kernel[i * n + j] = v;
            kernel[j * n + i] = v;
        }
    }
    let errors = ys.iter().map(|v| -v).collect();
    let mut smo = Smo { kernel, n, y: &ys, alpha: vec![0.0; n], errors, b: 0.0, c: params.c, tol: params.tol };
    let cap = params.max_passes.unwrap_or(10 * n).max(1);
    let mut examine_all = true;
    let mut changed = 0usize;
    let mut passes = 0;
    while (changed > 0 || examine_all) && passes < cap {
        changed = 0;
        for i in 0..n {
            if (examine_all || smo.non_bound(i)) && smo.examine(i) {
                changed += 1;
            }
        }
        if examine_all {
            examine_all = false;
        } else if changed == 0 {
            examine_all = true;
        }
        passes += 1;
    }
    let converged = !(changed > 0 || examine_all);
    if !converged {
        log::warn!("SMO stopped at the pass cap ({cap}) before convergence");
    }
    let sv: Vec<usize> = (0..n).filter(|&i| smo.alpha[i] > 0.0).collect();
    Ok(SvmModel {
        alphas: sv.iter().map(|&i| smo.alpha[i]).collect(),
        labels: sv.iter().map(|&i| ys[i]).collect(),
        support: sv.iter().map(|&i| x[i].clone()).collect(),
        bias: smo.b,
        gamma,
        c: params.c,
        tol: params.tol,
        converged,
        passes,
    })
}

impl SvmModel {
    pub fn decision(&self, x: &[f64]) -> f64 {
        self.alphas
            .iter()
            .zip(&self.labels)
            .zip(&self.support)
            .map(|((a, y), s)| a * y * rbf(s, x, self.gamma))
            .sum::<f64>()
            + self.bias
    }

    pub fn predict(&self, x: &[f64]) -> Result<u8> {
        if let Some(s) = self.support.first() {
            if s.len() != x.len() {
                return Err(Error::input(format!("query has {} features, model has {}", x.len(), s.len())));
            }
        }
        Ok(u8::from(self.decision(x) > 0.0))
    }

    pub fn to_record(&self) -> FloatRecord {
        let d = self.support.first().map_or(0, Vec::len);
        FloatRecord {
            kind: *SVM_KIND,
            ints: vec![d as u64, self.support.len() as u64, u64::from(self.converged), self.passes as u64],
            reals: vec![self.bias, self.gamma, self.c, self.tol],
            arrays: vec![self.alphas.clone(), self.labels.clone(), self.support.concat()],
        }
    }

    pub fn from_record(rec: &FloatRecord) -> Result<Self> {
        rec.expect_shape(4, 4, 3)?;
        let (d, m) = (rec.ints[0] as usize, rec.ints[1] as usize);
        if rec.arrays[0].len() != m || rec.arrays[1].len() != m || rec.arrays[2].len() != m * d || (m > 0 && d == 0) {
            return Err(Error::format("SVM record arrays do not match its header"));
        }
        Ok(SvmModel {
            alphas: rec.arrays[0].clone(),
            labels: rec.arrays[1].clone(),
            support: if d == 0 { Vec::new() } else { rec.arrays[2].chunks(d).map(<[f64]>::to_vec).collect() },
            bias: rec.reals[0],
            gamma: rec.reals[1],
            c: rec.reals[2],
            tol: rec.reals[3],
            converged: rec.ints[2] != 0,
            passes: rec.ints[3] as usize,
        })
    }

    pub fn save(&self, w: impl Write) -> Result<()> {
        self.to_record().write_to(w)
    }

    pub fn load(r: impl Read) -> Result<Self> {
        Self::from_record(&FloatRecord::read_from(r, SVM_KIND)?)
    }
}

pub fn predict_svm(model: &SvmModel, x: &[f64]) -> Result<u8> {
    model.predict(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(c: f64, gamma: f64) -> SvmParams {
        SvmParams { c, gamma: Some(gamma), ..SvmParams::default() }
    }

    #[test]
    fn rbf_of_identical_points_is_one() {
        assert_eq!(rbf(&[1.0, 2.0], &[1.0, 2.0], 123.0), 1.0);
    }

    #[test]
    fn symmetric_pair() {
        let m = fit_svm_rbf(&[vec![-1.0], vec![1.0]], &[0, 1], &params(10.0, 1.0)).unwrap();
        assert!(m.converged);
        assert_eq!(m.alphas.len(), 2);
        assert!((m.alphas[0] - m.alphas[1]).abs() < 1e-9);
        assert!(m.decision(&[-0.1]) < 0.0 && m.decision(&[0.1]) > 0.0);
        assert!(m.bias.abs() < 1e-9);
    }

    #[test]
    fn xor_is_separated() {
        let x = vec![vec![0.0, 0.0], vec![1.0, 1.0], vec![0.0, 1.0], vec![1.0, 0.0]];
        let y = [0, 0, 1, 1];
        let m = fit_svm_rbf(&x, &y, &params(10.0, 1.0)).unwrap();
        for (xi, &yi) in x.iter().zip(&y) {
            assert_eq!(m.predict(xi).unwrap(), yi);
        }
    }

    #[test]
    fn single_class_rejected() {
        assert!(matches!(fit_svm_rbf(&[vec![0.0], vec![1.0]], &[1, 1], &SvmParams::default()), Err(Error::Input(_))));
    }

    #[test]
    fn pass_cap_flags_non_convergence() {
        let x: Vec<Vec<f64>> = (0..40).map(|i| vec![(i as f64 * 0.37).sin(), (i as f64 * 0.91).cos()]).collect();
        let y: Vec<u8> = (0..40).map(|i| (i % 3 == 0) as u8).collect();
        let m = fit_svm_rbf(&x, &y, &SvmParams { max_passes: Some(1), ..params(1.0, 1.0) }).unwrap();
        assert!(!m.converged);
        assert_eq!(m.passes, 1);
    }

    #[test]
    fn binary_round_trip() {
        let x = vec![vec![0.0, 0.0], vec![1.0, 1.0], vec![0.0, 1.0], vec![1.0, 0.0]];
        let m = fit_svm_rbf(&x, &[0, 0, 1, 1], &params(10.0, 1.0)).unwrap();
        let mut buf = Vec::new();
        m.save(&mut buf).unwrap();
        assert_eq!(SvmModel::load(buf.as_slice()).unwrap(), m);
        assert!(matches!(crate::reduce::PcaModel::load(buf.as_slice()), Err(Error::Format(_))));
    }
}
