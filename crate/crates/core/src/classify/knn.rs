use serde::{Deserialize, Serialize};

use super::check_training;
use crate::error::{Error, Result};

pub const DEFAULT_K: usize = 11;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    pub k: usize,
    pub points: Vec<Vec<f64>>,
    pub labels: Vec<u8>,
}

pub fn fit_knn(x: &[Vec<f64>], y: &[u8], k: usize) -> Result<KnnModel> {
    check_training(x, y)?;
    if k % 2 == 0 || k == 0 {
        return Err(Error::param(format!("k = {k} must be odd")));
    }
    if k > x.len() {
        return Err(Error::param(format!("k = {k} exceeds {} training points", x.len())));
    }
    Ok(KnnModel { k, points: x.to_vec(), labels: y.to_vec() })
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum()
}

impl KnnModel {
    pub fn dims(&self) -> usize {
        self.points[0].len()
    }

    /// Majority label among the `k` nearest points; equal distances rank the
    /// lower training index first.
    pub fn predict(&self, x: &[f64]) -> Result<u8> {
        if x.len() != self.dims() {
            return Err(Error::input(format!("query has {} features, model has {}", x.len(), self.dims())));
        }
        let mut d: Vec<(f64, usize)> = self.points.iter().map(|p| sq_dist(p, x)).zip(0..).collect();
        let order = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if self.k < d.len() {
            d.select_nth_unstable_by(self.k - 1, order);
        }
        let ones = d[..self.k].iter().filter(|(_, i)| self.labels[*i] == 1).count();
        Ok(u8::from(2 * ones > self.k))
    }
}

pub fn predict_knn(model: &KnnModel, x: &[f64]) -> Result<u8> {
    model.predict(x)
}
