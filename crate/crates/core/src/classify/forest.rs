use rand::seq::index::sample;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::check_training;
use crate::error::{Error, Result};
use crate::seeding::rng;

pub const DEFAULT_TREES: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "lowercase")]
pub enum Node {
    Leaf { label: u8 },
    /// Samples with `x[feature] <= threshold` go left.
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub seed: u64,
    /// Root at index 0.
    pub nodes: Vec<Node>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub dims: usize,
    pub trees: Vec<Tree>,
}

fn majority(y: &[u8], idx: &[usize]) -> u8 {
    let ones = idx.iter().filter(|&&i| y[i] == 1).count();
    u8::from(2 * ones > idx.len())
}

fn gini(ones: usize, n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let p = ones as f64 / n as f64;
    2.0 * p * (1.0 - p)
}

/// Best midpoint split on one feature: `(weighted impurity, threshold)`.
fn best_split(x: &[Vec<f64>], y: &[u8], idx: &[usize], f: usize) -> Option<(f64, f64)> {
    let mut vals: Vec<(f64, u8)> = idx.iter().map(|&i| (x[i][f], y[i])).collect();
    vals.sort_by(|a, b| a.0.total_cmp(&b.0));
    let n = vals.len();
    let total_ones = vals.iter().filter(|v| v.1 == 1).count();
    let mut left_ones = 0;
    let mut best: Option<(f64, f64)> = None;
    for i in 0..n - 1 {
        left_ones += usize::from(vals[i].1);
        if vals[i].0 == vals[i + 1].0 {
            continue;
        }
        let nl = i + 1;
        let imp = (nl as f64 * gini(left_ones, nl) + (n - nl) as f64 * gini(total_ones - left_ones, n - nl)) / n as f64;
        if best.map_or(true, |(b, _)| imp < b) {
            let mid = 0.5 * (vals[i].0 + vals[i + 1].0);
            // keep the threshold strictly below the upper value
            let t = if mid < vals[i + 1].0 { mid } else { vals[i].0 };
            best = Some((imp, t));
        }
    }
    best
}

fn grow(x: &[Vec<f64>], y: &[u8], seed: u64) -> Tree {
    let n = x.len();
    let d = x[0].len();
    let m = (d as f64).sqrt().ceil() as usize;
    let mut r = rng(seed);
    let boot: Vec<usize> = (0..n).map(|_| r.gen_range(0..n)).collect();
    let mut nodes = Vec::new();
    let mut stack = vec![(0usize, boot)];
    nodes.push(Node::Leaf { label: 0 });
    while let Some((at, idx)) = stack.pop() {
        let ones = idx.iter().filter(|&&i| y[i] == 1).count();
        if idx.len() < 2 || ones == 0 || ones == idx.len() {
            nodes[at] = Node::Leaf { label: majority(y, &idx) };
            continue;
        }
        let mut chosen: Option<(f64, usize, f64)> = None;
        let consider = |feats: &[usize], chosen: &mut Option<(f64, usize, f64)>| {
            for &f in feats {
                if let Some((imp, t)) = best_split(x, y, &idx, f) {
                    if chosen.map_or(true, |(b, _, _)| imp < b) {
                        *chosen = Some((imp, f, t));
                    }
                }
            }
        };
        let drawn = sample(&mut r, d, m.min(d)).into_vec();
        consider(&drawn, &mut chosen);
        if chosen.is_none() {
            // every drawn feature was constant here; fall back to the rest
            let mut rest: Vec<usize> = (0..d).filter(|f| !drawn.contains(f)).collect();
            rest.sort_unstable();
            consider(&rest, &mut chosen);
        }
        let Some((_, feature, threshold)) = chosen else {
            nodes[at] = Node::Leaf { label: majority(y, &idx) };
            continue;
        };
        let (li, ri): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| x[i][feature] <= threshold);
        let left = nodes.len();
        nodes.push(Node::Leaf { label: 0 });
        let right = nodes.len();
        nodes.push(Node::Leaf { label: 0 });
        nodes[at] = Node::Split { feature, threshold, left, right };
        stack.push((right, ri));
        stack.push((left, li));
    }
    Tree { seed, nodes }
}

impl Tree {
    pub fn predict(&self, x: &[f64]) -> u8 {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf { label } => return *label,
                Node::Split { feature, threshold, left, right } => {
                    at = if x[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }
}

/// Bagged Gini trees; tree `t` uses seed `seed + t`.
pub fn fit_rf(x: &[Vec<f64>], y: &[u8], n_trees: usize, seed: u64) -> Result<ForestModel> {
    check_training(x, y)?;
    if n_trees == 0 {
        return Err(Error::param("forest needs at least one tree"));
    }
    let trees = (0..n_trees as u64).into_par_iter().map(|t| grow(x, y, seed.wrapping_add(t))).collect();
    Ok(ForestModel { dims: x[0].len(), trees })
}

impl ForestModel {
    /// Majority vote; an even split goes to label 0.
    pub fn predict(&self, x: &[f64]) -> Result<u8> {
        if x.len() != self.dims {
            return Err(Error::input(format!("query has {} features, model has {}", x.len(), self.dims)));
        }
        let ones = self.trees.iter().filter(|t| t.predict(x) == 1).count();
        Ok(u8::from(2 * ones > self.trees.len()))
    }
}

pub fn predict_rf(model: &ForestModel, x: &[f64]) -> Result<u8> {
    model.predict(x)
}
