use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::LabeledImageSet;
use crate::error::{Error, Result};
use crate::seeding::rng;

/// A balanced two-class problem carved from a labeled source set.
/// Labels are remapped to `class_a -> 0`, `class_b -> 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinaryTask {
    pub train: LabeledImageSet,
    pub test: LabeledImageSet,
    pub class_a: u32,
    pub class_b: u32,
    pub seed: u64,
    /// Source indices of the training images, in training order.
    pub train_indices: Vec<usize>,
    /// Source indices of the test images, in test order.
    pub test_indices: Vec<usize>,
}

fn relabel(source: &LabeledImageSet, indices: &[usize], class_a: u32) -> LabeledImageSet {
    let mut set = source.select(indices);
    for l in &mut set.labels {
        *l = u32::from(*l != class_a);
    }
    if let Some(names) = &source.class_names {
        let name = |c: u32| names.get(c as usize).cloned().unwrap_or_else(|| c.to_string());
        let other = source.labels[indices.iter().copied().find(|&i| source.labels[i] != class_a).unwrap_or(0)];
        set.class_names = Some(vec![name(class_a), name(other)]);
    }
    set
}

/// Sample a balanced binary task without replacement.
///
/// Each split holds `ceil(n/2)` images of `class_a` and `floor(n/2)` of
/// `class_b`. Deterministic for a fixed seed.
pub fn make_binary_task(
    source: &LabeledImageSet,
    class_a: u32,
    class_b: u32,
    n_train: usize,
    n_test: usize,
    seed: u64,
) -> Result<BinaryTask> {
    if class_a == class_b {
        return Err(Error::input(format!("binary task needs two distinct classes, got {class_a} twice")));
    }
    let mut rng = rng(seed);
    let quota = |n: usize| (n.div_ceil(2), n / 2);
    let (train_a, train_b) = quota(n_train);
    let (test_a, test_b) = quota(n_test);

    let mut picks = Vec::new();
    for (class, n_tr, n_te) in [(class_a, train_a, test_a), (class_b, train_b, test_b)] {
        let mut idx: Vec<usize> = (0..source.len()).filter(|&i| source.labels[i] == class).collect();
        if idx.len() < n_tr + n_te {
            return Err(Error::input(format!(
                "class {class} has {} images, {} required",
                idx.len(),
                n_tr + n_te
            )));
        }
        idx.shuffle(&mut rng);
        let test = idx[n_tr..n_tr + n_te].to_vec();
        idx.truncate(n_tr);
        picks.push((idx, test));
    }
    let (mut train_idx, mut test_idx) = (Vec::new(), Vec::new());
    for (tr, te) in picks {
        train_idx.extend(tr);
        test_idx.extend(te);
    }
    train_idx.shuffle(&mut rng);
    test_idx.shuffle(&mut rng);

    Ok(BinaryTask {
        train: relabel(source, &train_idx, class_a),
        test: relabel(source, &test_idx, class_a),
        class_a,
        class_b,
        seed,
        train_indices: train_idx,
        test_indices: test_idx,
    })
}

/// Stratified index split: for every class, `fraction` of its members go to
/// the first part. Per-class quotas are allocated by largest remainder so
/// that the first part has `round(fraction * n)` members overall.
pub fn split_indices(labels: &[u32], fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::input(format!("split fraction {fraction} outside (0, 1)")));
    }
    if labels.is_empty() {
        return Err(Error::input("cannot split an empty set"));
    }
    let n_classes = labels.iter().copied().max().unwrap_or(0) as usize + 1;
    let mut members = vec![Vec::new(); n_classes];
    for (i, &l) in labels.iter().enumerate() {
        members[l as usize].push(i);
    }
    let target = (fraction * labels.len() as f64 + 1e-9).round() as usize;
    let mut quotas: Vec<usize> = Vec::with_capacity(n_classes);
    let mut remainders: Vec<(f64, usize)> = Vec::new();
    for (c, m) in members.iter().enumerate() {
        let exact = fraction * m.len() as f64;
        let base = (exact + 1e-9).floor() as usize;
        quotas.push(base);
        if !m.is_empty() {
            remainders.push((exact - base as f64, c));
        }
    }
    remainders.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let mut missing = target.saturating_sub(quotas.iter().sum());
    for &(rem, c) in &remainders {
        if missing == 0 {
            break;
        }
        if rem > 1e-9 && quotas[c] < members[c].len() {
            quotas[c] += 1;
            missing -= 1;
        }
    }

    let mut rng = rng(seed);
    let (mut first, mut second) = (Vec::new(), Vec::new());
    for (c, m) in members.iter_mut().enumerate() {
        m.shuffle(&mut rng);
        first.extend_from_slice(&m[..quotas[c]]);
        second.extend_from_slice(&m[quotas[c]..]);
    }
    first.sort_unstable();
    second.sort_unstable();
    Ok((first, second))
}

/// Stratified split of a labeled set; see [`split_indices`].
pub fn split(set: &LabeledImageSet, fraction: f64, seed: u64) -> Result<(LabeledImageSet, LabeledImageSet)> {
    let (a, b) = split_indices(&set.labels, fraction, seed)?;
    Ok((set.select(&a), set.select(&b)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Image;
    use std::collections::HashSet;

    fn toy_source(per_class: usize, classes: u32) -> LabeledImageSet {
        let mut images = Vec::new();
        let mut labels = Vec::new();
        for c in 0..classes {
            for i in 0..per_class {
                let v = (i as f64 + 1.0) / (per_class as f64 + 1.0);
                images.push(Image::constant(2, 2, v).unwrap());
                labels.push(c);
            }
        }
        LabeledImageSet::new(images, labels).unwrap()
    }

    #[test]
    fn same_seed_same_task() {
        let src = toy_source(60, 3);
        let a = make_binary_task(&src, 2, 0, 40, 20, 11).unwrap();
        let b = make_binary_task(&src, 2, 0, 40, 20, 11).unwrap();
        assert_eq!(a, b);
        let c = make_binary_task(&src, 2, 0, 40, 20, 12).unwrap();
        assert_ne!(a.train_indices, c.train_indices);
    }

    #[test]
    fn balance_and_disjointness() {
        let src = toy_source(80, 2);
        let task = make_binary_task(&src, 1, 0, 100, 30, 3).unwrap();
        let ones = task.train.labels.iter().filter(|&&l| l == 1).count();
        assert_eq!((task.train.len() - ones, ones), (50, 50));
        assert_eq!(task.test.class_counts(), vec![15, 15]);
        let all: HashSet<_> = task.train_indices.iter().chain(&task.test_indices).collect();
        assert_eq!(all.len(), 130);
        for (&i, &l) in task.train_indices.iter().zip(&task.train.labels) {
            assert_eq!(l, u32::from(src.labels[i] != 1));
        }
    }

    #[test]
    fn task_errors() {
        let src = toy_source(10, 2);
        assert!(matches!(make_binary_task(&src, 7, 7, 4, 2, 0), Err(Error::Input(_))));
        assert!(matches!(make_binary_task(&src, 0, 1, 20, 10, 0), Err(Error::Input(_))));
    }

    #[test]
    fn seventy_thirty_split_is_balanced() {
        let src = toy_source(50, 2);
        let (a, b) = split(&src, 0.7, 5).unwrap();
        assert_eq!(a.class_counts(), vec![35, 35]);
        assert_eq!(b.class_counts(), vec![15, 15]);
        assert_eq!(split(&src, 0.7, 5).unwrap(), (a, b));
    }

    #[test]
    fn half_split_of_two_distinct_samples() {
        let (a, b) = split_indices(&[0, 1], 0.5, 0).unwrap();
        assert_eq!((a.len(), b.len()), (1, 1));
    }

    #[test]
    fn split_fraction_must_be_open_interval() {
        assert!(split_indices(&[0, 1], 0.0, 0).is_err());
        assert!(split_indices(&[0, 1], 1.0, 0).is_err());
        assert!(split_indices(&[], 0.5, 0).is_err());
    }

    proptest::proptest! {
        #[test]
        fn split_partitions_input(labels in proptest::collection::vec(0u32..3, 1..60), f in 0.05f64..0.95, seed in 0u64..1000) {
            let (a, b) = split_indices(&labels, f, seed).unwrap();
            let mut all: Vec<usize> = a.iter().chain(&b).copied().collect();
            all.sort_unstable();
            proptest::prop_assert_eq!(all, (0..labels.len()).collect::<Vec<_>>());
        }
    }
}
