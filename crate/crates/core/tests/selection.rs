use icnn::data::{Image, LabeledImageSet};
use icnn::represent::{select_operator, Bump, IeneoOperator, SelectionConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Class 0 carries a fine checkerboard, class 1 is flat; both share the
/// same distribution of mean levels and noise.
fn texture_set(n_per_class: usize, seed: u64) -> LabeledImageSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut images, mut labels) = (Vec::new(), Vec::new());
    for i in 0..2 * n_per_class {
        let class = (i % 2) as u32;
        let level = rng.gen_range(0.3..0.7);
        let px: Vec<f64> = (0..16 * 16)
            .map(|k| {
                let check = if class == 0 { if (k / 16 + k % 16) % 2 == 0 { 0.25 } else { -0.25 } } else { 0.0 };
                level + check + rng.gen_range(-0.02..0.02)
            })
            .collect();
        images.push(Image::from_clamped(16, 16, px).unwrap());
        labels.push(class);
    }
    LabeledImageSet::new(images, labels).unwrap()
}

fn near_delta() -> IeneoOperator {
    IeneoOperator::from_bumps(4, vec![Bump { a: 1.0, c: 0.0, sigma: 0.3 }], None).unwrap()
}

fn heavy_smoothing(c: f64) -> IeneoOperator {
    IeneoOperator::from_bumps(4, vec![Bump { a: 1.0, c, sigma: 8.0 }], None).unwrap()
}

#[test]
fn detail_preserving_operator_wins() {
    let train = texture_set(30, 5);
    let config = SelectionConfig { k_prefilter: 3, per_class_prefilter: 10, ..SelectionConfig::default() };
    for (pos, seed) in [(0usize, 1u64), (2, 2), (4, 3)] {
        let mut candidates: Vec<IeneoOperator> = (0..4).map(|i| heavy_smoothing(i as f64)).collect();
        candidates.insert(pos, near_delta());
        let sel = select_operator(&candidates, &train, seed, &config).unwrap();
        assert_eq!(sel.index, pos);
        assert_eq!(sel.operator, near_delta());
        let best = sel.scores.iter().copied().fold(f64::MIN, f64::max);
        assert_eq!(sel.scores[pos], best, "{:?}", sel.scores);
        assert_eq!(sel.val_accuracies.len(), 3);
    }
}

#[test]
fn selection_is_deterministic() {
    let train = texture_set(20, 9);
    let candidates: Vec<IeneoOperator> =
        (0..6).map(|i| icnn::represent::sample_ieneo(3, 3, 40 + i).unwrap()).collect();
    let config = SelectionConfig { k_prefilter: 2, per_class_prefilter: 6, ..SelectionConfig::default() };
    let a = select_operator(&candidates, &train, 77, &config).unwrap();
    let b = select_operator(&candidates, &train, 77, &config).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.scores.len(), 6);
}
