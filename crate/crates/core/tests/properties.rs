mod common;

use icnn::audit::{equivariance_error_pairs, estimate_map, linkage, run_sweep, EquivarianceMap, Linkage, Ridge};
use icnn::classify::{accuracy, confusion, fit_knn, fit_rf, fit_svm_rbf, predict_knn, predict_rf, SvmParams};
use icnn::data::Image;
use icnn::represent::{apply_ieneo_grid, build_filter_bank, sample_ieneo, scatter, Provenance};
use icnn::transform::{apply, apply_grid, Axis, Family, GroupTransform};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{central_disk_mae, mnist5k};

/// Round-trip bound for band-limited images, and the frozen calibration
/// for MNIST digits whose one-pixel strokes lose more to bilinear blur.
const SMOOTH_ROUND_TRIP_BOUND: f64 = 0.05;
const DIGIT_ROUND_TRIP_BOUND: f64 = 0.12;
const DIGIT_ROUND_TRIP_MEAN_BOUND: f64 = 0.08;

fn random_image(rng: &mut ChaCha8Rng, h: usize, w: usize) -> Image {
    Image::from_fn(h, w, |_, _| rng.gen_range(0.0..=1.0)).unwrap()
}

fn smooth_image(rng: &mut ChaCha8Rng, side: usize) -> Image {
    let s = side as f64;
    let blobs: Vec<[f64; 4]> = (0..4)
        .map(|_| [rng.gen_range(0.15 * s..0.85 * s), rng.gen_range(0.15 * s..0.85 * s), rng.gen_range(2.0..5.0), rng.gen_range(0.2..1.0)])
        .collect();
    let values = (0..side * side)
        .map(|i| {
            let (r, c) = ((i / side) as f64, (i % side) as f64);
            blobs.iter().map(|[y, x, sd, a]| a * (-((r - y).powi(2) + (c - x).powi(2)) / (2.0 * sd * sd)).exp()).sum()
        })
        .collect();
    Image::from_clamped(side, side, values).unwrap()
}

fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn ieneo_is_non_expansive_over_random_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(100);
    for k in 0..10u64 {
        let op = sample_ieneo(1 + (k as usize % 4), 3, k).unwrap();
        for _ in 0..100 {
            let x = random_image(&mut rng, 12, 12);
            let y = if rng.gen_bool(0.5) {
                random_image(&mut rng, 12, 12)
            } else {
                let eps = rng.gen_range(0.0..0.3);
                Image::from_clamped(12, 12, x.pixels().iter().map(|v| v + rng.gen_range(-eps..=eps)).collect()).unwrap()
            };
            let fx = apply_ieneo_grid(&op, &x.to_grid()).unwrap();
            let fy = apply_ieneo_grid(&op, &y.to_grid()).unwrap();
            assert!(sup_diff(&fx.values, &fy.values) <= sup_diff(x.pixels(), y.pixels()) + 1e-12);
        }
    }
}

fn d4() -> Vec<GroupTransform> {
    vec![
        GroupTransform::reflection(Axis::Horizontal),
        GroupTransform::reflection(Axis::Vertical),
        GroupTransform::rotation(90.0).unwrap(),
        GroupTransform::rotation(180.0).unwrap(),
        GroupTransform::rotation(270.0).unwrap(),
        GroupTransform::rotation(-90.0).unwrap(),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ieneo_commutes_with_square_symmetries(side in 5usize..17, seed in 0u64..10_000, img_seed in 0u64..10_000) {
        let op = sample_ieneo(1 + (seed as usize % 4).min((side - 1) / 2), 3, seed).unwrap();
        let x = random_image(&mut ChaCha8Rng::seed_from_u64(img_seed), side, side);
        let out = apply_ieneo_grid(&op, &x.to_grid()).unwrap();
        for t in d4() {
            let lhs = apply_ieneo_grid(&op, &apply(&t, &x).to_grid()).unwrap();
            let rhs = apply_grid(&t, &out);
            prop_assert!(lhs.max_abs_diff(&rhs) <= 1e-10, "{} off by {}", t, lhs.max_abs_diff(&rhs));
        }
    }

    #[test]
    fn scattering_kills_constants(c in 0.0f64..=1.0, side_pow in 3u32..6) {
        let side = 1usize << side_pow;
        let bank = build_filter_bank(side, 2, 8).unwrap();
        let rep = scatter(&Image::constant(side, side, c).unwrap(), &bank, 1).unwrap();
        let per_channel = (side / 4) * (side / 4);
        prop_assert!(rep.values[..per_channel].iter().all(|v| (v - c).abs() < 1e-9));
        prop_assert!(rep.values[per_channel..].iter().all(|v| v.abs() <= 1e-6));
    }

    #[test]
    fn knn_ignores_training_order(seed in 0u64..10_000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.gen_range(11..40);
        let x: Vec<Vec<f64>> = (0..n).map(|_| (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        let y: Vec<u8> = (0..n).map(|_| rng.gen_range(0..2)).collect();
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rng);
        let xp: Vec<Vec<f64>> = perm.iter().map(|&i| x[i].clone()).collect();
        let yp: Vec<u8> = perm.iter().map(|&i| y[i]).collect();
        let k = [1, 3, 5, 11][rng.gen_range(0..4)];
        let (a, b) = (fit_knn(&x, &y, k).unwrap(), fit_knn(&xp, &yp, k).unwrap());
        for _ in 0..10 {
            let q: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
            prop_assert_eq!(predict_knn(&a, &q).unwrap(), predict_knn(&b, &q).unwrap());
        }
    }

    #[test]
    fn accuracy_properties(preds in proptest::collection::vec(0u8..2, 1..40), half in 1usize..20) {
        let labels: Vec<u8> = (0..2 * half).map(|i| u8::from(i >= half)).collect();
        let preds: Vec<u8> = preds.iter().cycle().take(labels.len()).copied().collect();
        let acc = accuracy(&confusion(&preds, &labels).unwrap());
        prop_assert!((0.0..=1.0).contains(&acc));
        let inverted: Vec<u8> = preds.iter().map(|p| 1 - p).collect();
        prop_assert!((accuracy(&confusion(&inverted, &labels).unwrap()) - (1.0 - acc)).abs() < 1e-12);
        prop_assert_eq!(accuracy(&confusion(&labels, &preds).unwrap()), acc);
        prop_assert_eq!(accuracy(&confusion(&labels, &labels).unwrap()), 1.0);
    }

    #[test]
    fn average_linkage_heights_never_decrease(seed in 0u64..10_000, n in 2usize..25) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pts: Vec<Vec<f64>> = (0..n).map(|_| (0..3).map(|_| rng.gen_range(0.0..1.0)).collect()).collect();
        let d = linkage(&pts, Linkage::Average).unwrap();
        prop_assert_eq!(d.merges.len(), n - 1);
        prop_assert!(d.merges.windows(2).all(|w| w[0].height <= w[1].height + 1e-12));
    }

    #[test]
    fn fitted_map_beats_identity_on_its_fitting_set(seed in 0u64..10_000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<Vec<f64>> = (0..30).map(|_| (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        let gx: Vec<Vec<f64>> = x.iter().map(|r| r.iter().map(|v| v * 0.7 + rng.gen_range(-0.2..0.2)).collect()).collect();
        let map = estimate_map(&x, &gx, 1e-12).unwrap();
        // pairs (x, g x) read as (g^-1 y, y)
        let fitted = equivariance_error_pairs(&gx, &x, &map).unwrap();
        prop_assert!(fitted.is_finite() && fitted >= 0.0);
        // least squares minimizes the squared residual; compare in that norm
        let sq = |m: &EquivarianceMap| -> f64 {
            x.iter().zip(&gx).map(|(a, b)| m.apply(a).unwrap().iter().zip(b).map(|(p, q)| (p - q).powi(2)).sum::<f64>()).sum()
        };
        prop_assert!(sq(&map) <= sq(&EquivarianceMap::identity(4)) + 1e-9);
    }
}

#[test]
fn svm_solution_satisfies_kkt_on_separable_toy() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut x = Vec::new();
    let mut y = Vec::new();
    for i in 0..60 {
        let c = if i % 2 == 0 { -1.5 } else { 1.5 };
        x.push(vec![c + rng.gen_range(-0.5..0.5), rng.gen_range(-1.0..1.0)]);
        y.push((i % 2) as u8);
    }
    let params = SvmParams { c: 10.0, gamma: Some(0.5), ..SvmParams::default() };
    let model = fit_svm_rbf(&x, &y, &params).unwrap();
    assert!(model.converged);
    for (a, (s, l)) in model.alphas.iter().zip(model.support.iter().zip(&model.labels)) {
        assert!(*a >= 0.0 && *a <= params.c);
        if *a > 1e-8 && *a < params.c - 1e-8 {
            assert!((l * model.decision(s) - 1.0).abs() <= 10.0 * params.tol, "margin {}", l * model.decision(s));
        }
    }
    let correct = x.iter().zip(&y).filter(|(p, l)| model.predict(p).unwrap() == **l).count();
    assert_eq!(correct, x.len());
}

#[test]
fn forest_is_deterministic_and_fits_pure_splits() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let x: Vec<Vec<f64>> = (0..80).map(|_| (0..4).map(|_| rng.gen_range(0.0..1.0)).collect()).collect();
    let y: Vec<u8> = x.iter().map(|r| u8::from(r[0] > 0.5)).collect();
    let a = fit_rf(&x, &y, 25, 7).unwrap();
    let b = fit_rf(&x, &y, 25, 7).unwrap();
    assert_eq!(a, b);
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    let correct = x.iter().zip(&y).filter(|(p, l)| predict_rf(&a, p).unwrap() == **l).count();
    assert!(correct as f64 / x.len() as f64 >= 0.95);
}

#[test]
fn rotation_round_trip_loses_little_on_the_central_disk() {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let angles = [5.0, 10.0, 30.0, 45.0, 77.0, 135.0, 200.0, -33.0];
    for _ in 0..50 {
        let x = smooth_image(&mut rng, 28);
        for deg in angles {
            let t = GroupTransform::rotation(deg).unwrap();
            let back = apply(&t.inverse(), &apply(&t, &x));
            assert!(central_disk_mae(x.pixels(), back.pixels(), 28, 28) <= SMOOTH_ROUND_TRIP_BOUND);
        }
    }
    let digits = mnist5k();
    for deg in angles {
        let t = GroupTransform::rotation(deg).unwrap();
        let errs: Vec<f64> = digits
            .images
            .iter()
            .step_by(25)
            .map(|x| central_disk_mae(x.pixels(), apply(&t.inverse(), &apply(&t, x)).pixels(), 28, 28))
            .collect();
        let worst = errs.iter().copied().fold(0.0, f64::max);
        let mean = errs.iter().sum::<f64>() / errs.len() as f64;
        assert!(worst <= DIGIT_ROUND_TRIP_BOUND, "{deg}: worst {worst}");
        assert!(mean <= DIGIT_ROUND_TRIP_MEAN_BOUND, "{deg}: mean {mean}");
    }
}

#[test]
fn ieneo_is_approximately_rotation_equivariant() {
    let digits = mnist5k();
    for (k, x) in digits.images.iter().step_by(100).enumerate() {
        let op = sample_ieneo(4, 3, k as u64).unwrap();
        let out = apply_ieneo_grid(&op, &x.to_grid()).unwrap();
        for t in icnn::transform::sweep_family(Family::Rotation) {
            let lhs = apply_ieneo_grid(&op, &apply(&t, x).to_grid()).unwrap();
            let rhs = apply_grid(&t, &out);
            assert!(central_disk_mae(&lhs.values, &rhs.values, 28, 28) <= SMOOTH_ROUND_TRIP_BOUND + 0.01);
        }
    }
}

fn relative_change(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
    (num / a.iter().map(|x| x * x).sum::<f64>()).sqrt()
}

/// Mean relative L2 change of scattering and of raw pixels under a 1-px
/// shift, over 100 digits; each digit's scattering change must be below its
/// pixel change.
fn shift_stability(scales: u32) -> (f64, f64) {
    let digits = mnist5k();
    let bank = build_filter_bank(28, scales, 8).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(51);
    let mut idx: Vec<usize> = (0..digits.len()).collect();
    idx.shuffle(&mut rng);
    let (mut scat, mut raw) = (0.0, 0.0);
    for (n, &i) in idx.iter().take(100).enumerate() {
        let x = &digits.images[i];
        let t = GroupTransform::translation(if n % 2 == 0 { 1 } else { -1 }, 0);
        let shifted = apply(&t, x);
        let s = relative_change(&scatter(x, &bank, 1).unwrap().values, &scatter(&shifted, &bank, 1).unwrap().values);
        let r = relative_change(x.pixels(), shifted.pixels());
        assert!(s < r, "digit {i}: scattering change {s} not below pixel change {r}");
        scat += s / 100.0;
        raw += r / 100.0;
    }
    (scat, raw)
}

#[test]
fn scattering_is_more_shift_stable_than_pixels() {
    let (scat, raw) = shift_stability(2);
    assert!(scat <= 0.27 && scat < raw, "J=2: {scat} vs pixels {raw}");
    let (scat, raw) = shift_stability(3);
    assert!(scat <= 0.15 && scat < raw, "J=3: {scat} vs pixels {raw}");
}

#[test]
fn sweep_on_digits_is_finite_and_deterministic() {
    let digits = mnist5k();
    let pick: Vec<Image> = (0..50).map(|i| digits.images[i * 97 % digits.len()].clone()).collect();
    let (fit, eval) = pick.split_at(25);
    // 7x7 average pooling keeps the system small
    let pool = |x: &Image| -> icnn::Result<Vec<f64>> {
        Ok((0..49)
            .map(|b| {
                let (br, bc) = (b / 7 * 4, b % 7 * 4);
                (0..16).map(|k| x.get(br + k / 4, bc + k % 4)).sum::<f64>() / 16.0
            })
            .collect())
    };
    let a = run_sweep(&pool, Provenance::External, fit, eval, Ridge::default(), 3).unwrap();
    let b = run_sweep(&pool, Provenance::External, fit, eval, Ridge::default(), 3).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.rows.len(), 1 + 20 + 9 + 2);
    for r in &a.rows {
        for v in [r.e_q, r.control_e_q, r.identity_map_e_q] {
            assert!(v.is_finite() && v >= 0.0, "{}: {v}", r.transform);
        }
    }
    for fam in &a.families {
        let members: Vec<f64> = a.rows.iter().filter(|r| r.family == Some(fam.family)).map(|r| r.e_q).collect();
        assert_eq!(members.len(), fam.members);
        assert!((fam.e_q - members.iter().sum::<f64>() / members.len() as f64).abs() < 1e-12);
    }
    let max_shift = a
        .rows
        .iter()
        .filter_map(|r| match r.transform.parse::<GroupTransform>().unwrap() {
            GroupTransform::Translation { dx, dy } => Some(dx.abs().max(dy.abs())),
            _ => None,
        })
        .max();
    assert_eq!(max_shift, Some(5));
}
