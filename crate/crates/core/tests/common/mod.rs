#![allow(dead_code)]

pub mod oracle;

use std::path::PathBuf;

use icnn::data::{load_idx, LabeledImageSet};

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests").join("data").join(name)
}

/// 500 MNIST digits per class (grouped by class), shipped gzipped with the
/// tests.
pub fn mnist5k() -> LabeledImageSet {
    load_idx(fixture("mnist5k-images-idx3-ubyte.gz"), fixture("mnist5k-labels-idx1-ubyte.gz")).expect("fixture")
}

/// Mean absolute difference over the disk of radius `min(h, w) / 4` about
/// the image center.
pub fn central_disk_mae(a: &[f64], b: &[f64], h: usize, w: usize) -> f64 {
    let (cy, cx) = ((h as f64 - 1.0) / 2.0, (w as f64 - 1.0) / 2.0);
    let r = h.min(w) as f64 / 4.0;
    let (mut sum, mut n) = (0.0, 0usize);
    for i in 0..h {
        for j in 0..w {
            if (i as f64 - cy).hypot(j as f64 - cx) <= r {
                sum += (a[i * w + j] - b[i * w + j]).abs();
                n += 1;
            }
        }
    }
    sum / n as f64
}
