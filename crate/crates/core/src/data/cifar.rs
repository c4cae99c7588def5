use std::fs;
use std::path::Path;

use super::{luma, Image, LabeledImageSet};
use crate::error::{Error, Result};

const SIDE: usize = 32;
const PLANE: usize = SIDE * SIDE;
const RECORD: usize = 1 + 3 * PLANE;

pub const CIFAR10_CLASSES: [&str; 10] = [
    "airplane",
    "automobile",
    "bird",
    "cat",
    "deer",
    "dog",
    "frog",
    "horse",
    "ship",
    "truck",
];

fn decode_batch(bytes: &[u8], images: &mut Vec<Image>, labels: &mut Vec<u32>) -> Result<()> {
    if bytes.len() % RECORD != 0 {
        return Err(Error::format(format!(
            "CIFAR-10 batch of {} bytes is not a multiple of {RECORD}",
            bytes.len()
        )));
    }
    for record in bytes.chunks_exact(RECORD) {
        let (r, rest) = record[1..].split_at(PLANE);
        let (g, b) = rest.split_at(PLANE);
        let pixels = (0..PLANE).map(|i| luma(r[i], g[i], b[i])).collect();
        images.push(Image::new(SIDE, SIDE, pixels)?);
        labels.push(u32::from(record[0]));
    }
    Ok(())
}

/// Load one or more CIFAR-10 binary batches as 32x32 grayscale images.
pub fn load_cifar10<P: AsRef<Path>>(batch_paths: &[P]) -> Result<LabeledImageSet> {
    let mut images = Vec::new();
    let mut labels = Vec::new();
    for path in batch_paths {
        decode_batch(&fs::read(path)?, &mut images, &mut labels)?;
    }
    Ok(LabeledImageSet::new(images, labels)?
        .with_class_names(CIFAR10_CLASSES.iter().map(|s| s.to_string()).collect()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(label: u8, r: u8, g: u8, b: u8) -> Vec<u8> {
        let mut rec = vec![label];
        for v in [r, g, b] {
            rec.extend(std::iter::repeat(v).take(PLANE));
        }
        rec
    }

    fn load_bytes(bytes: &[u8]) -> Result<LabeledImageSet> {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("data_batch_1.bin");
        fs::write(&p, bytes).unwrap();
        load_cifar10(&[p])
    }

    #[test]
    fn white_record_is_constant_one() {
        let set = load_bytes(&record(4, 255, 255, 255)).unwrap();
        assert_eq!((set.images[0].height(), set.images[0].width()), (32, 32));
        assert!(set.images[0].pixels().iter().all(|&v| (v - 1.0).abs() < 1e-12));
        assert_eq!(set.labels, vec![4]);
    }

    #[test]
    fn pure_red_is_luma_weight() {
        let set = load_bytes(&record(0, 255, 0, 0)).unwrap();
        assert!(set.images[0].pixels().iter().all(|&v| (v - 0.299).abs() < 1e-12));
    }

    #[test]
    fn multiple_records_and_batches() {
        let mut bytes = record(1, 0, 0, 0);
        bytes.extend(record(9, 10, 20, 30));
        let set = load_bytes(&bytes).unwrap();
        assert_eq!(set.labels, vec![1, 9]);
        assert_eq!(set.class_names.as_ref().unwrap()[9], "truck");
    }

    #[test]
    fn wrong_size_is_format_error() {
        assert!(matches!(load_bytes(&[0u8; RECORD + 1]), Err(Error::Format(_))));
    }
}
