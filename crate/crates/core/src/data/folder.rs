use std::fs;
use std::path::{Path, PathBuf};

use super::{luma, Image, LabeledImageSet};
use crate::error::{Error, Result};

fn sorted_entries(dir: &Path, want_dirs: bool) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir)? {
        let entry = entry?;
        let ty = entry.file_type()?;
        if (want_dirs && ty.is_dir()) || (!want_dirs && ty.is_file()) {
            out.push(entry.path());
        }
    }
    out.sort();
    Ok(out)
}

/// Bilinear resampling with pixel-center alignment and edge clamping.
pub(crate) fn resize_bilinear(src: &[f64], h: usize, w: usize, out_h: usize, out_w: usize) -> Vec<f64> {
    let sample = |r: f64, c: f64| {
        let r = r.clamp(0.0, (h - 1) as f64);
        let c = c.clamp(0.0, (w - 1) as f64);
        let (r0, c0) = (r.floor() as usize, c.floor() as usize);
        let (r1, c1) = ((r0 + 1).min(h - 1), (c0 + 1).min(w - 1));
        let (fr, fc) = (r - r0 as f64, c - c0 as f64);
        let top = src[r0 * w + c0] * (1.0 - fc) + src[r0 * w + c1] * fc;
        let bottom = src[r1 * w + c0] * (1.0 - fc) + src[r1 * w + c1] * fc;
        top * (1.0 - fr) + bottom * fr
    };
    let (sy, sx) = (h as f64 / out_h as f64, w as f64 / out_w as f64);
    let mut out = Vec::with_capacity(out_h * out_w);
    for r in 0..out_h {
        for c in 0..out_w {
            out.push(sample((r as f64 + 0.5) * sy - 0.5, (c as f64 + 0.5) * sx - 0.5));
        }
    }
    out
}

fn decode(path: &Path, side: usize) -> Option<Image> {
    let rgb = image::open(path).ok()?.to_rgb8();
    let (w, h) = (rgb.width() as usize, rgb.height() as usize);
    if w == 0 || h == 0 {
        return None;
    }
    let gray: Vec<f64> = rgb.pixels().map(|p| luma(p[0], p[1], p[2])).collect();
    Image::from_clamped(side, side, resize_bilinear(&gray, h, w, side, side)).ok()
}

/// Load a directory with one subdirectory per class, decoding every file as
/// PNG/JPEG, converting to grayscale and resizing to `side`x`side`.
///
/// Class ids follow the lexicographic order of the subdirectory names.
/// Undecodable files are skipped and counted in `skipped`.
pub fn load_image_folder(root: impl AsRef<Path>, side: usize) -> Result<LabeledImageSet> {
    if side == 0 {
        return Err(Error::param("image side must be positive"));
    }
    let root = root.as_ref();
    let class_dirs = sorted_entries(root, true)?;
    let mut images = Vec::new();
    let mut labels = Vec::new();
    let mut names = Vec::new();
    let mut skipped = 0;
    for (class_id, dir) in class_dirs.iter().enumerate() {
        names.push(dir.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default());
        for file in sorted_entries(dir, false)? {
            match decode(&file, side) {
                Some(im) => {
                    images.push(im);
                    labels.push(class_id as u32);
                }
                None => {
                    log::warn!("skipping undecodable file {}", file.display());
                    skipped += 1;
                }
            }
        }
    }
    if images.is_empty() {
        return Err(Error::input(format!("no decodable images under {}", root.display())));
    }
    let mut set = LabeledImageSet::new(images, labels)?.with_class_names(names);
    set.skipped = skipped;
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;
    use image::{GrayImage, Luma, Rgb, RgbImage};

    #[test]
    fn classes_follow_lexicographic_order() {
        let dir = tempfile::tempdir().unwrap();
        for class in ["dog", "cat"] {
            let sub = dir.path().join(class);
            fs::create_dir(&sub).unwrap();
            for i in 0..5 {
                let img = GrayImage::from_fn(10, 7, |x, y| Luma([((x + y + i) * 10) as u8]));
                img.save(sub.join(format!("{i}.png"))).unwrap();
            }
        }
        let set = load_image_folder(dir.path(), 64).unwrap();
        assert_eq!(set.len(), 10);
        assert!(set.images.iter().all(|im| im.height() == 64 && im.width() == 64));
        assert_eq!(set.class_names.as_deref().unwrap(), &["cat".to_string(), "dog".to_string()]);
        assert_eq!(set.class_counts(), vec![5, 5]);
    }

    #[test]
    fn white_png_stays_constant() {
        let dir = tempfile::tempdir().unwrap();
        let sub = dir.path().join("a");
        fs::create_dir(&sub).unwrap();
        RgbImage::from_pixel(13, 9, Rgb([255, 255, 255])).save(sub.join("w.png")).unwrap();
        fs::write(sub.join("broken.png"), b"not an image").unwrap();
        let set = load_image_folder(dir.path(), 16).unwrap();
        assert_eq!(set.len(), 1);
        assert_eq!(set.skipped, 1);
        assert!(set.images[0].pixels().iter().all(|&v| (v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn empty_root_is_input_error() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(load_image_folder(dir.path(), 8), Err(Error::Input(_))));
    }

    #[test]
    fn resize_preserves_constants() {
        let out = resize_bilinear(&[0.3; 12], 3, 4, 7, 5);
        assert!(out.iter().all(|&v| (v - 0.3).abs() < 1e-15));
    }
}
