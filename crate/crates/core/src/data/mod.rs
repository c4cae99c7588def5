//! Image datasets: loaders for IDX, CIFAR-10 and image folders, plus
//! seeded carving of balanced binary tasks.

mod cifar;
mod folder;
mod idx;
pub mod task;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use cifar::{load_cifar10, CIFAR10_CLASSES};
pub use folder::load_image_folder;
pub use idx::{load_idx, read_idx};
pub use task::{make_binary_task, split, BinaryTask};

/// A grayscale image with row-major intensities in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Image {
    height: usize,
    width: usize,
    pixels: Vec<f64>,
}

impl Image {
    pub fn new(height: usize, width: usize, pixels: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::input(format!("image dimensions must be positive, got {height}x{width}")));
        }
        if pixels.len() != height * width {
            return Err(Error::input(format!(
                "expected {} pixels for a {height}x{width} image, got {}",
                height * width,
                pixels.len()
            )));
        }
        if let Some(bad) = pixels.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::input(format!("intensity {bad} outside [0, 1]")));
        }
        Ok(Image { height, width, pixels })
    }

    /// Build an image by clamping arbitrary values into `[0, 1]`.
    /// Non-finite values become 0.
    pub fn from_clamped(height: usize, width: usize, values: Vec<f64>) -> Result<Self> {
        let pixels = values
            .into_iter()
            .map(|v| if v.is_finite() { v.clamp(0.0, 1.0) } else { 0.0 })
            .collect();
        Image::new(height, width, pixels)
    }

    pub fn constant(height: usize, width: usize, value: f64) -> Result<Self> {
        Image::new(height, width, vec![value; height * width])
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut pixels = Vec::with_capacity(height * width);
        for r in 0..height {
            for c in 0..width {
                pixels.push(f(r, c));
            }
        }
        Image::new(height, width, pixels)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.pixels[row * self.width + col]
    }

    pub fn into_grid(self) -> Grid {
        Grid { height: self.height, width: self.width, values: self.pixels }
    }

    pub fn to_grid(&self) -> Grid {
        self.clone().into_grid()
    }

    /// Square side length, or an input error for non-square images.
    pub fn side(&self) -> Result<usize> {
        if self.height == self.width {
            Ok(self.height)
        } else {
            Err(Error::input(format!("expected a square image, got {}x{}", self.height, self.width)))
        }
    }
}

/// A real-valued 2-D field with no range restriction, e.g. an operator
/// response. Row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub height: usize,
    pub width: usize,
    pub values: Vec<f64>,
}

impl Grid {
    pub fn new(height: usize, width: usize, values: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 || values.len() != height * width {
            return Err(Error::input(format!(
                "grid of {} values does not fit {height}x{width}",
                values.len()
            )));
        }
        Ok(Grid { height, width, values })
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.width + col]
    }

    pub fn max_abs_diff(&self, other: &Grid) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// An ordered collection of images with one class id per image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledImageSet {
    pub images: Vec<Image>,
    pub labels: Vec<u32>,
    pub class_names: Option<Vec<String>>,
    /// Files that could not be decoded and were skipped during loading.
    #[serde(default)]
    pub skipped: usize,
}

impl LabeledImageSet {
    pub fn new(images: Vec<Image>, labels: Vec<u32>) -> Result<Self> {
        if images.len() != labels.len() {
            return Err(Error::Consistency(format!(
                "{} images but {} labels",
                images.len(),
                labels.len()
            )));
        }
        Ok(LabeledImageSet { images, labels, class_names: None, skipped: 0 })
    }

    pub fn with_class_names(mut self, names: Vec<String>) -> Self {
        self.class_names = Some(names);
        self
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    /// Subset by source indices, preserving the given order.
    pub fn select(&self, indices: &[usize]) -> LabeledImageSet {
        LabeledImageSet {
            images: indices.iter().map(|&i| self.images[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            class_names: self.class_names.clone(),
            skipped: 0,
        }
    }

    /// Count of images per class id, indexed by class id.
    pub fn class_counts(&self) -> Vec<usize> {
        let max = self.labels.iter().copied().max().map_or(0, |m| m as usize + 1);
        let mut counts = vec![0; max];
        for &l in &self.labels {
            counts[l as usize] += 1;
        }
        counts
    }

    /// Labels as binary `u8`, failing if any label is not 0 or 1.
    pub fn binary_labels(&self) -> Result<Vec<u8>> {
        self.labels
            .iter()
            .map(|&l| match l {
                0 | 1 => Ok(l as u8),
                other => Err(Error::input(format!("label {other} is not binary"))),
            })
            .collect()
    }

    /// Images flattened to raw pixel vectors.
    pub fn flattened(&self) -> Vec<Vec<f64>> {
        self.images.iter().map(|im| im.pixels().to_vec()).collect()
    }
}

/// BT.601 luma of an 8-bit RGB triple, scaled to `[0, 1]`.
pub(crate) fn luma(r: u8, g: u8, b: u8) -> f64 {
    let y = (0.299 * f64::from(r) + 0.587 * f64::from(g) + 0.114 * f64::from(b)) / 255.0;
    y.clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn image_rejects_out_of_range_and_bad_shapes() {
        assert!(Image::new(2, 2, vec![0.0, 0.5, 1.0, 1.5]).is_err());
        assert!(Image::new(0, 2, vec![]).is_err());
        assert!(Image::new(2, 2, vec![0.0; 3]).is_err());
        assert!(Image::new(2, 2, vec![0.0; 4]).is_ok());
    }

    #[test]
    fn clamped_construction() {
        let im = Image::from_clamped(1, 3, vec![-0.5, 0.25, f64::NAN]).unwrap();
        assert_eq!(im.pixels(), &[0.0, 0.25, 0.0]);
    }

    #[test]
    fn luma_weights() {
        assert!((luma(255, 255, 255) - 1.0).abs() < 1e-12);
        assert!((luma(255, 0, 0) - 0.299).abs() < 1e-12);
        assert_eq!(luma(0, 0, 0), 0.0);
    }

    #[test]
    fn set_length_mismatch() {
        let im = Image::constant(1, 1, 0.0).unwrap();
        assert!(matches!(LabeledImageSet::new(vec![im], vec![0, 1]), Err(Error::Consistency(_))));
    }
}
