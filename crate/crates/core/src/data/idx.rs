use std::fs;
use std::io::{self, Read};
use std::path::Path;

use flate2::read::GzDecoder;

use super::{Image, LabeledImageSet};
use crate::error::{Error, Result};

const IMAGE_MAGIC: u32 = 0x0000_0803;
const LABEL_MAGIC: u32 = 0x0000_0801;

/// A decoded IDX tensor of unsigned bytes.
#[derive(Debug, Clone, PartialEq)]
pub struct IdxTensor {
    pub dims: Vec<usize>,
    pub data: Vec<u8>,
}

/// Read a file, transparently gunzipping it when it starts with the gzip magic.
fn read_maybe_gz(path: &Path) -> Result<Vec<u8>> {
    let raw = fs::read(path)?;
    if raw.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        GzDecoder::new(raw.as_slice()).read_to_end(&mut out)?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

fn be_u32(bytes: &[u8], at: usize) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| truncated("header"))
}

fn truncated(what: &str) -> Error {
    Error::Io(io::Error::new(io::ErrorKind::UnexpectedEof, format!("truncated IDX {what}")))
}

/// Parse an unsigned-byte IDX tensor with the given expected magic number.
pub fn read_idx(bytes: &[u8], expected_magic: u32) -> Result<IdxTensor> {
    let magic = be_u32(bytes, 0)?;
    if magic != expected_magic {
        return Err(Error::format(format!(
            "bad IDX magic {magic:#010x}, expected {expected_magic:#010x}"
        )));
    }
    let ndims = (magic & 0xff) as usize;
    let dims = (0..ndims)
        .map(|i| be_u32(bytes, 4 + 4 * i).map(|d| d as usize))
        .collect::<Result<Vec<_>>>()?;
    let offset = 4 + 4 * ndims;
    let count: usize = dims.iter().product();
    let data = bytes.get(offset..offset + count).ok_or_else(|| truncated("payload"))?;
    Ok(IdxTensor { dims, data: data.to_vec() })
}

/// Load an IDX image file and its label file (both optionally gzipped).
pub fn load_idx(images_path: impl AsRef<Path>, labels_path: impl AsRef<Path>) -> Result<LabeledImageSet> {
    let images = read_idx(&read_maybe_gz(images_path.as_ref())?, IMAGE_MAGIC)?;
    let labels = read_idx(&read_maybe_gz(labels_path.as_ref())?, LABEL_MAGIC)?;
    let (n, h, w) = (images.dims[0], images.dims[1], images.dims[2]);
    if labels.dims[0] != n {
        return Err(Error::Consistency(format!(
            "image file holds {n} records but label file holds {}",
            labels.dims[0]
        )));
    }
    if h == 0 || w == 0 {
        return Err(Error::format("IDX images have a zero dimension"));
    }
    let images = images
        .data
        .chunks_exact(h * w)
        .map(|chunk| Image::new(h, w, chunk.iter().map(|&b| f64::from(b) / 255.0).collect()))
        .collect::<Result<Vec<_>>>()?;
    let labels = labels.data.iter().map(|&b| u32::from(b)).collect();
    LabeledImageSet::new(images, labels)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) fn idx_images(n: u32, h: u32, w: u32, data: &[u8]) -> Vec<u8> {
        let mut out = IMAGE_MAGIC.to_be_bytes().to_vec();
        for d in [n, h, w] {
            out.extend_from_slice(&d.to_be_bytes());
        }
        out.extend_from_slice(data);
        out
    }

    pub(crate) fn idx_labels(labels: &[u8]) -> Vec<u8> {
        let mut out = LABEL_MAGIC.to_be_bytes().to_vec();
        out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
        out.extend_from_slice(labels);
        out
    }

    fn write_pair(images: &[u8], labels: &[u8]) -> (tempfile::TempDir, std::path::PathBuf, std::path::PathBuf) {
        let dir = tempfile::tempdir().unwrap();
        let ip = dir.path().join("images");
        let lp = dir.path().join("labels");
        fs::write(&ip, images).unwrap();
        fs::write(&lp, labels).unwrap();
        (dir, ip, lp)
    }

    #[test]
    fn single_two_by_two_image() {
        let (_d, ip, lp) = write_pair(&idx_images(1, 2, 2, &[0, 255, 0, 255]), &idx_labels(&[7]));
        let set = load_idx(ip, lp).unwrap();
        assert_eq!(set.len(), 1);
        assert_eq!(set.images[0].pixels(), &[0.0, 1.0, 0.0, 1.0]);
        assert_eq!(set.labels, vec![7]);
    }

    #[test]
    fn count_mismatch_is_consistency_error() {
        let (_d, ip, lp) = write_pair(&idx_images(9, 1, 1, &[0; 9]), &idx_labels(&[0; 10]));
        assert!(matches!(load_idx(ip, lp), Err(Error::Consistency(_))));
    }

    #[test]
    fn bad_magic_is_format_error() {
        let mut bytes = idx_images(1, 1, 1, &[0]);
        bytes[2] = 0x09;
        let (_d, ip, lp) = write_pair(&bytes, &idx_labels(&[0]));
        assert!(matches!(load_idx(ip, lp), Err(Error::Format(_))));
    }

    #[test]
    fn truncated_payload_is_io_error() {
        let (_d, ip, lp) = write_pair(&idx_images(2, 2, 2, &[0; 5]), &idx_labels(&[0, 1]));
        match load_idx(ip, lp) {
            Err(Error::Io(e)) => assert_eq!(e.kind(), io::ErrorKind::UnexpectedEof),
            other => panic!("expected I/O error, got {other:?}"),
        }
    }

    #[test]
    fn gzipped_files_are_decoded() {
        use flate2::write::GzEncoder;
        use std::io::Write;
        let mut enc = GzEncoder::new(Vec::new(), flate2::Compression::default());
        enc.write_all(&idx_images(1, 1, 2, &[51, 102])).unwrap();
        let (_d, ip, lp) = write_pair(&enc.finish().unwrap(), &idx_labels(&[3]));
        let set = load_idx(ip, lp).unwrap();
        assert_eq!(set.images[0].pixels(), &[0.2, 0.4]);
    }
}
