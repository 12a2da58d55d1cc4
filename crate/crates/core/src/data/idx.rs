//! Reader and writer for the IDX archives MNIST ships in.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;

pub const TRAIN_IMAGES: &str = "train-images-idx3-ubyte";
pub const TRAIN_LABELS: &str = "train-labels-idx1-ubyte";

/// One 28×28 digit, pixels scaled to `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledImage {
    pub label: u8,
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<f64>,
}

fn be_u32(bytes: &[u8], offset: usize) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes(b.try_into().unwrap()))
        .ok_or_else(|| Error::Format {
            offset: offset as u64,
            message: "truncated header".into(),
        })
}

fn expect_magic(bytes: &[u8], magic: u32) -> Result<()> {
    let got = be_u32(bytes, 0)?;
    if got != magic {
        return Err(Error::Format {
            offset: 0,
            message: format!("magic 0x{got:08x}, expected 0x{magic:08x}"),
        });
    }
    Ok(())
}

/// Parses an IDX image archive: `(rows, cols, images)`.
pub fn parse_images(bytes: &[u8]) -> Result<(usize, usize, Vec<Vec<f64>>)> {
    expect_magic(bytes, IMAGES_MAGIC)?;
    let count = be_u32(bytes, 4)? as usize;
    let rows = be_u32(bytes, 8)? as usize;
    let cols = be_u32(bytes, 12)? as usize;
    let size = rows * cols;
    let body = &bytes[16..];
    if body.len() != count * size {
        return Err(Error::Format {
            offset: 16 + (body.len().min(count * size)) as u64,
            message: format!(
                "header declares {count} images of {rows}×{cols} ({} bytes), body has {}",
                count * size,
                body.len()
            ),
        });
    }
    let images = body
        .chunks_exact(size.max(1))
        .take(count)
        .map(|c| c.iter().map(|&b| f64::from(b) / 255.0).collect())
        .collect();
    Ok((rows, cols, images))
}

pub fn parse_labels(bytes: &[u8]) -> Result<Vec<u8>> {
    expect_magic(bytes, LABELS_MAGIC)?;
    let count = be_u32(bytes, 4)? as usize;
    let body = &bytes[8..];
    if body.len() != count {
        return Err(Error::Format {
            offset: 8 + body.len().min(count) as u64,
            message: format!("header declares {count} labels, body has {}", body.len()),
        });
    }
    Ok(body.to_vec())
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

/// Loads `train-images-idx3-ubyte` and `train-labels-idx1-ubyte` from `dir`.
pub fn load_mnist(dir: &Path) -> Result<Vec<LabeledImage>> {
    load_mnist_files(&dir.join(TRAIN_IMAGES), &dir.join(TRAIN_LABELS))
}

pub fn load_mnist_files(images: &Path, labels: &Path) -> Result<Vec<LabeledImage>> {
    let (rows, cols, imgs) = parse_images(&read(images)?)?;
    let labels = parse_labels(&read(labels)?)?;
    if labels.len() != imgs.len() {
        return Err(Error::Data(format!(
            "{} images but {} labels",
            imgs.len(),
            labels.len()
        )));
    }
    Ok(imgs
        .into_iter()
        .zip(labels)
        .map(|(pixels, label)| LabeledImage {
            label,
            rows,
            cols,
            pixels,
        })
        .collect())
}

pub fn encode_images(rows: usize, cols: usize, images: &[Vec<u8>]) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + images.len() * rows * cols);
    out.extend_from_slice(&IMAGES_MAGIC.to_be_bytes());
    out.extend_from_slice(&(images.len() as u32).to_be_bytes());
    out.extend_from_slice(&(rows as u32).to_be_bytes());
    out.extend_from_slice(&(cols as u32).to_be_bytes());
    for img in images {
        out.extend_from_slice(img);
    }
    out
}

pub fn encode_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&LABELS_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pixel_scaling_and_count() {
        let bytes = encode_images(2, 2, &[vec![0, 255, 51, 0], vec![255; 4]]);
        let (r, c, imgs) = parse_images(&bytes).unwrap();
        assert_eq!((r, c, imgs.len()), (2, 2, 2));
        assert_eq!(imgs[0], vec![0.0, 1.0, 0.2, 0.0]);
        assert_eq!(parse_labels(&encode_labels(&[3, 7, 1])).unwrap(), vec![3, 7, 1]);
    }

    #[test]
    fn bad_magic_and_truncation_report_offsets() {
        let mut bytes = encode_images(2, 2, &[vec![1; 4]]);
        bytes[3] = 0x01;
        assert!(matches!(parse_images(&bytes), Err(Error::Format { offset: 0, .. })));
        let bytes = encode_images(2, 2, &[vec![1; 4], vec![2; 4]]);
        match parse_images(&bytes[..bytes.len() - 1]) {
            Err(Error::Format { offset, .. }) => assert_eq!(offset, 23),
            other => panic!("unexpected {other:?}"),
        }
        assert!(parse_labels(&encode_images(1, 1, &[vec![0]])).is_err());
        assert!(parse_labels(&[0, 0]).is_err());
    }
}
