//! Stroke-rendered stand-in digits written in the MNIST IDX layout, for
//! environments without the real archives.

use std::f64::consts::TAU;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::idx::{self, LabeledImage, TRAIN_IMAGES, TRAIN_LABELS};
use crate::error::{Error, Result};

const SIZE: usize = 28;

fn ellipse(cx: f64, cy: f64, rx: f64, ry: f64) -> Vec<(f64, f64)> {
    (0..=28)
        .map(|i| {
            let t = i as f64 / 28.0 * TAU;
            (cx + rx * t.cos(), cy + ry * t.sin())
        })
        .collect()
}

/// Polylines in a unit box, x to the right and y downward.
fn strokes(digit: u8) -> Vec<Vec<(f64, f64)>> {
    match digit {
        0 => vec![ellipse(0.5, 0.5, 0.28, 0.4)],
        1 => vec![vec![(0.33, 0.25), (0.52, 0.08), (0.52, 0.92)]],
        2 => vec![vec![
            (0.22, 0.3),
            (0.3, 0.14),
            (0.5, 0.08),
            (0.7, 0.14),
            (0.77, 0.3),
            (0.7, 0.47),
            (0.22, 0.9),
            (0.8, 0.9),
        ]],
        3 => vec![vec![
            (0.25, 0.15),
            (0.5, 0.08),
            (0.72, 0.18),
            (0.72, 0.37),
            (0.45, 0.5),
            (0.75, 0.6),
            (0.75, 0.8),
            (0.5, 0.92),
            (0.24, 0.85),
        ]],
        4 => vec![vec![(0.66, 0.92), (0.66, 0.08), (0.18, 0.65), (0.84, 0.65)]],
        5 => vec![vec![
            (0.76, 0.08),
            (0.3, 0.08),
            (0.27, 0.45),
            (0.55, 0.4),
            (0.76, 0.55),
            (0.76, 0.78),
            (0.55, 0.92),
            (0.24, 0.86),
        ]],
        6 => vec![vec![
            (0.7, 0.1),
            (0.45, 0.2),
            (0.3, 0.45),
            (0.28, 0.7),
            (0.4, 0.9),
            (0.6, 0.92),
            (0.75, 0.76),
            (0.7, 0.55),
            (0.5, 0.48),
            (0.3, 0.6),
        ]],
        7 => vec![vec![(0.2, 0.08), (0.8, 0.08), (0.45, 0.92)]],
        8 => vec![ellipse(0.5, 0.29, 0.2, 0.2), ellipse(0.5, 0.7, 0.25, 0.22)],
        _ => vec![
            ellipse(0.5, 0.32, 0.23, 0.22),
            vec![(0.73, 0.32), (0.66, 0.92)],
        ],
    }
}

fn segment_distance(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len_sq = dx * dx + dy * dy;
    let t = if len_sq == 0.0 {
        0.0
    } else {
        (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len_sq).clamp(0.0, 1.0)
    };
    let (qx, qy) = (a.0 + t * dx, a.1 + t * dy);
    ((p.0 - qx).powi(2) + (p.1 - qy).powi(2)).sqrt()
}

/// Renders one randomly perturbed digit as 784 bytes.
pub fn render_digit(digit: u8, rng: &mut impl Rng) -> Vec<u8> {
    let scale = rng.gen_range(17.0..21.0);
    let angle: f64 = rng.gen_range(-0.2..0.2);
    let shear: f64 = rng.gen_range(-0.15..0.15);
    let (ox, oy) = (rng.gen_range(-1.2..1.2), rng.gen_range(-1.2..1.2));
    let thickness = rng.gen_range(1.0..1.9);
    let (sin, cos) = angle.sin_cos();
    let map = |(x, y): (f64, f64)| {
        let (x, y) = (x - 0.5 + shear * (y - 0.5), y - 0.5);
        let (x, y) = (cos * x - sin * y, sin * x + cos * y);
        (14.0 + ox + scale * x, 14.0 + oy + scale * y)
    };
    let segments: Vec<((f64, f64), (f64, f64))> = strokes(digit)
        .into_iter()
        .flat_map(|line| {
            let pts: Vec<(f64, f64)> = line
                .into_iter()
                .map(|(x, y)| map((x + rng.gen_range(-0.015..0.015), y + rng.gen_range(-0.015..0.015))))
                .collect();
            pts.windows(2).map(|w| (w[0], w[1])).collect::<Vec<_>>()
        })
        .collect();

    let mut out = Vec::with_capacity(SIZE * SIZE);
    for r in 0..SIZE {
        for c in 0..SIZE {
            let p = (c as f64 + 0.5, r as f64 + 0.5);
            let d = segments
                .iter()
                .map(|(a, b)| segment_distance(p, *a, *b))
                .fold(f64::INFINITY, f64::min);
            let v = (thickness - d + 0.5).clamp(0.0, 1.0);
            out.push((v * 255.0).round() as u8);
        }
    }
    out
}

/// `per_label` digits of each class 0–9, interleaved by class.
pub fn synthetic_digits(per_label: usize, seed: u64) -> (Vec<Vec<u8>>, Vec<u8>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut images = Vec::with_capacity(per_label * 10);
    let mut labels = Vec::with_capacity(per_label * 10);
    for _ in 0..per_label {
        for digit in 0..10u8 {
            images.push(render_digit(digit, &mut rng));
            labels.push(digit);
        }
    }
    (images, labels)
}

/// Writes `train-images-idx3-ubyte` / `train-labels-idx1-ubyte` into `dir`.
pub fn write_synthetic_mnist(dir: &Path, per_label: usize, seed: u64) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let (images, labels) = synthetic_digits(per_label, seed);
    let img_path = dir.join(TRAIN_IMAGES);
    fs::write(&img_path, idx::encode_images(SIZE, SIZE, &images)).map_err(|e| Error::io(&img_path, e))?;
    let lbl_path = dir.join(TRAIN_LABELS);
    fs::write(&lbl_path, idx::encode_labels(&labels)).map_err(|e| Error::io(&lbl_path, e))?;
    Ok(())
}

/// In-memory equivalent of writing then loading synthetic IDX files.
pub fn synthetic_mnist(per_label: usize, seed: u64) -> Vec<LabeledImage> {
    let (images, labels) = synthetic_digits(per_label, seed);
    images
        .into_iter()
        .zip(labels)
        .map(|(bytes, label)| LabeledImage {
            label,
            rows: SIZE,
            cols: SIZE,
            pixels: bytes.iter().map(|b| f64::from(*b) / 255.0).collect(),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digits_have_ink_and_blank_border() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for d in 0..10 {
            let img = render_digit(d, &mut rng);
            let ink = img.iter().filter(|b| **b > 128).count();
            assert!(ink > 20, "digit {d} has {ink} lit pixels");
            assert!(img[..SIZE].iter().all(|b| *b == 0), "digit {d} touches the top row");
        }
    }

    #[test]
    fn deterministic() {
        assert_eq!(synthetic_digits(3, 9), synthetic_digits(3, 9));
    }
}
