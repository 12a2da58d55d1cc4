//! Evaluation metrics and report assembly.
//!
//! The Fréchet distance here embeds images by projecting flattened pixels
//! onto at most 64 principal components fitted on a reference set, then
//! compares Gaussian fits of the embeddings. Its values are not comparable
//! with Inception-based FID scores.

use std::path::Path;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::image::{ImageTensor, PIXELS, SIDE};
use crate::losses;

pub const EMBEDDING_DIM: usize = 64;
pub const COVARIANCE_EPS: f64 = 1e-6;

/// `10·log₁₀(R²/MSE)`; `+∞` when the images are identical.
pub fn psnr(a: &[f64], b: &[f64], peak: f64) -> f64 {
    assert_eq!(a.len(), b.len(), "psnr inputs must have equal length");
    let mse = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / a.len() as f64;
    if mse == 0.0 {
        return f64::INFINITY;
    }
    10.0 * (peak * peak / mse).log10()
}

/// Same global SSIM used by the training loss.
pub fn ssim_metric(a: &[f64], b: &[f64]) -> f64 {
    losses::ssim(a, b)
}

/// Mean and covariance of a set of feature vectors.
#[derive(Clone, Debug)]
pub struct GaussianSummary {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

impl GaussianSummary {
    /// Sample covariance plus `eps·I`.
    pub fn fit(features: &[Vec<f64>], eps: f64) -> Result<Self> {
        if features.len() < 2 {
            return Err(Error::shape("at least two samples are needed for a covariance"));
        }
        let d = features[0].len();
        let n = features.len();
        let data = DMatrix::from_fn(n, d, |i, j| features[i][j]);
        let mean = DVector::from_iterator(d, data.column_iter().map(|c| c.mean()));
        let centered = DMatrix::from_fn(n, d, |i, j| data[(i, j)] - mean[j]);
        let mut cov = centered.transpose() * &centered / (n as f64 - 1.0);
        for i in 0..d {
            cov[(i, i)] += eps;
        }
        Ok(Self { mean, cov })
    }
}

fn symmetric_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = SymmetricEigen::new((m + m.transpose()) * 0.5);
    let roots = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&roots) * eig.eigenvectors.transpose()
}

/// `‖μa − μb‖² + Tr(Σa + Σb − 2(Σa^½ Σb Σa^½)^½)`, clipped at zero.
pub fn frechet_from_summaries(a: &GaussianSummary, b: &GaussianSummary) -> f64 {
    let diff = (&a.mean - &b.mean).norm_squared();
    let root_a = symmetric_sqrt(&a.cov);
    let inner = &root_a * &b.cov * &root_a;
    let eig = SymmetricEigen::new((&inner + inner.transpose()) * 0.5);
    let cross: f64 = eig.eigenvalues.iter().map(|v| v.max(0.0).sqrt()).sum();
    (diff + a.cov.trace() + b.cov.trace() - 2.0 * cross).max(0.0)
}

/// Principal-component projection of flattened images.
#[derive(Clone, Debug)]
pub struct PcaEmbedding {
    mean: DVector<f64>,
    /// `k × 1024`, orthonormal rows.
    components: DMatrix<f64>,
}

impl PcaEmbedding {
    /// Fits up to `max_components` directions from the Gram matrix of the
    /// centered reference set; directions with negligible variance are dropped.
    pub fn fit(reference: &[ImageTensor], max_components: usize) -> Result<Self> {
        let n = reference.len();
        if n < 2 {
            return Err(Error::shape("at least two reference images are needed"));
        }
        let data = DMatrix::from_fn(n, PIXELS, |i, j| reference[i].as_slice()[j]);
        let mean = DVector::from_iterator(PIXELS, data.column_iter().map(|c| c.mean()));
        let centered = DMatrix::from_fn(n, PIXELS, |i, j| data[(i, j)] - mean[j]);
        let gram = &centered * centered.transpose();
        let eig = SymmetricEigen::new(gram);
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
        let top = eig.eigenvalues[order[0]].max(0.0);
        let keep: Vec<usize> = order
            .into_iter()
            .filter(|&i| eig.eigenvalues[i] > top * 1e-10 && eig.eigenvalues[i] > 0.0)
            .take(max_components)
            .collect();
        let mut components = DMatrix::zeros(keep.len().max(1), PIXELS);
        for (row, &i) in keep.iter().enumerate() {
            let u = eig.eigenvectors.column(i);
            let v = centered.transpose() * u / eig.eigenvalues[i].sqrt();
            components.row_mut(row).copy_from(&v.transpose());
        }
        Ok(Self { mean, components })
    }

    pub fn dim(&self) -> usize {
        self.components.nrows()
    }

    pub fn embed(&self, image: &ImageTensor) -> Vec<f64> {
        let x = DVector::from_column_slice(image.as_slice()) - &self.mean;
        (&self.components * x).iter().copied().collect()
    }
}

/// Fréchet distance under a fixed embedding.
#[derive(Clone, Debug)]
pub struct FrechetScorer {
    embedding: PcaEmbedding,
}

impl FrechetScorer {
    pub fn fit(reference: &[ImageTensor]) -> Result<Self> {
        Ok(Self {
            embedding: PcaEmbedding::fit(reference, EMBEDDING_DIM)?,
        })
    }

    pub fn summarize(&self, images: &[ImageTensor]) -> Result<GaussianSummary> {
        let feats: Vec<Vec<f64>> = images.iter().map(|i| self.embedding.embed(i)).collect();
        GaussianSummary::fit(&feats, COVARIANCE_EPS)
    }

    pub fn distance(&self, a: &[ImageTensor], b: &[ImageTensor]) -> Result<f64> {
        Ok(frechet_from_summaries(&self.summarize(a)?, &self.summarize(b)?))
    }
}

/// Fréchet distance with the embedding fitted on both sets together.
pub fn frechet_distance(a: &[ImageTensor], b: &[ImageTensor]) -> Result<f64> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::shape("each sample set needs at least two images"));
    }
    let union: Vec<ImageTensor> = a.iter().chain(b).cloned().collect();
    FrechetScorer::fit(&union)?.distance(a, b)
}

/// One evaluated translation direction.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricRow {
    pub task: String,
    pub label: u8,
    pub direction: String,
    pub fd: f64,
    pub ssim: f64,
    pub psnr: f64,
}

pub const REPORT_HEADER: [&str; 6] = ["task", "label", "direction", "FD", "SSIM", "PSNR"];

pub fn format_metric(v: f64) -> String {
    if v == f64::INFINITY {
        "inf".to_string()
    } else {
        format!("{v:.6}")
    }
}

/// CSV with header `task,label,direction,FD,SSIM,PSNR`, rows sorted by
/// `(task, label, direction)`.
pub fn emit_report(rows: &[MetricRow]) -> String {
    let mut sorted: Vec<&MetricRow> = rows.iter().collect();
    sorted.sort_by(|a, b| (&a.task, a.label, &a.direction).cmp(&(&b.task, b.label, &b.direction)));
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(REPORT_HEADER).unwrap();
    for r in sorted {
        w.write_record([
            r.task.clone(),
            r.label.to_string(),
            r.direction.clone(),
            format_metric(r.fd),
            format_metric(r.ssim),
            format_metric(r.psnr),
        ])
        .unwrap();
    }
    String::from_utf8(w.into_inner().unwrap()).unwrap()
}

/// Mean of values that may contain `+∞` (the mean is then `+∞`).
pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Tiles images into a grid (`rows[r][c]`) with a one-pixel gap and encodes
/// it as 8-bit grayscale PNG.
pub fn grid_png(rows: &[Vec<ImageTensor>], path: &Path) -> Result<()> {
    let n_rows = rows.len();
    let n_cols = rows.iter().map(|r| r.len()).max().unwrap_or(0);
    if n_rows == 0 || n_cols == 0 {
        return Err(Error::shape("empty image grid"));
    }
    let cell = SIDE + 1;
    let (w, h) = ((n_cols * cell + 1) as u32, (n_rows * cell + 1) as u32);
    let mut canvas = ::image::GrayImage::from_pixel(w, h, ::image::Luma([128]));
    for (r, row) in rows.iter().enumerate() {
        for (c, img) in row.iter().enumerate() {
            let bytes = img.to_bytes();
            for y in 0..SIDE {
                for x in 0..SIDE {
                    canvas.put_pixel(
                        (c * cell + 1 + x) as u32,
                        (r * cell + 1 + y) as u32,
                        ::image::Luma([bytes[y * SIDE + x]]),
                    );
                }
            }
        }
    }
    canvas.save(path)?;
    Ok(())
}

/// `|a − b|` per pixel.
pub fn abs_diff(a: &ImageTensor, b: &ImageTensor) -> ImageTensor {
    ImageTensor::from_fn(|r, c| (a.get(r, c) - b.get(r, c)).abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_images(n: usize, seed: u64) -> Vec<ImageTensor> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| ImageTensor::from_fn(|_, _| rng.gen::<f64>() * 0.5))
            .collect()
    }

    #[test]
    fn psnr_closed_forms() {
        let a = vec![0.5; 1024];
        assert_eq!(psnr(&a, &a, 1.0), f64::INFINITY);
        let b = vec![0.6; 1024];
        assert!((psnr(&a, &b, 1.0) - 20.0).abs() < 1e-9);
    }

    #[test]
    fn psnr_matches_brute_force() {
        let imgs = random_images(2, 1);
        let (a, b) = (imgs[0].as_slice(), imgs[1].as_slice());
        let mut mse = 0.0;
        for i in 0..1024 {
            mse += (a[i] - b[i]) * (a[i] - b[i]);
        }
        mse /= 1024.0;
        assert!((psnr(a, b, 1.0) - 10.0 * (1.0 / mse).log10()).abs() < 1e-12);
    }

    #[test]
    fn psnr_falls_with_noise_amplitude() {
        let base = vec![0.5; 1024];
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pattern: Vec<f64> = (0..1024).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let scores: Vec<f64> = [0.05, 0.1, 0.2]
            .iter()
            .map(|amp| {
                let noisy: Vec<f64> = base.iter().zip(&pattern).map(|(b, p)| b + amp * p).collect();
                psnr(&base, &noisy, 1.0)
            })
            .collect();
        assert!(scores[0] > scores[1] && scores[1] > scores[2]);
    }

    #[test]
    fn frechet_identical_sets_near_zero() {
        let a = random_images(40, 5);
        assert!(frechet_distance(&a, &a).unwrap() < 1e-6);
    }

    #[test]
    fn frechet_symmetric_and_permutation_invariant() {
        let a = random_images(30, 6);
        let b = random_images(30, 7);
        let ab = frechet_distance(&a, &b).unwrap();
        let ba = frechet_distance(&b, &a).unwrap();
        assert!((ab - ba).abs() < 1e-8 * ab.max(1.0));
        let mut a_rev = a.clone();
        a_rev.reverse();
        let scorer = FrechetScorer::fit(&a).unwrap();
        let d1 = scorer.distance(&a, &b).unwrap();
        let d2 = scorer.distance(&a_rev, &b).unwrap();
        assert!((d1 - d2).abs() < 1e-8 * d1.max(1.0));
    }

    #[test]
    fn frechet_of_shifted_point_masses_is_squared_mean_gap() {
        let d = DVector::from_vec(vec![0.3, -1.2, 0.5]);
        let eps = DMatrix::identity(3, 3) * COVARIANCE_EPS;
        let a = GaussianSummary {
            mean: DVector::zeros(3),
            cov: eps.clone(),
        };
        let b = GaussianSummary {
            mean: d.clone(),
            cov: eps,
        };
        assert!((frechet_from_summaries(&a, &b) - d.norm_squared()).abs() < 1e-9);
    }

    #[test]
    fn frechet_needs_two_samples() {
        let a = random_images(1, 1);
        let b = random_images(5, 2);
        assert!(frechet_distance(&a, &b).is_err());
    }

    #[test]
    fn report_layout() {
        assert_eq!(emit_report(&[]), "task,label,direction,FD,SSIM,PSNR\n");
        let rows = vec![
            MetricRow {
                task: "denoising".into(),
                label: 1,
                direction: "F".into(),
                fd: 2.0,
                ssim: 0.5,
                psnr: f64::INFINITY,
            },
            MetricRow {
                task: "denoising".into(),
                label: 1,
                direction: "G".into(),
                fd: 1.25,
                ssim: 0.75,
                psnr: 18.5,
            },
        ];
        let text = emit_report(&[rows[1].clone(), rows[0].clone()]);
        let mut rdr = csv::Reader::from_reader(text.as_bytes());
        assert_eq!(rdr.headers().unwrap(), REPORT_HEADER.to_vec());
        let recs: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
        assert_eq!(&recs[0][2], "F");
        assert_eq!(&recs[0][5], "inf");
        assert_eq!(recs[1][3].parse::<f64>().unwrap(), 1.25);
    }
}
