//! Scores both translation directions of a trained generator pair on a
//! sub-dataset's test split.
//!
//! Each output is compared with the reference image built from the same
//! source digit, so SSIM and PSNR are paired scores even though training
//! never saw the pairing. The Fréchet embedding is fitted once on the union
//! of both real test domains.

use std::collections::HashMap;

use crate::data::{Sample, SubDataset};
use crate::error::{Error, Result};
use crate::image::ImageTensor;
use crate::metrics::{self, FrechetScorer, MetricRow};
use crate::postprocess::post_process;
use crate::qgen::{Direction, GeneratorParams, QuantumGenerator};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SetScores {
    pub fd: f64,
    pub ssim: f64,
    pub psnr: f64,
}

/// Fréchet distance between the two sets plus mean paired SSIM and PSNR.
pub fn score_pairs(scorer: &FrechetScorer, generated: &[ImageTensor], references: &[ImageTensor]) -> Result<SetScores> {
    if generated.len() != references.len() || generated.is_empty() {
        return Err(Error::shape("generated and reference sets must be non-empty and equal in size"));
    }
    let ssim: Vec<f64> = generated
        .iter()
        .zip(references)
        .map(|(g, r)| metrics::ssim_metric(g.as_slice(), r.as_slice()))
        .collect();
    let psnr: Vec<f64> = generated
        .iter()
        .zip(references)
        .map(|(g, r)| metrics::psnr(g.as_slice(), r.as_slice(), 1.0))
        .collect();
    Ok(SetScores {
        fd: scorer.distance(generated, references)?,
        ssim: metrics::mean(&ssim),
        psnr: metrics::mean(&psnr),
    })
}

/// Sources and the references that share their source digit, in source order.
pub fn pair_by_source(sources: &[Sample], references: &[Sample]) -> Result<(Vec<ImageTensor>, Vec<ImageTensor>)> {
    let by_source: HashMap<usize, &ImageTensor> = references.iter().map(|s| (s.source, &s.image)).collect();
    let mut src = Vec::with_capacity(sources.len());
    let mut refs = Vec::with_capacity(sources.len());
    for s in sources {
        let r = by_source
            .get(&s.source)
            .ok_or_else(|| Error::Data(format!("no reference image for source digit {}", s.source)))?;
        src.push(s.image.clone());
        refs.push((*r).clone());
    }
    Ok((src, refs))
}

/// `FrechetScorer` fitted on both real test domains.
pub fn test_scorer(ds: &SubDataset) -> Result<FrechetScorer> {
    let union: Vec<ImageTensor> = ds.test_a.iter().chain(&ds.test_b).map(|s| s.image.clone()).collect();
    FrechetScorer::fit(&union)
}

/// Translated test sources for one direction, optionally row-cleared,
/// together with their paired references.
pub fn translate_split(
    generator: &QuantumGenerator,
    params: &GeneratorParams,
    ds: &SubDataset,
    direction: Direction,
    post: bool,
) -> Result<(Vec<ImageTensor>, Vec<ImageTensor>)> {
    let (sources, refs) = match direction {
        Direction::Forward => pair_by_source(&ds.test_a, &ds.test_b)?,
        Direction::Inverse => pair_by_source(&ds.test_b, &ds.test_a)?,
    };
    let mut out = generator.translate_batch(&sources, params, direction)?;
    if post {
        out = out.iter().map(post_process).collect();
    }
    Ok((out, refs))
}

/// One report row per direction: `G` maps domain A to B, `F` maps B to A.
pub fn evaluate_subdataset(
    generator: &QuantumGenerator,
    params: &GeneratorParams,
    ds: &SubDataset,
    post: bool,
) -> Result<Vec<MetricRow>> {
    let scorer = test_scorer(ds)?;
    [Direction::Forward, Direction::Inverse]
        .into_iter()
        .map(|direction| {
            let (out, refs) = translate_split(generator, params, ds, direction, post)?;
            let s = score_pairs(&scorer, &out, &refs)?;
            Ok(MetricRow {
                task: ds.task.name().to_string(),
                label: ds.label,
                direction: direction.label().to_string(),
                fd: s.fd,
                ssim: s.ssim,
                psnr: s.psnr,
            })
        })
        .collect()
}
