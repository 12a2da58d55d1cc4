//! Loss-weight sweep: one training run per `(ε, η, ρ)` combination, each
//! scored on the test split after every epoch.
//!
//! Combinations are written as an adversarial weight ε and a multiple `k`
//! of the base pair `(η, ρ) = (10, 150)`.

use crate::data::{images, SubDataset};
use crate::error::{Error, Result};
use crate::evaluate::{score_pairs, test_scorer, translate_split};
use crate::losses::LossWeights;
use crate::metrics::format_metric;
use crate::qgen::Direction;
use crate::trainer::{TrainConfig, Trainer};

pub const BASE_PAIR: (f64, f64) = (10.0, 150.0);

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Combination {
    pub epsilon: f64,
    pub eta: f64,
    pub rho: f64,
}

impl Combination {
    pub fn scaled(epsilon: f64, multiple: f64) -> Self {
        Self {
            epsilon,
            eta: BASE_PAIR.0 * multiple,
            rho: BASE_PAIR.1 * multiple,
        }
    }

    pub fn weights(&self, lambda: f64) -> LossWeights {
        LossWeights {
            lambda,
            epsilon: self.epsilon,
            eta: self.eta,
            rho: self.rho,
        }
    }
}

/// ε = 1 with the base pair, ε = 10 with one to four times the base pair,
/// and ε = 20 with three times the base pair.
pub fn default_grid() -> Vec<Combination> {
    [(1.0, 1.0), (10.0, 1.0), (10.0, 2.0), (10.0, 3.0), (10.0, 4.0), (20.0, 3.0)]
        .into_iter()
        .map(|(e, k)| Combination::scaled(e, k))
        .collect()
}

/// Parses `"ε:k,ε:k,…"`, e.g. `"1:1,10:2,20:3"`.
pub fn parse_grid(entries: &str) -> Result<Vec<Combination>> {
    entries.split(',')
        .map(|item| {
            let (e, k) = item
                .trim()
                .split_once(':')
                .ok_or_else(|| Error::Config(format!("grid entry '{item}' should be eps:multiple")))?;
            let num = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite() && *v >= 0.0)
                    .ok_or_else(|| Error::Config(format!("grid entry '{item}' has an invalid number")))
            };
            Ok(Combination::scaled(num(e)?, num(k)?))
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct StudyRow {
    pub combination: Combination,
    pub epoch: usize,
    /// `"G"` or `"F"`.
    pub direction: String,
    pub fd: f64,
    pub ssim: f64,
}

pub const STUDY_HEADER: [&str; 7] = ["epsilon", "eta", "rho", "epoch", "direction", "FD", "SSIM"];

pub fn study_csv(rows: &[StudyRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(STUDY_HEADER).unwrap();
    for r in rows {
        let c = r.combination;
        w.write_record([
            c.epsilon.to_string(),
            c.eta.to_string(),
            c.rho.to_string(),
            r.epoch.to_string(),
            r.direction.clone(),
            format_metric(r.fd),
            format_metric(r.ssim),
        ])
        .unwrap();
    }
    String::from_utf8(w.into_inner().unwrap()).unwrap()
}

/// Trains every combination from the same seed and scores both directions
/// after each epoch. `on_row` sees rows as they are produced.
pub fn run_study(
    base: &TrainConfig,
    grid: &[Combination],
    ds: &SubDataset,
    post: bool,
    mut on_row: impl FnMut(&StudyRow),
) -> Result<Vec<StudyRow>> {
    let scorer = test_scorer(ds)?;
    let (train_x, train_y) = (images(&ds.train_a), images(&ds.train_b));
    let mut rows = Vec::new();
    for &combination in grid {
        let config = TrainConfig {
            weights: combination.weights(base.weights.lambda),
            ..base.clone()
        };
        let mut trainer = Trainer::new(config)?;
        trainer.fit(&train_x, &train_y, None, |t| {
            for direction in [Direction::Forward, Direction::Inverse] {
                let (out, refs) = translate_split(t.generator(), &t.state.params, ds, direction, post)?;
                let s = score_pairs(&scorer, &out, &refs)?;
                let row = StudyRow {
                    combination,
                    epoch: t.state.epoch,
                    direction: direction.label().to_string(),
                    fd: s.fd,
                    ssim: s.ssim,
                };
                on_row(&row);
                rows.push(row);
            }
            Ok(())
        })?;
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_grid_values() {
        let g = default_grid();
        let triples: Vec<(f64, f64, f64)> = g.iter().map(|c| (c.epsilon, c.eta, c.rho)).collect();
        assert_eq!(
            triples,
            [
                (1.0, 10.0, 150.0),
                (10.0, 10.0, 150.0),
                (10.0, 20.0, 300.0),
                (10.0, 30.0, 450.0),
                (10.0, 40.0, 600.0),
                (20.0, 30.0, 450.0)
            ]
        );
        for c in &g {
            assert_eq!(c.rho, 15.0 * c.eta);
        }
    }

    #[test]
    fn grid_parsing() {
        assert_eq!(parse_grid("10:2, 1:1").unwrap(), vec![Combination::scaled(10.0, 2.0), Combination::scaled(1.0, 1.0)]);
        assert!(parse_grid("10").is_err());
        assert!(parse_grid("a:1").is_err());
    }

    #[test]
    fn csv_layout() {
        let rows = vec![StudyRow {
            combination: Combination::scaled(10.0, 2.0),
            epoch: 3,
            direction: "F".into(),
            fd: 1.5,
            ssim: 0.25,
        }];
        assert_eq!(
            study_csv(&rows),
            "epsilon,eta,rho,epoch,direction,FD,SSIM\n10,20,300,3,F,1.500000,0.250000\n"
        );
    }
}
