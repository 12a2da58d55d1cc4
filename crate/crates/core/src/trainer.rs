//! Alternating critic and generator updates for the shared-parameter
//! quantum generators, their assisted networks and the two critics.
//!
//! Domain `X` is the transformed digit set and `Y` the plain digits.
//! `G = forward circuits : X → Y` is judged by `D_Y` and reconstructed by the
//! assisted network `Q : Y → X`; `F = inverse circuits : Y → X` is judged by
//! `D_X` and reconstructed by `R : X → Y`. `G` and `F` read the same angle
//! tensor, so any update through one is immediately visible in the other.

use std::fs;
use std::path::{Path, PathBuf};

use ndarray::{Array2, ArrayView2};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::image::ImageTensor;
use crate::losses::{self, AdversarialMode, LossWeights};
use crate::metrics;
use crate::nets::{self, Adam, DenseNet, ACNN_WIDTHS, CRITIC_WIDTHS};
use crate::postprocess::post_process;
use crate::qgen::{DecodeRule, Direction, GeneratorParams, QuantumGenerator, BLOCKS};
use crate::tensor_io::{encode_tensors, read_tensors, write_atomic, write_tensors};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NetInit {
    /// `U(±√(1/fan_in))` weights, zero biases.
    Uniform,
    Zero,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    /// Critic updates per generator update.
    pub n_critic: usize,
    pub lr_gen: f64,
    /// Learning rate of the critics and the assisted networks.
    pub lr_critic: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub weights: LossWeights,
    pub decode: DecodeRule,
    pub adversarial: AdversarialMode,
    pub train_acnn: bool,
    pub blocks: usize,
    /// Generator angles start `~ U[gen_init_low, gen_init_high)`.
    pub gen_init_low: f64,
    pub gen_init_high: f64,
    pub critic_init: NetInit,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 50,
            batch_size: 10,
            n_critic: 5,
            lr_gen: 0.01,
            lr_critic: 2e-4,
            beta1: 0.0,
            beta2: 0.9,
            weights: LossWeights::default(),
            decode: DecodeRule::MaxNorm,
            adversarial: AdversarialMode::Standard,
            train_acnn: true,
            blocks: BLOCKS,
            gen_init_low: 0.0,
            gen_init_high: 1.0,
            critic_init: NetInit::Uniform,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.batch_size == 0 {
            return bad("batch size must be at least 1".into());
        }
        if self.n_critic == 0 {
            return bad("n_c must be at least 1".into());
        }
        if self.blocks == 0 {
            return bad("generators need at least one block".into());
        }
        for (name, lr) in [("lr_gen", self.lr_gen), ("lr_critic", self.lr_critic)] {
            if !(lr.is_finite() && lr > 0.0) {
                return bad(format!("{name} must be > 0, got {lr}"));
            }
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return bad(format!("{name} must lie in [0, 1), got {b}"));
            }
        }
        if !(self.gen_init_low < self.gen_init_high) {
            return bad("generator init range is empty".into());
        }
        self.weights.validate()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CriticRecord {
    pub epoch: usize,
    pub batch: u64,
    /// `"D_Y"` or `"D_X"`.
    pub critic: String,
    pub loss: f64,
    pub fake: f64,
    pub real: f64,
    pub penalty: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GenRecord {
    pub epoch: usize,
    pub batch: u64,
    /// `"G"` or `"F"`.
    pub generator: String,
    pub adv: f64,
    pub cyc: f64,
    pub iqa: f64,
    pub total: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct History {
    pub critic: Vec<CriticRecord>,
    pub generator: Vec<GenRecord>,
}

impl History {
    /// Mean total loss of both generators over the updates made in `epoch`.
    pub fn mean_total(&self, epoch: usize) -> Option<f64> {
        let v: Vec<f64> = self
            .generator
            .iter()
            .filter(|r| r.epoch == epoch)
            .map(|r| r.total)
            .collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    }

    pub fn mean_total_of(&self, epoch: usize, generator: &str) -> Option<f64> {
        let v: Vec<f64> = self
            .generator
            .iter()
            .filter(|r| r.epoch == epoch && r.generator == generator)
            .map(|r| r.total)
            .collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    }

    pub fn critic_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["epoch", "batch", "critic", "loss", "fake", "real", "penalty"])
            .unwrap();
        for r in &self.critic {
            w.write_record([
                r.epoch.to_string(),
                r.batch.to_string(),
                r.critic.clone(),
                r.loss.to_string(),
                r.fake.to_string(),
                r.real.to_string(),
                r.penalty.to_string(),
            ])
            .unwrap();
        }
        String::from_utf8(w.into_inner().unwrap()).unwrap()
    }

    pub fn generator_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["epoch", "batch", "generator", "adv", "cyc", "iqa", "total"])
            .unwrap();
        for r in &self.generator {
            w.write_record([
                r.epoch.to_string(),
                r.batch.to_string(),
                r.generator.clone(),
                r.adv.to_string(),
                r.cyc.to_string(),
                r.iqa.to_string(),
                r.total.to_string(),
            ])
            .unwrap();
        }
        String::from_utf8(w.into_inner().unwrap()).unwrap()
    }

    /// Per-epoch means: `epoch, G_total, F_total, mean_total, D_Y, D_X`.
    pub fn epoch_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["epoch", "G_total", "F_total", "mean_total", "D_Y", "D_X"])
            .unwrap();
        let last = self
            .critic
            .iter()
            .map(|r| r.epoch)
            .chain(self.generator.iter().map(|r| r.epoch))
            .max();
        let fmt = |v: Option<f64>| v.map_or_else(String::new, |v| v.to_string());
        let critic_mean = |epoch: usize, name: &str| {
            let v: Vec<f64> = self
                .critic
                .iter()
                .filter(|r| r.epoch == epoch && r.critic == name)
                .map(|r| r.loss)
                .collect();
            (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
        };
        for epoch in 1..=last.unwrap_or(0) {
            w.write_record([
                epoch.to_string(),
                fmt(self.mean_total_of(epoch, "G")),
                fmt(self.mean_total_of(epoch, "F")),
                fmt(self.mean_total(epoch)),
                fmt(critic_mean(epoch, "D_Y")),
                fmt(critic_mean(epoch, "D_X")),
            ])
            .unwrap();
        }
        String::from_utf8(w.into_inner().unwrap()).unwrap()
    }

    fn parse_f64(s: &str) -> Result<f64> {
        s.parse()
            .map_err(|_| Error::Data(format!("'{s}' is not a number in a loss history file")))
    }

    pub fn from_csv(critic: &str, generator: &str) -> Result<Self> {
        let mut h = History::default();
        let rows = |text: &str| -> Result<Vec<csv::StringRecord>> {
            csv::Reader::from_reader(text.as_bytes())
                .records()
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Data(format!("loss history: {e}")))
        };
        let int = |s: &str| -> Result<u64> {
            s.parse()
                .map_err(|_| Error::Data(format!("'{s}' is not an integer in a loss history file")))
        };
        for r in rows(critic)? {
            if r.len() != 7 {
                return Err(Error::Data("critic history rows need 7 fields".into()));
            }
            h.critic.push(CriticRecord {
                epoch: int(&r[0])? as usize,
                batch: int(&r[1])?,
                critic: r[2].to_string(),
                loss: Self::parse_f64(&r[3])?,
                fake: Self::parse_f64(&r[4])?,
                real: Self::parse_f64(&r[5])?,
                penalty: Self::parse_f64(&r[6])?,
            });
        }
        for r in rows(generator)? {
            if r.len() != 7 {
                return Err(Error::Data("generator history rows need 7 fields".into()));
            }
            h.generator.push(GenRecord {
                epoch: int(&r[0])? as usize,
                batch: int(&r[1])?,
                generator: r[2].to_string(),
                adv: Self::parse_f64(&r[3])?,
                cyc: Self::parse_f64(&r[4])?,
                iqa: Self::parse_f64(&r[5])?,
                total: Self::parse_f64(&r[6])?,
            });
        }
        Ok(h)
    }
}

/// Everything that changes during training.
#[derive(Clone, Debug)]
pub struct TrainState {
    /// The single angle tensor read by both `G` and `F`.
    pub params: GeneratorParams,
    pub critic_x: DenseNet,
    pub critic_y: DenseNet,
    pub acnn_q: DenseNet,
    pub acnn_r: DenseNet,
    pub opt_g: Adam,
    pub opt_f: Adam,
    pub opt_dx: Adam,
    pub opt_dy: Adam,
    pub opt_q: Adam,
    pub opt_r: Adam,
    pub batch_counter: u64,
    /// Completed epochs.
    pub epoch: usize,
    pub rng: ChaCha8Rng,
    pub history: History,
}

/// SHA-256 of the encoded parameter tensor.
pub fn params_checksum(params: &GeneratorParams) -> String {
    hex::encode(Sha256::digest(encode_tensors(&[params.to_tensor()])))
}

fn to_matrix(images: &[ImageTensor]) -> Array2<f64> {
    nets::stack_rows(images.iter().map(|i| i.as_slice()))
}

fn ensure_finite(what: &str, values: &[f64]) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(Error::Numerical(format!("{what} has a non-finite entry at {i}"))),
        None => Ok(()),
    }
}

pub struct Trainer {
    config: TrainConfig,
    generator: QuantumGenerator,
    pub state: TrainState,
}

pub const CHECKPOINT_DIR: &str = "checkpoint";
pub const GENERATOR_FILE: &str = "generator.tns";
const STATE_FILE: &str = "state.txt";
pub const CONFIG_FILE: &str = "config.txt";
const CRITIC_HISTORY: &str = "critic_history.csv";
const GENERATOR_HISTORY: &str = "generator_history.csv";
pub const EPOCH_HISTORY: &str = "loss_curves.csv";

impl Trainer {
    pub fn new(config: TrainConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let params = GeneratorParams::random(config.blocks, config.gen_init_low, config.gen_init_high, &mut rng);
        let mut critic_x = DenseNet::critic(&CRITIC_WIDTHS)?;
        let mut critic_y = DenseNet::critic(&CRITIC_WIDTHS)?;
        if config.critic_init == NetInit::Uniform {
            critic_y.init_uniform(&mut rng);
            critic_x.init_uniform(&mut rng);
        }
        let mut acnn_q = DenseNet::acnn(&ACNN_WIDTHS)?;
        let mut acnn_r = DenseNet::acnn(&ACNN_WIDTHS)?;
        acnn_q.init_uniform(&mut rng);
        acnn_r.init_uniform(&mut rng);
        let adam = |n: usize, lr: f64| Adam::new(n, lr, config.beta1, config.beta2);
        let state = TrainState {
            opt_g: adam(params.len(), config.lr_gen),
            opt_f: adam(params.len(), config.lr_gen),
            opt_dx: adam(critic_x.param_count(), config.lr_critic),
            opt_dy: adam(critic_y.param_count(), config.lr_critic),
            opt_q: adam(acnn_q.param_count(), config.lr_critic),
            opt_r: adam(acnn_r.param_count(), config.lr_critic),
            params,
            critic_x,
            critic_y,
            acnn_q,
            acnn_r,
            batch_counter: 0,
            epoch: 0,
            rng,
            history: History::default(),
        };
        Ok(Self {
            generator: QuantumGenerator::new(config.blocks, config.decode),
            config,
            state,
        })
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn generator(&self) -> &QuantumGenerator {
        &self.generator
    }

    pub fn translate(&self, images: &[ImageTensor], direction: Direction) -> Result<Vec<ImageTensor>> {
        self.generator.translate_batch(images, &self.state.params, direction)
    }

    fn draw_xi(&mut self, m: usize) -> Vec<f64> {
        (0..m).map(|_| self.state.rng.gen::<f64>()).collect()
    }

    fn check_batch(x: &[ImageTensor], y: &[ImageTensor]) -> Result<()> {
        if x.is_empty() || x.len() != y.len() {
            return Err(Error::shape(format!(
                "need two equal, non-empty batches, got {} and {}",
                x.len(),
                y.len()
            )));
        }
        Ok(())
    }

    /// Updates `D_Y` on `(y, G(x))`, then `D_X` on `(x, F(y))`, and advances
    /// the batch counter. Generator parameters are only read.
    pub fn train_step_critics(&mut self, x: &[ImageTensor], y: &[ImageTensor]) -> Result<(f64, f64)> {
        Self::check_batch(x, y)?;
        let m = x.len();
        let batch = self.state.batch_counter + 1;
        let epoch = self.state.epoch + 1;
        let (xm, ym) = (to_matrix(x), to_matrix(y));
        let mut losses_out = [0.0; 2];
        for (i, direction) in [Direction::Forward, Direction::Inverse].into_iter().enumerate() {
            let (source, real) = match direction {
                Direction::Forward => (x, &ym),
                Direction::Inverse => (y, &xm),
            };
            let fake = to_matrix(&self.translate(source, direction)?);
            let xi = self.draw_xi(m);
            let lambda = self.config.weights.lambda;
            let st = &mut self.state;
            let (critic, opt, name) = match direction {
                Direction::Forward => (&mut st.critic_y, &mut st.opt_dy, "D_Y"),
                Direction::Inverse => (&mut st.critic_x, &mut st.opt_dx, "D_X"),
            };
            let cl = losses::critic_loss(critic, real.view(), fake.view(), lambda, &xi)?;
            opt.step(critic.params_mut(), &cl.grads)?;
            ensure_finite(name, critic.params())?;
            st.history.critic.push(CriticRecord {
                epoch,
                batch,
                critic: name.into(),
                loss: cl.loss,
                fake: cl.fake_score,
                real: cl.real_score,
                penalty: cl.penalty,
            });
            losses_out[i] = cl.loss;
        }
        self.state.batch_counter = batch;
        Ok((losses_out[0], losses_out[1]))
    }

    /// One generator-side update: `G` with `D_Y` and `Q` for
    /// [`Direction::Forward`], `F` with `D_X` and `R` for the inverse.
    fn generator_update(&mut self, source: &[ImageTensor], target: &[ImageTensor], direction: Direction) -> Result<GenRecord> {
        let m = source.len();
        let w = self.config.weights;
        let src = to_matrix(source);
        let tgt = to_matrix(target);
        let fake_images = self.translate(source, direction)?;
        let fake = to_matrix(&fake_images);
        let xi = self.draw_xi(m);
        let st = &mut self.state;
        let (critic, acnn) = match direction {
            Direction::Forward => (&st.critic_y, &st.acnn_q),
            Direction::Inverse => (&st.critic_x, &st.acnn_r),
        };
        let (adv, d_adv) =
            losses::gen_adversarial(critic, fake.view(), self.config.adversarial, tgt.view(), w.lambda, &xi)?;
        let (tape, recon) = nets::acnn_forward(acnn, fake.view())?;
        let (cyc, d_cyc) = losses::cycle_l1(recon.view(), src.view())?;
        let (iqa, d_iqa) = losses::iqa_loss(recon.view(), src.view())?;
        let d_recon = d_cyc * w.eta + d_iqa * w.rho;
        let (acnn_grads, d_fake_rec) = nets::acnn_backward(acnn, &tape, d_recon.view())?;
        let d_fake = d_adv * w.epsilon + d_fake_rec;

        let grads = self.param_grads(source, direction, d_fake.view())?;
        let st = &mut self.state;
        let (opt, acnn, acnn_opt) = match direction {
            Direction::Forward => (&mut st.opt_g, &mut st.acnn_q, &mut st.opt_q),
            Direction::Inverse => (&mut st.opt_f, &mut st.acnn_r, &mut st.opt_r),
        };
        opt.step(st.params.as_mut_slice(), &grads)?;
        ensure_finite("generator parameters", st.params.as_slice())?;
        if self.config.train_acnn {
            acnn_opt.step(acnn.params_mut(), &acnn_grads)?;
            ensure_finite("assisted network", acnn.params())?;
        }
        let total = losses::total_gen_loss(adv, cyc, iqa, &w);
        if !total.is_finite() {
            return Err(Error::Numerical(format!("{} loss is {total}", direction.label())));
        }
        Ok(GenRecord {
            epoch: st.epoch + 1,
            batch: st.batch_counter,
            generator: direction.label().into(),
            adv,
            cyc,
            iqa,
            total,
        })
    }

    /// Sum over the batch of per-image circuit gradients, reduced in order.
    fn param_grads(&self, source: &[ImageTensor], direction: Direction, upstream: ArrayView2<f64>) -> Result<Vec<f64>> {
        let params = &self.state.params;
        let per_image: Vec<Vec<f64>> = source
            .par_iter()
            .enumerate()
            .map(|(i, img)| {
                let up = upstream.row(i).to_vec();
                self.generator.generator_grad(img, params, direction, &up)
            })
            .collect::<Result<_>>()?;
        let mut total = vec![0.0; params.len()];
        for g in per_image {
            for (t, v) in total.iter_mut().zip(g) {
                *t += v;
            }
        }
        Ok(total)
    }

    /// Runs the `G` update and then the `F` update when the batch counter is
    /// a multiple of `n_c`.
    pub fn train_step_generators(&mut self, x: &[ImageTensor], y: &[ImageTensor]) -> Result<Option<(GenRecord, GenRecord)>> {
        Self::check_batch(x, y)?;
        if self.state.batch_counter % self.config.n_critic as u64 != 0 {
            return Ok(None);
        }
        let g = self.generator_update(x, y, Direction::Forward)?;
        let f = self.generator_update(y, x, Direction::Inverse)?;
        self.state.history.generator.push(g.clone());
        self.state.history.generator.push(f.clone());
        Ok(Some((g, f)))
    }

    pub fn train_batch(&mut self, x: &[ImageTensor], y: &[ImageTensor]) -> Result<()> {
        self.train_step_critics(x, y)?;
        self.train_step_generators(x, y)?;
        Ok(())
    }

    /// Batches per epoch for the given training set sizes.
    pub fn batches_per_epoch(&self, n_x: usize, n_y: usize) -> usize {
        n_x.min(n_y) / self.config.batch_size
    }

    /// One shuffled pass over the smaller domain; the trailing partial batch
    /// is dropped.
    pub fn run_epoch(&mut self, train_x: &[ImageTensor], train_y: &[ImageTensor]) -> Result<()> {
        let n = train_x.len().min(train_y.len());
        let m = self.config.batch_size;
        if n < m {
            return Err(Error::Data(format!("{n} training images cannot fill a batch of {m}")));
        }
        let mut ix: Vec<usize> = (0..train_x.len()).collect();
        let mut iy: Vec<usize> = (0..train_y.len()).collect();
        ix.shuffle(&mut self.state.rng);
        iy.shuffle(&mut self.state.rng);
        for b in 0..n / m {
            let xb: Vec<ImageTensor> = ix[b * m..(b + 1) * m].iter().map(|&i| train_x[i].clone()).collect();
            let yb: Vec<ImageTensor> = iy[b * m..(b + 1) * m].iter().map(|&i| train_y[i].clone()).collect();
            self.train_batch(&xb, &yb)?;
        }
        self.state.epoch += 1;
        log::info!(
            "epoch {} done after {} batches",
            self.state.epoch,
            self.state.batch_counter
        );
        Ok(())
    }

    /// Trains until `config.epochs` epochs are complete. With an output
    /// directory, a checkpoint is written after each epoch and `on_epoch` may
    /// add artefacts such as sample grids.
    pub fn fit(
        &mut self,
        train_x: &[ImageTensor],
        train_y: &[ImageTensor],
        out_dir: Option<&Path>,
        mut on_epoch: impl FnMut(&Trainer) -> Result<()>,
    ) -> Result<()> {
        while self.state.epoch < self.config.epochs {
            self.run_epoch(train_x, train_y)?;
            if let Some(dir) = out_dir {
                self.save_checkpoint(dir)?;
            }
            on_epoch(self)?;
        }
        Ok(())
    }

    /// Writes the checkpoint under `out_dir/checkpoint` through a temporary
    /// directory so an interrupted write leaves the previous one intact.
    pub fn save_checkpoint(&self, out_dir: &Path) -> Result<PathBuf> {
        fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
        let tmp = out_dir.join(format!("{CHECKPOINT_DIR}.tmp"));
        let old = out_dir.join(format!("{CHECKPOINT_DIR}.old"));
        let dst = out_dir.join(CHECKPOINT_DIR);
        for d in [&tmp, &old] {
            if d.exists() {
                fs::remove_dir_all(d).map_err(|e| Error::io(d, e))?;
            }
        }
        fs::create_dir_all(&tmp).map_err(|e| Error::io(&tmp, e))?;
        self.write_state_files(&tmp)?;
        if dst.exists() {
            fs::rename(&dst, &old).map_err(|e| Error::io(&dst, e))?;
        }
        fs::rename(&tmp, &dst).map_err(|e| Error::io(&tmp, e))?;
        if old.exists() {
            fs::remove_dir_all(&old).map_err(|e| Error::io(&old, e))?;
        }
        let h = &self.state.history;
        write_atomic(&out_dir.join(EPOCH_HISTORY), h.epoch_csv().as_bytes())?;
        write_atomic(&out_dir.join(GENERATOR_HISTORY), h.generator_csv().as_bytes())?;
        write_atomic(&out_dir.join(CRITIC_HISTORY), h.critic_csv().as_bytes())?;
        Ok(dst)
    }

    fn write_state_files(&self, dir: &Path) -> Result<()> {
        let st = &self.state;
        write_tensors(&dir.join(GENERATOR_FILE), &[st.params.to_tensor()])?;
        for (name, net) in [
            ("critic_x", &st.critic_x),
            ("critic_y", &st.critic_y),
            ("acnn_q", &st.acnn_q),
            ("acnn_r", &st.acnn_r),
        ] {
            write_tensors(&dir.join(format!("{name}.tns")), &net.to_tensors())?;
        }
        for (name, opt) in [
            ("g", &st.opt_g),
            ("f", &st.opt_f),
            ("dx", &st.opt_dx),
            ("dy", &st.opt_dy),
            ("q", &st.opt_q),
            ("r", &st.opt_r),
        ] {
            write_tensors(&dir.join(format!("adam_{name}.tns")), &opt.to_tensors())?;
        }
        let rng = &st.rng;
        let state = format!(
            "epoch={}\nbatch_counter={}\nrng_seed={}\nrng_stream={}\nrng_word_pos={}\ngenerator_sha256={}\n",
            st.epoch,
            st.batch_counter,
            hex::encode(rng.get_seed()),
            rng.get_stream(),
            rng.get_word_pos(),
            params_checksum(&st.params),
        );
        write_atomic(&dir.join(STATE_FILE), state.as_bytes())?;
        write_atomic(&dir.join(CONFIG_FILE), config_text(&self.config).as_bytes())?;
        write_atomic(&dir.join(CRITIC_HISTORY), st.history.critic_csv().as_bytes())?;
        write_atomic(&dir.join(GENERATOR_HISTORY), st.history.generator_csv().as_bytes())?;
        Ok(())
    }

    /// Restores a trainer from `out_dir/checkpoint` (or a checkpoint
    /// directory given directly). The stored configuration is used except
    /// for `epochs`, which the caller may raise to continue training.
    pub fn resume(path: &Path, epochs: Option<usize>) -> Result<Self> {
        let dir = checkpoint_dir(path);
        let cfg_path = dir.join(CONFIG_FILE);
        let text = fs::read_to_string(&cfg_path).map_err(|e| Error::io(&cfg_path, e))?;
        let mut config = crate::config::RunConfig::from_text(&text)?.train;
        if let Some(e) = epochs {
            config.epochs = e;
        }
        let mut trainer = Trainer::new(config)?;
        let st = &mut trainer.state;
        st.params = load_params(&dir)?;
        for (name, net) in [
            ("critic_x", &mut st.critic_x),
            ("critic_y", &mut st.critic_y),
            ("acnn_q", &mut st.acnn_q),
            ("acnn_r", &mut st.acnn_r),
        ] {
            net.load_tensors(&read_tensors(&dir.join(format!("{name}.tns")))?)?;
        }
        for (name, opt) in [
            ("g", &mut st.opt_g),
            ("f", &mut st.opt_f),
            ("dx", &mut st.opt_dx),
            ("dy", &mut st.opt_dy),
            ("q", &mut st.opt_q),
            ("r", &mut st.opt_r),
        ] {
            *opt = Adam::from_tensors(&read_tensors(&dir.join(format!("adam_{name}.tns")))?)?;
        }
        let state_path = dir.join(STATE_FILE);
        let text = fs::read_to_string(&state_path).map_err(|e| Error::io(&state_path, e))?;
        let kv = |key: &str| -> Result<&str> {
            text.lines()
                .find_map(|l| l.strip_prefix(key).and_then(|r| r.strip_prefix('=')))
                .ok_or_else(|| Error::Data(format!("checkpoint state lacks '{key}'")))
        };
        let num = |key: &str| -> Result<u128> {
            kv(key)?
                .parse()
                .map_err(|_| Error::Data(format!("checkpoint '{key}' is not an integer")))
        };
        st.epoch = num("epoch")? as usize;
        st.batch_counter = num("batch_counter")? as u64;
        let seed: [u8; 32] = hex::decode(kv("rng_seed")?)
            .ok()
            .and_then(|v| v.try_into().ok())
            .ok_or_else(|| Error::Data("checkpoint rng seed is malformed".into()))?;
        st.rng = ChaCha8Rng::from_seed(seed);
        st.rng.set_stream(num("rng_stream")? as u64);
        st.rng.set_word_pos(num("rng_word_pos")?);
        let read = |name: &str| -> Result<String> {
            let p = dir.join(name);
            fs::read_to_string(&p).map_err(|e| Error::io(&p, e))
        };
        st.history = History::from_csv(&read(CRITIC_HISTORY)?, &read(GENERATOR_HISTORY)?)?;
        Ok(trainer)
    }
}

/// `path/checkpoint` when it exists, otherwise `path` itself.
pub fn checkpoint_dir(path: &Path) -> PathBuf {
    let nested = path.join(CHECKPOINT_DIR);
    if nested.join(GENERATOR_FILE).exists() {
        nested
    } else {
        path.to_path_buf()
    }
}

/// Loads only the shared generator tensor of a checkpoint.
pub fn load_params(path: &Path) -> Result<GeneratorParams> {
    let file = if path.is_file() {
        path.to_path_buf()
    } else {
        checkpoint_dir(path).join(GENERATOR_FILE)
    };
    let tensors = read_tensors(&file)?;
    match tensors.as_slice() {
        [t] => GeneratorParams::from_tensor(t),
        _ => Err(Error::Data(format!("{} should hold exactly one tensor", file.display()))),
    }
}

fn config_text(config: &TrainConfig) -> String {
    crate::config::RunConfig {
        train: config.clone(),
        ..Default::default()
    }
    .to_text()
}

/// Five-row comparison grid: source, generated, post-processed, reference
/// and absolute difference of the post-processed output to the reference.
pub fn comparison_grid(
    generator: &QuantumGenerator,
    params: &GeneratorParams,
    direction: Direction,
    sources: &[ImageTensor],
    references: &[ImageTensor],
    path: &Path,
) -> Result<()> {
    if sources.len() != references.len() || sources.is_empty() {
        return Err(Error::shape("grid needs matching, non-empty source and reference lists"));
    }
    let generated = generator.translate_batch(sources, params, direction)?;
    let post: Vec<ImageTensor> = generated.iter().map(post_process).collect();
    let diff: Vec<ImageTensor> = post
        .iter()
        .zip(references)
        .map(|(p, r)| metrics::abs_diff(p, r))
        .collect();
    metrics::grid_png(
        &[sources.to_vec(), generated, post, references.to_vec(), diff],
        path,
    )
}
