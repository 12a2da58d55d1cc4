//! Self-checks run by the `check-inverse` and `grad-check` commands: the
//! forward/inverse round trip of every circuit and central-difference audits
//! of each analytic gradient.
//!
//! Gradient agreement is measured per instance as
//! `‖analytic − numeric‖₂ / max(‖analytic‖₂, ‖numeric‖₂, 1e-12)` over the
//! audited coordinates.

use ndarray::Array2;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::Result;
use crate::image::{ImageTensor, PIXELS};
use crate::nets::{self, DenseNet, ACNN_WIDTHS, CRITIC_WIDTHS};
use crate::qgen::{
    DecodeRule, Direction, GeneratorParams, InverseMode, QuantumGenerator, BLOCKS, CIRCUITS, PATCH_LEN,
};
use crate::qsim::{self, StateVector, C64};

pub const INVERSE_TOLERANCE: f64 = 1e-10;
pub const NET_TOLERANCE: f64 = 1e-4;
pub const CIRCUIT_TOLERANCE: f64 = 1e-4;
pub const END_TO_END_TOLERANCE: f64 = 1e-3;
pub const DEFAULT_INSTANCES: usize = 20;

#[derive(Clone, Debug)]
pub struct InversionReport {
    pub trials: usize,
    /// Worst `‖u_l(u_k(ψ)) − ψ‖₂` seen for each circuit.
    pub per_circuit: Vec<f64>,
    pub tolerance: f64,
}

impl InversionReport {
    pub fn max_deviation(&self) -> f64 {
        self.per_circuit.iter().cloned().fold(0.0, f64::max)
    }

    pub fn passed(&self) -> bool {
        self.max_deviation() < self.tolerance
    }
}

fn random_state(rng: &mut impl Rng) -> Vec<C64> {
    let v: Vec<C64> = (0..PATCH_LEN)
        .map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect();
    let norm = v.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    v.into_iter().map(|a| a / norm).collect()
}

/// `trials` random (parameter, state) draws spread over all circuits. Each
/// draw picks fresh angles in `[−π, π)` and a random unit state, runs the
/// forward circuit then the inverse, and records the distance to the start.
pub fn check_inverse(seed: u64, trials: usize, mode: InverseMode) -> InversionReport {
    let generator = QuantumGenerator::with_inverse_mode(BLOCKS, DecodeRule::MaxNorm, mode);
    let per_trial: Vec<(usize, f64)> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(t as u64);
            let params = GeneratorParams::random(BLOCKS, -std::f64::consts::PI, std::f64::consts::PI, &mut rng);
            let k = t % CIRCUITS;
            let psi = random_state(&mut rng);
            let mut amps = psi.clone();
            qsim::evolve_raw(&generator.circuit(Direction::Forward, k).gates, params.as_slice(), &mut amps, 5);
            qsim::evolve_raw(&generator.circuit(Direction::Inverse, k).gates, params.as_slice(), &mut amps, 5);
            let dev = amps
                .iter()
                .zip(&psi)
                .map(|(a, b)| (a - b).norm_sqr())
                .sum::<f64>()
                .sqrt();
            (k, dev)
        })
        .collect();
    let mut per_circuit = vec![0.0; CIRCUITS];
    for (k, d) in per_trial {
        per_circuit[k] = f64::max(per_circuit[k], d);
    }
    InversionReport {
        trials,
        per_circuit,
        tolerance: INVERSE_TOLERANCE,
    }
}

#[derive(Clone, Debug)]
pub struct GradAudit {
    pub name: &'static str,
    pub instances: usize,
    pub coordinates: usize,
    pub max_rel_error: f64,
    pub tolerance: f64,
}

impl GradAudit {
    pub fn passed(&self) -> bool {
        self.max_rel_error < self.tolerance
    }
}

pub fn relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: Vec<f64> = analytic.iter().zip(numeric).map(|(a, n)| a - n).collect();
    norm(&diff) / norm(analytic).max(norm(numeric)).max(1e-12)
}

fn central_difference(params: &mut [f64], index: usize, h: f64, mut f: impl FnMut(&[f64]) -> f64) -> f64 {
    let orig = params[index];
    params[index] = orig + h;
    let plus = f(params);
    params[index] = orig - h;
    let minus = f(params);
    params[index] = orig;
    (plus - minus) / (2.0 * h)
}

fn run_audit(
    name: &'static str,
    instances: usize,
    tolerance: f64,
    seed: u64,
    one: impl Fn(&mut ChaCha8Rng) -> Result<(usize, f64)> + Sync,
) -> Result<GradAudit> {
    let results: Vec<(usize, f64)> = (0..instances)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            one(&mut rng)
        })
        .collect::<Result<_>>()?;
    Ok(GradAudit {
        name,
        instances,
        coordinates: results.iter().map(|r| r.0).sum(),
        max_rel_error: results.iter().map(|r| r.1).fold(0.0, f64::max),
        tolerance,
    })
}

fn random_matrix(rng: &mut impl Rng, m: usize, n: usize, lo: f64, hi: f64) -> Array2<f64> {
    Array2::from_shape_fn((m, n), |_| rng.gen_range(lo..hi))
}

fn random_image(rng: &mut impl Rng) -> ImageTensor {
    ImageTensor::from_fn(|_, _| rng.gen::<f64>())
}

/// Every angle of one full circuit (both directions alternate between
/// instances) against `L = Σ upstream·probs`.
pub fn audit_circuit(seed: u64, instances: usize) -> Result<GradAudit> {
    let generator = QuantumGenerator::new(BLOCKS, DecodeRule::MaxNorm);
    run_audit("quantum circuit", instances, CIRCUIT_TOLERANCE, seed, |rng| {
        let mut params = GeneratorParams::random(BLOCKS, -3.0, 3.0, rng);
        let k = rng.gen_range(0..CIRCUITS);
        let direction = if rng.gen::<bool>() { Direction::Forward } else { Direction::Inverse };
        let gates = &generator.circuit(direction, k).gates;
        let input = StateVector::from_amplitudes(random_state(rng))?;
        let upstream: Vec<f64> = (0..PATCH_LEN).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let analytic = qsim::circuit_grad(gates, params.as_slice(), &input, &upstream)?;
        let lo = k * params.per_circuit();
        let idx: Vec<usize> = (lo..lo + params.per_circuit()).collect();
        let loss = |p: &[f64]| {
            let mut amps = input.amplitudes().to_vec();
            qsim::evolve_raw(gates, p, &mut amps, 5);
            amps.iter().zip(&upstream).map(|(a, u)| a.norm_sqr() * u).sum::<f64>()
        };
        let numeric: Vec<f64> = idx
            .iter()
            .map(|&i| central_difference(params.as_mut_slice(), i, 1e-5, loss))
            .collect();
        let a: Vec<f64> = idx.iter().map(|&i| analytic[i]).collect();
        Ok((idx.len(), relative_error(&a, &numeric)))
    })
}

const NET_COORDS: usize = 24;
const NET_STEP: f64 = 1e-6;

fn sampled_indices(rng: &mut impl Rng, len: usize, count: usize) -> Vec<usize> {
    sample(rng, len, count.min(len)).into_vec()
}

/// Critic weight gradient of `mean D(x)` plus input gradients.
pub fn audit_critic(seed: u64, instances: usize) -> Result<GradAudit> {
    run_audit("critic", instances, NET_TOLERANCE, seed, |rng| {
        let mut net = DenseNet::critic(&CRITIC_WIDTHS)?;
        net.init_uniform(rng);
        let x = random_matrix(rng, 3, PIXELS, 0.0, 1.0);
        let m = x.nrows() as f64;
        let tape = net.forward(x.view())?;
        let (analytic, _) = net.backward(&tape, Array2::from_elem((3, 1), 1.0 / m).view())?;
        let idx = sampled_indices(rng, net.param_count(), NET_COORDS);
        let mut params = net.params().to_vec();
        let numeric: Vec<f64> = idx
            .iter()
            .map(|&i| {
                central_difference(&mut params, i, NET_STEP, |p| {
                    let mut n = net.clone();
                    n.params_mut().copy_from_slice(p);
                    nets::critic_forward(&n, x.view()).unwrap().iter().sum::<f64>() / m
                })
            })
            .collect();
        let a: Vec<f64> = idx.iter().map(|&i| analytic[i]).collect();
        let mut err = relative_error(&a, &numeric);

        let g = net.input_grad(x.view())?;
        let cols = sampled_indices(rng, PIXELS, 8);
        let mut xp = x.clone();
        let num_in: Vec<f64> = cols
            .iter()
            .map(|&c| {
                let orig = xp[[0, c]];
                let eval = |xp: &Array2<f64>| nets::critic_forward(&net, xp.view()).unwrap()[0];
                xp[[0, c]] = orig + NET_STEP;
                let plus = eval(&xp);
                xp[[0, c]] = orig - NET_STEP;
                let minus = eval(&xp);
                xp[[0, c]] = orig;
                (plus - minus) / (2.0 * NET_STEP)
            })
            .collect();
        let an_in: Vec<f64> = cols.iter().map(|&c| g[[0, c]]).collect();
        err = err.max(relative_error(&an_in, &num_in));
        Ok((idx.len() + cols.len(), err))
    })
}

/// Weight gradient of the gradient-penalty term `mean λ(‖∇ₓD(x)‖ − 1)²`.
pub fn audit_penalty(seed: u64, instances: usize) -> Result<GradAudit> {
    run_audit("gradient penalty", instances, NET_TOLERANCE, seed, |rng| {
        let mut net = DenseNet::critic(&CRITIC_WIDTHS)?;
        net.init_uniform(rng);
        // Non-zero biases move kinks away from the origin.
        for l in 0..net.n_layers() {
            let w = net.weight(l).to_owned();
            let b = ndarray::Array1::from_shape_fn(net.bias(l).len(), |_| rng.gen_range(-0.1..0.1));
            net.set_layer(l, &w, &b)?;
        }
        let x = random_matrix(rng, 2, PIXELS, 0.0, 1.0);
        let lambda = 10.0;
        let weights = [0.5, 0.5];
        let (_, analytic) = net.penalty_grad(x.view(), lambda, &weights)?;
        let idx = sampled_indices(rng, net.param_count(), NET_COORDS);
        let mut params = net.params().to_vec();
        let numeric: Vec<f64> = idx
            .iter()
            .map(|&i| {
                central_difference(&mut params, i, NET_STEP, |p| {
                    let mut n = net.clone();
                    n.params_mut().copy_from_slice(p);
                    let g = n.input_grad(x.view()).unwrap();
                    g.rows()
                        .into_iter()
                        .zip(weights)
                        .map(|(r, w)| w * lambda * (r.dot(&r).sqrt() - 1.0).powi(2))
                        .sum::<f64>()
                })
            })
            .collect();
        let a: Vec<f64> = idx.iter().map(|&i| analytic[i]).collect();
        Ok((idx.len(), relative_error(&a, &numeric)))
    })
}

/// Assisted network (Tanh output mapped to `[0, 1]`) against a random
/// linear functional of its output.
pub fn audit_acnn(seed: u64, instances: usize) -> Result<GradAudit> {
    run_audit("assisted network", instances, NET_TOLERANCE, seed, |rng| {
        let mut net = DenseNet::acnn(&ACNN_WIDTHS)?;
        net.init_uniform(rng);
        let x = random_matrix(rng, 2, PIXELS, 0.0, 1.0);
        let up = random_matrix(rng, 2, PIXELS, -1.0, 1.0);
        let (tape, _) = nets::acnn_forward(&net, x.view())?;
        let (analytic, d_in) = nets::acnn_backward(&net, &tape, up.view())?;
        let loss = |n: &DenseNet, x: &Array2<f64>| (&nets::acnn_forward(n, x.view()).unwrap().1 * &up).sum();
        let idx = sampled_indices(rng, net.param_count(), NET_COORDS);
        let mut params = net.params().to_vec();
        let numeric: Vec<f64> = idx
            .iter()
            .map(|&i| {
                central_difference(&mut params, i, NET_STEP, |p| {
                    let mut n = net.clone();
                    n.params_mut().copy_from_slice(p);
                    loss(&n, &x)
                })
            })
            .collect();
        let a: Vec<f64> = idx.iter().map(|&i| analytic[i]).collect();
        let mut err = relative_error(&a, &numeric);

        let cols = sampled_indices(rng, PIXELS, 8);
        let mut flat = x.clone().into_raw_vec_and_offset().0;
        let num_in: Vec<f64> = cols
            .iter()
            .map(|&c| {
                central_difference(&mut flat, c, NET_STEP, |p| {
                    loss(&net, &Array2::from_shape_vec((2, PIXELS), p.to_vec()).unwrap())
                })
            })
            .collect();
        let an_in: Vec<f64> = cols.iter().map(|&c| d_in[[0, c]]).collect();
        err = err.max(relative_error(&an_in, &num_in));
        Ok((idx.len() + cols.len(), err))
    })
}

/// Image in, image out: encode, circuits, measurement and decode, against a
/// random linear functional of the decoded pixels.
pub fn audit_generator(seed: u64, instances: usize, decode: DecodeRule) -> Result<GradAudit> {
    let generator = QuantumGenerator::new(BLOCKS, decode);
    run_audit("end-to-end generator", instances, END_TO_END_TOLERANCE, seed, |rng| {
        let mut params = GeneratorParams::random(BLOCKS, 0.0, 1.0, rng);
        let image = random_image(rng);
        let direction = if rng.gen::<bool>() { Direction::Forward } else { Direction::Inverse };
        let up: Vec<f64> = (0..PIXELS).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let analytic = generator.generator_grad(&image, &params, direction, &up)?;
        let idx = sampled_indices(rng, params.len(), 48);
        let blocks = params.blocks();
        let numeric: Vec<f64> = idx
            .iter()
            .map(|&i| {
                central_difference(params.as_mut_slice(), i, 1e-6, |p| {
                    let gp = GeneratorParams::from_vec(blocks, p.to_vec()).unwrap();
                    let out = generator.translate(&image, &gp, direction).unwrap();
                    out.as_slice().iter().zip(&up).map(|(a, b)| a * b).sum::<f64>()
                })
            })
            .collect();
        let a: Vec<f64> = idx.iter().map(|&i| analytic[i]).collect();
        Ok((idx.len(), relative_error(&a, &numeric)))
    })
}

/// The four audits the `grad-check` command reports, plus the end-to-end
/// generator path.
pub fn all_audits(seed: u64, instances: usize) -> Result<Vec<GradAudit>> {
    Ok(vec![
        audit_circuit(seed, instances)?,
        audit_critic(seed.wrapping_add(1), instances)?,
        audit_penalty(seed.wrapping_add(2), instances)?,
        audit_acnn(seed.wrapping_add(3), instances)?,
        audit_generator(seed.wrapping_add(4), instances, DecodeRule::MaxNorm)?,
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_inverse_passes_and_negate_only_fails() {
        let ok = check_inverse(1, 64, InverseMode::Exact);
        assert!(ok.passed(), "{}", ok.max_deviation());
        assert_eq!(ok.per_circuit.len(), 32);
        let bad = check_inverse(1, 64, InverseMode::NegateOnly);
        assert!(!bad.passed());
    }

    #[test]
    fn relative_error_basics() {
        assert_eq!(relative_error(&[1.0, 2.0], &[1.0, 2.0]), 0.0);
        assert!((relative_error(&[1.0, 0.0], &[0.0, 0.0]) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn small_audits_pass() {
        for a in [
            audit_circuit(5, 2).unwrap(),
            audit_critic(5, 2).unwrap(),
            audit_penalty(5, 2).unwrap(),
            audit_acnn(5, 2).unwrap(),
            audit_generator(5, 2, DecodeRule::MaxNorm).unwrap(),
            audit_generator(5, 2, DecodeRule::SumNorm).unwrap(),
        ] {
            assert!(a.passed(), "{} {}", a.name, a.max_rel_error);
        }
    }
}
