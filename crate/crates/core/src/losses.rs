//! Training objectives: WGAN-GP critic loss, the generators' adversarial
//! term, the unidirectional cycle L1 loss and the SSIM-based quality loss.
//!
//! Batches are `m × 1024` matrices, one flattened image per row. Every loss
//! that feeds a generator update also returns its gradient with respect to
//! the generated (or reconstructed) rows.

use ndarray::{Array2, ArrayView2, Zip};

use crate::error::{Error, Result};
use crate::nets::{critic_forward, DenseNet};

/// SSIM constants for dynamic range `L = 1`.
pub const SSIM_C1: f64 = 1e-4;
pub const SSIM_C2: f64 = 9e-4;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossWeights {
    /// Gradient-penalty coefficient λ.
    pub lambda: f64,
    /// Adversarial weight ε.
    pub epsilon: f64,
    /// Cycle weight η.
    pub eta: f64,
    /// Quality-aware weight ρ.
    pub rho: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            lambda: 10.0,
            epsilon: 10.0,
            eta: 20.0,
            rho: 300.0,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("lambda", self.lambda),
            ("epsilon", self.epsilon),
            ("eta", self.eta),
            ("rho", self.rho),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Config(format!("loss weight {name} must be ≥ 0, got {v}")));
            }
        }
        Ok(())
    }
}

/// Sign convention for the generator's adversarial term.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AdversarialMode {
    /// `−mean D(fake)`
    Standard,
    /// The critic objective evaluated at the generator's output:
    /// `mean D(fake) − mean D(real) + penalty`.
    Literal,
}

#[derive(Clone, Debug)]
pub struct CriticLoss {
    pub loss: f64,
    pub fake_score: f64,
    pub real_score: f64,
    pub penalty: f64,
    pub grads: Vec<f64>,
}

fn check_batches(a: &ArrayView2<f64>, b: &ArrayView2<f64>) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::shape(format!(
            "batch shapes differ: {:?} vs {:?}",
            a.dim(),
            b.dim()
        )));
    }
    if a.nrows() == 0 {
        return Err(Error::shape("empty batch"));
    }
    Ok(())
}

fn ensure_finite(what: &str, v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Numerical(format!("{what} evaluated to {v}")))
    }
}

/// `x̂ = ξ·real + (1 − ξ)·fake`, one ξ per row.
pub fn interpolate(real: ArrayView2<f64>, fake: ArrayView2<f64>, xi: &[f64]) -> Result<Array2<f64>> {
    check_batches(&real, &fake)?;
    if xi.len() != real.nrows() || xi.iter().any(|x| !(0.0..=1.0).contains(x)) {
        return Err(Error::shape("need one interpolation weight in [0,1] per row"));
    }
    let mut out = Array2::zeros(real.dim());
    for (i, mut row) in out.rows_mut().into_iter().enumerate() {
        let t = xi[i];
        Zip::from(&mut row)
            .and(real.row(i))
            .and(fake.row(i))
            .for_each(|o, r, f| *o = t * r + (1.0 - t) * f);
    }
    Ok(out)
}

/// Batch mean of `D(fake) − D(real) + λ(‖∇D(x̂)‖₂ − 1)²` with its gradient
/// over the critic weights.
pub fn critic_loss(
    critic: &DenseNet,
    real: ArrayView2<f64>,
    fake: ArrayView2<f64>,
    lambda: f64,
    xi: &[f64],
) -> Result<CriticLoss> {
    check_batches(&real, &fake)?;
    let m = real.nrows();
    let inv_m = 1.0 / m as f64;

    let fake_tape = critic.forward(fake)?;
    let real_tape = critic.forward(real)?;
    let fake_score = fake_tape.output.sum() * inv_m;
    let real_score = real_tape.output.sum() * inv_m;

    let (mut grads, _) = critic.backward(&fake_tape, Array2::from_elem((m, 1), inv_m).view())?;
    let (g_real, _) = critic.backward(&real_tape, Array2::from_elem((m, 1), -inv_m).view())?;

    let x_hat = interpolate(real, fake, xi)?;
    let (penalties, g_pen) = critic.penalty_grad(x_hat.view(), lambda, &vec![inv_m; m])?;
    let penalty = penalties.iter().sum::<f64>() * inv_m;

    for ((g, r), p) in grads.iter_mut().zip(&g_real).zip(&g_pen) {
        *g += r + p;
    }
    let loss = ensure_finite("critic loss", fake_score - real_score + penalty)?;
    Ok(CriticLoss {
        loss,
        fake_score,
        real_score,
        penalty,
        grads,
    })
}

/// Value of the generator's adversarial term and its gradient with respect
/// to the fake rows.
///
/// `real` and `xi` are only read in [`AdversarialMode::Literal`]; the
/// penalty's dependence on the fake rows vanishes almost everywhere for a
/// piecewise-linear critic, so only the `D(fake)` part carries gradient.
pub fn gen_adversarial(
    critic: &DenseNet,
    fake: ArrayView2<f64>,
    mode: AdversarialMode,
    real: ArrayView2<f64>,
    lambda: f64,
    xi: &[f64],
) -> Result<(f64, Array2<f64>)> {
    let m = fake.nrows();
    if m == 0 {
        return Err(Error::shape("empty batch"));
    }
    let inv_m = 1.0 / m as f64;
    let fake_score = critic_forward(critic, fake)?.iter().sum::<f64>() * inv_m;
    let d_fake = critic.input_grad(fake)?;
    match mode {
        AdversarialMode::Standard => Ok((
            ensure_finite("adversarial loss", -fake_score)?,
            d_fake * (-inv_m),
        )),
        AdversarialMode::Literal => {
            check_batches(&real, &fake)?;
            let real_score = critic_forward(critic, real)?.iter().sum::<f64>() * inv_m;
            let x_hat = interpolate(real, fake, xi)?;
            let g = critic.input_grad(x_hat.view())?;
            let penalty = g
                .rows()
                .into_iter()
                .map(|r| lambda * (r.dot(&r).sqrt() - 1.0).powi(2))
                .sum::<f64>()
                * inv_m;
            Ok((
                ensure_finite("adversarial loss", fake_score - real_score + penalty)?,
                d_fake * inv_m,
            ))
        }
    }
}

/// Batch mean of per-image `‖recon − source‖₁` and its gradient w.r.t. `recon`.
pub fn cycle_l1(recon: ArrayView2<f64>, source: ArrayView2<f64>) -> Result<(f64, Array2<f64>)> {
    check_batches(&recon, &source)?;
    let inv_m = 1.0 / recon.nrows() as f64;
    let diff = &recon - &source;
    let value = diff.iter().map(|d| d.abs()).sum::<f64>() * inv_m;
    let grad = diff.mapv(|d| {
        if d > 0.0 {
            inv_m
        } else if d < 0.0 {
            -inv_m
        } else {
            0.0
        }
    });
    Ok((value, grad))
}

struct Moments {
    mean_a: f64,
    mean_b: f64,
    var_a: f64,
    var_b: f64,
    cov: f64,
}

fn moments(a: &[f64], b: &[f64]) -> Moments {
    let n = a.len() as f64;
    let mean_a = a.iter().sum::<f64>() / n;
    let mean_b = b.iter().sum::<f64>() / n;
    let (mut var_a, mut var_b, mut cov) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - mean_a, y - mean_b);
        var_a += dx * dx;
        var_b += dy * dy;
        cov += dx * dy;
    }
    Moments {
        mean_a,
        mean_b,
        var_a: var_a / n,
        var_b: var_b / n,
        cov: cov / n,
    }
}

/// Whole-image SSIM from global means, population variances and covariance.
pub fn ssim(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "ssim inputs must have equal length");
    let m = moments(a, b);
    ((2.0 * m.mean_a * m.mean_b + SSIM_C1) * (2.0 * m.cov + SSIM_C2))
        / ((m.mean_a.powi(2) + m.mean_b.powi(2) + SSIM_C1) * (m.var_a + m.var_b + SSIM_C2))
}

/// `∂ ssim(a, b) / ∂a`.
pub fn ssim_grad_a(a: &[f64], b: &[f64]) -> Vec<f64> {
    let n = a.len() as f64;
    let m = moments(a, b);
    let lum_num = 2.0 * m.mean_a * m.mean_b + SSIM_C1;
    let con_num = 2.0 * m.cov + SSIM_C2;
    let lum_den = m.mean_a.powi(2) + m.mean_b.powi(2) + SSIM_C1;
    let con_den = m.var_a + m.var_b + SSIM_C2;
    let s = lum_num * con_num / (lum_den * con_den);
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d_lum_num = 2.0 * m.mean_b / n;
            let d_con_num = 2.0 * (y - m.mean_b) / n;
            let d_lum_den = 2.0 * m.mean_a / n;
            let d_con_den = 2.0 * (x - m.mean_a) / n;
            s * (d_lum_num / lum_num + d_con_num / con_num - d_lum_den / lum_den - d_con_den / con_den)
        })
        .collect()
}

/// Mean SSIM over all `window × window` patches of two square images.
pub fn ssim_windowed(a: &[f64], b: &[f64], side: usize, window: usize) -> f64 {
    assert_eq!(a.len(), side * side);
    assert_eq!(b.len(), side * side);
    assert!(window >= 1 && window <= side);
    let mut total = 0.0;
    let mut count = 0usize;
    let mut wa = Vec::with_capacity(window * window);
    let mut wb = Vec::with_capacity(window * window);
    for r in 0..=side - window {
        for c in 0..=side - window {
            wa.clear();
            wb.clear();
            for dr in 0..window {
                let at = (r + dr) * side + c;
                wa.extend_from_slice(&a[at..at + window]);
                wb.extend_from_slice(&b[at..at + window]);
            }
            total += ssim(&wa, &wb);
            count += 1;
        }
    }
    total / count as f64
}

/// Batch mean of `1 − ssim(recon, source)` and its gradient w.r.t. `recon`.
pub fn iqa_loss(recon: ArrayView2<f64>, source: ArrayView2<f64>) -> Result<(f64, Array2<f64>)> {
    check_batches(&recon, &source)?;
    let m = recon.nrows();
    let inv_m = 1.0 / m as f64;
    let mut grad = Array2::zeros(recon.dim());
    let mut value = 0.0;
    for i in 0..m {
        let (r, s) = (recon.row(i).to_vec(), source.row(i).to_vec());
        value += 1.0 - ssim(&r, &s);
        let g = ssim_grad_a(&r, &s);
        for (dst, v) in grad.row_mut(i).iter_mut().zip(g) {
            *dst = -v * inv_m;
        }
    }
    Ok((ensure_finite("quality loss", value * inv_m)?, grad))
}

/// `ε·adv + η·cyc + ρ·iqa`
pub fn total_gen_loss(adv: f64, cyc: f64, iqa: f64, weights: &LossWeights) -> f64 {
    weights.epsilon * adv + weights.eta * cyc + weights.rho * iqa
}
