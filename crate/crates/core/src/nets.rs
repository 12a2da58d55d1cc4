//! Dense networks with hand-written reverse-mode differentiation, and Adam.
//!
//! A [`DenseNet`] keeps all weights and biases in one flat vector; layer `l`
//! stores its `out × in` weight matrix row-major followed by its bias. The
//! gradient vectors returned here share that layout, which is what the
//! optimizer and the checkpoint files consume.
//!
//! The critic's gradient penalty `λ(‖∇ₓD(x)‖₂ − 1)²` is differentiated with
//! respect to the weights exactly. For piecewise-linear activations the
//! input gradient is `W₁ᵀ M₁ W₂ᵀ M₂ … w_Lᵀ` with constant masks `M_l`, so the
//! weight gradient of the penalty is obtained by pushing `∂P/∂g` forward
//! through the same masked weights (see [`DenseNet::penalty_grad`]).

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;

use crate::error::{Error, Result};
use crate::tensor_io::Tensor;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Activation {
    LeakyRelu(f64),
    Tanh,
    Identity,
}

impl Activation {
    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::LeakyRelu(slope) => {
                if z > 0.0 {
                    z
                } else {
                    slope * z
                }
            }
            Activation::Tanh => z.tanh(),
            Activation::Identity => z,
        }
    }

    #[inline]
    fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::LeakyRelu(slope) => {
                if z > 0.0 {
                    1.0
                } else {
                    slope
                }
            }
            Activation::Tanh => 1.0 - z.tanh().powi(2),
            Activation::Identity => 1.0,
        }
    }

    fn is_piecewise_linear(self) -> bool {
        !matches!(self, Activation::Tanh)
    }
}

pub const CRITIC_SLOPE: f64 = 0.2;
pub const ACNN_SLOPE: f64 = 0.05;
pub const CRITIC_WIDTHS: [usize; 4] = [1024, 512, 256, 1];
pub const ACNN_WIDTHS: [usize; 7] = [1024, 512, 256, 128, 64, 512, 1024];

#[derive(Clone, Debug, PartialEq)]
pub struct DenseNet {
    widths: Vec<usize>,
    activations: Vec<Activation>,
    params: Vec<f64>,
}

/// Intermediate values kept by [`DenseNet::forward`] for the backward pass.
pub struct Tape {
    /// Input to each layer, `m × in`.
    inputs: Vec<Array2<f64>>,
    /// Pre-activation of each layer, `m × out`.
    pre: Vec<Array2<f64>>,
    pub output: Array2<f64>,
}

impl DenseNet {
    /// Zero-initialized network. `activations[l]` follows layer `l`.
    pub fn zeros(widths: &[usize], activations: &[Activation]) -> Result<Self> {
        if widths.len() < 2 || activations.len() != widths.len() - 1 {
            return Err(Error::Config(format!(
                "{} widths need {} activations, got {}",
                widths.len(),
                widths.len().saturating_sub(1),
                activations.len()
            )));
        }
        if widths.contains(&0) {
            return Err(Error::Config("layer widths must be positive".into()));
        }
        let n: usize = widths.windows(2).map(|w| w[1] * w[0] + w[1]).sum();
        Ok(Self {
            widths: widths.to_vec(),
            activations: activations.to_vec(),
            params: vec![0.0; n],
        })
    }

    /// Critic: LeakyReLU(0.2) on every hidden layer, linear scalar output.
    pub fn critic(widths: &[usize]) -> Result<Self> {
        if widths.last() != Some(&1) {
            return Err(Error::Config("critic must end in a single unit".into()));
        }
        let mut acts = vec![Activation::LeakyRelu(CRITIC_SLOPE); widths.len().saturating_sub(2)];
        acts.push(Activation::Identity);
        Self::zeros(widths, &acts)
    }

    /// Assisted network: LeakyReLU(0.05) everywhere except a Tanh output.
    pub fn acnn(widths: &[usize]) -> Result<Self> {
        if widths.first() != widths.last() {
            return Err(Error::Config("assisted network must map images to images".into()));
        }
        let mut acts = vec![Activation::LeakyRelu(ACNN_SLOPE); widths.len().saturating_sub(2)];
        acts.push(Activation::Tanh);
        Self::zeros(widths, &acts)
    }

    /// Weights `~ U(−√(1/fan_in), √(1/fan_in))`, biases zero.
    pub fn init_uniform(&mut self, rng: &mut impl Rng) {
        let mut offset = 0;
        for l in 0..self.n_layers() {
            let (fan_in, fan_out) = (self.widths[l], self.widths[l + 1]);
            let bound = (1.0 / fan_in as f64).sqrt();
            for w in &mut self.params[offset..offset + fan_in * fan_out] {
                *w = rng.gen_range(-bound..bound);
            }
            offset += fan_in * fan_out;
            self.params[offset..offset + fan_out].fill(0.0);
            offset += fan_out;
        }
    }

    pub fn n_layers(&self) -> usize {
        self.activations.len()
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn activations(&self) -> &[Activation] {
        &self.activations
    }

    pub fn input_dim(&self) -> usize {
        self.widths[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.widths.last().unwrap()
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn layer_offset(&self, layer: usize) -> usize {
        self.widths[..layer + 1]
            .windows(2)
            .map(|w| w[1] * w[0] + w[1])
            .sum()
    }

    pub fn weight(&self, layer: usize) -> ArrayView2<'_, f64> {
        let (i, o) = (self.widths[layer], self.widths[layer + 1]);
        let at = self.layer_offset(layer);
        ArrayView2::from_shape((o, i), &self.params[at..at + o * i]).unwrap()
    }

    pub fn bias(&self, layer: usize) -> ArrayView1<'_, f64> {
        let (i, o) = (self.widths[layer], self.widths[layer + 1]);
        let at = self.layer_offset(layer) + o * i;
        ArrayView1::from(&self.params[at..at + o])
    }

    pub fn set_layer(&mut self, layer: usize, weight: &Array2<f64>, bias: &Array1<f64>) -> Result<()> {
        let (i, o) = (self.widths[layer], self.widths[layer + 1]);
        if weight.dim() != (o, i) || bias.len() != o {
            return Err(Error::shape(format!("layer {layer} expects {o}×{i} weights")));
        }
        let at = self.layer_offset(layer);
        for (dst, src) in self.params[at..at + o * i].iter_mut().zip(weight.iter()) {
            *dst = *src;
        }
        self.params[at + o * i..at + o * i + o].copy_from_slice(bias.as_slice().unwrap());
        Ok(())
    }

    fn check_input(&self, x: &ArrayView2<f64>) -> Result<()> {
        if x.ncols() != self.input_dim() {
            return Err(Error::shape(format!(
                "network expects {} inputs, got {}",
                self.input_dim(),
                x.ncols()
            )));
        }
        Ok(())
    }

    /// Forward pass over a batch of row vectors.
    pub fn forward(&self, x: ArrayView2<f64>) -> Result<Tape> {
        self.check_input(&x)?;
        let mut inputs = Vec::with_capacity(self.n_layers());
        let mut pre = Vec::with_capacity(self.n_layers());
        let mut h = x.to_owned();
        for l in 0..self.n_layers() {
            let z = h.dot(&self.weight(l).t()) + &self.bias(l);
            let act = self.activations[l];
            let next = z.mapv(|v| act.apply(v));
            inputs.push(h);
            pre.push(z);
            h = next;
        }
        Ok(Tape {
            inputs,
            pre,
            output: h,
        })
    }

    pub fn predict(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        Ok(self.forward(x)?.output)
    }

    /// Reverse pass. Returns the flat parameter gradient and `∂L/∂input`.
    pub fn backward(&self, tape: &Tape, upstream: ArrayView2<f64>) -> Result<(Vec<f64>, Array2<f64>)> {
        if upstream.dim() != tape.output.dim() {
            return Err(Error::shape(format!(
                "upstream {:?} does not match output {:?}",
                upstream.dim(),
                tape.output.dim()
            )));
        }
        let mut grads = vec![0.0; self.params.len()];
        let mut delta = upstream.to_owned();
        for l in (0..self.n_layers()).rev() {
            let act = self.activations[l];
            let dz = &delta * &tape.pre[l].mapv(|z| act.derivative(z));
            let dw = dz.t().dot(&tape.inputs[l]);
            let db = dz.sum_axis(Axis(0));
            let at = self.layer_offset(l);
            let nw = dw.len();
            for (g, v) in grads[at..at + nw].iter_mut().zip(dw.iter()) {
                *g = *v;
            }
            grads[at + nw..at + nw + db.len()].copy_from_slice(db.as_slice().unwrap());
            delta = dz.dot(&self.weight(l));
        }
        Ok((grads, delta))
    }

    /// `∂D/∂x` for each row of `x` (the network must have a scalar output).
    pub fn input_grad(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        let (_, dx, _) = self.input_grad_with_masks(x)?;
        Ok(dx)
    }

    /// Input gradient plus the per-layer `∂D/∂z_l` and activation masks.
    fn input_grad_with_masks(
        &self,
        x: ArrayView2<f64>,
    ) -> Result<(Tape, Array2<f64>, Vec<Array2<f64>>)> {
        if self.output_dim() != 1 {
            return Err(Error::shape("input gradient needs a scalar-output network"));
        }
        let tape = self.forward(x)?;
        let m = x.nrows();
        let mut delta = Array2::<f64>::ones((m, 1));
        let mut dzs = vec![Array2::zeros((0, 0)); self.n_layers()];
        for l in (0..self.n_layers()).rev() {
            let act = self.activations[l];
            let dz = &delta * &tape.pre[l].mapv(|z| act.derivative(z));
            delta = dz.dot(&self.weight(l));
            dzs[l] = dz;
        }
        Ok((tape, delta, dzs))
    }

    /// Gradient penalty `Σᵢ wᵢ·λ(‖∇ₓD(xᵢ)‖₂ − 1)²` and its weight gradient.
    ///
    /// Returns per-row penalty values (unweighted) and the flat parameter
    /// gradient of the weighted sum. Requires piecewise-linear activations,
    /// whose second derivative vanishes almost everywhere.
    pub fn penalty_grad(
        &self,
        x: ArrayView2<f64>,
        lambda: f64,
        weights: &[f64],
    ) -> Result<(Vec<f64>, Vec<f64>)> {
        if let Some(a) = self.activations.iter().find(|a| !a.is_piecewise_linear()) {
            return Err(Error::Config(format!(
                "penalty differentiation needs piecewise-linear activations, found {a:?}"
            )));
        }
        if weights.len() != x.nrows() {
            return Err(Error::shape("one weight per batch row is required"));
        }
        let (tape, g, dzs) = self.input_grad_with_masks(x)?;
        let m = x.nrows();
        let mut values = Vec::with_capacity(m);
        // c = ∂P/∂g for every row
        let mut c = Array2::<f64>::zeros(g.dim());
        for i in 0..m {
            let row = g.row(i);
            let norm = row.dot(&row).sqrt();
            values.push(lambda * (norm - 1.0).powi(2));
            if norm > 0.0 {
                let scale = weights[i] * 2.0 * lambda * (norm - 1.0) / norm;
                c.row_mut(i).assign(&(&row * scale));
            }
        }

        let mut grads = vec![0.0; self.params.len()];
        let mut u = c;
        for l in 0..self.n_layers() {
            // ∂P/∂W_l = Σᵢ (∂D/∂z_l)ᵢ ⊗ uᵢ
            let dw = dzs[l].t().dot(&u);
            let at = self.layer_offset(l);
            for (gw, v) in grads[at..at + dw.len()].iter_mut().zip(dw.iter()) {
                *gw = *v;
            }
            if l + 1 < self.n_layers() {
                let act = self.activations[l];
                u = u.dot(&self.weight(l).t()) * &tape.pre[l].mapv(|z| act.derivative(z));
            }
        }
        Ok((values, grads))
    }

    pub fn to_tensors(&self) -> Vec<Tensor> {
        (0..self.n_layers())
            .flat_map(|l| {
                let w = self.weight(l);
                [
                    Tensor {
                        shape: vec![w.nrows(), w.ncols()],
                        data: w.iter().copied().collect(),
                    },
                    Tensor::vector(self.bias(l).to_vec()),
                ]
            })
            .collect()
    }

    /// Loads weights saved by [`DenseNet::to_tensors`] into a network of
    /// matching architecture.
    pub fn load_tensors(&mut self, tensors: &[Tensor]) -> Result<()> {
        if tensors.len() != 2 * self.n_layers() {
            return Err(Error::shape(format!(
                "expected {} tensors, got {}",
                2 * self.n_layers(),
                tensors.len()
            )));
        }
        for l in 0..self.n_layers() {
            let (i, o) = (self.widths[l], self.widths[l + 1]);
            let (w, b) = (&tensors[2 * l], &tensors[2 * l + 1]);
            if w.shape != [o, i] || b.shape != [o] {
                return Err(Error::shape(format!(
                    "layer {l}: tensors {:?}/{:?} do not match {o}×{i}",
                    w.shape, b.shape
                )));
            }
            let at = self.layer_offset(l);
            self.params[at..at + o * i].copy_from_slice(&w.data);
            self.params[at + o * i..at + o * i + o].copy_from_slice(&b.data);
        }
        Ok(())
    }
}

/// Critic score for each row.
pub fn critic_forward(net: &DenseNet, x: ArrayView2<f64>) -> Result<Vec<f64>> {
    if net.output_dim() != 1 {
        return Err(Error::shape("critic must have a scalar output"));
    }
    Ok(net.predict(x)?.column(0).to_vec())
}

pub fn critic_input_grad(net: &DenseNet, x: ArrayView2<f64>) -> Result<Array2<f64>> {
    net.input_grad(x)
}

/// Assisted network output mapped from `tanh`'s range onto `[0, 1]`.
pub fn acnn_forward(net: &DenseNet, x: ArrayView2<f64>) -> Result<(Tape, Array2<f64>)> {
    let tape = net.forward(x)?;
    let out = tape.output.mapv(|t| 0.5 * (t + 1.0));
    Ok((tape, out))
}

/// Backward through [`acnn_forward`]'s range adapter and the network.
pub fn acnn_backward(
    net: &DenseNet,
    tape: &Tape,
    upstream: ArrayView2<f64>,
) -> Result<(Vec<f64>, Array2<f64>)> {
    let scaled = upstream.mapv(|g| 0.5 * g);
    net.backward(tape, scaled.view())
}

/// Adam with bias correction.
#[derive(Clone, Debug, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    first: Vec<f64>,
    second: Vec<f64>,
}

impl Adam {
    pub const EPS: f64 = 1e-8;

    pub fn new(n_params: usize, lr: f64, beta1: f64, beta2: f64) -> Self {
        Self {
            lr,
            beta1,
            beta2,
            eps: Self::EPS,
            step: 0,
            first: vec![0.0; n_params],
            second: vec![0.0; n_params],
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn first_moment(&self) -> &[f64] {
        &self.first
    }

    pub fn second_moment(&self) -> &[f64] {
        &self.second
    }

    /// Applies one update in place. Non-finite gradients abort before any
    /// state is touched.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) -> Result<()> {
        if params.len() != self.first.len() || grads.len() != self.first.len() {
            return Err(Error::shape(format!(
                "optimizer tracks {} parameters, got {} params / {} grads",
                self.first.len(),
                params.len(),
                grads.len()
            )));
        }
        if let Some((i, g)) = grads.iter().enumerate().find(|(_, g)| !g.is_finite()) {
            return Err(Error::Numerical(format!(
                "non-finite gradient {g} at parameter {i} (optimizer step {})",
                self.step + 1
            )));
        }
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for i in 0..params.len() {
            let g = grads[i];
            self.first[i] = self.beta1 * self.first[i] + (1.0 - self.beta1) * g;
            self.second[i] = self.beta2 * self.second[i] + (1.0 - self.beta2) * g * g;
            let m_hat = self.first[i] / c1;
            let v_hat = self.second[i] / c2;
            params[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
        Ok(())
    }

    pub fn to_tensors(&self) -> Vec<Tensor> {
        vec![
            Tensor::vector(vec![self.lr, self.beta1, self.beta2, self.eps, self.step as f64]),
            Tensor::vector(self.first.clone()),
            Tensor::vector(self.second.clone()),
        ]
    }

    pub fn from_tensors(tensors: &[Tensor]) -> Result<Self> {
        match tensors {
            [h, m, v] if h.data.len() == 5 && m.data.len() == v.data.len() => Ok(Self {
                lr: h.data[0],
                beta1: h.data[1],
                beta2: h.data[2],
                eps: h.data[3],
                step: h.data[4] as u64,
                first: m.data.clone(),
                second: v.data.clone(),
            }),
            _ => Err(Error::shape("optimizer state needs header, first and second moments")),
        }
    }
}

/// Rows of `images` stacked into an `m × 1024` matrix.
pub fn stack_rows<'a>(rows: impl IntoIterator<Item = &'a [f64]>) -> Array2<f64> {
    let rows: Vec<&[f64]> = rows.into_iter().collect();
    let n = rows.first().map_or(0, |r| r.len());
    let mut out = Array2::zeros((rows.len(), n));
    for (i, r) in rows.iter().enumerate() {
        out.slice_mut(s![i, ..]).assign(&ArrayView1::from(*r));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small_critic(seed: u64) -> DenseNet {
        let mut net = DenseNet::critic(&[6, 5, 4, 1]).unwrap();
        net.init_uniform(&mut ChaCha8Rng::seed_from_u64(seed));
        let n = net.param_count();
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 100);
        // non-zero biases so kinks are not all at the origin
        for l in 0..net.n_layers() {
            let at = net.layer_offset(l) + net.widths[l] * net.widths[l + 1];
            for b in &mut net.params[at..at + net.widths[l + 1]] {
                *b = rng.gen_range(-0.3..0.3);
            }
        }
        assert_eq!(n, 6 * 5 + 5 + 5 * 4 + 4 + 4 + 1);
        net
    }

    #[test]
    fn critic_parameter_count_matches_width_list() {
        let net = DenseNet::critic(&CRITIC_WIDTHS).unwrap();
        assert_eq!(net.param_count(), 1024 * 512 + 512 + 512 * 256 + 256 + 256 + 1);
    }

    #[test]
    fn zero_critic_scores_zero() {
        let net = DenseNet::critic(&CRITIC_WIDTHS).unwrap();
        let x = Array2::from_elem((2, 1024), 0.7);
        assert_eq!(critic_forward(&net, x.view()).unwrap(), vec![0.0, 0.0]);
        assert!(critic_input_grad(&net, x.view()).unwrap().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn hand_computed_three_layer_score() {
        // x=[1,−1] → z1=[1−2, 0.5]=[−1, 0.5] → h1=[−0.2, 0.5]
        // z2 = 2·(−0.2) − 1·0.5 + 0.1 = −0.8 → h2 = −0.16
        // s = 3·(−0.16) + 1 = 0.52
        let mut net = DenseNet::critic(&[2, 2, 1, 1]).unwrap();
        net.set_layer(0, &array![[1.0, 2.0], [0.5, 0.0]], &array![0.0, 0.0]).unwrap();
        net.set_layer(1, &array![[2.0, -1.0]], &array![0.1]).unwrap();
        net.set_layer(2, &array![[3.0]], &array![1.0]).unwrap();
        let s = critic_forward(&net, array![[1.0, -1.0]].view()).unwrap();
        assert!((s[0] - 0.52).abs() < 1e-15);
    }

    #[test]
    fn leaky_relu_slope_on_negative_input() {
        let mut net = DenseNet::zeros(&[1, 3], &[Activation::LeakyRelu(0.2)]).unwrap();
        net.set_layer(0, &array![[1.0], [1.0], [1.0]], &array![0.0, 0.0, 0.0]).unwrap();
        let out = net.predict(array![[-1.0]].view()).unwrap();
        assert!(out.iter().all(|v| (*v + 0.2).abs() < 1e-15));
    }

    #[test]
    fn linear_critic_input_grad_is_weight() {
        let mut net = DenseNet::critic(&[3, 1]).unwrap();
        net.set_layer(0, &array![[0.3, -0.4, 1.2]], &array![0.5]).unwrap();
        let g = critic_input_grad(&net, array![[0.1, 0.2, 0.3]].view()).unwrap();
        assert_eq!(g, array![[0.3, -0.4, 1.2]]);
    }

    #[test]
    fn single_layer_weight_gradient_is_outer_product() {
        let mut net = DenseNet::zeros(&[3, 2], &[Activation::Identity]).unwrap();
        net.init_uniform(&mut ChaCha8Rng::seed_from_u64(1));
        let x = array![[1.0, 2.0, 3.0]];
        let tape = net.forward(x.view()).unwrap();
        let up = array![[0.5, -1.0]];
        let (g, dx) = net.backward(&tape, up.view()).unwrap();
        assert_eq!(&g[..6], &[0.5, 1.0, 1.5, -1.0, -2.0, -3.0]);
        assert_eq!(&g[6..], &[0.5, -1.0]);
        assert_eq!(dx, up.dot(&net.weight(0)));

        let (g, _) = net.backward(&tape, array![[0.0, 0.0]].view()).unwrap();
        assert!(g.iter().all(|v| *v == 0.0));
    }

    fn rel_err(a: f64, b: f64) -> f64 {
        (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
    }

    #[test]
    fn input_grad_matches_finite_difference() {
        let net = small_critic(3);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = Array2::from_shape_fn((1, 6), |_| rng.gen_range(-1.0..1.0));
        let g = critic_input_grad(&net, x.view()).unwrap();
        let h = 1e-6;
        for j in 0..6 {
            let mut xp = x.clone();
            xp[[0, j]] += h;
            let mut xm = x.clone();
            xm[[0, j]] -= h;
            let fd = (critic_forward(&net, xp.view()).unwrap()[0]
                - critic_forward(&net, xm.view()).unwrap()[0])
                / (2.0 * h);
            assert!(rel_err(fd, g[[0, j]]) < 1e-5);
        }
    }

    #[test]
    fn penalty_weight_gradient_matches_finite_difference() {
        let mut net = small_critic(7);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let x = Array2::from_shape_fn((3, 6), |_| rng.gen_range(-1.0..1.0));
        let w = [0.5, 0.25, 0.25];
        let (_, g) = net.penalty_grad(x.view(), 10.0, &w).unwrap();
        let total = |net: &DenseNet| -> f64 {
            let (vals, _) = net.penalty_grad(x.view(), 10.0, &w).unwrap();
            vals.iter().zip(&w).map(|(v, wi)| v * wi).sum()
        };
        let h = 1e-5;
        for i in 0..net.param_count() {
            let orig = net.params[i];
            net.params[i] = orig + h;
            let plus = total(&net);
            net.params[i] = orig - h;
            let minus = total(&net);
            net.params[i] = orig;
            let fd = (plus - minus) / (2.0 * h);
            assert!(rel_err(fd, g[i]) < 1e-4, "param {i}: fd {fd} analytic {}", g[i]);
        }
    }

    #[test]
    fn penalty_rejects_tanh() {
        let net = DenseNet::acnn(&[4, 3, 4]).unwrap();
        assert!(net.penalty_grad(Array2::zeros((1, 4)).view(), 10.0, &[1.0]).is_err());
    }

    #[test]
    fn zero_acnn_outputs_half() {
        let net = DenseNet::acnn(&ACNN_WIDTHS).unwrap();
        assert_eq!(net.n_layers(), 6);
        let (_, out) = acnn_forward(&net, Array2::from_elem((1, 1024), 0.3).view()).unwrap();
        assert!(out.iter().all(|v| *v == 0.5));
    }

    #[test]
    fn acnn_gradient_matches_finite_difference() {
        let mut net = DenseNet::acnn(&[5, 4, 3, 5]).unwrap();
        net.init_uniform(&mut ChaCha8Rng::seed_from_u64(12));
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let x = Array2::from_shape_fn((2, 5), |_| rng.gen_range(0.0..1.0));
        let up = Array2::from_shape_fn((2, 5), |_| rng.gen_range(-1.0..1.0));
        let loss = |net: &DenseNet| -> f64 {
            let (_, out) = acnn_forward(net, x.view()).unwrap();
            (&out * &up).sum()
        };
        let (tape, out) = acnn_forward(&net, x.view()).unwrap();
        assert!(out.iter().all(|v| (0.0..=1.0).contains(v)));
        let (g, _) = acnn_backward(&net, &tape, up.view()).unwrap();
        let h = 1e-6;
        for i in 0..net.param_count() {
            let orig = net.params[i];
            net.params[i] = orig + h;
            let plus = loss(&net);
            net.params[i] = orig - h;
            let minus = loss(&net);
            net.params[i] = orig;
            assert!(rel_err((plus - minus) / (2.0 * h), g[i]) < 1e-4);
        }
    }

    #[test]
    fn dimension_mismatch_is_shape_error() {
        let net = DenseNet::critic(&[4, 2, 1]).unwrap();
        assert!(matches!(critic_forward(&net, Array2::zeros((1, 3)).view()), Err(Error::Shape(_))));
        assert!(DenseNet::zeros(&[4, 2], &[]).is_err());
    }

    #[test]
    fn adam_zero_gradient_keeps_params() {
        let mut opt = Adam::new(3, 0.01, 0.0, 0.9);
        let mut p = vec![1.0, -2.0, 0.5];
        opt.step(&mut p, &[0.0; 3]).unwrap();
        assert_eq!(p, vec![1.0, -2.0, 0.5]);
    }

    #[test]
    fn adam_first_step_is_lr_times_sign() {
        let mut opt = Adam::new(2, 0.01, 0.0, 0.9);
        let mut p = vec![0.0, 0.0];
        opt.step(&mut p, &[3.0, -0.5]).unwrap();
        assert!((p[0] + 0.01 * 3.0 / (3.0 + 1e-8)).abs() < 1e-18);
        assert!((p[1] - 0.01 * 0.5 / (0.5 + 1e-8)).abs() < 1e-18);
    }

    #[test]
    fn adam_two_steps_hand_computed() {
        // β1=0.5, β2=0.9, lr=0.1, g = 1 then 2
        // t=1: m=0.5, v=0.1,   m̂=1,     v̂=1,      Δ = −0.1·1/(1+ε)
        // t=2: m=1.25, v=0.49, m̂=1.25/0.75, v̂=0.49/0.19
        let mut opt = Adam::new(1, 0.1, 0.5, 0.9);
        let mut p = vec![0.0];
        opt.step(&mut p, &[1.0]).unwrap();
        assert!((opt.first_moment()[0] - 0.5).abs() < 1e-15);
        assert!((opt.second_moment()[0] - 0.1).abs() < 1e-15);
        let after1 = -0.1 / (1.0 + 1e-8);
        assert!((p[0] - after1).abs() < 1e-15);
        opt.step(&mut p, &[2.0]).unwrap();
        assert!((opt.first_moment()[0] - 1.25).abs() < 1e-15);
        assert!((opt.second_moment()[0] - 0.49).abs() < 1e-15);
        let m_hat: f64 = 1.25 / 0.75;
        let v_hat: f64 = 0.49 / (1.0 - 0.81);
        let expected = after1 - 0.1 * m_hat / (v_hat.sqrt() + 1e-8);
        assert!((p[0] - expected).abs() < 1e-14);
        assert_eq!(opt.step_count(), 2);
    }

    #[test]
    fn adam_rejects_nan() {
        let mut opt = Adam::new(2, 0.01, 0.0, 0.9);
        let mut p = vec![0.0, 0.0];
        let err = opt.step(&mut p, &[0.0, f64::NAN]).unwrap_err();
        assert!(matches!(err, Error::Numerical(_)));
        assert_eq!(opt.step_count(), 0);
    }

    #[test]
    fn seeded_initialization_is_reproducible() {
        let mut a = DenseNet::critic(&[8, 4, 1]).unwrap();
        let mut b = a.clone();
        a.init_uniform(&mut ChaCha8Rng::seed_from_u64(5));
        b.init_uniform(&mut ChaCha8Rng::seed_from_u64(5));
        assert_eq!(a, b);
        let bound = (1.0f64 / 8.0).sqrt();
        assert!(a.weight(0).iter().all(|w| w.abs() <= bound));
        assert!(a.bias(0).iter().all(|b| *b == 0.0));
    }

    #[test]
    fn tensor_roundtrip() {
        let a = small_critic(2);
        let mut b = DenseNet::critic(&[6, 5, 4, 1]).unwrap();
        b.load_tensors(&a.to_tensors()).unwrap();
        assert_eq!(a, b);
        let opt = Adam::new(4, 0.1, 0.0, 0.9);
        assert_eq!(Adam::from_tensors(&opt.to_tensors()).unwrap(), opt);
    }
}
