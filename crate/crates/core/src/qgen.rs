//! The paired quantum generators `G` (forward) and `F` (inverse).
//!
//! Both generators read one [`GeneratorParams`] tensor. Circuit `k` of `G`
//! applies, for each block, one `Rot` per qubit followed by the CNOT chain
//! `(0,1) (1,2) (2,3) (3,4)`. Circuit `k` of `F` is the exact gate-by-gate
//! inverse: blocks in reverse order, each as the reversed CNOT chain
//! followed by `Rot(−γ, −β, −α)` for every forward `Rot(α, β, γ)`. The
//! inverse never owns angles; its gates hold negated references into the
//! forward storage.
//!
//! Image row `k` is patch `k` and is processed by circuit `k`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::image::{ImageTensor, PIXELS, SIDE};
use crate::qsim::{self, AngleRef, Gate, StateVector, C64};
use crate::tensor_io::Tensor;

pub const CIRCUITS: usize = 32;
pub const QUBITS: usize = 5;
pub const BLOCKS: usize = 12;
pub const ANGLES_PER_ROT: usize = 3;
pub const PATCH_LEN: usize = 1 << QUBITS;

const _: () = assert!(PATCH_LEN == SIDE && CIRCUITS == SIDE);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Direction {
    /// `G : X → Y`
    Forward,
    /// `F : Y → X`
    Inverse,
}

impl Direction {
    pub fn label(self) -> &'static str {
        match self {
            Direction::Forward => "G",
            Direction::Inverse => "F",
        }
    }
}

/// How the inverse circuit reads the forward angles.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InverseMode {
    /// `Rot(α, β, γ)⁻¹ = Rot(−γ, −β, −α)`.
    Exact,
    /// Negates each angle in place without swapping α and γ. Not an inverse
    /// in general; kept as a negative control for the inversion check.
    NegateOnly,
}

/// Probability-to-pixel rule applied to each measured patch.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DecodeRule {
    /// `pixels = probs / max(probs)`
    MaxNorm,
    /// `pixels = min(1, probs · 2^N)`
    SumNorm,
}

/// Shared angle tensor of shape `(32, blocks, 5, 3)`.
#[derive(Clone, Debug, PartialEq)]
pub struct GeneratorParams {
    blocks: usize,
    angles: Vec<f64>,
}

impl GeneratorParams {
    pub fn zeros(blocks: usize) -> Self {
        Self {
            blocks,
            angles: vec![0.0; CIRCUITS * blocks * QUBITS * ANGLES_PER_ROT],
        }
    }

    pub fn from_vec(blocks: usize, angles: Vec<f64>) -> Result<Self> {
        let expected = CIRCUITS * blocks * QUBITS * ANGLES_PER_ROT;
        if angles.len() != expected {
            return Err(Error::shape(format!(
                "{blocks} blocks need {expected} angles, got {}",
                angles.len()
            )));
        }
        if angles.iter().any(|a| !a.is_finite()) {
            return Err(Error::Numerical("generator angles must be finite".into()));
        }
        Ok(Self { blocks, angles })
    }

    /// Draws every angle uniformly from `[low, high)`.
    pub fn random(blocks: usize, low: f64, high: f64, rng: &mut impl rand::Rng) -> Self {
        let n = CIRCUITS * blocks * QUBITS * ANGLES_PER_ROT;
        let angles = (0..n).map(|_| rng.gen_range(low..high)).collect();
        Self { blocks, angles }
    }

    pub fn blocks(&self) -> usize {
        self.blocks
    }

    pub fn len(&self) -> usize {
        self.angles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.angles.is_empty()
    }

    pub fn shape(&self) -> [usize; 4] {
        [CIRCUITS, self.blocks, QUBITS, ANGLES_PER_ROT]
    }

    pub fn per_circuit(&self) -> usize {
        self.blocks * QUBITS * ANGLES_PER_ROT
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.angles
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.angles
    }

    #[inline]
    pub fn index(&self, circuit: usize, block: usize, qubit: usize, role: usize) -> usize {
        ((circuit * self.blocks + block) * QUBITS + qubit) * ANGLES_PER_ROT + role
    }

    pub fn get(&self, circuit: usize, block: usize, qubit: usize, role: usize) -> f64 {
        self.angles[self.index(circuit, block, qubit, role)]
    }

    pub fn set(&mut self, circuit: usize, block: usize, qubit: usize, role: usize, value: f64) {
        let i = self.index(circuit, block, qubit, role);
        self.angles[i] = value;
    }

    pub fn to_tensor(&self) -> Tensor {
        Tensor {
            shape: self.shape().to_vec(),
            data: self.angles.clone(),
        }
    }

    pub fn from_tensor(t: &Tensor) -> Result<Self> {
        match t.shape.as_slice() {
            [CIRCUITS, blocks, QUBITS, ANGLES_PER_ROT] => Self::from_vec(*blocks, t.data.clone()),
            other => Err(Error::shape(format!(
                "generator tensor shape {other:?} is not [32, S, 5, 3]"
            ))),
        }
    }

    /// Read-time view of the angles seen by inverse circuit `circuit`.
    pub fn inverse_view(&self, circuit: usize) -> Result<InverseView<'_>> {
        if circuit >= CIRCUITS {
            return Err(Error::Index(format!("circuit {circuit} out of range")));
        }
        Ok(InverseView {
            params: self,
            circuit,
        })
    }
}

/// Angles of inverse circuit `u_l` expressed through the forward storage.
///
/// Inverse block `f` reads forward block `S − 1 − f`, and the inverse gate
/// on qubit `n` is `Rot(−γ, −β, −α)` of the forward gate.
pub struct InverseView<'a> {
    params: &'a GeneratorParams,
    circuit: usize,
}

impl InverseView<'_> {
    pub fn forward_block(&self, inverse_block: usize) -> usize {
        self.params.blocks - 1 - inverse_block
    }

    /// `[α, β, γ]` of the inverse gate in inverse block `block`, qubit `qubit`.
    pub fn rot_angles(&self, block: usize, qubit: usize) -> [f64; 3] {
        let fb = self.forward_block(block);
        let p = self.params;
        [
            -p.get(self.circuit, fb, qubit, 2),
            -p.get(self.circuit, fb, qubit, 1),
            -p.get(self.circuit, fb, qubit, 0),
        ]
    }
}

/// Gate lists for one circuit of `G` or `F`.
#[derive(Clone, Debug, PartialEq)]
pub struct CircuitTemplate {
    pub direction: Direction,
    pub circuit: usize,
    pub gates: Vec<Gate>,
}

impl CircuitTemplate {
    pub fn forward(circuit: usize, blocks: usize) -> Self {
        let layout = GeneratorParams {
            blocks,
            angles: Vec::new(),
        };
        let mut gates = Vec::with_capacity(blocks * (2 * QUBITS - 1));
        for f in 0..blocks {
            for n in 0..QUBITS {
                let at = |r| AngleRef::new(layout.index(circuit, f, n, r));
                gates.push(Gate::rot(n, [at(0), at(1), at(2)]));
            }
            for n in 0..QUBITS - 1 {
                gates.push(Gate::cnot(n, n + 1));
            }
        }
        Self {
            direction: Direction::Forward,
            circuit,
            gates,
        }
    }

    pub fn inverse(circuit: usize, blocks: usize, mode: InverseMode) -> Self {
        let forward = Self::forward(circuit, blocks);
        let gates = forward
            .gates
            .iter()
            .rev()
            .map(|g| match *g {
                Gate::Cnot { .. } => *g,
                Gate::Rot { wire, angles: [a, b, c] } => {
                    let neg = |r: AngleRef| AngleRef::negated(r.index);
                    let refs = match mode {
                        InverseMode::Exact => [neg(c), neg(b), neg(a)],
                        InverseMode::NegateOnly => [neg(a), neg(b), neg(c)],
                    };
                    Gate::rot(wire, refs)
                }
            })
            .collect();
        Self {
            direction: Direction::Inverse,
            circuit,
            gates,
        }
    }

    pub fn cnot_count(&self) -> usize {
        self.gates.iter().filter(|g| g.is_cnot()).count()
    }

    pub fn rot_count(&self) -> usize {
        self.gates.len() - self.cnot_count()
    }

    /// One rotation layer and one entanglement layer per block.
    pub fn layer_count(&self) -> usize {
        let blocks = self.rot_count() / QUBITS;
        2 * blocks
    }
}

/// Splits an image into its 32 rows.
pub fn split_patches(image: &ImageTensor) -> Vec<[f64; PATCH_LEN]> {
    (0..CIRCUITS)
        .map(|k| {
            let mut p = [0.0; PATCH_LEN];
            p.copy_from_slice(image.row(k));
            p
        })
        .collect()
}

pub fn assemble_patches(patches: &[[f64; PATCH_LEN]]) -> Result<ImageTensor> {
    if patches.len() != CIRCUITS {
        return Err(Error::shape(format!(
            "expected {CIRCUITS} patches, got {}",
            patches.len()
        )));
    }
    let mut pixels = Vec::with_capacity(PIXELS);
    for p in patches {
        pixels.extend_from_slice(p);
    }
    ImageTensor::from_vec(pixels)
}

pub fn decode_probs_to_pixels(probs: &[f64], rule: DecodeRule) -> Vec<f64> {
    match rule {
        DecodeRule::MaxNorm => {
            let max = probs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            if max <= 0.0 || !max.is_finite() {
                return vec![1.0; probs.len()];
            }
            probs.iter().map(|p| p / max).collect()
        }
        DecodeRule::SumNorm => {
            let scale = probs.len() as f64;
            probs.iter().map(|p| (p * scale).min(1.0)).collect()
        }
    }
}

/// Index of the first maximum.
fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Pulls `∂L/∂pixels` back to `∂L/∂probs` through the decode rule.
///
/// Max-norm routes the derivative of the maximum to the first argmax.
pub fn decode_backward(probs: &[f64], upstream: &[f64], rule: DecodeRule) -> Vec<f64> {
    match rule {
        DecodeRule::MaxNorm => {
            let j = argmax(probs);
            let max = probs[j];
            if max <= 0.0 {
                return vec![0.0; probs.len()];
            }
            let mut grad: Vec<f64> = upstream.iter().map(|g| g / max).collect();
            let through_max: f64 = upstream
                .iter()
                .zip(probs)
                .map(|(g, p)| g * p)
                .sum::<f64>()
                / (max * max);
            grad[j] -= through_max;
            grad
        }
        DecodeRule::SumNorm => {
            let scale = probs.len() as f64;
            probs
                .iter()
                .zip(upstream)
                .map(|(p, g)| if p * scale < 1.0 { g * scale } else { 0.0 })
                .collect()
        }
    }
}

/// Both quantum generators: prebuilt circuits for `G` and `F` plus the
/// decode rule. Parameters are passed in, never owned.
#[derive(Clone, Debug)]
pub struct QuantumGenerator {
    blocks: usize,
    decode: DecodeRule,
    forward: Vec<CircuitTemplate>,
    inverse: Vec<CircuitTemplate>,
}

impl QuantumGenerator {
    pub fn new(blocks: usize, decode: DecodeRule) -> Self {
        Self::with_inverse_mode(blocks, decode, InverseMode::Exact)
    }

    pub fn with_inverse_mode(blocks: usize, decode: DecodeRule, mode: InverseMode) -> Self {
        Self {
            blocks,
            decode,
            forward: (0..CIRCUITS)
                .map(|k| CircuitTemplate::forward(k, blocks))
                .collect(),
            inverse: (0..CIRCUITS)
                .map(|k| CircuitTemplate::inverse(k, blocks, mode))
                .collect(),
        }
    }

    pub fn blocks(&self) -> usize {
        self.blocks
    }

    pub fn decode_rule(&self) -> DecodeRule {
        self.decode
    }

    pub fn circuit(&self, direction: Direction, k: usize) -> &CircuitTemplate {
        match direction {
            Direction::Forward => &self.forward[k],
            Direction::Inverse => &self.inverse[k],
        }
    }

    fn check_params(&self, params: &GeneratorParams) -> Result<()> {
        if params.blocks != self.blocks {
            return Err(Error::shape(format!(
                "generator built for {} blocks, parameters have {}",
                self.blocks, params.blocks
            )));
        }
        Ok(())
    }

    /// Output state of circuit `k` for an encoded patch.
    pub fn evolve_patch(
        &self,
        params: &GeneratorParams,
        direction: Direction,
        k: usize,
        input: &StateVector,
    ) -> Result<StateVector> {
        self.check_params(params)?;
        qsim::run_circuit(&self.circuit(direction, k).gates, &params.angles, input)
    }

    /// Circuit-only pass over raw per-patch amplitude vectors, bypassing
    /// encode and decode.
    pub fn evolve_raw(
        &self,
        params: &GeneratorParams,
        direction: Direction,
        patches: &[Vec<C64>],
    ) -> Result<Vec<Vec<C64>>> {
        self.check_params(params)?;
        if patches.len() != CIRCUITS || patches.iter().any(|p| p.len() != PATCH_LEN) {
            return Err(Error::shape("expected 32 patches of 32 amplitudes"));
        }
        Ok(patches
            .iter()
            .enumerate()
            .map(|(k, p)| {
                let mut amps = p.clone();
                qsim::evolve_raw(&self.circuit(direction, k).gates, &params.angles, &mut amps, QUBITS);
                amps
            })
            .collect())
    }

    fn patch_probs(
        &self,
        params: &GeneratorParams,
        direction: Direction,
        k: usize,
        patch: &[f64],
    ) -> Result<(StateVector, Vec<f64>)> {
        let input = qsim::amplitude_encode(patch)?;
        let out = self.evolve_patch(params, direction, k, &input)?;
        Ok((input, qsim::measure_probs(&out)))
    }

    /// Encode → circuit → measure → decode for every row, then reassemble.
    pub fn translate(
        &self,
        image: &ImageTensor,
        params: &GeneratorParams,
        direction: Direction,
    ) -> Result<ImageTensor> {
        self.check_params(params)?;
        let mut pixels = Vec::with_capacity(PIXELS);
        for k in 0..CIRCUITS {
            let (_, probs) = self.patch_probs(params, direction, k, image.row(k))?;
            pixels.extend(decode_probs_to_pixels(&probs, self.decode));
        }
        ImageTensor::from_vec(pixels)
    }

    pub fn translate_batch(
        &self,
        images: &[ImageTensor],
        params: &GeneratorParams,
        direction: Direction,
    ) -> Result<Vec<ImageTensor>> {
        images
            .par_iter()
            .map(|img| self.translate(img, params, direction))
            .collect()
    }

    /// `∂L/∂params` given `∂L/∂output` for one translated image.
    pub fn generator_grad(
        &self,
        image: &ImageTensor,
        params: &GeneratorParams,
        direction: Direction,
        upstream: &[f64],
    ) -> Result<Vec<f64>> {
        let mut grad = vec![0.0; params.len()];
        self.generator_grad_into(image, params, direction, upstream, &mut grad)?;
        Ok(grad)
    }

    pub fn generator_grad_into(
        &self,
        image: &ImageTensor,
        params: &GeneratorParams,
        direction: Direction,
        upstream: &[f64],
        grad: &mut [f64],
    ) -> Result<()> {
        self.check_params(params)?;
        if upstream.len() != PIXELS {
            return Err(Error::shape(format!(
                "upstream has {} entries, image has {PIXELS}",
                upstream.len()
            )));
        }
        if grad.len() != params.len() {
            return Err(Error::shape("gradient buffer does not match parameters"));
        }
        for k in 0..CIRCUITS {
            let up_row = &upstream[k * SIDE..(k + 1) * SIDE];
            if up_row.iter().all(|g| *g == 0.0) {
                continue;
            }
            let (input, probs) = self.patch_probs(params, direction, k, image.row(k))?;
            let dprobs = decode_backward(&probs, up_row, self.decode);
            qsim::circuit_grad_into(
                &self.circuit(direction, k).gates,
                &params.angles,
                &input,
                &dprobs,
                grad,
            )?;
        }
        Ok(())
    }
}
