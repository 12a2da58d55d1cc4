//! Exact statevector simulation for circuits made of `Rot` and `CNOT` gates.
//!
//! Basis-state indexing: qubit 0 is the most significant bit, so on five
//! qubits the amplitude at index `0b10000` is `|1⟩` on qubit 0 and `|0⟩`
//! everywhere else. Patch pixel `j` is loaded into amplitude `j`.
//!
//! Gradients are computed with an adjoint sweep over the simulated state:
//! the circuit is run forward once, then the state and the co-state
//! (`diag(upstream)·ψ`) are un-computed gate by gate while each rotation
//! angle collects `Im⟨φ|P|ψ⟩` for its generator `P`.

use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Tolerance used when accepting caller-supplied amplitudes as a unit vector.
pub const NORM_TOLERANCE: f64 = 1e-10;

/// A pure `n`-qubit state with `2^n` amplitudes and unit norm.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amplitudes: Vec<C64>,
}

impl StateVector {
    /// `|0…0⟩` on `n_qubits` qubits.
    pub fn zero(n_qubits: usize) -> Self {
        let mut amplitudes = vec![C64::new(0.0, 0.0); 1 << n_qubits];
        amplitudes[0] = C64::new(1.0, 0.0);
        Self {
            n_qubits,
            amplitudes,
        }
    }

    /// Computational basis state `|index⟩`.
    pub fn basis(n_qubits: usize, index: usize) -> Result<Self> {
        let dim = 1usize << n_qubits;
        if index >= dim {
            return Err(Error::Index(format!(
                "basis index {index} out of range for {n_qubits} qubits"
            )));
        }
        let mut amplitudes = vec![C64::new(0.0, 0.0); dim];
        amplitudes[index] = C64::new(1.0, 0.0);
        Ok(Self {
            n_qubits,
            amplitudes,
        })
    }

    /// Wraps amplitudes that must already have unit norm.
    pub fn from_amplitudes(amplitudes: Vec<C64>) -> Result<Self> {
        let n_qubits = qubits_for_len(amplitudes.len())?;
        let norm_sq: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        if !norm_sq.is_finite() || (norm_sq - 1.0).abs() > NORM_TOLERANCE {
            return Err(Error::Data(format!(
                "amplitudes are not normalized (squared norm {norm_sq})"
            )));
        }
        Ok(Self {
            n_qubits,
            amplitudes,
        })
    }

    /// Normalizes arbitrary non-zero amplitudes.
    pub fn normalized(mut amplitudes: Vec<C64>) -> Result<Self> {
        let n_qubits = qubits_for_len(amplitudes.len())?;
        let norm = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::Data("cannot normalize a zero or non-finite vector".into()));
        }
        for a in &mut amplitudes {
            *a /= norm;
        }
        Ok(Self {
            n_qubits,
            amplitudes,
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<C64> {
        self.amplitudes
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Euclidean distance `‖self − other‖₂`.
    pub fn distance(&self, other: &StateVector) -> f64 {
        raw_distance(&self.amplitudes, &other.amplitudes)
    }
}

pub(crate) fn raw_distance(a: &[C64], b: &[C64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).norm_sqr())
        .sum::<f64>()
        .sqrt()
}

fn qubits_for_len(len: usize) -> Result<usize> {
    if len == 0 || !len.is_power_of_two() {
        return Err(Error::shape(format!(
            "state length {len} is not a power of two"
        )));
    }
    Ok(len.trailing_zeros() as usize)
}

/// A read of one angle from a flat parameter tensor, optionally negated.
///
/// Inverse circuits are described entirely by these references: they point
/// back into the forward circuit's storage instead of owning copies.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AngleRef {
    pub index: usize,
    pub negate: bool,
}

impl AngleRef {
    pub const fn new(index: usize) -> Self {
        Self {
            index,
            negate: false,
        }
    }

    pub const fn negated(index: usize) -> Self {
        Self {
            index,
            negate: true,
        }
    }

    #[inline]
    fn sign(&self) -> f64 {
        if self.negate {
            -1.0
        } else {
            1.0
        }
    }

    #[inline]
    pub fn read(&self, angles: &[f64]) -> f64 {
        self.sign() * angles[self.index]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Gate {
    /// `Rz(γ)·Ry(β)·Rz(α)` with `angles = [α, β, γ]`.
    Rot { wire: usize, angles: [AngleRef; 3] },
    Cnot { control: usize, target: usize },
}

impl Gate {
    pub fn rot(wire: usize, angles: [AngleRef; 3]) -> Self {
        Gate::Rot { wire, angles }
    }

    pub fn cnot(control: usize, target: usize) -> Self {
        Gate::Cnot { control, target }
    }

    pub fn is_cnot(&self) -> bool {
        matches!(self, Gate::Cnot { .. })
    }
}

/// Checks wires against `n_qubits` and angle references against `n_angles`.
pub fn validate_circuit(gates: &[Gate], n_qubits: usize, n_angles: usize) -> Result<()> {
    for (pos, gate) in gates.iter().enumerate() {
        match *gate {
            Gate::Rot { wire, angles } => {
                check_wire(wire, n_qubits)?;
                if let Some(bad) = angles.iter().find(|r| r.index >= n_angles) {
                    return Err(Error::Config(format!(
                        "gate {pos}: angle reference {} outside parameter slice of length {n_angles}",
                        bad.index
                    )));
                }
            }
            Gate::Cnot { control, target } => check_cnot_wires(control, target, n_qubits)?,
        }
    }
    Ok(())
}

fn check_wire(wire: usize, n_qubits: usize) -> Result<()> {
    if wire >= n_qubits {
        return Err(Error::Index(format!(
            "wire {wire} out of range for {n_qubits} qubits"
        )));
    }
    Ok(())
}

fn check_cnot_wires(control: usize, target: usize, n_qubits: usize) -> Result<()> {
    check_wire(control, n_qubits)?;
    check_wire(target, n_qubits)?;
    if control == target {
        return Err(Error::Index(format!(
            "CNOT control and target are both wire {control}"
        )));
    }
    Ok(())
}

#[inline]
fn wire_mask(n_qubits: usize, wire: usize) -> usize {
    1 << (n_qubits - 1 - wire)
}

type Mat2 = [[C64; 2]; 2];

/// Matrix of `Rz(γ)·Ry(β)·Rz(α)`.
pub fn rot_matrix(alpha: f64, beta: f64, gamma: f64) -> Mat2 {
    let (s, c) = (beta / 2.0).sin_cos();
    let sum = (alpha + gamma) / 2.0;
    let diff = (alpha - gamma) / 2.0;
    [
        [
            C64::from_polar(c, -sum),
            -C64::from_polar(s, diff),
        ],
        [C64::from_polar(s, -diff), C64::from_polar(c, sum)],
    ]
}

fn rz_matrix(theta: f64) -> Mat2 {
    let zero = C64::new(0.0, 0.0);
    [
        [C64::from_polar(1.0, -theta / 2.0), zero],
        [zero, C64::from_polar(1.0, theta / 2.0)],
    ]
}

fn ry_matrix(theta: f64) -> Mat2 {
    let (s, c) = (theta / 2.0).sin_cos();
    [
        [C64::new(c, 0.0), C64::new(-s, 0.0)],
        [C64::new(s, 0.0), C64::new(c, 0.0)],
    ]
}

fn apply_single_raw(amps: &mut [C64], n_qubits: usize, wire: usize, m: &Mat2) {
    let mask = wire_mask(n_qubits, wire);
    for i in 0..amps.len() {
        if i & mask != 0 {
            continue;
        }
        let j = i | mask;
        let (a0, a1) = (amps[i], amps[j]);
        amps[i] = m[0][0] * a0 + m[0][1] * a1;
        amps[j] = m[1][0] * a0 + m[1][1] * a1;
    }
}

fn apply_cnot_raw(amps: &mut [C64], n_qubits: usize, control: usize, target: usize) {
    let cmask = wire_mask(n_qubits, control);
    let tmask = wire_mask(n_qubits, target);
    for i in 0..amps.len() {
        if i & cmask != 0 && i & tmask == 0 {
            amps.swap(i, i | tmask);
        }
    }
}

/// Applies `Rot(α, β, γ)` to `wire`.
pub fn apply_rot(
    state: &mut StateVector,
    wire: usize,
    alpha: f64,
    beta: f64,
    gamma: f64,
) -> Result<()> {
    check_wire(wire, state.n_qubits)?;
    apply_single_raw(
        &mut state.amplitudes,
        state.n_qubits,
        wire,
        &rot_matrix(alpha, beta, gamma),
    );
    Ok(())
}

pub fn apply_cnot(state: &mut StateVector, control: usize, target: usize) -> Result<()> {
    check_cnot_wires(control, target, state.n_qubits)?;
    apply_cnot_raw(&mut state.amplitudes, state.n_qubits, control, target);
    Ok(())
}

/// Loads non-negative pixel values into amplitudes after L2 normalization.
///
/// An all-zero input encodes `|0…0⟩`.
pub fn amplitude_encode(pixels: &[f64]) -> Result<StateVector> {
    qubits_for_len(pixels.len())?;
    if let Some(bad) = pixels.iter().find(|p| !p.is_finite() || **p < 0.0) {
        return Err(Error::Data(format!(
            "pixel value {bad} is negative or not finite"
        )));
    }
    let norm = pixels.iter().map(|p| p * p).sum::<f64>().sqrt();
    if norm == 0.0 {
        return StateVector::basis(qubits_for_len(pixels.len())?, 0);
    }
    let amplitudes = pixels.iter().map(|p| C64::new(p / norm, 0.0)).collect();
    Ok(StateVector {
        n_qubits: qubits_for_len(pixels.len())?,
        amplitudes,
    })
}

/// Born-rule probabilities `|amplitude|²`.
pub fn measure_probs(state: &StateVector) -> Vec<f64> {
    state.amplitudes.iter().map(|a| a.norm_sqr()).collect()
}

/// Applies `gates` in order to raw (not necessarily normalized) amplitudes.
///
/// The caller is responsible for validation; see [`validate_circuit`].
pub fn evolve_raw(gates: &[Gate], angles: &[f64], amps: &mut [C64], n_qubits: usize) {
    for gate in gates {
        match *gate {
            Gate::Rot { wire, angles: refs } => {
                let m = rot_matrix(
                    refs[0].read(angles),
                    refs[1].read(angles),
                    refs[2].read(angles),
                );
                apply_single_raw(amps, n_qubits, wire, &m);
            }
            Gate::Cnot { control, target } => apply_cnot_raw(amps, n_qubits, control, target),
        }
    }
}

/// Runs the circuit on `input` and returns the output state.
pub fn run_circuit(gates: &[Gate], angles: &[f64], input: &StateVector) -> Result<StateVector> {
    validate_circuit(gates, input.n_qubits, angles.len())?;
    let mut out = input.clone();
    evolve_raw(gates, angles, &mut out.amplitudes, out.n_qubits);
    Ok(out)
}

/// `Im⟨φ|Z_wire|ψ⟩`
fn im_z(phi: &[C64], psi: &[C64], mask: usize) -> f64 {
    phi.iter()
        .zip(psi)
        .enumerate()
        .map(|(i, (p, s))| {
            let v = (p.conj() * s).im;
            if i & mask == 0 {
                v
            } else {
                -v
            }
        })
        .sum()
}

/// `Im⟨φ|Y_wire|ψ⟩`
fn im_y(phi: &[C64], psi: &[C64], mask: usize) -> f64 {
    let i_unit = C64::new(0.0, 1.0);
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..psi.len() {
        if i & mask != 0 {
            continue;
        }
        let j = i | mask;
        // Y|0⟩ = i|1⟩, Y|1⟩ = −i|0⟩
        acc += phi[i].conj() * (-i_unit * psi[j]);
        acc += phi[j].conj() * (i_unit * psi[i]);
    }
    acc.im
}

/// Accumulates `∂L/∂angle` into `grad` for `L = Σᵢ upstream[i]·probs[i]`.
///
/// Angles read through negated references receive the sign-flipped
/// contribution, so forward and inverse circuits can share one gradient
/// buffer.
pub fn circuit_grad_into(
    gates: &[Gate],
    angles: &[f64],
    input: &StateVector,
    upstream: &[f64],
    grad: &mut [f64],
) -> Result<()> {
    if upstream.len() != input.dim() {
        return Err(Error::shape(format!(
            "upstream has length {}, state dimension is {}",
            upstream.len(),
            input.dim()
        )));
    }
    if grad.len() != angles.len() {
        return Err(Error::shape(format!(
            "gradient buffer has length {}, parameter slice has {}",
            grad.len(),
            angles.len()
        )));
    }
    validate_circuit(gates, input.n_qubits, angles.len())?;
    let n = input.n_qubits;

    let mut psi = input.amplitudes.clone();
    evolve_raw(gates, angles, &mut psi, n);
    let mut phi: Vec<C64> = psi.iter().zip(upstream).map(|(a, u)| a * *u).collect();

    for gate in gates.iter().rev() {
        match *gate {
            Gate::Cnot { control, target } => {
                apply_cnot_raw(&mut psi, n, control, target);
                apply_cnot_raw(&mut phi, n, control, target);
            }
            Gate::Rot { wire, angles: refs } => {
                let mask = wire_mask(n, wire);
                let [a_ref, b_ref, g_ref] = refs;
                let (alpha, beta, gamma) =
                    (a_ref.read(angles), b_ref.read(angles), g_ref.read(angles));

                // Rot = Rz(γ)·Ry(β)·Rz(α); peel off from the left.
                grad[g_ref.index] += g_ref.sign() * im_z(&phi, &psi, mask);
                let undo = rz_matrix(-gamma);
                apply_single_raw(&mut psi, n, wire, &undo);
                apply_single_raw(&mut phi, n, wire, &undo);

                grad[b_ref.index] += b_ref.sign() * im_y(&phi, &psi, mask);
                let undo = ry_matrix(-beta);
                apply_single_raw(&mut psi, n, wire, &undo);
                apply_single_raw(&mut phi, n, wire, &undo);

                grad[a_ref.index] += a_ref.sign() * im_z(&phi, &psi, mask);
                let undo = rz_matrix(-alpha);
                apply_single_raw(&mut psi, n, wire, &undo);
                apply_single_raw(&mut phi, n, wire, &undo);
            }
        }
    }
    Ok(())
}

/// Gradient of `Σᵢ upstream[i]·probs[i]` with respect to every angle.
pub fn circuit_grad(
    gates: &[Gate],
    angles: &[f64],
    input: &StateVector,
    upstream: &[f64],
) -> Result<Vec<f64>> {
    let mut grad = vec![0.0; angles.len()];
    circuit_grad_into(gates, angles, input, upstream, &mut grad)?;
    Ok(grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn random_state(n: usize, rng: &mut impl Rng) -> StateVector {
        let amps = (0..1 << n)
            .map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        StateVector::normalized(amps).unwrap()
    }

    #[test]
    fn rot_identity_leaves_state_alone() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = random_state(3, &mut rng);
        let mut t = s.clone();
        apply_rot(&mut t, 1, 0.0, 0.0, 0.0).unwrap();
        assert_eq!(s, t);
    }

    #[test]
    fn ry_pi_flips_zero_to_one() {
        let mut s = StateVector::zero(1);
        apply_rot(&mut s, 0, 0.0, PI, 0.0).unwrap();
        let p = measure_probs(&s);
        assert!((p[1] - 1.0).abs() < 1e-15);
        assert!(p[0] < 1e-30);
    }

    #[test]
    fn rot_inverse_is_reversed_negated_roles() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let s = random_state(3, &mut rng);
        let mut t = s.clone();
        apply_rot(&mut t, 2, 0.3, 0.7, -0.2).unwrap();
        apply_rot(&mut t, 2, 0.2, -0.7, -0.3).unwrap();
        assert!(s.distance(&t) < 1e-12);
    }

    #[test]
    fn rot_matrix_matches_product_of_rotations() {
        let (a, b, g) = (0.41, -1.3, 2.2);
        let mut direct = StateVector::normalized(vec![C64::new(0.6, 0.1), C64::new(-0.2, 0.7)]).unwrap();
        let mut composed = direct.clone();
        apply_rot(&mut direct, 0, a, b, g).unwrap();
        for m in [rz_matrix(a), ry_matrix(b), rz_matrix(g)] {
            apply_single_raw(&mut composed.amplitudes, 1, 0, &m);
        }
        assert!(direct.distance(&composed) < 1e-14);
    }

    #[test]
    fn rot_rejects_bad_wire() {
        let mut s = StateVector::zero(2);
        assert!(matches!(apply_rot(&mut s, 2, 0.0, 0.0, 0.0), Err(Error::Index(_))));
    }

    #[test]
    fn cnot_definition() {
        let mut s = StateVector::basis(2, 0b10).unwrap();
        apply_cnot(&mut s, 0, 1).unwrap();
        assert_eq!(s, StateVector::basis(2, 0b11).unwrap());

        let mut s = StateVector::zero(2);
        apply_cnot(&mut s, 0, 1).unwrap();
        assert_eq!(s, StateVector::zero(2));
    }

    #[test]
    fn cnot_is_self_inverse() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = random_state(4, &mut rng);
        let mut t = s.clone();
        apply_cnot(&mut t, 3, 1).unwrap();
        apply_cnot(&mut t, 3, 1).unwrap();
        assert!(s.distance(&t) < 1e-14);
    }

    #[test]
    fn cnot_rejects_bad_wires() {
        let mut s = StateVector::zero(3);
        assert!(apply_cnot(&mut s, 1, 1).is_err());
        assert!(apply_cnot(&mut s, 0, 3).is_err());
    }

    #[test]
    fn encode_uniform_and_one_hot() {
        let s = amplitude_encode(&[0.5; 32]).unwrap();
        for a in s.amplitudes() {
            assert!((a.re - 1.0 / 32f64.sqrt()).abs() < 1e-15);
            assert!((a.re - 0.176777).abs() < 1e-6);
        }
        let mut px = [0.0; 32];
        px[7] = 0.9;
        let s = amplitude_encode(&px).unwrap();
        assert_eq!(s.amplitudes()[7], C64::new(1.0, 0.0));
    }

    #[test]
    fn encode_all_zero_is_ground_state() {
        let s = amplitude_encode(&[0.0; 32]).unwrap();
        assert_eq!(s, StateVector::zero(5));
    }

    #[test]
    fn encode_rejects_negative_and_bad_length() {
        assert!(amplitude_encode(&[0.1, -0.1]).is_err());
        assert!(amplitude_encode(&[0.1, 0.2, 0.3]).is_err());
        assert!(amplitude_encode(&[f64::NAN, 0.2]).is_err());
    }

    #[test]
    fn probabilities_of_simple_states() {
        assert_eq!(measure_probs(&StateVector::zero(5))[0], 1.0);
        let uniform = amplitude_encode(&[1.0; 32]).unwrap();
        for p in measure_probs(&uniform) {
            assert!((p - 0.03125).abs() < 1e-15);
        }
        let mut s = StateVector::zero(5);
        apply_rot(&mut s, 0, 0.0, PI / 2.0, 0.0).unwrap();
        let p = measure_probs(&s);
        assert!((p[0] - 0.5).abs() < 1e-15);
        assert!((p[16] - 0.5).abs() < 1e-15);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn empty_circuit_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let s = random_state(5, &mut rng);
        assert_eq!(run_circuit(&[], &[], &s).unwrap(), s);
    }

    #[test]
    fn unresolvable_angle_reference_is_config_error() {
        let gates = [Gate::rot(0, [AngleRef::new(0), AngleRef::new(1), AngleRef::new(5)])];
        let err = run_circuit(&gates, &[0.0; 3], &StateVector::zero(1)).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn zero_upstream_gives_zero_gradient() {
        let gates = [
            Gate::rot(0, [AngleRef::new(0), AngleRef::new(1), AngleRef::new(2)]),
            Gate::cnot(0, 1),
        ];
        let g = circuit_grad(&gates, &[0.3, 0.4, 0.5], &StateVector::zero(2), &[0.0; 4]).unwrap();
        assert_eq!(g, vec![0.0; 3]);
    }

    #[test]
    fn gradient_shape_mismatch() {
        let gates = [Gate::cnot(0, 1)];
        assert!(matches!(
            circuit_grad(&gates, &[], &StateVector::zero(2), &[0.0; 3]),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn single_rot_gradient_matches_finite_difference() {
        let gates = [Gate::rot(0, [AngleRef::new(0), AngleRef::new(1), AngleRef::new(2)])];
        let input = StateVector::normalized(vec![C64::new(0.3, 0.2), C64::new(0.5, -0.7)]).unwrap();
        let angles = [0.7, -0.4, 1.1];
        let upstream = [0.0, 1.0];
        let g = circuit_grad(&gates, &angles, &input, &upstream).unwrap();
        let h = 1e-5;
        for k in 0..3 {
            let mut p = angles;
            p[k] += h;
            let plus = measure_probs(&run_circuit(&gates, &p, &input).unwrap())[1];
            p[k] -= 2.0 * h;
            let minus = measure_probs(&run_circuit(&gates, &p, &input).unwrap())[1];
            let fd = (plus - minus) / (2.0 * h);
            assert!((g[k] - fd).abs() < 1e-9, "angle {k}: {} vs {fd}", g[k]);
        }
    }
}
