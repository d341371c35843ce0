//! Builders for the benchmark circuit families.
//!
//! Everything is compiled to the native set {cZ, single-qubit gates}; single
//! qubit gates between two hard cycles are fused into one easy-cycle slot.

use super::gates::{GateSpec, SlotAccumulator};
use super::{Circuit, Cycle, EasyCycle, HardCycle, TwoQubitGate};
use crate::error::{Error, Result};
use crate::linalg::Mat2;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use std::f64::consts::PI;

/// Incremental builder that fuses single-qubit gates between cZ cycles.
struct NativeBuilder {
    n: usize,
    pending: SlotAccumulator,
    cycles: Vec<Cycle>,
}

impl NativeBuilder {
    fn new(n: usize) -> Self {
        NativeBuilder { n, pending: SlotAccumulator::new(n), cycles: Vec::new() }
    }

    fn gate(&mut self, q: usize, name: &str, params: &[f64]) -> &mut Self {
        self.pending.push(q, GateSpec::named(name, params));
        self
    }

    fn matrix(&mut self, q: usize, m: Mat2<f64>) -> &mut Self {
        self.pending.push(q, GateSpec::Matrix(m));
        self
    }

    fn hard(&mut self, gates: Vec<TwoQubitGate>) -> &mut Self {
        let easy = EasyCycle::new(self.pending.drain());
        self.cycles.push(Cycle::Easy(easy));
        self.cycles.push(Cycle::Hard(HardCycle::new_unchecked(self.n, gates)));
        self
    }

    fn cz(&mut self, a: usize, b: usize) -> &mut Self {
        self.hard(vec![TwoQubitGate::cz(a, b)])
    }

    /// cX as `H_t · cZ · H_t`.
    fn cx(&mut self, control: usize, target: usize) -> &mut Self {
        self.gate(target, "h", &[]).cz(control, target).gate(target, "h", &[])
    }

    /// Controlled phase `diag(1,1,1,e^{iφ})` from two cX and three phase gates.
    fn cphase(&mut self, a: usize, b: usize, phi: f64) -> &mut Self {
        self.gate(b, "p", &[phi / 2.0])
            .cx(a, b)
            .gate(b, "p", &[-phi / 2.0])
            .cx(a, b)
            .gate(a, "p", &[phi / 2.0])
    }

    /// Controlled `R_Y(θ)` as `R_Y(θ/2) · cX · R_Y(−θ/2) · cX`.
    fn cry(&mut self, control: usize, target: usize, theta: f64) -> &mut Self {
        self.cx(control, target)
            .gate(target, "ry", &[-theta / 2.0])
            .cx(control, target)
            .gate(target, "ry", &[theta / 2.0])
    }

    fn finish(mut self, measure: Vec<usize>) -> Result<Circuit> {
        let easy = EasyCycle::new(self.pending.drain());
        self.cycles.push(Cycle::Easy(easy));
        Circuit::new(self.n, self.cycles, measure)
    }
}

/// Linear nearest-neighbour W-state preparation on `n ∈ [2, 6]` qubits.
///
/// Starts from `X` on qubit 0 and, for each neighbouring pair `(k, k+1)`,
/// applies a controlled `G_t = R_Y(2·acos √(1/t))` with `t = n − k` followed by
/// a cX from `k+1` to `k`. Every step costs three cZ cycles, `3(n−1)` in total.
pub fn build_w_state_circuit(n: usize) -> Result<Circuit> {
    if !(2..=6).contains(&n) {
        return Err(Error::InvalidArgument(format!("W-state circuit needs 2 <= n <= 6, got {n}")));
    }
    let mut b = NativeBuilder::new(n);
    b.gate(0, "x", &[]);
    for k in 0..n - 1 {
        let t = (n - k) as f64;
        let theta = 2.0 * (1.0 / t).sqrt().acos();
        b.cry(k, k + 1, theta);
        b.cx(k + 1, k);
    }
    b.finish((0..n).collect())
}

/// Quantum phase estimation of `U = diag(1, e^{2πiκ})` with `t ∈ {1,2,3}` ancillae.
///
/// Qubits `0..t` are ancillae and qubit `t` is the target, prepared in `|1⟩`.
/// Ancilla `k` controls `U^{2^k}`; the inverse QFT is arranged without swaps so
/// that ancilla 0 ends up holding the most significant bit of `κ̂ = p / 2^t`.
/// All qubits are measured.
pub fn build_qpe_circuit(t: usize, kappa: f64) -> Result<Circuit> {
    if !(1..=3).contains(&t) {
        return Err(Error::InvalidArgument(format!("QPE needs 1 <= t <= 3 ancillae, got {t}")));
    }
    if !(0.0..1.0).contains(&kappa) {
        return Err(Error::InvalidArgument(format!("kappa must lie in [0,1), got {kappa}")));
    }
    let n = t + 1;
    let target = t;
    let mut b = NativeBuilder::new(n);
    b.gate(target, "x", &[]);
    for k in 0..t {
        b.gate(k, "h", &[]);
    }
    for k in 0..t {
        let phi = 2.0 * PI * kappa * (1u64 << k) as f64;
        b.cphase(k, target, phi);
    }
    // qubit k holds 0.p_{k+1} … p_t; peel bits from the last ancilla backwards
    for k in (0..t).rev() {
        for j in k + 1..t {
            let phi = -2.0 * PI / (1u64 << (j - k + 1)) as f64;
            b.cphase(j, k, phi);
        }
        b.gate(k, "h", &[]);
    }
    b.finish((0..n).collect())
}

/// Haar-random single-qubit unitary (Gram–Schmidt of a complex Gaussian matrix).
pub fn haar_unitary<R: rand::Rng + ?Sized>(rng: &mut R) -> Mat2<f64> {
    let mut g = || Complex64::new(StandardNormal.sample(rng), StandardNormal.sample(rng));
    let (a0, a1, b0, b1) = (g(), g(), g(), g());
    let na = (a0.norm_sqr() + a1.norm_sqr()).sqrt();
    let (u0, u1) = (a0 / na, a1 / na);
    let proj = u0.conj() * b0 + u1.conj() * b1;
    let (w0, w1) = (b0 - u0 * proj, b1 - u1 * proj);
    let nw = (w0.norm_sqr() + w1.norm_sqr()).sqrt();
    let (v0, v1) = (w0 / nw, w1 / nw);
    [[u0, v0], [u1, v1]]
}

/// Brick-pattern pseudo-random circuit with Haar-random single-qubit layers.
///
/// Hard cycles alternate between pairs `(1,2),(3,4),…` and `(0,1),(2,3),…`,
/// starting with the former; for `n = 2` every hard cycle is `cZ(0,1)`.
pub fn build_random_circuit(n: usize, m: usize, seed: u64) -> Result<Circuit> {
    if n < 2 || m < 1 {
        return Err(Error::InvalidArgument(format!("random circuit needs n >= 2 and m >= 1, got n={n}, m={m}")));
    }
    let odd: Vec<TwoQubitGate> = (1..n - 1).step_by(2).map(|a| TwoQubitGate::cz(a, a + 1)).collect();
    let even: Vec<TwoQubitGate> = (0..n - 1).step_by(2).map(|a| TwoQubitGate::cz(a, a + 1)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut b = NativeBuilder::new(n);
    for j in 0..m {
        for q in 0..n {
            b.matrix(q, haar_unitary(&mut rng));
        }
        let layer = if j % 2 == 0 && !odd.is_empty() { odd.clone() } else { even.clone() };
        b.hard(layer);
    }
    for q in 0..n {
        b.matrix(q, haar_unitary(&mut rng));
    }
    b.finish((0..n).collect())
}
