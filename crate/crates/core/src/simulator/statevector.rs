//! Dense state vector with the in-place updates used by the trajectory sampler.

use crate::circuit::{HardCycle, TwoQubitKind};
use crate::linalg::{CMatrix, Mat2};
use crate::pauli::PauliString;
use crate::scalar::{cone, czero, Real, C};
use rand::Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector<T: Real> {
    n: usize,
    amps: Vec<C<T>>,
}

impl<T: Real> StateVector<T> {
    /// `|0…0⟩`.
    pub fn zero(n: usize) -> Self {
        let mut amps = vec![czero(); 1 << n];
        amps[0] = cone();
        StateVector { n, amps }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn amplitudes(&self) -> &[C<T>] {
        &self.amps
    }

    pub fn reset(&mut self) {
        self.amps.iter_mut().for_each(|a| *a = czero());
        self.amps[0] = cone();
    }

    pub fn apply_1q(&mut self, q: usize, u: &Mat2<T>) {
        let bit = 1usize << q;
        for i in 0..self.amps.len() {
            if i & bit == 0 {
                let (a, b) = (self.amps[i], self.amps[i | bit]);
                self.amps[i] = u[0][0] * a + u[0][1] * b;
                self.amps[i | bit] = u[1][0] * a + u[1][1] * b;
            }
        }
    }

    pub fn apply_cz(&mut self, a: usize, b: usize) {
        let m = (1usize << a) | (1usize << b);
        for (i, amp) in self.amps.iter_mut().enumerate() {
            if i & m == m {
                *amp = -*amp;
            }
        }
    }

    pub fn apply_cx(&mut self, ctrl: usize, tgt: usize) {
        let (c, t) = (1usize << ctrl, 1usize << tgt);
        for i in 0..self.amps.len() {
            if i & c != 0 && i & t == 0 {
                self.amps.swap(i, i | t);
            }
        }
    }

    pub fn apply_hard(&mut self, h: &HardCycle) {
        for g in h.gates() {
            match g.kind {
                TwoQubitKind::Cz => self.apply_cz(g.q0, g.q1),
                TwoQubitKind::Cx => self.apply_cx(g.q0, g.q1),
            }
        }
    }

    /// Applies a Pauli string up to a global phase.
    pub fn apply_pauli(&mut self, p: &PauliString) {
        if p.is_identity() {
            return;
        }
        let (x, z) = (p.x_mask() as usize, p.z_mask() as usize);
        if z != 0 {
            for (i, a) in self.amps.iter_mut().enumerate() {
                if (i & z).count_ones() & 1 == 1 {
                    *a = -*a;
                }
            }
        }
        if x != 0 {
            for i in 0..self.amps.len() {
                let j = i ^ x;
                if i < j {
                    self.amps.swap(i, j);
                }
            }
        }
    }

    /// Applies a full-register dense unitary.
    pub fn apply_dense(&mut self, u: &CMatrix<T>) {
        let dim = self.amps.len();
        let mut out = vec![czero(); dim];
        for (r, o) in out.iter_mut().enumerate() {
            let mut acc = czero();
            for (cidx, a) in self.amps.iter().enumerate() {
                acc += u[(r, cidx)] * *a;
            }
            *o = acc;
        }
        self.amps = out;
    }

    pub fn probabilities(&self) -> Vec<T> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }

    /// `⟨ψ|P|ψ⟩` for a Pauli string (Hermitian, so the result is real).
    pub fn pauli_expectation(&self, p: &PauliString) -> T {
        let mut w = self.clone();
        w.apply_pauli(p);
        // apply_pauli drops i^{#Y}; restore it for the overlap
        let phase = crate::pauli::Phase::from_power(p.y_count() as i64).value();
        let ph = crate::scalar::c::<T>(phase.0, phase.1);
        let overlap: C<T> = self.amps.iter().zip(&w.amps).map(|(a, b)| a.conj() * *b).sum();
        (overlap * ph).re
    }

    /// Samples a basis index from `|amplitude|²`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let total: f64 = self.amps.iter().map(|a| a.norm_sqr().to_f64_lossy()).sum();
        let u = rng.random::<f64>() * total;
        let mut acc = 0.0;
        for (i, a) in self.amps.iter().enumerate() {
            acc += a.norm_sqr().to_f64_lossy();
            if u < acc {
                return i;
            }
        }
        self.amps.len() - 1
    }
}
