//! Density-matrix evolution for the exact engine.

use crate::circuit::{HardCycle, TwoQubitKind};
use crate::linalg::{CMatrix, Mat2};
use crate::pauli::PauliString;
use crate::scalar::{cone, czero, Real, C};

/// `ρ` stored row-major as a `2^n × 2^n` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix<T: Real> {
    n: usize,
    rho: CMatrix<T>,
}

impl<T: Real> DensityMatrix<T> {
    /// `|0…0⟩⟨0…0|`.
    pub fn zero(n: usize) -> Self {
        let dim = 1usize << n;
        let mut rho = CMatrix::zeros(dim, dim);
        rho[(0, 0)] = cone();
        DensityMatrix { n, rho }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn matrix(&self) -> &CMatrix<T> {
        &self.rho
    }

    pub fn from_matrix(n: usize, rho: CMatrix<T>) -> Self {
        DensityMatrix { n, rho }
    }

    fn dim(&self) -> usize {
        1 << self.n
    }

    /// `ρ ↦ U ρ U†` for a single-qubit `U`.
    pub fn apply_1q(&mut self, q: usize, u: &Mat2<T>) {
        let bit = 1usize << q;
        let dim = self.dim();
        // rows: ρ ← U ρ
        for col in 0..dim {
            for i in 0..dim {
                if i & bit == 0 {
                    let (a, b) = (self.rho[(i, col)], self.rho[(i | bit, col)]);
                    self.rho[(i, col)] = u[0][0] * a + u[0][1] * b;
                    self.rho[(i | bit, col)] = u[1][0] * a + u[1][1] * b;
                }
            }
        }
        // columns: ρ ← ρ U†
        for row in 0..dim {
            for j in 0..dim {
                if j & bit == 0 {
                    let (a, b) = (self.rho[(row, j)], self.rho[(row, j | bit)]);
                    self.rho[(row, j)] = a * u[0][0].conj() + b * u[0][1].conj();
                    self.rho[(row, j | bit)] = a * u[1][0].conj() + b * u[1][1].conj();
                }
            }
        }
    }

    pub fn apply_hard(&mut self, h: &HardCycle) {
        let dim = self.dim();
        for g in h.gates() {
            match g.kind {
                TwoQubitKind::Cz => {
                    let m = (1usize << g.q0) | (1usize << g.q1);
                    let sign = |i: usize| i & m == m;
                    for i in 0..dim {
                        for j in 0..dim {
                            if sign(i) != sign(j) {
                                self.rho[(i, j)] = -self.rho[(i, j)];
                            }
                        }
                    }
                }
                TwoQubitKind::Cx => {
                    let (c, t) = (1usize << g.q0, 1usize << g.q1);
                    let perm = |i: usize| if i & c != 0 { i ^ t } else { i };
                    let old = self.rho.clone();
                    for i in 0..dim {
                        for j in 0..dim {
                            self.rho[(perm(i), perm(j))] = old[(i, j)];
                        }
                    }
                }
            }
        }
    }

    /// `ρ ↦ Σ_k w_k P_k ρ P_k` for real (possibly negative) weights.
    pub fn apply_pauli_mixture<'a>(&mut self, terms: impl IntoIterator<Item = (&'a PauliString, T)>) {
        let dim = self.dim();
        let mut out = CMatrix::zeros(dim, dim);
        for (p, w) in terms {
            if w == T::zero() {
                continue;
            }
            let (x, z) = (p.x_mask() as usize, p.z_mask() as usize);
            for i in 0..dim {
                let si = (i & z).count_ones();
                for j in 0..dim {
                    let sj = (j & z).count_ones();
                    let v = self.rho[(i, j)];
                    let v = if (si + sj) & 1 == 1 { -v } else { v };
                    out[(i ^ x, j ^ x)] += v * w;
                }
            }
        }
        self.rho = out;
    }

    /// `ρ ↦ U ρ U†` for a full-register unitary.
    pub fn apply_dense(&mut self, u: &CMatrix<T>) {
        self.rho = u.matmul(&self.rho).matmul(&u.dagger());
    }

    /// Diagonal of `ρ` (real parts).
    pub fn probabilities(&self) -> Vec<T> {
        (0..self.dim()).map(|i| self.rho[(i, i)].re).collect()
    }

    /// `Tr(P ρ)`.
    pub fn pauli_expectation(&self, p: &PauliString) -> T {
        let dim = self.dim();
        let (x, z) = (p.x_mask() as usize, p.z_mask() as usize);
        let ph = crate::pauli::Phase::from_power(p.y_count() as i64).value();
        let ph = crate::scalar::c::<T>(ph.0, ph.1);
        // Tr(Pρ) = Σ_j ⟨j|Pρ|j⟩ = Σ_j Σ_k P_{jk} ρ_{kj}, P_{j,k} nonzero for j = k ^ x
        let mut acc: C<T> = czero();
        for k in 0..dim {
            let sign = if (k & z).count_ones() & 1 == 1 { -T::one() } else { T::one() };
            acc += self.rho[(k, k ^ x)] * sign;
        }
        (acc * ph).re
    }

    pub fn trace(&self) -> C<T> {
        self.rho.trace()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::TwoQubitGate;
    use crate::linalg::{dense_pauli, embed_single};

    fn random_rho(n: usize, seed: u64) -> CMatrix<f64> {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let dim = 1 << n;
        let mut a = CMatrix::zeros(dim, dim);
        for i in 0..dim {
            for j in 0..dim {
                a[(i, j)] = C::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
            }
        }
        let r = a.matmul(&a.dagger());
        let t = r.trace();
        r.scale(C::new(1.0, 0.0) / t)
    }

    #[test]
    fn updates_match_dense_conjugation() {
        let rho = random_rho(3, 7);
        let h = crate::circuit::named_matrix("ry", &[0.4]).unwrap();
        let u = embed_single(&h, 2, 3);
        let mut d = DensityMatrix::from_matrix(3, rho.clone());
        d.apply_1q(2, &h);
        assert!(d.rho.sub(&u.matmul(&rho).matmul(&u.dagger())).max_abs() < 1e-13);

        for g in [TwoQubitGate::cz(0, 2), TwoQubitGate::cx(1, 0)] {
            let cyc = HardCycle::new(3, vec![g]).unwrap();
            let u = cyc.dense_unitary::<f64>();
            let mut d = DensityMatrix::from_matrix(3, rho.clone());
            d.apply_hard(&cyc);
            assert!(d.rho.sub(&u.matmul(&rho).matmul(&u.dagger())).max_abs() < 1e-13);
        }
    }

    #[test]
    fn pauli_mixture_and_expectation_match_dense() {
        let rho = random_rho(2, 9);
        let terms: Vec<(PauliString, f64)> =
            vec![("II".parse().unwrap(), 0.7), ("XY".parse().unwrap(), 0.2), ("ZI".parse().unwrap(), -0.1)];
        let mut want = CMatrix::zeros(4, 4);
        for (p, w) in &terms {
            let pm = dense_pauli::<f64>(p);
            want = want.add(&pm.matmul(&rho).matmul(&pm.dagger()).scale(C::new(*w, 0.0)));
        }
        let mut d = DensityMatrix::from_matrix(2, rho.clone());
        d.apply_pauli_mixture(terms.iter().map(|(p, w)| (p, *w)));
        assert!(d.rho.sub(&want).max_abs() < 1e-13);

        for k in 0..16 {
            let p = PauliString::from_index(2, k);
            let exact = dense_pauli::<f64>(&p).matmul(&rho).trace().re;
            assert!((DensityMatrix::from_matrix(2, rho.clone()).pauli_expectation(&p) - exact).abs() < 1e-13);
        }
    }
}
