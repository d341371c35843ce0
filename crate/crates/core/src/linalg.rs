//! Small dense complex linear algebra.
//!
//! Basis index convention: bit `q` of a basis index is the state of qubit `q`.
//! The dense routines here back the exact oracles and are limited to a handful
//! of qubits; the trajectory simulator never builds full matrices.

use crate::pauli::PauliString;
use crate::scalar::{c, cone, czero, Real, C};

/// A 2×2 complex matrix, row-major.
pub type Mat2<T> = [[C<T>; 2]; 2];

pub fn mat2_identity<T: Real>() -> Mat2<T> {
    [[cone(), czero()], [czero(), cone()]]
}

pub fn mat2_mul<T: Real>(a: &Mat2<T>, b: &Mat2<T>) -> Mat2<T> {
    let mut out = [[czero(); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

pub fn mat2_dagger<T: Real>(a: &Mat2<T>) -> Mat2<T> {
    [[a[0][0].conj(), a[1][0].conj()], [a[0][1].conj(), a[1][1].conj()]]
}

/// Max-entry deviation of `a†a` from the identity.
pub fn mat2_unitarity_defect<T: Real>(a: &Mat2<T>) -> f64 {
    let p = mat2_mul(&mat2_dagger(a), a);
    let id = mat2_identity::<T>();
    let mut worst = 0.0f64;
    for i in 0..2 {
        for j in 0..2 {
            worst = worst.max((p[i][j] - id[i][j]).norm().to_f64_lossy());
        }
    }
    worst
}

pub fn mat2_cast<T: Real>(a: &Mat2<f64>) -> Mat2<T> {
    let cv = |z: &C<f64>| c::<T>(z.re, z.im);
    [[cv(&a[0][0]), cv(&a[0][1])], [cv(&a[1][0]), cv(&a[1][1])]]
}

/// Matrix of a single-qubit Pauli.
pub fn pauli_mat2<T: Real>(p: crate::pauli::Pauli) -> Mat2<T> {
    use crate::pauli::Pauli;
    match p {
        Pauli::I => mat2_identity(),
        Pauli::X => [[czero(), cone()], [cone(), czero()]],
        Pauli::Y => [[czero(), c(0.0, -1.0)], [c(0.0, 1.0), czero()]],
        Pauli::Z => [[cone(), czero()], [czero(), c(-1.0, 0.0)]],
    }
}

/// Dense row-major complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CMatrix<T: Real> {
    rows: usize,
    cols: usize,
    data: Vec<C<T>>,
}

impl<T: Real> CMatrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        CMatrix { rows, cols, data: vec![czero(); rows * cols] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim, dim);
        for i in 0..dim {
            m[(i, i)] = cone();
        }
        m
    }

    pub fn from_mat2(m: &Mat2<T>) -> Self {
        let mut out = Self::zeros(2, 2);
        for i in 0..2 {
            for j in 0..2 {
                out[(i, j)] = m[i][j];
            }
        }
        out
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[C<T>] {
        &self.data
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "matmul shape mismatch");
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == czero() {
                    continue;
                }
                for j in 0..other.cols {
                    out.data[i * other.cols + j] += a * other.data[k * other.cols + j];
                }
            }
        }
        out
    }

    pub fn dagger(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[(j, i)] = self[(i, j)].conj();
            }
        }
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect();
        CMatrix { rows: self.rows, cols: self.cols, data }
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        CMatrix { rows: self.rows, cols: self.cols, data }
    }

    pub fn scale(&self, s: C<T>) -> Self {
        CMatrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(|a| a * s).collect() }
    }

    pub fn trace(&self) -> C<T> {
        (0..self.rows.min(self.cols)).fold(czero(), |acc, i| acc + self[(i, i)])
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|a| a.norm_sqr().to_f64_lossy()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|a| a.norm().to_f64_lossy()).fold(0.0, f64::max)
    }

    /// Kronecker product `self ⊗ other` in plain row-major index order.
    pub fn kron(&self, other: &Self) -> Self {
        let mut out = Self::zeros(self.rows * other.rows, self.cols * other.cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                let a = self[(i, j)];
                for k in 0..other.rows {
                    for l in 0..other.cols {
                        out[(i * other.rows + k, j * other.cols + l)] = a * other[(k, l)];
                    }
                }
            }
        }
        out
    }

    /// Frobenius distance after removing the best global phase between the two.
    pub fn distance_up_to_phase(&self, other: &Self) -> f64 {
        let overlap = other.dagger().matmul(self).trace();
        let norm = overlap.norm();
        let phase = if norm.to_f64_lossy() > 0.0 { overlap / norm } else { cone() };
        self.sub(&other.scale(phase)).frobenius()
    }
}

impl<T: Real> std::ops::Index<(usize, usize)> for CMatrix<T> {
    type Output = C<T>;
    fn index(&self, (i, j): (usize, usize)) -> &C<T> {
        &self.data[i * self.cols + j]
    }
}

impl<T: Real> std::ops::IndexMut<(usize, usize)> for CMatrix<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C<T> {
        &mut self.data[i * self.cols + j]
    }
}

/// Dense `2^n × 2^n` matrix of a Pauli string.
pub fn dense_pauli<T: Real>(p: &PauliString) -> CMatrix<T> {
    let n = p.len();
    let dim = 1usize << n;
    let mut m = CMatrix::zeros(dim, dim);
    let base = crate::pauli::Phase::from_power(p.y_count() as i64).value();
    for i in 0..dim {
        let sign = if ((i as u64) & p.z_mask()).count_ones() % 2 == 1 { -1.0 } else { 1.0 };
        let j = i ^ p.x_mask() as usize;
        m[(j, i)] = c(base.0 * sign, base.1 * sign);
    }
    m
}

/// Single-qubit gate `g` acting on qubit `q` of an `n`-qubit register.
pub fn embed_single<T: Real>(g: &Mat2<T>, q: usize, n: usize) -> CMatrix<T> {
    let dim = 1usize << n;
    let mut m = CMatrix::zeros(dim, dim);
    for i in 0..dim {
        let bi = (i >> q) & 1;
        for bo in 0..2 {
            let j = (i & !(1 << q)) | (bo << q);
            m[(j, i)] = g[bo][bi];
        }
    }
    m
}

/// Controlled-Z between `a` and `b`.
pub fn dense_cz<T: Real>(a: usize, b: usize, n: usize) -> CMatrix<T> {
    let dim = 1usize << n;
    let mut m = CMatrix::zeros(dim, dim);
    for i in 0..dim {
        let v = if (i >> a) & 1 == 1 && (i >> b) & 1 == 1 { -1.0 } else { 1.0 };
        m[(i, i)] = c(v, 0.0);
    }
    m
}

/// Controlled-X with control `ctrl` and target `tgt`.
pub fn dense_cx<T: Real>(ctrl: usize, tgt: usize, n: usize) -> CMatrix<T> {
    let dim = 1usize << n;
    let mut m = CMatrix::zeros(dim, dim);
    for i in 0..dim {
        let j = if (i >> ctrl) & 1 == 1 { i ^ (1 << tgt) } else { i };
        m[(j, i)] = cone();
    }
    m
}

/// Expands a unitary acting on `qubits` (local bit `k` ↔ `qubits[k]`) to the full register.
pub fn embed_on_qubits<T: Real>(u: &CMatrix<T>, qubits: &[usize], n: usize) -> CMatrix<T> {
    let k = qubits.len();
    assert_eq!(u.rows(), 1 << k);
    let dim = 1usize << n;
    let mut m = CMatrix::zeros(dim, dim);
    let local = |i: usize| qubits.iter().enumerate().fold(0, |acc, (b, &q)| acc | (((i >> q) & 1) << b));
    let clear = qubits.iter().fold(dim - 1, |acc, &q| acc & !(1 << q));
    for i in 0..dim {
        let li = local(i);
        for lo in 0..(1 << k) {
            let a = u[(lo, li)];
            if a == czero() {
                continue;
            }
            let j = qubits.iter().enumerate().fold(i & clear, |acc, (b, &q)| acc | (((lo >> b) & 1) << q));
            m[(j, i)] += a;
        }
    }
    m
}

/// Coefficients `c_a = Tr(P_a U) / 2^n` of a matrix in the Pauli basis, in label order.
pub fn pauli_coefficients<T: Real>(u: &CMatrix<T>) -> Vec<C<T>> {
    let dim = u.rows();
    let n = dim.trailing_zeros() as usize;
    let inv = T::one() / T::of(dim as f64);
    PauliString::all(n)
        .map(|p| {
            // Tr(P U) = Σ_i <i|P U|i> = Σ_i Σ_j P_{ij} U_{ji}
            let base = crate::pauli::Phase::from_power(p.y_count() as i64).value();
            let mut acc = czero::<T>();
            for i in 0..dim {
                // P|j> = phase(j) |j ^ x>, so row i of P has its entry at column j = i ^ x
                let j = i ^ p.x_mask() as usize;
                let sign = if ((j as u64) & p.z_mask()).count_ones() % 2 == 1 { -1.0 } else { 1.0 };
                acc += c::<T>(base.0 * sign, base.1 * sign) * u[(j, i)];
            }
            acc * inv
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pauli::Pauli;
    use num_complex::Complex64;

    #[test]
    fn dense_pauli_single_qubit_matches_table() {
        for p in Pauli::ALL {
            let d = dense_pauli::<f64>(&PauliString::from_paulis(&[p]));
            assert_eq!(d, CMatrix::from_mat2(&pauli_mat2(p)));
        }
    }

    #[test]
    fn embed_single_matches_dense_pauli() {
        let n = 3;
        for q in 0..n {
            for p in Pauli::ALL {
                let a = embed_single::<f64>(&pauli_mat2(p), q, n);
                let b = dense_pauli(&PauliString::single(n, q, p));
                assert!(a.sub(&b).max_abs() < 1e-15);
            }
        }
    }

    #[test]
    fn pauli_coefficients_recover_pauli_strings() {
        for p in PauliString::all(2) {
            let coeffs = pauli_coefficients(&dense_pauli::<f64>(&p));
            for (k, cf) in coeffs.iter().enumerate() {
                let expect = if k as u64 == p.index() { 1.0 } else { 0.0 };
                assert!((cf - Complex64::new(expect, 0.0)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn embed_on_qubits_reproduces_cz_and_cx() {
        let cz2 = dense_cz::<f64>(0, 1, 2);
        assert!(embed_on_qubits(&cz2, &[2, 0], 3).sub(&dense_cz(2, 0, 3)).max_abs() < 1e-15);
        let cx2 = dense_cx::<f64>(0, 1, 2);
        assert!(embed_on_qubits(&cx2, &[1, 2], 3).sub(&dense_cx(1, 2, 3)).max_abs() < 1e-15);
    }

    #[test]
    fn distance_up_to_phase_ignores_global_phase() {
        let x = dense_pauli::<f64>(&"XZ".parse().unwrap());
        let y = x.scale(Complex64::new(0.0, 1.0));
        assert!(x.distance_up_to_phase(&y) < 1e-12);
    }
}
