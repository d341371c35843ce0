//! Exact n-qubit Pauli algebra.
//!
//! A [`PauliString`] is stored as a pair of bitmasks: bit `q` of `x` (resp. `z`)
//! is set when qubit `q` carries an X (resp. Z) component, so `Y = i·X·Z`.
//! Phases are kept apart from the string so that channel code can drop them.

use crate::circuit::{HardCycle, TwoQubitKind};
use crate::error::{Error, Result};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

/// Largest register a [`PauliString`] can describe.
pub const MAX_QUBITS: usize = 32;

/// Single-qubit Pauli label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub const ALL: [Pauli; 4] = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z];

    #[inline]
    pub fn bits(self) -> (bool, bool) {
        match self {
            Pauli::I => (false, false),
            Pauli::X => (true, false),
            Pauli::Y => (true, true),
            Pauli::Z => (false, true),
        }
    }

    #[inline]
    pub fn from_bits(x: bool, z: bool) -> Pauli {
        match (x, z) {
            (false, false) => Pauli::I,
            (true, false) => Pauli::X,
            (true, true) => Pauli::Y,
            (false, true) => Pauli::Z,
        }
    }

    pub fn as_char(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }

    fn digit(self) -> u64 {
        match self {
            Pauli::I => 0,
            Pauli::X => 1,
            Pauli::Y => 2,
            Pauli::Z => 3,
        }
    }
}

/// A power of `i`: one of `+1, +i, -1, -i`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Phase(u8);

impl Phase {
    pub const ONE: Phase = Phase(0);
    pub const I: Phase = Phase(1);
    pub const MINUS_ONE: Phase = Phase(2);
    pub const MINUS_I: Phase = Phase(3);

    /// `i^k`.
    pub fn from_power(k: i64) -> Phase {
        Phase(k.rem_euclid(4) as u8)
    }

    pub fn power(self) -> u8 {
        self.0
    }

    /// Complex value as `(re, im)`.
    pub fn value(self) -> (f64, f64) {
        match self.0 {
            0 => (1.0, 0.0),
            1 => (0.0, 1.0),
            2 => (-1.0, 0.0),
            _ => (0.0, -1.0),
        }
    }

    pub fn is_real(self) -> bool {
        self.0 % 2 == 0
    }
}

impl std::ops::Mul for Phase {
    type Output = Phase;
    fn mul(self, rhs: Phase) -> Phase {
        Phase((self.0 + rhs.0) % 4)
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self.0 {
            0 => "+1",
            1 => "+i",
            2 => "-1",
            _ => "-i",
        })
    }
}

/// Phase-free label of an n-qubit Pauli operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PauliString {
    n: u8,
    x: u64,
    z: u64,
}

impl PauliString {
    pub fn identity(n: usize) -> PauliString {
        assert!(n <= MAX_QUBITS, "at most {MAX_QUBITS} qubits");
        PauliString { n: n as u8, x: 0, z: 0 }
    }

    /// Builds a string from raw masks; bits at positions `>= n` are discarded.
    pub fn from_masks(n: usize, x: u64, z: u64) -> PauliString {
        assert!(n <= MAX_QUBITS, "at most {MAX_QUBITS} qubits");
        let mask = full_mask(n);
        PauliString { n: n as u8, x: x & mask, z: z & mask }
    }

    /// Single-qubit Pauli `p` on qubit `q`, identity elsewhere.
    pub fn single(n: usize, q: usize, p: Pauli) -> PauliString {
        let mut s = PauliString::identity(n);
        s.set(q, p);
        s
    }

    pub fn from_paulis(ps: &[Pauli]) -> PauliString {
        let mut s = PauliString::identity(ps.len());
        for (q, &p) in ps.iter().enumerate() {
            s.set(q, p);
        }
        s
    }

    /// The `k`-th string in label order (`I < X < Y < Z`, qubit 0 most significant).
    pub fn from_index(n: usize, mut k: u64) -> PauliString {
        let mut s = PauliString::identity(n);
        for q in (0..n).rev() {
            let p = match k & 3 {
                0 => Pauli::I,
                1 => Pauli::X,
                2 => Pauli::Y,
                _ => Pauli::Z,
            };
            s.set(q, p);
            k >>= 2;
        }
        s
    }

    /// Inverse of [`PauliString::from_index`].
    pub fn index(&self) -> u64 {
        (0..self.len()).fold(0u64, |acc, q| (acc << 2) | self.get(q).digit())
    }

    /// All `4^n` strings in label order.
    pub fn all(n: usize) -> impl Iterator<Item = PauliString> {
        assert!(n <= 16, "enumeration limited to 16 qubits");
        (0..(1u64 << (2 * n))).map(move |k| PauliString::from_index(n, k))
    }

    /// All strings of weight at most `k`, in label order.
    pub fn up_to_weight(n: usize, k: usize) -> Vec<PauliString> {
        PauliString::all(n).filter(|p| p.weight() <= k).collect()
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.n as usize
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn x_mask(&self) -> u64 {
        self.x
    }

    #[inline]
    pub fn z_mask(&self) -> u64 {
        self.z
    }

    #[inline]
    pub fn get(&self, q: usize) -> Pauli {
        Pauli::from_bits((self.x >> q) & 1 == 1, (self.z >> q) & 1 == 1)
    }

    pub fn set(&mut self, q: usize, p: Pauli) {
        assert!(q < self.len(), "qubit {q} out of range for {} qubits", self.n);
        let (x, z) = p.bits();
        let bit = 1u64 << q;
        self.x = if x { self.x | bit } else { self.x & !bit };
        self.z = if z { self.z | bit } else { self.z & !bit };
    }

    #[inline]
    pub fn is_identity(&self) -> bool {
        self.x == 0 && self.z == 0
    }

    /// Number of non-identity positions.
    #[inline]
    pub fn weight(&self) -> usize {
        (self.x | self.z).count_ones() as usize
    }

    /// Qubits on which the string acts non-trivially.
    pub fn support(&self) -> Vec<usize> {
        (0..self.len()).filter(|&q| self.get(q) != Pauli::I).collect()
    }

    /// Number of Y factors; the matrix of the string is `i^{#Y} X^x Z^z`.
    #[inline]
    pub fn y_count(&self) -> u32 {
        (self.x & self.z).count_ones()
    }

    /// Restriction to the listed qubits, in the listed order.
    pub fn restrict(&self, qubits: &[usize]) -> PauliString {
        let ps: Vec<Pauli> = qubits.iter().map(|&q| self.get(q)).collect();
        PauliString::from_paulis(&ps)
    }

    /// Whether the string is diagonal in the computational basis.
    pub fn is_diagonal(&self) -> bool {
        self.x == 0
    }
}

#[inline]
fn full_mask(n: usize) -> u64 {
    if n >= 64 {
        u64::MAX
    } else {
        (1u64 << n) - 1
    }
}

fn check_len(a: &PauliString, b: &PauliString) -> Result<()> {
    if a.n != b.n {
        return Err(Error::LengthMismatch { left: a.len(), right: b.len() });
    }
    Ok(())
}

/// Product `A·B = φ·C`.
pub fn pauli_mul(a: &PauliString, b: &PauliString) -> Result<(Phase, PauliString)> {
    check_len(a, b)?;
    Ok(mul_unchecked(a, b))
}

#[inline]
pub(crate) fn mul_unchecked(a: &PauliString, b: &PauliString) -> (Phase, PauliString) {
    let x = a.x ^ b.x;
    let z = a.z ^ b.z;
    let k = (a.x & a.z).count_ones() as i64 + (b.x & b.z).count_ones() as i64
        + 2 * (a.z & b.x).count_ones() as i64
        - (x & z).count_ones() as i64;
    (Phase::from_power(k), PauliString { n: a.n, x, z })
}

/// Phase-free product, the group law used by Pauli channels.
#[inline]
pub fn compose(a: &PauliString, b: &PauliString) -> PauliString {
    debug_assert_eq!(a.n, b.n);
    PauliString { n: a.n, x: a.x ^ b.x, z: a.z ^ b.z }
}

/// 0 when the operators commute, 1 when they anticommute.
pub fn symplectic_inner(a: &PauliString, b: &PauliString) -> Result<u8> {
    check_len(a, b)?;
    Ok(anticommutes(a, b) as u8)
}

#[inline]
pub(crate) fn anticommutes(a: &PauliString, b: &PauliString) -> bool {
    ((a.x & b.z) ^ (a.z & b.x)).count_ones() & 1 == 1
}

/// Image of a single generator under a Clifford conjugation, with its phase.
type Image = (Phase, PauliString);

fn conjugate_by_images(p: &PauliString, x_img: &[Image], z_img: &[Image]) -> Image {
    // P = i^{#Y} · Π X_q^{x_q} · Π Z_q^{z_q}
    let mut acc = (Phase::from_power(p.y_count() as i64), PauliString::identity(p.len()));
    for q in 0..p.len() {
        if (p.x >> q) & 1 == 1 {
            let (ph, s) = mul_unchecked(&acc.1, &x_img[q].1);
            acc = (acc.0 * ph * x_img[q].0, s);
        }
    }
    for q in 0..p.len() {
        if (p.z >> q) & 1 == 1 {
            let (ph, s) = mul_unchecked(&acc.1, &z_img[q].1);
            acc = (acc.0 * ph * z_img[q].0, s);
        }
    }
    acc
}

/// Generator images `U X_q U†`, `U Z_q U†` for a hard cycle.
fn cycle_images(cycle: &HardCycle) -> (Vec<Image>, Vec<Image>) {
    let n = cycle.n();
    let mut xi: Vec<Image> =
        (0..n).map(|q| (Phase::ONE, PauliString::single(n, q, Pauli::X))).collect();
    let mut zi: Vec<Image> =
        (0..n).map(|q| (Phase::ONE, PauliString::single(n, q, Pauli::Z))).collect();
    for g in cycle.gates() {
        let (a, b) = (g.q0, g.q1);
        match g.kind {
            TwoQubitKind::Cz => {
                // X_a -> X_a Z_b, X_b -> Z_a X_b, Z fixed
                let mut s = PauliString::single(n, a, Pauli::X);
                s.set(b, Pauli::Z);
                xi[a] = (Phase::ONE, s);
                let mut s = PauliString::single(n, b, Pauli::X);
                s.set(a, Pauli::Z);
                xi[b] = (Phase::ONE, s);
            }
            TwoQubitKind::Cx => {
                // control a, target b: X_a -> X_a X_b, Z_b -> Z_a Z_b
                let mut s = PauliString::single(n, a, Pauli::X);
                s.set(b, Pauli::X);
                xi[a] = (Phase::ONE, s);
                let mut s = PauliString::single(n, b, Pauli::Z);
                s.set(a, Pauli::Z);
                zi[b] = (Phase::ONE, s);
            }
        }
    }
    (xi, zi)
}

/// `H·P·H†` for a hard (Clifford) cycle `H`, as a phased Pauli string.
pub fn conjugate_by_cycle(cycle: &HardCycle, p: &PauliString) -> Result<(Phase, PauliString)> {
    if cycle.n() != p.len() {
        return Err(Error::LengthMismatch { left: cycle.n(), right: p.len() });
    }
    let (xi, zi) = cycle_images(cycle);
    Ok(conjugate_by_images(p, &xi, &zi))
}

/// Conjugation by a hard cycle with precomputed generator images.
///
/// Used on hot paths (randomized compiling, benchmarking) where the same cycle
/// conjugates many strings.
#[derive(Debug, Clone)]
pub struct CycleConjugator {
    xi: Vec<Image>,
    zi: Vec<Image>,
}

impl CycleConjugator {
    pub fn new(cycle: &HardCycle) -> Self {
        let (xi, zi) = cycle_images(cycle);
        CycleConjugator { xi, zi }
    }

    pub fn conjugate(&self, p: &PauliString) -> (Phase, PauliString) {
        debug_assert_eq!(p.len(), self.xi.len());
        conjugate_by_images(p, &self.xi, &self.zi)
    }
}

impl PartialOrd for PauliString {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for PauliString {
    fn cmp(&self, other: &Self) -> Ordering {
        self.n.cmp(&other.n).then_with(|| self.index().cmp(&other.index()))
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for q in 0..self.len() {
            write!(f, "{}", self.get(q).as_char())?;
        }
        Ok(())
    }
}

impl FromStr for PauliString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.len() > MAX_QUBITS {
            return Err(Error::Parse(format!("pauli string longer than {MAX_QUBITS}: {s}")));
        }
        let ps = s
            .chars()
            .map(|ch| match ch {
                'I' | 'i' => Ok(Pauli::I),
                'X' | 'x' => Ok(Pauli::X),
                'Y' | 'y' => Ok(Pauli::Y),
                'Z' | 'z' => Ok(Pauli::Z),
                other => Err(Error::Parse(format!("invalid pauli label '{other}' in {s}"))),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(PauliString::from_paulis(&ps))
    }
}

impl Serialize for PauliString {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for PauliString {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
