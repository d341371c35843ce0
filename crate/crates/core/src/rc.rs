//! Randomized compiling: Pauli twirls merged into the easy cycles around each hard cycle.

use crate::circuit::{Circuit, GateSpec};
use crate::error::{Error, Result};
use crate::linalg::{mat2_mul, pauli_mat2};
use crate::pauli::{CycleConjugator, Pauli, PauliString};
use rand::Rng;

/// A twirl `T` applied before a hard cycle `H` and its phase-free correction `H T H†`
/// applied after it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TwirlFrame {
    pub twirl: PauliString,
    pub correction: PauliString,
}

/// Uniform draw over the `4^n` Pauli strings.
pub fn uniform_pauli<R: Rng + ?Sized>(n: usize, rng: &mut R) -> PauliString {
    let mask = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
    PauliString::from_masks(n, rng.random::<u64>() & mask, rng.random::<u64>() & mask)
}

/// Precomputed conjugators for every hard cycle of a circuit.
#[derive(Debug, Clone)]
pub struct Twirler {
    n: usize,
    conjugators: Vec<CycleConjugator>,
}

impl Twirler {
    pub fn new(circuit: &Circuit) -> Self {
        Twirler { n: circuit.n(), conjugators: circuit.hard_cycles().map(CycleConjugator::new).collect() }
    }

    pub fn frame(&self, j: usize, twirl: PauliString) -> TwirlFrame {
        TwirlFrame { twirl, correction: self.conjugators[j].conjugate(&twirl).1 }
    }

    /// One fresh frame per hard cycle.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<TwirlFrame> {
        (0..self.conjugators.len()).map(|j| self.frame(j, uniform_pauli(self.n, rng))).collect()
    }
}

/// Left-multiplies (`after = true`) or right-multiplies a Pauli factor into an easy-cycle slot.
fn merge(g: &GateSpec, p: Pauli, after: bool) -> Result<GateSpec> {
    if p == Pauli::I {
        return Ok(g.clone());
    }
    let pm = pauli_mat2::<f64>(p);
    if g.is_identity_name() {
        return Ok(GateSpec::named(&p.as_char().to_ascii_lowercase().to_string(), &[]));
    }
    let m = g.matrix()?;
    Ok(GateSpec::Matrix(if after { mat2_mul(&pm, &m) } else { mat2_mul(&m, &pm) }))
}

/// Compiles the given twirls (one per hard cycle) into the easy cycles.
pub fn compile_with_twirls(c: &Circuit, twirls: &[PauliString]) -> Result<Circuit> {
    let m = c.m();
    if twirls.len() != m {
        return Err(Error::InvalidArgument(format!("{} twirls for {m} hard cycles", twirls.len())));
    }
    let twirler = Twirler::new(c);
    let mut out = c.clone();
    for (j, t) in twirls.iter().enumerate() {
        if t.len() != c.n() {
            return Err(Error::LengthMismatch { left: c.n(), right: t.len() });
        }
        let frame = twirler.frame(j, *t);
        for q in 0..c.n() {
            let before = merge(out.easy(j).gate(q), frame.twirl.get(q), true)?;
            out.easy_mut(j).set_gate(q, before);
            let after = merge(out.easy(j + 1).gate(q), frame.correction.get(q), false)?;
            out.easy_mut(j + 1).set_gate(q, after);
        }
    }
    Ok(out)
}

/// Copy of `c` with the Pauli `p` applied right after hard cycle `j` (merged into the following easy cycle).
pub fn append_pauli(c: &Circuit, j: usize, p: &PauliString) -> Result<Circuit> {
    if j >= c.m() {
        return Err(Error::InvalidArgument(format!("no hard cycle {j} in a circuit with {}", c.m())));
    }
    if p.len() != c.n() {
        return Err(Error::LengthMismatch { left: c.n(), right: p.len() });
    }
    let mut out = c.clone();
    for q in 0..c.n() {
        let g = merge(out.easy(j + 1).gate(q), p.get(q), false)?;
        out.easy_mut(j + 1).set_gate(q, g);
    }
    Ok(out)
}

/// Draws a uniform twirl for every hard cycle and compiles it into the easy cycles.
///
/// The logical unitary is unchanged up to a global phase.
pub fn randomized_compile<R: Rng + ?Sized>(c: &Circuit, rng: &mut R) -> Result<Circuit> {
    let twirls: Vec<PauliString> = (0..c.m()).map(|_| uniform_pauli(c.n(), rng)).collect();
    compile_with_twirls(c, &twirls)
}
