//! Circuit representation with alternating easy and hard cycles.
//!
//! A circuit is `E_1, H_1, E_2, …, H_m, E_{m+1}` followed by a computational
//! basis measurement of `measure`. Easy cycles carry one single-qubit gate per
//! qubit; hard cycles carry disjoint two-qubit Clifford gates.

mod builders;
mod gates;

pub use builders::{build_qpe_circuit, build_random_circuit, build_w_state_circuit, haar_unitary};
pub use gates::{named_matrix, GateSpec};

use crate::error::{Error, Result};
use crate::linalg::{self, mat2_unitarity_defect, CMatrix, Mat2};
use crate::pauli::PauliString;
use crate::scalar::Real;
use gates::EasyGateJson;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::Path;

/// Unitarity tolerance for easy-cycle gates.
pub const UNITARITY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TwoQubitKind {
    Cz,
    Cx,
}

/// A two-qubit gate. For `Cx`, `q0` is the control and `q1` the target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TwoQubitGate {
    pub q0: usize,
    pub q1: usize,
    pub kind: TwoQubitKind,
}

impl TwoQubitGate {
    pub fn cz(a: usize, b: usize) -> Self {
        TwoQubitGate { q0: a.min(b), q1: a.max(b), kind: TwoQubitKind::Cz }
    }

    pub fn cx(control: usize, target: usize) -> Self {
        TwoQubitGate { q0: control, q1: target, kind: TwoQubitKind::Cx }
    }

    /// `cZ` is symmetric, so its qubits are stored sorted.
    fn canonical(self) -> Self {
        match self.kind {
            TwoQubitKind::Cz => TwoQubitGate::cz(self.q0, self.q1),
            TwoQubitKind::Cx => self,
        }
    }
}

/// A cycle of disjoint two-qubit Clifford gates; idle qubits get the identity.
///
/// Gates are kept in canonical order, so two structurally identical cycles
/// compare equal and share a noise entry.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct HardCycle {
    n: usize,
    gates: Vec<TwoQubitGate>,
}

impl HardCycle {
    pub fn new(n: usize, gates: Vec<TwoQubitGate>) -> Result<Self> {
        let cycle = Self::new_unchecked(n, gates);
        if let Some(v) = cycle.violations().into_iter().next() {
            return Err(Error::InvalidCircuit(v.to_string()));
        }
        Ok(cycle)
    }

    pub fn new_unchecked(n: usize, gates: Vec<TwoQubitGate>) -> Self {
        let mut gates: Vec<TwoQubitGate> = gates.into_iter().map(TwoQubitGate::canonical).collect();
        gates.sort();
        HardCycle { n, gates }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn gates(&self) -> &[TwoQubitGate] {
        &self.gates
    }

    /// Qubits not touched by any gate.
    pub fn idle_qubits(&self) -> Vec<usize> {
        (0..self.n).filter(|q| !self.gates.iter().any(|g| g.q0 == *q || g.q1 == *q)).collect()
    }

    /// Every supported hard cycle (disjoint cZ / cX) squares to the identity.
    pub fn is_self_inverse(&self) -> bool {
        true
    }

    fn violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let mut used = vec![false; self.n];
        for g in &self.gates {
            if g.q0 >= self.n || g.q1 >= self.n {
                out.push(Violation::QubitOutOfRange { qubit: g.q0.max(g.q1), n: self.n });
                continue;
            }
            if g.q0 == g.q1 {
                out.push(Violation::OverlappingGates { qubit: g.q0 });
                continue;
            }
            for q in [g.q0, g.q1] {
                if used[q] {
                    out.push(Violation::OverlappingGates { qubit: q });
                }
                used[q] = true;
            }
        }
        out
    }

    pub fn dense_unitary<T: Real>(&self) -> CMatrix<T> {
        self.gates.iter().fold(CMatrix::identity(1 << self.n), |acc, g| {
            let u = match g.kind {
                TwoQubitKind::Cz => linalg::dense_cz(g.q0, g.q1, self.n),
                TwoQubitKind::Cx => linalg::dense_cx(g.q0, g.q1, self.n),
            };
            u.matmul(&acc)
        })
    }

    /// Short text label such as `cz(0,1)+cz(2,3)`; `idle` for the empty cycle.
    pub fn label(&self) -> String {
        if self.gates.is_empty() {
            return "idle".into();
        }
        self.gates
            .iter()
            .map(|g| {
                let k = match g.kind {
                    TwoQubitKind::Cz => "cz",
                    TwoQubitKind::Cx => "cx",
                };
                format!("{k}({},{})", g.q0, g.q1)
            })
            .collect::<Vec<_>>()
            .join("+")
    }
}

impl fmt::Display for HardCycle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

/// A cycle of single-qubit gates, one slot per qubit.
#[derive(Debug, Clone, PartialEq)]
pub struct EasyCycle {
    gates: Vec<GateSpec>,
}

impl EasyCycle {
    pub fn new(gates: Vec<GateSpec>) -> Self {
        EasyCycle { gates }
    }

    pub fn identity(n: usize) -> Self {
        EasyCycle { gates: vec![GateSpec::identity(); n] }
    }

    pub fn n(&self) -> usize {
        self.gates.len()
    }

    pub fn gates(&self) -> &[GateSpec] {
        &self.gates
    }

    pub fn gate(&self, q: usize) -> &GateSpec {
        &self.gates[q]
    }

    pub fn set_gate(&mut self, q: usize, g: GateSpec) {
        self.gates[q] = g;
    }

    /// Per-qubit matrices.
    pub fn matrices(&self) -> Result<Vec<Mat2<f64>>> {
        self.gates.iter().map(GateSpec::matrix).collect()
    }

    pub fn dense_unitary<T: Real>(&self) -> Result<CMatrix<T>> {
        let n = self.n();
        let mut acc = CMatrix::identity(1 << n);
        for (q, g) in self.gates.iter().enumerate() {
            if g.is_identity_name() {
                continue;
            }
            let m = linalg::mat2_cast::<T>(&g.matrix()?);
            acc = linalg::embed_single(&m, q, n).matmul(&acc);
        }
        Ok(acc)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cycle {
    Easy(EasyCycle),
    Hard(HardCycle),
}

/// Invariant violation reported by [`Circuit::validate`].
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    AlternationBroken { position: usize },
    MustStartAndEndEasy,
    WrongSlotCount { position: usize, expected: usize, found: usize },
    NonUnitaryEasyGate { position: usize, qubit: usize, defect: f64 },
    UnknownGate { position: usize, qubit: usize, reason: String },
    QubitOutOfRange { qubit: usize, n: usize },
    OverlappingGates { qubit: usize },
    HardCycleWidth { position: usize, expected: usize, found: usize },
    DuplicateMeasurement { qubit: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::AlternationBroken { position } => write!(f, "alternation broken at cycle {position}"),
            Violation::MustStartAndEndEasy => f.write_str("circuit must begin and end with an easy cycle"),
            Violation::WrongSlotCount { position, expected, found } => {
                write!(f, "easy cycle {position} has {found} gate slots, expected {expected}")
            }
            Violation::NonUnitaryEasyGate { position, qubit, defect } => {
                write!(f, "non-unitary easy gate at cycle {position}, qubit {qubit} (defect {defect:.3e})")
            }
            Violation::UnknownGate { position, qubit, reason } => {
                write!(f, "unsupported gate at cycle {position}, qubit {qubit}: {reason}")
            }
            Violation::QubitOutOfRange { qubit, n } => write!(f, "qubit {qubit} out of range for {n} qubits"),
            Violation::OverlappingGates { qubit } => write!(f, "hard-cycle gates overlap on qubit {qubit}"),
            Violation::HardCycleWidth { position, expected, found } => {
                write!(f, "hard cycle {position} spans {found} qubits, expected {expected}")
            }
            Violation::DuplicateMeasurement { qubit } => write!(f, "qubit {qubit} measured twice"),
        }
    }
}

/// Observable measured at the end of a circuit.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "type", content = "value", rename_all = "lowercase")]
pub enum Observable {
    /// `|s⟩⟨s|` over the measured qubits, `s` written in measurement order.
    Projector(String),
    /// Expectation of a Pauli string on the full register.
    Pauli(PauliString),
}

impl Observable {
    pub fn label(&self) -> String {
        match self {
            Observable::Projector(s) => s.clone(),
            Observable::Pauli(p) => p.to_string(),
        }
    }

    /// Every computational-basis projector over `k` measured qubits.
    pub fn all_projectors(k: usize) -> Vec<Observable> {
        (0..1usize << k).map(|i| Observable::Projector(bitstring(i, k))).collect()
    }
}

/// Bitstring of an outcome index; character `q` is bit `q`.
pub fn bitstring(index: usize, k: usize) -> String {
    (0..k).map(|q| if (index >> q) & 1 == 1 { '1' } else { '0' }).collect()
}

/// Inverse of [`bitstring`].
pub fn bitstring_index(s: &str) -> Result<usize> {
    s.chars().enumerate().try_fold(0usize, |acc, (q, ch)| match ch {
        '0' => Ok(acc),
        '1' => Ok(acc | (1 << q)),
        other => Err(Error::Parse(format!("invalid bit '{other}' in {s}"))),
    })
}

/// A circuit `E_{m+1} H_m E_m ⋯ H_1 E_1` with a terminal measurement.
#[derive(Debug, Clone, PartialEq)]
pub struct Circuit {
    n: usize,
    cycles: Vec<Cycle>,
    measure: Vec<usize>,
}

impl Circuit {
    /// Builds and validates a circuit.
    pub fn new(n: usize, cycles: Vec<Cycle>, measure: Vec<usize>) -> Result<Self> {
        let c = Self::new_unchecked(n, cycles, measure);
        c.check()?;
        Ok(c)
    }

    pub fn new_unchecked(n: usize, cycles: Vec<Cycle>, measure: Vec<usize>) -> Self {
        Circuit { n, cycles, measure }
    }

    /// Builds from `m+1` easy cycles and `m` hard cycles.
    pub fn from_layers(easy: Vec<EasyCycle>, hard: Vec<HardCycle>, measure: Vec<usize>) -> Result<Self> {
        if easy.len() != hard.len() + 1 {
            return Err(Error::InvalidCircuit(format!(
                "{} easy cycles for {} hard cycles",
                easy.len(),
                hard.len()
            )));
        }
        let n = easy[0].n();
        let mut cycles = Vec::with_capacity(easy.len() + hard.len());
        let mut hard = hard.into_iter();
        for e in easy {
            cycles.push(Cycle::Easy(e));
            if let Some(h) = hard.next() {
                cycles.push(Cycle::Hard(h));
            }
        }
        Circuit::new(n, cycles, measure)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn cycles(&self) -> &[Cycle] {
        &self.cycles
    }

    pub fn measured(&self) -> &[usize] {
        &self.measure
    }

    /// Number of hard cycles `m`.
    pub fn m(&self) -> usize {
        self.hard_cycles().count()
    }

    pub fn hard_cycles(&self) -> impl Iterator<Item = &HardCycle> {
        self.cycles.iter().filter_map(|c| match c {
            Cycle::Hard(h) => Some(h),
            Cycle::Easy(_) => None,
        })
    }

    pub fn easy_cycles(&self) -> impl Iterator<Item = &EasyCycle> {
        self.cycles.iter().filter_map(|c| match c {
            Cycle::Easy(e) => Some(e),
            Cycle::Hard(_) => None,
        })
    }

    /// Easy cycle `E_{j+1}` (0-based `j`), valid for well-formed circuits.
    pub fn easy(&self, j: usize) -> &EasyCycle {
        match &self.cycles[2 * j] {
            Cycle::Easy(e) => e,
            Cycle::Hard(_) => panic!("cycle {} is not easy", 2 * j),
        }
    }

    pub fn easy_mut(&mut self, j: usize) -> &mut EasyCycle {
        match &mut self.cycles[2 * j] {
            Cycle::Easy(e) => e,
            Cycle::Hard(_) => panic!("cycle {} is not easy", 2 * j),
        }
    }

    /// Hard cycle `H_{j+1}` (0-based `j`), valid for well-formed circuits.
    pub fn hard(&self, j: usize) -> &HardCycle {
        match &self.cycles[2 * j + 1] {
            Cycle::Hard(h) => h,
            Cycle::Easy(_) => panic!("cycle {} is not hard", 2 * j + 1),
        }
    }

    /// Distinct hard cycles in order of first appearance.
    pub fn distinct_hard_cycles(&self) -> Vec<HardCycle> {
        let mut out: Vec<HardCycle> = Vec::new();
        for h in self.hard_cycles() {
            if !out.contains(h) {
                out.push(h.clone());
            }
        }
        out
    }

    /// Every invariant violation, in cycle order. Empty means the circuit is well formed.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if !matches!(self.cycles.first(), Some(Cycle::Easy(_))) || !matches!(self.cycles.last(), Some(Cycle::Easy(_))) {
            out.push(Violation::MustStartAndEndEasy);
        }
        for (pos, pair) in self.cycles.windows(2).enumerate() {
            let same = matches!(pair, [Cycle::Easy(_), Cycle::Easy(_)] | [Cycle::Hard(_), Cycle::Hard(_)]);
            if same {
                out.push(Violation::AlternationBroken { position: pos + 1 });
            }
        }
        for (pos, cyc) in self.cycles.iter().enumerate() {
            match cyc {
                Cycle::Easy(e) => {
                    if e.n() != self.n {
                        out.push(Violation::WrongSlotCount { position: pos, expected: self.n, found: e.n() });
                    }
                    for (q, g) in e.gates().iter().enumerate() {
                        match g.matrix() {
                            Ok(m) => {
                                let defect = mat2_unitarity_defect(&m);
                                if !(defect <= UNITARITY_TOL) {
                                    out.push(Violation::NonUnitaryEasyGate { position: pos, qubit: q, defect });
                                }
                            }
                            Err(e) => out.push(Violation::UnknownGate { position: pos, qubit: q, reason: e.to_string() }),
                        }
                    }
                }
                Cycle::Hard(h) => {
                    if h.n() != self.n {
                        out.push(Violation::HardCycleWidth { position: pos, expected: self.n, found: h.n() });
                    }
                    out.extend(h.violations());
                }
            }
        }
        let mut seen = vec![false; self.n];
        for &q in &self.measure {
            if q >= self.n {
                out.push(Violation::QubitOutOfRange { qubit: q, n: self.n });
            } else if seen[q] {
                out.push(Violation::DuplicateMeasurement { qubit: q });
            } else {
                seen[q] = true;
            }
        }
        out
    }

    /// First violation as an error.
    pub fn check(&self) -> Result<()> {
        match self.validate().into_iter().next() {
            None => Ok(()),
            Some(v) => Err(Error::InvalidCircuit(v.to_string())),
        }
    }

    /// Dense unitary of the whole circuit (before measurement).
    pub fn dense_unitary<T: Real>(&self) -> Result<CMatrix<T>> {
        if self.n > 10 {
            return Err(Error::DimensionTooLarge { n: self.n, max: 10 });
        }
        let mut acc = CMatrix::identity(1 << self.n);
        for cyc in &self.cycles {
            let u = match cyc {
                Cycle::Easy(e) => e.dense_unitary()?,
                Cycle::Hard(h) => h.dense_unitary(),
            };
            acc = u.matmul(&acc);
        }
        Ok(acc)
    }

    /// Copy with hard cycle `j` (0-based) repeated `times` times, separated by identity easy cycles.
    pub fn with_repeated_hard_cycle(&self, j: usize, times: usize) -> Result<Circuit> {
        if j >= self.m() || times == 0 {
            return Err(Error::InvalidArgument(format!("cannot repeat hard cycle {j} {times} times")));
        }
        let mut cycles = Vec::with_capacity(self.cycles.len() + 2 * (times - 1));
        for (pos, cyc) in self.cycles.iter().enumerate() {
            cycles.push(cyc.clone());
            if pos == 2 * j + 1 {
                for _ in 1..times {
                    cycles.push(Cycle::Easy(EasyCycle::identity(self.n)));
                    cycles.push(cyc.clone());
                }
            }
        }
        Circuit::new(self.n, cycles, self.measure.clone())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&CircuitJson::from(self))?)
    }

    pub fn from_json(s: &str) -> Result<Circuit> {
        let j: CircuitJson = serde_json::from_str(s)?;
        j.try_into()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Circuit> {
        Circuit::from_json(&std::fs::read_to_string(path)?)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
enum CycleJson {
    Easy { gates: Vec<EasyGateJson> },
    Hard { gates: Vec<TwoQubitGate> },
}

/// Wire form of a [`Circuit`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub(crate) struct CircuitJson {
    n: usize,
    cycles: Vec<CycleJson>,
    measure: Vec<usize>,
}

impl From<&Circuit> for CircuitJson {
    fn from(c: &Circuit) -> Self {
        let cycles = c
            .cycles
            .iter()
            .map(|cyc| match cyc {
                Cycle::Easy(e) => CycleJson::Easy {
                    gates: e.gates().iter().enumerate().map(|(q, g)| EasyGateJson::from_spec(q, g)).collect(),
                },
                Cycle::Hard(h) => CycleJson::Hard { gates: h.gates().to_vec() },
            })
            .collect();
        CircuitJson { n: c.n, cycles, measure: c.measure.clone() }
    }
}

impl TryFrom<CircuitJson> for Circuit {
    type Error = Error;

    fn try_from(j: CircuitJson) -> Result<Circuit> {
        let n = j.n;
        let mut cycles = Vec::with_capacity(j.cycles.len());
        for cyc in j.cycles {
            cycles.push(match cyc {
                CycleJson::Easy { gates } => {
                    let mut slots = vec![GateSpec::identity(); n];
                    let mut set = vec![false; n];
                    for g in gates {
                        let q = g.qubit();
                        if q >= n {
                            return Err(Error::InvalidCircuit(format!("easy gate on qubit {q} of {n}")));
                        }
                        if set[q] {
                            return Err(Error::InvalidCircuit(format!("two easy gates on qubit {q} in one cycle")));
                        }
                        set[q] = true;
                        slots[q] = g.into_spec();
                    }
                    Cycle::Easy(EasyCycle::new(slots))
                }
                CycleJson::Hard { gates } => Cycle::Hard(HardCycle::new_unchecked(n, gates)),
            });
        }
        Circuit::new(n, cycles, j.measure)
    }
}
