//! Pauli channels, coherent noise and per-cycle noise models.

use crate::circuit::{Circuit, HardCycle, TwoQubitGate, TwoQubitKind};
use crate::error::{Error, Result};
use crate::linalg::{embed_on_qubits, pauli_coefficients, CMatrix};
use crate::pauli::{anticommutes, compose, PauliString};
use crate::scalar::{c, Real};
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;

/// Rates below this are dropped and their mass returned to the identity.
pub const PRUNE_BELOW: f64 = 1e-15;

/// Normalization tolerance for a scalar type: `1e-12`, widened for `f32`.
pub fn norm_tolerance<T: Real>() -> f64 {
    (64.0 * T::epsilon().to_f64_lossy()).max(1e-12)
}

/// A Pauli channel `ρ ↦ Σ_k ε_k P_k ρ P_k`.
///
/// The identity rate is always stored explicitly.
#[derive(Debug, Clone, PartialEq)]
pub struct PauliChannel<T: Real> {
    n: usize,
    rates: BTreeMap<PauliString, T>,
}

impl<T: Real> PauliChannel<T> {
    /// The noiseless channel `{I: 1}`.
    pub fn identity(n: usize) -> Self {
        let mut rates = BTreeMap::new();
        rates.insert(PauliString::identity(n), T::one());
        PauliChannel { n, rates }
    }

    /// Channel from a complete rate table; rates must lie in `[0,1]` and sum to 1.
    pub fn new(n: usize, rates: impl IntoIterator<Item = (PauliString, T)>) -> Result<Self> {
        let ch = Self::new_unchecked(n, rates)?;
        ch.check_normalized()?;
        Ok(ch)
    }

    /// Channel from non-identity rates; the identity rate is inferred as `1 − Σ`.
    pub fn from_error_rates(n: usize, errors: impl IntoIterator<Item = (PauliString, T)>) -> Result<Self> {
        let mut rates: BTreeMap<PauliString, T> = BTreeMap::new();
        for (p, r) in errors {
            if p.len() != n {
                return Err(Error::LengthMismatch { left: n, right: p.len() });
            }
            if p.is_identity() {
                continue;
            }
            *rates.entry(p).or_insert_with(T::zero) += r;
        }
        let total: T = rates.values().copied().sum();
        rates.insert(PauliString::identity(n), T::one() - total);
        let ch = PauliChannel { n, rates };
        ch.check_normalized()?;
        Ok(ch)
    }

    /// Accepts any table with matching lengths, without checking normalization.
    pub fn new_unchecked(n: usize, rates: impl IntoIterator<Item = (PauliString, T)>) -> Result<Self> {
        let mut map: BTreeMap<PauliString, T> = BTreeMap::new();
        for (p, r) in rates {
            if p.len() != n {
                return Err(Error::LengthMismatch { left: n, right: p.len() });
            }
            *map.entry(p).or_insert_with(T::zero) += r;
        }
        map.entry(PauliString::identity(n)).or_insert_with(T::zero);
        Ok(PauliChannel { n, rates: map })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn rate(&self, p: &PauliString) -> T {
        self.rates.get(p).copied().unwrap_or_else(T::zero)
    }

    /// `ε_0`.
    pub fn identity_rate(&self) -> T {
        self.rate(&PauliString::identity(self.n))
    }

    /// `1 − ε_0`.
    pub fn error_probability(&self) -> T {
        T::one() - self.identity_rate()
    }

    /// Every stored rate (identity included), in label order.
    pub fn iter(&self) -> impl Iterator<Item = (&PauliString, &T)> {
        self.rates.iter()
    }

    /// Non-identity entries with a nonzero rate.
    pub fn errors(&self) -> impl Iterator<Item = (&PauliString, &T)> {
        self.rates.iter().filter(|(p, r)| !p.is_identity() && **r != T::zero())
    }

    pub fn len(&self) -> usize {
        self.rates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rates.is_empty()
    }

    pub fn sum(&self) -> T {
        self.rates.values().copied().sum()
    }

    pub fn check_normalized(&self) -> Result<()> {
        let tol = norm_tolerance::<T>();
        for (p, r) in &self.rates {
            let r = r.to_f64_lossy();
            if !(-tol..=1.0 + tol).contains(&r) {
                return Err(Error::InvalidArgument(format!("rate of {p} out of [0,1]: {r}")));
            }
        }
        let s = self.sum().to_f64_lossy();
        if (s - 1.0).abs() > tol {
            return Err(Error::Unnormalized(s));
        }
        Ok(())
    }

    /// Drops rates below [`PRUNE_BELOW`] and resets `ε_0 = 1 − Σ_{k≠0} ε_k`.
    pub fn pruned(mut self) -> Self {
        let id = PauliString::identity(self.n);
        let cut = T::of(PRUNE_BELOW);
        self.rates.retain(|p, r| *p == id || r.abs() >= cut);
        let others: T = self.rates.iter().filter(|(p, _)| !p.is_identity()).map(|(_, r)| *r).sum();
        self.rates.insert(id, T::one() - others);
        self
    }

    /// Phase-free convolution: the channel that applies `self` then `other`.
    pub fn compose(&self, other: &Self) -> Result<Self> {
        if self.n != other.n {
            return Err(Error::LengthMismatch { left: self.n, right: other.n });
        }
        let mut out: BTreeMap<PauliString, T> = BTreeMap::new();
        for (a, ra) in &self.rates {
            if *ra == T::zero() {
                continue;
            }
            for (b, rb) in &other.rates {
                if *rb == T::zero() {
                    continue;
                }
                *out.entry(compose(a, b)).or_insert_with(T::zero) += *ra * *rb;
            }
        }
        Ok(PauliChannel { n: self.n, rates: out }.pruned())
    }

    /// Pauli fidelity `f_b = Σ_a (−1)^{⟨a,b⟩} ε_a`.
    pub fn fidelity(&self, b: &PauliString) -> T {
        self.rates.iter().fold(T::zero(), |acc, (a, r)| if anticommutes(a, b) { acc - *r } else { acc + *r })
    }

    /// Channel with rates cast to another scalar type.
    pub fn cast<U: Real>(&self) -> PauliChannel<U> {
        PauliChannel { n: self.n, rates: self.rates.iter().map(|(p, r)| (*p, U::of(r.to_f64_lossy()))).collect() }
    }

    /// Builds an alias-free cumulative sampler.
    pub fn sampler(&self) -> Result<ChannelSampler> {
        self.check_normalized()?;
        ChannelSampler::new(self.rates.iter().map(|(p, r)| (*p, r.to_f64_lossy())))
    }
}

/// Draws `P_k` with probability `ε_k`.
pub fn sample_error<T: Real, R: Rng + ?Sized>(ch: &PauliChannel<T>, rng: &mut R) -> Result<PauliString> {
    Ok(ch.sampler()?.sample(rng))
}

/// `D^α`: the α-fold convolution of the channel with itself.
pub fn channel_power<T: Real>(ch: &PauliChannel<T>, alpha: u32) -> Result<PauliChannel<T>> {
    if alpha < 1 {
        return Err(Error::InvalidArgument("channel power needs alpha >= 1".into()));
    }
    ch.check_normalized()?;
    let mut result: Option<PauliChannel<T>> = None;
    let mut base = ch.clone();
    let mut e = alpha;
    while e > 0 {
        if e & 1 == 1 {
            result = Some(match result {
                None => base.clone(),
                Some(r) => r.compose(&base)?,
            });
        }
        e >>= 1;
        if e > 0 {
            base = base.compose(&base)?;
        }
    }
    Ok(result.expect("alpha >= 1"))
}

/// Cumulative-table sampler over a normalized rate list.
#[derive(Debug, Clone)]
pub struct ChannelSampler {
    labels: Vec<PauliString>,
    cumulative: Vec<f64>,
    /// Fast path: probability of the first (identity) label.
    p_first: f64,
}

impl ChannelSampler {
    fn new(entries: impl Iterator<Item = (PauliString, f64)>) -> Result<Self> {
        let mut labels = Vec::new();
        let mut cumulative = Vec::new();
        let mut acc = 0.0;
        for (p, r) in entries {
            if r <= 0.0 {
                continue;
            }
            acc += r;
            labels.push(p);
            cumulative.push(acc);
        }
        if labels.is_empty() {
            return Err(Error::Unnormalized(0.0));
        }
        // identity first so the common no-error draw exits early
        if let Some(pos) = labels.iter().position(|p| p.is_identity()) {
            if pos != 0 {
                let probs: Vec<f64> = cumulative.iter().scan(0.0, |prev, &c| {
                    let r = c - *prev;
                    *prev = c;
                    Some(r)
                }).collect();
                let mut order: Vec<usize> = (0..labels.len()).collect();
                order.swap(0, pos);
                let mut l2 = Vec::with_capacity(labels.len());
                let mut c2 = Vec::with_capacity(labels.len());
                let mut a = 0.0;
                for i in order {
                    a += probs[i];
                    l2.push(labels[i]);
                    c2.push(a);
                }
                labels = l2;
                cumulative = c2;
            }
        }
        let p_first = cumulative[0];
        Ok(ChannelSampler { labels, cumulative, p_first })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> PauliString {
        let total = *self.cumulative.last().expect("non-empty");
        let u: f64 = rng.random::<f64>() * total;
        if u < self.p_first {
            return self.labels[0];
        }
        let idx = self.cumulative.partition_point(|&c| c <= u).min(self.labels.len() - 1);
        self.labels[idx]
    }

    /// Whether the only possible draw is the identity.
    pub fn is_trivial(&self) -> bool {
        self.labels.len() == 1 && self.labels[0].is_identity()
    }
}

/// A unitary error applied after the ideal cycle on a subset of qubits.
#[derive(Debug, Clone, PartialEq)]
pub struct CoherentNoise<T: Real> {
    qubits: Vec<usize>,
    matrix: CMatrix<T>,
}

impl<T: Real> CoherentNoise<T> {
    pub fn new(qubits: Vec<usize>, matrix: CMatrix<T>) -> Result<Self> {
        let dim = 1usize << qubits.len();
        if matrix.rows() != dim || matrix.cols() != dim {
            return Err(Error::InvalidArgument(format!(
                "coherent noise on {} qubits needs a {dim}x{dim} matrix",
                qubits.len()
            )));
        }
        let defect = matrix.dagger().matmul(&matrix).sub(&CMatrix::identity(dim)).max_abs();
        if defect > 1e-10_f64.max(64.0 * T::epsilon().to_f64_lossy()) {
            return Err(Error::InvalidArgument(format!("coherent noise is not unitary (defect {defect:.3e})")));
        }
        Ok(CoherentNoise { qubits, matrix })
    }

    /// `exp(−iθ/2 Z)` on one qubit.
    pub fn z_rotation(qubit: usize, theta: f64) -> Self {
        let mut m = CMatrix::zeros(2, 2);
        m[(0, 0)] = c(( -theta / 2.0).cos(), (-theta / 2.0).sin());
        m[(1, 1)] = c((theta / 2.0).cos(), (theta / 2.0).sin());
        CoherentNoise { qubits: vec![qubit], matrix: m }
    }

    pub fn qubits(&self) -> &[usize] {
        &self.qubits
    }

    pub fn matrix(&self) -> &CMatrix<T> {
        &self.matrix
    }

    /// The noise as a full-register unitary.
    pub fn full_unitary(&self, n: usize) -> CMatrix<T> {
        embed_on_qubits(&self.matrix, &self.qubits, n)
    }
}

/// Noise attached to one hard-cycle signature.
#[derive(Debug, Clone, PartialEq)]
pub enum CycleNoise<T: Real> {
    Noiseless,
    Pauli(PauliChannel<T>),
    Coherent(CoherentNoise<T>),
}

impl<T: Real> CycleNoise<T> {
    /// The Pauli channel, treating `Noiseless` as `{I:1}`; `None` for coherent noise.
    pub fn as_pauli(&self, n: usize) -> Option<PauliChannel<T>> {
        match self {
            CycleNoise::Noiseless => Some(PauliChannel::identity(n)),
            CycleNoise::Pauli(ch) => Some(ch.clone()),
            CycleNoise::Coherent(_) => None,
        }
    }
}

/// Pauli twirl of a cycle's noise: `ε_a = |Tr(P_a U)|² / 4^n` for coherent
/// noise `U`, identity map for noise that is already a Pauli channel.
pub fn effective_pauli_channel<T: Real>(cycle: &HardCycle, noise: &CycleNoise<T>) -> Result<PauliChannel<T>> {
    let n = cycle.n();
    if n > 4 {
        return Err(Error::DimensionTooLarge { n, max: 4 });
    }
    match noise {
        CycleNoise::Noiseless => Ok(PauliChannel::identity(n)),
        CycleNoise::Pauli(ch) => {
            if ch.n() != n {
                return Err(Error::LengthMismatch { left: n, right: ch.n() });
            }
            Ok(ch.clone())
        }
        CycleNoise::Coherent(cn) => {
            let u = cn.full_unitary(n);
            let coeffs = pauli_coefficients(&u);
            let rates = PauliString::all(n).zip(coeffs).map(|(p, cf)| (p, cf.norm_sqr()));
            Ok(PauliChannel::new_unchecked(n, rates)?.pruned())
        }
    }
}

/// Gate list identifying a hard cycle independently of the register size.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Signature {
    pub gates: Vec<TwoQubitGate>,
}

impl Signature {
    pub fn of(cycle: &HardCycle) -> Self {
        Signature { gates: cycle.gates().to_vec() }
    }
}

/// Noise for every hard-cycle signature. Easy cycles are noiseless.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseModel<T: Real> {
    entries: BTreeMap<Signature, CycleNoise<T>>,
    default_noiseless: bool,
}

impl<T: Real> Default for NoiseModel<T> {
    fn default() -> Self {
        NoiseModel { entries: BTreeMap::new(), default_noiseless: false }
    }
}

impl<T: Real> NoiseModel<T> {
    pub fn new() -> Self {
        Self::default()
    }

    /// A model under which every hard cycle is noiseless.
    pub fn noiseless() -> Self {
        NoiseModel { entries: BTreeMap::new(), default_noiseless: true }
    }

    pub fn insert(&mut self, cycle: &HardCycle, noise: CycleNoise<T>) -> &mut Self {
        self.entries.insert(Signature::of(cycle), noise);
        self
    }

    pub fn with(mut self, cycle: &HardCycle, noise: CycleNoise<T>) -> Self {
        self.insert(cycle, noise);
        self
    }

    /// Same Pauli channel on every hard cycle of `circuit`.
    pub fn uniform(circuit: &Circuit, ch: &PauliChannel<T>) -> Self {
        let mut m = Self::new();
        for h in circuit.distinct_hard_cycles() {
            m.insert(&h, CycleNoise::Pauli(ch.clone()));
        }
        m
    }

    pub fn get(&self, cycle: &HardCycle) -> Result<CycleNoise<T>> {
        match self.entries.get(&Signature::of(cycle)) {
            Some(n) => Ok(n.clone()),
            None if self.default_noiseless => Ok(CycleNoise::Noiseless),
            None => Err(Error::UncoveredCycle(cycle.label())),
        }
    }

    pub fn entries(&self) -> impl Iterator<Item = (&Signature, &CycleNoise<T>)> {
        self.entries.iter()
    }

    /// Per-hard-cycle noise of a circuit, in cycle order.
    pub fn resolve(&self, circuit: &Circuit) -> Result<Vec<CycleNoise<T>>> {
        circuit
            .hard_cycles()
            .map(|h| {
                let noise = self.get(h)?;
                if let CycleNoise::Pauli(ch) = &noise {
                    if ch.n() != circuit.n() {
                        return Err(Error::LengthMismatch { left: circuit.n(), right: ch.n() });
                    }
                }
                Ok(noise)
            })
            .collect()
    }
}

/// Default synthetic channel for a cycle with total error probability `p`.
///
/// Weight-1 Z errors on idle qubits carry 60% of the error mass when idle qubits
/// exist; the rest is spread over each gate pair as Z (30% each side), ZZ (20%)
/// and X (10% each side).
pub fn synthetic_cycle_channel(cycle: &HardCycle, p: f64) -> PauliChannel<f64> {
    use crate::pauli::Pauli;
    let n = cycle.n();
    let idle = cycle.idle_qubits();
    let mut errors: Vec<(PauliString, f64)> = Vec::new();
    let gate_mass = if cycle.gates().is_empty() {
        0.0
    } else if idle.is_empty() {
        p
    } else {
        0.4 * p
    };
    let idle_mass = p - gate_mass;
    for &q in &idle {
        errors.push((PauliString::single(n, q, Pauli::Z), idle_mass / idle.len() as f64));
    }
    let per_gate = if cycle.gates().is_empty() { 0.0 } else { gate_mass / cycle.gates().len() as f64 };
    for g in cycle.gates() {
        let (a, b) = (g.q0, g.q1);
        let mut zz = PauliString::single(n, a, Pauli::Z);
        zz.set(b, Pauli::Z);
        errors.push((PauliString::single(n, a, Pauli::Z), 0.3 * per_gate));
        errors.push((PauliString::single(n, b, Pauli::Z), 0.3 * per_gate));
        errors.push((zz, 0.2 * per_gate));
        errors.push((PauliString::single(n, a, Pauli::X), 0.1 * per_gate));
        errors.push((PauliString::single(n, b, Pauli::X), 0.1 * per_gate));
    }
    PauliChannel::from_error_rates(n, errors).expect("synthetic rates are valid")
}

/// Synthetic model covering every hard cycle of `circuit`.
pub fn synthetic_noise_model(circuit: &Circuit, p: f64) -> NoiseModel<f64> {
    let mut m = NoiseModel::new();
    for h in circuit.distinct_hard_cycles() {
        m.insert(&h, CycleNoise::Pauli(synthetic_cycle_channel(&h, p)));
    }
    m
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
enum NoiseJson {
    Noiseless,
    Pauli { rates: BTreeMap<String, f64> },
    Coherent { qubits: Vec<usize>, matrix: Vec<[f64; 2]> },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct EntryJson {
    signature: Signature,
    noise: NoiseJson,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ModelJson {
    cycles: Vec<EntryJson>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    default_noiseless: bool,
}

impl NoiseModel<f64> {
    /// Parses the JSON form; missing identity rates are inferred as `1 − Σ others`.
    pub fn from_json(s: &str) -> Result<Self> {
        let j: ModelJson = serde_json::from_str(s)?;
        let mut model = NoiseModel { entries: BTreeMap::new(), default_noiseless: j.default_noiseless };
        for e in j.cycles {
            let mut sig = e.signature;
            for g in sig.gates.iter_mut() {
                if g.kind == TwoQubitKind::Cz && g.q0 > g.q1 {
                    *g = TwoQubitGate::cz(g.q0, g.q1);
                }
            }
            sig.gates.sort();
            let noise = match e.noise {
                NoiseJson::Noiseless => CycleNoise::Noiseless,
                NoiseJson::Pauli { rates } => {
                    let mut parsed = Vec::with_capacity(rates.len());
                    for (k, v) in rates {
                        parsed.push((k.parse::<PauliString>()?, v));
                    }
                    let n = parsed.first().map(|(p, _)| p.len()).ok_or_else(|| Error::Parse("empty rate table".into()))?;
                    let has_identity = parsed.iter().any(|(p, _)| p.is_identity());
                    let ch = if has_identity {
                        PauliChannel::new(n, parsed)?
                    } else {
                        PauliChannel::from_error_rates(n, parsed)?
                    };
                    CycleNoise::Pauli(ch)
                }
                NoiseJson::Coherent { qubits, matrix } => {
                    let dim = 1usize << qubits.len();
                    if matrix.len() != dim * dim {
                        return Err(Error::Parse(format!("coherent matrix needs {} entries", dim * dim)));
                    }
                    let mut m = CMatrix::zeros(dim, dim);
                    for (i, [re, im]) in matrix.into_iter().enumerate() {
                        m[(i / dim, i % dim)] = Complex64::new(re, im);
                    }
                    CycleNoise::Coherent(CoherentNoise::new(qubits, m)?)
                }
            };
            model.entries.insert(sig, noise);
        }
        Ok(model)
    }

    pub fn to_json(&self) -> Result<String> {
        let cycles = self
            .entries
            .iter()
            .map(|(sig, noise)| {
                let noise = match noise {
                    CycleNoise::Noiseless => NoiseJson::Noiseless,
                    CycleNoise::Pauli(ch) => NoiseJson::Pauli {
                        rates: ch.iter().map(|(p, r)| (p.to_string(), *r)).collect(),
                    },
                    CycleNoise::Coherent(cn) => NoiseJson::Coherent {
                        qubits: cn.qubits.clone(),
                        matrix: cn.matrix.data().iter().map(|z| [z.re, z.im]).collect(),
                    },
                };
                EntryJson { signature: sig.clone(), noise }
            })
            .collect();
        Ok(serde_json::to_string_pretty(&ModelJson { cycles, default_noiseless: self.default_noiseless })?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
