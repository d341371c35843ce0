//! Exact expectations by statevector (noiseless) or density-matrix evolution.

use super::{batched, DensityMatrix, StateVector};
use crate::circuit::{bitstring_index, Circuit, Observable};
use crate::error::{Error, Result};
use crate::linalg::{mat2_cast, CMatrix};
use crate::metrics::Distribution;
use crate::noise::{CycleNoise, NoiseModel, PauliChannel};
use crate::pauli::PauliString;
use crate::rc::Twirler;
use crate::scalar::Real;

/// Largest register for density-matrix evolution.
pub const MAX_EXACT_NOISY_QUBITS: usize = 4;
/// Largest register for noiseless statevector evaluation.
pub const MAX_EXACT_PURE_QUBITS: usize = 10;
/// Twirl draws averaged when coherent noise is evaluated exactly.
pub const DEFAULT_TWIRLS: usize = 2000;

/// Exact observable values and output distribution over the measured qubits.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactResult<T: Real> {
    pub values: Vec<(Observable, T)>,
    pub distribution: Distribution<T>,
}

impl<T: Real> ExactResult<T> {
    pub fn value(&self, o: &Observable) -> Option<T> {
        self.values.iter().find(|(x, _)| x == o).map(|(_, v)| *v)
    }

    pub(crate) fn scaled_add(&mut self, other: &Self, w: T) {
        for ((_, a), (_, b)) in self.values.iter_mut().zip(&other.values) {
            *a += *b * w;
        }
        let probs: Vec<T> = self.distribution.probs().iter().zip(other.distribution.probs()).map(|(a, b)| *a + *b * w).collect();
        self.distribution = Distribution::new(self.distribution.bits(), probs).expect("same size");
    }

    pub(crate) fn zeroed(&self) -> Self {
        ExactResult {
            values: self.values.iter().map(|(o, _)| (o.clone(), T::zero())).collect(),
            distribution: Distribution::zeros(self.distribution.bits()),
        }
    }
}

/// A signed linear combination `Σ_l w_l P_l (·) P_l` of Pauli conjugations.
#[derive(Debug, Clone, PartialEq)]
pub struct SignedPauliMap<T: Real> {
    n: usize,
    terms: Vec<(PauliString, T)>,
}

impl<T: Real> SignedPauliMap<T> {
    /// `{I: +1}`.
    pub fn identity(n: usize) -> Self {
        SignedPauliMap { n, terms: vec![(PauliString::identity(n), T::one())] }
    }

    pub fn new(n: usize, terms: Vec<(PauliString, T)>) -> Result<Self> {
        if let Some((p, _)) = terms.iter().find(|(p, _)| p.len() != n) {
            return Err(Error::LengthMismatch { left: n, right: p.len() });
        }
        Ok(SignedPauliMap { n, terms })
    }

    /// `C · (ε_0 I − Σ_{k≠0} ε_k P_k)` with `C = 1/(ε_0² − Σ ε_k²)`: the
    /// quasi-probability map that cancels `ch` to first order.
    pub fn cancelling(ch: &PauliChannel<T>) -> Result<Self> {
        let e0 = ch.identity_rate();
        let s2: T = ch.errors().map(|(_, r)| *r * *r).sum();
        let den = e0 * e0 - s2;
        if den <= T::zero() {
            return Err(Error::Infeasible(format!("cancellation denominator {den} <= 0")));
        }
        let cost = T::one() / den;
        let terms = ch
            .iter()
            .filter(|(_, r)| **r != T::zero())
            .map(|(p, r)| (*p, if p.is_identity() { *r * cost } else { -*r * cost }))
            .collect();
        Ok(SignedPauliMap { n: ch.n(), terms })
    }

    pub fn terms(&self) -> &[(PauliString, T)] {
        &self.terms
    }

    /// `Σ |w_l|`.
    pub fn one_norm(&self) -> T {
        self.terms.iter().map(|(_, w)| w.abs()).sum()
    }
}

/// One step of the exact evolution after (or before) a hard cycle.
#[derive(Debug, Clone)]
enum Op<T: Real> {
    Mixture(Vec<(PauliString, T)>),
    Dense(CMatrix<T>),
    Pauli(PauliString),
}

#[derive(Debug, Clone, Default)]
struct CycleOps<T: Real> {
    pre: Vec<Op<T>>,
    post: Vec<Op<T>>,
}

fn noise_op<T: Real>(noise: &CycleNoise<T>, n: usize, label: &str, allow_coherent: bool) -> Result<Option<Op<T>>> {
    match noise {
        CycleNoise::Noiseless => Ok(None),
        CycleNoise::Pauli(ch) => {
            if ch.n() != n {
                return Err(Error::LengthMismatch { left: n, right: ch.n() });
            }
            Ok(Some(Op::Mixture(ch.iter().map(|(p, r)| (*p, *r)).collect())))
        }
        CycleNoise::Coherent(c) if allow_coherent => Ok(Some(Op::Dense(c.full_unitary(n)))),
        CycleNoise::Coherent(_) => Err(Error::CoherentNoiseInExactMode(label.to_string())),
    }
}

fn evolve_density<T: Real>(c: &Circuit, ops: &[CycleOps<T>]) -> Result<DensityMatrix<T>> {
    let n = c.n();
    if n > MAX_EXACT_NOISY_QUBITS {
        return Err(Error::DimensionTooLarge { n, max: MAX_EXACT_NOISY_QUBITS });
    }
    let mut rho = DensityMatrix::zero(n);
    let apply = |rho: &mut DensityMatrix<T>, op: &Op<T>| match op {
        Op::Mixture(t) => rho.apply_pauli_mixture(t.iter().map(|(p, w)| (p, *w))),
        Op::Dense(u) => rho.apply_dense(u),
        Op::Pauli(p) => rho.apply_pauli_mixture([(p, T::one())]),
    };
    let m = c.m();
    for j in 0..=m {
        for (q, g) in c.easy(j).gates().iter().enumerate() {
            if !g.is_identity_name() {
                rho.apply_1q(q, &mat2_cast::<T>(&g.matrix()?));
            }
        }
        if j < m {
            for op in &ops[j].pre {
                apply(&mut rho, op);
            }
            rho.apply_hard(c.hard(j));
            for op in &ops[j].post {
                apply(&mut rho, op);
            }
        }
    }
    Ok(rho)
}

fn finish<T: Real>(
    c: &Circuit,
    full: Vec<T>,
    pauli: impl Fn(&PauliString) -> T,
    observables: &[Observable],
) -> Result<ExactResult<T>> {
    let k = c.measured().len();
    let mut probs = vec![T::zero(); 1 << k];
    for (i, p) in full.into_iter().enumerate() {
        let o = c.measured().iter().enumerate().fold(0, |acc, (b, &q)| acc | (((i >> q) & 1) << b));
        probs[o] += p;
    }
    let distribution = Distribution::new(k, probs)?;
    let values = observables
        .iter()
        .map(|o| {
            let v = match o {
                Observable::Projector(s) => {
                    if s.len() != k {
                        return Err(Error::LengthMismatch { left: k, right: s.len() });
                    }
                    distribution.get(bitstring_index(s)?)
                }
                Observable::Pauli(p) => {
                    if p.len() != c.n() {
                        return Err(Error::LengthMismatch { left: c.n(), right: p.len() });
                    }
                    pauli(p)
                }
            };
            Ok((o.clone(), v))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ExactResult { values, distribution })
}

fn density_result<T: Real>(c: &Circuit, ops: &[CycleOps<T>], observables: &[Observable]) -> Result<ExactResult<T>> {
    let rho = evolve_density(c, ops)?;
    finish(c, rho.probabilities(), |p| rho.pauli_expectation(p), observables)
}

fn pure_result<T: Real>(c: &Circuit, observables: &[Observable]) -> Result<ExactResult<T>> {
    let n = c.n();
    if n > MAX_EXACT_PURE_QUBITS {
        return Err(Error::DimensionTooLarge { n, max: MAX_EXACT_PURE_QUBITS });
    }
    let mut psi = StateVector::<T>::zero(n);
    let m = c.m();
    for j in 0..=m {
        for (q, g) in c.easy(j).gates().iter().enumerate() {
            if !g.is_identity_name() {
                psi.apply_1q(q, &mat2_cast::<T>(&g.matrix()?));
            }
        }
        if j < m {
            psi.apply_hard(c.hard(j));
        }
    }
    finish(c, psi.probabilities(), |p| psi.pauli_expectation(p), observables)
}

/// Exact run with explicit per-hard-cycle noise (index `j` ↔ `H_{j+1}`).
pub fn exact_run_with_cycle_noise<T: Real>(
    c: &Circuit,
    noise: &[CycleNoise<T>],
    observables: &[Observable],
) -> Result<ExactResult<T>> {
    c.check()?;
    if noise.len() != c.m() {
        return Err(Error::InvalidArgument(format!("{} noise entries for {} hard cycles", noise.len(), c.m())));
    }
    if noise.iter().all(|n| matches!(n, CycleNoise::Noiseless)) {
        return pure_result(c, observables);
    }
    let ops = noise
        .iter()
        .enumerate()
        .map(|(j, nz)| {
            Ok(CycleOps { pre: vec![], post: noise_op(nz, c.n(), &c.hard(j).label(), false)?.into_iter().collect() })
        })
        .collect::<Result<Vec<_>>>()?;
    density_result(c, &ops, observables)
}

/// `Tr[O · C̃(|0⟩⟨0|)]` for every observable; noiseless when `noise` is `None`.
///
/// Coherent noise is rejected here; use [`exact_run_twirled`].
pub fn exact_run<T: Real>(c: &Circuit, noise: Option<&NoiseModel<T>>, observables: &[Observable]) -> Result<ExactResult<T>> {
    match noise {
        None => {
            c.check()?;
            pure_result(c, observables)
        }
        Some(model) => exact_run_with_cycle_noise(c, &model.resolve(c)?, observables),
    }
}

/// Average of exact runs over `twirls` explicit randomized-compiling draws.
///
/// This is the exact-mode treatment of coherent noise; for Pauli noise it equals [`exact_run`].
pub fn exact_run_twirled<T: Real>(
    c: &Circuit,
    noise: &NoiseModel<T>,
    observables: &[Observable],
    twirls: usize,
    seed: u64,
) -> Result<ExactResult<T>> {
    c.check()?;
    if twirls == 0 {
        return Err(Error::InvalidArgument("at least one twirl draw is required".into()));
    }
    let resolved = noise.resolve(c)?;
    let base: Vec<Option<Op<T>>> = resolved
        .iter()
        .enumerate()
        .map(|(j, nz)| noise_op(nz, c.n(), &c.hard(j).label(), true))
        .collect::<Result<_>>()?;
    let twirler = Twirler::new(c);
    let parts = batched(twirls, seed, |rng, _, len| -> Result<Option<ExactResult<T>>> {
        let mut acc: Option<ExactResult<T>> = None;
        for _ in 0..len {
            let frames = twirler.draw(rng);
            let ops: Vec<CycleOps<T>> = frames
                .iter()
                .zip(&base)
                .map(|(f, nz)| {
                    let mut post: Vec<Op<T>> = nz.iter().cloned().collect();
                    post.push(Op::Pauli(f.correction));
                    CycleOps { pre: vec![Op::Pauli(f.twirl)], post }
                })
                .collect();
            let r = density_result(c, &ops, observables)?;
            match &mut acc {
                None => acc = Some(r),
                Some(a) => a.scaled_add(&r, T::one()),
            }
        }
        Ok(acc)
    });
    let mut total: Option<ExactResult<T>> = None;
    for p in parts {
        if let Some(r) = p? {
            match &mut total {
                None => total = Some(r),
                Some(t) => t.scaled_add(&r, T::one()),
            }
        }
    }
    let total = total.expect("twirls > 0");
    let mut out = total.zeroed();
    out.scaled_add(&total, T::one() / T::of(twirls as f64));
    Ok(out)
}

/// Propagates `|0⟩⟨0|` through `E_{m+1} ∘ Π_j (R_j ∘ D_j ∘ H_j ∘ E_j)`, a generally
/// non-CPTP map. `maps[j]` is the signed insertion `R_j` after hard cycle `j`;
/// any normalization (such as the cancellation cost) must be folded into the weights.
pub fn exact_quasiprob_run<T: Real>(
    c: &Circuit,
    noise: &NoiseModel<T>,
    maps: &[SignedPauliMap<T>],
    observables: &[Observable],
) -> Result<ExactResult<T>> {
    c.check()?;
    if maps.len() != c.m() {
        return Err(Error::InvalidArgument(format!("{} insertion maps for {} hard cycles", maps.len(), c.m())));
    }
    let resolved = noise.resolve(c)?;
    let ops = resolved
        .iter()
        .zip(maps)
        .enumerate()
        .map(|(j, (nz, map))| {
            if map.n != c.n() {
                return Err(Error::LengthMismatch { left: c.n(), right: map.n });
            }
            let mut post: Vec<Op<T>> = noise_op(nz, c.n(), &c.hard(j).label(), false)?.into_iter().collect();
            post.push(Op::Mixture(map.terms.clone()));
            Ok(CycleOps { pre: vec![], post })
        })
        .collect::<Result<Vec<_>>>()?;
    density_result(c, &ops, observables)
}
