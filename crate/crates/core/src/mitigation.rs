//! Mitigation engines: Pauli error cancellation (PEC), noiseless output
//! extrapolation (NOX) and readout error mitigation (REM).
//!
//! Shot-based estimators read every observable from the same stream of outcomes.
//! Each engine also has an exact counterpart on the density-matrix engine, which
//! is what the bias studies use.

use crate::cer::CerReport;
use crate::circuit::{bitstring_index, Circuit, EasyCycle, GateSpec, Observable};
use crate::error::{Error, Result};
use crate::metrics::Distribution;
use crate::noise::{channel_power, ChannelSampler, CycleNoise, NoiseModel, PauliChannel, Signature};
use crate::pauli::{compose, PauliString};
use crate::rc::append_pauli;
use crate::simulator::exact::{exact_quasiprob_run, exact_run, exact_run_with_cycle_noise, ExactResult, SignedPauliMap};
use crate::simulator::{batched, derive_seed, Device, Executable, ShotRecord, StateVector};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Sample counts above this are refused rather than attempted.
pub const MAX_SAMPLES: u64 = 1 << 40;

/// Value of an observable on every outcome index of the measured register.
fn outcome_values(o: &Observable, c: &Circuit) -> Result<Vec<f64>> {
    let k = c.measured().len();
    let mut v = vec![0.0; 1 << k];
    match o {
        Observable::Projector(s) => {
            if s.len() != k {
                return Err(Error::LengthMismatch { left: k, right: s.len() });
            }
            v[bitstring_index(s)?] = 1.0;
        }
        Observable::Pauli(p) => {
            if p.len() != c.n() {
                return Err(Error::LengthMismatch { left: c.n(), right: p.len() });
            }
            if !p.is_diagonal() {
                return Err(Error::InvalidArgument(format!("{p} is not diagonal in the measurement basis")));
            }
            let mut bits = 0usize;
            for q in p.support() {
                let b = c.measured().iter().position(|&m| m == q).ok_or_else(|| {
                    Error::InvalidArgument(format!("{p} acts on unmeasured qubit {q}"))
                })?;
                bits |= 1 << b;
            }
            for (i, x) in v.iter_mut().enumerate() {
                *x = if (i & bits).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
            }
        }
    }
    Ok(v)
}

/// Per-outcome sums of shot weights and squared weights.
#[derive(Debug, Clone)]
struct Tally {
    w: Vec<f64>,
    w2: Vec<f64>,
    shots: u64,
}

impl Tally {
    fn new(k: usize) -> Self {
        Tally { w: vec![0.0; 1 << k], w2: vec![0.0; 1 << k], shots: 0 }
    }

    fn add(&mut self, outcome: usize, weight: f64) {
        self.w[outcome] += weight;
        self.w2[outcome] += weight * weight;
        self.shots += 1;
    }

    fn merge(parts: Vec<Tally>, k: usize) -> Tally {
        parts.into_iter().fold(Tally::new(k), |mut acc, t| {
            acc.w.iter_mut().zip(&t.w).for_each(|(a, b)| *a += b);
            acc.w2.iter_mut().zip(&t.w2).for_each(|(a, b)| *a += b);
            acc.shots += t.shots;
            acc
        })
    }

    /// Mean of `weight · o(outcome)` per shot and the variance of that mean.
    fn moments(&self, o: &[f64]) -> (f64, f64) {
        let n = self.shots as f64;
        if self.shots == 0 {
            return (0.0, 0.0);
        }
        let mean = o.iter().zip(&self.w).map(|(a, b)| a * b).sum::<f64>() / n;
        if self.shots < 2 {
            return (mean, 0.0);
        }
        let m2 = o.iter().zip(&self.w2).map(|(a, b)| a * a * b).sum::<f64>() / n;
        let var = ((m2 - mean * mean) * n / (n - 1.0)).max(0.0);
        (mean, var / n)
    }

    fn quasi(&self, scale: f64) -> Vec<f64> {
        let n = self.shots.max(1) as f64;
        self.w.iter().map(|w| scale * w / n).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValueEstimate {
    pub est: f64,
    pub stderr: f64,
}

/// Result of one estimator run.
///
/// `distribution` holds the raw (possibly negative) estimates of every outcome
/// projector; use [`Estimate::clipped`] for a proper distribution.
#[derive(Debug, Clone, Serialize)]
pub struct Estimate {
    pub method: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c_tot: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<usize>,
    pub values: BTreeMap<String, ValueEstimate>,
    pub distribution: Distribution<f64>,
    /// Standard error of each entry of `distribution`.
    #[serde(skip)]
    pub distribution_stderr: Vec<f64>,
    pub shots_used: u64,
    #[serde(skip)]
    observables: Vec<(String, Vec<f64>)>,
}

impl Estimate {
    fn build(
        method: &str,
        c: &Circuit,
        observables: &[Observable],
        quasi: Vec<f64>,
        value: impl Fn(&[f64]) -> (f64, f64),
        shots_used: u64,
    ) -> Result<Self> {
        let k = c.measured().len();
        let obs = observables
            .iter()
            .map(|o| Ok((o.label(), outcome_values(o, c)?)))
            .collect::<Result<Vec<_>>>()?;
        let values = obs
            .iter()
            .map(|(l, v)| {
                let (est, var) = value(v);
                (l.clone(), ValueEstimate { est, stderr: var.sqrt() })
            })
            .collect();
        let distribution_stderr = (0..1usize << k)
            .map(|i| {
                let mut e = vec![0.0; 1 << k];
                e[i] = 1.0;
                value(&e).1.sqrt()
            })
            .collect();
        Ok(Estimate {
            method: method.to_string(),
            sigma: None,
            c_tot: None,
            alpha: None,
            values,
            distribution: Distribution::new(k, quasi)?,
            distribution_stderr,
            shots_used,
            observables: obs,
        })
    }

    pub fn value(&self, o: &Observable) -> Option<ValueEstimate> {
        self.values.get(&o.label()).copied()
    }

    /// Clipped and renormalized distribution, with the clipped mass.
    pub fn clipped(&self) -> (Distribution<f64>, f64) {
        self.distribution.clip_renormalize()
    }

    /// Applies the inverse confusion matrix to the raw estimates. Values are
    /// recomputed from the corrected distribution; standard errors are kept.
    pub fn with_readout_correction(&self, cm: &ConfusionMatrix) -> Result<Estimate> {
        let corrected = cm.correct(&self.distribution)?;
        let mut out = self.clone();
        for (label, o) in &self.observables {
            let est = o.iter().zip(corrected.probs()).map(|(a, b)| a * b).sum();
            if let Some(v) = out.values.get_mut(label) {
                v.est = est;
            }
        }
        out.distribution = corrected;
        out.method = format!("{}+rem", if self.method == "none" { "" } else { &self.method }).trim_start_matches('+').to_string();
        Ok(out)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

fn check_sigma(sigma: f64) -> Result<()> {
    if !(sigma > 0.0 && sigma < 1.0) {
        return Err(Error::InvalidArgument(format!("sigma must lie in (0, 1), got {sigma}")));
    }
    Ok(())
}

fn sample_count(x: f64) -> Result<u64> {
    let n = x.ceil().max(1.0);
    if !n.is_finite() || n > MAX_SAMPLES as f64 {
        return Err(Error::Infeasible(format!("{x:.3e} samples required")));
    }
    Ok(n as u64)
}

/// Unmitigated estimate from `shots` runs of the circuit.
pub fn direct_estimate(c: &Circuit, device: &Device, observables: &[Observable], shots: u64, seed: u64) -> Result<Estimate> {
    if shots == 0 {
        return Err(Error::InvalidArgument("at least one shot is required".into()));
    }
    let exe = device.prepare(c)?;
    let t = run_tally(&exe, shots, seed, |_, _| (false, 1.0));
    Estimate::build("none", c, observables, t.quasi(1.0), |o| t.moments(o), shots)
}

/// Runs `shots` trajectories; `draw` fills per-shot insertions, says whether to use
/// them, and gives the shot's weight.
fn run_tally<F>(exe: &Executable<f64>, shots: u64, seed: u64, draw: F) -> Tally
where
    F: Fn(&mut rand_chacha::ChaCha8Rng, &mut [PauliString]) -> (bool, f64) + Sync,
{
    let k = exe.k();
    let parts = batched(shots as usize, seed, |rng, _, len| {
        let mut t = Tally::new(k);
        let mut st = StateVector::zero(exe.n());
        let mut ins = vec![PauliString::identity(exe.n()); exe.m()];
        for _ in 0..len {
            let (use_ins, w) = draw(rng, &mut ins);
            let out = exe.shot(&mut st, use_ins.then_some(ins.as_slice()), rng);
            t.add(out, w);
        }
        t
    });
    Tally::merge(parts, k)
}

/// Per-hard-cycle channels for `c`, taken from reports matched by cycle signature.
///
/// Negative estimates are clipped and the identity absorbs the remaining mass.
pub fn channels_from_reports(c: &Circuit, reports: &[CerReport]) -> Result<Vec<PauliChannel<f64>>> {
    let mut by_sig: BTreeMap<Signature, &CerReport> = BTreeMap::new();
    for r in reports {
        match &r.signature {
            Some(s) => {
                by_sig.insert(s.clone(), r);
            }
            None if reports.len() == 1 => {}
            None => return Err(Error::InvalidArgument("reports without a cycle signature are ambiguous".into())),
        }
    }
    c.hard_cycles()
        .map(|h| {
            let r = match by_sig.get(&Signature::of(h)) {
                Some(r) => *r,
                None if reports.len() == 1 && reports[0].signature.is_none() => &reports[0],
                None => return Err(Error::UncoveredCycle(h.label())),
            };
            if r.n != c.n() {
                return Err(Error::LengthMismatch { left: c.n(), right: r.n });
            }
            r.to_channel()
        })
        .collect()
}

/// `1 / (ε_0² − Σ_{k≠0} ε_k²)`, the cost of cancelling one cycle's noise.
pub fn cancellation_cost(ch: &PauliChannel<f64>) -> Result<f64> {
    let e0 = ch.identity_rate();
    let d = e0 * e0 - ch.errors().map(|(_, r)| r * r).sum::<f64>();
    if !(d > 0.0) {
        return Err(Error::Infeasible(format!("cancellation denominator {d} is not positive")));
    }
    Ok(1.0 / d)
}

#[derive(Debug, Clone)]
pub struct PecPlan {
    pub circuit: Circuit,
    /// Insertion channel of each hard cycle.
    pub channels: Vec<PauliChannel<f64>>,
    pub costs: Vec<f64>,
    pub c_tot: f64,
    pub sigma: f64,
    /// Number of sampled circuits `N`.
    pub samples: u64,
}

pub fn pec_plan(c: &Circuit, reports: &[CerReport], sigma: f64) -> Result<PecPlan> {
    pec_plan_with_channels(c, channels_from_reports(c, reports)?, sigma)
}

pub fn pec_plan_with_channels(c: &Circuit, channels: Vec<PauliChannel<f64>>, sigma: f64) -> Result<PecPlan> {
    check_sigma(sigma)?;
    c.check()?;
    if channels.len() != c.m() {
        return Err(Error::InvalidArgument(format!("{} channels for {} hard cycles", channels.len(), c.m())));
    }
    let costs = channels.iter().map(cancellation_cost).collect::<Result<Vec<_>>>()?;
    let c_tot: f64 = costs.iter().product();
    let samples = sample_count((c_tot / sigma).powi(2))?;
    Ok(PecPlan { circuit: c.clone(), channels, costs, c_tot, sigma, samples })
}

fn draw_insertions<R: Rng + ?Sized>(samplers: &[ChannelSampler], rng: &mut R, out: &mut [PauliString]) -> f64 {
    let mut sign = 1.0;
    for (s, slot) in samplers.iter().zip(out.iter_mut()) {
        *slot = s.sample(rng);
        if !slot.is_identity() {
            sign = -sign;
        }
    }
    sign
}

/// One sampled circuit: a Pauli drawn from each cycle's insertion channel is applied
/// right after that cycle. The sign is `(−1)^{#non-identity draws}`.
pub fn pec_sample<R: Rng + ?Sized>(plan: &PecPlan, rng: &mut R) -> Result<(Circuit, i8)> {
    let samplers = plan.channels.iter().map(|c| c.sampler()).collect::<Result<Vec<_>>>()?;
    let mut draws = vec![PauliString::identity(plan.circuit.n()); plan.circuit.m()];
    let sign = draw_insertions(&samplers, rng, &mut draws);
    let mut c = plan.circuit.clone();
    for (j, p) in draws.iter().enumerate() {
        if !p.is_identity() {
            c = append_pauli(&c, j, p)?;
        }
    }
    Ok((c, if sign > 0.0 { 1 } else { -1 }))
}

/// Runs `N` sampled circuits with one shot each; `Ê = C_tot Σ s_k r_k / N`.
pub fn pec_estimate(plan: &PecPlan, device: &Device, observables: &[Observable], seed: u64) -> Result<Estimate> {
    let samplers = plan.channels.iter().map(|c| c.sampler()).collect::<Result<Vec<_>>>()?;
    let exe = device.prepare(&plan.circuit)?;
    let t = run_tally(&exe, plan.samples, seed, |rng, ins| (true, draw_insertions(&samplers, rng, ins)));
    let c = plan.c_tot;
    let mut e = Estimate::build(
        "pec",
        &plan.circuit,
        observables,
        t.quasi(c),
        |o| {
            let (m, v) = t.moments(o);
            (c * m, c * c * v)
        },
        plan.samples,
    )?;
    e.sigma = Some(plan.sigma);
    e.c_tot = Some(c);
    Ok(e)
}

/// Exact quasi-probability evaluation of the plan against the true noise.
pub fn pec_exact(plan: &PecPlan, noise: &NoiseModel<f64>, observables: &[Observable]) -> Result<ExactResult<f64>> {
    let maps = plan.channels.iter().map(SignedPauliMap::cancelling).collect::<Result<Vec<_>>>()?;
    exact_quasiprob_run(&plan.circuit, noise, &maps, observables)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Amplification {
    /// The cycle is applied `α` times in a row (α odd, cycle self-inverse).
    IdentityInsertion,
    /// `α − 1` Paulis drawn from the cycle's channel follow it, fresh every shot.
    AppendErrors,
}

#[derive(Debug, Clone)]
pub struct NoxPlan {
    pub circuit: Circuit,
    pub alpha: usize,
    pub method: Amplification,
    pub channels: Option<Vec<PauliChannel<f64>>>,
    pub sigma: f64,
    /// Shots per circuit variant.
    pub shots: u64,
}

pub fn nox_plan(
    c: &Circuit,
    alpha: usize,
    method: Amplification,
    reports: Option<&[CerReport]>,
    sigma: f64,
) -> Result<NoxPlan> {
    let channels = reports.map(|r| channels_from_reports(c, r)).transpose()?;
    nox_plan_with_channels(c, alpha, method, channels, sigma)
}

pub fn nox_plan_with_channels(
    c: &Circuit,
    alpha: usize,
    method: Amplification,
    channels: Option<Vec<PauliChannel<f64>>>,
    sigma: f64,
) -> Result<NoxPlan> {
    check_sigma(sigma)?;
    c.check()?;
    if alpha < 2 {
        return Err(Error::InvalidArgument(format!("amplification factor must be at least 2, got {alpha}")));
    }
    match method {
        Amplification::IdentityInsertion => {
            if alpha % 2 == 0 {
                return Err(Error::InvalidArgument(format!("identity insertion needs an odd factor, got {alpha}")));
            }
            if let Some(h) = c.hard_cycles().find(|h| !h.is_self_inverse()) {
                return Err(Error::InvalidArgument(format!("identity insertion needs self-inverse cycles; {h} is not")));
            }
        }
        Amplification::AppendErrors => match &channels {
            None => return Err(Error::InvalidArgument("append errors needs a channel for every cycle".into())),
            Some(ch) if ch.len() != c.m() => {
                return Err(Error::InvalidArgument(format!("{} channels for {} hard cycles", ch.len(), c.m())))
            }
            Some(_) => {}
        },
    }
    let m = c.m() as f64;
    let a1 = (alpha - 1) as f64;
    let shots = sample_count(m * m / (a1 * a1 * sigma * sigma))?;
    Ok(NoxPlan { circuit: c.clone(), alpha, method, channels, sigma, shots })
}

fn appended_error<R: Rng + ?Sized>(s: &ChannelSampler, count: usize, n: usize, rng: &mut R) -> PauliString {
    (0..count).fold(PauliString::identity(n), |acc, _| compose(&acc, &s.sample(rng)))
}

/// The circuit with cycle `j` amplified. For append errors this is one draw of
/// the appended Paulis; estimators redraw them every shot.
pub fn nox_amplified_circuit<R: Rng + ?Sized>(c: &Circuit, j: usize, plan: &NoxPlan, rng: &mut R) -> Result<Circuit> {
    if j >= c.m() {
        return Err(Error::InvalidArgument(format!("no hard cycle {j} in a circuit with {}", c.m())));
    }
    match plan.method {
        Amplification::IdentityInsertion => {
            if !c.hard(j).is_self_inverse() || plan.alpha % 2 == 0 {
                return Err(Error::InvalidArgument("identity insertion needs a self-inverse cycle and odd factor".into()));
            }
            c.with_repeated_hard_cycle(j, plan.alpha)
        }
        Amplification::AppendErrors => {
            let ch = plan
                .channels
                .as_ref()
                .and_then(|v| v.get(j))
                .ok_or_else(|| Error::InvalidArgument(format!("no channel for cycle {j}")))?;
            let p = appended_error(&ch.sampler()?, plan.alpha - 1, c.n(), rng);
            append_pauli(c, j, &p)
        }
    }
}

/// Extrapolation weights: `(α−1+m)/(α−1)` for the base circuit, `−1/(α−1)` per amplified variant.
pub fn nox_coefficients(m: usize, alpha: usize) -> Vec<f64> {
    let a1 = (alpha - 1) as f64;
    std::iter::once((a1 + m as f64) / a1).chain(std::iter::repeat(-1.0 / a1).take(m)).collect()
}

pub fn nox_estimate(plan: &NoxPlan, device: &Device, observables: &[Observable], seed: u64) -> Result<Estimate> {
    let c = &plan.circuit;
    let m = c.m();
    let samplers = match &plan.channels {
        Some(ch) if plan.method == Amplification::AppendErrors => {
            ch.iter().map(|x| x.sampler()).collect::<Result<Vec<_>>>()?
        }
        _ => vec![],
    };
    let tallies = (0..=m)
        .into_par_iter()
        .map(|v| {
            let s = derive_seed(seed, &[v as u64]);
            if v == 0 {
                return Ok(run_tally(&device.prepare(c)?, plan.shots, s, |_, _| (false, 1.0)));
            }
            let j = v - 1;
            match plan.method {
                Amplification::IdentityInsertion => {
                    let exe = device.prepare(&c.with_repeated_hard_cycle(j, plan.alpha)?)?;
                    Ok(run_tally(&exe, plan.shots, s, |_, _| (false, 1.0)))
                }
                Amplification::AppendErrors => {
                    let exe = device.prepare(c)?;
                    let n = c.n();
                    Ok(run_tally(&exe, plan.shots, s, |rng, ins| {
                        ins[j] = appended_error(&samplers[j], plan.alpha - 1, n, rng);
                        (true, 1.0)
                    }))
                }
            }
        })
        .collect::<Result<Vec<Tally>>>()?;
    let coef = nox_coefficients(m, plan.alpha);
    let k = c.measured().len();
    let mut quasi = vec![0.0; 1 << k];
    for (a, t) in coef.iter().zip(&tallies) {
        quasi.iter_mut().zip(t.quasi(*a)).for_each(|(q, x)| *q += x);
    }
    let mut e = Estimate::build(
        "nox",
        c,
        observables,
        quasi,
        |o| {
            coef.iter().zip(&tallies).fold((0.0, 0.0), |(est, var), (a, t)| {
                let (mu, v) = t.moments(o);
                (est + a * mu, var + a * a * v)
            })
        },
        plan.shots * (m as u64 + 1),
    )?;
    e.sigma = Some(plan.sigma);
    e.alpha = Some(plan.alpha);
    Ok(e)
}

/// Exact `Ẽ_{H_j,α}`: the circuit with cycle `j` amplified, on the density-matrix engine.
/// Append errors realize `D ∘ ch^{α−1}` on that cycle, where `ch` is the plan's channel.
pub fn nox_exact_variant(plan: &NoxPlan, noise: &NoiseModel<f64>, j: usize, observables: &[Observable]) -> Result<ExactResult<f64>> {
    let c = &plan.circuit;
    if j >= c.m() {
        return Err(Error::InvalidArgument(format!("no hard cycle {j} in a circuit with {}", c.m())));
    }
    match plan.method {
        Amplification::IdentityInsertion => exact_run(&c.with_repeated_hard_cycle(j, plan.alpha)?, Some(noise), observables),
        Amplification::AppendErrors => {
            let ch = &plan.channels.as_ref().expect("validated plan")[j];
            let mut cycle_noise = noise.resolve(c)?;
            let d = cycle_noise[j].as_pauli(c.n()).ok_or_else(|| Error::CoherentNoiseInExactMode(c.hard(j).label()))?;
            cycle_noise[j] = CycleNoise::Pauli(d.compose(&channel_power(ch, (plan.alpha - 1) as u32)?)?);
            exact_run_with_cycle_noise(c, &cycle_noise, observables)
        }
    }
}

/// Exact NOX: the extrapolation applied to exact values of every variant.
pub fn nox_exact(plan: &NoxPlan, noise: &NoiseModel<f64>, observables: &[Observable]) -> Result<ExactResult<f64>> {
    let c = &plan.circuit;
    let base = exact_run(c, Some(noise), observables)?;
    let coef = nox_coefficients(c.m(), plan.alpha);
    let mut out = base.zeroed();
    out.scaled_add(&base, coef[0]);
    for (j, a) in coef[1..].iter().enumerate() {
        out.scaled_add(&nox_exact_variant(plan, noise, j, observables)?, *a);
    }
    Ok(out)
}

/// Per-qubit readout confusion matrices, `m[i][j] = P(read i | prepared j)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub qubits: Vec<[[f64; 2]; 2]>,
}

impl ConfusionMatrix {
    pub fn identity(n: usize) -> Self {
        ConfusionMatrix { qubits: vec![[[1.0, 0.0], [0.0, 1.0]]; n] }
    }

    /// From `P(1|0)` and `P(0|1)` per qubit.
    pub fn from_flip_rates(p10: &[f64], p01: &[f64]) -> Result<Self> {
        if p10.len() != p01.len() {
            return Err(Error::LengthMismatch { left: p10.len(), right: p01.len() });
        }
        Ok(ConfusionMatrix { qubits: p10.iter().zip(p01).map(|(&a, &b)| [[1.0 - a, b], [a, 1.0 - b]]).collect() })
    }

    pub fn n(&self) -> usize {
        self.qubits.len()
    }

    pub fn p10(&self, q: usize) -> f64 {
        self.qubits[q][1][0]
    }

    pub fn p01(&self, q: usize) -> f64 {
        self.qubits[q][0][1]
    }

    /// Matrices of the listed qubits, in that order.
    pub fn restrict(&self, qubits: &[usize]) -> Result<Self> {
        qubits
            .iter()
            .map(|&q| {
                self.qubits.get(q).copied().ok_or_else(|| Error::InvalidArgument(format!("no confusion data for qubit {q}")))
            })
            .collect::<Result<Vec<_>>>()
            .map(|qubits| ConfusionMatrix { qubits })
    }

    fn inverses(&self) -> Result<Vec<[[f64; 2]; 2]>> {
        self.qubits
            .iter()
            .enumerate()
            .map(|(q, m)| {
                let diag = m[0][0].min(m[1][1]);
                if !(diag > 0.5) {
                    return Err(Error::IllConditioned { qubit: q, diag });
                }
                let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
                Ok([[m[1][1] / det, -m[0][1] / det], [-m[1][0] / det, m[0][0] / det]])
            })
            .collect()
    }

    fn apply_each(v: &mut [f64], mats: &[[[f64; 2]; 2]]) {
        for (b, m) in mats.iter().enumerate() {
            let bit = 1usize << b;
            for i in 0..v.len() {
                if i & bit == 0 {
                    let (x0, x1) = (v[i], v[i | bit]);
                    v[i] = m[0][0] * x0 + m[0][1] * x1;
                    v[i | bit] = m[1][0] * x0 + m[1][1] * x1;
                }
            }
        }
    }

    /// Pushes a distribution through the readout noise.
    pub fn confuse(&self, d: &Distribution<f64>) -> Result<Distribution<f64>> {
        if d.bits() != self.n() {
            return Err(Error::LengthMismatch { left: self.n(), right: d.bits() });
        }
        let mut v = d.probs().to_vec();
        Self::apply_each(&mut v, &self.qubits);
        Distribution::new(d.bits(), v)
    }

    /// Applies the tensor-product inverse; the result may have negative entries.
    pub fn correct(&self, d: &Distribution<f64>) -> Result<Distribution<f64>> {
        if d.bits() != self.n() {
            return Err(Error::LengthMismatch { left: self.n(), right: d.bits() });
        }
        let inv = self.inverses()?;
        let mut v = d.probs().to_vec();
        Self::apply_each(&mut v, &inv);
        Distribution::new(d.bits(), v)
    }
}

/// Readout calibration: all-identity and all-X circuits, per-qubit marginal frequencies.
pub fn rcal_measure(device: &Device, n: usize, shots: u64, seed: u64) -> Result<ConfusionMatrix> {
    if shots == 0 {
        return Err(Error::InvalidArgument("readout calibration needs at least one shot".into()));
    }
    let all: Vec<usize> = (0..n).collect();
    let id = Circuit::from_layers(vec![EasyCycle::identity(n)], vec![], all.clone())?;
    let x = Circuit::from_layers(vec![EasyCycle::new(vec![GateSpec::named("x", &[]); n])], vec![], all)?;
    let h0 = device.run(&id, shots as usize, derive_seed(seed, &[0]))?.histogram(n)?;
    let h1 = device.run(&x, shots as usize, derive_seed(seed, &[1]))?.histogram(n)?;
    let ones = |h: &[u64], q: usize| h.iter().enumerate().filter(|(i, _)| (i >> q) & 1 == 1).map(|(_, c)| *c).sum::<u64>();
    let s = shots as f64;
    let p10: Vec<f64> = (0..n).map(|q| ones(&h0, q) as f64 / s).collect();
    let p01: Vec<f64> = (0..n).map(|q| 1.0 - ones(&h1, q) as f64 / s).collect();
    ConfusionMatrix::from_flip_rates(&p10, &p01)
}

/// Corrects measured counts; negative entries are clipped and the result renormalized.
pub fn rem_apply(counts: &ShotRecord, cm: &ConfusionMatrix) -> Result<Distribution<f64>> {
    let d = counts.frequencies(cm.n())?;
    Ok(cm.correct(&d)?.clip_renormalize().0)
}
