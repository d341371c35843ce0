//! Cycle error reconstruction: Pauli fidelities from benchmarking decays, then
//! Pauli error rates by inverting the fidelity transform.
//!
//! Hard cycles are self-inverse, so a Pauli `b` alternates between `b` and its
//! image `b' = H b H†`. Even depths only see `f_b f_b'`; odd depths separate the
//! two. Every requested depth `d` is therefore paired with `d − 1`, and decays
//! are fitted as `log g(d) = a + d·l + [d odd]·ρ`, giving `f_b' = e^{l+ρ}` and
//! `f_b = e^{l−ρ}`. When both `b` and `b'` are tracked their curves share `l`, `ρ`.

use crate::circuit::{Circuit, HardCycle};
use crate::error::{Error, Result};
use crate::noise::{CycleNoise, NoiseModel, PauliChannel, Signature};
use crate::pauli::{anticommutes, CycleConjugator, Pauli, PauliString, Phase};
use crate::rc::Twirler;
use crate::simulator::{batched, derive_seed, ReadoutNoise, StateVector};
use crate::linalg::{mat2_cast, mat2_dagger, Mat2};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

pub const DEFAULT_DEPTHS: [usize; 4] = [2, 4, 8, 16];

/// Measured decay of one Pauli and its fitted fidelity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayCurve {
    pub pauli: PauliString,
    pub depths: Vec<usize>,
    pub estimates: Vec<f64>,
    pub fidelity: f64,
    pub stderr: f64,
}

/// Paulis tracked by default: all of them for `n ≤ 3`, weight ≤ 2 otherwise.
pub fn default_tracked(n: usize) -> Vec<PauliString> {
    let all = if n <= 3 { PauliString::all(n).collect() } else { PauliString::up_to_weight(n, 2) };
    all.into_iter().filter(|p| !p.is_identity()).collect()
}

fn measured_depths(cycle: &HardCycle, depths: &[usize]) -> Result<Vec<usize>> {
    if depths.is_empty() || depths.windows(2).any(|w| w[0] >= w[1]) || depths[0] < 2 {
        return Err(Error::InvalidArgument("depths must be strictly increasing and >= 2".into()));
    }
    if !cycle.is_self_inverse() {
        if depths.iter().any(|d| d % 2 == 1) {
            return Err(Error::InvalidArgument("odd depths need a self-inverse cycle".into()));
        }
        return Ok(depths.to_vec());
    }
    let mut all: Vec<usize> = depths.iter().flat_map(|&d| [d - 1, d]).collect();
    all.sort_unstable();
    all.dedup();
    Ok(all)
}

/// `(phase, label)` of `H^k b H^{†k}` for `k = 0..=max`.
fn orbit(conj: &CycleConjugator, b: &PauliString, max: usize) -> Vec<(Phase, PauliString)> {
    let mut out = vec![(Phase::ONE, *b)];
    for _ in 0..max {
        let (ph, p) = *out.last().expect("non-empty");
        let (ph2, p2) = conj.conjugate(&p);
        out.push((ph * ph2, p2));
    }
    out
}

fn basis_in(p: Pauli) -> Option<Mat2<f64>> {
    let h = crate::circuit::named_matrix("h", &[]).expect("h");
    let s = crate::circuit::named_matrix("s", &[]).expect("s");
    match p {
        Pauli::I | Pauli::Z => None,
        Pauli::X => Some(h),
        Pauli::Y => Some(crate::linalg::mat2_mul(&s, &h)),
    }
}

enum Engine {
    /// Pauli noise, clean readout: each trajectory keeps the state an eigenstate of the
    /// propagated Pauli, so a shot's outcome is the product of anticommutation signs.
    Frame(Option<crate::noise::ChannelSampler>),
    State { noise: CycleNoise<f64>, readout: Option<ReadoutNoise> },
}

fn estimate_point<R: Rng + ?Sized>(
    engine: &Engine,
    cycle: &HardCycle,
    twirler: &Twirler,
    b: &PauliString,
    orb: &[(Phase, PauliString)],
    depth: usize,
    shots: usize,
    rng: &mut R,
) -> i64 {
    let n = cycle.n();
    let mut total = 0i64;
    match engine {
        Engine::Frame(None) => total = shots as i64,
        Engine::Frame(Some(s)) => {
            for _ in 0..shots {
                let mut v = 1i64;
                for (_, bk) in &orb[1..=depth] {
                    if anticommutes(&s.sample(rng), bk) {
                        v = -v;
                    }
                }
                total += v;
            }
        }
        Engine::State { noise, readout } => {
            let (sign_d, pd) = orb[depth];
            let sign_d = if sign_d == Phase::ONE { 1 } else { -1 };
            let prep: Vec<(usize, Mat2<f64>)> =
                (0..n).filter_map(|q| basis_in(b.get(q)).map(|u| (q, u))).collect();
            let meas: Vec<(usize, Mat2<f64>)> =
                (0..n).filter_map(|q| basis_in(pd.get(q)).map(|u| (q, mat2_dagger(&u)))).collect();
            let dense = match noise {
                CycleNoise::Coherent(c) => Some(c.full_unitary(n)),
                _ => None,
            };
            let sampler = match noise {
                CycleNoise::Pauli(ch) => Some(ch.sampler().expect("validated channel")),
                _ => None,
            };
            let support = (pd.x_mask() | pd.z_mask()) as usize;
            let mut st = StateVector::<f64>::zero(n);
            for _ in 0..shots {
                st.reset();
                for (q, u) in &prep {
                    st.apply_1q(*q, &mat2_cast(u));
                }
                for _ in 0..depth {
                    let f = twirler.draw(rng)[0];
                    st.apply_pauli(&f.twirl);
                    st.apply_hard(cycle);
                    if let Some(s) = &sampler {
                        st.apply_pauli(&s.sample(rng));
                    }
                    if let Some(u) = &dense {
                        st.apply_dense(u);
                    }
                    st.apply_pauli(&f.correction);
                }
                for (q, u) in &meas {
                    st.apply_1q(*q, u);
                }
                let mut out = st.sample(rng);
                if let Some(r) = readout {
                    out = r.corrupt(out, rng);
                }
                let parity = (out & support).count_ones() & 1;
                total += if parity == 0 { sign_d } else { -sign_d };
            }
        }
    }
    total
}

struct RawCurve {
    b: PauliString,
    partner: PauliString,
    depths: Vec<usize>,
    g: Vec<f64>,
}

/// Runs the benchmarking sequences for the given Paulis and fits each decay.
pub fn benchmark_paulis(
    cycle: &HardCycle,
    noise: &NoiseModel<f64>,
    readout: Option<&ReadoutNoise>,
    paulis: &[PauliString],
    depths: &[usize],
    shots: usize,
    seed: u64,
) -> Result<Vec<DecayCurve>> {
    let n = cycle.n();
    if shots == 0 {
        return Err(Error::InvalidArgument("benchmarking needs at least one shot per point".into()));
    }
    if let Some(p) = paulis.iter().find(|p| p.len() != n) {
        return Err(Error::LengthMismatch { left: n, right: p.len() });
    }
    let all_depths = measured_depths(cycle, depths)?;
    let max_depth = *all_depths.last().expect("non-empty");
    let cycle_noise = noise.get(cycle)?;
    let engine = match (&cycle_noise, readout) {
        (CycleNoise::Noiseless, None) => Engine::Frame(None),
        (CycleNoise::Pauli(ch), None) => Engine::Frame(Some(ch.sampler()?)),
        _ => Engine::State { noise: cycle_noise.clone(), readout: readout.cloned() },
    };
    let single = Circuit::from_layers(
        vec![crate::circuit::EasyCycle::identity(n), crate::circuit::EasyCycle::identity(n)],
        vec![cycle.clone()],
        (0..n).collect(),
    )?;
    let twirler = Twirler::new(&single);
    let conj = CycleConjugator::new(cycle);

    let raw: Vec<RawCurve> = paulis
        .par_iter()
        .enumerate()
        .map(|(bi, b)| {
            let orb = orbit(&conj, b, max_depth);
            let g = all_depths
                .iter()
                .enumerate()
                .map(|(di, &d)| {
                    let s = derive_seed(seed, &[bi as u64, di as u64]);
                    let sums = batched(shots, s, |rng, _, len| estimate_point(&engine, cycle, &twirler, b, &orb, d, len, rng));
                    sums.into_iter().sum::<i64>() as f64 / shots as f64
                })
                .collect();
            RawCurve { b: *b, partner: orb[1].1, depths: all_depths.clone(), g }
        })
        .collect();
    fit_curves(&raw, shots, readout.is_some())
}

/// Benchmarks the default tracked Paulis of a cycle.
pub fn benchmark_cycle(
    cycle: &HardCycle,
    noise: &NoiseModel<f64>,
    depths: &[usize],
    shots: usize,
    seed: u64,
) -> Result<Vec<DecayCurve>> {
    benchmark_paulis(cycle, noise, None, &default_tracked(cycle.n()), depths, shots, seed)
}

/// One fit row: design vector, response `log g`, weight.
type Row = (Vec<f64>, f64, f64);

fn rows_for(curve: &RawCurve, shots: usize, a_col: Option<usize>, rho_sign: f64, p: usize) -> Vec<Row> {
    let nn = shots as f64;
    curve
        .depths
        .iter()
        .zip(&curve.g)
        .filter(|(_, &g)| g > 0.0)
        .map(|(&d, &g)| {
            let mut x = vec![0.0; p];
            if let Some(a) = a_col {
                x[a] = 1.0;
            }
            x[p - 2] = d as f64;
            x[p - 1] = if d % 2 == 1 { rho_sign } else { 0.0 };
            (x, g.ln(), binomial_weight(g, nn))
        })
        .collect()
}

fn binomial_weight(g: f64, nn: f64) -> f64 {
    (nn * g * g) / (1.0 - g * g).max(1.0 / nn)
}

/// Weighted least squares, reweighted a few times with the fitted decay in place of
/// the noisy observations so that weights do not correlate with the residuals.
fn fit(rows: &[Row], p: usize, shots: usize) -> Option<(DVector<f64>, DMatrix<f64>)> {
    let nn = shots as f64;
    let mut rows = rows.to_vec();
    let mut res = wls(&rows, p)?;
    for _ in 0..3 {
        for r in rows.iter_mut() {
            let pred: f64 = r.0.iter().zip(res.0.iter()).map(|(x, b)| x * b).sum();
            r.2 = binomial_weight(pred.exp().min(1.0), nn);
        }
        res = wls(&rows, p)?;
    }
    Some(res)
}

/// Weighted least squares; returns parameters and their covariance.
fn wls(rows: &[Row], p: usize) -> Option<(DVector<f64>, DMatrix<f64>)> {
    if rows.len() < p {
        return None;
    }
    let mut xtwx = DMatrix::<f64>::zeros(p, p);
    let mut xtwy = DVector::<f64>::zeros(p);
    for (x, y, w) in rows {
        for i in 0..p {
            xtwy[i] += w * x[i] * y;
            for j in 0..p {
                xtwx[(i, j)] += w * x[i] * x[j];
            }
        }
    }
    let cov = xtwx.try_inverse()?;
    if cov.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let beta = &cov * xtwy;
    Some((beta, cov))
}

/// With clean state preparation and readout the decays start at exactly one, so the
/// intercept is pinned instead of fitted; this leaves the parity term much better determined.
fn fit_curves(raw: &[RawCurve], shots: usize, free_intercept: bool) -> Result<Vec<DecayCurve>> {
    let index: BTreeMap<PauliString, usize> = raw.iter().enumerate().map(|(i, c)| (c.b, i)).collect();
    let mut out: Vec<Option<DecayCurve>> = vec![None; raw.len()];
    let a = |col: usize| free_intercept.then_some(col);
    for (i, c) in raw.iter().enumerate() {
        if out[i].is_some() {
            continue;
        }
        let curve = |r: &RawCurve, f: f64, se: f64| DecayCurve {
            pauli: r.b,
            depths: r.depths.clone(),
            estimates: r.g.clone(),
            fidelity: f,
            stderr: se,
        };
        let fail = || Error::FitFailure(c.b.to_string());
        if c.partner == c.b {
            // fixed point: g(d) = A f^d, parity column unused
            let p = if free_intercept { 3 } else { 2 };
            let rows: Vec<Row> =
                rows_for(c, shots, a(0), 0.0, p).into_iter().map(|(x, y, w)| (x[..p - 1].to_vec(), y, w)).collect();
            let (beta, cov) = fit(&rows, p - 1, shots).ok_or_else(fail)?;
            let f = beta[p - 2].exp();
            out[i] = Some(curve(c, f, f * cov[(p - 2, p - 2)].sqrt()));
        } else if let Some(&j) = index.get(&c.partner) {
            // joint fit: b sees e^{ρ} at odd depths, its partner e^{−ρ}
            let p = if free_intercept { 4 } else { 2 };
            let mut rows = rows_for(c, shots, a(0), 1.0, p);
            rows.extend(rows_for(&raw[j], shots, a(1), -1.0, p));
            let (beta, cov) = fit(&rows, p, shots).ok_or_else(fail)?;
            let (li, ri) = (p - 2, p - 1);
            let (l, rho) = (beta[li], beta[ri]);
            let var_minus = cov[(li, li)] + cov[(ri, ri)] - 2.0 * cov[(li, ri)];
            let var_plus = cov[(li, li)] + cov[(ri, ri)] + 2.0 * cov[(li, ri)];
            let (fb, fp) = ((l - rho).exp(), (l + rho).exp());
            out[i] = Some(curve(c, fb, fb * var_minus.max(0.0).sqrt()));
            out[j] = Some(curve(&raw[j], fp, fp * var_plus.max(0.0).sqrt()));
        } else {
            let p = if free_intercept { 3 } else { 2 };
            let rows = rows_for(c, shots, a(0), 1.0, p);
            let (beta, cov) = fit(&rows, p, shots).ok_or_else(fail)?;
            let (li, ri) = (p - 2, p - 1);
            let var = cov[(li, li)] + cov[(ri, ri)] - 2.0 * cov[(li, ri)];
            let f = (beta[li] - beta[ri]).exp();
            out[i] = Some(curve(c, f, f * var.max(0.0).sqrt()));
        }
    }
    Ok(out.into_iter().map(|c| c.expect("every curve fitted")).collect())
}

/// Exact fidelities of a known channel, packaged as noiseless curves.
pub fn analytic_curves(ch: &PauliChannel<f64>, paulis: &[PauliString]) -> Vec<DecayCurve> {
    paulis
        .iter()
        .map(|b| DecayCurve { pauli: *b, depths: vec![], estimates: vec![], fidelity: ch.fidelity(b), stderr: 0.0 })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateEstimate {
    pub est: f64,
    pub stderr: f64,
}

/// Reconstructed error rates of one cycle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CerReport {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub signature: Option<Signature>,
    pub n: usize,
    #[serde(rename = "K")]
    pub k: usize,
    /// Unclipped estimates, identity included.
    pub rates: BTreeMap<PauliString, RateEstimate>,
    pub residual_mass: f64,
    pub beta: f64,
}

impl CerReport {
    /// Clips negative rates to zero; the identity absorbs the remaining mass.
    pub fn to_channel(&self) -> Result<PauliChannel<f64>> {
        let errors: Vec<(PauliString, f64)> =
            self.rates.iter().filter(|(p, _)| !p.is_identity()).map(|(p, r)| (*p, r.est.max(0.0))).collect();
        let total: f64 = errors.iter().map(|(_, r)| r).sum();
        if total >= 1.0 {
            return Err(Error::Infeasible(format!("reconstructed error mass {total} >= 1")));
        }
        PauliChannel::from_error_rates(self.n, errors)
    }

    /// A report carrying a known channel exactly (zero uncertainty).
    pub fn exact(cycle: &HardCycle, ch: &PauliChannel<f64>) -> Result<Self> {
        if ch.n() != cycle.n() {
            return Err(Error::LengthMismatch { left: cycle.n(), right: ch.n() });
        }
        let rates = ch.iter().map(|(p, r)| (*p, RateEstimate { est: *r, stderr: 0.0 })).collect();
        Ok(CerReport { signature: Some(Signature::of(cycle)), n: ch.n(), k: ch.n(), rates, residual_mass: 0.0, beta: 0.0 })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Relative precision: largest `stderr/est` among rates estimated above three standard errors.
fn relative_uncertainty(rates: &BTreeMap<PauliString, RateEstimate>) -> f64 {
    rates
        .iter()
        .filter(|(p, r)| !p.is_identity() && r.est > 3.0 * r.stderr && r.est > 0.0)
        .map(|(_, r)| r.stderr / r.est)
        .fold(0.0, f64::max)
}

/// Inverts fidelities into error rates of weight ≤ `k`.
///
/// With every non-identity fidelity available the transform
/// `ε_a = 4^{−n} Σ_b (−1)^{⟨a,b⟩} f_b` is applied directly; otherwise the square
/// system over the weight-≤`k` strings is solved, assuming heavier rates vanish.
pub fn reconstruct_rates(curves: &[DecayCurve], k: usize, n: usize) -> Result<CerReport> {
    let mut f: BTreeMap<PauliString, (f64, f64)> = BTreeMap::new();
    f.insert(PauliString::identity(n), (1.0, 0.0));
    for c in curves {
        if c.pauli.len() != n {
            return Err(Error::LengthMismatch { left: n, right: c.pauli.len() });
        }
        f.insert(c.pauli, (c.fidelity, c.stderr));
    }
    let dim = 1usize << (2 * n);
    let mut rates = BTreeMap::new();
    let residual_mass;
    if f.len() == dim {
        let scale = 1.0 / dim as f64;
        let se = scale * f.values().map(|(_, s)| s * s).sum::<f64>().sqrt();
        let mut reported = 0.0;
        for a in PauliString::all(n).filter(|a| a.weight() <= k) {
            let est = scale * f.iter().map(|(b, (fb, _))| if anticommutes(&a, b) { -fb } else { *fb }).sum::<f64>();
            reported += est;
            rates.insert(a, RateEstimate { est, stderr: se });
        }
        residual_mass = 1.0 - reported;
    } else {
        let support = PauliString::up_to_weight(n, k);
        if let Some(missing) = support.iter().find(|b| !f.contains_key(b)) {
            return Err(Error::InsufficientCurves(format!("no fidelity for {missing} (needed for K = {k})")));
        }
        let s = support.len();
        let m = DMatrix::from_fn(s, s, |i, j| if anticommutes(&support[i], &support[j]) { -1.0 } else { 1.0 });
        let inv = m
            .try_inverse()
            .ok_or_else(|| Error::InsufficientCurves(format!("fidelity system for K = {k} is singular")))?;
        let fv = DVector::from_iterator(s, support.iter().map(|b| f[b].0));
        let est = &inv * fv;
        for (i, a) in support.iter().enumerate() {
            let var: f64 = (0..s).map(|j| (inv[(i, j)] * f[&support[j]].1).powi(2)).sum();
            rates.insert(*a, RateEstimate { est: est[i], stderr: var.sqrt() });
        }
        residual_mass = 1.0 - est.iter().sum::<f64>();
    }
    let beta = relative_uncertainty(&rates);
    Ok(CerReport { signature: None, n, k, rates, residual_mass, beta })
}

/// Benchmarks and reconstructs every distinct hard cycle of a circuit, in order of first appearance.
#[allow(clippy::too_many_arguments)]
pub fn characterize(
    circuit: &Circuit,
    noise: &NoiseModel<f64>,
    readout: Option<&ReadoutNoise>,
    depths: &[usize],
    shots: usize,
    k: usize,
    seed: u64,
) -> Result<Vec<CerReport>> {
    circuit
        .distinct_hard_cycles()
        .iter()
        .enumerate()
        .map(|(i, h)| {
            let paulis = default_tracked(h.n());
            let curves = benchmark_paulis(h, noise, readout, &paulis, depths, shots, derive_seed(seed, &[i as u64]))?;
            let mut rep = reconstruct_rates(&curves, k, h.n())?;
            rep.signature = Some(Signature::of(h));
            Ok(rep)
        })
        .collect()
}
