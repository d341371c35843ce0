//! Trajectory sampler ("device") and exact density-matrix engine.
//!
//! # Seeding
//!
//! Shots are drawn in batches of [`BATCH_SIZE`]. Batch `b` of a run with seed `s`
//! uses `ChaCha8Rng::seed_from_u64(s.wrapping_add(b))`, so aggregate counts are
//! identical whether batches run serially or on a thread pool.

pub mod density;
pub mod exact;
pub mod statevector;

pub use density::DensityMatrix;
pub use exact::{exact_quasiprob_run, exact_run, exact_run_twirled, ExactResult, SignedPauliMap, DEFAULT_TWIRLS};
pub use statevector::StateVector;

use crate::circuit::{bitstring, bitstring_index, Circuit, HardCycle};
use crate::error::{Error, Result};
use crate::linalg::{mat2_cast, CMatrix, Mat2};
use crate::noise::{ChannelSampler, CycleNoise, NoiseModel};
use crate::pauli::PauliString;
use crate::rc::Twirler;
use crate::scalar::Real;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Largest register the trajectory sampler accepts.
pub const MAX_TRAJECTORY_QUBITS: usize = 6;
/// Shots per seeded batch.
pub const BATCH_SIZE: usize = 1024;

/// The RNG used for every batch.
pub fn batch_rng(seed: u64, batch: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed.wrapping_add(batch as u64))
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of a task identified by `path` under a master seed.
///
/// Depends only on `(master, path)`, never on scheduling order.
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    path.iter().fold(splitmix64(master), |acc, &p| splitmix64(acc ^ splitmix64(p.wrapping_add(0x5851_F42D_4C95_7F2D))))
}

/// Splits `total` items into seeded batches and maps `f(rng, start, len)` over them in parallel.
/// Results come back in batch order.
pub fn batched<A, F>(total: usize, seed: u64, f: F) -> Vec<A>
where
    A: Send,
    F: Fn(&mut ChaCha8Rng, usize, usize) -> A + Sync,
{
    let batches = total.div_ceil(BATCH_SIZE);
    (0..batches)
        .into_par_iter()
        .map(|b| {
            let start = b * BATCH_SIZE;
            let len = BATCH_SIZE.min(total - start);
            f(&mut batch_rng(seed, b), start, len)
        })
        .collect()
}

/// Independent per-qubit readout bit flips.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReadoutNoise {
    /// `P(1|0)` per qubit.
    pub p10: Vec<f64>,
    /// `P(0|1)` per qubit.
    pub p01: Vec<f64>,
}

impl ReadoutNoise {
    pub fn uniform(n: usize, p10: f64, p01: f64) -> Self {
        ReadoutNoise { p10: vec![p10; n], p01: vec![p01; n] }
    }

    /// Flips the bits of a full-register outcome.
    pub fn corrupt<R: Rng + ?Sized>(&self, outcome: usize, rng: &mut R) -> usize {
        let mut out = outcome;
        for q in 0..self.p10.len() {
            let bit = (outcome >> q) & 1;
            let p = if bit == 0 { self.p10[q] } else { self.p01[q] };
            if p > 0.0 && rng.random::<f64>() < p {
                out ^= 1 << q;
            }
        }
        out
    }
}

/// Counts of measured bitstrings.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShotRecord {
    pub shots: u64,
    pub seed: u64,
    pub counts: BTreeMap<String, u64>,
}

impl ShotRecord {
    pub fn from_outcomes(k: usize, seed: u64, outcomes: &[u64]) -> Self {
        let counts = outcomes
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(i, &c)| (bitstring(i, k), c))
            .collect();
        ShotRecord { shots: outcomes.iter().sum(), seed, counts }
    }

    /// Dense histogram over `k` bits.
    pub fn histogram(&self, k: usize) -> Result<Vec<u64>> {
        let mut h = vec![0u64; 1 << k];
        for (s, &c) in &self.counts {
            if s.len() != k {
                return Err(Error::InvalidArgument(format!("bitstring {s} is not {k} bits long")));
            }
            h[bitstring_index(s)?] += c;
        }
        Ok(h)
    }

    /// Empirical frequencies.
    pub fn frequencies(&self, k: usize) -> Result<crate::metrics::Distribution<f64>> {
        let h = self.histogram(k)?;
        let total = self.shots.max(1) as f64;
        crate::metrics::Distribution::new(k, h.into_iter().map(|c| c as f64 / total).collect())
    }

    /// Pools two records (the seed of `self` is kept).
    pub fn merge(&self, other: &ShotRecord) -> ShotRecord {
        let mut counts = self.counts.clone();
        for (s, c) in &other.counts {
            *counts.entry(s.clone()).or_insert(0) += c;
        }
        ShotRecord { shots: self.shots + other.shots, seed: self.seed, counts }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let r: ShotRecord = serde_json::from_str(s)?;
        let total: u64 = r.counts.values().sum();
        if total != r.shots {
            return Err(Error::Parse(format!("counts sum to {total}, expected {}", r.shots)));
        }
        Ok(r)
    }
}

#[derive(Debug, Clone)]
enum PreparedNoise<T: Real> {
    None,
    Pauli(ChannelSampler),
    Coherent(CMatrix<T>),
}

/// A circuit bound to a noise model, ready for repeated trajectories.
#[derive(Debug, Clone)]
pub struct Executable<T: Real> {
    n: usize,
    measure: Vec<usize>,
    /// Non-identity single-qubit gates of each easy cycle.
    easy: Vec<Vec<(usize, Mat2<T>)>>,
    hard: Vec<HardCycle>,
    noise: Vec<PreparedNoise<T>>,
    twirler: Option<Twirler>,
    readout: Option<ReadoutNoise>,
}

impl<T: Real> Executable<T> {
    pub fn new(circuit: &Circuit, noise: &NoiseModel<T>, rc: bool, readout: Option<&ReadoutNoise>) -> Result<Self> {
        let n = circuit.n();
        if n > MAX_TRAJECTORY_QUBITS {
            return Err(Error::DimensionTooLarge { n, max: MAX_TRAJECTORY_QUBITS });
        }
        circuit.check()?;
        if let Some(r) = readout {
            if r.p10.len() != n || r.p01.len() != n {
                return Err(Error::LengthMismatch { left: n, right: r.p10.len().min(r.p01.len()) });
            }
        }
        let easy = circuit
            .easy_cycles()
            .map(|e| {
                Ok(e.gates()
                    .iter()
                    .enumerate()
                    .filter(|(_, g)| !g.is_identity_name())
                    .map(|(q, g)| Ok((q, mat2_cast::<T>(&g.matrix()?))))
                    .collect::<Result<Vec<_>>>()?)
            })
            .collect::<Result<Vec<_>>>()?;
        let noise = noise
            .resolve(circuit)?
            .into_iter()
            .map(|cn| {
                Ok(match cn {
                    CycleNoise::Noiseless => PreparedNoise::None,
                    CycleNoise::Pauli(ch) => {
                        let s = ch.sampler()?;
                        if s.is_trivial() {
                            PreparedNoise::None
                        } else {
                            PreparedNoise::Pauli(s)
                        }
                    }
                    CycleNoise::Coherent(c) => PreparedNoise::Coherent(c.full_unitary(n)),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Executable {
            n,
            measure: circuit.measured().to_vec(),
            easy,
            hard: circuit.hard_cycles().cloned().collect(),
            noise,
            twirler: rc.then(|| Twirler::new(circuit)),
            readout: readout.cloned(),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.hard.len()
    }

    /// Number of measured qubits.
    pub fn k(&self) -> usize {
        self.measure.len()
    }

    /// One trajectory. `inserts[j]` (if given) is applied after the noise of hard cycle `j`.
    /// Returns the outcome index over the measured qubits (bit `i` ↔ `measure[i]`).
    pub fn shot<R: Rng + ?Sized>(&self, state: &mut StateVector<T>, inserts: Option<&[PauliString]>, rng: &mut R) -> usize {
        state.reset();
        let frames = self.twirler.as_ref().map(|t| t.draw(rng));
        for (j, h) in self.hard.iter().enumerate() {
            for (q, u) in &self.easy[j] {
                state.apply_1q(*q, u);
            }
            if let Some(f) = &frames {
                state.apply_pauli(&f[j].twirl);
            }
            state.apply_hard(h);
            match &self.noise[j] {
                PreparedNoise::None => {}
                PreparedNoise::Pauli(s) => state.apply_pauli(&s.sample(rng)),
                PreparedNoise::Coherent(u) => state.apply_dense(u),
            }
            if let Some(f) = &frames {
                state.apply_pauli(&f[j].correction);
            }
            if let Some(ins) = inserts {
                state.apply_pauli(&ins[j]);
            }
        }
        for (q, u) in &self.easy[self.hard.len()] {
            state.apply_1q(*q, u);
        }
        let mut full = state.sample(rng);
        if let Some(r) = &self.readout {
            full = r.corrupt(full, rng);
        }
        self.measure.iter().enumerate().fold(0, |acc, (b, &q)| acc | (((full >> q) & 1) << b))
    }

    /// Histogram of `shots` trajectories without insertions.
    pub fn histogram(&self, shots: usize, seed: u64) -> Vec<u64> {
        let k = self.k();
        let parts = batched(shots, seed, |rng, _, len| {
            let mut h = vec![0u64; 1 << k];
            let mut st = StateVector::zero(self.n);
            for _ in 0..len {
                h[self.shot(&mut st, None, rng)] += 1;
            }
            h
        });
        parts.into_iter().fold(vec![0u64; 1 << k], |mut acc, h| {
            acc.iter_mut().zip(h).for_each(|(a, b)| *a += b);
            acc
        })
    }
}

/// The simulated device: hard-cycle noise, optional readout noise, and whether
/// every shot is freshly randomized-compiled.
#[derive(Debug, Clone)]
pub struct Device {
    pub noise: NoiseModel<f64>,
    pub readout: Option<ReadoutNoise>,
    pub rc: bool,
}

impl Device {
    pub fn new(noise: NoiseModel<f64>) -> Self {
        Device { noise, readout: None, rc: true }
    }

    pub fn noiseless() -> Self {
        Self::new(NoiseModel::noiseless())
    }

    pub fn with_readout(mut self, r: ReadoutNoise) -> Self {
        self.readout = Some(r);
        self
    }

    pub fn with_rc(mut self, rc: bool) -> Self {
        self.rc = rc;
        self
    }

    pub fn prepare(&self, circuit: &Circuit) -> Result<Executable<f64>> {
        Executable::new(circuit, &self.noise, self.rc, self.readout.as_ref())
    }

    pub fn run(&self, circuit: &Circuit, shots: usize, seed: u64) -> Result<ShotRecord> {
        let exe = self.prepare(circuit)?;
        Ok(ShotRecord::from_outcomes(exe.k(), seed, &exe.histogram(shots, seed)))
    }
}

/// Samples `shots` trajectories of a noisy circuit.
pub fn run_shots<T: Real>(c: &Circuit, noise: &NoiseModel<T>, shots: usize, seed: u64, rc: bool) -> Result<ShotRecord> {
    let exe = Executable::new(c, noise, rc, None)?;
    Ok(ShotRecord::from_outcomes(exe.k(), seed, &exe.histogram(shots, seed)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::build_w_state_circuit;
    use crate::noise::PauliChannel;

    #[test]
    fn noiseless_w_state_counts_are_binomial() {
        let c = build_w_state_circuit(2).unwrap();
        let rec = run_shots(&c, &NoiseModel::<f64>::noiseless(), 10_000, 3, false).unwrap();
        assert_eq!(rec.shots, 10_000);
        assert_eq!(rec.counts.keys().cloned().collect::<Vec<_>>(), vec!["01".to_string(), "10".to_string()]);
        for v in rec.counts.values() {
            assert!((*v as i64 - 5000).abs() <= 250, "{v}");
        }
    }

    #[test]
    fn point_mass_channel_equals_noiseless_and_runs_are_deterministic() {
        let c = build_w_state_circuit(3).unwrap();
        let id = NoiseModel::uniform(&c, &PauliChannel::<f64>::identity(3));
        let a = run_shots(&c, &id, 3000, 11, false).unwrap();
        let b = run_shots(&c, &NoiseModel::<f64>::noiseless(), 3000, 11, false).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, run_shots(&c, &id, 3000, 11, false).unwrap());
    }

    #[test]
    fn serial_and_parallel_batches_agree() {
        let c = build_w_state_circuit(3).unwrap();
        let noise = crate::noise::synthetic_noise_model(&c, 0.05);
        let par = run_shots(&c, &noise, 5000, 2, true).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let ser = pool.install(|| run_shots(&c, &noise, 5000, 2, true).unwrap());
        assert_eq!(par, ser);
    }

    #[test]
    fn uncovered_cycle_and_size_limits() {
        let c = build_w_state_circuit(2).unwrap();
        assert!(matches!(run_shots(&c, &NoiseModel::<f64>::new(), 10, 0, false), Err(Error::UncoveredCycle(_))));
    }

    #[test]
    fn shot_record_json_round_trip_and_merge() {
        let r = ShotRecord { shots: 3, seed: 1, counts: [("01".to_string(), 2), ("10".to_string(), 1)].into() };
        assert_eq!(ShotRecord::from_json(&r.to_json().unwrap()).unwrap(), r);
        let m = r.merge(&r);
        assert_eq!(m.shots, 6);
        assert_eq!(m.counts["01"], 4);
        assert!(ShotRecord::from_json(r#"{"shots":5,"seed":0,"counts":{"0":1}}"#).is_err());
    }

    #[test]
    fn readout_flips_follow_rates() {
        let r = ReadoutNoise { p10: vec![0.0, 1.0], p01: vec![0.0, 0.0] };
        let mut rng = batch_rng(0, 0);
        assert_eq!(r.corrupt(0b00, &mut rng), 0b10);
        assert_eq!(r.corrupt(0b11, &mut rng), 0b11);
    }
}
