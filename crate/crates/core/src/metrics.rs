//! Output distributions, variation distance, improvement ratio and QPE decoding.

use crate::circuit::{bitstring, bitstring_index};
use crate::error::{Error, Result};
use crate::scalar::Real;
use serde::ser::SerializeMap;
use serde::{Serialize, Serializer};
use std::collections::BTreeMap;

/// Tolerance on `Σ p = 1` for a distribution to count as normalized.
pub const NORMALIZED_TOL: f64 = 1e-9;

/// Probabilities (or quasi-probabilities) over `k`-bit outcomes.
///
/// Entry `i` belongs to [`bitstring`]`(i, k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution<T: Real> {
    k: usize,
    probs: Vec<T>,
}

impl<T: Real> Distribution<T> {
    pub fn new(k: usize, probs: Vec<T>) -> Result<Self> {
        if probs.len() != 1 << k {
            return Err(Error::InvalidArgument(format!("{} entries for {k} bits", probs.len())));
        }
        Ok(Distribution { k, probs })
    }

    pub fn zeros(k: usize) -> Self {
        Distribution { k, probs: vec![T::zero(); 1 << k] }
    }

    /// Builds from a bitstring map; missing keys are zero.
    pub fn from_map<'a>(k: usize, entries: impl IntoIterator<Item = (&'a str, T)>) -> Result<Self> {
        let mut d = Self::zeros(k);
        for (s, p) in entries {
            if s.len() != k {
                return Err(Error::InvalidArgument(format!("bitstring {s} is not {k} bits long")));
            }
            d.probs[bitstring_index(s)?] += p;
        }
        Ok(d)
    }

    pub fn bits(&self) -> usize {
        self.k
    }

    pub fn probs(&self) -> &[T] {
        &self.probs
    }

    pub fn get(&self, i: usize) -> T {
        self.probs[i]
    }

    pub fn prob(&self, s: &str) -> Result<T> {
        Ok(self.probs[bitstring_index(s)?])
    }

    pub fn sum(&self) -> T {
        self.probs.iter().copied().sum()
    }

    pub fn is_normalized(&self) -> bool {
        let tol = NORMALIZED_TOL.max(64.0 * T::epsilon().to_f64_lossy());
        self.probs.iter().all(|p| p.to_f64_lossy() >= -tol) && (self.sum().to_f64_lossy() - 1.0).abs() <= tol
    }

    /// Clips negative entries to zero and renormalizes. Also returns the clipped mass.
    pub fn clip_renormalize(&self) -> (Self, T) {
        let mut clipped = T::zero();
        let mut probs: Vec<T> = self
            .probs
            .iter()
            .map(|&p| {
                if p < T::zero() {
                    clipped -= p;
                    T::zero()
                } else {
                    p
                }
            })
            .collect();
        let s: T = probs.iter().copied().sum();
        if s > T::zero() {
            probs.iter_mut().for_each(|p| *p /= s);
        } else {
            let u = T::one() / T::of(probs.len() as f64);
            probs.iter_mut().for_each(|p| *p = u);
        }
        (Distribution { k: self.k, probs }, clipped)
    }

    /// Marginal over the listed bit positions (new bit `j` = old bit `positions[j]`).
    pub fn marginal(&self, positions: &[usize]) -> Self {
        let mut out = Self::zeros(positions.len());
        for (i, &p) in self.probs.iter().enumerate() {
            let j = positions.iter().enumerate().fold(0, |acc, (b, &q)| acc | (((i >> q) & 1) << b));
            out.probs[j] += p;
        }
        out
    }

    pub fn to_map(&self) -> BTreeMap<String, f64> {
        self.probs.iter().enumerate().map(|(i, p)| (bitstring(i, self.k), p.to_f64_lossy())).collect()
    }
}

impl<T: Real> Serialize for Distribution<T> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut m = s.serialize_map(Some(self.probs.len()))?;
        for (i, p) in self.probs.iter().enumerate() {
            m.serialize_entry(&bitstring(i, self.k), &p.to_f64_lossy())?;
        }
        m.end()
    }
}

/// `½ Σ_s |p(s) − q(s)|`.
pub fn variation_distance<T: Real>(p: &Distribution<T>, q: &Distribution<T>) -> Result<T> {
    if p.k != q.k {
        return Err(Error::LengthMismatch { left: p.k, right: q.k });
    }
    for d in [p, q] {
        if !d.is_normalized() {
            return Err(Error::Unnormalized(d.sum().to_f64_lossy()));
        }
    }
    let total: T = p.probs.iter().zip(&q.probs).map(|(a, b)| (*a - *b).abs()).sum();
    Ok(total * T::of(0.5))
}

/// `1 − d_em / d_unm`.
pub fn improvement(d_em: f64, d_unm: f64) -> Result<f64> {
    if d_unm <= 0.0 {
        return Err(Error::InvalidArgument("improvement needs a positive unmitigated distance".into()));
    }
    Ok(1.0 - d_em / d_unm)
}

/// Distribution of the QPE estimate `κ̂ = p / 2^t`; entry `p` holds `q(p/2^t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct KappaDistribution<T: Real> {
    t: usize,
    dist: Distribution<T>,
}

impl<T: Real> KappaDistribution<T> {
    pub fn t(&self) -> usize {
        self.t
    }

    pub fn prob(&self, p: usize) -> T {
        self.dist.probs[p]
    }

    pub fn as_distribution(&self) -> &Distribution<T> {
        &self.dist
    }

    /// Map keyed by the decimal value of `κ̂`.
    pub fn to_map(&self) -> BTreeMap<String, f64> {
        let scale = (1u64 << self.t) as f64;
        self.dist.probs.iter().enumerate().map(|(p, v)| (format!("{}", p as f64 / scale), v.to_f64_lossy())).collect()
    }
}

/// Decodes a distribution over `t` ancillae followed by one target qubit.
///
/// Ancilla 0 carries the most significant bit of `p`; the target is marginalized out.
pub fn qpe_decode<T: Real>(d: &Distribution<T>, t: usize) -> Result<KappaDistribution<T>> {
    if d.k != t + 1 {
        return Err(Error::LengthMismatch { left: t + 1, right: d.k });
    }
    let mut probs = vec![T::zero(); 1 << t];
    for (i, &v) in d.probs.iter().enumerate() {
        let p = (0..t).fold(0usize, |acc, k| (acc << 1) | ((i >> k) & 1));
        probs[p] += v;
    }
    Ok(KappaDistribution { t, dist: Distribution { k: t, probs } })
}

/// `VD_QPE`: variation distance between decoded distributions.
pub fn vd_qpe<T: Real>(ideal: &KappaDistribution<T>, est: &KappaDistribution<T>) -> Result<T> {
    variation_distance(&ideal.dist, &est.dist)
}
