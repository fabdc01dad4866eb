//! Finite-horizon laws of integer-valued hitting times.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{abs, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    pub fn of(n: u64) -> Self {
        if n % 2 == 0 {
            Parity::Even
        } else {
            Parity::Odd
        }
    }

    pub fn matches(self, n: u64) -> bool {
        Parity::of(n) == self
    }

    pub fn add(self, other: Parity) -> Parity {
        if self == other {
            Parity::Even
        } else {
            Parity::Odd
        }
    }
}

/// Law of a step count, computed up to `horizon`.
///
/// The support lies in `{support_min, support_min + 2, ...}`; for the walk
/// duration `support_min = k`. Mass beyond the horizon is not dropped: it is
/// carried in `truncation_mass`, so `sum(probs) + truncation_mass = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct DurationDist<S> {
    k: u64,
    support_min: u64,
    horizon: u64,
    // Dense, indexed by step count 0..=horizon. Off-parity slots hold zero.
    mass: Vec<S>,
    truncation_mass: S,
}

impl<S: Scalar> DurationDist<S> {
    /// Builds a law from a dense vector indexed by step count. Entries of
    /// the wrong parity or below `support_min` must be zero.
    pub fn from_dense(k: u64, support_min: u64, mass: Vec<S>, truncation_mass: S) -> Result<Self> {
        if mass.is_empty() {
            return Err(Error::invalid("empty mass vector"));
        }
        let horizon = mass.len() as u64 - 1;
        let parity = Parity::of(support_min);
        for (n, m) in mass.iter().enumerate() {
            let n = n as u64;
            if (n < support_min || !parity.matches(n)) && !m.is_zero() {
                return Err(Error::invalid(format!(
                    "mass at n={n} outside support {{{support_min}, {}, ...}}",
                    support_min + 2
                )));
            }
        }
        Ok(DurationDist {
            k,
            support_min,
            horizon,
            mass,
            truncation_mass,
        })
    }

    pub(crate) fn from_dense_unchecked(k: u64, support_min: u64, mass: Vec<S>, truncation_mass: S) -> Self {
        debug_assert!(!mass.is_empty());
        DurationDist {
            k,
            support_min,
            horizon: mass.len() as u64 - 1,
            mass,
            truncation_mass,
        }
    }

    /// Point mass at `n`, with `horizon >= n`.
    pub fn point_mass(k: u64, n: u64, horizon: u64) -> Self {
        let mut mass = vec![S::zero(); horizon as usize + 1];
        let truncation_mass = if n <= horizon {
            mass[n as usize] = S::one();
            S::zero()
        } else {
            S::one()
        };
        Self::from_dense_unchecked(k, n, mass, truncation_mass)
    }

    pub fn k(&self) -> u64 {
        self.k
    }

    pub fn parity(&self) -> Parity {
        Parity::of(self.support_min)
    }

    pub fn support_min(&self) -> u64 {
        self.support_min
    }

    pub fn horizon(&self) -> u64 {
        self.horizon
    }

    pub fn truncation_mass(&self) -> &S {
        &self.truncation_mass
    }

    /// `P(T = n)`; zero beyond the horizon (that mass is in the truncation).
    pub fn pmf(&self, n: u64) -> S {
        self.mass
            .get(n as usize)
            .cloned()
            .unwrap_or_else(S::zero)
    }

    pub fn dense(&self) -> &[S] {
        &self.mass
    }

    /// Support points of the right parity between `support_min` and the
    /// horizon, paired with their probabilities.
    pub fn entries(&self) -> impl Iterator<Item = (u64, &S)> + '_ {
        (self.support_min..=self.horizon)
            .step_by(2)
            .map(move |n| (n, &self.mass[n as usize]))
    }

    pub fn total_mass(&self) -> S {
        let mut total = S::zero();
        for m in &self.mass {
            total += m;
        }
        total
    }

    /// `sum(probs) + truncation_mass - 1`; exactly zero in exact mode.
    pub fn normalization_defect(&self) -> S {
        self.total_mass() + self.truncation_mass.clone() - S::one()
    }

    /// `P(T > n)` for `n <= horizon`.
    pub fn tail(&self, n: u64) -> Result<S> {
        if n > self.horizon {
            return Err(Error::OutOfRange(format!(
                "tail at n={n} requested beyond horizon {}",
                self.horizon
            )));
        }
        let mut tail = self.truncation_mass.clone();
        for m in &self.mass[n as usize + 1..] {
            tail += m;
        }
        Ok(tail)
    }

    /// `P(T > n)` for every `n` in `0..=horizon`.
    pub fn tails(&self) -> Vec<S> {
        let mut out = vec![S::zero(); self.mass.len()];
        let mut acc = self.truncation_mass.clone();
        for n in (0..self.mass.len()).rev() {
            out[n] = acc.clone();
            acc += &self.mass[n];
        }
        out
    }

    /// `E[T ; T <= horizon]`.
    pub fn partial_mean(&self) -> S {
        let mut acc = S::zero();
        for (n, m) in self.entries() {
            acc += S::from_u64(n) * m;
        }
        acc
    }

    /// Smallest `n` with `P(T <= n) >= level`, if reached within the horizon.
    pub fn quantile(&self, level: &S) -> Option<u64> {
        let mut acc = S::zero();
        for (n, m) in self.entries() {
            acc += m;
            if acc >= *level {
                return Some(n);
            }
        }
        None
    }

    /// Law of the sum of two independent variables, carried to `horizon`.
    /// Mass landing beyond the horizon goes to the truncation mass.
    pub fn convolve(&self, other: &DurationDist<S>, horizon: u64) -> DurationDist<S> {
        let support_min = self.support_min + other.support_min;
        let mut mass = vec![S::zero(); horizon as usize + 1];
        for (a, pa) in self.entries() {
            if a > horizon || pa.is_zero() {
                continue;
            }
            for (b, pb) in other.entries() {
                let n = a + b;
                if n > horizon {
                    break;
                }
                if pb.is_zero() {
                    continue;
                }
                mass[n as usize] += pa.clone() * pb;
            }
        }
        let mut truncation_mass = S::one();
        for m in &mass {
            truncation_mass -= m;
        }
        DurationDist::from_dense_unchecked(self.k, support_min, mass, truncation_mass)
    }

    /// Returns the law of `T + shift`.
    pub fn shifted(&self, shift: u64, horizon: u64) -> DurationDist<S> {
        let mut mass = vec![S::zero(); horizon as usize + 1];
        let mut truncation_mass = self.truncation_mass.clone();
        for (n, m) in self.entries() {
            let target = n + shift;
            if target <= horizon {
                mass[target as usize] = m.clone();
            } else {
                truncation_mass += m;
            }
        }
        DurationDist::from_dense_unchecked(self.k, self.support_min + shift, mass, truncation_mass)
    }

    /// Relabels the barrier this law is attached to.
    pub fn with_k(mut self, k: u64) -> Self {
        self.k = k;
        self
    }

    /// Largest `|self(n) - other(n)|` over the common horizon.
    pub fn max_abs_diff(&self, other: &DurationDist<S>) -> S {
        let common = self.horizon.min(other.horizon);
        let mut worst = S::zero();
        for n in 0..=common {
            let d = abs(self.pmf(n) - other.pmf(n));
            if d > worst {
                worst = d;
            }
        }
        worst
    }

    /// Total variation distance over the common horizon.
    pub fn tv_distance(&self, other: &DurationDist<S>) -> S {
        let common = self.horizon.min(other.horizon);
        let mut acc = S::zero();
        for n in 0..=common {
            acc += abs(self.pmf(n) - other.pmf(n));
        }
        acc * S::half()
    }

    /// Exact agreement on every step count up to the common horizon.
    pub fn agrees_exactly(&self, other: &DurationDist<S>) -> bool {
        let common = self.horizon.min(other.horizon);
        (0..=common).all(|n| self.pmf(n) == other.pmf(n))
    }

    pub fn to_f64(&self) -> DurationDist<f64> {
        DurationDist::from_dense_unchecked(
            self.k,
            self.support_min,
            self.mass.iter().map(Scalar::to_f64).collect(),
            self.truncation_mass.to_f64(),
        )
    }

    pub fn to_record(&self) -> DurationDistRecord {
        DurationDistRecord {
            k: self.k,
            parity: self.parity(),
            support_min: self.support_min,
            horizon: self.horizon,
            entries: self
                .entries()
                .map(|(n, p)| DistEntry {
                    n,
                    prob: p.to_repr(),
                })
                .collect(),
            truncation_mass: self.truncation_mass.to_repr(),
        }
    }

    pub fn from_record(record: &DurationDistRecord) -> Result<Self> {
        if Parity::of(record.support_min) != record.parity {
            return Err(Error::invalid("parity disagrees with support_min"));
        }
        let mut mass = vec![S::zero(); record.horizon as usize + 1];
        for entry in &record.entries {
            if entry.n > record.horizon {
                return Err(Error::invalid(format!("entry n={} beyond horizon", entry.n)));
            }
            mass[entry.n as usize] = S::parse_repr(&entry.prob)?;
        }
        let truncation_mass = S::parse_repr(&record.truncation_mass)?;
        Self::from_dense(record.k, record.support_min, mass, truncation_mass)
    }
}

/// Serialized form of a [`DurationDist`]: scalars as canonical strings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DurationDistRecord {
    pub k: u64,
    pub parity: Parity,
    pub support_min: u64,
    pub horizon: u64,
    pub entries: Vec<DistEntry>,
    pub truncation_mass: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistEntry {
    pub n: u64,
    pub prob: String,
}
