//! Outcome distributions over n-bit measurement strings.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::state::QuantumState;

/// Probabilities below this are emitted as exact zeros.
pub const PROBABILITY_FLOOR: f64 = 1e-15;

/// Prints basis index `b` as an `n`-character string, atom 0 first.
pub fn bitstring_label(b: u64, n: usize) -> String {
    (0..n).map(|j| if b >> j & 1 == 1 { '1' } else { '0' }).collect()
}

/// Inverse of [`bitstring_label`]. Spaces and underscores are ignored.
pub fn parse_bitstring(s: &str) -> Result<(u64, usize)> {
    let mut b = 0u64;
    let mut n = 0usize;
    for ch in s.chars() {
        match ch {
            '0' => {}
            '1' => b |= 1 << n,
            ' ' | '_' => continue,
            _ => return Err(Error::InvalidBitstring(s.to_string())),
        }
        n += 1;
        if n > 63 {
            return Err(Error::InvalidBitstring(s.to_string()));
        }
    }
    if n == 0 {
        return Err(Error::InvalidBitstring(s.to_string()));
    }
    Ok((b, n))
}

#[derive(Clone, Debug, PartialEq)]
enum Data {
    /// Dense probabilities over all `2^n` outcomes.
    Exact(Vec<f64>),
    Counts { counts: BTreeMap<u64, u64>, shots: u64 },
}

/// Outcome histogram, either an exact distribution or sampled shot counts.
#[derive(Clone, Debug, PartialEq)]
pub struct BitstringHistogram {
    n: usize,
    data: Data,
}

impl BitstringHistogram {
    /// Exact-mode histogram; `probs[b]` is the probability of basis index `b`.
    pub fn exact(n: usize, probs: Vec<f64>) -> Result<Self> {
        if n >= 63 || probs.len() != 1 << n {
            return Err(Error::InvalidHistogram(format!(
                "{} probabilities for {n} atoms",
                probs.len()
            )));
        }
        if probs.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidHistogram("non-finite probability".into()));
        }
        Ok(Self {
            n,
            data: Data::Exact(probs),
        })
    }

    pub fn from_counts(n: usize, counts: BTreeMap<u64, u64>) -> Result<Self> {
        if n >= 63 || counts.keys().any(|&b| b >> n != 0) {
            return Err(Error::InvalidHistogram("count key wider than n bits".into()));
        }
        let shots = counts.values().sum();
        Ok(Self {
            n,
            data: Data::Counts { counts, shots },
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn is_exact(&self) -> bool {
        matches!(self.data, Data::Exact(_))
    }

    /// Total shots; zero for exact distributions.
    pub fn shots(&self) -> u64 {
        match &self.data {
            Data::Exact(_) => 0,
            Data::Counts { shots, .. } => *shots,
        }
    }

    pub fn count(&self, b: u64) -> Option<u64> {
        match &self.data {
            Data::Exact(_) => None,
            Data::Counts { counts, .. } => Some(counts.get(&b).copied().unwrap_or(0)),
        }
    }

    pub fn probability(&self, b: u64) -> f64 {
        match &self.data {
            Data::Exact(p) => p.get(b as usize).copied().unwrap_or(0.0),
            Data::Counts { counts, shots } => {
                if *shots == 0 {
                    0.0
                } else {
                    counts.get(&b).copied().unwrap_or(0) as f64 / *shots as f64
                }
            }
        }
    }

    /// Dense probability vector of length `2^n`.
    pub fn to_dense(&self) -> Vec<f64> {
        match &self.data {
            Data::Exact(p) => p.clone(),
            Data::Counts { counts, shots } => {
                let mut p = vec![0.0; 1 << self.n];
                if *shots > 0 {
                    for (&b, &c) in counts {
                        p[b as usize] = c as f64 / *shots as f64;
                    }
                }
                p
            }
        }
    }

    /// Outcomes with nonzero weight and their probabilities, by basis index.
    pub fn nonzero(&self) -> Vec<(u64, f64)> {
        match &self.data {
            Data::Exact(p) => p
                .iter()
                .enumerate()
                .filter(|(_, &x)| x != 0.0)
                .map(|(b, &x)| (b as u64, x))
                .collect(),
            Data::Counts { counts, .. } => counts
                .keys()
                .map(|&b| (b, self.probability(b)))
                .filter(|&(_, p)| p != 0.0)
                .collect(),
        }
    }

    /// The `k` most probable outcomes, ties broken by basis index.
    pub fn top(&self, k: usize) -> Vec<(u64, f64)> {
        let mut all = self.nonzero();
        all.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        all.truncate(k);
        all
    }

    pub fn total_probability(&self) -> f64 {
        match &self.data {
            Data::Exact(p) => p.iter().sum(),
            Data::Counts { shots, .. } => {
                if *shots == 0 {
                    0.0
                } else {
                    1.0
                }
            }
        }
    }

    /// Sum of probabilities of outcomes matching `bits` on the positions in `mask`.
    pub fn marginal_probability(&self, bits: u64, mask: u64) -> f64 {
        self.nonzero()
            .into_iter()
            .filter(|&(b, _)| b & mask == bits & mask)
            .map(|(_, p)| p)
            .sum()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&HistogramJson::from(self))?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str::<HistogramJson>(s)?.try_into()
    }
}

/// Rounds to 12 significant digits.
fn round12(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{x:.11e}").parse().unwrap_or(x)
}

/// Wire format: `{"n": n, "shots": s, "counts": {...}}` or
/// `{"n": n, "shots": 0, "probs": {...}}`.
#[derive(Serialize, Deserialize)]
pub struct HistogramJson {
    pub n: usize,
    pub shots: u64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub counts: Option<BTreeMap<String, u64>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub probs: Option<BTreeMap<String, f64>>,
}

impl From<&BitstringHistogram> for HistogramJson {
    fn from(h: &BitstringHistogram) -> Self {
        match &h.data {
            Data::Exact(_) => Self {
                n: h.n,
                shots: 0,
                counts: None,
                probs: Some(
                    h.nonzero()
                        .into_iter()
                        .map(|(b, p)| (bitstring_label(b, h.n), round12(p)))
                        .collect(),
                ),
            },
            Data::Counts { counts, shots } => Self {
                n: h.n,
                shots: *shots,
                counts: Some(
                    counts
                        .iter()
                        .map(|(&b, &c)| (bitstring_label(b, h.n), c))
                        .collect(),
                ),
                probs: None,
            },
        }
    }
}

impl Serialize for BitstringHistogram {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        HistogramJson::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for BitstringHistogram {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        HistogramJson::deserialize(d)?
            .try_into()
            .map_err(serde::de::Error::custom)
    }
}

impl TryFrom<HistogramJson> for BitstringHistogram {
    type Error = Error;

    fn try_from(j: HistogramJson) -> Result<Self> {
        let key = |label: &str| -> Result<u64> {
            let (b, len) = parse_bitstring(label)?;
            if len != j.n {
                return Err(Error::InvalidBitstring(label.to_string()));
            }
            Ok(b)
        };
        match (&j.counts, &j.probs) {
            (Some(counts), None) => {
                let counts = counts
                    .iter()
                    .map(|(k, &c)| Ok((key(k)?, c)))
                    .collect::<Result<BTreeMap<_, _>>>()?;
                let h = Self::from_counts(j.n, counts)?;
                if h.shots() != j.shots {
                    return Err(Error::InvalidHistogram(format!(
                        "counts sum to {} but shots = {}",
                        h.shots(),
                        j.shots
                    )));
                }
                Ok(h)
            }
            (None, Some(probs)) => {
                if j.n >= 31 {
                    return Err(Error::InvalidHistogram("too many atoms for exact mode".into()));
                }
                let mut dense = vec![0.0; 1 << j.n];
                for (k, &p) in probs {
                    dense[key(k)? as usize] = p;
                }
                Self::exact(j.n, dense)
            }
            _ => Err(Error::InvalidHistogram(
                "exactly one of \"counts\" and \"probs\" must be present".into(),
            )),
        }
    }
}

/// Born-rule distribution of a state, with tiny probabilities set to zero.
pub fn probabilities(state: &QuantumState) -> BitstringHistogram {
    let probs = state
        .amplitudes()
        .iter()
        .map(|a| {
            let p = a.norm_sqr();
            if p < PROBABILITY_FLOOR {
                0.0
            } else {
                p
            }
        })
        .collect();
    BitstringHistogram::exact(state.n(), probs).expect("state dimension is a power of two")
}

/// Multinomial sample of `shots` outcomes, reproducible for a given seed.
pub fn sample_shots(hist: &BitstringHistogram, shots: u64, seed: u64) -> Result<BitstringHistogram> {
    if shots == 0 {
        return Err(Error::ZeroShots);
    }
    let outcomes = hist.nonzero();
    let total: f64 = outcomes.iter().map(|o| o.1.max(0.0)).sum();
    if !(total > 0.0) {
        return Err(Error::InvalidHistogram("no probability mass to sample".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts = BTreeMap::new();
    let mut remaining_shots = shots;
    let mut remaining_mass = total;
    // Conditional binomials: draw each outcome's count given what is left.
    for (i, &(b, p)) in outcomes.iter().enumerate() {
        if remaining_shots == 0 {
            break;
        }
        let p = p.max(0.0);
        let c = if i + 1 == outcomes.len() {
            remaining_shots
        } else {
            let q = (p / remaining_mass).clamp(0.0, 1.0);
            Binomial::new(remaining_shots, q)
                .expect("probability in [0, 1]")
                .sample(&mut rng)
        };
        if c > 0 {
            counts.insert(b, c);
        }
        remaining_shots -= c;
        remaining_mass -= p;
    }
    BitstringHistogram::from_counts(hist.n(), counts)
}

/// Probability that each atom is found in the Rydberg state.
pub fn rydberg_density(hist: &BitstringHistogram) -> Vec<f64> {
    let mut density = vec![0.0; hist.n()];
    for (b, p) in hist.nonzero() {
        for (j, d) in density.iter_mut().enumerate() {
            if b >> j & 1 == 1 {
                *d += p;
            }
        }
    }
    density
}
