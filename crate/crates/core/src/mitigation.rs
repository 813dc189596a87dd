//! Asymmetric readout errors and their tensor-product mitigation.
//!
//! Each atom is read independently: a true '1' reads as '0' with
//! probability `ε`, a true '0' is always read correctly.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::histogram::BitstringHistogram;

pub const DEFAULT_EPSILON: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReadoutModel {
    epsilon: f64,
}

impl ReadoutModel {
    pub fn new(epsilon: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&epsilon) {
            return Err(Error::InvalidEpsilon(epsilon));
        }
        Ok(Self { epsilon })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }
}

impl Default for ReadoutModel {
    fn default() -> Self {
        Self {
            epsilon: DEFAULT_EPSILON,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MitigationMethod {
    FirstOrder,
    Exact,
}

/// Mitigated distribution and the total negative quasi-probability that was
/// clipped away before renormalization.
#[derive(Clone, Debug, PartialEq)]
pub struct Mitigated {
    pub histogram: BitstringHistogram,
    pub negative_mass: f64,
}

/// `p'(c) = Σ_b p(b) Π_j K(c_j|b_j)`. Shot histograms are treated through
/// their empirical frequencies.
pub fn apply_error_channel(hist: &BitstringHistogram, model: ReadoutModel) -> Result<BitstringHistogram> {
    let eps = model.epsilon;
    let mut p = hist.to_dense();
    for_each_bit_pair(&mut p, hist.n(), |p0, p1| {
        let moved = eps * *p1;
        *p0 += moved;
        *p1 -= moved;
    });
    BitstringHistogram::exact(hist.n(), p)
}

/// Applies the exact per-bit inverse channel.
pub fn mitigate_exact(hist: &BitstringHistogram, model: ReadoutModel) -> Result<Mitigated> {
    let eps = model.epsilon;
    let keep = 1.0 / (1.0 - eps);
    let mut p = hist.to_dense();
    for_each_bit_pair(&mut p, hist.n(), |p0, p1| {
        let q1 = *p1 * keep;
        *p0 -= eps * q1;
        *p1 = q1;
    });
    clip_and_normalize(hist.n(), p)
}

/// Inverse channel restricted to transfers that undo a single bit flip:
/// `p̃(b) = (1−ε)^{−k(b)} [p(b) − ε/(1−ε) Σ_{j: b_j=0} p(b + e_j)]`
/// with `k(b)` the number of ones in `b`. Multi-flip corrections, which are
/// `O(ε²)`, are dropped.
pub fn mitigate_first_order(hist: &BitstringHistogram, model: ReadoutModel) -> Result<Mitigated> {
    let eps = model.epsilon;
    let n = hist.n();
    let p = hist.to_dense();
    let ratio = eps / (1.0 - eps);
    let inv = 1.0 / (1.0 - eps);
    let mut out = vec![0.0; p.len()];
    for (b, o) in out.iter_mut().enumerate() {
        let mut inflow = 0.0;
        for j in 0..n {
            if b >> j & 1 == 0 {
                inflow += p[b | 1 << j];
            }
        }
        *o = inv.powi(b.count_ones() as i32) * (p[b] - ratio * inflow);
    }
    clip_and_normalize(n, out)
}

pub fn mitigate(hist: &BitstringHistogram, model: ReadoutModel, method: MitigationMethod) -> Result<Mitigated> {
    match method {
        MitigationMethod::FirstOrder => mitigate_first_order(hist, model),
        MitigationMethod::Exact => mitigate_exact(hist, model),
    }
}

/// Half the L1 distance between two distributions on the same register.
pub fn total_variation(a: &BitstringHistogram, b: &BitstringHistogram) -> Result<f64> {
    if a.n() != b.n() {
        return Err(Error::DimensionMismatch {
            expected: a.n(),
            found: b.n(),
        });
    }
    let (pa, pb) = (a.to_dense(), b.to_dense());
    Ok(0.5 * pa.iter().zip(&pb).map(|(x, y)| (x - y).abs()).sum::<f64>())
}

/// Calls `f(p[b], p[b + e_j])` for every bit `j` and every `b` with `b_j = 0`.
fn for_each_bit_pair(p: &mut [f64], n: usize, mut f: impl FnMut(&mut f64, &mut f64)) {
    for j in 0..n {
        let half = 1usize << j;
        for chunk in p.chunks_exact_mut(2 * half) {
            let (lo, hi) = chunk.split_at_mut(half);
            for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                f(a, b);
            }
        }
    }
}

fn clip_and_normalize(n: usize, mut p: Vec<f64>) -> Result<Mitigated> {
    let mut negative_mass = 0.0;
    for x in p.iter_mut() {
        if *x < 0.0 {
            negative_mass -= *x;
            *x = 0.0;
        }
    }
    let total: f64 = p.iter().sum();
    if !(total > 0.0) {
        return Err(Error::InvalidHistogram("no probability mass left after mitigation".into()));
    }
    for x in p.iter_mut() {
        *x /= total;
    }
    Ok(Mitigated {
        histogram: BitstringHistogram::exact(n, p)?,
        negative_mass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::histogram::parse_bitstring;

    fn delta(label: &str) -> BitstringHistogram {
        let (b, n) = parse_bitstring(label).unwrap();
        let mut p = vec![0.0; 1 << n];
        p[b as usize] = 1.0;
        BitstringHistogram::exact(n, p).unwrap()
    }

    fn prob(h: &BitstringHistogram, label: &str) -> f64 {
        h.probability(parse_bitstring(label).unwrap().0)
    }

    #[test]
    fn epsilon_range() {
        assert!(ReadoutModel::new(1.0).is_err());
        assert!(ReadoutModel::new(-0.1).is_err());
        assert!(ReadoutModel::new(f64::NAN).is_err());
        assert!(ReadoutModel::new(0.0).is_ok());
    }

    #[test]
    fn product_channel_on_doubly_excited_pair() {
        let out = apply_error_channel(&delta("11"), ReadoutModel::new(0.05).unwrap()).unwrap();
        assert!((prob(&out, "11") - 0.9025).abs() < 1e-15);
        assert!((prob(&out, "10") - 0.0475).abs() < 1e-15);
        assert!((prob(&out, "01") - 0.0475).abs() < 1e-15);
        assert!((prob(&out, "00") - 0.0025).abs() < 1e-15);
    }

    #[test]
    fn ground_state_is_untouched() {
        let h = delta("000");
        assert_eq!(apply_error_channel(&h, ReadoutModel::new(0.3).unwrap()).unwrap(), h);
    }

    #[test]
    fn zero_epsilon_is_identity() {
        let h = BitstringHistogram::exact(2, vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let m = ReadoutModel::new(0.0).unwrap();
        assert_eq!(apply_error_channel(&h, m).unwrap(), h);
        assert_eq!(mitigate_exact(&h, m).unwrap().histogram, h);
        assert_eq!(mitigate_first_order(&h, m).unwrap().histogram, h);
    }

    #[test]
    fn single_atom_first_order() {
        let h = BitstringHistogram::exact(1, vec![0.05, 0.95]).unwrap();
        let m = mitigate_first_order(&h, ReadoutModel::new(0.05).unwrap()).unwrap();
        assert!((prob(&m.histogram, "1") - 1.0).abs() < 1e-15);
        assert!(prob(&m.histogram, "0").abs() < 1e-15);
    }

    #[test]
    fn exact_round_trip() {
        let h = BitstringHistogram::exact(3, vec![0.05, 0.1, 0.15, 0.2, 0.0, 0.25, 0.05, 0.2]).unwrap();
        let model = ReadoutModel::default();
        let back = mitigate_exact(&apply_error_channel(&h, model).unwrap(), model).unwrap();
        assert!(total_variation(&back.histogram, &h).unwrap() < 1e-12);
        assert!(back.negative_mass < 1e-15);
    }

    #[test]
    fn biased_bell_readout_is_balanced() {
        let model = ReadoutModel::new(0.05).unwrap();
        let bell = BitstringHistogram::exact(2, vec![0.5, 0.0, 0.0, 0.5]).unwrap();
        let measured = apply_error_channel(&bell, model).unwrap();
        let (p00, p11) = (prob(&measured, "00"), prob(&measured, "11"));
        assert!(p00 > 1.1 * p11);
        let m = mitigate_exact(&measured, model).unwrap().histogram;
        assert!((prob(&m, "00") - prob(&m, "11")).abs() < 1e-12);
    }

    #[test]
    fn negativity_is_reported() {
        // '1' observed more often than the channel allows for ε = 0.5
        let h = BitstringHistogram::exact(2, vec![0.0, 0.5, 0.5, 0.0]).unwrap();
        let m = mitigate_exact(&h, ReadoutModel::new(0.5).unwrap()).unwrap();
        assert!(m.negative_mass > 0.0);
        assert!((m.histogram.total_probability() - 1.0).abs() < 1e-12);
        assert!(m.histogram.to_dense().iter().all(|&p| p >= 0.0));
    }
}
