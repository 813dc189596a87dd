//! Piecewise-linear control waveforms.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units::{from_mhz, to_mhz};

/// Tolerance used when comparing knot times that should coincide.
const TIME_EPS: f64 = 1e-12;

/// A piecewise-linear function of time given by `(t, value)` knots.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<(f64, f64)>", into = "Vec<(f64, f64)>")]
pub struct Waveform {
    knots: Vec<(f64, f64)>,
}

impl Waveform {
    /// Builds a waveform. Knot times must start at zero and be strictly
    /// increasing; equal times are rejected rather than overwritten.
    pub fn new(knots: Vec<(f64, f64)>) -> Result<Self> {
        if knots.len() < 2 {
            return Err(Error::InvalidSchedule(
                "a waveform needs at least two knots".into(),
            ));
        }
        if let Some(&(t, v)) = knots.iter().find(|(t, v)| !t.is_finite() || !v.is_finite()) {
            return Err(Error::InvalidSchedule(format!(
                "non-finite knot ({t}, {v})"
            )));
        }
        if knots[0].0 != 0.0 {
            return Err(Error::InvalidSchedule(format!(
                "first knot at t = {} instead of 0",
                knots[0].0
            )));
        }
        for w in knots.windows(2) {
            if w[1].0 <= w[0].0 {
                return Err(Error::InvalidSchedule(format!(
                    "knot times not strictly increasing at t = {}",
                    w[1].0
                )));
            }
        }
        Ok(Self { knots })
    }

    /// A constant waveform on `[0, total_time]`.
    pub fn constant(value: f64, total_time: f64) -> Result<Self> {
        Self::new(vec![(0.0, value), (total_time, value)])
    }

    pub fn knots(&self) -> &[(f64, f64)] {
        &self.knots
    }

    pub fn duration(&self) -> f64 {
        self.knots[self.knots.len() - 1].0
    }

    /// Linear interpolation; `t` is clamped into the knot range.
    pub fn value_at(&self, t: f64) -> f64 {
        let knots = &self.knots;
        if t <= knots[0].0 {
            return knots[0].1;
        }
        let last = knots[knots.len() - 1];
        if t >= last.0 {
            return last.1;
        }
        // first knot strictly after t
        let hi = knots.partition_point(|&(tk, _)| tk <= t);
        let (t0, v0) = knots[hi - 1];
        let (t1, v1) = knots[hi];
        if t == t0 {
            return v0;
        }
        v0 + (v1 - v0) * (t - t0) / (t1 - t0)
    }

    pub fn max_value(&self) -> f64 {
        self.knots.iter().map(|k| k.1).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_value(&self) -> f64 {
        self.knots.iter().map(|k| k.1).fold(f64::INFINITY, f64::min)
    }

    /// Returns the waveform with every value multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            knots: self.knots.iter().map(|&(t, v)| (t, v * factor)).collect(),
        }
    }

    /// Returns `t ↦ self(T - t)`.
    pub fn reversed(&self) -> Self {
        let total = self.duration();
        let mut knots: Vec<_> = self.knots.iter().map(|&(t, v)| (total - t, v)).collect();
        knots.reverse();
        knots[0].0 = 0.0;
        Self { knots }
    }
}

impl TryFrom<Vec<(f64, f64)>> for Waveform {
    type Error = Error;

    fn try_from(knots: Vec<(f64, f64)>) -> Result<Self> {
        Self::new(knots)
    }
}

impl From<Waveform> for Vec<(f64, f64)> {
    fn from(w: Waveform) -> Self {
        w.knots
    }
}

/// Instantaneous drive values.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Controls {
    /// Rabi frequency, rad/μs.
    pub omega: f64,
    /// Detuning, rad/μs.
    pub delta: f64,
    /// Laser phase, rad.
    pub phi: f64,
}

/// Rabi frequency, detuning and phase waveforms over a common window `[0, T]`.
///
/// Serialized as [`ScheduleJson`], with frequencies in MHz × 2π.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ScheduleJson", into = "ScheduleJson")]
pub struct PulseSchedule {
    omega: Waveform,
    delta: Waveform,
    phi: Waveform,
}

impl PulseSchedule {
    pub fn new(omega: Waveform, delta: Waveform, phi: Waveform) -> Result<Self> {
        let total = omega.duration();
        for (name, w) in [("delta", &delta), ("phi", &phi)] {
            if (w.duration() - total).abs() > TIME_EPS {
                return Err(Error::InvalidSchedule(format!(
                    "{name} ends at {} but omega ends at {total}",
                    w.duration()
                )));
            }
        }
        if omega.min_value() < 0.0 {
            return Err(Error::InvalidSchedule(format!(
                "negative Rabi frequency {}",
                omega.min_value()
            )));
        }
        Ok(Self { omega, delta, phi })
    }

    /// Schedule with the given Ω and Δ and zero phase.
    pub fn with_zero_phase(omega: Waveform, delta: Waveform) -> Result<Self> {
        let total = omega.duration();
        Self::new(omega, delta, Waveform::constant(0.0, total)?)
    }

    pub fn omega(&self) -> &Waveform {
        &self.omega
    }

    pub fn delta(&self) -> &Waveform {
        &self.delta
    }

    pub fn phi(&self) -> &Waveform {
        &self.phi
    }

    pub fn total_time(&self) -> f64 {
        self.omega.duration()
    }

    /// Controls at time `t`, exact at knots and linear in between.
    pub fn value_at(&self, t: f64) -> Result<Controls> {
        let total = self.total_time();
        if !(t >= -TIME_EPS && t <= total + TIME_EPS) {
            return Err(Error::TimeOutOfRange { t, total });
        }
        Ok(self.value_at_unchecked(t))
    }

    pub(crate) fn value_at_unchecked(&self, t: f64) -> Controls {
        Controls {
            omega: self.omega.value_at(t),
            delta: self.delta.value_at(t),
            phi: self.phi.value_at(t),
        }
    }

    /// Sorted union of all knot times.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut times: Vec<f64> = self
            .omega
            .knots()
            .iter()
            .chain(self.delta.knots())
            .chain(self.phi.knots())
            .map(|k| k.0)
            .collect();
        merge_times(&mut times);
        times
    }

    /// The schedule run backwards in time with Δ negated and φ shifted by π.
    ///
    /// The reversed drive generates `-H(T - t)` except for the interaction
    /// term, so evolving under `s` and then under `s.time_reversed()` undoes
    /// the evolution exactly only when the interaction is negated as well.
    pub fn time_reversed(&self) -> Self {
        let phi = self.phi.reversed();
        let phi = Waveform {
            knots: phi
                .knots
                .iter()
                .map(|&(t, v)| (t, v + std::f64::consts::PI))
                .collect(),
        };
        Self {
            omega: self.omega.reversed(),
            delta: self.delta.reversed().scaled(-1.0),
            phi,
        }
    }
}

/// File shape of a schedule: `[t, value]` knots with times in μs, Ω and Δ in
/// MHz × 2π and φ in rad. A missing φ means zero phase.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScheduleJson {
    pub omega: Vec<(f64, f64)>,
    pub delta: Vec<(f64, f64)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi: Option<Vec<(f64, f64)>>,
}

impl TryFrom<ScheduleJson> for PulseSchedule {
    type Error = Error;

    fn try_from(s: ScheduleJson) -> Result<Self> {
        let conv = |k: Vec<(f64, f64)>| k.into_iter().map(|(t, v)| (t, from_mhz(v))).collect();
        let omega = Waveform::new(conv(s.omega))?;
        let delta = Waveform::new(conv(s.delta))?;
        match s.phi {
            Some(phi) => PulseSchedule::new(omega, delta, Waveform::new(phi)?),
            None => PulseSchedule::with_zero_phase(omega, delta),
        }
    }
}

impl From<PulseSchedule> for ScheduleJson {
    fn from(s: PulseSchedule) -> Self {
        let conv = |w: &Waveform| w.knots.iter().map(|&(t, v)| (t, to_mhz(v))).collect();
        ScheduleJson {
            omega: conv(&s.omega),
            delta: conv(&s.delta),
            phi: Some(s.phi.knots),
        }
    }
}

/// Sorts and removes near-duplicate times.
pub(crate) fn merge_times(times: &mut Vec<f64>) {
    times.sort_by(|a, b| a.total_cmp(b));
    times.dedup_by(|a, b| (*a - *b).abs() <= TIME_EPS);
}

/// Ω trapezoid: linear ramp up to `omega_max`, plateau, linear ramp down.
///
/// `delta` defaults to zero detuning and must span the same window.
pub fn make_ramp_plateau_ramp(
    omega_max: f64,
    t_up: f64,
    t_plateau: f64,
    t_down: f64,
    delta: Option<Waveform>,
) -> Result<PulseSchedule> {
    for d in [t_up, t_plateau, t_down] {
        if d < 0.0 || !d.is_finite() {
            return Err(Error::NegativeDuration(d));
        }
    }
    if omega_max < 0.0 || !omega_max.is_finite() {
        return Err(Error::InvalidSchedule(format!(
            "invalid Rabi amplitude {omega_max}"
        )));
    }
    let total = t_up + t_plateau + t_down;
    if total <= 0.0 {
        return Err(Error::InvalidSchedule("zero total duration".into()));
    }

    let mut knots = vec![(0.0, if t_up > 0.0 { 0.0 } else { omega_max })];
    for (t, v) in [
        (t_up, omega_max),
        (t_up + t_plateau, omega_max),
        (total, if t_down > 0.0 { 0.0 } else { omega_max }),
    ] {
        if t > knots[knots.len() - 1].0 {
            knots.push((t, v));
        }
    }
    let omega = Waveform::new(knots)?;

    let delta = match delta {
        Some(d) => {
            if (d.duration() - total).abs() > 1e-9 {
                return Err(Error::InvalidSchedule(format!(
                    "detuning spans {} μs but the Rabi pulse spans {total} μs",
                    d.duration()
                )));
            }
            d
        }
        None => Waveform::constant(0.0, total)?,
    };
    PulseSchedule::with_zero_phase(omega, delta)
}
