//! Detuning-schedule parameterization and target-probability optimization.
//!
//! Ω(t) is a fixed trapezoid. Δ(t) is piecewise linear through `n_knots`
//! values placed over the plateau `[t_up, T − t_down]` (both ends included)
//! and held flat before the first and after the last knot. Optionally the
//! two ramp durations are appended to the parameter vector.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolution::{Evolver, IntegratorConfig};
use crate::histogram::{parse_bitstring, probabilities, sample_shots, BitstringHistogram};
use crate::optim::{Bounds, Cobyla, LocalOptimizer, NelderMead, Termination};
use crate::register::AtomRegister;
use crate::schedule::{make_ramp_plateau_ramp, PulseSchedule, Waveform};
use crate::units::C6_RB87;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScheduleParameterization {
    /// Plateau Rabi frequency, rad/μs.
    pub omega_max: f64,
    /// Fixed total duration T, μs.
    pub total_time: f64,
    /// Ramp durations, μs. Starting values when `optimize_ramps` is set.
    pub t_up: f64,
    pub t_down: f64,
    pub n_knots: usize,
    /// Knot positions as fractions of the plateau, strictly increasing in
    /// `[0, 1]`. Uniform when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub knot_fractions: Option<Vec<f64>>,
    pub optimize_ramps: bool,
    pub ramp_bounds: (f64, f64),
    pub detuning_bounds: (f64, f64),
    /// Linear drive `(Δ at t_up, Δ at T − t_down)` used as the default
    /// starting point.
    pub linear_drive: (f64, f64),
}

impl ScheduleParameterization {
    pub fn new(omega_max: f64, total_time: f64, t_up: f64, t_down: f64, linear_drive: (f64, f64)) -> Self {
        let span = (linear_drive.1 - linear_drive.0).abs().max(1.0);
        Self {
            omega_max,
            total_time,
            t_up,
            t_down,
            n_knots: 6,
            knot_fractions: None,
            optimize_ramps: false,
            ramp_bounds: (0.05, 1.0),
            detuning_bounds: (
                linear_drive.0.min(linear_drive.1) - 0.5 * span,
                linear_drive.0.max(linear_drive.1) + 0.5 * span,
            ),
            linear_drive,
        }
    }

    pub fn n_params(&self) -> usize {
        self.n_knots + if self.optimize_ramps { 2 } else { 0 }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameters(m));
        if self.n_knots < 2 {
            return bad(format!("{} detuning knots; at least 2 needed", self.n_knots));
        }
        let finite = [
            self.omega_max,
            self.total_time,
            self.t_up,
            self.t_down,
            self.ramp_bounds.0,
            self.ramp_bounds.1,
            self.detuning_bounds.0,
            self.detuning_bounds.1,
            self.linear_drive.0,
            self.linear_drive.1,
        ];
        if finite.iter().any(|v| !v.is_finite()) {
            return bad("non-finite parameterization field".into());
        }
        if !(self.omega_max >= 0.0 && self.total_time > 0.0) {
            return bad(format!("Ω = {}, T = {}", self.omega_max, self.total_time));
        }
        if !(self.detuning_bounds.0 < self.detuning_bounds.1) {
            return bad(format!("detuning bounds {:?}", self.detuning_bounds));
        }
        if self.optimize_ramps
            && !(self.ramp_bounds.0 >= 0.0
                && self.ramp_bounds.0 < self.ramp_bounds.1
                && 2.0 * self.ramp_bounds.1 < self.total_time)
        {
            return bad(format!("ramp bounds {:?} for T = {}", self.ramp_bounds, self.total_time));
        }
        if let Some(f) = &self.knot_fractions {
            if f.len() != self.n_knots
                || f.iter().any(|v| !(0.0..=1.0).contains(v))
                || f.windows(2).any(|w| w[1] <= w[0])
            {
                return bad(format!("knot fractions {f:?}"));
            }
        }
        Ok(())
    }

    pub fn bounds(&self) -> Result<Bounds> {
        let mut lower = vec![self.detuning_bounds.0; self.n_knots];
        let mut upper = vec![self.detuning_bounds.1; self.n_knots];
        if self.optimize_ramps {
            lower.extend([self.ramp_bounds.0; 2]);
            upper.extend([self.ramp_bounds.1; 2]);
        }
        Bounds::new(lower, upper)
    }

    /// Knots on the linear drive, followed by the ramp durations if optimized.
    pub fn linear_params(&self) -> Vec<f64> {
        let (a, b) = self.linear_drive;
        let mut p: Vec<f64> = self.fractions().iter().map(|f| a + f * (b - a)).collect();
        if self.optimize_ramps {
            p.extend([self.t_up, self.t_down]);
        }
        p
    }

    fn fractions(&self) -> Vec<f64> {
        match &self.knot_fractions {
            Some(f) => f.clone(),
            None => (0..self.n_knots).map(|k| k as f64 / (self.n_knots - 1) as f64).collect(),
        }
    }

    /// Ramp durations implied by `params`.
    pub fn ramps(&self, params: &[f64]) -> (f64, f64) {
        if self.optimize_ramps {
            (params[self.n_knots], params[self.n_knots + 1])
        } else {
            (self.t_up, self.t_down)
        }
    }

    /// `(time, Δ)` of each detuning knot.
    pub fn detuning_knots(&self, params: &[f64]) -> Result<Vec<(f64, f64)>> {
        self.check_params(params)?;
        let (t_up, t_down) = self.ramps(params);
        let plateau = self.total_time - t_up - t_down;
        if plateau < 0.0 {
            return Err(Error::InvalidParameters(format!(
                "ramps {t_up} + {t_down} μs exceed T = {}",
                self.total_time
            )));
        }
        Ok(self
            .fractions()
            .iter()
            .zip(params)
            .map(|(f, &p)| (t_up + f * plateau, p))
            .collect())
    }

    fn check_params(&self, params: &[f64]) -> Result<()> {
        if params.len() != self.n_params() {
            return Err(Error::LengthMismatch(format!(
                "{} schedule parameters, expected {}",
                params.len(),
                self.n_params()
            )));
        }
        let bounds = self.bounds()?;
        if !bounds.contains(params) {
            return Err(Error::InvalidParameters(format!("parameters {params:?} outside the bounds")));
        }
        Ok(())
    }
}

pub fn build_detuning_schedule(params: &[f64], spec: &ScheduleParameterization) -> Result<PulseSchedule> {
    spec.validate()?;
    let knots = spec.detuning_knots(params)?;
    let total = spec.total_time;
    let mut delta: Vec<(f64, f64)> = Vec::with_capacity(knots.len() + 2);
    delta.push((0.0, knots[0].1));
    let last = knots[knots.len() - 1].1;
    for (t, v) in knots.into_iter().chain([(total, last)]) {
        // knots that coincide in time (zero ramp or zero plateau) keep the later value
        let prev = delta.last_mut().expect("nonempty");
        if t - prev.0 <= 1e-12 {
            prev.1 = v;
        } else {
            delta.push((t, v));
        }
    }
    if delta.len() < 2 {
        delta.push((total, last));
    }
    let (t_up, t_down) = spec.ramps(params);
    let plateau = (total - t_up - t_down).max(0.0);
    // re-anchor the end so rounding in the ramp sum cannot shorten the schedule
    let end = delta.len() - 1;
    delta[end].0 = t_up + plateau + t_down;
    make_ramp_plateau_ramp(spec.omega_max, t_up, plateau, t_down, Some(Waveform::new(delta)?))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectiveMode {
    Exact,
    Shots { shots: u64, seed: u64 },
}

impl ObjectiveMode {
    /// Shots per objective evaluation in the hardware-style shot mode.
    pub const REFERENCE_SHOTS: u64 = 200_000;
}

/// A target outcome. A target shorter than the register covers the logical
/// atoms in order and is marginalized over the ancillas.
#[derive(Clone, Debug, PartialEq)]
pub struct Target {
    bits: u64,
    mask: u64,
}

impl Target {
    pub fn new(register: &AtomRegister, target: &str) -> Result<Self> {
        let (b, len) = parse_bitstring(target)?;
        let n = register.len();
        if len == n {
            return Ok(Self {
                bits: b,
                mask: (1u64 << n) - 1,
            });
        }
        let logical = register.logical_indices();
        if len != logical.len() || logical.len() == n {
            return Err(Error::DimensionMismatch { expected: n, found: len });
        }
        let (mut bits, mut mask) = (0u64, 0u64);
        for (i, &j) in logical.iter().enumerate() {
            mask |= 1 << j;
            bits |= (b >> i & 1) << j;
        }
        Ok(Self { bits, mask })
    }

    pub fn probability(&self, state: &crate::state::QuantumState) -> f64 {
        self.probability_in(&probabilities(state))
    }

    /// True if outcome `b` agrees with the target on every covered atom.
    pub fn matches(&self, b: u64) -> bool {
        b & self.mask == self.bits
    }

    pub fn probability_in(&self, hist: &BitstringHistogram) -> f64 {
        hist.marginal_probability(self.bits, self.mask)
    }

    fn evaluate(&self, evolver: &Evolver, schedule: &PulseSchedule, mode: ObjectiveMode) -> Result<f64> {
        let hist = probabilities(&evolver.evolve(schedule)?);
        match mode {
            ObjectiveMode::Exact => Ok(self.probability_in(&hist)),
            ObjectiveMode::Shots { shots, seed } => Ok(self.probability_in(&sample_shots(&hist, shots, seed)?)),
        }
    }
}

pub fn objective_target_probability(
    params: &[f64],
    spec: &ScheduleParameterization,
    register: &AtomRegister,
    target: &str,
    mode: ObjectiveMode,
    integrator: &IntegratorConfig,
) -> Result<f64> {
    let target = Target::new(register, target)?;
    let evolver = Evolver::new(register, C6_RB87, integrator.clone())?;
    target.evaluate(&evolver, &build_detuning_schedule(params, spec)?, mode)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    #[default]
    Cobyla,
    NelderMead,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    pub method: OptimizerKind,
    pub max_evaluations: usize,
    /// Initial and final trust radius as fractions of each parameter's range.
    pub rhobeg: f64,
    pub rhoend: f64,
    pub mode: ObjectiveMode,
    pub integrator: IntegratorConfig,
    pub c6: f64,
    /// Starting point; the linear drive when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub initial: Option<Vec<f64>>,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        let cobyla = Cobyla::default();
        Self {
            method: OptimizerKind::Cobyla,
            max_evaluations: cobyla.max_evaluations,
            rhobeg: cobyla.rhobeg,
            rhoend: cobyla.rhoend,
            mode: ObjectiveMode::Exact,
            integrator: IntegratorConfig::default(),
            c6: C6_RB87,
            initial: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizationResult {
    pub best_params: Vec<f64>,
    /// Largest target probability seen.
    pub best_objective: f64,
    /// Target probability of every evaluation, in order.
    pub trace: Vec<f64>,
    pub iterations: usize,
    pub schedule: PulseSchedule,
    pub termination: Termination,
}

impl OptimizationResult {
    pub fn best_so_far(&self) -> Vec<f64> {
        self.trace
            .iter()
            .scan(f64::NEG_INFINITY, |m, &p| {
                *m = m.max(p);
                Some(*m)
            })
            .collect()
    }
}

/// Maximizes the target probability over the box of `spec`.
pub fn optimize(
    spec: &ScheduleParameterization,
    register: &AtomRegister,
    target: &str,
    config: &OptimizerConfig,
) -> Result<OptimizationResult> {
    spec.validate()?;
    let target = Target::new(register, target)?;
    let evolver = Evolver::new(register, config.c6, config.integrator.clone())?;
    let bounds = spec.bounds()?;
    let x0 = config.initial.clone().unwrap_or_else(|| spec.linear_params());
    if x0.len() != spec.n_params() {
        return Err(Error::LengthMismatch(format!(
            "{} initial parameters, expected {}",
            x0.len(),
            spec.n_params()
        )));
    }

    let mut objective = |x: &[f64]| -> Result<f64> {
        let schedule = build_detuning_schedule(x, spec)?;
        Ok(-target.evaluate(&evolver, &schedule, config.mode)?)
    };
    let run = match config.method {
        OptimizerKind::Cobyla => Cobyla {
            rhobeg: config.rhobeg,
            rhoend: config.rhoend,
            max_evaluations: config.max_evaluations,
        }
        .minimize(&mut objective, &x0, &bounds)?,
        OptimizerKind::NelderMead => NelderMead {
            initial_step: config.rhobeg,
            x_tolerance: config.rhoend,
            max_evaluations: config.max_evaluations,
        }
        .minimize(&mut objective, &x0, &bounds)?,
    };

    let trace: Vec<f64> = run.history.iter().map(|f| -f).collect();
    Ok(OptimizationResult {
        schedule: build_detuning_schedule(&run.x, spec)?,
        best_params: run.x,
        best_objective: -run.f,
        iterations: trace.len(),
        trace,
        termination: run.termination,
    })
}

/// Smallest absolute knot-to-knot slope (rad/μs²) among the segments whose
/// detuning range overlaps `[lo·Ω, hi·Ω]`. `None` if no segment does.
pub fn min_crossing_slope(knots: &[(f64, f64)], omega: f64, (lo, hi): (f64, f64)) -> Option<f64> {
    knots
        .windows(2)
        .filter(|w| {
            let (a, b) = (w[0].1.min(w[1].1), w[0].1.max(w[1].1));
            a <= hi * omega && b >= lo * omega
        })
        .map(|w| ((w[1].1 - w[0].1) / (w[1].0 - w[0].0)).abs())
        .min_by(f64::total_cmp)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::from_mhz;

    fn single_atom() -> AtomRegister {
        AtomRegister::new(vec![[0.0, 0.0]]).unwrap()
    }

    fn spec() -> ScheduleParameterization {
        ScheduleParameterization::new(from_mhz(1.0), 4.0, 0.3, 0.4, (from_mhz(-5.0), from_mhz(5.0)))
    }

    #[test]
    fn equal_knots_give_constant_plateau_detuning() {
        let s = spec();
        let d = from_mhz(2.0);
        let sched = build_detuning_schedule(&[d; 6], &s).unwrap();
        for t in [0.0, 0.3, 1.0, 2.5, 3.6, 4.0] {
            assert_eq!(sched.value_at(t).unwrap().delta, d);
        }
        assert_eq!(sched.total_time(), 4.0);
    }

    #[test]
    fn collinear_knots_reproduce_the_linear_drive() {
        let s = spec();
        let sched = build_detuning_schedule(&s.linear_params(), &s).unwrap();
        let (a, b) = s.linear_drive;
        for k in 0..=40 {
            let t = 0.3 + 3.3 * k as f64 / 40.0;
            let want = a + (b - a) * (t - 0.3) / 3.3;
            assert!((sched.value_at(t).unwrap().delta - want).abs() < 1e-9);
        }
        assert_eq!(sched.value_at(0.1).unwrap().delta, a);
        assert_eq!(sched.value_at(3.9).unwrap().delta, b);
    }

    #[test]
    fn optimized_ramps_set_the_plateau() {
        let mut s = ScheduleParameterization::new(from_mhz(1.0), 4.0, 0.1, 0.1, (-1.0, 1.0));
        s.optimize_ramps = true;
        let mut p = s.linear_params();
        p[6] = 0.29;
        p[7] = 0.4;
        let knots = s.detuning_knots(&p).unwrap();
        assert!((knots[0].0 - 0.29).abs() < 1e-12);
        assert!((knots[5].0 - 3.6).abs() < 1e-12);
        let sched = build_detuning_schedule(&p, &s).unwrap();
        let omega = sched.omega().knots();
        assert!((omega[1].0 - 0.29).abs() < 1e-12 && (omega[2].0 - 3.6).abs() < 1e-12);
    }

    #[test]
    fn parameter_checks() {
        let s = spec();
        assert!(matches!(build_detuning_schedule(&[0.0; 5], &s), Err(Error::LengthMismatch(_))));
        let mut p = s.linear_params();
        p[0] = s.detuning_bounds.0 - 1.0;
        assert!(matches!(build_detuning_schedule(&p, &s), Err(Error::InvalidParameters(_))));
    }

    #[test]
    fn pi_pulse_hits_the_target() {
        // constant Ω over the whole window with area π
        let mut s = ScheduleParameterization::new(std::f64::consts::PI, 1.0, 0.0, 0.0, (0.0, 0.0));
        s.detuning_bounds = (-1.0, 1.0);
        let p = objective_target_probability(
            &s.linear_params(),
            &s,
            &single_atom(),
            "1",
            ObjectiveMode::Exact,
            &IntegratorConfig::default(),
        )
        .unwrap();
        assert!((p - 1.0).abs() < 1e-9, "{p}");
    }

    #[test]
    fn no_drive_stays_in_ground_state() {
        let reg = AtomRegister::new(vec![[0.0, 0.0], [5.0, 0.0], [0.0, 7.0]]).unwrap();
        let s = ScheduleParameterization::new(0.0, 1.0, 0.1, 0.1, (-3.0, 3.0));
        let p = objective_target_probability(
            &s.linear_params(),
            &s,
            &reg,
            "000",
            ObjectiveMode::Shots { shots: 1000, seed: 3 },
            &IntegratorConfig::default(),
        )
        .unwrap();
        assert_eq!(p, 1.0);
    }

    #[test]
    fn ancilla_is_marginalized() {
        let reg = AtomRegister::new(vec![[0.0, 0.0], [30.0, 0.0]])
            .unwrap()
            .with_ancillas(&[1])
            .unwrap();
        let t = Target::new(&reg, "1").unwrap();
        assert_eq!((t.bits, t.mask), (0b01, 0b01));
        assert!(Target::new(&reg, "10").is_ok());
        assert!(Target::new(&reg, "101").is_err());
    }

    #[test]
    fn single_atom_optimization_finds_resonance() {
        // Ω·T_plateau ≈ π, so the resonant drive is a π pulse
        let omega = from_mhz(1.0);
        let mut s = ScheduleParameterization::new(omega, 0.6, 0.05, 0.05, (from_mhz(-2.0), from_mhz(2.0)));
        s.detuning_bounds = (from_mhz(-3.0), from_mhz(3.0));
        let r = optimize(&s, &single_atom(), "1", &OptimizerConfig::default()).unwrap();
        assert!(r.best_objective >= 0.99, "{}", r.best_objective);
        let first_hit = r.trace.iter().position(|&p| p >= 0.99).unwrap();
        assert!(first_hit < 50, "{first_hit}");
        assert!(s.bounds().unwrap().contains(&r.best_params));
        assert_eq!(r.trace.len(), r.iterations);
        let max = r.trace.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(max, r.best_objective);
        assert!(r.best_so_far().windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn optimization_is_reproducible() {
        let reg = AtomRegister::new(vec![[0.0, 0.0], [7.0, 0.0]]).unwrap();
        let s = ScheduleParameterization::new(from_mhz(1.5), 1.5, 0.1, 0.1, (from_mhz(-4.0), from_mhz(4.0)));
        let cfg = OptimizerConfig {
            max_evaluations: 30,
            ..OptimizerConfig::default()
        };
        let a = optimize(&s, &reg, "10", &cfg).unwrap();
        let b = optimize(&s, &reg, "10", &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn crossing_slope_window() {
        let knots = [(0.0, -2.0), (1.0, 0.5), (2.0, 1.0), (3.0, 5.0)];
        assert_eq!(min_crossing_slope(&knots, 1.0, (0.75, 1.25)), Some(0.5));
        assert_eq!(min_crossing_slope(&knots, 1.0, (0.0, 0.4)), Some(2.5));
        assert_eq!(min_crossing_slope(&knots, 1.0, (6.0, 7.0)), None);
    }
}
