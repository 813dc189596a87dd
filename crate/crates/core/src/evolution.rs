//! Time integration of the Schrödinger equation under a [`PulseSchedule`].
//!
//! Two fixed-step fourth-order schemes are available:
//!
//! * [`Method::Split4`] (default) splits `H(t)` into the single-atom part
//!   (drive plus detuning, a product of identical 2×2 unitaries) and the
//!   interaction (diagonal). Both flows are exact, so the scheme is unitary
//!   to rounding and strong van der Waals shifts never limit the step.
//! * [`Method::Rk4ip`] is Runge–Kutta in the interaction picture of the
//!   diagonal part. It is slightly cheaper per step but not norm preserving.
//!
//! Every knot of the schedule is a step boundary, so the controls are linear
//! inside each step.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonian::{
    add_drive, diagonal_energies, drive_coupling, interaction_table, DiagonalCache,
    InteractionTable, DEFAULT_MAX_ATOMS,
};
use crate::histogram::probabilities;
use crate::register::AtomRegister;
use crate::schedule::{merge_times, PulseSchedule};
use crate::state::QuantumState;
use crate::units::C6_RB87;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Fourth-order Runge–Kutta in the interaction picture.
    Rk4ip,
    /// Fourth-order symmetric splitting between the single-atom terms and the
    /// interaction. Every factor is unitary, so the norm is exact.
    Split4,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IntegratorConfig {
    pub method: Method,
    /// Base step, μs.
    pub dt: f64,
    /// Allowed `| ‖ψ(T)‖ − 1 |`.
    pub norm_tolerance: f64,
    /// Allowed probability shift under step halving (see [`Evolver::evolve_converged`]).
    pub convergence_tolerance: f64,
    pub max_atoms: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            method: Method::Split4,
            dt: 1e-3,
            norm_tolerance: 1e-8,
            convergence_tolerance: 1e-6,
            max_atoms: DEFAULT_MAX_ATOMS,
        }
    }
}

impl IntegratorConfig {
    fn check(&self) -> Result<()> {
        if !(self.dt > 0.0) || !(self.norm_tolerance > 0.0) || !(self.convergence_tolerance > 0.0) {
            return Err(Error::InvalidParameters(
                "integrator step and tolerances must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Same configuration with half the step.
    pub fn halved(&self) -> Self {
        Self {
            dt: 0.5 * self.dt,
            ..self.clone()
        }
    }
}

/// Evolution engine bound to one register's interaction energies.
///
/// The diagonal cache is built once and reused for every schedule, which is
/// what sweeps and the pulse optimizer rely on.
#[derive(Clone, Debug)]
pub struct Evolver {
    cache: DiagonalCache,
    config: IntegratorConfig,
}

impl Evolver {
    pub fn new(register: &AtomRegister, c6: f64, config: IntegratorConfig) -> Result<Self> {
        config.check()?;
        let table = interaction_table(register, c6)?;
        Self::from_table(&table, config)
    }

    pub fn from_table(table: &InteractionTable, config: IntegratorConfig) -> Result<Self> {
        config.check()?;
        let cache = DiagonalCache::with_limit(table, config.max_atoms)?;
        Ok(Self { cache, config })
    }

    pub fn from_cache(cache: DiagonalCache, config: IntegratorConfig) -> Result<Self> {
        config.check()?;
        if cache.n() > config.max_atoms {
            return Err(Error::TooManyAtoms {
                n: cache.n(),
                max: config.max_atoms,
            });
        }
        Ok(Self { cache, config })
    }

    pub fn n(&self) -> usize {
        self.cache.n()
    }

    pub fn cache(&self) -> &DiagonalCache {
        &self.cache
    }

    pub fn config(&self) -> &IntegratorConfig {
        &self.config
    }

    /// Same engine with a different integrator configuration.
    pub fn with_config(&self, config: IntegratorConfig) -> Result<Self> {
        Self::from_cache(self.cache.clone(), config)
    }

    /// Evolves the all-ground state over the whole schedule.
    pub fn evolve(&self, schedule: &PulseSchedule) -> Result<QuantumState> {
        let mut out = self.run(QuantumState::ground(self.n()), schedule, &[])?;
        Ok(out.pop().expect("final state"))
    }

    /// States at each of `times` (μs, within `[0, T]`), in the given order.
    pub fn evolve_sampled(&self, schedule: &PulseSchedule, times: &[f64]) -> Result<Vec<QuantumState>> {
        let total = schedule.total_time();
        for &t in times {
            if !(0.0..=total).contains(&t) {
                return Err(Error::TimeOutOfRange { t, total });
            }
        }
        let mut order: Vec<usize> = (0..times.len()).collect();
        order.sort_by(|&a, &b| times[a].total_cmp(&times[b]));
        let sorted: Vec<f64> = order.iter().map(|&i| times[i]).collect();
        let mut states = self.run(QuantumState::ground(self.n()), schedule, &sorted)?;
        states.pop();
        let mut out = vec![None; times.len()];
        for (state, &i) in states.into_iter().zip(&order) {
            out[i] = Some(state);
        }
        Ok(out.into_iter().map(|s| s.expect("sampled state")).collect())
    }

    /// Evolves with the configured step and with half of it, and fails if
    /// any outcome probability moves by more than the convergence tolerance.
    /// Returns the finer state and the largest shift.
    pub fn evolve_converged(&self, schedule: &PulseSchedule) -> Result<(QuantumState, f64)> {
        let coarse = self.evolve(schedule)?;
        let fine = self.with_config(self.config.halved())?.evolve(schedule)?;
        let shift = max_probability_shift(&coarse, &fine);
        if shift >= self.config.convergence_tolerance {
            return Err(Error::NotConverged {
                shift,
                tolerance: self.config.convergence_tolerance,
            });
        }
        Ok((fine, shift))
    }

    /// Evolves an arbitrary initial state over the whole schedule.
    pub fn evolve_from(&self, initial: QuantumState, schedule: &PulseSchedule) -> Result<QuantumState> {
        let mut out = self.run(initial, schedule, &[])?;
        Ok(out.pop().expect("final state"))
    }

    /// Integrates from `initial`, returning the state at each (sorted)
    /// sample time followed by the final state.
    fn run(&self, initial: QuantumState, schedule: &PulseSchedule, samples: &[f64]) -> Result<Vec<QuantumState>> {
        if initial.dim() != self.cache.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.cache.dim(),
                found: initial.dim(),
            });
        }
        let mut grid = schedule.breakpoints();
        grid.extend_from_slice(samples);
        merge_times(&mut grid);

        let mut stepper = match self.config.method {
            Method::Rk4ip => Engine::Rk4ip(Stepper::new(&self.cache, initial.into_amplitudes())),
            Method::Split4 => Engine::Split4(SplitStepper::new(&self.cache, initial.into_amplitudes())),
        };
        let mut out = Vec::with_capacity(samples.len() + 1);
        let mut next_sample = 0;
        let emit = |t: f64, psi: &[Complex64], out: &mut Vec<QuantumState>, next: &mut usize| {
            while *next < samples.len() && (samples[*next] - t).abs() <= 1e-12 {
                out.push(QuantumState::from_amplitudes(self.n(), psi.to_vec()).expect("dimension"));
                *next += 1;
            }
        };
        emit(grid[0], stepper.psi(schedule), &mut out, &mut next_sample);
        for seg in grid.windows(2) {
            let (a, b) = (seg[0], seg[1]);
            let steps = (((b - a) / self.config.dt) - 1e-9).ceil().max(1.0) as usize;
            let h = (b - a) / steps as f64;
            stepper.set_step(h);
            for k in 0..steps {
                let t = a + k as f64 * h;
                stepper.step(schedule, t);
            }
            emit(b, stepper.psi(schedule), &mut out, &mut next_sample);
        }

        let state = QuantumState::from_amplitudes(self.n(), stepper.into_psi(schedule))?;
        let drift = (state.norm() - 1.0).abs();
        if drift > self.config.norm_tolerance {
            return Err(Error::NormDrift {
                drift,
                tolerance: self.config.norm_tolerance,
            });
        }
        out.push(state);
        Ok(out)
    }
}

/// Largest absolute difference between the outcome distributions of two states.
pub fn max_probability_shift(a: &QuantumState, b: &QuantumState) -> f64 {
    a.amplitudes()
        .iter()
        .zip(b.amplitudes())
        .map(|(x, y)| (x.norm_sqr() - y.norm_sqr()).abs())
        .fold(0.0, f64::max)
}

/// Evolves `register` from the all-ground state using the ⁸⁷Rb C6 coefficient.
pub fn evolve(register: &AtomRegister, schedule: &PulseSchedule, config: &IntegratorConfig) -> Result<QuantumState> {
    Evolver::new(register, C6_RB87, config.clone())?.evolve(schedule)
}

/// Convenience wrapper returning the exact outcome distribution.
pub fn evolve_probabilities(
    register: &AtomRegister,
    schedule: &PulseSchedule,
    config: &IntegratorConfig,
) -> Result<crate::histogram::BitstringHistogram> {
    Ok(probabilities(&evolve(register, schedule, config)?))
}

/// Work buffers and per-step-size tables for RK4IP.
struct Stepper<'a> {
    cache: &'a DiagonalCache,
    n: usize,
    h: f64,
    /// `exp(−i V_b h/2)`.
    half_phase: Vec<Complex64>,
    psi: Vec<Complex64>,
    psi_i: Vec<Complex64>,
    acc: Vec<Complex64>,
    tmp: Vec<Complex64>,
    k: Vec<Complex64>,
    /// `exp(+i Δ_mid k h/2)` for popcount `k`.
    count_phase: Vec<Complex64>,
}

impl<'a> Stepper<'a> {
    fn new(cache: &'a DiagonalCache, psi: Vec<Complex64>) -> Self {
        let dim = psi.len();
        let zero = vec![Complex64::new(0.0, 0.0); dim];
        Self {
            cache,
            n: cache.n(),
            h: f64::NAN,
            half_phase: zero.clone(),
            psi,
            psi_i: zero.clone(),
            acc: zero.clone(),
            tmp: zero.clone(),
            k: zero,
            count_phase: vec![Complex64::new(1.0, 0.0); cache.n() + 1],
        }
    }

    fn set_step(&mut self, h: f64) {
        if h == self.h {
            return;
        }
        self.h = h;
        for (p, e) in self.half_phase.iter_mut().zip(self.cache.energies()) {
            *p = Complex64::from_polar(1.0, -0.5 * h * e);
        }
    }

    /// `dst = E src` with `E = exp(−i h/2 (V − Δ_mid K))`.
    fn apply_half_exp(half_phase: &[Complex64], count_phase: &[Complex64], src: &[Complex64], dst: &mut [Complex64]) {
        for (b, ((d, s), p)) in dst.iter_mut().zip(src).zip(half_phase).enumerate() {
            *d = s * p * count_phase[b.count_ones() as usize];
        }
    }

    fn scale_half_exp(half_phase: &[Complex64], count_phase: &[Complex64], v: &mut [Complex64]) {
        for (b, (x, p)) in v.iter_mut().zip(half_phase).enumerate() {
            *x *= p * count_phase[b.count_ones() as usize];
        }
    }

    /// `out = h · (−i) (X(t) − (Δ(t) − Δ_mid) K) src`.
    fn residual(
        n: usize,
        h: f64,
        coupling: Complex64,
        delta_offset: f64,
        src: &[Complex64],
        out: &mut [Complex64],
    ) {
        for (b, (o, s)) in out.iter_mut().zip(src).enumerate() {
            *o = s * (-delta_offset * b.count_ones() as f64);
        }
        add_drive(src, out, n, coupling);
        let factor = Complex64::new(0.0, -h);
        for o in out.iter_mut() {
            *o *= factor;
        }
    }

    fn step(&mut self, schedule: &PulseSchedule, t: f64) {
        let h = self.h;
        let c0 = schedule.value_at_unchecked(t);
        let cm = schedule.value_at_unchecked(t + 0.5 * h);
        let c1 = schedule.value_at_unchecked(t + h);
        let delta_mid = cm.delta;
        for (k, p) in self.count_phase.iter_mut().enumerate() {
            *p = Complex64::from_polar(1.0, 0.5 * h * delta_mid * k as f64);
        }
        let n = self.n;
        let (hp, cp) = (&self.half_phase, &self.count_phase);

        // ψ_I = E ψ
        Self::apply_half_exp(hp, cp, &self.psi, &mut self.psi_i);

        // k1 = E [h N(t, ψ)]
        Self::residual(n, h, drive_coupling(c0.omega, c0.phi), c0.delta - delta_mid, &self.psi, &mut self.k);
        Self::scale_half_exp(hp, cp, &mut self.k);
        for ((acc, tmp), (pi, k)) in self.acc.iter_mut().zip(self.tmp.iter_mut()).zip(self.psi_i.iter().zip(&self.k)) {
            *acc = pi + k / 6.0;
            *tmp = pi + k * 0.5;
        }

        // k2 = h N(t + h/2, ψ_I + k1/2)
        let cmid = drive_coupling(cm.omega, cm.phi);
        Self::residual(n, h, cmid, 0.0, &self.tmp, &mut self.k);
        for ((acc, tmp), (pi, k)) in self.acc.iter_mut().zip(self.tmp.iter_mut()).zip(self.psi_i.iter().zip(&self.k)) {
            *acc += k / 3.0;
            *tmp = pi + k * 0.5;
        }

        // k3 = h N(t + h/2, ψ_I + k2/2)
        Self::residual(n, h, cmid, 0.0, &self.tmp, &mut self.k);
        for ((acc, tmp), (pi, k)) in self.acc.iter_mut().zip(self.tmp.iter_mut()).zip(self.psi_i.iter().zip(&self.k)) {
            *acc += k / 3.0;
            *tmp = pi + k;
        }
        Self::scale_half_exp(hp, cp, &mut self.tmp);

        // k4 = h N(t + h, E(ψ_I + k3))
        Self::residual(n, h, drive_coupling(c1.omega, c1.phi), c1.delta - delta_mid, &self.tmp, &mut self.k);

        // ψ(t + h) = E (ψ_I + k1/6 + k2/3 + k3/3) + k4/6
        Self::apply_half_exp(hp, cp, &self.acc, &mut self.psi);
        for (p, k) in self.psi.iter_mut().zip(&self.k) {
            *p += k / 6.0;
        }
    }
}

enum Engine<'a> {
    Rk4ip(Stepper<'a>),
    Split4(SplitStepper<'a>),
}

impl Engine<'_> {
    fn set_step(&mut self, h: f64) {
        match self {
            Engine::Rk4ip(s) => s.set_step(h),
            Engine::Split4(s) => s.set_step(h),
        }
    }

    fn step(&mut self, schedule: &PulseSchedule, t: f64) {
        match self {
            Engine::Rk4ip(s) => s.step(schedule, t),
            Engine::Split4(s) => s.step(schedule, t),
        }
    }

    fn psi(&mut self, schedule: &PulseSchedule) -> &[Complex64] {
        match self {
            Engine::Rk4ip(s) => &s.psi,
            Engine::Split4(s) => {
                s.flush(schedule);
                &s.psi
            }
        }
    }

    fn into_psi(mut self, schedule: &PulseSchedule) -> Vec<Complex64> {
        self.psi(schedule);
        match self {
            Engine::Rk4ip(s) => s.psi,
            Engine::Split4(s) => s.psi,
        }
    }
}

// Six-stage symmetric fourth-order splitting coefficients (Blanes–Moan).
const SPLIT_A: [f64; 4] = [
    0.079_203_696_431_195_7,
    0.353_172_906_049_774,
    -0.042_065_080_357_719_5,
    1.0 - 2.0 * (0.079_203_696_431_195_7 + 0.353_172_906_049_774 - 0.042_065_080_357_719_5),
];
const SPLIT_B: [f64; 3] = [
    0.209_515_106_613_362,
    -0.143_851_773_179_818,
    0.5 - (0.209_515_106_613_362 - 0.143_851_773_179_818),
];

/// Splitting `H = A(t) + V` where `A(t)` is the sum of identical single-atom
/// terms and `V` is the interaction. The `V` flow also advances the clock,
/// so `A` is frozen at the current substep time, which stays inside the step.
struct SplitStepper<'a> {
    cache: &'a DiagonalCache,
    n: usize,
    h: f64,
    /// `exp(−i b_k h V)` for the three distinct `b_k`.
    phases: [Vec<Complex64>; 3],
    psi: Vec<Complex64>,
    /// Deferred single-atom flow duration and the time it acts at.
    pending: f64,
    pending_at: f64,
    /// Accumulated scalar phase not yet applied to `psi`.
    global_phase: Complex64,
}

impl<'a> SplitStepper<'a> {
    fn new(cache: &'a DiagonalCache, psi: Vec<Complex64>) -> Self {
        Self {
            cache,
            n: cache.n(),
            h: f64::NAN,
            phases: [Vec::new(), Vec::new(), Vec::new()],
            psi,
            pending: 0.0,
            pending_at: 0.0,
            global_phase: Complex64::new(1.0, 0.0),
        }
    }

    fn set_step(&mut self, h: f64) {
        if h == self.h {
            return;
        }
        self.h = h;
        for (phase, b) in self.phases.iter_mut().zip(SPLIT_B) {
            *phase = self
                .cache
                .energies()
                .iter()
                .map(|e| Complex64::from_polar(1.0, -b * h * e))
                .collect();
        }
    }

    /// `ψ ← exp(−iτ A(t)) ψ`, one 2×2 unitary per atom.
    fn single_atom_flow(&mut self, schedule: &PulseSchedule, t: f64, tau: f64) {
        let c = schedule.value_at_unchecked(t);
        let coupling = drive_coupling(c.omega, c.phi);
        let half_delta = 0.5 * c.delta;
        let lambda = (half_delta * half_delta + coupling.norm_sqr()).sqrt();
        let (sin, cos) = (lambda * tau).sin_cos();
        let sinc = if lambda * tau == 0.0 { tau } else { sin / lambda };
        // exp(−iτ [[δ, c], [c*, −δ]]) = [[α, β], [−β*, α*]] with δ = Δ/2; the
        // remaining factor exp(iτδ) per atom is a global phase, kept aside.
        let alpha = Complex64::new(cos, -sinc * half_delta);
        let beta = Complex64::new(0.0, -sinc) * coupling;
        self.global_phase *= Complex64::from_polar(1.0, tau * half_delta * self.n as f64);
        for j in 0..self.n {
            let half = 1usize << j;
            for chunk in self.psi.chunks_exact_mut(2 * half) {
                let (p0, p1) = chunk.split_at_mut(half);
                for (g, r) in p0.iter_mut().zip(p1.iter_mut()) {
                    let (a, b) = (*g, *r);
                    *g = Complex64::new(
                        alpha.re * a.re - alpha.im * a.im + beta.re * b.re - beta.im * b.im,
                        alpha.re * a.im + alpha.im * a.re + beta.re * b.im + beta.im * b.re,
                    );
                    *r = Complex64::new(
                        -beta.re * a.re - beta.im * a.im + alpha.re * b.re + alpha.im * b.im,
                        -beta.re * a.im + beta.im * a.re + alpha.re * b.im - alpha.im * b.re,
                    );
                }
            }
        }
    }

    fn interaction_flow(&mut self, k: usize) {
        for (p, ph) in self.psi.iter_mut().zip(&self.phases[k]) {
            *p *= ph;
        }
    }

    fn step(&mut self, schedule: &PulseSchedule, t: f64) {
        let h = self.h;
        let mut clock = t;
        // The last flow of the previous step acts at this same instant; fuse it.
        let carried = std::mem::take(&mut self.pending);
        for k in 0..3 {
            let extra = if k == 0 { carried } else { 0.0 };
            self.single_atom_flow(schedule, clock, SPLIT_A[k] * h + extra);
            self.interaction_flow(k);
            clock += SPLIT_B[k] * h;
        }
        self.single_atom_flow(schedule, clock, SPLIT_A[3] * h);
        for k in (0..3).rev() {
            self.interaction_flow(k);
            clock += SPLIT_B[k] * h;
            if k > 0 {
                self.single_atom_flow(schedule, clock, SPLIT_A[k] * h);
            }
        }
        self.pending = SPLIT_A[0] * h;
        self.pending_at = t + h;
    }

    /// Applies the deferred final flow so that `psi` is the state at the
    /// current time.
    fn flush(&mut self, schedule: &PulseSchedule) {
        let tau = std::mem::take(&mut self.pending);
        if tau != 0.0 {
            self.single_atom_flow(schedule, self.pending_at, tau);
        }
        let phase = std::mem::replace(&mut self.global_phase, Complex64::new(1.0, 0.0));
        if phase != Complex64::new(1.0, 0.0) {
            for p in &mut self.psi {
                *p *= phase;
            }
        }
    }
}

/// Builds the diagonal cache for a register with the default atom limit.
pub fn cache_for(register: &AtomRegister, c6: f64) -> Result<DiagonalCache> {
    diagonal_energies(&interaction_table(register, c6)?)
}
