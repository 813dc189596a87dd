//! Registers, drives and targets of the four reference experiments.
//!
//! Geometries are anchored at the origin with non-negative coordinates so
//! they sit inside the default field of view.

use std::f64::consts::PI;

use crate::error::Result;
use crate::pulse::ScheduleParameterization;
use crate::register::AtomRegister;
use crate::schedule::{make_ramp_plateau_ramp, PulseSchedule, Waveform};
use crate::units::from_mhz;

/// Rabi frequency of the single- and two-atom experiments, MHz × 2π.
pub const RABI_OMEGA_MHZ: f64 = 1.8;
/// Ramp duration of the single- and two-atom drives, μs.
pub const RABI_RAMP: f64 = 0.1;
/// Pitch of the 4 × 4 array of independent atoms, μm.
pub const RABI_PITCH: f64 = 24.0;
pub const BELL_SPACING: f64 = 11.0;

/// Nearest-neighbour spacing of the U-shaped chain, μm.
pub const Z2_SPACING: f64 = 6.2;
pub const Z2_OMEGA_MHZ: f64 = 2.5;
/// Linear detuning drive of the chain, MHz × 2π.
pub const Z2_DELTA_MHZ: (f64, f64) = (-6.0, 10.0);
pub const Z2_RAMPS: (f64, f64) = (0.29, 0.4);

/// Nearest-neighbour spacing of the 12-atom square loop, μm.
pub const LOOP_SPACING: f64 = 6.7;
pub const LOOP_OMEGA_MHZ: f64 = 2.5;
pub const LOOP_DELTA_MHZ: (f64, f64) = (-6.0, 10.0);
pub const LOOP_RAMP: f64 = 0.3;
/// Starting ramp duration of the loop optimization, μs. Ramps are free
/// parameters there; a slower start leaves the search more room.
pub const MAXIS_RAMP: f64 = 0.8;
pub const MAXIS_TARGET: &str = "100100100100";

/// Fixed duration of the chain and loop protocols, μs.
pub const PROTOCOL_TIME: f64 = 4.0;

fn anchored(positions: Vec<[f64; 2]>) -> Result<AtomRegister> {
    let min_x = positions.iter().map(|p| p[0]).fold(f64::INFINITY, f64::min);
    let min_y = positions.iter().map(|p| p[1]).fold(f64::INFINITY, f64::min);
    let shifted = positions.iter().map(|&[x, y]| [x - min_x, y - min_y]).collect();
    AtomRegister::new(shifted)
}

/// Sixteen non-interacting atoms on a square grid.
pub fn rabi_array() -> Result<AtomRegister> {
    let pos = (0..16)
        .map(|k| [RABI_PITCH * (k % 4) as f64, RABI_PITCH * (k / 4) as f64])
        .collect();
    Ok(AtomRegister::new(pos)?.with_label("rabi_array"))
}

/// One atom. The array atoms evolve independently, so this is the unit that
/// is simulated.
pub fn single_atom() -> Result<AtomRegister> {
    Ok(AtomRegister::new(vec![[0.0, 0.0]])?.with_label("single_atom"))
}

/// Eight well separated pairs.
pub fn bell_array() -> Result<AtomRegister> {
    let mut pos = Vec::with_capacity(16);
    for row in 0..4 {
        for col in 0..2 {
            let (x, y) = (40.0 * col as f64, 24.0 * row as f64);
            pos.push([x, y]);
            pos.push([x + BELL_SPACING, y]);
        }
    }
    Ok(AtomRegister::new(pos)?.with_label("bell_array"))
}

pub fn bell_pair() -> Result<AtomRegister> {
    Ok(AtomRegister::new(vec![[0.0, 0.0], [BELL_SPACING, 0.0]])?.with_label("bell_pair"))
}

/// Resonant trapezoid of total duration `total` with the Rabi ramps.
pub fn rabi_schedule(total: f64) -> Result<PulseSchedule> {
    make_ramp_plateau_ramp(
        from_mhz(RABI_OMEGA_MHZ),
        RABI_RAMP,
        total - 2.0 * RABI_RAMP,
        RABI_RAMP,
        None,
    )
}

fn linspace(a: f64, b: f64, n: usize) -> impl Iterator<Item = f64> {
    (0..n).map(move |k| a + (b - a) * k as f64 / (n - 1) as f64)
}

/// Thirty durations in each of the two acquisition windows, μs.
pub fn rabi_sweep() -> Vec<f64> {
    linspace(0.3, 1.5, 30).chain(linspace(2.8, 4.0, 30)).collect()
}

/// Twelve durations over the entangling window, μs.
pub fn bell_sweep() -> Vec<f64> {
    linspace(1.9, 2.5, 12).collect()
}

/// Chain folded into a U: two straight arms of `arm` atoms joined by a
/// half-circle of five atoms whose middle one is the chain centre, plus an
/// ancilla (last index) one spacing outside that centre atom.
///
/// Consecutive atoms are `spacing` apart; on the turn each bond subtends
/// π/4, so the next-nearest distance never drops below `2 cos(π/8)·spacing`.
pub fn u_chain(arm: usize, spacing: f64) -> Result<AtomRegister> {
    let r = spacing / (2.0 * (PI / 8.0).sin());
    let mut pos = Vec::with_capacity(2 * arm + 6);
    for i in 0..arm {
        pos.push([-((arm - i) as f64) * spacing, r]);
    }
    for k in 0..5 {
        let theta = PI / 4.0 * k as f64;
        pos.push([r * theta.sin(), r * theta.cos()]);
    }
    for j in 0..arm {
        pos.push([-((j + 1) as f64) * spacing, -r]);
    }
    pos.push([r + spacing, 0.0]);
    let n = pos.len();
    Ok(anchored(pos)?.with_ancillas(&[n - 1])?.with_label(format!("u_chain_{}", n - 1)))
}

/// Nine-atom chain plus ancilla.
pub fn z2_scaled() -> Result<AtomRegister> {
    u_chain(2, Z2_SPACING)
}

/// Seventeen-atom chain plus ancilla.
pub fn z2_full() -> Result<AtomRegister> {
    u_chain(6, Z2_SPACING)
}

/// Alternating pattern with the centre atom and its two neighbours in the
/// ground state, over the chain atoms only. `chain_len` must be `2m + 5`
/// with `m` even.
pub fn z2_target(chain_len: usize) -> String {
    let c = chain_len / 2;
    (0..chain_len)
        .map(|i| {
            let excited = if i + 1 < c { i % 2 == 0 } else { i > c + 1 && (i - c) % 2 == 0 };
            if excited {
                '1'
            } else {
                '0'
            }
        })
        .collect()
}

/// Six plateau knots on the linear chain drive; ramps held fixed.
pub fn z2_parameterization() -> ScheduleParameterization {
    let mut spec = ScheduleParameterization::new(
        from_mhz(Z2_OMEGA_MHZ),
        PROTOCOL_TIME,
        Z2_RAMPS.0,
        Z2_RAMPS.1,
        (from_mhz(Z2_DELTA_MHZ.0), from_mhz(Z2_DELTA_MHZ.1)),
    );
    spec.detuning_bounds = (from_mhz(-15.0), from_mhz(15.0));
    spec
}

/// Linear drive of the chain.
pub fn z2_linear_schedule() -> Result<PulseSchedule> {
    let spec = z2_parameterization();
    crate::pulse::build_detuning_schedule(&spec.linear_params(), &spec)
}

/// Twelve atoms around the perimeter of a square, three bonds per side.
/// Corners are atoms 0, 3, 6 and 9.
///
/// Sides are straight, so the shortest non-bonded distance is the `√2·a`
/// across each corner; with `a ≤ R_b < √2·a` the blockade graph is a
/// 12-cycle.
pub fn square_loop(spacing: f64) -> Result<AtomRegister> {
    let dirs = [(1.0, 0.0), (0.0, 1.0), (-1.0, 0.0), (0.0, -1.0)];
    let (mut x, mut y) = (0.0, 0.0);
    let mut pos = Vec::with_capacity(12);
    for (dx, dy) in dirs {
        for _ in 0..3 {
            pos.push([x, y]);
            x += dx * spacing;
            y += dy * spacing;
        }
    }
    Ok(anchored(pos)?.with_label("square_loop"))
}

pub fn mis_loop() -> Result<AtomRegister> {
    square_loop(LOOP_SPACING)
}

/// Slow linear sweep of the loop.
pub fn mis_linear_schedule() -> Result<PulseSchedule> {
    let (a, b) = LOOP_DELTA_MHZ;
    let delta = Waveform::new(vec![
        (0.0, from_mhz(a)),
        (LOOP_RAMP, from_mhz(a)),
        (PROTOCOL_TIME - LOOP_RAMP, from_mhz(b)),
        (PROTOCOL_TIME, from_mhz(b)),
    ])?;
    make_ramp_plateau_ramp(
        from_mhz(LOOP_OMEGA_MHZ),
        LOOP_RAMP,
        PROTOCOL_TIME - 2.0 * LOOP_RAMP,
        LOOP_RAMP,
        Some(delta),
    )
}

/// Six plateau knots plus both ramp durations, starting from the linear
/// loop drive.
pub fn maxis_parameterization() -> ScheduleParameterization {
    let mut spec = ScheduleParameterization::new(
        from_mhz(LOOP_OMEGA_MHZ),
        PROTOCOL_TIME,
        MAXIS_RAMP,
        MAXIS_RAMP,
        (from_mhz(LOOP_DELTA_MHZ.0), from_mhz(LOOP_DELTA_MHZ.1)),
    );
    spec.optimize_ramps = true;
    spec.ramp_bounds = (0.05, 1.5);
    spec
}
