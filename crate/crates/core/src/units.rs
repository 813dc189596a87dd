//! Frequency units.
//!
//! Frequencies are carried internally in rad/μs. Files and command-line
//! arguments use "MHz × 2π" multipliers, i.e. the number `1.8` stands for
//! `1.8 × 2π rad/μs`.

use std::f64::consts::PI;

pub const TWO_PI: f64 = 2.0 * PI;

/// Van der Waals coefficient for the ⁸⁷Rb Rydberg level, rad·μs⁻¹·μm⁶.
pub const C6_RB87: f64 = 862_690.0 * TWO_PI;

/// Converts a "MHz × 2π" multiplier into rad/μs.
#[inline]
pub fn from_mhz(multiplier: f64) -> f64 {
    multiplier * TWO_PI
}

/// Converts rad/μs into a "MHz × 2π" multiplier.
#[inline]
pub fn to_mhz(rad_per_us: f64) -> f64 {
    rad_per_us / TWO_PI
}
