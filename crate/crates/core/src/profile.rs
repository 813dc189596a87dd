//! Device capability profiles and validation of registers and schedules.

use serde::{Deserialize, Serialize};

use crate::register::AtomRegister;
use crate::schedule::PulseSchedule;
use crate::units::{from_mhz, C6_RB87};

/// Hardware-style limits. Frequencies in rad/μs, times in μs, lengths in μm.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DeviceProfile {
    pub omega_max: f64,
    pub delta_min: f64,
    pub delta_max: f64,
    pub t_max: f64,
    pub min_ramp: f64,
    pub min_spacing: f64,
    pub fov_width: f64,
    pub fov_height: f64,
    /// When false, positions are not checked against the field of view.
    pub check_fov: bool,
    pub c6: f64,
}

impl Default for DeviceProfile {
    fn default() -> Self {
        Self {
            omega_max: from_mhz(2.5),
            delta_min: from_mhz(-20.0),
            delta_max: from_mhz(20.0),
            t_max: 4.0,
            min_ramp: 0.1,
            min_spacing: 4.0,
            fov_width: 75.0,
            fov_height: 76.0,
            check_fov: true,
            c6: C6_RB87,
        }
    }
}

/// One failed rule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub rule: String,
    pub message: String,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub ok: bool,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn from_violations(violations: Vec<Violation>) -> Self {
        Self {
            ok: violations.is_empty(),
            violations,
        }
    }

    pub fn has_rule(&self, rule: &str) -> bool {
        self.violations.iter().any(|v| v.rule == rule)
    }

    /// Concatenates two reports.
    pub fn merge(mut self, other: ValidationReport) -> Self {
        self.violations.extend(other.violations);
        Self::from_violations(self.violations)
    }
}

struct Collector(Vec<Violation>);

impl Collector {
    fn push(&mut self, rule: &str, value: f64, message: String) {
        self.0.push(Violation {
            rule: rule.to_string(),
            message,
            value,
        });
    }
}

pub fn validate_register(register: &AtomRegister, profile: &DeviceProfile) -> ValidationReport {
    let mut out = Collector(Vec::new());
    let pos = register.positions();
    for j in 0..pos.len() {
        for k in j + 1..pos.len() {
            let d = register.distance(j, k);
            if d < profile.min_spacing {
                out.push(
                    "min_spacing",
                    d,
                    format!(
                        "atoms {j} and {k} are {d:.3} μm apart (minimum {} μm)",
                        profile.min_spacing
                    ),
                );
            }
        }
    }
    if profile.check_fov {
        for (j, &[x, y]) in pos.iter().enumerate() {
            if x < 0.0 || x > profile.fov_width {
                out.push(
                    "fov",
                    x,
                    format!("atom {j} x = {x} μm outside [0, {}]", profile.fov_width),
                );
            }
            if y < 0.0 || y > profile.fov_height {
                out.push(
                    "fov",
                    y,
                    format!("atom {j} y = {y} μm outside [0, {}]", profile.fov_height),
                );
            }
        }
    }
    ValidationReport::from_violations(out.0)
}

pub fn validate_schedule(schedule: &PulseSchedule, profile: &DeviceProfile) -> ValidationReport {
    // Tolerance for bound comparisons of values that went through unit conversion.
    const REL: f64 = 1e-9;
    let mut out = Collector(Vec::new());

    let total = schedule.total_time();
    if total > profile.t_max * (1.0 + REL) {
        out.push(
            "t_max",
            total,
            format!("duration {total} μs exceeds {} μs", profile.t_max),
        );
    }

    let omega = schedule.omega();
    let peak = omega.max_value();
    if peak > profile.omega_max * (1.0 + REL) {
        out.push(
            "omega_max",
            peak,
            format!(
                "Rabi frequency {:.4}·2π rad/μs exceeds {:.4}·2π",
                crate::units::to_mhz(peak),
                crate::units::to_mhz(profile.omega_max)
            ),
        );
    }
    let knots = omega.knots();
    let (first, last) = (knots[0], knots[knots.len() - 1]);
    if first.1 != 0.0 || last.1 != 0.0 {
        let value = if first.1 != 0.0 { first.1 } else { last.1 };
        out.push(
            "omega_boundary",
            value,
            "Rabi frequency must start and end at zero".into(),
        );
    }
    let up = knots[1].0 - knots[0].0;
    let down = last.0 - knots[knots.len() - 2].0;
    for (which, span) in [("first", up), ("last", down)] {
        if span < profile.min_ramp * (1.0 - REL) {
            out.push(
                "min_ramp",
                span,
                format!(
                    "{which} Rabi segment spans {span} μs (minimum {} μs)",
                    profile.min_ramp
                ),
            );
        }
    }

    let lo = schedule.delta().min_value();
    let hi = schedule.delta().max_value();
    let tol = REL * profile.delta_min.abs().max(profile.delta_max.abs());
    if lo < profile.delta_min - tol {
        out.push(
            "delta_min",
            lo,
            format!("detuning {lo} rad/μs below {}", profile.delta_min),
        );
    }
    if hi > profile.delta_max + tol {
        out.push(
            "delta_max",
            hi,
            format!("detuning {hi} rad/μs above {}", profile.delta_max),
        );
    }
    ValidationReport::from_violations(out.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schedule::make_ramp_plateau_ramp;

    fn grid16() -> AtomRegister {
        let mut pos = Vec::new();
        for r in 0..4 {
            for c in 0..4 {
                pos.push([c as f64 * 24.0, r as f64 * 24.0]);
            }
        }
        AtomRegister::new(pos).unwrap()
    }

    #[test]
    fn rabi_grid_is_valid() {
        let report = validate_register(&grid16(), &DeviceProfile::default());
        assert!(report.ok, "{report:?}");
    }

    #[test]
    fn coincident_atoms_violate_spacing() {
        let reg = AtomRegister::new(vec![[5.0, 5.0], [5.0, 5.0]]).unwrap();
        let report = validate_register(&reg, &DeviceProfile::default());
        assert!(!report.ok);
        assert!(report.has_rule("min_spacing"));
    }

    #[test]
    fn negative_coordinate_violates_fov() {
        let reg = AtomRegister::new(vec![[-1.0, 0.0], [10.0, 0.0]]).unwrap();
        let report = validate_register(&reg, &DeviceProfile::default());
        assert!(report.has_rule("fov"));
        let relaxed = DeviceProfile {
            check_fov: false,
            ..DeviceProfile::default()
        };
        assert!(validate_register(&reg, &relaxed).ok);
    }

    #[test]
    fn trapezoid_passes() {
        let s = make_ramp_plateau_ramp(from_mhz(1.8), 0.1, 0.8, 0.1, None).unwrap();
        let report = validate_schedule(&s, &DeviceProfile::default());
        assert!(report.ok, "{report:?}");
    }

    #[test]
    fn too_long_schedule_violates_t_max() {
        let s = make_ramp_plateau_ramp(from_mhz(1.8), 0.1, 4.8, 0.1, None).unwrap();
        let report = validate_schedule(&s, &DeviceProfile::default());
        assert!(report.has_rule("t_max"));
        assert_eq!(report.violations.len(), 1);
    }

    #[test]
    fn strong_plateau_violates_omega_max() {
        let s = make_ramp_plateau_ramp(from_mhz(3.0), 0.1, 0.8, 0.1, None).unwrap();
        let report = validate_schedule(&s, &DeviceProfile::default());
        assert!(report.has_rule("omega_max"));
    }

    #[test]
    fn square_pulse_and_short_ramp_are_flagged() {
        let s = make_ramp_plateau_ramp(1.0, 0.0, 1.0, 0.05, None).unwrap();
        let report = validate_schedule(&s, &DeviceProfile::default());
        assert!(report.has_rule("omega_boundary"));
        assert!(report.has_rule("min_ramp"));
    }

    #[test]
    fn validation_is_pure() {
        let s = make_ramp_plateau_ramp(from_mhz(3.0), 0.1, 4.8, 0.1, None).unwrap();
        let p = DeviceProfile::default();
        assert_eq!(validate_schedule(&s, &p), validate_schedule(&s, &p));
        assert_eq!(validate_register(&grid16(), &p), validate_register(&grid16(), &p));
    }
}
