//! A register together with the schedule that drives it.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::register::{AtomRegister, RegisterJson};
use crate::schedule::{PulseSchedule, ScheduleJson};

/// Serialized as one flat object:
/// `{"atoms", "ancilla", "omega", "delta", "phi"}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ProgramJson", into = "ProgramJson")]
pub struct Program {
    pub register: AtomRegister,
    pub schedule: PulseSchedule,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ProgramJson {
    #[serde(flatten)]
    pub register: RegisterJson,
    #[serde(flatten)]
    pub schedule: ScheduleJson,
}

impl TryFrom<ProgramJson> for Program {
    type Error = crate::error::Error;

    fn try_from(p: ProgramJson) -> Result<Self> {
        Ok(Program {
            register: p.register.try_into()?,
            schedule: p.schedule.try_into()?,
        })
    }
}

impl From<Program> for ProgramJson {
    fn from(p: Program) -> Self {
        ProgramJson {
            register: p.register.into(),
            schedule: p.schedule.into(),
        }
    }
}

impl Program {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schedule::make_ramp_plateau_ramp;
    use crate::units::from_mhz;

    #[test]
    fn documented_shape_in_mhz() {
        let text = r#"{"atoms": [[0, 0], [11, 0], [5, 9]], "ancilla": [2],
            "omega": [[0, 0], [0.1, 1.8], [0.9, 1.8], [1.0, 0]],
            "delta": [[0, -3], [1.0, 3]]}"#;
        let p = Program::from_json(text).unwrap();
        assert_eq!(p.register.ancilla_indices(), vec![2]);
        let c = p.schedule.value_at(0.5).unwrap();
        assert!((c.omega - from_mhz(1.8)).abs() < 1e-12);
        assert!(c.delta.abs() < 1e-12 && c.phi == 0.0);
    }

    #[test]
    fn round_trip() {
        let reg = AtomRegister::new(vec![[0.0, 0.0], [6.5, 1.25]]).unwrap().with_label("pair");
        let sched = make_ramp_plateau_ramp(from_mhz(1.8), 0.1, 0.8, 0.1, None).unwrap();
        let p = Program {
            register: reg,
            schedule: sched,
        };
        let back = Program::from_json(&p.to_json().unwrap()).unwrap();
        assert_eq!(back.register, p.register);
        for (a, b) in back.schedule.omega().knots().iter().zip(p.schedule.omega().knots()) {
            assert_eq!(a.0, b.0);
            assert!((a.1 - b.1).abs() <= 1e-12 * b.1.abs());
        }
    }

    #[test]
    fn invalid_files_are_rejected() {
        let dup = r#"{"atoms": [[0, 0]], "omega": [[0, 0], [0.5, 1], [0.5, 1], [1, 0]], "delta": [[0, 0], [1, 0]]}"#;
        assert!(Program::from_json(dup).is_err());
        let bad_ancilla = r#"{"atoms": [[0, 0]], "ancilla": [3], "omega": [[0, 0], [1, 0]], "delta": [[0, 0], [1, 0]]}"#;
        assert!(Program::from_json(bad_ancilla).is_err());
    }
}
