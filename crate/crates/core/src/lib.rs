//! Neutral-atom analog quantum simulation: registers, pulse schedules, exact
//! state-vector evolution, readout mitigation, curve fitting, pulse
//! optimization and unit-disk graph tools.

pub mod error;
pub mod evolution;
pub mod fit;
pub mod graph;
pub mod hamiltonian;
pub mod histogram;
pub mod mitigation;
pub mod optim;
pub mod profile;
pub mod program;
pub mod presets;
pub mod pulse;
pub mod register;
pub mod schedule;
pub mod state;
pub mod units;

pub use error::{Error, Result};
pub use evolution::{evolve, Evolver, IntegratorConfig};
pub use hamiltonian::{blockade_radius, DiagonalCache, InteractionTable};
pub use histogram::{bitstring_label, parse_bitstring, probabilities, BitstringHistogram};
pub use profile::{validate_register, validate_schedule, DeviceProfile, ValidationReport};
pub use register::AtomRegister;
pub use schedule::{make_ramp_plateau_ramp, PulseSchedule, Waveform};
pub use state::QuantumState;
