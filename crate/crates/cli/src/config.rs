//! Scenario configuration files and their resolution into registers and
//! schedules.

use std::path::{Path, PathBuf};

use qsim_core::mitigation::{MitigationMethod, DEFAULT_EPSILON};
use qsim_core::pulse::{OptimizerConfig, ScheduleParameterization};
use qsim_core::units::from_mhz;
use qsim_core::{make_ramp_plateau_ramp, presets, AtomRegister, DeviceProfile, IntegratorConfig, PulseSchedule};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const SCHEMA: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioId {
    Rabi,
    Bell,
    Z2chain,
    Misloop,
    Custom,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegisterSource {
    Preset(String),
    /// `{"atoms": [[x, y], ...], "ancilla": [...]}`, μm.
    File(PathBuf),
}

/// Ramp-plateau-ramp drive with constant detuning. The only schedule family
/// that can be swept over total duration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Trapezoid {
    pub omega_mhz: f64,
    pub ramp_us: f64,
    #[serde(default)]
    pub delta_mhz: f64,
    /// Used when there is no sweep.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub total_us: Option<f64>,
}

impl Trapezoid {
    pub fn at(&self, total: f64) -> CliResult<PulseSchedule> {
        let delta = qsim_core::Waveform::constant(from_mhz(self.delta_mhz), total)?;
        Ok(make_ramp_plateau_ramp(
            from_mhz(self.omega_mhz),
            self.ramp_us,
            total - 2.0 * self.ramp_us,
            self.ramp_us,
            Some(delta),
        )?)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleSource {
    Preset(String),
    /// `{"omega": [[t, v], ...], "delta": ..., "phi": ...}`, MHz × 2π.
    File(PathBuf),
    /// Result record written by `qsim optimize`.
    Optimized(PathBuf),
    Trapezoid(Trapezoid),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MitigationConfig {
    pub enabled: bool,
    pub epsilon: f64,
    pub method: MitigationMethod,
}

impl Default for MitigationConfig {
    fn default() -> Self {
        Self {
            enabled: false,
            epsilon: DEFAULT_EPSILON,
            method: MitigationMethod::Exact,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub schema: u32,
    pub scenario: ScenarioId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub register: Option<RegisterSource>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule: Option<ScheduleSource>,
    /// Total drive durations, μs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<Vec<f64>>,
    /// Shots per point; exact probabilities when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shots: Option<u64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub mitigation: MitigationConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parameterization: Option<ScheduleParameterization>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub optimizer: Option<OptimizerConfig>,
    #[serde(default)]
    pub integrator: IntegratorConfig,
    /// Repeat every evolution at half the step and report the shift.
    #[serde(default)]
    pub check_convergence: bool,
}

/// Command-line overrides shared by `run` and `optimize`.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub exact: bool,
    pub shots: Option<u64>,
    pub mitigate: Option<f64>,
    pub out: Option<PathBuf>,
}

impl ScenarioConfig {
    /// Reads a config; relative paths inside it are resolved against its
    /// directory.
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut cfg: ScenarioConfig =
            serde_json::from_str(&text).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
        if cfg.schema != SCHEMA {
            return Err(CliError::Validation(format!(
                "unsupported config schema {} (expected {SCHEMA})",
                cfg.schema
            )));
        }
        let base = path.parent().unwrap_or(Path::new("."));
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(RegisterSource::File(p)) = &mut cfg.register {
            fix(p);
        }
        if let Some(ScheduleSource::File(p) | ScheduleSource::Optimized(p)) = &mut cfg.schedule {
            fix(p);
        }
        if let Some(p) = &mut cfg.output {
            fix(p);
        }
        Ok(cfg)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if o.exact {
            self.shots = None;
        }
        if o.shots.is_some() {
            self.shots = o.shots;
        }
        if let Some(eps) = o.mitigate {
            self.mitigation.enabled = true;
            self.mitigation.epsilon = eps;
        }
        if o.out.is_some() {
            self.output = o.out.clone();
        }
    }

    pub fn output_dir(&self) -> PathBuf {
        self.output.clone().unwrap_or_else(|| PathBuf::from("qsim_out"))
    }

    /// Register to simulate and the full hardware layout it stands for.
    pub fn registers(&self) -> CliResult<(AtomRegister, AtomRegister)> {
        let source = self.register.clone().unwrap_or_else(|| {
            RegisterSource::Preset(
                match self.scenario {
                    ScenarioId::Rabi => "rabi",
                    ScenarioId::Bell => "bell",
                    ScenarioId::Z2chain => "z2_scaled",
                    ScenarioId::Misloop => "square_loop",
                    ScenarioId::Custom => "",
                }
                .into(),
            )
        });
        match source {
            RegisterSource::Preset(name) => {
                let (sim, layout) = match name.as_str() {
                    "rabi" => (presets::single_atom()?, presets::rabi_array()?),
                    "bell" => (presets::bell_pair()?, presets::bell_array()?),
                    "" => return Err(CliError::Validation("custom scenario needs a register".into())),
                    other => {
                        let r = register_preset(other)?;
                        (r.clone(), r)
                    }
                };
                Ok((sim, layout))
            }
            RegisterSource::File(path) => {
                let text = std::fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
                let r: AtomRegister = serde_json::from_str(&text)
                    .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
                Ok((r.clone(), r))
            }
        }
    }

    fn schedule_source(&self) -> CliResult<ScheduleSource> {
        if let Some(s) = &self.schedule {
            return Ok(s.clone());
        }
        Ok(match self.scenario {
            ScenarioId::Rabi | ScenarioId::Bell => ScheduleSource::Trapezoid(Trapezoid {
                omega_mhz: presets::RABI_OMEGA_MHZ,
                ramp_us: presets::RABI_RAMP,
                delta_mhz: 0.0,
                total_us: None,
            }),
            ScenarioId::Z2chain => ScheduleSource::Preset("z2_linear".into()),
            ScenarioId::Misloop => ScheduleSource::Preset("mis_linear".into()),
            ScenarioId::Custom => return Err(CliError::Validation("custom scenario needs a schedule".into())),
        })
    }

    /// `(T, schedule)` for every point of the run.
    pub fn points(&self) -> CliResult<Vec<(f64, PulseSchedule)>> {
        let source = self.schedule_source()?;
        let sweep = self.sweep.clone().or_else(|| match self.scenario {
            ScenarioId::Rabi if self.schedule.is_none() => Some(presets::rabi_sweep()),
            ScenarioId::Bell if self.schedule.is_none() => Some(presets::bell_sweep()),
            _ => None,
        });
        let fixed = |s: PulseSchedule| Ok(vec![(s.total_time(), s)]);
        match (source, sweep) {
            (ScheduleSource::Trapezoid(tz), Some(times)) => {
                if times.is_empty() {
                    return Err(CliError::Validation("empty sweep".into()));
                }
                times.iter().map(|&t| Ok((t, tz.at(t)?))).collect()
            }
            (ScheduleSource::Trapezoid(tz), None) => {
                let t = tz
                    .total_us
                    .ok_or_else(|| CliError::Validation("trapezoid schedule needs a sweep or total_us".into()))?;
                fixed(tz.at(t)?)
            }
            (_, Some(_)) => Err(CliError::Validation(
                "a sweep needs a trapezoid schedule".into(),
            )),
            (ScheduleSource::Preset(name), None) => fixed(schedule_preset(&name)?),
            (ScheduleSource::File(path), None) => fixed(read_schedule(&path)?),
            (ScheduleSource::Optimized(path), None) => fixed(read_optimized(&path)?),
        }
    }

    /// Target pattern, explicit or the scenario's own.
    pub fn target(&self) -> Option<String> {
        self.target.clone().or_else(|| match self.scenario {
            ScenarioId::Z2chain => Some(presets::z2_target(9)),
            ScenarioId::Misloop => Some(presets::MAXIS_TARGET.into()),
            _ => None,
        })
    }

    pub fn parameterization(&self) -> CliResult<ScheduleParameterization> {
        if let Some(p) = &self.parameterization {
            return Ok(p.clone());
        }
        match self.scenario {
            ScenarioId::Z2chain => Ok(presets::z2_parameterization()),
            ScenarioId::Misloop => Ok(presets::maxis_parameterization()),
            _ => Err(CliError::Validation(
                "this scenario has no default parameterization; set \"parameterization\"".into(),
            )),
        }
    }
}

pub fn register_preset(name: &str) -> CliResult<AtomRegister> {
    Ok(match name {
        "single_atom" => presets::single_atom()?,
        "rabi_array" => presets::rabi_array()?,
        "bell_pair" => presets::bell_pair()?,
        "bell_array" => presets::bell_array()?,
        "z2_scaled" => presets::z2_scaled()?,
        "z2_full" => presets::z2_full()?,
        "square_loop" => presets::mis_loop()?,
        other => return Err(CliError::Validation(format!("unknown register preset {other:?}"))),
    })
}

pub fn schedule_preset(name: &str) -> CliResult<PulseSchedule> {
    Ok(match name {
        "z2_linear" => presets::z2_linear_schedule()?,
        "mis_linear" => presets::mis_linear_schedule()?,
        other => return Err(CliError::Validation(format!("unknown schedule preset {other:?}"))),
    })
}

fn read_schedule(path: &Path) -> CliResult<PulseSchedule> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
}

fn read_optimized(path: &Path) -> CliResult<PulseSchedule> {
    #[derive(Deserialize)]
    struct Record {
        schedule: PulseSchedule,
    }
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let r: Record =
        serde_json::from_str(&text).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
    Ok(r.schedule)
}

/// Profile named by `QSIM_PROFILE`, or the default one.
pub fn device_profile() -> CliResult<DeviceProfile> {
    match std::env::var_os("QSIM_PROFILE") {
        None => Ok(DeviceProfile::default()),
        Some(p) => {
            let path = PathBuf::from(p);
            let text = std::fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
            serde_json::from_str(&text).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
        }
    }
}
