//! `qsim optimize`: search the detuning schedule that maximizes a target
//! pattern and compare it with the starting linear drive.

use qsim_core::graph::unit_disk_graph;
use qsim_core::histogram::{rydberg_density, HistogramJson};
use qsim_core::optim::Termination;
use qsim_core::program::Program;
use qsim_core::pulse::{
    build_detuning_schedule, min_crossing_slope, optimize as run_optimizer, ObjectiveMode, OptimizerConfig,
    ScheduleParameterization, Target,
};
use qsim_core::units::{to_mhz, C6_RB87};
use qsim_core::{
    bitstring_label, blockade_radius, probabilities, validate_register, validate_schedule, BitstringHistogram,
    Evolver, PulseSchedule, ValidationReport,
};
use serde::Serialize;

use crate::artifacts::{num, Clock, OutDir, VERSION};
use crate::config::{device_profile, ScenarioConfig, SCHEMA};
use crate::error::{CliError, CliResult};
use crate::run::reject_invalid;

/// Detuning window, in units of Ω, searched for the slowdown of the
/// optimized drive.
pub const CROSSING_WINDOW: (f64, f64) = (0.0, 1.5);
const TOP_OUTCOMES: usize = 10;
const DRIVE_SAMPLES: usize = 400;

#[derive(Serialize)]
struct Outcome {
    bitstring: String,
    probability: f64,
}

#[derive(Serialize)]
struct DriveSummary {
    params: Vec<f64>,
    /// `[t μs, Δ MHz × 2π]` of each detuning knot.
    knots_mhz: Vec<(f64, f64)>,
    ramps_us: (f64, f64),
    target_probability: f64,
    argmax: String,
    target_is_argmax: bool,
    /// Target probability over the most probable other outcome.
    margin: f64,
    top: Vec<Outcome>,
    density: Vec<f64>,
}

fn summarize(
    params: &[f64],
    spec: &ScheduleParameterization,
    hist: &BitstringHistogram,
    target: &Target,
) -> CliResult<DriveSummary> {
    let n = hist.n();
    let ranked = hist.top(usize::MAX);
    let p_target = target.probability_in(hist);
    let argmax = bitstring_label(ranked[0].0, n);
    // the target may be a marginal, so compare against outcomes that do not match it
    let runner_up = ranked.iter().find(|(b, _)| !target.matches(*b)).map_or(0.0, |x| x.1);
    Ok(DriveSummary {
        params: params.to_vec(),
        knots_mhz: spec.detuning_knots(params)?.into_iter().map(|(t, d)| (t, to_mhz(d))).collect(),
        ramps_us: spec.ramps(params),
        target_probability: p_target,
        target_is_argmax: target.matches(ranked[0].0),
        argmax,
        margin: if runner_up > 0.0 { p_target / runner_up } else { f64::INFINITY },
        top: ranked
            .iter()
            .take(TOP_OUTCOMES)
            .map(|&(b, p)| Outcome {
                bitstring: bitstring_label(b, n),
                probability: p,
            })
            .collect(),
        density: rydberg_density(hist),
    })
}

#[derive(Serialize)]
struct Slowdown {
    window_delta_over_omega: (f64, f64),
    linear_slope_mhz_per_us: f64,
    optimized_min_slope_mhz_per_us: Option<f64>,
}

#[derive(Serialize)]
struct Record<'a> {
    schema: u32,
    version: &'a str,
    config: &'a ScenarioConfig,
    target: &'a str,
    parameterization: &'a ScheduleParameterization,
    optimizer: &'a OptimizerConfig,
    linear: DriveSummary,
    optimized: DriveSummary,
    improvement: f64,
    slowdown: Slowdown,
    trace: &'a [f64],
    best_so_far: Vec<f64>,
    iterations: usize,
    termination: Termination,
    schedule: &'a PulseSchedule,
    validation: ValidationReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    blockade_graph_edges: Option<Vec<(usize, usize)>>,
}

pub fn optimize(cfg: &ScenarioConfig, jobs: usize) -> CliResult<()> {
    let clock = Clock::start();
    let profile = device_profile()?;
    let (register, layout) = cfg.registers()?;
    reject_invalid(&validate_register(&layout, &profile))?;
    let target_label = cfg
        .target()
        .ok_or_else(|| CliError::Validation("optimize needs a \"target\" bitstring".into()))?;
    let target = Target::new(&register, &target_label)?;
    let spec = cfg.parameterization()?;
    spec.validate()?;

    let mut oc = cfg.optimizer.clone().unwrap_or_default();
    oc.integrator = cfg.integrator.clone();
    if let Some(shots) = cfg.shots {
        oc.mode = ObjectiveMode::Shots { shots, seed: cfg.seed };
    }
    let start = oc.initial.clone().unwrap_or_else(|| spec.linear_params());
    let linear_schedule = build_detuning_schedule(&start, &spec)?;
    reject_invalid(&validate_schedule(&linear_schedule, &profile))?;

    let result = run_optimizer(&spec, &register, &target_label, &oc)?;

    let evolver = Evolver::new(&register, oc.c6, cfg.integrator.clone())?;
    let linear_hist = probabilities(&evolver.evolve(&linear_schedule)?);
    let opt_hist = probabilities(&evolver.evolve(&result.schedule)?);
    let linear = summarize(&start, &spec, &linear_hist, &target)?;
    let optimized = summarize(&result.best_params, &spec, &opt_hist, &target)?;

    let (t_up, t_down) = spec.ramps(&start);
    let plateau = spec.total_time - t_up - t_down;
    let linear_slope = (start[spec.n_knots - 1] - start[0]) / plateau;
    let slowdown = Slowdown {
        window_delta_over_omega: CROSSING_WINDOW,
        linear_slope_mhz_per_us: to_mhz(linear_slope.abs()),
        optimized_min_slope_mhz_per_us: min_crossing_slope(
            &spec.detuning_knots(&result.best_params)?,
            spec.omega_max,
            CROSSING_WINDOW,
        )
        .map(to_mhz),
    };
    let blockade_graph_edges = match blockade_radius(spec.omega_max, 0.0, C6_RB87) {
        Ok(r) => Some(unit_disk_graph(&register, r)?.edges().to_vec()),
        Err(_) => None,
    };

    let out = OutDir::create(&cfg.output_dir())?;
    out.write_json("config.json", cfg)?;
    out.write_json("schedule.json", &result.schedule)?;
    out.write_json(
        "program.json",
        &Program {
            register: register.clone(),
            schedule: result.schedule.clone(),
        },
    )?;
    out.write_json("hist_linear.json", &HistogramJson::from(&linear_hist))?;
    out.write_json("hist_optimized.json", &HistogramJson::from(&opt_hist))?;
    write_plotdata(&out, &linear_schedule, &result.schedule, &result.trace, &result.best_so_far(), &linear, &optimized)?;

    let improvement = optimized.target_probability / linear.target_probability;
    out.write_json(
        "results.json",
        &Record {
            schema: SCHEMA,
            version: VERSION,
            config: cfg,
            target: &target_label,
            parameterization: &spec,
            optimizer: &oc,
            improvement,
            slowdown,
            trace: &result.trace,
            best_so_far: result.best_so_far(),
            iterations: result.iterations,
            termination: result.termination,
            schedule: &result.schedule,
            validation: validate_schedule(&result.schedule, &profile),
            linear,
            optimized,
            blockade_graph_edges,
        },
    )?;
    clock.write(&out, "optimize", jobs)
}

fn write_plotdata(
    out: &OutDir,
    linear: &PulseSchedule,
    optimized: &PulseSchedule,
    trace: &[f64],
    best: &[f64],
    lin: &DriveSummary,
    opt: &DriveSummary,
) -> CliResult<()> {
    let total = linear.total_time().min(optimized.total_time());
    let header = ["t_us", "omega_linear_mhz", "delta_linear_mhz", "omega_optimized_mhz", "delta_optimized_mhz"]
        .map(String::from)
        .to_vec();
    let mut rows = Vec::with_capacity(DRIVE_SAMPLES + 1);
    for k in 0..=DRIVE_SAMPLES {
        let t = total * k as f64 / DRIVE_SAMPLES as f64;
        let a = linear.value_at(t)?;
        let b = optimized.value_at(t)?;
        rows.push(vec![num(t), num(to_mhz(a.omega)), num(to_mhz(a.delta)), num(to_mhz(b.omega)), num(to_mhz(b.delta))]);
    }
    out.write_csv("plotdata_drive.csv", &header, &rows)?;

    let header = ["evaluation", "target_probability", "best_so_far"].map(String::from).to_vec();
    let rows: Vec<Vec<String>> = trace
        .iter()
        .zip(best)
        .enumerate()
        .map(|(k, (p, b))| vec![(k + 1).to_string(), num(*p), num(*b)])
        .collect();
    out.write_csv("plotdata_trace.csv", &header, &rows)?;

    let header = ["atom", "density_linear", "density_optimized"].map(String::from).to_vec();
    let rows: Vec<Vec<String>> = lin
        .density
        .iter()
        .zip(&opt.density)
        .enumerate()
        .map(|(j, (a, b))| vec![j.to_string(), num(*a), num(*b)])
        .collect();
    out.write_csv("plotdata_density.csv", &header, &rows)?;

    let header = ["rank", "bitstring_linear", "probability_linear", "bitstring_optimized", "probability_optimized"]
        .map(String::from)
        .to_vec();
    let rows: Vec<Vec<String>> = lin
        .top
        .iter()
        .zip(&opt.top)
        .enumerate()
        .map(|(k, (a, b))| {
            vec![(k + 1).to_string(), a.bitstring.clone(), num(a.probability), b.bitstring.clone(), num(b.probability)]
        })
        .collect();
    out.write_csv("plotdata_ranked.csv", &header, &rows)
}
