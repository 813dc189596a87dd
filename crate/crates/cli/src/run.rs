//! `qsim run`: evolve every point of a scenario and write its artifacts.

use qsim_core::fit::{fit_binomial, fit_damped_sinusoid, FitResult};
use qsim_core::graph::{classify_histogram, unit_disk_graph, IsClassification, MisEnumeration, UnitDiskGraph};
use qsim_core::histogram::{rydberg_density, sample_shots, HistogramJson};
use qsim_core::mitigation::{mitigate, ReadoutModel};
use qsim_core::pulse::Target;
use qsim_core::units::{to_mhz, C6_RB87};
use qsim_core::{
    bitstring_label, blockade_radius, probabilities, validate_register, validate_schedule, AtomRegister,
    BitstringHistogram, Evolver, PulseSchedule, ValidationReport,
};
use rayon::prelude::*;
use serde::Serialize;

use crate::artifacts::{num, Clock, OutDir, VERSION};
use crate::config::{device_profile, ScenarioConfig, ScenarioId, SCHEMA};
use crate::error::{CliError, CliResult};

/// Error bar assigned to exact probabilities when fitting them.
const EXACT_SIGMA: f64 = 0.01;
const TOP_OUTCOMES: usize = 10;
const RANKED_ROWS: usize = 20;
const BELL_REFERENCE_T: f64 = 2.3;

pub struct Prepared {
    pub register: AtomRegister,
    pub layout: AtomRegister,
    pub points: Vec<(f64, PulseSchedule)>,
    pub target: Option<Target>,
    pub report: ValidationReport,
}

/// Resolves the config and checks every register and schedule against the
/// active device profile.
pub fn prepare(cfg: &ScenarioConfig) -> CliResult<Prepared> {
    let profile = device_profile()?;
    let (register, layout) = cfg.registers()?;
    let points = cfg.points()?;
    let mut report = validate_register(&layout, &profile);
    if layout != register {
        report = report.merge(validate_register(&register, &profile));
    }
    for (_, s) in &points {
        report = report.merge(validate_schedule(s, &profile));
    }
    let target = cfg.target().map(|t| Target::new(&register, &t)).transpose()?;
    if let Some(n) = cfg.shots {
        if n == 0 {
            return Err(CliError::Validation("shots must be positive".into()));
        }
    }
    ReadoutModel::new(cfg.mitigation.epsilon)?;
    Ok(Prepared {
        register,
        layout,
        points,
        target,
        report,
    })
}

pub fn reject_invalid(report: &ValidationReport) -> CliResult<()> {
    if report.ok {
        return Ok(());
    }
    let lines: Vec<String> = report.violations.iter().map(|v| format!("{}: {}", v.rule, v.message)).collect();
    Err(CliError::Validation(format!("validation failed\n  {}", lines.join("\n  "))))
}

/// Independent, well mixed seed for point `k`.
fn point_seed(seed: u64, k: usize) -> u64 {
    let mut z = seed.wrapping_add((k as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

struct PointData {
    total_time: f64,
    seed: Option<u64>,
    raw: BitstringHistogram,
    mitigated: Option<(BitstringHistogram, f64)>,
    shift: Option<f64>,
}

#[derive(Serialize)]
struct Outcome {
    bitstring: String,
    probability: f64,
}

fn top(h: &BitstringHistogram, k: usize) -> Vec<Outcome> {
    h.top(k)
        .into_iter()
        .map(|(b, p)| Outcome {
            bitstring: bitstring_label(b, h.n()),
            probability: p,
        })
        .collect()
}

#[derive(Serialize)]
struct View {
    histogram: String,
    top: Vec<Outcome>,
    density: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    target_probability: Option<f64>,
}

#[derive(Serialize)]
struct PointRecord {
    index: usize,
    total_time_us: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    convergence_shift: Option<f64>,
    raw: View,
    #[serde(skip_serializing_if = "Option::is_none")]
    mitigated: Option<View>,
    #[serde(skip_serializing_if = "Option::is_none")]
    negative_mass: Option<f64>,
}

#[derive(Serialize)]
struct FitSummary {
    c: f64,
    a: f64,
    omega_mhz: f64,
    phi: f64,
    /// Absent when the fitted decay rate is zero.
    tau_us: Option<f64>,
    errors: FitErrors,
    chi2: f64,
    dof: usize,
    chi2_per_dof: f64,
    /// No damping resolvable within the data span.
    undamped: bool,
    error_model: &'static str,
}

#[derive(Serialize)]
struct FitErrors {
    c: f64,
    a: f64,
    omega_mhz: f64,
    phi: f64,
    tau_us: Option<f64>,
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

fn summarize_fit(f: &FitResult, span: f64, error_model: &'static str) -> FitSummary {
    FitSummary {
        c: f.params.c,
        a: f.params.a,
        omega_mhz: to_mhz(f.params.omega),
        phi: f.params.phi,
        tau_us: finite(f.params.tau),
        errors: FitErrors {
            c: f.errors.c,
            a: f.errors.a,
            omega_mhz: to_mhz(f.errors.omega),
            phi: f.errors.phi,
            tau_us: finite(f.errors.tau),
        },
        chi2: f.chi2,
        dof: f.dof,
        chi2_per_dof: f.chi2_per_dof,
        undamped: !f.params.tau.is_finite() || f.params.tau > 1e3 * span,
        error_model,
    }
}

#[derive(Serialize)]
struct FitOutcome {
    #[serde(skip_serializing_if = "Option::is_none")]
    fit: Option<FitSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

fn rabi_fit(times: &[f64], series: &[f64], shots: Option<u64>) -> FitOutcome {
    let span = times.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - times.iter().cloned().fold(f64::INFINITY, f64::min);
    let result = match shots {
        Some(n) => fit_binomial(times, series, n).map(|f| summarize_fit(&f, span, "binomial")),
        None => fit_damped_sinusoid(times, series, &vec![EXACT_SIGMA; times.len()])
            .map(|f| summarize_fit(&f, span, "uniform_0.01")),
    };
    match result {
        Ok(f) => FitOutcome {
            fit: Some(f),
            error: None,
        },
        Err(e) => FitOutcome {
            fit: None,
            error: Some(e.to_string()),
        },
    }
}

#[derive(Serialize)]
struct PairPopulations {
    total_time_us: f64,
    p00: f64,
    p01: f64,
    p10: f64,
    p11: f64,
}

fn pair_populations(t: f64, h: &BitstringHistogram) -> PairPopulations {
    PairPopulations {
        total_time_us: t,
        p00: h.probability(0b00),
        p01: h.probability(0b01),
        p10: h.probability(0b10),
        p11: h.probability(0b11),
    }
}

#[derive(Serialize)]
struct BellSummary {
    /// Sweep point closest to the reference duration.
    nearest_reference: PairPopulations,
    /// Sweep point with the largest `p00 + p11`.
    best_correlated: PairPopulations,
}

fn bell_summary(points: &[(f64, &BitstringHistogram)]) -> BellSummary {
    let nearest = points
        .iter()
        .min_by(|a, b| (a.0 - BELL_REFERENCE_T).abs().total_cmp(&(b.0 - BELL_REFERENCE_T).abs()))
        .expect("nonempty sweep");
    let best = points
        .iter()
        .max_by(|a, b| {
            let s = |h: &BitstringHistogram| h.probability(0) + h.probability(3);
            s(a.1).total_cmp(&s(b.1))
        })
        .expect("nonempty sweep");
    BellSummary {
        nearest_reference: pair_populations(nearest.0, nearest.1),
        best_correlated: pair_populations(best.0, best.1),
    }
}

#[derive(Serialize)]
struct GraphSummary {
    radius_um: f64,
    graph: UnitDiskGraph,
    is_cycle: bool,
    max_cardinality: usize,
    maximum_sets: Vec<String>,
    /// Number of maximal independent sets by cardinality.
    maximal_counts: std::collections::BTreeMap<usize, usize>,
    /// Classification of the last point.
    raw: IsClassification,
    #[serde(skip_serializing_if = "Option::is_none")]
    mitigated: Option<IsClassification>,
}

fn truncate_outcomes(mut c: IsClassification) -> IsClassification {
    c.outcomes.truncate(RANKED_ROWS);
    c
}

fn graph_summary(register: &AtomRegister, schedule: &PulseSchedule, last: &PointData) -> CliResult<GraphSummary> {
    let radius = blockade_radius(schedule.omega().max_value(), 0.0, C6_RB87)?;
    let graph = unit_disk_graph(register, radius)?;
    let MisEnumeration {
        max_cardinality,
        maximum_sets,
        maximal_counts,
    } = graph.enumerate_max_independent_sets()?;
    Ok(GraphSummary {
        radius_um: radius,
        is_cycle: graph.is_cycle(),
        max_cardinality,
        maximum_sets: maximum_sets.iter().map(|&s| bitstring_label(s, graph.n())).collect(),
        maximal_counts,
        raw: truncate_outcomes(classify_histogram(&graph, &last.raw)?),
        mitigated: last
            .mitigated
            .as_ref()
            .map(|(h, _)| classify_histogram(&graph, h).map(truncate_outcomes))
            .transpose()?,
        graph,
    })
}

#[derive(Serialize, Default)]
struct Analysis {
    #[serde(skip_serializing_if = "Option::is_none")]
    rabi_fit: Option<FitOutcome>,
    #[serde(skip_serializing_if = "Option::is_none")]
    rabi_fit_mitigated: Option<FitOutcome>,
    #[serde(skip_serializing_if = "Option::is_none")]
    bell: Option<BellSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    bell_mitigated: Option<BellSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    graph: Option<GraphSummary>,
}

#[derive(Serialize)]
struct Results<'a> {
    schema: u32,
    version: &'a str,
    scenario: ScenarioId,
    config: &'a ScenarioConfig,
    register: &'a AtomRegister,
    layout: &'a AtomRegister,
    validation: &'a ValidationReport,
    points: Vec<PointRecord>,
    analysis: Analysis,
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

pub fn run(cfg: &ScenarioConfig, jobs: usize) -> CliResult<()> {
    let clock = Clock::start();
    let prep = prepare(cfg)?;
    reject_invalid(&prep.report)?;
    let evolver = Evolver::new(&prep.register, C6_RB87, cfg.integrator.clone())?;
    let model = ReadoutModel::new(cfg.mitigation.epsilon)?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| CliError::Numerical(e.to_string()))?;
    let data: Vec<PointData> = pool.install(|| {
        prep.points
            .par_iter()
            .enumerate()
            .map(|(k, (t, schedule))| -> CliResult<PointData> {
                let (state, shift) = if cfg.check_convergence {
                    let (s, d) = evolver.evolve_converged(schedule)?;
                    (s, Some(d))
                } else {
                    (evolver.evolve(schedule)?, None)
                };
                let exact = probabilities(&state);
                let seed = cfg.shots.map(|_| point_seed(cfg.seed, k));
                let raw = match (cfg.shots, seed) {
                    (Some(n), Some(s)) => sample_shots(&exact, n, s)?,
                    _ => exact,
                };
                let mitigated = if cfg.mitigation.enabled {
                    let m = mitigate(&raw, model, cfg.mitigation.method)?;
                    Some((m.histogram, m.negative_mass))
                } else {
                    None
                };
                Ok(PointData {
                    total_time: *t,
                    seed,
                    raw,
                    mitigated,
                    shift,
                })
            })
            .collect::<CliResult<Vec<_>>>()
    })?;

    let out = OutDir::create(&cfg.output_dir())?;
    out.write_json("config.json", cfg)?;

    let target_p = |h: &BitstringHistogram| prep.target.as_ref().map(|t| t.probability_in(h));
    let mut records = Vec::with_capacity(data.len());
    for (k, d) in data.iter().enumerate() {
        let raw_name = format!("hist_{k:03}.json");
        out.write_json(&raw_name, &HistogramJson::from(&d.raw))?;
        let mitigated = match &d.mitigated {
            Some((h, _)) => {
                let name = format!("hist_{k:03}_mitigated.json");
                out.write_json(&name, &HistogramJson::from(h))?;
                Some(View {
                    histogram: name,
                    top: top(h, TOP_OUTCOMES),
                    density: rydberg_density(h),
                    target_probability: target_p(h),
                })
            }
            None => None,
        };
        records.push(PointRecord {
            index: k,
            total_time_us: d.total_time,
            seed: d.seed,
            convergence_shift: d.shift,
            raw: View {
                histogram: raw_name,
                top: top(&d.raw, TOP_OUTCOMES),
                density: rydberg_density(&d.raw),
                target_probability: target_p(&d.raw),
            },
            mitigated,
            negative_mass: d.mitigated.as_ref().map(|m| m.1),
        });
    }

    let mut analysis = Analysis::default();
    let times: Vec<f64> = data.iter().map(|d| d.total_time).collect();
    match cfg.scenario {
        ScenarioId::Rabi if data.len() > 1 => {
            let series: Vec<f64> = data.iter().map(|d| mean(&rydberg_density(&d.raw))).collect();
            analysis.rabi_fit = Some(rabi_fit(&times, &series, cfg.shots));
            if cfg.mitigation.enabled {
                let series: Vec<f64> = data
                    .iter()
                    .map(|d| mean(&rydberg_density(&d.mitigated.as_ref().expect("mitigated").0)))
                    .collect();
                analysis.rabi_fit_mitigated = Some(rabi_fit(&times, &series, cfg.shots));
            }
        }
        ScenarioId::Bell if prep.register.len() == 2 => {
            let raw: Vec<_> = data.iter().map(|d| (d.total_time, &d.raw)).collect();
            analysis.bell = Some(bell_summary(&raw));
            if cfg.mitigation.enabled {
                let m: Vec<_> = data
                    .iter()
                    .map(|d| (d.total_time, &d.mitigated.as_ref().expect("mitigated").0))
                    .collect();
                analysis.bell_mitigated = Some(bell_summary(&m));
            }
        }
        ScenarioId::Misloop => {
            let last = data.last().expect("at least one point");
            let schedule = &prep.points.last().expect("at least one point").1;
            analysis.graph = Some(graph_summary(&prep.register, schedule, last)?);
        }
        _ => {}
    }

    write_plotdata(&out, &data, analysis.graph.as_ref().map(|g| &g.graph))?;
    out.write_json(
        "results.json",
        &Results {
            schema: SCHEMA,
            version: VERSION,
            scenario: cfg.scenario,
            config: cfg,
            register: &prep.register,
            layout: &prep.layout,
            validation: &prep.report,
            points: records,
            analysis,
        },
    )?;
    clock.write(&out, "run", jobs)
}

fn write_plotdata(out: &OutDir, data: &[PointData], graph: Option<&UnitDiskGraph>) -> CliResult<()> {
    let n = data[0].raw.n();
    let mitigated = data[0].mitigated.is_some();

    if data.len() > 1 {
        // all outcomes for small registers, otherwise the four most probable
        // over the whole sweep
        let tracked: Vec<u64> = if n <= 3 {
            (0..1u64 << n).collect()
        } else {
            let mut best = std::collections::BTreeMap::<u64, f64>::new();
            for d in data {
                for (b, p) in d.raw.top(4) {
                    let e = best.entry(b).or_insert(0.0);
                    *e = e.max(p);
                }
            }
            let mut v: Vec<(u64, f64)> = best.into_iter().collect();
            v.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
            v.into_iter().take(4).map(|x| x.0).collect()
        };
        let mut header = vec!["total_time_us".to_string()];
        header.extend(tracked.iter().map(|&b| format!("p_{}", bitstring_label(b, n))));
        if mitigated {
            header.extend(tracked.iter().map(|&b| format!("mitigated_p_{}", bitstring_label(b, n))));
        }
        let rows: Vec<Vec<String>> = data
            .iter()
            .map(|d| {
                let mut r = vec![num(d.total_time)];
                r.extend(tracked.iter().map(|&b| num(d.raw.probability(b))));
                if let Some((h, _)) = &d.mitigated {
                    r.extend(tracked.iter().map(|&b| num(h.probability(b))));
                }
                r
            })
            .collect();
        out.write_csv("plotdata_population.csv", &header, &rows)?;
    }

    let mut header: Vec<String> = ["point", "total_time_us", "atom", "density"].map(String::from).to_vec();
    if mitigated {
        header.push("mitigated_density".into());
    }
    let mut rows = Vec::new();
    for (k, d) in data.iter().enumerate() {
        let raw = rydberg_density(&d.raw);
        let mit = d.mitigated.as_ref().map(|(h, _)| rydberg_density(h));
        for (j, &p) in raw.iter().enumerate() {
            let mut r = vec![k.to_string(), num(d.total_time), j.to_string(), num(p)];
            if let Some(m) = &mit {
                r.push(num(m[j]));
            }
            rows.push(r);
        }
    }
    out.write_csv("plotdata_density.csv", &header, &rows)?;

    let mut header: Vec<String> = ["point", "total_time_us", "rank", "bitstring", "probability"]
        .map(String::from)
        .to_vec();
    if graph.is_some() {
        header.push("independent".into());
    }
    let mut rows = Vec::new();
    for (k, d) in data.iter().enumerate() {
        for (rank, (b, p)) in d.raw.top(RANKED_ROWS).into_iter().enumerate() {
            let mut r = vec![
                k.to_string(),
                num(d.total_time),
                (rank + 1).to_string(),
                bitstring_label(b, n),
                num(p),
            ];
            if let Some(g) = graph {
                r.push(g.is_independent_set(b).to_string());
            }
            rows.push(r);
        }
    }
    out.write_csv("plotdata_ranked.csv", &header, &rows)
}
