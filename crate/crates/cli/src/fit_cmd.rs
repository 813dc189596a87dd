//! `qsim fit`: damped-sinusoid fit of a `t,p,sigma` table.

use std::path::Path;

use qsim_core::fit::{fit_damped_sinusoid, FitResult};
use qsim_core::units::to_mhz;
use serde::{Deserialize, Serialize};

use crate::artifacts::{num, Clock, OutDir, VERSION};
use crate::error::{CliError, CliResult};

#[derive(Deserialize)]
struct Row {
    t: f64,
    p: f64,
    sigma: f64,
}

#[derive(Serialize)]
struct FitArtifact<'a> {
    version: &'a str,
    model: &'a str,
    input: String,
    points: usize,
    fit: &'a FitResult,
    /// Fitted angular frequency as a "MHz × 2π" multiplier.
    omega_mhz: f64,
    /// Absent for an undamped fit.
    tau_us: Option<f64>,
}

pub fn read_table(path: &Path) -> CliResult<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| CliError::io(path, e))?;
    let (mut t, mut p, mut s) = (Vec::new(), Vec::new(), Vec::new());
    for (i, row) in reader.deserialize::<Row>().enumerate() {
        let row = row.map_err(|e| CliError::Validation(format!("{} row {}: {e}", path.display(), i + 1)))?;
        t.push(row.t);
        p.push(row.p);
        s.push(row.sigma);
    }
    if t.is_empty() {
        return Err(CliError::Validation(format!("{}: no data rows", path.display())));
    }
    Ok((t, p, s))
}

pub fn fit(input: &Path, model: &str, out_dir: &Path) -> CliResult<()> {
    let clock = Clock::start();
    let (t, p, s) = read_table(input)?;
    let result = fit_damped_sinusoid(&t, &p, &s)?;
    let out = OutDir::create(out_dir)?;
    out.write_json(
        "fit.json",
        &FitArtifact {
            version: VERSION,
            model,
            input: input.display().to_string(),
            points: t.len(),
            fit: &result,
            omega_mhz: to_mhz(result.params.omega),
            tau_us: result.params.tau.is_finite().then_some(result.params.tau),
        },
    )?;
    let header = ["t", "p", "sigma", "model", "residual", "pull"].map(String::from).to_vec();
    let rows: Vec<Vec<String>> = t
        .iter()
        .zip(&p)
        .zip(&s)
        .map(|((&t, &p), &s)| {
            let m = result.params.eval(t);
            vec![num(t), num(p), num(s), num(m), num(p - m), num((p - m) / s)]
        })
        .collect();
    out.write_csv("residuals.csv", &header, &rows)?;
    clock.write(&out, "fit", 1)
}
