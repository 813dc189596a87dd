//! Constrained optimization by linear approximation (COBYLA).
//!
//! The objective and every constraint `c_k(x) ≥ 0` are modelled linearly by
//! interpolation on a simplex of `n + 1` evaluated points. Each iteration
//! either improves the simplex geometry or takes a step that minimizes the
//! linear objective model subject to the linearized constraints inside a
//! ball of radius `ρ`. Steps are accepted on the merit function
//! `f + μ·max(0, −min_k c_k)`, and `ρ` shrinks from `rhobeg` to `rhoend`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{check_start, Bounds, LocalOptimizer, OptimResult, Recorder, Termination};
use crate::error::Result;

// Simplex acceptability and step-size constants.
const ALPHA: f64 = 0.25;
const BETA: f64 = 2.1;
const GAMMA: f64 = 0.5;
const DELTA: f64 = 1.1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cobyla {
    /// Initial trust radius. For box-bounded problems this is a fraction of
    /// each parameter's range.
    pub rhobeg: f64,
    /// Final trust radius, in the same units as `rhobeg`.
    pub rhoend: f64,
    pub max_evaluations: usize,
}

impl Default for Cobyla {
    fn default() -> Self {
        Self {
            rhobeg: 0.1,
            rhoend: 1e-3,
            max_evaluations: 150,
        }
    }
}

/// Result of [`Cobyla::minimize_constrained`]: the final optimal vertex.
#[derive(Clone, Debug, PartialEq)]
pub struct ConstrainedResult {
    pub x: Vec<f64>,
    pub f: f64,
    /// `max(0, −min_k c_k(x))`.
    pub max_violation: f64,
    pub evaluations: usize,
    pub termination: Termination,
}

#[derive(Clone, Debug)]
struct Vertex {
    x: DVector<f64>,
    f: f64,
    c: Vec<f64>,
    res: f64,
}

fn violation(c: &[f64]) -> f64 {
    // `+ 0.0` turns a −0.0 into 0.0
    c.iter().fold(0.0, |r: f64, &v| r.max(-v)) + 0.0
}

struct Evaluator<'a> {
    eval: &'a mut dyn FnMut(&[f64], &mut [f64]) -> Result<f64>,
    m: usize,
    count: usize,
}

impl Evaluator<'_> {
    fn eval(&mut self, x: DVector<f64>) -> Result<Vertex> {
        let mut c = vec![0.0; self.m];
        let f = (self.eval)(x.as_slice(), &mut c)?;
        self.count += 1;
        Ok(Vertex {
            res: violation(&c),
            x,
            f,
            c,
        })
    }
}

impl Cobyla {
    /// Minimizes `f(x)` subject to `c_k(x) ≥ 0`, `k < m`. The callback
    /// writes the constraint values into its second argument and returns
    /// the objective.
    pub fn minimize_constrained(
        &self,
        x0: &[f64],
        m: usize,
        eval: &mut dyn FnMut(&[f64], &mut [f64]) -> Result<f64>,
    ) -> Result<ConstrainedResult> {
        let n = x0.len();
        let rhoend = self.rhoend.min(self.rhobeg);
        let mut ev = Evaluator { eval, m, count: 0 };
        let mut rho = self.rhobeg;
        let mut parmu = 0.0;

        let mut best = ev.eval(DVector::from_column_slice(x0))?;
        let mut others: Vec<Vertex> = Vec::with_capacity(n);
        let finish = |best: Vertex, count: usize, termination| ConstrainedResult {
            x: best.x.as_slice().to_vec(),
            f: best.f,
            max_violation: best.res,
            evaluations: count,
            termination,
        };

        for j in 0..n {
            if ev.count >= self.max_evaluations {
                return Ok(finish(best, ev.count, Termination::MaxEvaluations));
            }
            let mut x = best.x.clone();
            x[j] += rho;
            let v = ev.eval(x)?;
            if v.f < best.f {
                others.push(std::mem::replace(&mut best, v));
            } else {
                others.push(v);
            }
        }
        if n == 0 {
            return Ok(finish(best, ev.count, Termination::Converged));
        }

        let mut skip_geometry = false;
        loop {
            // Make the vertex with the least merit the origin of the simplex.
            let phi = |v: &Vertex| v.f + parmu * v.res;
            let mut chosen = None;
            let (mut phimin, mut resmin) = (phi(&best), best.res);
            for (j, v) in others.iter().enumerate() {
                let p = phi(v);
                if p < phimin || (p == phimin && parmu == 0.0 && v.res < resmin) {
                    chosen = Some(j);
                    phimin = p;
                    resmin = v.res;
                }
            }
            if let Some(j) = chosen {
                std::mem::swap(&mut best, &mut others[j]);
            }

            let sim = DMatrix::from_fn(n, n, |i, j| others[j].x[i] - best.x[i]);
            let Some(simi) = sim.clone().try_inverse() else {
                return Ok(finish(best, ev.count, Termination::RoundingErrors));
            };
            let error = (&simi * &sim - DMatrix::identity(n, n)).abs().max();
            if !(error <= 0.1) {
                return Ok(finish(best, ev.count, Termination::RoundingErrors));
            }

            // Linear models: δ_j = s_j · g, so g = S⁻ᵀ δ.
            let simi_t = simi.transpose();
            let gf = &simi_t * DVector::from_fn(n, |j, _| others[j].f - best.f);
            let gc: Vec<DVector<f64>> = (0..m)
                .map(|k| &simi_t * DVector::from_fn(n, |j, _| others[j].c[k] - best.c[k]))
                .collect();
            let linear_violation = |d: &DVector<f64>| {
                gc.iter()
                    .zip(&best.c)
                    .fold(0.0, |r: f64, (g, c)| r.max(-(c + g.dot(d))))
            };

            // vsig: distance of each vertex from the opposite face; veta: edge length from the origin.
            let vsig: Vec<f64> = (0..n).map(|j| 1.0 / simi.row(j).norm()).collect();
            let veta: Vec<f64> = (0..n).map(|j| sim.column(j).norm()).collect();
            let acceptable = veta.iter().all(|&e| e <= BETA * rho) && vsig.iter().all(|&s| s >= ALPHA * rho);

            if !skip_geometry && !acceptable {
                let (jlong, elong) = argmax(&veta);
                let jdrop = if elong > BETA * rho { jlong } else { argmin(&vsig).0 };
                let mut dx: DVector<f64> = simi.row(jdrop).transpose() * (GAMMA * rho * vsig[jdrop]);
                let up = best.f + gf.dot(&dx) + parmu * linear_violation(&dx);
                let down = best.f - gf.dot(&dx) + parmu * linear_violation(&(-&dx));
                if up > down {
                    dx = -dx;
                }
                if ev.count >= self.max_evaluations {
                    return Ok(finish(best, ev.count, Termination::MaxEvaluations));
                }
                others[jdrop] = ev.eval(&best.x + dx)?;
                skip_geometry = true;
                continue;
            }

            let dx = trust_region_step(&gc, &best.c, &gf, rho);
            let mut reduce = dx.norm() < 0.5 * rho;
            if reduce {
                skip_geometry = true;
            } else {
                let resnew = linear_violation(&dx);
                let predicted_df = gf.dot(&dx);
                let prerec = best.res - resnew;
                let barmu = if prerec > 0.0 { predicted_df / prerec } else { 0.0 };
                if parmu < 1.5 * barmu {
                    parmu = 2.0 * barmu;
                    let p0 = best.f + parmu * best.res;
                    let origin_changes = others.iter().any(|v| {
                        let p = v.f + parmu * v.res;
                        p < p0 || (p == p0 && parmu == 0.0 && v.res < best.res)
                    });
                    if origin_changes {
                        continue;
                    }
                }
                let mut prerem = parmu * prerec - predicted_df;

                if ev.count >= self.max_evaluations {
                    return Ok(finish(best, ev.count, Termination::MaxEvaluations));
                }
                let trial = ev.eval(&best.x + &dx)?;
                let mut trured = (best.f + parmu * best.res) - (trial.f + parmu * trial.res);
                if parmu == 0.0 && trial.f == best.f {
                    prerem = prerec;
                    trured = best.res - trial.res;
                }

                // Pick the vertex the trial point replaces. A failed step may
                // still be kept if it improves the simplex.
                let sigma = &simi * &dx;
                let mut threshold = if trured <= 0.0 { 1.0 } else { 0.0 };
                let mut jdrop = None;
                let mut sigbar = vec![0.0; n];
                for j in 0..n {
                    let t = sigma[j].abs();
                    if t > threshold {
                        jdrop = Some(j);
                        threshold = t;
                    }
                    sigbar[j] = t * vsig[j];
                }
                let mut edgmax = DELTA * rho;
                let mut far = None;
                for j in 0..n {
                    if sigbar[j] >= ALPHA * rho || sigbar[j] >= vsig[j] {
                        let t = if trured > 0.0 {
                            (&dx - sim.column(j)).norm()
                        } else {
                            veta[j]
                        };
                        if t > edgmax {
                            far = Some(j);
                            edgmax = t;
                        }
                    }
                }
                if far.is_some() {
                    jdrop = far;
                }
                match jdrop {
                    None => reduce = true,
                    Some(j) => {
                        others[j] = trial;
                        if trured > 0.0 && trured >= 0.1 * prerem {
                            skip_geometry = false;
                            continue;
                        }
                        reduce = true;
                    }
                }
            }

            if reduce {
                if !acceptable {
                    skip_geometry = false;
                    continue;
                }
                if rho <= rhoend {
                    return Ok(finish(best, ev.count, Termination::Converged));
                }
                rho *= 0.5;
                if rho <= 1.5 * rhoend {
                    rho = rhoend;
                }
                if parmu > 0.0 {
                    parmu = reduced_penalty(parmu, &best, &others, m);
                }
                skip_geometry = false;
            }
        }
    }
}

/// Lowers the penalty parameter when the constraint values spread over the
/// simplex make a smaller one sufficient.
fn reduced_penalty(parmu: f64, best: &Vertex, others: &[Vertex], m: usize) -> f64 {
    let spread = |value: &dyn Fn(&Vertex) -> f64| {
        let mut lo = value(best);
        let mut hi = lo;
        for v in others {
            lo = lo.min(value(v));
            hi = hi.max(value(v));
        }
        (lo, hi)
    };
    let mut denom: f64 = 0.0;
    for k in 0..m {
        let (cmin, cmax) = spread(&|v: &Vertex| v.c[k]);
        if cmin < 0.5 * cmax {
            let t = cmax.max(0.0) - cmin;
            denom = if denom <= 0.0 { t } else { denom.min(t) };
        }
    }
    let (fmin, fmax) = spread(&|v: &Vertex| v.f);
    if denom == 0.0 {
        0.0
    } else if fmax - fmin < parmu * denom {
        (fmax - fmin) / denom
    } else {
        parmu
    }
}

fn argmax(v: &[f64]) -> (usize, f64) {
    v.iter()
        .copied()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |a, (i, x)| if x > a.1 { (i, x) } else { a })
}

fn argmin(v: &[f64]) -> (usize, f64) {
    v.iter()
        .copied()
        .enumerate()
        .fold((0, f64::INFINITY), |a, (i, x)| if x < a.1 { (i, x) } else { a })
}

/// Approximate minimizer of `g·d` subject to `c_k + a_k·d ≥ 0` and
/// `‖d‖ ≤ ρ`. If the linearized constraints cannot all be met, `d` first
/// minimizes their largest violation, and that level is then kept while the
/// objective model is decreased.
fn trust_region_step(a: &[DVector<f64>], c: &[f64], g: &DVector<f64>, rho: f64) -> DVector<f64> {
    let n = g.len();
    let v0 = violation(c);
    let mut d = DVector::zeros(n);
    let mut level = 0.0;
    if v0 > 0.0 {
        // Stage 1 in (d, v): minimize v with a_k·d + v ≥ −c_k and v ≥ 0.
        let mut rows: Vec<DVector<f64>> = a
            .iter()
            .map(|ak| DVector::from_fn(n + 1, |i, _| if i < n { ak[i] } else { 1.0 }))
            .collect();
        let mut rhs: Vec<f64> = c.iter().map(|ck| -ck).collect();
        rows.push(DVector::from_fn(n + 1, |i, _| if i < n { 0.0 } else { 1.0 }));
        rhs.push(0.0);
        let mut z = DVector::zeros(n + 1);
        z[n] = v0;
        let e_v = DVector::from_fn(n + 1, |i, _| if i < n { 0.0 } else { 1.0 });
        active_set_descent(&rows, &rhs, &e_v, &mut z, n, rho);
        d = z.rows(0, n).into_owned();
        level = z[n].max(0.0);
    }
    // Stage 2: minimize g·d with the violation level held.
    let rhs: Vec<f64> = c.iter().map(|ck| -ck - level).collect();
    active_set_descent(a, &rhs, g, &mut d, n, rho);
    d
}

/// Active-set steepest descent for `min g·z` subject to `rows_k·z ≥ rhs_k`
/// and `‖z[..nd]‖ ≤ ρ`, from a feasible `z`. Stops at a constrained
/// stationary point or when the ball boundary is reached.
fn active_set_descent(rows: &[DVector<f64>], rhs: &[f64], g: &DVector<f64>, z: &mut DVector<f64>, nd: usize, rho: f64) {
    let p = z.len();
    let gnorm = g.norm();
    if gnorm == 0.0 {
        return;
    }
    let slack = |k: usize, z: &DVector<f64>| rows[k].dot(z) - rhs[k];
    let tol = 1e-12 * (1.0 + z.norm());

    let mut active: Vec<usize> = Vec::new();
    for k in 0..rows.len() {
        if slack(k, z) <= tol && active.len() < p && independent_of(&rows[k], rows, &active) {
            active.push(k);
        }
    }

    for _ in 0..10 * (rows.len() + p) + 10 {
        let (s, lambda) = project_descent(g, rows, &active);
        if s.norm() <= 1e-12 * gnorm {
            // Stationary on the active face: release the most negative multiplier.
            let (i, lmin) = argmin(lambda.as_slice());
            if !active.is_empty() && lmin < -1e-12 * gnorm {
                active.remove(i);
                continue;
            }
            return;
        }

        let sd = s.rows(0, nd);
        let zd = z.rows(0, nd);
        let ss = sd.norm_squared();
        let mut alpha = if ss > 0.0 {
            let b = zd.dot(&sd);
            let c = zd.norm_squared() - rho * rho;
            let disc = (b * b - ss * c).max(0.0);
            ((-b + disc.sqrt()) / ss).max(0.0)
        } else {
            f64::INFINITY
        };
        let mut block = None;
        for k in 0..rows.len() {
            if active.contains(&k) {
                continue;
            }
            let rate = rows[k].dot(&s);
            if rate < 0.0 {
                let step = slack(k, z).max(0.0) / -rate;
                if step < alpha {
                    alpha = step;
                    block = Some(k);
                }
            }
        }
        if !alpha.is_finite() {
            return;
        }
        *z += alpha * &s;
        match block {
            None => return,
            Some(k) => active.push(k),
        }
    }
}

/// `s = −(g − Aᵀλ)` with `λ` the least-squares multipliers of the active rows.
fn project_descent(g: &DVector<f64>, rows: &[DVector<f64>], active: &[usize]) -> (DVector<f64>, DVector<f64>) {
    if active.is_empty() {
        return (-g, DVector::zeros(0));
    }
    let at = DMatrix::from_fn(g.len(), active.len(), |i, j| rows[active[j]][i]);
    let lambda = at
        .clone()
        .svd(true, true)
        .solve(g, 1e-13)
        .unwrap_or_else(|_| DVector::zeros(active.len()));
    (-(g - at * &lambda), lambda)
}

fn independent_of(row: &DVector<f64>, rows: &[DVector<f64>], active: &[usize]) -> bool {
    let (r, _) = project_descent(row, rows, active);
    r.norm() > 1e-10 * row.norm()
}

impl LocalOptimizer for Cobyla {
    fn name(&self) -> &'static str {
        "cobyla"
    }

    /// Works in unit-box coordinates; the bounds become the constraints
    /// `u_i ≥ 0` and `1 − u_i ≥ 0`. The objective is evaluated at the point
    /// clamped into the box, so a proposal outside it is only penalized
    /// through its constraint violation.
    fn minimize(
        &self,
        objective: &mut dyn FnMut(&[f64]) -> Result<f64>,
        x0: &[f64],
        bounds: &Bounds,
    ) -> Result<OptimResult> {
        check_start(x0, bounds)?;
        let n = bounds.dim();
        let mut rec = Recorder::new(objective, bounds);
        let u0 = bounds.to_unit(x0);
        let mut eval = |u: &[f64], c: &mut [f64]| -> Result<f64> {
            for i in 0..n {
                c[2 * i] = u[i];
                c[2 * i + 1] = 1.0 - u[i];
            }
            rec.eval_unit(u)
        };
        let out = self.minimize_constrained(&u0, 2 * n, &mut eval)?;
        Ok(rec.finish(out.termination))
    }
}
