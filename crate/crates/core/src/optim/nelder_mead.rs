//! Nelder–Mead simplex search in unit-box coordinates, with every trial
//! point projected into the box.

use serde::{Deserialize, Serialize};

use super::{check_start, Bounds, LocalOptimizer, OptimResult, Recorder, Termination};
use crate::error::Result;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NelderMead {
    /// Edge of the initial simplex as a fraction of each parameter's range.
    pub initial_step: f64,
    /// Stop when every vertex is within this distance (unit coordinates) of
    /// the best one.
    pub x_tolerance: f64,
    pub max_evaluations: usize,
}

impl Default for NelderMead {
    fn default() -> Self {
        Self {
            initial_step: 0.1,
            x_tolerance: 1e-3,
            max_evaluations: 150,
        }
    }
}

fn project(u: Vec<f64>) -> Vec<f64> {
    u.into_iter().map(|v| v.clamp(0.0, 1.0)).collect()
}

fn affine(a: &[f64], b: &[f64], t: f64) -> Vec<f64> {
    // a + t (b − a)
    a.iter().zip(b).map(|(x, y)| x + t * (y - x)).collect()
}

impl LocalOptimizer for NelderMead {
    fn name(&self) -> &'static str {
        "nelder_mead"
    }

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

        let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
        let f0 = rec.eval_unit(&u0)?;
        simplex.push((u0.clone(), f0));
        for i in 0..n {
            if rec.count() >= self.max_evaluations {
                return Ok(rec.finish(Termination::MaxEvaluations));
            }
            let mut u = u0.clone();
            // step away from the nearer face so the vertex stays distinct after projection
            u[i] += if u[i] + self.initial_step <= 1.0 { self.initial_step } else { -self.initial_step };
            let u = project(u);
            let f = rec.eval_unit(&u)?;
            simplex.push((u, f));
        }

        loop {
            simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
            let best = simplex[0].0.clone();
            let size = simplex
                .iter()
                .skip(1)
                .map(|(u, _)| u.iter().zip(&best).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
                .fold(0.0, f64::max);
            if size <= self.x_tolerance {
                return Ok(rec.finish(Termination::Converged));
            }
            if rec.count() >= self.max_evaluations {
                return Ok(rec.finish(Termination::MaxEvaluations));
            }

            let mut centroid = vec![0.0; n];
            for (u, _) in &simplex[..n] {
                for (c, v) in centroid.iter_mut().zip(u) {
                    *c += v / n as f64;
                }
            }
            let (worst, f_worst) = simplex[n].clone();
            let f_second = simplex[n - 1].1;
            let f_best = simplex[0].1;

            let reflected = project(affine(&centroid, &worst, -1.0));
            let f_r = rec.eval_unit(&reflected)?;
            if f_r < f_best {
                if rec.count() >= self.max_evaluations {
                    simplex[n] = (reflected, f_r);
                    continue;
                }
                let expanded = project(affine(&centroid, &worst, -2.0));
                let f_e = rec.eval_unit(&expanded)?;
                simplex[n] = if f_e < f_r { (expanded, f_e) } else { (reflected, f_r) };
                continue;
            }
            if f_r < f_second {
                simplex[n] = (reflected, f_r);
                continue;
            }
            if rec.count() >= self.max_evaluations {
                continue;
            }
            let (contracted, f_c) = if f_r < f_worst {
                let u = project(affine(&centroid, &worst, -0.5));
                let f = rec.eval_unit(&u)?;
                (u, f)
            } else {
                let u = project(affine(&centroid, &worst, 0.5));
                let f = rec.eval_unit(&u)?;
                (u, f)
            };
            if f_c < f_worst.min(f_r) {
                simplex[n] = (contracted, f_c);
                continue;
            }
            // shrink toward the best vertex
            for k in 1..=n {
                if rec.count() >= self.max_evaluations {
                    break;
                }
                let u = affine(&best, &simplex[k].0, 0.5);
                let f = rec.eval_unit(&u)?;
                simplex[k] = (u, f);
            }
        }
    }
}
