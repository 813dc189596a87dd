//! Derivative-free local optimizers over box-bounded parameters.

pub mod cobyla;
pub mod nelder_mead;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use cobyla::Cobyla;
pub use nelder_mead::NelderMead;

/// Axis-aligned box `lower ≤ x ≤ upper` with `lower < upper` componentwise.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl Bounds {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() || lower.is_empty() {
            return Err(Error::InvalidParameters("bounds need equal, nonzero lengths".into()));
        }
        for (i, (l, u)) in lower.iter().zip(&upper).enumerate() {
            if !(l.is_finite() && u.is_finite() && l < u) {
                return Err(Error::InvalidParameters(format!("bound {i}: [{l}, {u}]")));
            }
        }
        Ok(Self { lower, upper })
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (l, u))| (l..=u).contains(&v))
    }

    pub fn clamp(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(v, (l, u))| v.clamp(*l, *u))
            .collect()
    }

    /// Maps `x` to the unit box.
    pub fn to_unit(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(v, (l, u))| (v - l) / (u - l))
            .collect()
    }

    /// Inverse of [`Bounds::to_unit`], clamped into the box.
    pub fn from_unit(&self, u: &[f64]) -> Vec<f64> {
        u.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(v, (l, h))| (l + v.clamp(0.0, 1.0) * (h - l)).clamp(*l, *h))
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    /// Trust radius (or simplex size) reached its final value.
    Converged,
    MaxEvaluations,
    /// The interpolation simplex became numerically singular.
    RoundingErrors,
}

/// Outcome of a minimization. `x` and `f` are the best evaluated point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub evaluations: usize,
    /// Objective value of every evaluation, in order.
    pub history: Vec<f64>,
    pub termination: Termination,
}

/// A derivative-free minimizer of a box-bounded objective. The objective is
/// only ever called with points inside the bounds.
pub trait LocalOptimizer {
    fn name(&self) -> &'static str;

    fn minimize(
        &self,
        objective: &mut dyn FnMut(&[f64]) -> Result<f64>,
        x0: &[f64],
        bounds: &Bounds,
    ) -> Result<OptimResult>;
}

/// Records evaluations and keeps the best one.
pub(crate) struct Recorder<'a> {
    objective: &'a mut dyn FnMut(&[f64]) -> Result<f64>,
    bounds: &'a Bounds,
    pub history: Vec<f64>,
    pub best: Option<(Vec<f64>, f64)>,
}

impl<'a> Recorder<'a> {
    pub fn new(objective: &'a mut dyn FnMut(&[f64]) -> Result<f64>, bounds: &'a Bounds) -> Self {
        Self {
            objective,
            bounds,
            history: Vec::new(),
            best: None,
        }
    }

    /// Evaluates at the point of the box corresponding to unit coordinates `u`
    /// (clamped into the box).
    pub fn eval_unit(&mut self, u: &[f64]) -> Result<f64> {
        let x = self.bounds.from_unit(u);
        let f = (self.objective)(&x)?;
        if !f.is_finite() {
            return Err(Error::InvalidParameters(format!("objective returned {f}")));
        }
        self.history.push(f);
        if self.best.as_ref().is_none_or(|b| f < b.1) {
            self.best = Some((x, f));
        }
        Ok(f)
    }

    pub fn count(&self) -> usize {
        self.history.len()
    }

    pub fn finish(self, termination: Termination) -> OptimResult {
        let (x, f) = self.best.expect("at least one evaluation");
        OptimResult {
            x,
            f,
            evaluations: self.history.len(),
            history: self.history,
            termination,
        }
    }
}

pub(crate) fn check_start(x0: &[f64], bounds: &Bounds) -> Result<()> {
    if !bounds.contains(x0) {
        return Err(Error::InvalidParameters("initial point outside the bounds".into()));
    }
    Ok(())
}
