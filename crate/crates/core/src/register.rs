use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Planar arrangement of atoms, positions in μm.
///
/// The atom index is the bit index of every bitstring derived from this
/// register: atom `j` is bit `j` of the basis index and character `j` of the
/// printed bitstring.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RegisterJson", into = "RegisterJson")]
pub struct AtomRegister {
    positions: Vec<[f64; 2]>,
    ancilla: Vec<bool>,
    label: String,
}

/// File shape of a register: positions plus the list of ancilla indices.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RegisterJson {
    pub atoms: Vec<[f64; 2]>,
    #[serde(default)]
    pub ancilla: Vec<usize>,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub label: String,
}

impl TryFrom<RegisterJson> for AtomRegister {
    type Error = Error;

    fn try_from(r: RegisterJson) -> Result<Self> {
        Ok(AtomRegister::new(r.atoms)?.with_ancillas(&r.ancilla)?.with_label(r.label))
    }
}

impl From<AtomRegister> for RegisterJson {
    fn from(r: AtomRegister) -> Self {
        RegisterJson {
            ancilla: r.ancilla_indices(),
            atoms: r.positions,
            label: r.label,
        }
    }
}

impl AtomRegister {
    pub fn new(positions: Vec<[f64; 2]>) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::InvalidRegister("register has no atoms".into()));
        }
        if let Some(j) = positions
            .iter()
            .position(|p| !p[0].is_finite() || !p[1].is_finite())
        {
            return Err(Error::InvalidRegister(format!(
                "atom {j} has a non-finite coordinate"
            )));
        }
        let n = positions.len();
        Ok(Self {
            positions,
            ancilla: vec![false; n],
            label: String::new(),
        })
    }

    /// Marks the given atom indices as ancillas.
    pub fn with_ancillas(mut self, indices: &[usize]) -> Result<Self> {
        for &j in indices {
            if j >= self.len() {
                return Err(Error::InvalidRegister(format!(
                    "ancilla index {j} out of range for {} atoms",
                    self.len()
                )));
            }
            self.ancilla[j] = true;
        }
        Ok(self)
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn positions(&self) -> &[[f64; 2]] {
        &self.positions
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn is_ancilla(&self, j: usize) -> bool {
        self.ancilla[j]
    }

    pub fn ancilla_indices(&self) -> Vec<usize> {
        (0..self.len()).filter(|&j| self.ancilla[j]).collect()
    }

    /// Indices of the non-ancilla atoms, in register order.
    pub fn logical_indices(&self) -> Vec<usize> {
        (0..self.len()).filter(|&j| !self.ancilla[j]).collect()
    }

    pub fn distance(&self, j: usize, k: usize) -> f64 {
        let [xj, yj] = self.positions[j];
        let [xk, yk] = self.positions[k];
        (xj - xk).hypot(yj - yk)
    }

    /// Smallest pairwise distance, `None` for a single atom.
    pub fn min_pair_distance(&self) -> Option<(usize, usize, f64)> {
        let mut best: Option<(usize, usize, f64)> = None;
        for j in 0..self.len() {
            for k in j + 1..self.len() {
                let d = self.distance(j, k);
                if best.is_none_or(|(_, _, b)| d < b) {
                    best = Some((j, k, d));
                }
            }
        }
        best
    }

    /// Returns a copy with every atom shifted by `(dx, dy)`.
    pub fn translated(&self, dx: f64, dy: f64) -> Self {
        Self {
            positions: self
                .positions
                .iter()
                .map(|[x, y]| [x + dx, y + dy])
                .collect(),
            ancilla: self.ancilla.clone(),
            label: self.label.clone(),
        }
    }

    /// Reorders atoms so that new atom `i` is old atom `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let n = self.len();
        let mut seen = vec![false; n];
        if perm.len() != n || perm.iter().any(|&p| p >= n || std::mem::replace(&mut seen[p], true)) {
            return Err(Error::InvalidRegister("not a permutation".into()));
        }
        Ok(Self {
            positions: perm.iter().map(|&p| self.positions[p]).collect(),
            ancilla: perm.iter().map(|&p| self.ancilla[p]).collect(),
            label: self.label.clone(),
        })
    }
}
