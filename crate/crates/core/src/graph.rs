//! Unit-disk graphs of atom registers and exact independent-set analysis.
//!
//! Vertex sets are bit masks with bit `j` for vertex `j`, the same layout as
//! measurement outcomes.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonian::DEFAULT_MAX_ATOMS;
use crate::histogram::{bitstring_label, BitstringHistogram};
use crate::register::AtomRegister;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnitDiskGraph {
    n: usize,
    /// Connection radius in μm; absent for graphs given by their edges.
    radius: Option<f64>,
    positions: Vec<[f64; 2]>,
    /// Sorted pairs `(j, k)` with `j < k`.
    edges: Vec<(usize, usize)>,
    #[serde(skip)]
    neighbors: Vec<u64>,
}

/// Edge iff the distance is at most `radius`; ties count as edges.
pub fn unit_disk_graph(register: &AtomRegister, radius: f64) -> Result<UnitDiskGraph> {
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::InvalidParameters(format!("radius {radius}")));
    }
    let n = register.len();
    let mut edges = Vec::new();
    for j in 0..n {
        for k in j + 1..n {
            if register.distance(j, k) <= radius {
                edges.push((j, k));
            }
        }
    }
    let mut g = UnitDiskGraph::from_edges(n, &edges)?;
    g.radius = Some(radius);
    g.positions = register.positions().to_vec();
    Ok(g)
}

impl UnitDiskGraph {
    /// Abstract graph from an edge list.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        if n > 63 {
            return Err(Error::TooManyAtoms { n, max: 63 });
        }
        let mut neighbors = vec![0u64; n];
        let mut list = Vec::with_capacity(edges.len());
        for &(a, b) in edges {
            if a == b || a >= n || b >= n {
                return Err(Error::InvalidParameters(format!("edge ({a}, {b}) on {n} vertices")));
            }
            let (j, k) = (a.min(b), a.max(b));
            neighbors[j] |= 1 << k;
            neighbors[k] |= 1 << j;
            list.push((j, k));
        }
        list.sort_unstable();
        list.dedup();
        Ok(Self {
            n,
            radius: None,
            positions: Vec::new(),
            edges: list,
            neighbors,
        })
    }

    /// Cycle `0 − 1 − … − (n−1) − 0`.
    pub fn cycle(n: usize) -> Result<Self> {
        let edges: Vec<_> = (0..n).map(|j| (j, (j + 1) % n)).collect();
        Self::from_edges(n, &edges)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn radius(&self) -> Option<f64> {
        self.radius
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn has_edge(&self, j: usize, k: usize) -> bool {
        self.neighbors[j] >> k & 1 == 1
    }

    pub fn degree(&self, j: usize) -> usize {
        self.neighbors[j].count_ones() as usize
    }

    /// True when the graph is a single cycle through all vertices.
    pub fn is_cycle(&self) -> bool {
        if self.n < 3 || self.edges.len() != self.n || (0..self.n).any(|j| self.degree(j) != 2) {
            return false;
        }
        // walk from vertex 0 and come back after exactly n steps
        let (mut prev, mut cur) = (0usize, self.neighbors[0].trailing_zeros() as usize);
        for _ in 1..self.n {
            let next = (self.neighbors[cur] & !(1 << prev)).trailing_zeros() as usize;
            prev = cur;
            cur = next;
        }
        cur == 0
    }

    pub fn is_independent_set(&self, set: u64) -> bool {
        let mut bits = set;
        while bits != 0 {
            let j = bits.trailing_zeros() as usize;
            if self.neighbors[j] & set != 0 {
                return false;
            }
            bits &= bits - 1;
        }
        true
    }

    /// True iff no further vertex can be added. Errors on a set that is not independent.
    pub fn is_maximal(&self, set: u64) -> Result<bool> {
        if !self.is_independent_set(set) {
            return Err(Error::NotIndependent);
        }
        Ok(self.is_maximal_unchecked(set))
    }

    fn is_maximal_unchecked(&self, set: u64) -> bool {
        (0..self.n).all(|j| set >> j & 1 == 1 || self.neighbors[j] & set != 0)
    }

    /// Brute force over all `2^n` subsets.
    pub fn enumerate_max_independent_sets(&self) -> Result<MisEnumeration> {
        if self.n > DEFAULT_MAX_ATOMS {
            return Err(Error::TooManyAtoms {
                n: self.n,
                max: DEFAULT_MAX_ATOMS,
            });
        }
        let mut best = 0usize;
        let mut sets = Vec::new();
        let mut maximal_counts = BTreeMap::new();
        for set in 0..1u64 << self.n {
            if !self.is_independent_set(set) {
                continue;
            }
            let size = set.count_ones() as usize;
            if self.is_maximal_unchecked(set) {
                *maximal_counts.entry(size).or_insert(0usize) += 1;
            }
            if size > best {
                best = size;
                sets.clear();
            }
            if size == best {
                sets.push(set);
            }
        }
        let mut labelled: Vec<(String, u64)> = sets.into_iter().map(|s| (bitstring_label(s, self.n), s)).collect();
        labelled.sort();
        Ok(MisEnumeration {
            max_cardinality: best,
            maximum_sets: labelled.into_iter().map(|(_, s)| s).collect(),
            maximal_counts,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let g: Self = serde_json::from_str(s)?;
        let mut out = Self::from_edges(g.n, &g.edges)?;
        out.radius = g.radius;
        out.positions = g.positions;
        Ok(out)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MisEnumeration {
    pub max_cardinality: usize,
    /// Every maximum independent set, sorted by bitstring label.
    pub maximum_sets: Vec<u64>,
    /// Number of maximal independent sets of each cardinality.
    pub maximal_counts: BTreeMap<usize, usize>,
}

/// Strongest property an outcome has; each implies the ones before it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SetLabel {
    NotIndependent,
    Independent,
    Maximal,
    Maximum,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassifiedOutcome {
    pub bitstring: String,
    pub probability: f64,
    pub label: SetLabel,
    pub cardinality: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IsClassification {
    /// Observed outcomes, most probable first.
    pub outcomes: Vec<ClassifiedOutcome>,
    /// Mass of all independent sets, maximal and maximum ones included.
    pub independent_mass: f64,
    /// Mass of maximal independent sets, maximum ones included.
    pub maximal_mass: f64,
    pub maximum_mass: f64,
    /// Mass of independent sets by cardinality.
    pub mass_by_cardinality: BTreeMap<usize, f64>,
}

pub fn classify_histogram(graph: &UnitDiskGraph, hist: &BitstringHistogram) -> Result<IsClassification> {
    if hist.n() != graph.n() {
        return Err(Error::DimensionMismatch {
            expected: graph.n(),
            found: hist.n(),
        });
    }
    let max_cardinality = graph.enumerate_max_independent_sets()?.max_cardinality;
    let mut out = IsClassification {
        outcomes: Vec::new(),
        independent_mass: 0.0,
        maximal_mass: 0.0,
        maximum_mass: 0.0,
        mass_by_cardinality: BTreeMap::new(),
    };
    for (set, p) in hist.top(usize::MAX) {
        let cardinality = set.count_ones() as usize;
        let label = if !graph.is_independent_set(set) {
            SetLabel::NotIndependent
        } else if cardinality == max_cardinality {
            SetLabel::Maximum
        } else if graph.is_maximal_unchecked(set) {
            SetLabel::Maximal
        } else {
            SetLabel::Independent
        };
        if label >= SetLabel::Independent {
            out.independent_mass += p;
            *out.mass_by_cardinality.entry(cardinality).or_insert(0.0) += p;
        }
        if label >= SetLabel::Maximal {
            out.maximal_mass += p;
        }
        if label == SetLabel::Maximum {
            out.maximum_mass += p;
        }
        out.outcomes.push(ClassifiedOutcome {
            bitstring: bitstring_label(set, graph.n()),
            probability: p,
            label,
            cardinality,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::histogram::parse_bitstring;

    fn mask(s: &str) -> u64 {
        parse_bitstring(s).unwrap().0
    }

    fn ring(n: usize, spacing: f64) -> AtomRegister {
        let r = spacing / (2.0 * (std::f64::consts::PI / n as f64).sin());
        let pos = (0..n)
            .map(|j| {
                let a = std::f64::consts::TAU * j as f64 / n as f64;
                [r * a.cos(), r * a.sin()]
            })
            .collect();
        AtomRegister::new(pos).unwrap()
    }

    #[test]
    fn ring_register_gives_a_cycle() {
        let g = unit_disk_graph(&ring(12, 6.0), 7.5).unwrap();
        assert!(g.is_cycle());
        assert_eq!(g.edges().len(), 12);
    }

    #[test]
    fn small_radius_gives_no_edges() {
        let g = unit_disk_graph(&ring(12, 6.0), 5.0).unwrap();
        assert!(g.edges().is_empty());
    }

    #[test]
    fn collinear_path_and_tie_rule() {
        let reg = AtomRegister::new(vec![[0.0, 0.0], [4.0, 0.0], [8.0, 0.0]]).unwrap();
        let g = unit_disk_graph(&reg, 6.0).unwrap();
        assert_eq!(g.edges(), &[(0, 1), (1, 2)]);
        let tie = unit_disk_graph(&reg, 4.0).unwrap();
        assert_eq!(tie.edges(), &[(0, 1), (1, 2)]);
        let below = unit_disk_graph(&reg, 4.0 - 1e-12).unwrap();
        assert!(below.edges().is_empty());
    }

    #[test]
    fn independence_on_the_twelve_cycle() {
        let g = UnitDiskGraph::cycle(12).unwrap();
        assert!(g.is_independent_set(mask("101010101010")));
        assert!(g.is_independent_set(0));
        assert!(!g.is_independent_set(mask("110000000000")));
        assert!(g.is_maximal(mask("100100100100")).unwrap());
        assert!(!g.is_maximal(mask("100000000000")).unwrap());
        assert!(g.is_maximal(mask("101010101010")).unwrap());
        assert!(matches!(g.is_maximal(mask("110000000000")), Err(Error::NotIndependent)));
    }

    #[test]
    fn twelve_cycle_has_two_maximum_sets() {
        let e = UnitDiskGraph::cycle(12).unwrap().enumerate_max_independent_sets().unwrap();
        assert_eq!(e.max_cardinality, 6);
        assert_eq!(e.maximum_sets, vec![mask("010101010101"), mask("101010101010")]);
        assert_eq!(e.maximal_counts[&6], 2);
        // '100100100100' and its two rotations
        assert_eq!(e.maximal_counts[&4], 3);
    }

    #[test]
    fn edgeless_and_triangle() {
        let e = UnitDiskGraph::from_edges(5, &[]).unwrap().enumerate_max_independent_sets().unwrap();
        assert_eq!((e.max_cardinality, e.maximum_sets.clone()), (5, vec![0b11111]));
        let t = UnitDiskGraph::from_edges(3, &[(0, 1), (1, 2), (0, 2)]).unwrap();
        let e = t.enumerate_max_independent_sets().unwrap();
        assert_eq!(e.max_cardinality, 1);
        assert_eq!(e.maximum_sets.len(), 3);
    }

    #[test]
    fn classification() {
        let g = UnitDiskGraph::cycle(12).unwrap();
        let mut p = vec![0.0; 1 << 12];
        p[mask("101010101010") as usize] = 1.0;
        let c = classify_histogram(&g, &BitstringHistogram::exact(12, p).unwrap()).unwrap();
        assert_eq!(c.maximum_mass, 1.0);

        // five excitations, independent but not maximum
        let mut p = vec![0.0; 1 << 12];
        p[mask("101010101000") as usize] = 1.0;
        let c = classify_histogram(&g, &BitstringHistogram::exact(12, p).unwrap()).unwrap();
        assert_eq!(c.outcomes[0].cardinality, 5);
        assert!(c.outcomes[0].label >= SetLabel::Independent && c.outcomes[0].label != SetLabel::Maximum);

        let tri = UnitDiskGraph::from_edges(3, &[(0, 1), (1, 2), (0, 2)]).unwrap();
        let c = classify_histogram(&tri, &BitstringHistogram::exact(3, vec![0.125; 8]).unwrap()).unwrap();
        assert!((c.independent_mass - 0.5).abs() < 1e-15);
        assert!((c.maximum_mass - 0.375).abs() < 1e-15);
    }

    #[test]
    fn json_round_trip() {
        let g = unit_disk_graph(&ring(6, 6.0), 7.0).unwrap();
        let back = UnitDiskGraph::from_json(&g.to_json().unwrap()).unwrap();
        assert_eq!(back, g);
    }
}
