//! Contractive cycles on the switch graph.
//!
//! With dwell `Δ` on stable vertices and `δ` on unstable ones, the edge
//! weight
//!
//! ```text
//! α(i,j) = ln μ_ij − |ln λ_i|·Δ   (i stable)
//! α(i,j) = ln μ_ij + |ln λ_i|·δ   (i unstable)
//! ```
//!
//! charges each vertex's dwell contribution to its outgoing edge, so a cycle
//! with negative total α is contractive and vice versa. Negative cycles are
//! found with Bellman-Ford from a virtual source.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::certify::{Certification, Classification, StabilityClass};
use crate::dataset::{SubsystemId, SwitchSpec};
use crate::lmi::LyapunovCertificate;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CycleError {
    #[error("missing data: {0}")]
    MissingData(String),
    #[error("selection cap of {cap} reached after {tried} selections without a contractive cycle")]
    SelectionCapExceeded { cap: usize, tried: usize },
}

/// Vertices `1..=n` with weighted directed edges.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedDigraph {
    pub n: usize,
    pub edges: Vec<(SubsystemId, SubsystemId, f64)>,
}

impl WeightedDigraph {
    pub fn weight(&self, from: SubsystemId, to: SubsystemId) -> Option<f64> {
        self.edges
            .iter()
            .find(|e| e.0 == from && e.1 == to)
            .map(|e| e.2)
    }
}

/// Simple directed cycle `v_0 → v_1 → … → v_{ℓ−1} → v_0`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cycle {
    pub vertices: Vec<SubsystemId>,
}

impl Cycle {
    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// Consecutive pairs including the closing edge.
    pub fn edges(&self) -> impl Iterator<Item = (SubsystemId, SubsystemId)> + '_ {
        let l = self.vertices.len();
        (0..l).map(move |k| (self.vertices[k], self.vertices[(k + 1) % l]))
    }

    /// ℓ ≥ 2, distinct vertices, every edge in `E(P)`.
    pub fn is_valid_in(&self, spec: &SwitchSpec) -> bool {
        let mut seen = self.vertices.clone();
        seen.sort_unstable();
        seen.dedup();
        self.len() >= 2
            && seen.len() == self.len()
            && self.edges().all(|(i, j)| spec.has_edge(i, j))
    }

    /// Sum of edge weights along the cycle, `None` if an edge is absent.
    pub fn weight_in(&self, g: &WeightedDigraph) -> Option<f64> {
        self.edges().map(|(i, j)| g.weight(i, j)).sum()
    }

    /// Rotation starting at the smallest vertex.
    fn canonical(mut self) -> Self {
        if let Some(pos) = self
            .vertices
            .iter()
            .enumerate()
            .min_by_key(|(_, v)| **v)
            .map(|(k, _)| k)
        {
            self.vertices.rotate_left(pos);
        }
        self
    }
}

/// `w̄(i) = ∓|ln λ_i|` (stable/unstable) and `w(i,j) = ln μ_ij`.
#[derive(Debug, Clone, PartialEq)]
pub struct VertexWeights {
    pub vertex: Vec<f64>,
    pub edge: BTreeMap<(SubsystemId, SubsystemId), f64>,
}

impl VertexWeights {
    pub fn new(
        classes: &[StabilityClass],
        lambdas: &[f64],
        mus: &BTreeMap<(SubsystemId, SubsystemId), f64>,
    ) -> Self {
        let vertex = classes
            .iter()
            .zip(lambdas)
            .map(|(c, l)| match c {
                StabilityClass::Stable => -l.ln().abs(),
                StabilityClass::Unstable => l.ln().abs(),
            })
            .collect();
        let edge = mus.iter().map(|(&k, mu)| (k, mu.ln())).collect();
        Self { vertex, edge }
    }
}

/// Builds `G` with the dwell-weighted edge costs α.
pub fn edge_weights(
    classes: &[StabilityClass],
    lambdas: &[f64],
    mus: &BTreeMap<(SubsystemId, SubsystemId), f64>,
    spec: &SwitchSpec,
) -> Result<WeightedDigraph, CycleError> {
    let n = spec.n_subsystems;
    if classes.len() < n || lambdas.len() < n {
        return Err(CycleError::MissingData(format!(
            "{} classes and {} lambdas for {n} vertices",
            classes.len(),
            lambdas.len()
        )));
    }
    let mut edges = Vec::with_capacity(spec.edges.len());
    for &(i, j) in &spec.edges {
        let mu = *mus
            .get(&(i, j))
            .ok_or_else(|| CycleError::MissingData(format!("no mu for edge ({i}, {j})")))?;
        let decay = lambdas[i - 1].ln().abs();
        let alpha = match classes[i - 1] {
            StabilityClass::Stable => mu.ln() - decay * spec.dwell_max as f64,
            StabilityClass::Unstable => mu.ln() + decay * spec.dwell_min as f64,
        };
        edges.push((i, j, alpha));
    }
    Ok(WeightedDigraph { n, edges })
}

/// Bellman-Ford from a virtual source joined to every vertex by a zero
/// edge. Returns a simple cycle of negative total weight, or `None` when the
/// graph has none.
pub fn find_negative_cycle(g: &WeightedDigraph) -> Option<Cycle> {
    let n = g.n;
    let mut dist = vec![0.0f64; n + 1];
    let mut pred: Vec<Option<usize>> = vec![None; n + 1];

    // The augmented graph has n + 1 vertices, so n passes settle every
    // shortest path when no negative cycle exists.
    for _ in 0..n {
        let mut changed = false;
        for &(i, j, w) in &g.edges {
            if dist[i] + w < dist[j] {
                dist[j] = dist[i] + w;
                pred[j] = Some(i);
                changed = true;
            }
        }
        if !changed {
            return None;
        }
    }

    for &(i, j, w) in &g.edges {
        if dist[i] + w < dist[j] {
            pred[j] = Some(i);
            // n steps back along predecessors land on a cycle.
            let mut v = j;
            for _ in 0..n {
                v = pred[v]?;
            }
            let start = v;
            let mut reversed = vec![start];
            let mut u = pred[start]?;
            while u != start {
                reversed.push(u);
                u = pred[u]?;
            }
            reversed.reverse();
            let cycle = Cycle { vertices: reversed }.canonical();
            match cycle.weight_in(g) {
                Some(total) if total < 0.0 => return Some(cycle),
                _ => continue,
            }
        }
    }
    None
}

/// Left side of the contractiveness inequality:
/// `Σ w̄(v_k)·D_k + Σ w(v_k, v_{k+1})`.
pub fn contractiveness(
    cycle: &Cycle,
    dwells: &[usize],
    vw: &VertexWeights,
) -> Result<f64, CycleError> {
    if dwells.len() != cycle.len() {
        return Err(CycleError::MissingData(format!(
            "{} dwells for a cycle of length {}",
            dwells.len(),
            cycle.len()
        )));
    }
    let mut total = 0.0;
    for (k, (i, j)) in cycle.edges().enumerate() {
        let w_edge = vw
            .edge
            .get(&(i, j))
            .ok_or_else(|| CycleError::MissingData(format!("no weight for edge ({i}, {j})")))?;
        total += vw.vertex[i - 1] * dwells[k] as f64 + w_edge;
    }
    Ok(total)
}

/// `Δ` on stable vertices, `δ` on unstable ones.
pub fn assign_dwells(
    cycle: &Cycle,
    classification: &Classification,
    dwell_min: usize,
    dwell_max: usize,
) -> Vec<usize> {
    cycle
        .vertices
        .iter()
        .map(|&v| match classification.class_of(v) {
            StabilityClass::Stable => dwell_max,
            StabilityClass::Unstable => dwell_min,
        })
        .collect()
}

/// A contractive cycle together with the data that certify it.
#[derive(Debug, Clone, PartialEq)]
pub struct ContractiveCycleResult {
    pub cycle: Cycle,
    pub dwells: Vec<usize>,
    /// Contractiveness value; negative.
    pub weight: f64,
    /// Certificate of each cycle vertex, in cycle order.
    pub certificates: Vec<LyapunovCertificate>,
    /// μ of each cycle edge `(v_k, v_{k+1})`, closing edge last.
    pub mus: Vec<f64>,
    /// Index into Λ_i chosen for every subsystem.
    pub selection: Vec<usize>,
    pub selections_tried: usize,
}

pub const DEFAULT_SELECTION_CAP: usize = 1_000_000;

/// Mixed-radix counter over `Λ_1 × … × Λ_N`, last subsystem fastest.
fn advance(selection: &mut [usize], sizes: &[usize]) -> bool {
    for k in (0..selection.len()).rev() {
        selection[k] += 1;
        if selection[k] < sizes[k] {
            return true;
        }
        selection[k] = 0;
    }
    false
}

/// Tries certificate selections in lexicographic order and returns the
/// first that yields a negative α-cycle.
pub fn search_contractive(
    cert: &Certification,
    spec: &SwitchSpec,
    cap: usize,
) -> Result<Option<ContractiveCycleResult>, CycleError> {
    let n = spec.n_subsystems;
    let sizes: Vec<usize> = (1..=n).map(|i| cert.certificates.of(i).len()).collect();
    if let Some(empty) = sizes.iter().position(|&s| s == 0) {
        return Err(CycleError::MissingData(format!(
            "no certificate for subsystem {}",
            empty + 1
        )));
    }
    if spec.edges.is_empty() {
        return Ok(None);
    }
    let classes = &cert.classification.classes;
    let mut selection = vec![0usize; n];
    let mut tried = 0usize;
    loop {
        if tried == cap {
            return Err(CycleError::SelectionCapExceeded { cap, tried });
        }
        tried += 1;
        let lambdas: Vec<f64> = (1..=n)
            .map(|i| cert.certificates.of(i)[selection[i - 1]].lambda)
            .collect();
        let mut mus = BTreeMap::new();
        for &(i, j) in &spec.edges {
            let mu = cert
                .gains
                .get(i, j, selection[i - 1], selection[j - 1])
                .ok_or_else(|| CycleError::MissingData(format!("no gain for edge ({i}, {j})")))?;
            mus.insert((i, j), mu);
        }
        let g = edge_weights(classes, &lambdas, &mus, spec)?;
        if let Some(cycle) = find_negative_cycle(&g) {
            let dwells =
                assign_dwells(&cycle, &cert.classification, spec.dwell_min, spec.dwell_max);
            let vw = VertexWeights::new(classes, &lambdas, &mus);
            let weight = contractiveness(&cycle, &dwells, &vw)?;
            if weight < 0.0 {
                let certificates = cycle
                    .vertices
                    .iter()
                    .map(|&v| cert.certificates.of(v)[selection[v - 1]].clone())
                    .collect();
                let cycle_mus = cycle.edges().map(|e| mus[&e]).collect();
                return Ok(Some(ContractiveCycleResult {
                    cycle,
                    dwells,
                    weight,
                    certificates,
                    mus: cycle_mus,
                    selection,
                    selections_tried: tried,
                }));
            }
        }
        if !advance(&mut selection, &sizes) {
            return Ok(None);
        }
    }
}
