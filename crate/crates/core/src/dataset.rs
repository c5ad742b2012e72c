//! Subsystem traces, the switch graph and dwell bounds, and the data
//! matrices built from a single trace window.
//!
//! For a trace `x(0), …, x(L)` the vector `q(t)` stacks the next first
//! component `x¹(t+1)` on top of the full state `x(t)`. Putting `d`
//! consecutive `q` vectors side by side gives the `(d+1)×d` matrix Ψ whose
//! top `d` rows are the shifted states `X₊` and whose bottom `d` rows are the
//! current states `X`.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{column_rank, DenseMatrix, NUMERIC};

/// 1-based subsystem index.
pub type SubsystemId = usize;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DatasetError {
    #[error("schema error: {0}")]
    Schema(String),
    #[error(
        "dimension mismatch in trace {id}, sample {index}: expected {expected} entries, got {got}"
    )]
    DimensionMismatch {
        id: SubsystemId,
        index: usize,
        expected: usize,
        got: usize,
    },
    #[error("spec violation: {0}")]
    SpecViolation(String),
    #[error("index {t} out of range for trace {id} (valid 0..={max})")]
    IndexOutOfRange {
        id: SubsystemId,
        t: usize,
        max: usize,
    },
    #[error("no offset yields a full-rank data window for subsystem {id}")]
    NoValidWindow { id: SubsystemId },
}

/// Admissible switches `E(P)` plus dwell bounds `[δ:Δ]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SwitchSpec {
    pub n_subsystems: usize,
    pub dimension: usize,
    /// Sorted, duplicate free, 1-based.
    pub edges: Vec<(SubsystemId, SubsystemId)>,
    pub dwell_min: usize,
    pub dwell_max: usize,
}

impl SwitchSpec {
    pub fn new(
        n_subsystems: usize,
        dimension: usize,
        edges: impl IntoIterator<Item = (SubsystemId, SubsystemId)>,
        dwell_min: usize,
        dwell_max: usize,
    ) -> Result<Self, DatasetError> {
        let edges: BTreeSet<_> = edges.into_iter().collect();
        let spec = Self {
            n_subsystems,
            dimension,
            edges: edges.into_iter().collect(),
            dwell_min,
            dwell_max,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), DatasetError> {
        let violation = |msg: String| Err(DatasetError::SpecViolation(msg));
        if self.n_subsystems == 0 {
            return violation("N must be at least 1".into());
        }
        if self.dimension == 0 {
            return violation("d must be at least 1".into());
        }
        if self.dwell_min == 0 {
            return violation("delta must be a positive integer".into());
        }
        if self.dwell_min > self.dwell_max {
            return violation(format!(
                "delta = {} exceeds Delta = {}",
                self.dwell_min, self.dwell_max
            ));
        }
        if self.dwell_max < self.dimension + 1 {
            return violation(format!(
                "Delta = {} must be at least d + 1 = {}",
                self.dwell_max,
                self.dimension + 1
            ));
        }
        for &(i, j) in &self.edges {
            if i == j {
                return violation(format!("self-loop edge ({i}, {j})"));
            }
            if !(1..=self.n_subsystems).contains(&i) || !(1..=self.n_subsystems).contains(&j) {
                return violation(format!(
                    "edge ({i}, {j}) has an endpoint outside 1..={}",
                    self.n_subsystems
                ));
            }
        }
        Ok(())
    }

    pub fn has_edge(&self, from: SubsystemId, to: SubsystemId) -> bool {
        self.edges.binary_search(&(from, to)).is_ok()
    }

    pub fn dwell_ok(&self, dwell: usize) -> bool {
        (self.dwell_min..=self.dwell_max).contains(&dwell)
    }

    pub fn successors(&self, from: SubsystemId) -> impl Iterator<Item = SubsystemId> + '_ {
        self.edges.iter().filter(move |e| e.0 == from).map(|e| e.1)
    }
}

/// Finite state trajectory `x(0), …, x(L)` of one subsystem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Trace {
    #[serde(rename = "id")]
    pub subsystem_id: SubsystemId,
    pub samples: Vec<Vec<f64>>,
}

impl Trace {
    pub fn new(subsystem_id: SubsystemId, samples: Vec<Vec<f64>>) -> Self {
        Self {
            subsystem_id,
            samples,
        }
    }

    /// `L`, the index of the last sample.
    pub fn last_index(&self) -> usize {
        self.samples.len().saturating_sub(1)
    }

    pub fn dimension(&self) -> usize {
        self.samples.first().map_or(0, Vec::len)
    }

    fn validate(&self, d: usize) -> Result<(), DatasetError> {
        for (index, s) in self.samples.iter().enumerate() {
            if s.len() != d {
                return Err(DatasetError::DimensionMismatch {
                    id: self.subsystem_id,
                    index,
                    expected: d,
                    got: s.len(),
                });
            }
            if s.iter().any(|v| !v.is_finite()) {
                return Err(DatasetError::Schema(format!(
                    "trace {} sample {index} has a non-finite entry",
                    self.subsystem_id
                )));
            }
        }
        if self.samples.len() < d + 1 {
            return Err(DatasetError::SpecViolation(format!(
                "trace {} has L = {} but needs L >= d = {d}",
                self.subsystem_id,
                self.samples.len() as isize - 1
            )));
        }
        Ok(())
    }
}

/// One trace per subsystem plus the switching spec.
#[derive(Debug, Clone, PartialEq)]
pub struct SubsystemDataset {
    pub spec: SwitchSpec,
    /// `traces[i - 1]` belongs to subsystem `i`.
    pub traces: Vec<Trace>,
}

/// On-disk layout of a dataset.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DatasetDocument {
    d: usize,
    #[serde(rename = "N")]
    n: usize,
    delta: usize,
    #[serde(rename = "Delta")]
    delta_max: usize,
    edges: Vec<[usize; 2]>,
    traces: Vec<Trace>,
}

impl SubsystemDataset {
    pub fn new(spec: SwitchSpec, mut traces: Vec<Trace>) -> Result<Self, DatasetError> {
        spec.validate()?;
        traces.sort_by_key(|t| t.subsystem_id);
        for (k, t) in traces.iter().enumerate() {
            if t.subsystem_id != k + 1 {
                let problem = if t.subsystem_id == 0 || t.subsystem_id > spec.n_subsystems {
                    format!(
                        "trace id {} outside 1..={}",
                        t.subsystem_id, spec.n_subsystems
                    )
                } else if t.subsystem_id < k + 1 {
                    format!("duplicate trace for subsystem {}", t.subsystem_id)
                } else {
                    format!("missing trace for subsystem {}", k + 1)
                };
                return Err(DatasetError::SpecViolation(problem));
            }
            t.validate(spec.dimension)?;
        }
        if traces.len() != spec.n_subsystems {
            return Err(DatasetError::SpecViolation(format!(
                "missing trace for subsystem {}",
                traces.len() + 1
            )));
        }
        let dataset = Self { spec, traces };
        for warning in dataset.diagnostics() {
            log::warn!("{warning}");
        }
        Ok(dataset)
    }

    pub fn trace(&self, id: SubsystemId) -> &Trace {
        &self.traces[id - 1]
    }

    /// Non-fatal findings: trace lengths outside the dwell window and
    /// samples that break the companion shift structure.
    pub fn diagnostics(&self) -> Vec<String> {
        let spec = &self.spec;
        let mut out = Vec::new();
        for t in &self.traces {
            let len = t.samples.len();
            if !spec.dwell_ok(len) {
                out.push(format!(
                    "trace {}: L + 1 = {len} lies outside the dwell window [{}:{}]",
                    t.subsystem_id, spec.dwell_min, spec.dwell_max
                ));
            }
            let scale = t
                .samples
                .iter()
                .flatten()
                .fold(0.0f64, |m, v| m.max(v.abs()))
                .max(1.0);
            let shift_error = t
                .samples
                .windows(2)
                .flat_map(|w| (1..spec.dimension).map(move |p| (w[1][p] - w[0][p - 1]).abs()))
                .fold(0.0f64, f64::max);
            if shift_error > 1e-6 * scale {
                out.push(format!(
                    "trace {}: samples deviate from the companion shift structure by {shift_error:.3e}",
                    t.subsystem_id
                ));
            }
        }
        out
    }

    pub fn to_json(&self) -> String {
        let doc = DatasetDocument {
            d: self.spec.dimension,
            n: self.spec.n_subsystems,
            delta: self.spec.dwell_min,
            delta_max: self.spec.dwell_max,
            edges: self.spec.edges.iter().map(|&(i, j)| [i, j]).collect(),
            traces: self.traces.clone(),
        };
        serde_json::to_string_pretty(&doc).expect("dataset serializes")
    }
}

/// Parses and validates a dataset document.
pub fn parse_dataset(text: &str) -> Result<SubsystemDataset, DatasetError> {
    let doc: DatasetDocument =
        serde_json::from_str(text).map_err(|e| DatasetError::Schema(e.to_string()))?;
    let spec = SwitchSpec {
        n_subsystems: doc.n,
        dimension: doc.d,
        edges: doc
            .edges
            .iter()
            .map(|e| (e[0], e[1]))
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect(),
        dwell_min: doc.delta,
        dwell_max: doc.delta_max,
    };
    SubsystemDataset::new(spec, doc.traces)
}

/// `q(t) = [x¹(t+1); x¹(t); …; xᵈ(t)]`.
pub fn build_q(trace: &Trace, t: usize) -> Result<Vec<f64>, DatasetError> {
    let last = trace.last_index();
    if trace.samples.is_empty() || t >= last {
        return Err(DatasetError::IndexOutOfRange {
            id: trace.subsystem_id,
            t,
            max: last.saturating_sub(1),
        });
    }
    let mut q = Vec::with_capacity(trace.dimension() + 1);
    q.push(trace.samples[t + 1][0]);
    q.extend_from_slice(&trace.samples[t]);
    Ok(q)
}

/// Data matrix Ψ for one window of a trace, with its state blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct PsiMatrix {
    pub subsystem_id: SubsystemId,
    /// Window offset `T`.
    pub offset: usize,
    /// `(d+1)×d`, column `k` is `q(T + k)`.
    pub psi: DenseMatrix,
    /// Bottom `d` rows of Ψ: `X = [x(T) … x(T+d−1)]`.
    pub x_now: DenseMatrix,
    /// Top `d` rows of Ψ: `X₊ = [x(T+1) … x(T+d)]` for companion data.
    pub x_next: DenseMatrix,
}

impl PsiMatrix {
    pub fn dimension(&self) -> usize {
        self.x_now.rows()
    }

    /// Builds the blocks from a ready-made Ψ (e.g. a published table).
    pub fn from_psi(
        subsystem_id: SubsystemId,
        offset: usize,
        psi: DenseMatrix,
    ) -> Result<Self, DatasetError> {
        let d = psi.cols();
        if psi.rows() != d + 1 {
            return Err(DatasetError::Schema(format!(
                "psi must be (d+1)x d, got {}x{}",
                psi.rows(),
                d
            )));
        }
        let x_next = psi.row_block(0, d);
        let x_now = psi.row_block(1, d + 1);
        Ok(Self {
            subsystem_id,
            offset,
            psi,
            x_now,
            x_next,
        })
    }

    fn is_full_rank(&self, tol: f64) -> bool {
        let d = self.dimension();
        column_rank(&self.psi, tol) == d && column_rank(&self.x_now, tol) == d
    }
}

/// Smallest offset `T ∈ [0 : L−d]` whose window has full column rank.
pub fn build_psi(trace: &Trace, tol: f64) -> Result<PsiMatrix, DatasetError> {
    let d = trace.dimension();
    let last = trace.last_index();
    if d == 0 || last < d {
        return Err(DatasetError::NoValidWindow {
            id: trace.subsystem_id,
        });
    }
    for offset in 0..=(last - d) {
        let columns = (offset..offset + d)
            .map(|t| build_q(trace, t))
            .collect::<Result<Vec<_>, _>>()?;
        let psi =
            DenseMatrix::from_columns(&columns).map_err(|e| DatasetError::Schema(e.to_string()))?;
        let candidate = PsiMatrix::from_psi(trace.subsystem_id, offset, psi)?;
        if candidate.is_full_rank(tol) {
            return Ok(candidate);
        }
    }
    Err(DatasetError::NoValidWindow {
        id: trace.subsystem_id,
    })
}

/// [`build_psi`] with the default rank tolerance.
pub fn build_psi_default(trace: &Trace) -> Result<PsiMatrix, DatasetError> {
    build_psi(trace, NUMERIC.rank_rel)
}

/// Companion-form subsystem. Only simulation and fixtures use this; the
/// synthesis path never sees a model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompanionModel {
    #[serde(rename = "id")]
    pub subsystem_id: SubsystemId,
    /// `[a_{d−1}, …, a_1, a_0]`; the first matrix row is the negation.
    pub coeffs: Vec<f64>,
}

impl CompanionModel {
    pub fn new(subsystem_id: SubsystemId, coeffs: Vec<f64>) -> Self {
        Self {
            subsystem_id,
            coeffs,
        }
    }

    /// Model whose matrix has the given first row.
    pub fn from_first_row(subsystem_id: SubsystemId, row: &[f64]) -> Self {
        Self::new(subsystem_id, row.iter().map(|v| -v).collect())
    }

    pub fn dimension(&self) -> usize {
        self.coeffs.len()
    }

    /// One step of the recursion without forming the matrix.
    pub fn step(&self, x: &[f64]) -> Vec<f64> {
        let d = self.dimension();
        let mut next = Vec::with_capacity(d);
        next.push(-self.coeffs.iter().zip(x).map(|(a, v)| a * v).sum::<f64>());
        next.extend_from_slice(&x[..d - 1]);
        next
    }
}

/// First row `[−a_{d−1} … −a_0]`, ones on the subdiagonal.
pub fn to_matrix(model: &CompanionModel) -> DenseMatrix {
    let d = model.dimension();
    let mut a = DenseMatrix::zeros(d, d);
    for (j, c) in model.coeffs.iter().enumerate() {
        a[(0, j)] = -c;
    }
    for i in 1..d {
        a[(i, i - 1)] = 1.0;
    }
    a
}
