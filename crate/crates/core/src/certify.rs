//! Grid search over λ, stability classification and transition gains.
//!
//! Stable candidates are `λ = h_s, 2h_s, …, k_s·h_s`. Unstable candidates are
//! `λ = 1/η²` for `η = h_u, 2h_u, …, k_u·h_u`; each is tried directly on the
//! data LMI, so no model is needed to screen η. Gains between certificates
//! are `μ_ij = λ_max(P_j P_i⁻¹)`, the smallest factor with `V_j ≤ μ_ij V_i`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{build_psi, DatasetError, PsiMatrix, SubsystemDataset, SubsystemId};
use crate::linalg::{max_gen_eig, LinalgError, NUMERIC};
use crate::lmi::{
    solve_feasibility, verify_certificate, FeasibilityOptions, LmiError, LyapunovCertificate,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CertifyError {
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Lmi(#[from] LmiError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("subsystem {0} could not be classified: no grid value admits a certificate")]
    Undetermined(SubsystemId),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("user classification covers {got} subsystems, dataset has {expected}")]
    IncompleteClassification { expected: usize, got: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    pub h_s: f64,
    pub h_u: f64,
    pub feasibility: FeasibilityOptions,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            h_s: 0.1,
            h_u: 0.1,
            feasibility: FeasibilityOptions::default(),
        }
    }
}

/// Largest `k` with `k·h < 1`, evaluated with the same product that
/// generates the grid values.
pub fn grid_count(h: f64) -> usize {
    if !(h > 0.0 && h < 1.0) {
        return 0;
    }
    let mut k = (1.0 / h).ceil() as usize;
    while k > 0 && k as f64 * h >= 1.0 {
        k -= 1;
    }
    while (k + 1) as f64 * h < 1.0 {
        k += 1;
    }
    k
}

impl GridConfig {
    pub fn validate(&self) -> Result<(), CertifyError> {
        for (name, h) in [("h_s", self.h_s), ("h_u", self.h_u)] {
            if grid_count(h) == 0 {
                return Err(CertifyError::InvalidGrid(format!(
                    "{name} = {h} must lie in (0, 1)"
                )));
            }
        }
        self.feasibility.validate()?;
        Ok(())
    }

    /// `{h_s·k : 1 ≤ k ≤ k_s}`, ascending.
    pub fn stable_lambdas(&self) -> Vec<f64> {
        (1..=grid_count(self.h_s))
            .map(|k| k as f64 * self.h_s)
            .collect()
    }

    /// `{(k·h_u)⁻² : 1 ≤ k ≤ k_u}`, descending.
    pub fn unstable_lambdas(&self) -> Vec<f64> {
        (1..=grid_count(self.h_u))
            .map(|k| {
                let eta = k as f64 * self.h_u;
                1.0 / (eta * eta)
            })
            .collect()
    }
}

fn certify_on_grid(
    psi: &PsiMatrix,
    lambdas: &[f64],
    opts: &FeasibilityOptions,
) -> Result<Vec<LyapunovCertificate>, LmiError> {
    let mut out = Vec::new();
    for &lambda in lambdas {
        if let Some(cert) = solve_feasibility(psi, lambda, opts)?.into_certificate() {
            out.push(cert);
        }
    }
    Ok(out)
}

/// Certificates with `λ < 1`, ascending λ.
pub fn stable_grid(
    psi: &PsiMatrix,
    cfg: &GridConfig,
) -> Result<Vec<LyapunovCertificate>, LmiError> {
    certify_on_grid(psi, &cfg.stable_lambdas(), &cfg.feasibility)
}

/// Certificates with `λ = 1/η² > 1`, descending λ.
pub fn unstable_grid(
    psi: &PsiMatrix,
    cfg: &GridConfig,
) -> Result<Vec<LyapunovCertificate>, LmiError> {
    certify_on_grid(psi, &cfg.unstable_lambdas(), &cfg.feasibility)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StabilityClass {
    Stable,
    Unstable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Stable,
    Unstable,
    Undetermined,
}

/// Stable if the stable grid admits a certificate, otherwise unstable if the
/// unstable grid does, otherwise undetermined.
pub fn classify(
    psi: &PsiMatrix,
    cfg: &GridConfig,
) -> Result<(Verdict, Vec<LyapunovCertificate>), LmiError> {
    let stable = stable_grid(psi, cfg)?;
    if !stable.is_empty() {
        return Ok((Verdict::Stable, stable));
    }
    let unstable = unstable_grid(psi, cfg)?;
    if !unstable.is_empty() {
        return Ok((Verdict::Unstable, unstable));
    }
    Ok((Verdict::Undetermined, Vec::new()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    DataDerived,
    UserSupplied,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Classification {
    /// `classes[i - 1]` is the class of subsystem `i`.
    pub classes: Vec<StabilityClass>,
    pub provenance: Vec<Provenance>,
}

impl Classification {
    pub fn user_supplied(classes: Vec<StabilityClass>) -> Self {
        let provenance = vec![Provenance::UserSupplied; classes.len()];
        Self {
            classes,
            provenance,
        }
    }

    pub fn class_of(&self, id: SubsystemId) -> StabilityClass {
        self.classes[id - 1]
    }

    pub fn stable_set(&self) -> Vec<SubsystemId> {
        self.ids_with(StabilityClass::Stable)
    }

    pub fn unstable_set(&self) -> Vec<SubsystemId> {
        self.ids_with(StabilityClass::Unstable)
    }

    fn ids_with(&self, class: StabilityClass) -> Vec<SubsystemId> {
        self.classes
            .iter()
            .enumerate()
            .filter(|(_, &c)| c == class)
            .map(|(i, _)| i + 1)
            .collect()
    }
}

/// Λ_i for every subsystem, each list in ascending λ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateSet {
    pub per_subsystem: Vec<Vec<LyapunovCertificate>>,
}

impl CertificateSet {
    pub fn of(&self, id: SubsystemId) -> &[LyapunovCertificate] {
        &self.per_subsystem[id - 1]
    }

    pub fn total(&self) -> usize {
        self.per_subsystem.iter().map(Vec::len).sum()
    }
}

/// χ_ij: one μ per edge and per pair of certificate indices drawn from
/// `Λ_i × Λ_j`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GainTable {
    entries: BTreeMap<(SubsystemId, SubsystemId, usize, usize), f64>,
}

impl GainTable {
    pub fn get(
        &self,
        from: SubsystemId,
        to: SubsystemId,
        cert_from: usize,
        cert_to: usize,
    ) -> Option<f64> {
        self.entries.get(&(from, to, cert_from, cert_to)).copied()
    }

    pub fn insert(
        &mut self,
        from: SubsystemId,
        to: SubsystemId,
        cert_from: usize,
        cert_to: usize,
        mu: f64,
    ) {
        self.entries.insert((from, to, cert_from, cert_to), mu);
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(
        &self,
    ) -> impl Iterator<Item = ((SubsystemId, SubsystemId, usize, usize), f64)> + '_ {
        self.entries.iter().map(|(k, v)| (*k, *v))
    }
}

/// `μ_ij = λ_max(P_j P_i⁻¹)`.
pub fn compute_mu(
    cert_i: &LyapunovCertificate,
    cert_j: &LyapunovCertificate,
) -> Result<f64, LinalgError> {
    max_gen_eig(&cert_j.p, &cert_i.p)
}

/// Everything the cycle search needs.
#[derive(Debug, Clone)]
pub struct Certification {
    pub classification: Classification,
    pub certificates: CertificateSet,
    pub gains: GainTable,
    pub psis: Vec<PsiMatrix>,
    /// Number of feasibility problems solved.
    pub feasibility_solves: usize,
}

/// Builds Ψ for every subsystem, classifies (or honours a user
/// classification), and fills the gain table for every edge.
pub fn certify_all(
    dataset: &SubsystemDataset,
    cfg: &GridConfig,
    user_classification: Option<&Classification>,
) -> Result<Certification, CertifyError> {
    cfg.validate()?;
    let n = dataset.spec.n_subsystems;
    if let Some(user) = user_classification {
        if user.classes.len() != n {
            return Err(CertifyError::IncompleteClassification {
                expected: n,
                got: user.classes.len(),
            });
        }
    }

    let mut psis = Vec::with_capacity(n);
    let mut classes = Vec::with_capacity(n);
    let mut provenance = Vec::with_capacity(n);
    let mut per_subsystem = Vec::with_capacity(n);
    let mut feasibility_solves = 0;

    for trace in &dataset.traces {
        let id = trace.subsystem_id;
        let psi = build_psi(trace, NUMERIC.rank_rel)?;
        let (class, mut certs) = match user_classification.map(|u| u.class_of(id)) {
            Some(StabilityClass::Stable) => {
                feasibility_solves += cfg.stable_lambdas().len();
                (Some(StabilityClass::Stable), stable_grid(&psi, cfg)?)
            }
            Some(StabilityClass::Unstable) => {
                feasibility_solves += cfg.unstable_lambdas().len();
                (Some(StabilityClass::Unstable), unstable_grid(&psi, cfg)?)
            }
            None => {
                let (verdict, certs) = classify(&psi, cfg)?;
                feasibility_solves += cfg.stable_lambdas().len();
                if verdict != Verdict::Stable {
                    feasibility_solves += cfg.unstable_lambdas().len();
                }
                let class = match verdict {
                    Verdict::Stable => Some(StabilityClass::Stable),
                    Verdict::Unstable => Some(StabilityClass::Unstable),
                    Verdict::Undetermined => None,
                };
                (class, certs)
            }
        };
        certs.retain(|c| {
            let report = verify_certificate(c, &psi, trace);
            if !report.passed() {
                log::warn!(
                    "subsystem {id}: dropping certificate at lambda {} ({report:?})",
                    c.lambda
                );
            }
            report.passed()
        });
        let class = match class {
            Some(c) if !certs.is_empty() => c,
            _ => return Err(CertifyError::Undetermined(id)),
        };
        certs.sort_by(|a, b| a.lambda.total_cmp(&b.lambda));
        log::info!(
            "subsystem {id}: {class:?}, {} certificates, lambda in [{}, {}]",
            certs.len(),
            certs[0].lambda,
            certs[certs.len() - 1].lambda
        );
        classes.push(class);
        provenance.push(if user_classification.is_some() {
            Provenance::UserSupplied
        } else {
            Provenance::DataDerived
        });
        per_subsystem.push(certs);
        psis.push(psi);
    }

    let certificates = CertificateSet { per_subsystem };
    let mut gains = GainTable::default();
    for &(i, j) in &dataset.spec.edges {
        for (ci, cert_i) in certificates.of(i).iter().enumerate() {
            for (cj, cert_j) in certificates.of(j).iter().enumerate() {
                gains.insert(i, j, ci, cj, compute_mu(cert_i, cert_j)?);
            }
        }
    }

    Ok(Certification {
        classification: Classification {
            classes,
            provenance,
        },
        certificates,
        gains,
        psis,
        feasibility_solves,
    })
}
