//! Model-based simulation: trace generation for fixtures and closed-loop
//! checks of synthesized schedules. Synthesis itself never sees a model.

use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::SplitMix64;
use serde::Serialize;
use thiserror::Error;

use crate::cycle::ContractiveCycleResult;
use crate::dataset::{
    build_psi_default, CompanionModel, DatasetError, SubsystemDataset, SubsystemId, SwitchSpec,
    Trace,
};
use crate::linalg::norm2;
use crate::schedule::SwitchingSchedule;

/// Redraws allowed for one subsystem in [`gen_dataset`] and for whole paths
/// in [`random_admissible_sigma`].
pub const MAX_ATTEMPTS: usize = 100;

/// Relative slack on the per-period contraction bound.
pub const CONTRACTION_SLACK: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("no model for subsystem {0}")]
    MissingModel(SubsystemId),
    #[error("model {id} has dimension {got}, expected {expected}")]
    DimensionMismatch {
        id: SubsystemId,
        expected: usize,
        got: usize,
    },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("subsystem {id}: no valid trace after {attempts} draws")]
    GenerationFailed { id: SubsystemId, attempts: usize },
    #[error("no admissible continuation after {attempts} attempts")]
    NoContinuation { attempts: usize },
    #[error(transparent)]
    Dataset(#[from] DatasetError),
}

/// SplitMix64 (Steele, Lea, Flood 2014) with its state set to `seed`:
/// increment `0x9e3779b97f4a7c15`, mix multipliers `0xbf58476d1ce4e5b9` and
/// `0x94d049bb133111eb`, shifts 30, 27, 31. Every draw below is a fixed
/// function of its 64-bit outputs, so runs reproduce bit for bit.
pub fn seeded_rng(seed: u64) -> SplitMix64 {
    SplitMix64::from_seed(seed.to_le_bytes())
}

/// `2·(u >> 11)·2⁻⁵³ − 1`, a draw from `[−1, 1)`.
pub fn uniform_signed(rng: &mut impl RngCore) -> f64 {
    2.0 * ((rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64) - 1.0
}

/// `u mod n`, a draw from `0..n`. The bias is below `n·2⁻⁶⁴`.
pub fn uniform_index(rng: &mut impl RngCore, n: usize) -> usize {
    (rng.next_u64() % n as u64) as usize
}

/// Uniform draw from `[−1, 1]^d`.
pub fn uniform_box(rng: &mut impl RngCore, d: usize) -> Vec<f64> {
    (0..d).map(|_| uniform_signed(rng)).collect()
}

/// `steps + 1` samples of `x(t+1) = A x(t)`.
pub fn simulate_model(model: &CompanionModel, x0: &[f64], steps: usize) -> Trace {
    let mut samples = Vec::with_capacity(steps + 1);
    samples.push(x0.to_vec());
    for _ in 0..steps {
        let next = model.step(samples.last().expect("non-empty"));
        samples.push(next);
    }
    Trace::new(model.subsystem_id, samples)
}

/// Models indexed by subsystem id, all of dimension `d`.
fn index_models(
    models: &[CompanionModel],
    n: usize,
    d: usize,
) -> Result<Vec<&CompanionModel>, SimError> {
    (1..=n)
        .map(|id| {
            let m = models
                .iter()
                .find(|m| m.subsystem_id == id)
                .ok_or(SimError::MissingModel(id))?;
            if m.dimension() != d {
                return Err(SimError::DimensionMismatch {
                    id,
                    expected: d,
                    got: m.dimension(),
                });
            }
            Ok(m)
        })
        .collect()
}

/// Draws `x(0)` uniformly from `[−1,1]^d` and simulates `Δ−1` steps per
/// subsystem, redrawing until Ψ is well defined.
pub fn gen_dataset(
    models: &[CompanionModel],
    spec: &SwitchSpec,
    seed: u64,
) -> Result<SubsystemDataset, SimError> {
    spec.validate()?;
    let indexed = index_models(models, spec.n_subsystems, spec.dimension)?;
    let mut rng = seeded_rng(seed);
    let mut traces = Vec::with_capacity(spec.n_subsystems);
    for model in indexed {
        let mut accepted = None;
        for _ in 0..MAX_ATTEMPTS {
            let x0 = uniform_box(&mut rng, spec.dimension);
            let trace = simulate_model(model, &x0, spec.dwell_max - 1);
            if build_psi_default(&trace).is_ok() {
                accepted = Some(trace);
                break;
            }
        }
        let trace = accepted.ok_or(SimError::GenerationFailed {
            id: model.subsystem_id,
            attempts: MAX_ATTEMPTS,
        })?;
        traces.push(trace);
    }
    Ok(SubsystemDataset::new(spec.clone(), traces)?)
}

/// Closed-loop trajectory under a periodic schedule.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClosedLoopRun {
    pub schedule: SwitchingSchedule,
    pub x0: Vec<f64>,
    pub horizon: usize,
    /// `x(0..=horizon)`.
    pub states: Vec<Vec<f64>>,
    pub norms: Vec<f64>,
}

/// States `x(0..=σ.len())` under an explicit switching sequence.
pub fn simulate_sequence(
    models: &[CompanionModel],
    sigma: &[SubsystemId],
    x0: &[f64],
) -> Result<Vec<Vec<f64>>, SimError> {
    let n = sigma.iter().copied().max().unwrap_or(0);
    let indexed = index_models(models, n, x0.len())?;
    let mut states = Vec::with_capacity(sigma.len() + 1);
    states.push(x0.to_vec());
    for &id in sigma {
        let next = indexed[id - 1].step(states.last().expect("non-empty"));
        states.push(next);
    }
    Ok(states)
}

pub fn simulate_closed_loop(
    models: &[CompanionModel],
    schedule: &SwitchingSchedule,
    x0: &[f64],
    horizon: usize,
) -> Result<ClosedLoopRun, SimError> {
    if horizon == 0 {
        return Err(SimError::InvalidArgument(
            "horizon must be at least 1".into(),
        ));
    }
    let sigma: Vec<SubsystemId> = (0..horizon as u64).map(|t| schedule.sigma_at(t)).collect();
    let states = simulate_sequence(models, &sigma, x0)?;
    let norms = states.iter().map(|x| norm2(x)).collect();
    Ok(ClosedLoopRun {
        schedule: schedule.clone(),
        x0: x0.to_vec(),
        horizon,
        states,
        norms,
    })
}

/// Random admissible σ over `horizon` steps: uniform start vertex, dwell
/// uniform in `[δ:Δ]`, next vertex uniform among successors. Paths that hit
/// a vertex without successors are redrawn.
pub fn random_admissible_sigma(
    spec: &SwitchSpec,
    seed: u64,
    horizon: usize,
) -> Result<Vec<SubsystemId>, SimError> {
    let mut rng = seeded_rng(seed);
    'attempt: for _ in 0..MAX_ATTEMPTS {
        let mut sigma = Vec::with_capacity(horizon);
        let mut v = 1 + uniform_index(&mut rng, spec.n_subsystems);
        loop {
            let dwell =
                spec.dwell_min + uniform_index(&mut rng, spec.dwell_max - spec.dwell_min + 1);
            sigma.extend(std::iter::repeat_n(v, dwell));
            if sigma.len() >= horizon {
                sigma.truncate(horizon);
                return Ok(sigma);
            }
            let next: Vec<SubsystemId> = spec.successors(v).collect();
            if next.is_empty() {
                continue 'attempt;
            }
            v = next[uniform_index(&mut rng, next.len())];
        }
    }
    Err(SimError::NoContinuation {
        attempts: MAX_ATTEMPTS,
    })
}

/// Per-period Lyapunov ratios of a closed-loop run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContractionReport {
    /// The run used the schedule of the cycle result.
    pub schedule_matches: bool,
    /// `exp(weight)`.
    pub bound: f64,
    /// `V(x((k+1)T)) / V(x(kT))` for every whole period; 0 when `V(x(kT)) = 0`.
    pub ratios: Vec<f64>,
    /// Periods whose ratio exceeds the bound.
    pub violations: Vec<usize>,
}

impl ContractionReport {
    pub fn passed(&self) -> bool {
        self.schedule_matches && self.violations.is_empty()
    }

    pub fn worst_ratio(&self) -> f64 {
        self.ratios.iter().copied().fold(0.0, f64::max)
    }
}

/// Checks `V_{v0}(x((k+1)T)) ≤ exp(weight)·V_{v0}(x(kT))` at each period
/// boundary, with `V_{v0}` from the first cycle vertex's certificate.
pub fn contraction_report(
    run: &ClosedLoopRun,
    result: &ContractiveCycleResult,
) -> ContractionReport {
    let bound = result.weight.exp();
    let schedule_matches = run.schedule.vertices == result.cycle.vertices
        && run.schedule.dwells == result.dwells
        && result
            .certificates
            .first()
            .is_some_and(|c| c.subsystem_id == result.cycle.vertices[0]);
    let mut report = ContractionReport {
        schedule_matches,
        bound,
        ratios: vec![],
        violations: vec![],
    };
    if !schedule_matches {
        return report;
    }
    let p = &result.certificates[0].p;
    let period = run.schedule.period;
    let mut k = 0;
    while (k + 1) * period <= run.horizon {
        let before = p.quad_form(&run.states[k * period]);
        let after = p.quad_form(&run.states[(k + 1) * period]);
        let ratio = if before == 0.0 { 0.0 } else { after / before };
        if after > bound * before * (1.0 + CONTRACTION_SLACK) {
            report.violations.push(k);
        }
        report.ratios.push(ratio);
        k += 1;
    }
    report
}
