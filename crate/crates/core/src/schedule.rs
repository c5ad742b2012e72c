//! Periodic switching logic built from a contractive cycle.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cycle::ContractiveCycleResult;
use crate::dataset::{SubsystemId, SwitchSpec};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ScheduleError {
    #[error("admissibility violation: {0}")]
    AdmissibilityViolation(String),
}

/// One period of σ; the logic repeats it forever.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SwitchingSchedule {
    pub vertices: Vec<SubsystemId>,
    pub dwells: Vec<usize>,
    pub period: usize,
    /// Switching instants inside one period, starting at 0.
    pub instants: Vec<usize>,
}

impl SwitchingSchedule {
    /// Assembles a schedule without checking it against any graph.
    pub fn from_parts(
        vertices: Vec<SubsystemId>,
        dwells: Vec<usize>,
    ) -> Result<Self, ScheduleError> {
        if vertices.is_empty() || vertices.len() != dwells.len() {
            return Err(ScheduleError::AdmissibilityViolation(format!(
                "{} vertices with {} dwells",
                vertices.len(),
                dwells.len()
            )));
        }
        if dwells.contains(&0) {
            return Err(ScheduleError::AdmissibilityViolation("zero dwell".into()));
        }
        let mut instants = Vec::with_capacity(dwells.len());
        let mut tau = 0;
        for &d in &dwells {
            instants.push(tau);
            tau += d;
        }
        Ok(Self {
            vertices,
            dwells,
            period: tau,
            instants,
        })
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// Active subsystem at time `t`.
    pub fn sigma_at(&self, t: u64) -> SubsystemId {
        let r = (t % self.period as u64) as usize;
        let k = match self.instants.binary_search(&r) {
            Ok(k) => k,
            Err(k) => k - 1,
        };
        self.vertices[k]
    }

    /// Every transition over two periods is an edge and every dwell lies in
    /// `[δ:Δ]`. The second period covers the wrap-around pair.
    pub fn check_admissible(&self, spec: &SwitchSpec) -> bool {
        admissibility_problem(self, spec).is_none()
    }
}

fn admissibility_problem(s: &SwitchingSchedule, spec: &SwitchSpec) -> Option<String> {
    let l = s.vertices.len();
    if l == 0 || s.dwells.len() != l {
        return Some("malformed schedule".into());
    }
    if s.period != s.dwells.iter().sum::<usize>() {
        return Some(format!("period {} differs from the dwell sum", s.period));
    }
    for k in 0..2 * l {
        let (v, d) = (s.vertices[k % l], s.dwells[k % l]);
        if !spec.dwell_ok(d) {
            return Some(format!(
                "dwell {d} on subsystem {v} outside [{}:{}]",
                spec.dwell_min, spec.dwell_max
            ));
        }
        let next = s.vertices[(k + 1) % l];
        if !spec.has_edge(v, next) {
            return Some(format!("switch ({v}, {next}) is not an edge"));
        }
    }
    None
}

/// Converts a contractive cycle into σ.
pub fn build_schedule(
    result: &ContractiveCycleResult,
    spec: &SwitchSpec,
) -> Result<SwitchingSchedule, ScheduleError> {
    if !(result.weight < 0.0) {
        return Err(ScheduleError::AdmissibilityViolation(format!(
            "cycle weight {} is not negative",
            result.weight
        )));
    }
    let s = SwitchingSchedule::from_parts(result.cycle.vertices.clone(), result.dwells.clone())?;
    match admissibility_problem(&s, spec) {
        Some(why) => Err(ScheduleError::AdmissibilityViolation(why)),
        None => Ok(s),
    }
}
