//! File formats: models, classification, synthesis result, norms CSV.

use std::io::Write;

use serde::{Deserialize, Serialize};
use switchsynth::certify::{Classification, GridConfig, Provenance, StabilityClass};
use switchsynth::cycle::{ContractiveCycleResult, Cycle};
use switchsynth::dataset::{CompanionModel, SubsystemId, SwitchSpec};
use switchsynth::lmi::LyapunovCertificate;
use switchsynth::schedule::SwitchingSchedule;

pub const MODELS_CONVENTION: &str =
    "x(t+1) = A x(t); A has first row [-a_{d-1}, ..., -a_0] and ones on the \
                                     subdiagonal; coeffs lists [a_{d-1}, ..., a_0]";

/// Nine significant digits in scientific notation.
pub fn sig9(x: f64) -> String {
    format!("{x:.8e}")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelsFile {
    #[serde(default)]
    pub convention: Option<String>,
    pub d: usize,
    pub models: Vec<CompanionModel>,
}

impl ModelsFile {
    pub fn new(d: usize, mut models: Vec<CompanionModel>) -> Self {
        models.sort_by_key(|m| m.subsystem_id);
        Self {
            convention: Some(MODELS_CONVENTION.to_string()),
            d,
            models,
        }
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        let mut file: Self = serde_json::from_str(text).map_err(|e| format!("models file: {e}"))?;
        file.models.sort_by_key(|m| m.subsystem_id);
        for (k, m) in file.models.iter().enumerate() {
            if m.subsystem_id != k + 1 {
                return Err(format!(
                    "models file: ids must be 1..={} without gaps",
                    file.models.len()
                ));
            }
            if m.dimension() != file.d {
                return Err(format!(
                    "models file: model {} has {} coefficients, d = {}",
                    k + 1,
                    m.dimension(),
                    file.d
                ));
            }
            if m.coeffs.iter().any(|c| !c.is_finite()) {
                return Err(format!(
                    "models file: model {} has a non-finite coefficient",
                    k + 1
                ));
            }
        }
        Ok(file)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("models serialize")
    }
}

/// User classification: `{"stable": [..], "unstable": [..]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassificationFile {
    pub stable: Vec<SubsystemId>,
    pub unstable: Vec<SubsystemId>,
}

impl ClassificationFile {
    pub fn parse(text: &str, n: usize) -> Result<Classification, String> {
        let file: Self =
            serde_json::from_str(text).map_err(|e| format!("classification file: {e}"))?;
        let mut classes = vec![None; n];
        for (ids, class) in [
            (&file.stable, StabilityClass::Stable),
            (&file.unstable, StabilityClass::Unstable),
        ] {
            for &id in ids {
                if !(1..=n).contains(&id) {
                    return Err(format!("classification file: id {id} outside 1..={n}"));
                }
                if classes[id - 1].replace(class).is_some() {
                    return Err(format!("classification file: id {id} listed twice"));
                }
            }
        }
        let classes = classes
            .into_iter()
            .enumerate()
            .map(|(k, c)| {
                c.ok_or_else(|| format!("classification file: subsystem {} missing", k + 1))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Classification::user_supplied(classes))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecDocument {
    pub d: usize,
    #[serde(rename = "N")]
    pub n: usize,
    pub delta: usize,
    #[serde(rename = "Delta")]
    pub delta_max: usize,
    pub edges: Vec<[SubsystemId; 2]>,
}

impl From<&SwitchSpec> for SpecDocument {
    fn from(s: &SwitchSpec) -> Self {
        Self {
            d: s.dimension,
            n: s.n_subsystems,
            delta: s.dwell_min,
            delta_max: s.dwell_max,
            edges: s.edges.iter().map(|&(i, j)| [i, j]).collect(),
        }
    }
}

impl SpecDocument {
    pub fn to_spec(&self) -> Result<SwitchSpec, String> {
        SwitchSpec::new(
            self.n,
            self.d,
            self.edges.iter().map(|e| (e[0], e[1])),
            self.delta,
            self.delta_max,
        )
        .map_err(|e| e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassEntry {
    pub id: SubsystemId,
    pub class: StabilityClass,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GainEntry {
    pub from: SubsystemId,
    pub to: SubsystemId,
    pub mu: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Diagnostics {
    pub grid: GridConfig,
    pub stable_grid: Vec<f64>,
    pub unstable_grid: Vec<f64>,
    pub psi_offsets: Vec<usize>,
    pub certificates_per_subsystem: Vec<usize>,
    pub feasibility_solves: usize,
    pub gains_computed: usize,
    /// Index into each Λ_i of the successful selection.
    pub selection: Vec<usize>,
    pub selections_tried: usize,
    pub selection_cap: usize,
}

/// Run metadata; the only part of the document that differs between
/// identical runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Timestamp {
    pub unix_seconds: u64,
    pub wall_time_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthesisResult {
    pub spec: SpecDocument,
    pub classification: Vec<ClassEntry>,
    pub cycle: Vec<SubsystemId>,
    pub dwells: Vec<usize>,
    /// Contractiveness of the cycle; negative.
    pub weight: f64,
    /// Certificate of each cycle vertex, in cycle order.
    pub certificates: Vec<LyapunovCertificate>,
    /// μ along each cycle edge, closing edge last.
    pub mus: Vec<GainEntry>,
    pub schedule: SwitchingSchedule,
    pub diagnostics: Diagnostics,
    pub timestamp: Timestamp,
}

impl SynthesisResult {
    pub fn parse(text: &str) -> Result<Self, String> {
        serde_json::from_str(text).map_err(|e| format!("result file: {e}"))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("result serializes")
    }

    /// The cycle data in the form the contraction check expects.
    pub fn cycle_result(&self) -> ContractiveCycleResult {
        ContractiveCycleResult {
            cycle: Cycle {
                vertices: self.cycle.clone(),
            },
            dwells: self.dwells.clone(),
            weight: self.weight,
            certificates: self.certificates.clone(),
            mus: self.mus.iter().map(|g| g.mu).collect(),
            selection: self.diagnostics.selection.clone(),
            selections_tried: self.diagnostics.selections_tried,
        }
    }
}

/// Writes `run,t,norm` rows.
pub fn write_norms_csv(out: &mut impl Write, runs: &[Vec<f64>]) -> std::io::Result<()> {
    writeln!(out, "run,t,norm")?;
    for (run, norms) in runs.iter().enumerate() {
        for (t, norm) in norms.iter().enumerate() {
            writeln!(out, "{run},{t},{}", sig9(*norm))?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nine_significant_digits() {
        assert_eq!(sig9(1.0), "1.00000000e0");
        assert_eq!(sig9(3.18831224485), "3.18831224e0");
        assert_eq!(sig9(-0.000123456789012), "-1.23456789e-4");
        assert_eq!(sig9(0.0), "0.00000000e0");
        let x = 7.123456789e-41;
        assert!(((sig9(x).parse::<f64>().unwrap() - x) / x).abs() < 1e-8);
    }

    #[test]
    fn models_round_trip() {
        let file = ModelsFile::new(
            2,
            vec![
                CompanionModel::new(2, vec![0.1, 0.2]),
                CompanionModel::new(1, vec![0.3, -0.4]),
            ],
        );
        let again = ModelsFile::parse(&file.to_json()).unwrap();
        assert_eq!(again, file);
        assert_eq!(again.models[0].subsystem_id, 1);
        assert!(ModelsFile::parse(r#"{"d": 2, "models": [{"id": 1, "coeffs": [1.0]}]}"#).is_err());
        assert!(ModelsFile::parse(r#"{"d": 1, "models": [{"id": 2, "coeffs": [1.0]}]}"#).is_err());
        assert!(ModelsFile::parse(r#"{"d": 1, "extra": 0, "models": []}"#).is_err());
    }

    #[test]
    fn classification_file_rules() {
        let c = ClassificationFile::parse(r#"{"stable": [2], "unstable": [1, 3]}"#, 3).unwrap();
        assert_eq!(
            c.classes,
            vec![
                StabilityClass::Unstable,
                StabilityClass::Stable,
                StabilityClass::Unstable
            ]
        );
        assert!(ClassificationFile::parse(r#"{"stable": [1], "unstable": [1, 2]}"#, 2).is_err());
        assert!(ClassificationFile::parse(r#"{"stable": [1], "unstable": []}"#, 2).is_err());
        assert!(ClassificationFile::parse(r#"{"stable": [3], "unstable": [1]}"#, 2).is_err());
    }

    #[test]
    fn csv_layout() {
        let mut buf = Vec::new();
        write_norms_csv(&mut buf, &[vec![1.0, 0.5], vec![2.0]]).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "run,t,norm\n0,0,1.00000000e0\n0,1,5.00000000e-1\n1,0,2.00000000e0\n"
        );
    }
}
