#![allow(dead_code)]

use std::path::PathBuf;

use switchsynth::dataset::{parse_dataset, CompanionModel, SubsystemDataset};
use switchsynth::linalg::DenseMatrix;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(name)
}

pub fn example_dataset() -> SubsystemDataset {
    parse_dataset(&std::fs::read_to_string(fixture("example_dataset.json")).unwrap()).unwrap()
}

pub fn example_models() -> Vec<CompanionModel> {
    let doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(fixture("example_models.json")).unwrap())
            .unwrap();
    serde_json::from_value(doc["models"].clone()).unwrap()
}

/// The printed `P₄`, `P₅` at λ = 0.7.
pub fn printed_certificates() -> (DenseMatrix, DenseMatrix) {
    let doc: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(fixture("example_certificates.json")).unwrap(),
    )
    .unwrap();
    let p4 = serde_json::from_value(doc["P4"].clone()).unwrap();
    let p5 = serde_json::from_value(doc["P5"].clone()).unwrap();
    (p4, p5)
}
