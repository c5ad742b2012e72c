use std::fs;
use std::path::{Path, PathBuf};

use switchsynth_cli::formats::SynthesisResult;
use switchsynth_cli::run;
use tempfile::TempDir;

const EXAMPLE_EDGES: &str = "1-2,1-4,1-5,2-3,2-4,2-5,3-4,3-5,4-5,5-1,5-4";

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(name)
}

struct Outcome {
    code: i32,
    stdout: String,
    stderr: String,
}

fn cli(args: &[&str]) -> Outcome {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = run(
        std::iter::once("switchsynth").chain(args.iter().copied()),
        &mut out,
        &mut err,
    );
    Outcome {
        code,
        stdout: String::from_utf8(out).unwrap(),
        stderr: String::from_utf8(err).unwrap(),
    }
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn scalar_dataset(dir: &Path, name: &str, coeffs: &[f64]) -> PathBuf {
    let n = coeffs.len();
    let edges: Vec<[usize; 2]> = (1..=n)
        .flat_map(|i| (1..=n).filter(move |&j| j != i).map(move |j| [i, j]))
        .collect();
    let traces: Vec<serde_json::Value> = coeffs
        .iter()
        .enumerate()
        .map(|(k, a)| serde_json::json!({"id": k + 1, "samples": [[1.0], [a], [a * a]]}))
        .collect();
    let doc = serde_json::json!({"d": 1, "N": n, "delta": 1, "Delta": 2, "edges": edges, "traces": traces});
    let p = dir.join(name);
    fs::write(&p, doc.to_string()).unwrap();
    p
}

#[test]
fn validate_reports_windows() {
    let r = cli(&["validate", path(&fixture("example_dataset.json"))]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert_eq!(
        r.stdout
            .lines()
            .filter(|l| l.ends_with("rank 5 at T=0"))
            .count(),
        5
    );
}

#[test]
fn validate_rejects_bad_input() {
    let dir = TempDir::new().unwrap();
    let corrupt = dir.path().join("corrupt.json");
    fs::write(&corrupt, "{\"d\": 1, \"N\": ").unwrap();
    let r = cli(&["validate", path(&corrupt)]);
    assert_eq!(r.code, 2);
    assert!(r.stderr.contains("schema"), "{}", r.stderr);

    let short = dir.path().join("short.json");
    fs::write(
        &short,
        r#"{"d": 2, "N": 1, "delta": 1, "Delta": 3, "edges": [], "traces": [{"id": 1, "samples": [[1, 0], [0, 1]]}]}"#,
    )
    .unwrap();
    assert_eq!(cli(&["validate", path(&short)]).code, 2);
    assert_eq!(
        cli(&["validate", path(&dir.path().join("missing.json"))]).code,
        2
    );
}

#[test]
fn two_unstable_scalars_fail() {
    let dir = TempDir::new().unwrap();
    let ds = scalar_dataset(dir.path(), "ds.json", &[2.0, 3.0]);
    let out = dir.path().join("r.json");
    let r = cli(&["stabilize", path(&ds), "--out", path(&out)]);
    assert_eq!(r.code, 3, "{}", r.stderr);
    assert!(r.stdout.lines().any(|l| l == "FAIL"));
    assert!(!out.exists());
}

#[test]
fn stable_and_unstable_scalars_succeed() {
    let dir = TempDir::new().unwrap();
    let ds = scalar_dataset(dir.path(), "ds.json", &[0.2, 1.5]);
    let out = dir.path().join("r.json");
    let r = cli(&["stabilize", path(&ds), "--out", path(&out)]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let result = SynthesisResult::parse(&fs::read_to_string(&out).unwrap()).unwrap();
    assert!(result.weight < 0.0);
    assert_eq!(result.cycle, vec![1, 2]);
    assert_eq!(result.dwells, vec![2, 1]);
}

#[test]
fn out_of_grid_system_is_undetermined() {
    let dir = TempDir::new().unwrap();
    let ds = scalar_dataset(dir.path(), "ds.json", &[0.5, 11.0]);
    let r = cli(&[
        "stabilize",
        path(&ds),
        "--out",
        path(&dir.path().join("r.json")),
    ]);
    assert_eq!(r.code, 4, "{}", r.stderr);
}

#[test]
fn stabilize_input_errors() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("r.json");
    assert_eq!(
        cli(&[
            "stabilize",
            path(&dir.path().join("none.json")),
            "--out",
            path(&out)
        ])
        .code,
        2
    );
    let ds = scalar_dataset(dir.path(), "ds.json", &[0.2, 1.5]);
    assert_eq!(
        cli(&["stabilize", path(&ds), "--hs", "1.5", "--out", path(&out)]).code,
        2
    );
    assert_eq!(
        cli(&[
            "stabilize",
            path(&ds),
            "--max-iters",
            "0",
            "--out",
            path(&out)
        ])
        .code,
        2
    );
    assert_eq!(cli(&["stabilize", path(&ds)]).code, 2);
    let classes = dir.path().join("classes.json");
    fs::write(&classes, r#"{"stable": [1], "unstable": []}"#).unwrap();
    let r = cli(&[
        "stabilize",
        path(&ds),
        "--classification-path",
        path(&classes),
        "--out",
        path(&out),
    ]);
    assert_eq!(r.code, 2);
}

#[test]
fn user_classification_is_recorded() {
    let dir = TempDir::new().unwrap();
    let ds = scalar_dataset(dir.path(), "ds.json", &[0.2, 1.5]);
    let classes = dir.path().join("classes.json");
    fs::write(&classes, r#"{"stable": [1], "unstable": [2]}"#).unwrap();
    let out = dir.path().join("r.json");
    let r = cli(&[
        "stabilize",
        path(&ds),
        "--classification-path",
        path(&classes),
        "--out",
        path(&out),
    ]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let text = fs::read_to_string(&out).unwrap();
    assert!(text.contains("user-supplied"));
    assert!(!text.contains("data-derived"));
}

#[test]
fn gen_traces_contract() {
    let dir = TempDir::new().unwrap();
    let models = fixture("example_models.json");
    let out = dir.path().join("ds.json");
    let args = [
        "gen-traces",
        path(&models),
        "--delta",
        "2",
        "--delta-max",
        "6",
        "--edges",
        EXAMPLE_EDGES,
        "--seed",
        "1",
        "--out",
        path(&out),
    ];
    assert_eq!(cli(&args).code, 0);
    let first = fs::read_to_string(&out).unwrap();
    let ds = switchsynth::dataset::parse_dataset(&first).unwrap();
    assert_eq!(ds.traces.len(), 5);
    assert!(ds.traces.iter().all(|t| t.samples.len() == 6));
    assert_eq!(cli(&["validate", path(&out)]).code, 0);
    assert_eq!(cli(&args).code, 0);
    assert_eq!(fs::read_to_string(&out).unwrap(), first);

    let mismatch = [
        "gen-traces",
        path(&models),
        "--n",
        "4",
        "--delta",
        "2",
        "--delta-max",
        "6",
        "--out",
        path(&out),
    ];
    assert_eq!(cli(&mismatch).code, 2);
    let bad_spec = [
        "gen-traces",
        path(&models),
        "--delta",
        "3",
        "--delta-max",
        "2",
        "--out",
        path(&out),
    ];
    assert_eq!(cli(&bad_spec).code, 2);
}

#[test]
fn gen_traces_generation_outcomes() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("ds.json");
    let nilpotent = dir.path().join("nilpotent.json");
    fs::write(
        &nilpotent,
        r#"{"d": 3, "models": [{"id": 1, "coeffs": [0, 0, 0]}]}"#,
    )
    .unwrap();
    assert_eq!(
        cli(&[
            "gen-traces",
            path(&nilpotent),
            "--delta",
            "1",
            "--delta-max",
            "4",
            "--out",
            path(&out)
        ])
        .code,
        0
    );
    let overflowing = dir.path().join("overflow.json");
    fs::write(
        &overflowing,
        r#"{"d": 2, "models": [{"id": 1, "coeffs": [1e308, 1e308]}]}"#,
    )
    .unwrap();
    assert_eq!(
        cli(&[
            "gen-traces",
            path(&overflowing),
            "--delta",
            "1",
            "--delta-max",
            "3",
            "--out",
            path(&out)
        ])
        .code,
        6
    );
}

fn scalar_models(dir: &Path, coeffs: &[f64]) -> PathBuf {
    let models: Vec<serde_json::Value> = coeffs
        .iter()
        .enumerate()
        .map(|(k, a)| serde_json::json!({"id": k + 1, "coeffs": [-a]}))
        .collect();
    let p = dir.join("models.json");
    fs::write(
        &p,
        serde_json::json!({"d": 1, "models": models}).to_string(),
    )
    .unwrap();
    p
}

#[test]
fn simulate_checks_schedule_and_flags() {
    let dir = TempDir::new().unwrap();
    let coeffs = [0.2, 1.5];
    let ds = scalar_dataset(dir.path(), "ds.json", &coeffs);
    let models = scalar_models(dir.path(), &coeffs);
    let result = dir.path().join("r.json");
    assert_eq!(
        cli(&["stabilize", path(&ds), "--out", path(&result)]).code,
        0
    );

    let norms = dir.path().join("norms.csv");
    let r = cli(&[
        "simulate",
        path(&models),
        path(&result),
        "--x0-count",
        "3",
        "--horizon",
        "30",
        "--norms-out",
        path(&norms),
    ]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let csv = fs::read_to_string(&norms).unwrap();
    assert_eq!(csv.lines().next(), Some("run,t,norm"));
    assert_eq!(csv.lines().count(), 1 + 3 * 31);

    assert_eq!(
        cli(&["simulate", path(&models), path(&result), "--horizon", "0"]).code,
        2
    );

    let mut doc: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&result).unwrap()).unwrap();
    doc["schedule"]["dwells"][0] = serde_json::json!(1);
    doc["schedule"]["dwells"][1] = serde_json::json!(1);
    // Dwell 1 against δ = 2.
    doc["spec"]["delta"] = serde_json::json!(2);
    let corrupted = dir.path().join("corrupted.json");
    fs::write(&corrupted, doc.to_string()).unwrap();
    assert_eq!(cli(&["simulate", path(&models), path(&corrupted)]).code, 5);
}

#[test]
fn results_are_deterministic_and_round_trip() {
    let dir = TempDir::new().unwrap();
    let ds = scalar_dataset(dir.path(), "ds.json", &[0.3, 1.7, 0.6]);
    let (a, b) = (dir.path().join("a.json"), dir.path().join("b.json"));
    assert_eq!(cli(&["stabilize", path(&ds), "--out", path(&a)]).code, 0);
    assert_eq!(cli(&["stabilize", path(&ds), "--out", path(&b)]).code, 0);
    let strip = |p: &Path| {
        let mut v: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap();
        v.as_object_mut().unwrap().remove("timestamp");
        serde_json::to_string(&v).unwrap()
    };
    assert_eq!(strip(&a), strip(&b));

    let parsed = SynthesisResult::parse(&fs::read_to_string(&a).unwrap()).unwrap();
    assert_eq!(SynthesisResult::parse(&parsed.to_json()).unwrap(), parsed);
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(cli(&[]).code, 2);
    assert_eq!(cli(&["frobnicate"]).code, 2);
    assert_eq!(cli(&["--help"]).code, 0);
}
