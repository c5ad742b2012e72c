//! Subcommand implementations. Each returns the process exit status.

use std::fmt;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use switchsynth::certify::{certify_all, CertifyError, GridConfig};
use switchsynth::cycle::{search_contractive, CycleError};
use switchsynth::dataset::{build_psi_default, parse_dataset, SubsystemDataset, SwitchSpec};
use switchsynth::lmi::FeasibilityOptions;
use switchsynth::schedule::build_schedule;
use switchsynth::simulate::{
    contraction_report, gen_dataset, seeded_rng, simulate_closed_loop, uniform_box, SimError,
};

use crate::formats::{
    sig9, write_norms_csv, ClassEntry, ClassificationFile, Diagnostics, GainEntry, ModelsFile,
    SpecDocument, SynthesisResult, Timestamp,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_FAIL: i32 = 3;
pub const EXIT_UNDETERMINED: i32 = 4;
pub const EXIT_VERIFICATION: i32 = 5;
pub const EXIT_GENERATION: i32 = 6;

/// An error with the exit status it maps to.
#[derive(Debug)]
pub struct Exit {
    pub code: i32,
    pub message: String,
}

impl Exit {
    fn input(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_INPUT,
            message: message.into(),
        }
    }

    fn verification(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_VERIFICATION,
            message: message.into(),
        }
    }
}

impl fmt::Display for Exit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

pub type Outcome = Result<(), Exit>;

fn read(path: &Path) -> Result<String, Exit> {
    fs::read_to_string(path)
        .map_err(|e| Exit::input(format!("cannot read {}: {e}", path.display())))
}

fn write(path: &Path, contents: &str) -> Outcome {
    fs::write(path, contents)
        .map_err(|e| Exit::input(format!("cannot write {}: {e}", path.display())))
}

fn load_dataset(path: &Path) -> Result<SubsystemDataset, Exit> {
    parse_dataset(&read(path)?).map_err(|e| Exit::input(e.to_string()))
}

pub fn validate(dataset: &Path, out: &mut impl Write) -> Outcome {
    let ds = load_dataset(dataset)?;
    for warning in ds.diagnostics() {
        log::warn!("{warning}");
    }
    for trace in &ds.traces {
        let psi = build_psi_default(trace).map_err(|e| Exit::input(e.to_string()))?;
        let _ = writeln!(
            out,
            "subsystem {}: rank {} at T={}",
            trace.subsystem_id,
            psi.dimension(),
            psi.offset
        );
    }
    Ok(())
}

pub struct StabilizeArgs<'a> {
    pub dataset: &'a Path,
    pub h_s: f64,
    pub h_u: f64,
    pub eps: f64,
    pub max_iters: usize,
    pub selection_cap: usize,
    pub classification: Option<&'a Path>,
    pub out: &'a Path,
}

/// Builds the result document, or reports why none exists.
pub fn synthesize(
    ds: &SubsystemDataset,
    grid: &GridConfig,
    selection_cap: usize,
    classification: Option<&switchsynth::certify::Classification>,
) -> Result<SynthesisResult, Exit> {
    let started = Instant::now();
    let cert = certify_all(ds, grid, classification).map_err(|e| match e {
        CertifyError::Undetermined(_) => Exit {
            code: EXIT_UNDETERMINED,
            message: e.to_string(),
        },
        CertifyError::Dataset(_)
        | CertifyError::InvalidGrid(_)
        | CertifyError::IncompleteClassification { .. } => Exit::input(e.to_string()),
        CertifyError::Lmi(_) | CertifyError::Linalg(_) => Exit::verification(e.to_string()),
    })?;
    let spec = &ds.spec;
    let result = match search_contractive(&cert, spec, selection_cap) {
        Ok(Some(r)) => r,
        Ok(None) => {
            return Err(Exit {
                code: EXIT_FAIL,
                message: "FAIL: no contractive cycle among the certificate selections".into(),
            })
        }
        Err(CycleError::SelectionCapExceeded { cap, .. }) => {
            return Err(Exit {
                code: EXIT_FAIL,
                message: format!(
                    "FAIL: no contractive cycle within the first {cap} certificate selections"
                ),
            })
        }
        Err(e @ CycleError::MissingData(_)) => return Err(Exit::verification(e.to_string())),
    };
    let schedule = build_schedule(&result, spec).map_err(|e| Exit::verification(e.to_string()))?;

    let classes = &cert.classification;
    let mus = result
        .cycle
        .edges()
        .zip(&result.mus)
        .map(|((from, to), &mu)| GainEntry { from, to, mu })
        .collect();
    Ok(SynthesisResult {
        spec: SpecDocument::from(spec),
        classification: (1..=spec.n_subsystems)
            .map(|id| ClassEntry {
                id,
                class: classes.class_of(id),
                provenance: classes.provenance[id - 1],
            })
            .collect(),
        cycle: result.cycle.vertices.clone(),
        dwells: result.dwells.clone(),
        weight: result.weight,
        certificates: result.certificates.clone(),
        mus,
        schedule,
        diagnostics: Diagnostics {
            grid: *grid,
            stable_grid: grid.stable_lambdas(),
            unstable_grid: grid.unstable_lambdas(),
            psi_offsets: cert.psis.iter().map(|p| p.offset).collect(),
            certificates_per_subsystem: cert
                .certificates
                .per_subsystem
                .iter()
                .map(Vec::len)
                .collect(),
            feasibility_solves: cert.feasibility_solves,
            gains_computed: cert.gains.len(),
            selection: result.selection.clone(),
            selections_tried: result.selections_tried,
            selection_cap,
        },
        timestamp: Timestamp {
            unix_seconds: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map_or(0, |d| d.as_secs()),
            wall_time_seconds: started.elapsed().as_secs_f64(),
        },
    })
}

pub fn stabilize(args: &StabilizeArgs, out: &mut impl Write) -> Outcome {
    let ds = load_dataset(args.dataset)?;
    let grid = GridConfig {
        h_s: args.h_s,
        h_u: args.h_u,
        feasibility: FeasibilityOptions {
            eps_feas: args.eps,
            max_iters: args.max_iters,
            ..FeasibilityOptions::default()
        },
    };
    grid.validate().map_err(|e| Exit::input(e.to_string()))?;
    if args.selection_cap == 0 {
        return Err(Exit::input("--selection-cap must be at least 1"));
    }
    let classification = match args.classification {
        Some(path) => Some(
            ClassificationFile::parse(&read(path)?, ds.spec.n_subsystems).map_err(Exit::input)?,
        ),
        None => None,
    };
    let result = synthesize(&ds, &grid, args.selection_cap, classification.as_ref())?;
    write(args.out, &result.to_json())?;

    let _ = writeln!(
        out,
        "cycle {:?} dwells {:?} weight {}",
        result.cycle,
        result.dwells,
        sig9(result.weight)
    );
    for (c, g) in result.certificates.iter().zip(&result.mus) {
        let _ = writeln!(
            out,
            "subsystem {}: lambda {}, mu({}, {}) = {}",
            c.subsystem_id,
            sig9(c.lambda),
            g.from,
            g.to,
            sig9(g.mu)
        );
    }
    let _ = writeln!(
        out,
        "period {}, selections tried {}",
        result.schedule.period, result.diagnostics.selections_tried
    );
    Ok(())
}

pub struct SimulateArgs<'a> {
    pub models: &'a Path,
    pub result: &'a Path,
    pub x0_count: usize,
    pub horizon: usize,
    pub seed: u64,
    pub norms_out: Option<&'a Path>,
}

fn load_models(path: &Path) -> Result<ModelsFile, Exit> {
    ModelsFile::parse(&read(path)?).map_err(Exit::input)
}

pub fn simulate(args: &SimulateArgs, out: &mut impl Write) -> Outcome {
    if args.horizon == 0 {
        return Err(Exit::input("--horizon must be at least 1"));
    }
    if args.x0_count == 0 {
        return Err(Exit::input("--x0-count must be at least 1"));
    }
    let models = load_models(args.models)?;
    let result = SynthesisResult::parse(&read(args.result)?).map_err(Exit::input)?;
    let spec = result.spec.to_spec().map_err(Exit::input)?;
    if models.d != spec.dimension || models.models.len() != spec.n_subsystems {
        return Err(Exit::input(format!(
            "models (d = {}, N = {}) do not match the result (d = {}, N = {})",
            models.d,
            models.models.len(),
            spec.dimension,
            spec.n_subsystems
        )));
    }
    let schedule = &result.schedule;
    let well_formed = !schedule.is_empty()
        && schedule.dwells.len() == schedule.vertices.len()
        && schedule
            .vertices
            .iter()
            .all(|v| (1..=spec.n_subsystems).contains(v));
    if !well_formed || !schedule.check_admissible(&spec) {
        return Err(Exit::verification(
            "schedule is not admissible for the switching spec",
        ));
    }

    let cycle = result.cycle_result();
    let mut rng = seeded_rng(args.seed);
    let mut norms = Vec::with_capacity(args.x0_count);
    let (mut failed_runs, mut worst_ratio, mut worst_final) = (0, 0.0f64, 0.0f64);
    for _ in 0..args.x0_count {
        let x0 = uniform_box(&mut rng, spec.dimension);
        let run = simulate_closed_loop(&models.models, schedule, &x0, args.horizon)
            .map_err(|e: SimError| Exit::input(e.to_string()))?;
        let report = contraction_report(&run, &cycle);
        if !report.passed() {
            failed_runs += 1;
        }
        worst_ratio = worst_ratio.max(report.worst_ratio());
        worst_final = worst_final.max(run.norms[args.horizon] / run.norms[0].max(1.0));
        norms.push(run.norms);
    }

    if let Some(path) = args.norms_out {
        let file = fs::File::create(path)
            .map_err(|e| Exit::input(format!("cannot write {}: {e}", path.display())))?;
        let mut w = BufWriter::new(file);
        write_norms_csv(&mut w, &norms)
            .and_then(|_| w.flush())
            .map_err(|e| Exit::input(format!("cannot write {}: {e}", path.display())))?;
    }

    let _ = writeln!(
        out,
        "runs {}, horizon {}, period {}, bound {}, worst period ratio {}, worst final norm / max(1, |x0|) {}",
        args.x0_count,
        args.horizon,
        schedule.period,
        sig9(cycle.weight.exp()),
        sig9(worst_ratio),
        sig9(worst_final)
    );
    if failed_runs > 0 {
        return Err(Exit::verification(format!(
            "{failed_runs} runs violated the per-period contraction bound"
        )));
    }
    Ok(())
}

pub struct GenTracesArgs<'a> {
    pub models: &'a Path,
    pub n: Option<usize>,
    pub delta: usize,
    pub delta_max: usize,
    pub edges: &'a [(usize, usize)],
    pub seed: u64,
    pub out: &'a Path,
}

pub fn gen_traces(args: &GenTracesArgs, out: &mut impl Write) -> Outcome {
    let models = load_models(args.models)?;
    let n = args.n.unwrap_or(models.models.len());
    if n != models.models.len() {
        return Err(Exit::input(format!(
            "--n {n} but the models file has {} models",
            models.models.len()
        )));
    }
    let spec = SwitchSpec::new(
        n,
        models.d,
        args.edges.iter().copied(),
        args.delta,
        args.delta_max,
    )
    .map_err(|e| Exit::input(e.to_string()))?;
    let ds = gen_dataset(&models.models, &spec, args.seed).map_err(|e| match e {
        SimError::GenerationFailed { .. } => Exit {
            code: EXIT_GENERATION,
            message: e.to_string(),
        },
        other => Exit::input(other.to_string()),
    })?;
    write(args.out, &ds.to_json())?;
    let _ = writeln!(
        out,
        "wrote {} traces of length {} to {}",
        n,
        spec.dwell_max,
        args.out.display()
    );
    Ok(())
}
