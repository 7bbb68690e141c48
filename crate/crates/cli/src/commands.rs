//! Subcommand implementations.

use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rvolmin::identifiability::{scattering_radius, CoeffCloud, ScatterReport};
use rvolmin::solver::{InitKind, TerminationReason};
use rvolmin::synth::{gen_instance, run_sweep, BasisKind, Preset, SweepResult, SynthSpec};
use rvolmin::{solve_best_of, DataMatrix, SolverConfig};
use serde::Serialize;

use crate::args::{BenchArgs, CheckScatterArgs, FactorizeArgs, SpecArgs, SynthArgs};
use crate::error::{CliError, CliResult};
use crate::io::{matrix_to_csv, read_matrix, write_atomic, write_json, OutDir};

/// Record written next to every output; `argv` re-creates the run.
#[derive(Debug, Serialize, serde::Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub argv: Vec<String>,
    pub config: serde_json::Value,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub seed: u64,
    pub version: String,
    pub wall_time: f64,
}

impl RunManifest {
    fn new(command: &str, argv: &[String], config: serde_json::Value, seed: u64) -> Self {
        Self {
            command: command.into(),
            argv: argv.to_vec(),
            config,
            inputs: Vec::new(),
            outputs: Vec::new(),
            seed,
            version: env!("CARGO_PKG_VERSION").into(),
            wall_time: 0.0,
        }
    }

    fn finish(mut self, dir: &OutDir, started: Instant) -> CliResult<()> {
        self.wall_time = started.elapsed().as_secs_f64();
        write_json(&dir.file("manifest.json"), &self)
    }
}

fn write_matrix(
    dir: &OutDir,
    name: &str,
    m: &DMatrix<f64>,
    manifest: &mut RunManifest,
) -> CliResult<()> {
    let path = dir.file(name);
    write_atomic(&path, matrix_to_csv(m).as_bytes())?;
    manifest.outputs.push(path);
    Ok(())
}

#[derive(Debug, Serialize)]
struct FactorizeReport<'a> {
    m: usize,
    k: usize,
    l: usize,
    init: InitKind,
    starts: usize,
    config: &'a SolverConfig,
    initial_objective: f64,
    final_objective: f64,
    objective_history: &'a [f64],
    iterations: usize,
    termination_reason: TerminationReason,
    /// `1/w` rescaled to `[0, 1]`; larger means more outlying.
    outlier_scores: Vec<f64>,
    wall_time: f64,
}

/// `1/w` min-max normalized; a constant vector maps to zeros.
pub fn outlier_scores(weights: &DVector<f64>) -> Vec<f64> {
    let inv: Vec<f64> = weights.iter().map(|w| 1.0 / w).collect();
    let lo = inv.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = inv.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    inv.iter()
        .map(|v| {
            if span > 0.0 && span.is_finite() {
                (v - lo) / span
            } else {
                0.0
            }
        })
        .collect()
}

pub fn factorize(args: &FactorizeArgs, argv: &[String]) -> CliResult<()> {
    let started = Instant::now();
    let config = args.solver.config();
    config.validate()?;
    let x = read_matrix(&args.input)?;
    let (m, l) = x.shape();
    if args.k == 0 || args.k >= m.min(l) {
        return Err(CliError::Usage(format!(
            "K = {} must satisfy 1 <= K < min(M, L) = {}",
            args.k,
            m.min(l)
        )));
    }
    if args.solver.starts == 0 {
        return Err(CliError::Usage("--starts must be at least 1".into()));
    }
    let x = DataMatrix::new(x)?;
    let init = args.solver.init();
    log::info!("factorizing {m}x{l} data with K = {}", args.k);
    let report = solve_best_of(&x, args.k, &init, &config, args.solver.starts)?;

    let dir = OutDir::create(&args.out)?;
    let mut manifest = RunManifest::new(
        "factorize",
        argv,
        serde_json::to_value(&config)?,
        config.rng_seed,
    );
    manifest.inputs.push(args.input.clone());
    write_matrix(&dir, "B.csv", &report.model.basis, &mut manifest)?;
    write_matrix(&dir, "C.csv", &report.model.coeffs, &mut manifest)?;
    write_matrix(
        &dir,
        "weights.csv",
        &DMatrix::from_column_slice(l, 1, report.weights.as_slice()),
        &mut manifest,
    )?;
    let summary = FactorizeReport {
        m,
        k: args.k,
        l,
        init: init.kind(),
        starts: args.solver.starts,
        config: &config,
        initial_objective: report.initial_objective,
        final_objective: report.final_objective(),
        objective_history: &report.objective_history,
        iterations: report.iterations_used,
        termination_reason: report.termination_reason,
        outlier_scores: outlier_scores(&report.weights),
        wall_time: report.wall_time,
    };
    let path = dir.file("report.json");
    write_json(&path, &summary)?;
    manifest.outputs.push(path);
    println!(
        "objective {:.6e} after {} iterations ({:?})",
        summary.final_objective, summary.iterations, summary.termination_reason
    );
    manifest.finish(&dir, started)
}

fn apply_spec(args: &SpecArgs, mut spec: SynthSpec) -> SynthSpec {
    spec.m = args.m.unwrap_or(spec.m);
    spec.k = args.k.unwrap_or(spec.k);
    spec.l = args.l.unwrap_or(spec.l);
    spec.snr_db = args.snr.unwrap_or(spec.snr_db);
    spec.sor_db = args.sor.unwrap_or(spec.sor_db);
    spec.n_outliers = args.outliers.unwrap_or(spec.n_outliers);
    spec.purity_level = args.purity.unwrap_or(spec.purity_level);
    if let Some(values) = &args.singular_values {
        spec.basis_kind = BasisKind::IllConditioned {
            singular_values: values.clone(),
        };
    }
    spec
}

#[derive(Debug, Serialize)]
struct SynthSummary<'a> {
    spec: &'a SynthSpec,
    #[serde(with = "rvolmin::inf_serde")]
    realized_snr_db: f64,
    #[serde(with = "rvolmin::inf_serde")]
    realized_sor_db: f64,
    outlier_indices: &'a [usize],
}

pub fn synth(args: &SynthArgs, argv: &[String]) -> CliResult<()> {
    let started = Instant::now();
    let spec = SynthSpec {
        rng_seed: args.seed,
        ..apply_spec(&args.spec, SynthSpec::default())
    };
    let inst = gen_instance(&spec)?;
    let dir = OutDir::create(&args.out)?;
    let summary = SynthSummary {
        spec: &spec,
        realized_snr_db: inst.realized_snr_db,
        realized_sor_db: inst.realized_sor_db,
        outlier_indices: &inst.outlier_indices,
    };
    let mut manifest = RunManifest::new(
        "synth",
        argv,
        serde_json::to_value(&summary)?,
        spec.rng_seed,
    );
    write_matrix(&dir, "X.csv", inst.x.as_matrix(), &mut manifest)?;
    write_matrix(&dir, "A_true.csv", &inst.a_true, &mut manifest)?;
    write_matrix(&dir, "S_true.csv", &inst.s_true, &mut manifest)?;
    let indices: String = inst
        .outlier_indices
        .iter()
        .map(|i| format!("{i}\n"))
        .collect();
    let path = dir.file("outliers.txt");
    write_atomic(&path, indices.as_bytes())?;
    manifest.outputs.push(path);
    println!(
        "{}x{} instance, realized SNR {} dB, SOR {} dB",
        spec.m, spec.l, inst.realized_snr_db, inst.realized_sor_db
    );
    manifest.finish(&dir, started)
}

pub fn bench(args: &BenchArgs, argv: &[String]) -> CliResult<()> {
    let started = Instant::now();
    let (base, axis, values) = match (&args.preset, args.axis, &args.values) {
        (Some(name), _, _) => {
            let preset = Preset::from_name(name).ok_or_else(|| {
                let known: Vec<&str> = Preset::ALL.iter().map(|p| p.name()).collect();
                CliError::Usage(format!(
                    "unknown preset {name:?}; known presets: {}",
                    known.join(", ")
                ))
            })?;
            preset.design()
        }
        (None, Some(axis), Some(values)) => (SynthSpec::default(), axis.into(), values.clone()),
        _ => {
            return Err(CliError::Usage(
                "bench needs --preset or both --axis and --values".into(),
            ))
        }
    };
    let base = SynthSpec {
        rng_seed: args.solver.seed,
        ..apply_spec(&args.spec, base)
    };
    let config = args.solver.config();
    let jobs = args.jobs.unwrap_or(0);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start {jobs} worker threads: {e}")))?;
    log::info!(
        "sweeping {} over {values:?} with {} trials on {} threads",
        axis.name(),
        args.trials,
        pool.current_num_threads()
    );
    let result: SweepResult = pool.install(|| {
        run_sweep(
            &base,
            axis,
            &values,
            args.trials,
            &config,
            &args.solver.init(),
            args.solver.starts,
        )
    })?;

    let dir = OutDir::create(&args.out)?;
    let mut manifest = RunManifest::new(
        "bench",
        argv,
        serde_json::json!({ "base_spec": &base, "solver": &config, "axis": axis, "values": &values, "trials": args.trials, "starts": args.solver.starts }),
        base.rng_seed,
    );
    let csv_path = dir.file("sweep.csv");
    write_atomic(&csv_path, result.to_csv().as_bytes())?;
    let json_path = dir.file("sweep.json");
    write_json(&json_path, &result)?;
    manifest.outputs.extend([csv_path, json_path]);
    print!("{}", result.to_csv());
    manifest.finish(&dir, started)
}

#[derive(Debug, Serialize)]
struct ScatterSummary {
    #[serde(flatten)]
    report: ScatterReport,
    n: usize,
    columns: usize,
    repaired_columns: Vec<usize>,
}

pub fn check_scatter(args: &CheckScatterArgs, argv: &[String]) -> CliResult<()> {
    let started = Instant::now();
    let s = read_matrix(&args.input)?;
    let (cloud, repaired) = CoeffCloud::repaired(s, args.repair_tol, args.tol)?;
    if !repaired.is_empty() {
        log::warn!(
            "{} column(s) were off the simplex by more than {} and have been projected: {:?}",
            repaired.len(),
            args.repair_tol,
            repaired
        );
    }
    let report = scattering_radius(&cloud)?;
    let summary = ScatterSummary {
        n: cloud.dim(),
        columns: cloud.len(),
        repaired_columns: repaired,
        report,
    };
    let dir = OutDir::create(&args.out)?;
    let mut manifest = RunManifest::new(
        "check-scatter",
        argv,
        serde_json::json!({ "tol": args.tol, "repair_tol": args.repair_tol }),
        0,
    );
    manifest.inputs.push(args.input.clone());
    let path = dir.file("report.json");
    write_json(&path, &summary)?;
    manifest.outputs.push(path);
    println!(
        "gamma {} threshold {:.6} sufficiently scattered: {}",
        summary.report.gamma, summary.report.threshold, summary.report.sufficiently_scattered
    );
    manifest.finish(&dir, started)
}

/// Reads a manifest and returns its recorded argument vector.
pub fn replay_argv(path: &Path) -> CliResult<Vec<String>> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let manifest: RunManifest = serde_json::from_str(&text).map_err(|e| CliError::Parse {
        path: path.to_path_buf(),
        line: e.line() as u64,
        column: e.column(),
        message: e.to_string(),
    })?;
    if manifest.argv.iter().any(|a| a == "replay") {
        return Err(CliError::Usage(
            "manifest records a replay; refusing to recurse".into(),
        ));
    }
    Ok(manifest.argv)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scores_are_normalized_inverse_weights() {
        let s = outlier_scores(&DVector::from_vec(vec![1.0, 0.5, 0.25]));
        assert_eq!(s, vec![0.0, 1.0 / 3.0, 1.0]);
        assert_eq!(outlier_scores(&DVector::from_element(3, 2.0)), vec![0.0; 3]);
    }
}
