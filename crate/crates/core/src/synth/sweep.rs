//! Monte-Carlo sweeps over one experiment parameter.

use std::fmt::Write as _;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{gen_instance, trial_seed, SynthSpec};
use crate::error::{invalid, Result};
use crate::metrics::{permutation_matched_mse, MetricConfig};
use crate::solver::{solve_best_of, InitKind, InitStrategy, SolverConfig};

/// Parameter varied along a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    Snr,
    Sor,
    K,
    NOutliers,
    Lambda,
    P,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::Snr => "snr",
            SweepAxis::Sor => "sor",
            SweepAxis::K => "k",
            SweepAxis::NOutliers => "n_outliers",
            SweepAxis::Lambda => "lambda",
            SweepAxis::P => "p",
        }
    }

    fn is_count(self) -> bool {
        matches!(self, SweepAxis::K | SweepAxis::NOutliers)
    }

    /// Spec and solver configuration for one axis value.
    fn apply(
        self,
        value: f64,
        spec: &SynthSpec,
        config: &SolverConfig,
    ) -> (SynthSpec, SolverConfig) {
        let (mut spec, mut config) = (spec.clone(), config.clone());
        match self {
            SweepAxis::Snr => spec.snr_db = value,
            SweepAxis::Sor => spec.sor_db = value,
            SweepAxis::K => spec.k = value as usize,
            SweepAxis::NOutliers => spec.n_outliers = value as usize,
            SweepAxis::Lambda => config.lambda = value,
            SweepAxis::P => config.p = value,
        }
        (spec, config)
    }
}

/// Named experiment designs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    /// MSE versus SNR at SOR −5 dB.
    Fig5,
    /// MSE versus λ at SNR 20 dB.
    Fig6,
    /// MSE versus K at SNR 20 dB.
    Kvary,
    /// MSE versus SOR at SNR 20 dB.
    Sorvary,
    /// MSE versus the number of outliers at SNR 20 dB.
    Novary,
    /// MSE versus p at SOR −10 dB, SNR 20 dB.
    Pvary,
}

impl Preset {
    pub const ALL: [Preset; 6] = [
        Preset::Fig5,
        Preset::Fig6,
        Preset::Kvary,
        Preset::Sorvary,
        Preset::Novary,
        Preset::Pvary,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Fig5 => "fig5",
            Preset::Fig6 => "fig6",
            Preset::Kvary => "kvary",
            Preset::Sorvary => "sorvary",
            Preset::Novary => "novary",
            Preset::Pvary => "pvary",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.name() == name)
    }

    /// Base instance (`M = 50, K = 5, L = 1000, N_o = 20`), axis and values.
    pub fn design(self) -> (SynthSpec, SweepAxis, Vec<f64>) {
        let base = SynthSpec {
            snr_db: 20.0,
            sor_db: -5.0,
            ..SynthSpec::default()
        };
        match self {
            Preset::Fig5 => (base, SweepAxis::Snr, vec![15.0, 20.0, 25.0, 30.0, 35.0]),
            Preset::Fig6 => (base, SweepAxis::Lambda, vec![0.1, 0.25, 0.5, 1.0, 2.0]),
            Preset::Kvary => (base, SweepAxis::K, vec![3.0, 6.0, 9.0, 12.0, 15.0]),
            Preset::Sorvary => (base, SweepAxis::Sor, vec![-10.0, -5.0, 0.0, 5.0]),
            Preset::Novary => (
                base,
                SweepAxis::NOutliers,
                vec![10.0, 20.0, 30.0, 40.0, 50.0, 60.0],
            ),
            Preset::Pvary => (
                SynthSpec {
                    sor_db: -10.0,
                    ..base
                },
                SweepAxis::P,
                vec![0.1, 0.25, 0.5, 0.75, 1.0, 1.5, 2.0],
            ),
        }
    }
}

/// Outcome of one trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub axis_index: usize,
    pub trial_index: usize,
    pub axis_value: f64,
    pub seed: u64,
    /// `None` when the trial failed.
    pub mse_db: Option<f64>,
    pub iterations: Option<usize>,
    pub final_objective: Option<f64>,
    pub error: Option<String>,
    /// Seconds, including data generation.
    pub wall_time: f64,
}

/// Aggregates over the successful trials at one axis value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub value: f64,
    pub mean_mse_db: Option<f64>,
    pub median_mse_db: Option<f64>,
    pub trials_ok: usize,
    pub trials_failed: usize,
    pub mean_iterations: Option<f64>,
    pub mean_wall_time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub axis: SweepAxis,
    pub base_spec: SynthSpec,
    pub solver: SolverConfig,
    pub init: InitKind,
    pub trials: usize,
    /// Solver starts per trial.
    pub starts: usize,
    pub points: Vec<SweepPoint>,
    /// Ordered by axis index, then trial index.
    pub records: Vec<TrialRecord>,
}

impl SweepResult {
    /// Copy with every timing field zeroed, for reproducibility comparisons.
    pub fn without_timing(&self) -> Self {
        let mut out = self.clone();
        out.points.iter_mut().for_each(|p| p.mean_wall_time = 0.0);
        out.records.iter_mut().for_each(|r| r.wall_time = 0.0);
        out
    }

    /// One header line plus one row per axis value; missing values are empty.
    pub fn to_csv(&self) -> String {
        let mut out =
            String::from("axis,value,mean_mse_db,median_mse_db,trials_ok,trials_failed,mean_iterations,mean_wall_time\n");
        let opt = |v: Option<f64>| v.map(|x| format!("{x}")).unwrap_or_default();
        for p in &self.points {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                self.axis.name(),
                p.value,
                opt(p.mean_mse_db),
                opt(p.median_mse_db),
                p.trials_ok,
                p.trials_failed,
                opt(p.mean_iterations),
                p.mean_wall_time
            );
        }
        out
    }

    pub fn to_json(&self) -> serde_json::Result<String> {
        serde_json::to_string_pretty(self)
    }
}

/// Runs `trials` independent trials per axis value on the current rayon pool.
///
/// Trial `t` at axis position `i` uses seed `trial_seed(base.rng_seed, i, t)`
/// for both the instance and the solver initialization, so the result does
/// not depend on scheduling. Each trial keeps the best of `starts` solver runs
/// by final objective. Solver errors mark the trial failed; errors in the
/// arguments abort the whole sweep.
pub fn run_sweep(
    base: &SynthSpec,
    axis: SweepAxis,
    values: &[f64],
    trials: usize,
    config: &SolverConfig,
    init: &InitStrategy,
    starts: usize,
) -> Result<SweepResult> {
    if starts == 0 {
        return Err(invalid("a sweep needs at least one start per trial"));
    }
    if trials == 0 {
        return Err(invalid("a sweep needs at least one trial"));
    }
    if values.is_empty() {
        return Err(invalid("a sweep needs at least one axis value"));
    }
    if matches!(init, InitStrategy::Provided(_)) {
        return Err(invalid(
            "sweeps generate their own data; provided factors cannot be used",
        ));
    }
    for &v in values {
        if axis.is_count()
            && !(v >= 1.0 - f64::from(axis == SweepAxis::NOutliers) && v.fract() == 0.0)
        {
            return Err(invalid(format!(
                "{} axis values must be integers, got {v}",
                axis.name()
            )));
        }
        let (spec, cfg) = axis.apply(v, base, config);
        spec.validate()?;
        cfg.validate()?;
    }

    let jobs: Vec<(usize, usize)> = (0..values.len())
        .flat_map(|i| (0..trials).map(move |t| (i, t)))
        .collect();
    let records: Vec<TrialRecord> = jobs
        .par_iter()
        .map(|&(i, t)| run_trial(base, axis, values[i], (i, t), config, init, starts))
        .collect();

    let points = values
        .iter()
        .enumerate()
        .map(|(i, &value)| aggregate(value, &records[i * trials..(i + 1) * trials]))
        .collect();
    Ok(SweepResult {
        axis,
        base_spec: base.clone(),
        solver: config.clone(),
        init: init.kind(),
        trials,
        starts,
        points,
        records,
    })
}

fn run_trial(
    base: &SynthSpec,
    axis: SweepAxis,
    value: f64,
    (axis_index, trial_index): (usize, usize),
    config: &SolverConfig,
    init: &InitStrategy,
    starts: usize,
) -> TrialRecord {
    let started = Instant::now();
    let seed = trial_seed(base.rng_seed, axis_index as u64, trial_index as u64);
    let (mut spec, mut cfg) = axis.apply(value, base, config);
    spec.rng_seed = seed;
    cfg.rng_seed = seed;
    let outcome = gen_instance(&spec).and_then(|inst| {
        let report = solve_best_of(&inst.x, spec.k, init, &cfg, starts)?;
        let (_, db) =
            permutation_matched_mse(&inst.a_true, &report.model.basis, &MetricConfig::default())?;
        Ok((
            db,
            report.iterations_used,
            report.objective_history.last().copied(),
        ))
    });
    let mut record = TrialRecord {
        axis_index,
        trial_index,
        axis_value: value,
        seed,
        mse_db: None,
        iterations: None,
        final_objective: None,
        error: None,
        wall_time: 0.0,
    };
    match outcome {
        Ok((db, iters, obj)) => {
            record.mse_db = Some(db);
            record.iterations = Some(iters);
            record.final_objective = obj;
        }
        Err(e) => {
            log::warn!("trial {trial_index} at {}={value} failed: {e}", axis.name());
            record.error = Some(e.to_string());
        }
    }
    record.wall_time = started.elapsed().as_secs_f64();
    record
}

fn aggregate(value: f64, records: &[TrialRecord]) -> SweepPoint {
    let mut mse: Vec<f64> = records.iter().filter_map(|r| r.mse_db).collect();
    let iters: Vec<f64> = records
        .iter()
        .filter_map(|r| r.iterations.map(|i| i as f64))
        .collect();
    let mean = |v: &[f64]| (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64);
    mse.sort_by(f64::total_cmp);
    let median = (!mse.is_empty()).then(|| {
        let n = mse.len();
        if n % 2 == 1 {
            mse[n / 2]
        } else {
            0.5 * (mse[n / 2 - 1] + mse[n / 2])
        }
    });
    SweepPoint {
        value,
        mean_mse_db: mean(&mse),
        median_mse_db: median,
        trials_ok: mse.len(),
        trials_failed: records.len() - mse.len(),
        mean_iterations: mean(&iters),
        mean_wall_time: records.iter().map(|r| r.wall_time).sum::<f64>() / records.len() as f64,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> SynthSpec {
        SynthSpec {
            m: 6,
            k: 3,
            l: 60,
            n_outliers: 3,
            snr_db: 30.0,
            ..Default::default()
        }
    }

    fn quick() -> SolverConfig {
        SolverConfig {
            max_iter: 30,
            ..Default::default()
        }
    }

    #[test]
    fn repeated_sweeps_agree() {
        let run = || {
            run_sweep(
                &tiny(),
                SweepAxis::Snr,
                &[20.0, 30.0],
                2,
                &quick(),
                &InitStrategy::DataColumns,
                1,
            )
            .unwrap()
        };
        let (a, b) = (run(), run());
        assert_eq!(a.without_timing(), b.without_timing());
        assert_eq!(a.records.len(), 4);
        assert_eq!(a.points[0].trials_ok + a.points[0].trials_failed, 2);
    }

    #[test]
    fn schedule_does_not_matter() {
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| {
                    run_sweep(
                        &tiny(),
                        SweepAxis::P,
                        &[0.5, 1.5],
                        3,
                        &quick(),
                        &InitStrategy::Random,
                        2,
                    )
                })
                .unwrap()
        };
        assert_eq!(run(1).without_timing(), run(3).without_timing());
    }

    #[test]
    fn records_are_keyed_and_seeded() {
        let res = run_sweep(
            &tiny(),
            SweepAxis::K,
            &[2.0, 3.0],
            2,
            &quick(),
            &InitStrategy::DataColumns,
            1,
        )
        .unwrap();
        let keys: Vec<(usize, usize)> = res
            .records
            .iter()
            .map(|r| (r.axis_index, r.trial_index))
            .collect();
        assert_eq!(keys, vec![(0, 0), (0, 1), (1, 0), (1, 1)]);
        for r in &res.records {
            assert_eq!(
                r.seed,
                trial_seed(tiny().rng_seed, r.axis_index as u64, r.trial_index as u64)
            );
        }
    }

    #[test]
    fn aggregates_skip_failures() {
        let ok = |v| TrialRecord {
            axis_index: 0,
            trial_index: 0,
            axis_value: 1.0,
            seed: 0,
            mse_db: Some(v),
            iterations: Some(10),
            final_objective: Some(1.0),
            error: None,
            wall_time: 1.0,
        };
        let failed = TrialRecord {
            mse_db: None,
            iterations: None,
            error: Some("x".into()),
            ..ok(0.0)
        };
        let p = aggregate(1.0, &[ok(-30.0), failed.clone(), ok(-20.0), ok(-22.0)]);
        assert_eq!(p.trials_ok, 3);
        assert_eq!(p.trials_failed, 1);
        assert_eq!(p.mean_mse_db, Some(-24.0));
        assert_eq!(p.median_mse_db, Some(-22.0));
        let none = aggregate(1.0, &[failed]);
        assert_eq!(
            (none.mean_mse_db, none.median_mse_db, none.trials_failed),
            (None, None, 1)
        );
    }

    #[test]
    fn bad_arguments_abort() {
        let init = InitStrategy::DataColumns;
        assert!(run_sweep(&tiny(), SweepAxis::Snr, &[20.0], 0, &quick(), &init, 1).is_err());
        assert!(run_sweep(&tiny(), SweepAxis::Snr, &[20.0], 1, &quick(), &init, 0).is_err());
        assert!(run_sweep(&tiny(), SweepAxis::Snr, &[], 1, &quick(), &init, 1).is_err());
        assert!(run_sweep(&tiny(), SweepAxis::K, &[2.5], 1, &quick(), &init, 1).is_err());
        assert!(run_sweep(
            &tiny(),
            SweepAxis::NOutliers,
            &[61.0],
            1,
            &quick(),
            &init,
            1
        )
        .is_err());
        assert!(run_sweep(&tiny(), SweepAxis::P, &[3.0], 1, &quick(), &init, 1).is_err());
    }

    #[test]
    fn csv_has_one_row_per_value() {
        let res = run_sweep(
            &tiny(),
            SweepAxis::Lambda,
            &[0.1, 1.0],
            1,
            &quick(),
            &InitStrategy::DataColumns,
            1,
        )
        .unwrap();
        let csv = res.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[1].starts_with("lambda,0.1,"));
        let json: serde_json::Value = serde_json::from_str(&res.to_json().unwrap()).unwrap();
        assert_eq!(json["records"].as_array().unwrap().len(), 2);
    }

    #[test]
    fn presets_are_valid() {
        for preset in Preset::ALL {
            let (spec, axis, values) = preset.design();
            for v in values {
                let (s, c) = axis.apply(v, &spec, &SolverConfig::default());
                s.validate().unwrap();
                c.validate().unwrap();
            }
            assert_eq!(Preset::from_name(preset.name()), Some(preset));
        }
        let (_, axis, values) = Preset::Fig5.design();
        assert_eq!(axis, SweepAxis::Snr);
        assert_eq!(values, vec![15.0, 20.0, 25.0, 30.0, 35.0]);
    }
}
