//! Full experiments: every trial and method, persisted to an output directory.

use std::fs;
use std::path::Path;

use rayon::prelude::*;

use super::config::{ExperimentConfig, Method};
use super::report::{report, write_steps, write_trials, Report, TrialRow, STEPS_FILE, TRIALS_FILE};
use super::trial::{
    prepare_method, run_burn_in, run_test_epochs, BurnIn, PreparedMethod, TrialManifest, TrialResult,
};
use crate::error::Result;
use crate::market::write_records;
use crate::models::ZooModel;
use crate::rl::ValueFn;
use crate::rng;

pub const CONFIG_FILE: &str = "config.toml";
pub const MANIFEST_DIR: &str = "manifests";
pub const MODEL_DIR: &str = "models";

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunOptions {
    /// Run trials one after another on the calling thread.
    pub sequential: bool,
    /// Also write the burn-in interaction log of every trial.
    pub interactions: bool,
    /// Index of the first trial; trials run from here for `cfg.trials` indices.
    pub first_trial: usize,
}

/// All method results of one trial, or the error that stopped it.
#[derive(Debug)]
pub struct TrialRun {
    pub trial: usize,
    pub seed: u64,
    pub burn_in: Option<BurnIn>,
    pub results: Vec<(
        Method,
        std::result::Result<(TrialResult, Option<PreparedMethod>), String>,
    )>,
}

pub fn run_trial_methods(cfg: &ExperimentConfig, trial: usize, methods: &[Method]) -> TrialRun {
    let seed = rng::trial_seed(cfg.seed, trial as u64);
    let burn = match run_burn_in(cfg, trial) {
        Ok(b) => b,
        Err(e) => {
            return TrialRun {
                trial,
                seed,
                burn_in: None,
                results: methods
                    .iter()
                    .map(|&m| (m, Err(format!("burn-in: {e}"))))
                    .collect(),
            }
        }
    };
    let results = methods
        .iter()
        .map(|&m| {
            let r = prepare_method(cfg, &burn, m)
                .map(|p| {
                    let result = run_test_epochs(cfg, &burn, &p);
                    let keep = matches!(p, PreparedMethod::Rl { .. }).then_some(p);
                    (result, keep)
                })
                .map_err(|e| e.to_string());
            (m, r)
        })
        .collect();
    TrialRun {
        trial,
        seed,
        burn_in: Some(burn),
        results,
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentSummary {
    pub trials: usize,
    pub failed_runs: usize,
    pub report: Report,
}

fn snapshot(dir: &Path, run: &TrialRun) -> Result<()> {
    let Some(burn) = &run.burn_in else {
        return Ok(());
    };
    let models = dir.join(MODEL_DIR);
    fs::create_dir_all(&models)?;
    let name = |what: &str| models.join(format!("trial_{:03}_{what}.pzoo", run.trial));
    fs::write(name("market"), burn.models.market.to_blob()?)?;
    fs::write(name("conversion"), burn.models.conversion.to_blob()?)?;
    fs::write(name("action"), burn.models.action.to_blob()?)?;
    for (_, r) in &run.results {
        if let Ok((
            _,
            Some(PreparedMethod::Rl {
                models: k_models,
                value,
            }),
        )) = r
        {
            fs::write(name("action_k"), k_models.action.to_blob()?)?;
            let fitted: &ValueFn = &value.fitted;
            fs::write(name("value_fn"), fitted.to_blob()?)?;
        }
    }
    Ok(())
}

/// Runs every trial and method, writes `steps.csv`, `trials.csv`, manifests,
/// model snapshots and the report files into `out`.
pub fn run_experiment(cfg: &ExperimentConfig, out: &Path, opts: RunOptions) -> Result<ExperimentSummary> {
    cfg.validate()?;
    fs::create_dir_all(out.join(MANIFEST_DIR))?;
    fs::write(out.join(CONFIG_FILE), cfg.to_toml()?)?;
    let methods = cfg.method_list();
    let one = |trial: usize| run_trial_methods(cfg, trial, &methods);
    let range = opts.first_trial..opts.first_trial + cfg.trials;
    let runs: Vec<TrialRun> = if opts.sequential {
        range.map(one).collect()
    } else {
        range.into_par_iter().map(one).collect()
    };

    let mut rows = Vec::new();
    let mut results = Vec::new();
    for run in &runs {
        snapshot(out, run)?;
        if let Some(burn) = &run.burn_in {
            for &m in &methods {
                let manifest = TrialManifest::new(cfg, burn, m);
                fs::write(
                    out.join(MANIFEST_DIR)
                        .join(format!("trial_{:03}_{m}.json", run.trial)),
                    serde_json::to_string_pretty(&manifest)?,
                )?;
            }
            if opts.interactions {
                let f = fs::File::create(out.join(format!("burnin_trial_{:03}.csv", run.trial)))?;
                write_records(&burn.records, f)?;
            }
        }
        for (m, r) in &run.results {
            let baseline = run
                .burn_in
                .as_ref()
                .map(|b| (b.baseline_params.n, b.baseline_params.beta));
            rows.push(TrialRow {
                trial: run.trial,
                seed: run.seed,
                method: *m,
                outcome: r.as_ref().map(|(res, _)| res.clone()).map_err(Clone::clone),
                baseline,
            });
            if let Ok((res, _)) = r {
                results.push(res.clone());
            }
        }
    }
    write_steps(&results, fs::File::create(out.join(STEPS_FILE))?)?;
    write_trials(&rows, fs::File::create(out.join(TRIALS_FILE))?)?;
    let failed_runs = rows.iter().filter(|r| r.outcome.is_err()).count();
    Ok(ExperimentSummary {
        trials: cfg.trials,
        failed_runs,
        report: report(out)?,
    })
}
