//! The evaluation protocol: the forest by k-fold cross-validation, the
//! neural models by repeated runs on a held-out split. Every (model,
//! category, run) is an independent job; results are reduced in job order,
//! so the report does not depend on how many threads ran them.

use edtweetlab_core::eval::{fold_split, kfold, metrics, split, split_stratified, EvalReport, ReportCell, ReportMeta, RunSummary};
use edtweetlab_core::features::{build_vocabulary, Category, LabeledTweet};
use edtweetlab_core::models::{grid_search, ForestConfig, GridResult, ModelKind};
use edtweetlab_core::rng::{derive_named, derive_seed};
use edtweetlab_core::textprep::CleanTweet;
use rayon::prelude::*;

use crate::bench::benchmark;
use crate::config::{Config, ForestProtocol, TimingMode};
use crate::error::{AppError, Result};
use crate::stages::{featurize, fit};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Job {
    pub model: ModelKind,
    pub category: Category,
    /// Fold number under cross-validation, run number otherwise.
    pub index: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct JobResult {
    pub job: Job,
    pub metrics: edtweetlab_core::eval::Metrics,
    /// Training plus test-set prediction, excluding featurization.
    pub seconds: f64,
}

fn uses_cv(model: ModelKind, cfg: &Config) -> bool {
    model == ModelKind::Forest && cfg.forest_protocol == ForestProtocol::CrossValidation
}

pub fn jobs(cfg: &Config) -> Vec<Job> {
    let mut out = Vec::new();
    for &model in &cfg.models {
        let n = if uses_cv(model, cfg) { cfg.folds } else { cfg.runs };
        for &category in &cfg.categories {
            out.extend((0..n).map(|index| Job { model, category, index }));
        }
    }
    out
}

/// Train and test row indices for one job.
pub fn partition(job: &Job, data: &[LabeledTweet], cfg: &Config) -> Result<(Vec<usize>, Vec<usize>)> {
    let idx: Vec<usize> = (0..data.len()).collect();
    if uses_cv(job.model, cfg) {
        let folds = kfold(&idx, cfg.folds, derive_named(cfg.seed, "folds"))?;
        return Ok(fold_split(&folds, job.index));
    }
    let base = derive_named(cfg.seed, "split");
    let seed = if cfg.vary_split { derive_seed(base, job.index as u64) } else { base };
    let plan = if cfg.stratify {
        let y: Vec<bool> = data.iter().map(|t| t.label(job.category)).collect();
        split_stratified(&idx, &y, cfg.test_fraction, seed)?
    } else {
        split(&idx, cfg.test_fraction, seed)?
    };
    Ok((plan.train_ids, plan.test_ids))
}

pub fn run_job(job: &Job, data: &[LabeledTweet], cfg: &Config, forest: Option<ForestConfig>) -> Result<JobResult> {
    let (train, test) = partition(job, data, cfg)?;
    let pick = |ids: &[usize]| -> (Vec<CleanTweet>, Vec<bool>) {
        ids.iter().map(|&i| (data[i].clean.clone(), data[i].label(job.category))).unzip()
    };
    let (train_x, train_y) = pick(&train);
    let (test_x, test_y) = pick(&test);
    let vocab = build_vocabulary(&train_x, cfg.min_df).map_err(AppError::training)?;
    let xtr = featurize(job.model, &train_x, &vocab, cfg)?;
    let xte = featurize(job.model, &test_x, &vocab, cfg)?;
    let seed = cfg.seed.wrapping_add(job.index as u64);
    let (pred, seconds) = benchmark(|| -> Result<Vec<bool>> {
        let model = fit(job.model, job.category, &xtr, &train_y, &vocab, cfg, forest, seed)?;
        Ok(model.predict(&xte)?.into_iter().map(|p| p.label).collect())
    });
    let pred = pred.map_err(|e| match e {
        AppError::Core(c) => AppError::training(format!("{} category {}: {c}", job.model, job.category.number())),
        other => other,
    })?;
    Ok(JobResult { job: *job, metrics: metrics(&test_y, &pred)?, seconds })
}

/// Per-category forest settings chosen by grid search over all labeled data.
pub fn tune_forests(data: &[LabeledTweet], cfg: &Config) -> Result<Vec<(Category, GridResult)>> {
    let tweets: Vec<CleanTweet> = data.iter().map(|t| t.clean.clone()).collect();
    let vocab = build_vocabulary(&tweets, cfg.min_df).map_err(AppError::training)?;
    let x = featurize(ModelKind::Forest, &tweets, &vocab, cfg)?;
    let (n, rows) = x.as_tfidf().expect("forest features are TF-IDF");
    cfg.categories
        .par_iter()
        .map(|&c| {
            let y: Vec<bool> = data.iter().map(|t| t.label(c)).collect();
            let r = grid_search(rows, &y, n, &cfg.grid, cfg.folds, derive_named(cfg.seed, "grid")).map_err(AppError::training)?;
            Ok((c, r))
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct Evaluation {
    pub results: Vec<JobResult>,
    /// Timings always included; used for Markdown and the timing table.
    pub timed: EvalReport,
    /// Timings per `report.timing`; used for the CSV.
    pub report: EvalReport,
    pub grid: Vec<(Category, GridResult)>,
}

pub fn evaluate(data: &[LabeledTweet], dataset_hash: &str, cfg: &Config) -> Result<Evaluation> {
    if data.len() < 2 {
        return Err(AppError::Training("need at least two labeled tweets".into()));
    }
    let grid = if cfg.grid_search && cfg.models.contains(&ModelKind::Forest) { tune_forests(data, cfg)? } else { Vec::new() };
    let forest_for = |c: Category| grid.iter().find(|(g, _)| *g == c).map(|(_, r)| r.best);
    let jobs = jobs(cfg);
    let results = jobs
        .par_iter()
        .map(|j| run_job(j, data, cfg, if j.model == ModelKind::Forest { forest_for(j.category) } else { None }))
        .collect::<Result<Vec<_>>>()?;

    let meta = ReportMeta { seed: cfg.seed, dataset_hash: dataset_hash.to_string(), config: cfg.snapshot.clone() };
    let mut timed = EvalReport { cells: Vec::new(), meta: meta.clone() };
    let mut report = EvalReport { cells: Vec::new(), meta };
    for &model in &cfg.models {
        for &category in &cfg.categories {
            let group: Vec<&JobResult> = results.iter().filter(|r| r.job.model == model && r.job.category == category).collect();
            let summary = RunSummary::from_runs(group.iter().map(|r| r.metrics).collect())?;
            let seconds = group.iter().map(|r| r.seconds).sum::<f64>() / group.len() as f64;
            let cell = ReportCell::from_summary(model, category, cfg.seed, &summary, Some(seconds));
            report.cells.push(ReportCell {
                wall_clock_s: (cfg.timing == TimingMode::Measured).then_some(seconds),
                ..cell.clone()
            });
            timed.cells.push(cell);
        }
    }
    Ok(Evaluation { results, timed, report, grid })
}

/// `model,category,wall_clock_s,jobs` from a report with timings.
pub fn timing_table(timed: &EvalReport, jobs: usize) -> String {
    let mut s = String::from("model,category,wall_clock_s,jobs\n");
    for c in &timed.clone().sorted().cells {
        s.push_str(&format!("{},{},{:.6},{jobs}\n", c.model, c.category.number(), c.wall_clock_s.unwrap_or(f64::NAN)));
    }
    s
}

/// Grid-search table: one row per configuration with per-fold accuracy.
pub fn grid_table(grid: &[(Category, GridResult)]) -> String {
    let mut s = String::from("category,criterion,max_depth,max_features,n_estimators,mean_accuracy,std_accuracy,best\n");
    for (c, r) in grid {
        for row in &r.table {
            let k = &row.config;
            let best = k.criterion == r.best.criterion && k.max_depth == r.best.max_depth && k.max_features == r.best.max_features && k.n_estimators == r.best.n_estimators;
            s.push_str(&format!(
                "{},{},{},{},{},{:.4},{:.4},{}\n",
                c.number(),
                k.criterion,
                k.max_depth,
                k.max_features,
                k.n_estimators,
                row.mean,
                row.std,
                u8::from(best)
            ));
        }
    }
    s
}
