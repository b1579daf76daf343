//! End-to-end runs and their manifests.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use edtweetlab_core::corpus::SourceSet;
use edtweetlab_core::features::Category;
use edtweetlab_core::models::ModelKind;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::archive::write_corpus;
use crate::checkpoint;
use crate::config::Config;
use crate::error::{read_to_string, write_atomic, AppError, Result};
use crate::evaluate::{evaluate, grid_table, timing_table};
use crate::report::{emit_report, ReportFormat};
use crate::stages::{ingest, label, load_stoplist, preprocess, stats, train_full};
use crate::tables::{label_table, read_labels, term_table, write_clean, write_removed};

pub const MANIFEST_NAME: &str = "manifest.json";
pub const TOP_TERMS: usize = 10;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileHash {
    pub path: PathBuf,
    pub sha256: String,
}

impl FileHash {
    pub fn of(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| AppError::io(path, e))?;
        Ok(FileHash { path: path.to_path_buf(), sha256: hex::encode(Sha256::digest(&bytes)) })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub seed: u64,
    pub config_path: PathBuf,
    pub config_text: String,
    /// Every key's resolved value.
    pub config_resolved: String,
    pub dataset_sha256: String,
    pub inputs: Vec<FileHash>,
    pub counts: BTreeMap<String, usize>,
    pub outputs: Vec<FileHash>,
}

impl RunManifest {
    pub fn load(path: &Path) -> Result<Self> {
        serde_json::from_str(&read_to_string(path)?).map_err(|e| AppError::format(path, e.to_string()))
    }

    /// Confirms every recorded input still has its recorded hash.
    pub fn verify_inputs(&self) -> Result<()> {
        for f in &self.inputs {
            let now = FileHash::of(&f.path)?;
            if now.sha256 != f.sha256 {
                return Err(AppError::Config(format!("{} changed since the manifest was written", f.path.display())));
            }
        }
        Ok(())
    }
}

fn build_pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| AppError::Config(format!("cannot start {jobs} worker threads: {e}")))
}

/// Runs `f` on a pool of `jobs` threads (0 picks one per core).
pub fn with_jobs<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    Ok(build_pool(jobs)?.install(f))
}

struct Outputs {
    dir: PathBuf,
    written: Vec<PathBuf>,
}

impl Outputs {
    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let p = self.dir.join(name);
        write_atomic(&p, bytes)?;
        self.written.push(p);
        Ok(())
    }
}

fn io_buf(f: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    f(&mut buf).map_err(|e| AppError::io(Path::new("<memory>"), e))?;
    Ok(buf)
}

pub fn stats_markdown(top: &[(String, usize)], labels: Option<&[edtweetlab_core::features::LabelCount; 4]>) -> String {
    let mut s = format!("## Top {} terms\n\n{}", top.len(), term_table(top, true));
    if let Some(l) = labels {
        s.push_str("\n## Label distribution\n\n");
        s.push_str(&label_table(l, true));
    }
    s
}

/// Executes every stage for `cfg`, writing into its output directory, and
/// returns the manifest (also written there).
pub fn run_pipeline(cfg: &Config, config_path: &Path, config_text: &str) -> Result<RunManifest> {
    let mut out = Outputs { dir: cfg.output_dir.clone(), written: Vec::new() };
    let mut counts = BTreeMap::new();
    let mut inputs = Vec::new();

    let archives: Vec<(PathBuf, SourceSet)> = cfg
        .ingest
        .iter()
        .zip(SourceSet::ALL)
        .flat_map(|(paths, set)| paths.iter().map(move |p| (p.clone(), set)))
        .collect();
    for (p, _) in &archives {
        inputs.push(FileHash::of(p)?);
    }
    let labels = read_labels(&cfg.labels)?;
    inputs.push(FileHash::of(&cfg.labels)?);
    if let Some(p) = &cfg.stopwords {
        inputs.push(FileHash::of(p)?);
    }
    let stop = load_stoplist(cfg.stopwords.as_deref())?;

    let ingested = ingest(&archives, &stop, cfg.require_keyword.then_some(&cfg.keywords))?;
    for (name, n) in ["raw", "after_retweets", "after_duplicates", "after_language"].into_iter().zip(ingested.stats.stages()) {
        counts.insert(name.to_string(), n);
    }
    counts.insert("rejected_lines".into(), ingested.rejected);
    counts.insert("off_topic".into(), ingested.off_topic);
    out.write("corpus.tsv", &io_buf(|b| write_corpus(&ingested.corpus, b))?)?;

    let pre = preprocess(&ingested.corpus, &stop, &cfg.dedup)?;
    counts.insert("near_duplicates".into(), pre.removed.len());
    counts.insert("clean".into(), pre.clean.len());
    out.write("clean.tsv", &io_buf(|b| write_clean(&pre.clean, b))?)?;
    let mut removed = Vec::new();
    write_removed(&pre.removed, &mut removed)?;
    out.write("removed.csv", &removed)?;

    let labeled = label(&pre.clean, &labels)?;
    counts.insert("labeled".into(), labeled.data.len());
    counts.insert("unmatched_labels".into(), labeled.unmatched_labels);
    let st = stats(&pre.clean, Some(&labeled.data), TOP_TERMS)?;
    out.write("stats.md", stats_markdown(&st.top_terms, st.labels.as_ref()).as_bytes())?;

    let eval = with_jobs(cfg.jobs, || evaluate(&labeled.data, &labeled.hash, cfg))??;
    out.write(&cfg.report_csv, emit_report(&eval.report, ReportFormat::Csv)?.as_bytes())?;
    out.write(&cfg.report_markdown, emit_report(&eval.timed, ReportFormat::Markdown)?.as_bytes())?;
    out.write(&cfg.timing_csv, timing_table(&eval.timed, cfg.jobs).as_bytes())?;
    if !eval.grid.is_empty() {
        out.write("grid.csv", grid_table(&eval.grid).as_bytes())?;
    }

    if cfg.checkpoints {
        let tasks: Vec<(ModelKind, Category)> = cfg.models.iter().flat_map(|&m| cfg.categories.iter().map(move |&c| (m, c))).collect();
        let models = with_jobs(cfg.jobs, || {
            use rayon::prelude::*;
            tasks
                .par_iter()
                .map(|&(m, c)| {
                    let tuned = eval.grid.iter().find(|(g, _)| *g == c).map(|(_, r)| r.best);
                    let forest = if m == ModelKind::Forest { tuned } else { None };
                    train_full(m, c, &labeled.data, cfg, forest).and_then(|model| checkpoint::encode(&model))
                })
                .collect::<Result<Vec<_>>>()
        })??;
        for ((m, c), bytes) in tasks.iter().zip(models) {
            out.write(&format!("models/{m}-cat{}.bin", c.number()), &bytes)?;
        }
    }

    let manifest = RunManifest {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        seed: cfg.seed,
        config_path: std::path::absolute(config_path).unwrap_or_else(|_| config_path.to_path_buf()),
        config_text: config_text.to_string(),
        config_resolved: cfg.snapshot.clone(),
        dataset_sha256: labeled.hash,
        inputs,
        counts,
        outputs: out.written.iter().map(|p| FileHash::of(p)).collect::<Result<_>>()?,
    };
    let json = serde_json::to_string_pretty(&manifest).map_err(|e| AppError::Training(e.to_string()))?;
    write_atomic(&cfg.output_dir.join(MANIFEST_NAME), json.as_bytes())?;
    Ok(manifest)
}

/// Runs from a config file. `jobs` overrides the configured thread count.
pub fn run_config(path: &Path, jobs: Option<usize>) -> Result<RunManifest> {
    let text = read_to_string(path)?;
    let mut cfg = Config::load(path)?;
    if let Some(j) = jobs {
        cfg.jobs = j;
    }
    run_pipeline(&cfg, path, &text)
}

/// Re-executes the run a manifest describes, after checking its inputs.
pub fn rerun_manifest(path: &Path, jobs: Option<usize>) -> Result<RunManifest> {
    let m = RunManifest::load(path)?;
    m.verify_inputs()?;
    let base = m.config_path.parent().unwrap_or(Path::new("."));
    let mut cfg = Config::parse(&m.config_text, base, Some(m.seed))?;
    if let Some(j) = jobs {
        cfg.jobs = j;
    }
    run_pipeline(&cfg, &m.config_path, &m.config_text)
}
