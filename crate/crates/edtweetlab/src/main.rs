use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use edtweetlab::archive::{read_corpus, write_corpus};
use edtweetlab::checkpoint;
use edtweetlab::config::{schema_dump, seed_from_env, Config, TimingMode};
use edtweetlab::error::{write_atomic, AppError, Result};
use edtweetlab::evaluate::{evaluate, grid_table, timing_table, tune_forests};
use edtweetlab::report::{emit_report, parse_report, ReportFormat};
use edtweetlab::run::{rerun_manifest, run_config, stats_markdown, with_jobs};
use edtweetlab::stages::{featurize, ingest, load_labeled, load_stoplist, preprocess, stats, train_full};
use edtweetlab::tables::{label_table, read_clean, read_labels, term_table, write_clean, write_removed};
use edtweetlab_core::corpus::SourceSet;
use edtweetlab_core::features::Category;
use edtweetlab_core::models::ModelKind;
use edtweetlab_core::textprep::DedupConfig;

#[derive(Parser)]
#[command(name = "edtweetlab", version, about = "Eating-disorder tweet classification pipeline")]
struct Cli {
    /// Worker threads (0 = one per core). Overrides the config file.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Markdown,
}

#[derive(Clone, Copy, ValueEnum)]
enum Timing {
    Excluded,
    Measured,
}

#[derive(Subcommand)]
enum Command {
    /// Parse tweet archives, merge them and drop retweets, duplicates and non-English tweets
    Ingest {
        #[arg(long = "in", num_args = 1.., required = true)]
        inputs: Vec<PathBuf>,
        /// Keyword set per input file, or one set for all of them
        #[arg(long = "set", num_args = 1.., required = true, value_parser = clap::value_parser!(u8).range(1..=3))]
        sets: Vec<u8>,
        #[arg(long)]
        out: PathBuf,
        /// Stop-word file used by the language heuristic
        #[arg(long)]
        stopwords: Option<PathBuf>,
        /// Drop tweets that mention no keyword phrase
        #[arg(long)]
        require_keyword: bool,
    },
    /// Tokenize, drop near-duplicates and remove stop words
    Preprocess {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        stopwords: Option<PathBuf>,
        #[arg(long, default_value_t = 0.8)]
        sim_threshold: f64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        removed_log: Option<PathBuf>,
    },
    /// Most frequent terms and the label distribution
    Stats {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        labels: Option<PathBuf>,
        #[arg(long, default_value_t = 10)]
        top_k: usize,
        #[arg(long, value_enum, default_value = "markdown")]
        format: Format,
    },
    /// Fit one model for one category on every labeled tweet
    Train {
        #[arg(long)]
        model: ModelKind,
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=4))]
        category: u8,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Pick forest hyperparameters by grid search first
        #[arg(long)]
        grid: bool,
    },
    /// Score a saved model on cleaned tweets
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Config the model was trained with
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Cross-validate and benchmark models, writing the report tables
    Evaluate {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        #[arg(long, value_delimiter = ',')]
        models: Option<Vec<ModelKind>>,
        #[arg(long, value_delimiter = ',', value_parser = clap::value_parser!(u8).range(1..=4))]
        categories: Option<Vec<u8>>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        runs: Option<usize>,
        #[arg(long)]
        folds: Option<usize>,
        #[arg(long)]
        stratify: bool,
        #[arg(long)]
        vary_split: bool,
        #[arg(long, value_enum)]
        timing: Option<Timing>,
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long)]
        report_csv: Option<PathBuf>,
        #[arg(long)]
        timing_csv: Option<PathBuf>,
    },
    /// Re-render a report CSV
    Report {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_enum, default_value = "markdown")]
        format: Format,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run every stage from a config file, or repeat a run from its manifest
    Run {
        #[arg(long, required_unless_present = "manifest", conflicts_with = "manifest")]
        config: Option<PathBuf>,
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
    /// Print the version and every config key with its default
    Schema,
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => write_atomic(p, text.as_bytes()),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn load_config(path: Option<&Path>) -> Result<Config> {
    match path {
        Some(p) => Config::load(p),
        None => {
            let mut c = Config::defaults(Path::new("."));
            if let Some(s) = seed_from_env()? {
                c.seed = s;
            }
            Ok(c)
        }
    }
}

fn execute(cli: Cli) -> Result<()> {
    let jobs = cli.jobs;
    match cli.command {
        Command::Ingest { inputs, sets, out, stopwords, require_keyword } => {
            if sets.len() != 1 && sets.len() != inputs.len() {
                return Err(AppError::Config(format!("give one --set for all inputs or one per input ({} inputs, {} sets)", inputs.len(), sets.len())));
            }
            let archives: Vec<(PathBuf, SourceSet)> = inputs
                .into_iter()
                .enumerate()
                .map(|(i, p)| Ok((p, SourceSet::from_number(sets[if sets.len() == 1 { 0 } else { i }])?)))
                .collect::<Result<_>>()?;
            let stop = load_stoplist(stopwords.as_deref())?;
            let keywords = Config::defaults(Path::new(".")).keywords;
            let got = ingest(&archives, &stop, require_keyword.then_some(&keywords))?;
            let mut buf = Vec::new();
            write_corpus(&got.corpus, &mut buf).map_err(|e| AppError::io(&out, e))?;
            write_atomic(&out, &buf)?;
            let [raw, rt, dup, lang] = got.stats.stages();
            eprintln!("raw {raw}, after retweets {rt}, after duplicates {dup}, after language {lang}, rejected lines {}, off-topic {}", got.rejected, got.off_topic);
        }
        Command::Preprocess { input, stopwords, sim_threshold, out, removed_log } => {
            let corpus = read_corpus(&input)?;
            let stop = load_stoplist(stopwords.as_deref())?;
            let pre = preprocess(&corpus, &stop, &DedupConfig::with_threshold(sim_threshold)?)?;
            let mut buf = Vec::new();
            write_clean(&pre.clean, &mut buf).map_err(|e| AppError::io(&out, e))?;
            write_atomic(&out, &buf)?;
            if let Some(log) = removed_log {
                let mut buf = Vec::new();
                write_removed(&pre.removed, &mut buf)?;
                write_atomic(&log, &buf)?;
            }
            eprintln!("kept {}, removed {} near-duplicates", pre.clean.len(), pre.removed.len());
        }
        Command::Stats { input, labels, top_k, format } => {
            let clean = read_clean(&input)?;
            let labeled = match &labels {
                Some(l) => Some(edtweetlab::stages::label(&clean, &read_labels(l)?)?),
                None => None,
            };
            let st = stats(&clean, labeled.as_ref().map(|l| l.data.as_slice()), top_k)?;
            match format {
                Format::Markdown => print!("{}", stats_markdown(&st.top_terms, st.labels.as_ref())),
                Format::Csv => {
                    print!("{}", term_table(&st.top_terms, false));
                    if let Some(l) = &st.labels {
                        print!("\n{}", label_table(l, false));
                    }
                }
            }
        }
        Command::Train { model, category, config, data, labels, out, grid } => {
            let mut cfg = load_config(config.as_deref())?;
            if let Some(j) = jobs {
                cfg.jobs = j;
            }
            let cat = Category::new(category)?;
            let labeled = load_labeled(&data, &labels)?;
            let trained = with_jobs(cfg.jobs, || -> Result<_> {
                let tuned = if grid && model == ModelKind::Forest {
                    let c = Config { categories: vec![cat], ..cfg.clone() };
                    let g = tune_forests(&labeled.data, &c)?;
                    eprint!("{}", grid_table(&g));
                    Some(g[0].1.best)
                } else {
                    None
                };
                train_full(model, cat, &labeled.data, &cfg, tuned)
            })??;
            checkpoint::save(&trained, &out)?;
            eprintln!("trained {model} for category {category} on {} tweets", labeled.data.len());
        }
        Command::Predict { model, data, config, out } => {
            let m = checkpoint::load(&model)?;
            let vocab = m.vocab.clone().ok_or_else(|| AppError::format(&model, "checkpoint carries no vocabulary"))?;
            let clean = read_clean(&data)?;
            // recurrent inputs are cut at features.max_len, so take it from the training config
            let mut cfg = load_config(config.as_deref())?;
            if let edtweetlab_core::models::ModelConfig::Transformer(t) = &m.config {
                cfg.transformer = *t;
            }
            let x = featurize(m.kind, &clean, &vocab, &cfg)?;
            let preds = m.predict(&x)?;
            let mut text = String::from("id,probability,label\n");
            for (t, p) in clean.iter().zip(preds) {
                text.push_str(&format!("{},{:.6},{}\n", t.id, p.probability, u8::from(p.label)));
            }
            emit(out.as_deref(), &text)?;
        }
        Command::Evaluate {
            config,
            data,
            labels,
            models,
            categories,
            seed,
            runs,
            folds,
            stratify,
            vary_split,
            timing,
            report,
            report_csv,
            timing_csv,
        } => {
            let mut cfg = load_config(config.as_deref())?;
            if let Some(m) = models {
                cfg.models = m;
            }
            if let Some(c) = categories {
                cfg.categories = c.into_iter().map(Category::new).collect::<edtweetlab_core::Result<_>>()?;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            cfg.runs = runs.unwrap_or(cfg.runs);
            cfg.folds = folds.unwrap_or(cfg.folds);
            cfg.stratify |= stratify;
            cfg.vary_split |= vary_split;
            if let Some(t) = timing {
                cfg.timing = match t {
                    Timing::Excluded => TimingMode::Excluded,
                    Timing::Measured => TimingMode::Measured,
                };
            }
            if let Some(j) = jobs {
                cfg.jobs = j;
            }
            if cfg.runs == 0 || cfg.folds < 2 {
                return Err(AppError::Config("--runs must be >= 1 and --folds >= 2".into()));
            }
            let labeled = load_labeled(&data, &labels)?;
            let eval = with_jobs(cfg.jobs, || evaluate(&labeled.data, &labeled.hash, &cfg))??;
            let md = emit_report(&eval.timed, ReportFormat::Markdown)?;
            match &report {
                Some(p) => write_atomic(p, md.as_bytes())?,
                None if report_csv.is_none() => print!("{md}"),
                None => {}
            }
            if let Some(p) = &report_csv {
                write_atomic(p, emit_report(&eval.report, ReportFormat::Csv)?.as_bytes())?;
            }
            if let Some(p) = &timing_csv {
                write_atomic(p, timing_table(&eval.timed, cfg.jobs).as_bytes())?;
            }
        }
        Command::Report { input, format, out } => {
            let text = edtweetlab::error::read_to_string(&input)?;
            let r = parse_report(&text, &input)?;
            let f = match format {
                Format::Csv => ReportFormat::Csv,
                Format::Markdown => ReportFormat::Markdown,
            };
            emit(out.as_deref(), &emit_report(&r, f)?)?;
        }
        Command::Run { config, manifest } => {
            let m = match (config, manifest) {
                (_, Some(m)) => rerun_manifest(&m, jobs)?,
                (Some(c), None) => run_config(&c, jobs)?,
                (None, None) => unreachable!("clap requires one of them"),
            };
            eprintln!("run complete: {} outputs, {} labeled tweets", m.outputs.len(), m.counts.get("labeled").copied().unwrap_or(0));
        }
        Command::Schema => print!("{}", schema_dump()),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("edtweetlab: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
