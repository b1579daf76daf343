//! TOML run configuration.
//!
//! Every key is written in dotted form (`forest.cat1.max_depth = 7`) or as
//! the equivalent nested tables. Keys outside [`SCHEMA`] are rejected, and
//! relative paths resolve against the directory holding the config file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use edtweetlab_core::corpus::KeywordSets;
use edtweetlab_core::features::Category;
use edtweetlab_core::models::{Criterion, ForestConfig, ForestGrid, MaxFeatures, ModelKind, RecurrentConfig, TransformerConfig};
use edtweetlab_core::textprep::DedupConfig;
use toml::Value;

use crate::error::{read_to_string, AppError, Result};

pub const SEED_ENV: &str = "EDTWEETLAB_SEED";

pub struct Key {
    pub name: &'static str,
    /// Default as a TOML literal.
    pub default: &'static str,
    pub doc: &'static str,
}

const fn key(name: &'static str, default: &'static str, doc: &'static str) -> Key {
    Key { name, default, doc }
}

macro_rules! forest_keys {
    ($cat:literal, $depth:literal, $features:literal, $trees:literal) => {
        [
            key(concat!("forest.cat", $cat, ".criterion"), "\"gini\"", "split criterion"),
            key(concat!("forest.cat", $cat, ".max_depth"), $depth, "maximum tree depth"),
            key(concat!("forest.cat", $cat, ".max_features"), $features, "features tried per split: auto, sqrt, log2 or all"),
            key(concat!("forest.cat", $cat, ".n_estimators"), $trees, "trees in the ensemble"),
        ]
    };
}

macro_rules! recurrent_keys {
    ($section:literal) => {
        [
            key(concat!($section, ".embed_dim"), "64", "embedding width"),
            key(concat!($section, ".hidden_dim"), "64", "LSTM state width per direction"),
            key(concat!($section, ".lr"), "0.001", "Adam learning rate"),
            key(concat!($section, ".batch_size"), "32", "mini-batch size"),
            key(concat!($section, ".epochs"), "10", "passes over the training set"),
            key(concat!($section, ".dropout"), "0.0", "dropout on the pooled state"),
        ]
    };
}

const GENERAL: [Key; 20] = [
    key("seed", "42", "top-level seed; every stage derives its own from it"),
    key("jobs", "0", "worker threads, 0 for one per core"),
    key("ingest.set1", "[]", "archive files captured by keyword set 1"),
    key("ingest.set2", "[]", "archive files captured by keyword set 2"),
    key("ingest.set3", "[]", "archive files captured by keyword set 3"),
    key("ingest.require_keyword", "false", "drop tweets matching no keyword phrase"),
    key("data.labels", "\"labels.csv\"", "label file: id,cat1,cat2,cat3,cat4"),
    key("output.dir", "\"out\"", "directory for every generated file"),
    key("preprocess.stopwords", "\"\"", "stop-word file, empty for the bundled English list"),
    key("preprocess.sim_threshold", "0.8", "near-duplicate similarity threshold"),
    key("features.min_df", "2", "minimum document frequency for a vocabulary term"),
    key("features.max_len", "64", "recurrent input length in tokens"),
    key("evaluate.models", "[\"forest\", \"rnn\", \"bilstm\", \"transformer\"]", "models to evaluate"),
    key("evaluate.categories", "[1, 2, 3, 4]", "categories to evaluate"),
    key("evaluate.runs", "5", "repeated runs per neural model"),
    key("evaluate.folds", "5", "cross-validation folds for the forest"),
    key("evaluate.test_fraction", "0.3", "held-out share for neural models"),
    key("evaluate.stratify", "false", "stratify the held-out split by label"),
    key("evaluate.vary_split", "false", "reshuffle the split on every run, not only the seed"),
    key("evaluate.forest_protocol", "\"cv\"", "forest evaluation: cv (k-fold) or split (like the neural models)"),
];

const TAIL: [Key; 22] = [
    key("train.checkpoints", "true", "save one model per evaluated model and category, fit on all labeled data"),
    key("evaluate.grid_search", "false", "choose forest hyperparameters by cross-validated grid search"),
    key("forest.grid.criterion", "[\"gini\"]", "grid values for criterion"),
    key("forest.grid.max_depth", "[7, 8]", "grid values for max_depth"),
    key("forest.grid.max_features", "[\"log2\", \"sqrt\"]", "grid values for max_features"),
    key("forest.grid.n_estimators", "[200, 800, 1000]", "grid values for n_estimators"),
    key("transformer.layers", "2", "encoder blocks"),
    key("transformer.heads", "4", "attention heads"),
    key("transformer.d_model", "64", "model width"),
    key("transformer.ff_dim", "128", "feed-forward width"),
    key("transformer.max_len", "64", "input length including the CLS token"),
    key("transformer.lr", "0.001", "Adam learning rate"),
    key("transformer.batch_size", "32", "mini-batch size"),
    key("transformer.epochs", "20", "passes over the training set"),
    key("transformer.paper_protocol", "false", "use the fine-tuning recipe lr 2e-5, batch 32, 15 epochs"),
    key("keywords.set1", "[\"anorexia\", \"anorexic\", \"dietary disorders\", \"inappetence\", \"feeding disorder\", \"food problem\", \"binge eating\", \"anorectic\"]", "keyword set 1 phrases"),
    key("keywords.set2", "[\"eating disorders\", \"bulimia\", \"food issues\", \"loss of appetite\", \"food issue\", \"food hater\", \"eat healthier\", \"disturbed eating habits\", \"abnormal eating habits\", \"abnormal eating habit\"]", "keyword set 2 phrases"),
    key("keywords.set3", "[\"binge-vomit syndrome\", \"bingeing\", \"bulimarexia\", \"anorexic skinny\", \"eating healthy\"]", "keyword set 3 phrases"),
    key("report.timing", "\"excluded\"", "excluded: NA in the CSV timing column; measured: seconds"),
    key("report.markdown", "\"report.md\"", "Markdown report name inside output.dir"),
    key("report.csv", "\"report.csv\"", "CSV report name inside output.dir"),
    key("report.timing_csv", "\"timing.csv\"", "per-cell wall-clock seconds inside output.dir"),
];

pub static SCHEMA: std::sync::LazyLock<Vec<Key>> = std::sync::LazyLock::new(|| {
    let mut v: Vec<Key> = GENERAL.into_iter().collect();
    v.extend(forest_keys!("1", "7", "\"log2\"", "200"));
    v.extend(forest_keys!("2", "8", "\"auto\"", "1000"));
    v.extend(forest_keys!("3", "8", "\"sqrt\"", "800"));
    v.extend(forest_keys!("4", "8", "\"auto\"", "1000"));
    v.extend(recurrent_keys!("rnn"));
    v.extend(recurrent_keys!("bilstm"));
    v.extend(TAIL);
    v
});

/// Every key with its default, as a TOML document.
pub fn schema_dump() -> String {
    let mut s = format!("# edtweetlab {} configuration keys and defaults\n", env!("CARGO_PKG_VERSION"));
    for k in SCHEMA.iter() {
        s.push_str(&format!("{} = {}  # {}\n", k.name, k.default, k.doc));
    }
    s
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimingMode {
    Excluded,
    Measured,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ForestProtocol {
    CrossValidation,
    Split,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub seed: u64,
    pub jobs: usize,
    pub ingest: [Vec<PathBuf>; 3],
    pub require_keyword: bool,
    pub keywords: KeywordSets,
    pub labels: PathBuf,
    pub output_dir: PathBuf,
    pub stopwords: Option<PathBuf>,
    pub dedup: DedupConfig,
    pub min_df: usize,
    pub max_len: usize,
    pub models: Vec<ModelKind>,
    pub categories: Vec<Category>,
    pub runs: usize,
    pub folds: usize,
    pub test_fraction: f64,
    pub stratify: bool,
    pub vary_split: bool,
    pub forest_protocol: ForestProtocol,
    pub grid_search: bool,
    pub checkpoints: bool,
    pub forest: [ForestConfig; 4],
    pub grid: ForestGrid,
    pub rnn: RecurrentConfig,
    pub bilstm: RecurrentConfig,
    pub transformer: TransformerConfig,
    pub timing: TimingMode,
    pub report_markdown: String,
    pub report_csv: String,
    pub timing_csv: String,
    /// Resolved values of every key, one `key = value` line each.
    pub snapshot: String,
}

fn flatten(prefix: &str, table: &toml::Table, out: &mut BTreeMap<String, Value>) {
    for (k, v) in table {
        let name = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
        match v {
            Value::Table(t) => flatten(&name, t, out),
            _ => {
                out.insert(name, v.clone());
            }
        }
    }
}

fn cfg_err(msg: impl Into<String>) -> AppError {
    AppError::Config(msg.into())
}

struct Values {
    map: BTreeMap<String, Value>,
    explicit: Vec<String>,
}

impl Values {
    fn new(user: BTreeMap<String, Value>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for k in SCHEMA.iter() {
            let default: toml::Table = format!("v = {}", k.default).parse().expect("schema defaults are valid TOML");
            map.insert(k.name.to_string(), default["v"].clone());
        }
        let mut explicit = Vec::new();
        for (k, v) in user {
            match map.get(&k) {
                None => return Err(cfg_err(format!("unknown config key {k:?}"))),
                Some(d) if !same_type(d, &v) => return Err(cfg_err(format!("{k}: expected {}, found {}", d.type_str(), v.type_str()))),
                Some(_) => {
                    explicit.push(k.clone());
                    map.insert(k, v);
                }
            }
        }
        Ok(Values { map, explicit })
    }

    fn get(&self, k: &str) -> &Value {
        self.map.get(k).unwrap_or_else(|| panic!("{k} missing from schema"))
    }

    fn uint(&self, k: &str) -> Result<u64> {
        match self.get(k) {
            Value::Integer(i) if *i >= 0 => Ok(*i as u64),
            v => Err(cfg_err(format!("{k}: expected a non-negative integer, found {v}"))),
        }
    }

    fn usize(&self, k: &str) -> Result<usize> {
        Ok(self.uint(k)? as usize)
    }

    fn float(&self, k: &str) -> Result<f64> {
        match self.get(k) {
            Value::Float(f) => Ok(*f),
            Value::Integer(i) => Ok(*i as f64),
            v => Err(cfg_err(format!("{k}: expected a number, found {v}"))),
        }
    }

    fn bool(&self, k: &str) -> bool {
        self.get(k).as_bool().unwrap_or_default()
    }

    fn str(&self, k: &str) -> &str {
        self.get(k).as_str().unwrap_or_default()
    }

    fn array(&self, k: &str) -> &[Value] {
        self.get(k).as_array().map(Vec::as_slice).unwrap_or_default()
    }

    fn strings(&self, k: &str) -> Result<Vec<String>> {
        self.array(k)
            .iter()
            .map(|v| v.as_str().map(str::to_owned).ok_or_else(|| cfg_err(format!("{k}: expected strings"))))
            .collect()
    }

    fn parsed<T: std::str::FromStr>(&self, k: &str) -> Result<Vec<T>>
    where
        T::Err: std::fmt::Display,
    {
        self.array(k)
            .iter()
            .map(|v| {
                let raw = match v {
                    Value::String(s) => s.clone(),
                    other => other.to_string(),
                };
                raw.parse::<T>().map_err(|e| cfg_err(format!("{k}: {e}")))
            })
            .collect()
    }
}

fn same_type(default: &Value, v: &Value) -> bool {
    matches!(
        (default, v),
        (Value::Integer(_), Value::Integer(_))
            | (Value::Float(_), Value::Float(_) | Value::Integer(_))
            | (Value::Boolean(_), Value::Boolean(_))
            | (Value::String(_), Value::String(_))
            | (Value::Array(_), Value::Array(_))
    )
}

fn recurrent(v: &Values, section: &str, bidirectional: bool) -> Result<RecurrentConfig> {
    let k = |f: &str| format!("{section}.{f}");
    let c = RecurrentConfig {
        embed_dim: v.usize(&k("embed_dim"))?,
        hidden_dim: v.usize(&k("hidden_dim"))?,
        bidirectional,
        lr: v.float(&k("lr"))?,
        batch_size: v.usize(&k("batch_size"))?,
        epochs: v.usize(&k("epochs"))?,
        dropout: v.float(&k("dropout"))?,
        seed: 0,
    };
    c.validate().map_err(|e| cfg_err(format!("{section}: {e}")))?;
    Ok(c)
}

fn forest(v: &Values, cat: usize) -> Result<ForestConfig> {
    let k = |f: &str| format!("forest.cat{cat}.{f}");
    let c = ForestConfig {
        criterion: v.str(&k("criterion")).parse::<Criterion>().map_err(|e| cfg_err(format!("{}: {e}", k("criterion"))))?,
        max_depth: v.usize(&k("max_depth"))?,
        max_features: v.str(&k("max_features")).parse::<MaxFeatures>().map_err(|e| cfg_err(format!("{}: {e}", k("max_features"))))?,
        n_estimators: v.usize(&k("n_estimators"))?,
        seed: 0,
    };
    c.validate().map_err(|e| cfg_err(format!("forest.cat{cat}: {e}")))?;
    Ok(c)
}

fn transformer(v: &Values) -> Result<TransformerConfig> {
    let mut c = TransformerConfig {
        layers: v.usize("transformer.layers")?,
        heads: v.usize("transformer.heads")?,
        d_model: v.usize("transformer.d_model")?,
        ff_dim: v.usize("transformer.ff_dim")?,
        max_len: v.usize("transformer.max_len")?,
        lr: v.float("transformer.lr")?,
        batch_size: v.usize("transformer.batch_size")?,
        epochs: v.usize("transformer.epochs")?,
        paper_protocol: false,
        seed: 0,
    };
    if v.bool("transformer.paper_protocol") {
        // explicitly set recipe keys must agree; unset ones take the recipe
        let pinned = c.with_paper_protocol();
        for (key, set) in [("lr", c.lr != pinned.lr), ("batch_size", c.batch_size != pinned.batch_size), ("epochs", c.epochs != pinned.epochs)] {
            if set && v.explicit.iter().any(|e| e == &format!("transformer.{key}")) {
                return Err(cfg_err(format!("transformer.{key} conflicts with transformer.paper_protocol = true")));
            }
        }
        c = pinned;
    }
    c.validate().map_err(|e| cfg_err(format!("transformer: {e}")))?;
    Ok(c)
}

fn resolve(base: &Path, p: &str) -> PathBuf {
    let p = Path::new(p);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

impl Config {
    /// Parses config text. `base` anchors relative paths; `seed_override`
    /// replaces the configured seed (the environment override).
    pub fn parse(text: &str, base: &Path, seed_override: Option<u64>) -> Result<Self> {
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| cfg_err(e.message().to_string()))?;
        let mut flat = BTreeMap::new();
        flatten("", &table, &mut flat);
        let mut v = Values::new(flat)?;
        if let Some(seed) = seed_override {
            v.map.insert("seed".into(), Value::Integer(seed as i64));
        }
        let paths = |k: &str| -> Result<Vec<PathBuf>> { Ok(v.strings(k)?.iter().map(|p| resolve(base, p)).collect()) };
        let keywords = KeywordSets::new(v.strings("keywords.set1")?, v.strings("keywords.set2")?, v.strings("keywords.set3")?)
            .map_err(|e| cfg_err(format!("keywords: {e}")))?;
        let dedup = DedupConfig::with_threshold(v.float("preprocess.sim_threshold")?).map_err(|e| cfg_err(format!("preprocess.sim_threshold: {e}")))?;
        let models: Vec<ModelKind> = v.parsed("evaluate.models")?;
        let categories = v
            .parsed::<u8>("evaluate.categories")?
            .into_iter()
            .map(|n| Category::new(n).map_err(|e| cfg_err(format!("evaluate.categories: {e}"))))
            .collect::<Result<Vec<_>>>()?;
        let test_fraction = v.float("evaluate.test_fraction")?;
        if !(test_fraction > 0.0 && test_fraction < 1.0) {
            return Err(cfg_err("evaluate.test_fraction must lie strictly between 0 and 1"));
        }
        let runs = v.usize("evaluate.runs")?;
        let folds = v.usize("evaluate.folds")?;
        if runs == 0 || folds < 2 {
            return Err(cfg_err("evaluate.runs must be >= 1 and evaluate.folds >= 2"));
        }
        let forest_protocol = match v.str("evaluate.forest_protocol") {
            "cv" => ForestProtocol::CrossValidation,
            "split" => ForestProtocol::Split,
            other => return Err(cfg_err(format!("evaluate.forest_protocol: unknown value {other:?} (cv or split)"))),
        };
        let timing = match v.str("report.timing") {
            "excluded" => TimingMode::Excluded,
            "measured" => TimingMode::Measured,
            other => return Err(cfg_err(format!("report.timing: unknown value {other:?} (excluded or measured)"))),
        };
        let grid = ForestGrid {
            criterion: v.parsed("forest.grid.criterion")?,
            max_depth: v.parsed("forest.grid.max_depth")?,
            max_features: v.parsed("forest.grid.max_features")?,
            n_estimators: v.parsed("forest.grid.n_estimators")?,
        };
        let min_df = v.usize("features.min_df")?;
        let max_len = v.usize("features.max_len")?;
        if min_df == 0 || max_len < 2 {
            return Err(cfg_err("features.min_df must be >= 1 and features.max_len >= 2"));
        }
        let stopwords = Some(v.str("preprocess.stopwords")).filter(|s| !s.is_empty()).map(|s| resolve(base, s));
        let snapshot = v.map.iter().map(|(k, val)| format!("{k} = {val}\n")).collect();
        Ok(Config {
            seed: v.uint("seed")?,
            jobs: v.usize("jobs")?,
            ingest: [paths("ingest.set1")?, paths("ingest.set2")?, paths("ingest.set3")?],
            require_keyword: v.bool("ingest.require_keyword"),
            keywords,
            labels: resolve(base, v.str("data.labels")),
            output_dir: resolve(base, v.str("output.dir")),
            stopwords,
            dedup,
            min_df,
            max_len,
            models,
            categories,
            runs,
            folds,
            test_fraction,
            stratify: v.bool("evaluate.stratify"),
            vary_split: v.bool("evaluate.vary_split"),
            forest_protocol,
            grid_search: v.bool("evaluate.grid_search"),
            checkpoints: v.bool("train.checkpoints"),
            forest: [forest(&v, 1)?, forest(&v, 2)?, forest(&v, 3)?, forest(&v, 4)?],
            grid,
            rnn: recurrent(&v, "rnn", false)?,
            bilstm: recurrent(&v, "bilstm", true)?,
            transformer: transformer(&v)?,
            timing,
            report_markdown: v.str("report.markdown").to_string(),
            report_csv: v.str("report.csv").to_string(),
            timing_csv: v.str("report.timing_csv").to_string(),
            snapshot,
        })
    }

    /// Defaults only, paths relative to `base`.
    pub fn defaults(base: &Path) -> Self {
        Config::parse("", base, None).expect("defaults are valid")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = read_to_string(path)?;
        let base = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
        Config::parse(&text, base, seed_from_env()?)
    }

    pub fn forest_for(&self, c: Category) -> ForestConfig {
        self.forest[c.index()]
    }
}

pub fn seed_from_env() -> Result<Option<u64>> {
    match std::env::var(SEED_ENV) {
        Ok(s) => s.trim().parse().map(Some).map_err(|_| cfg_err(format!("{SEED_ENV} must be an unsigned integer, got {s:?}"))),
        Err(_) => Ok(None),
    }
}
