use alloc::string::String;
use core::fmt;
use core::str::FromStr;

use crate::error::{Error, Result};
use crate::features::Category;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Criterion {
    #[default]
    Gini,
}

impl FromStr for Criterion {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gini" => Ok(Criterion::Gini),
            _ => Err(Error::InvalidConfig(alloc::format!("unknown criterion {s:?} (only \"gini\")"))),
        }
    }
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("gini")
    }
}

/// How many candidate features a split considers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaxFeatures {
    /// Same as `Sqrt` for classification.
    Auto,
    Sqrt,
    Log2,
    All,
}

impl MaxFeatures {
    pub fn resolve(self, n_features: usize) -> usize {
        let n = n_features as f64;
        let k = match self {
            MaxFeatures::Auto | MaxFeatures::Sqrt => libm::floor(libm::sqrt(n)) as usize,
            MaxFeatures::Log2 => {
                if n_features == 0 {
                    0
                } else {
                    libm::floor(libm::log2(n)) as usize
                }
            }
            MaxFeatures::All => n_features,
        };
        k.clamp(1, n_features.max(1))
    }
}

impl FromStr for MaxFeatures {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(MaxFeatures::Auto),
            "sqrt" => Ok(MaxFeatures::Sqrt),
            "log2" => Ok(MaxFeatures::Log2),
            "all" => Ok(MaxFeatures::All),
            _ => Err(Error::InvalidConfig(alloc::format!("unknown max_features {s:?}"))),
        }
    }
}

impl fmt::Display for MaxFeatures {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MaxFeatures::Auto => "auto",
            MaxFeatures::Sqrt => "sqrt",
            MaxFeatures::Log2 => "log2",
            MaxFeatures::All => "all",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForestConfig {
    pub criterion: Criterion,
    pub max_depth: usize,
    pub max_features: MaxFeatures,
    pub n_estimators: usize,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self::for_category(Category::ALL[0])
    }
}

impl ForestConfig {
    /// Grid-searched hyperparameters per categorization task.
    pub fn for_category(c: Category) -> Self {
        let (max_depth, max_features, n_estimators) = match c.number() {
            1 => (7, MaxFeatures::Log2, 200),
            2 => (8, MaxFeatures::Auto, 1000),
            3 => (8, MaxFeatures::Sqrt, 800),
            _ => (8, MaxFeatures::Auto, 1000),
        };
        ForestConfig {
            criterion: Criterion::Gini,
            max_depth,
            max_features,
            n_estimators,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_estimators == 0 {
            return Err(Error::InvalidConfig("forest needs n_estimators >= 1".into()));
        }
        if self.max_depth == 0 {
            return Err(Error::InvalidConfig("forest needs max_depth >= 1".into()));
        }
        Ok(())
    }

    pub fn describe(&self) -> String {
        alloc::format!(
            "criterion={} max_depth={} max_features={} n_estimators={}",
            self.criterion,
            self.max_depth,
            self.max_features,
            self.n_estimators
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecurrentConfig {
    pub embed_dim: usize,
    pub hidden_dim: usize,
    pub bidirectional: bool,
    pub lr: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// Inverted dropout on the pooled hidden state during training.
    pub dropout: f64,
    pub seed: u64,
}

impl Default for RecurrentConfig {
    fn default() -> Self {
        RecurrentConfig {
            embed_dim: 64,
            hidden_dim: 64,
            bidirectional: false,
            lr: 1e-3,
            batch_size: 32,
            epochs: 10,
            dropout: 0.0,
            seed: 0,
        }
    }
}

impl RecurrentConfig {
    pub fn bilstm() -> Self {
        RecurrentConfig {
            bidirectional: true,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.embed_dim == 0 || self.hidden_dim == 0 || self.batch_size == 0 {
            return Err(Error::InvalidConfig("recurrent dimensions and batch size must be positive".into()));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::InvalidConfig("learning rate must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::InvalidConfig("dropout must lie in [0, 1)".into()));
        }
        Ok(())
    }
}

pub const PAPER_LR: f64 = 2e-5;
pub const PAPER_BATCH_SIZE: usize = 32;
pub const PAPER_EPOCHS: usize = 15;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransformerConfig {
    pub layers: usize,
    pub heads: usize,
    pub d_model: usize,
    pub ff_dim: usize,
    pub max_len: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// Pins lr, batch size and epochs to the pretrained fine-tuning recipe.
    pub paper_protocol: bool,
    pub seed: u64,
}

impl Default for TransformerConfig {
    fn default() -> Self {
        TransformerConfig {
            layers: 2,
            heads: 4,
            d_model: 64,
            ff_dim: 128,
            max_len: crate::features::DEFAULT_MAX_LEN,
            lr: 1e-3,
            batch_size: 32,
            epochs: 20,
            paper_protocol: false,
            seed: 0,
        }
    }
}

impl TransformerConfig {
    pub fn with_paper_protocol(self) -> Self {
        TransformerConfig {
            lr: PAPER_LR,
            batch_size: PAPER_BATCH_SIZE,
            epochs: PAPER_EPOCHS,
            paper_protocol: true,
            ..self
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.heads == 0 || self.d_model == 0 || self.ff_dim == 0 || self.batch_size == 0 {
            return Err(Error::InvalidConfig("transformer dimensions and batch size must be positive".into()));
        }
        if self.d_model % self.heads != 0 {
            return Err(Error::InvalidConfig(alloc::format!("d_model {} is not divisible by {} heads", self.d_model, self.heads)));
        }
        if self.max_len < 2 {
            return Err(Error::InvalidConfig("max_len must be at least 2".into()));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::InvalidConfig("learning rate must be positive".into()));
        }
        if self.paper_protocol && (self.lr != PAPER_LR || self.batch_size != PAPER_BATCH_SIZE || self.epochs != PAPER_EPOCHS) {
            return Err(Error::InvalidConfig("paper_protocol requires lr=2e-5, batch_size=32, epochs=15".into()));
        }
        Ok(())
    }
}
