//! Evaluation results keyed by model and category.

use alloc::string::String;
use alloc::vec::Vec;

use super::runs::RunSummary;
use crate::features::Category;
use crate::models::ModelKind;

/// One (model, category) cell. Percentages are in `[0, 100]`; the standard
/// deviations are in percentage points.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportCell {
    pub model: ModelKind,
    pub category: Category,
    pub f1_pct: f64,
    pub accuracy_pct: f64,
    pub std_f1: f64,
    pub std_acc: f64,
    /// Mean seconds per run or fold; `None` when timing is not recorded.
    pub wall_clock_s: Option<f64>,
    pub seed: u64,
}

impl ReportCell {
    pub fn from_summary(model: ModelKind, category: Category, seed: u64, s: &RunSummary, wall_clock_s: Option<f64>) -> Self {
        ReportCell {
            model,
            category,
            f1_pct: 100.0 * s.mean_f1,
            accuracy_pct: 100.0 * s.mean_accuracy,
            std_f1: 100.0 * s.std_f1,
            std_acc: 100.0 * s.std_accuracy,
            wall_clock_s,
            seed,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ReportMeta {
    pub seed: u64,
    pub dataset_hash: String,
    pub config: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EvalReport {
    pub cells: Vec<ReportCell>,
    pub meta: ReportMeta,
}

impl EvalReport {
    /// Cells in model then category order, whatever order they were added.
    pub fn sorted(mut self) -> Self {
        self.cells.sort_by_key(|c| (c.model, c.category));
        self
    }

    pub fn cell(&self, model: ModelKind, category: Category) -> Option<&ReportCell> {
        self.cells.iter().find(|c| c.model == model && c.category == category)
    }

    pub fn models(&self) -> Vec<ModelKind> {
        let mut m: Vec<ModelKind> = self.cells.iter().map(|c| c.model).collect();
        m.sort();
        m.dedup();
        m
    }

    pub fn categories(&self) -> Vec<Category> {
        let mut c: Vec<Category> = self.cells.iter().map(|c| c.category).collect();
        c.sort();
        c.dedup();
        c
    }
}
