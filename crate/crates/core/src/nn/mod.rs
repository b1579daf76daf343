//! Dense tensors, reverse-mode differentiation and the layers used by the
//! neural classifiers.

pub mod adam;
pub mod gradcheck;
pub mod layers;
pub mod params;
pub mod tape;
pub mod tensor;

pub use adam::AdamState;
pub use gradcheck::{gradient_check, relative_error, Differentiable};
pub use layers::{attention_forward, bilstm_forward, lstm_cell_forward, LstmCellParams};
pub use params::ParamSet;
pub use tape::{bce_loss, Gradients, Tape, Var};
pub use tensor::Tensor;
