#[path = "support/gradprobes.rs"]
mod gradprobes;

use gradprobes::{attention_block, bilstm_layer, lstm_cell, mini_transformer, SEEDS, TOLERANCE};

fn check(name: &str, probe: fn(u64) -> edtweetlab_core::Result<f64>) {
    for seed in SEEDS {
        let err = probe(seed).unwrap();
        assert!(err < TOLERANCE, "{name} seed {seed}: relative error {err:e}");
    }
}

#[test]
fn lstm_cell_gradients() {
    check("lstm cell", lstm_cell);
}

#[test]
fn bilstm_gradients() {
    check("bilstm", bilstm_layer);
}

#[test]
fn attention_gradients() {
    check("attention", attention_block);
}

#[test]
fn transformer_gradients() {
    check("transformer", mini_transformer);
}
