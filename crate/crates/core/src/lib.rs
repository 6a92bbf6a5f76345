//! Quantum circuit synthesis and exact simulation for random-forest
//! binary-classification prediction.
//!
//! The pipeline: a forest model (balanced binary trees with per-leaf
//! class-0 probabilities) is synthesized into a prediction circuit over
//! the register |anc_mct_rec⟩|X⟩|anc_i⟩|i⟩|anc_j⟩|j⟩|class⟩, lowered to
//! the {single-qubit, CNOT} basis, simulated exactly with a dense
//! statevector engine, and plugged into a QSearch-style amplitude
//! estimation loop. The classical forest oracle is kept alongside so the
//! quantum path can be verified bit-for-bit against it.

pub mod circuit;
pub mod cli;
pub mod decompose;
pub mod forest;
pub mod qae;
pub mod simulator;
pub mod synth;
