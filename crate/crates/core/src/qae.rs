//! QSearch-style amplitude estimation over the synthesized predictor.
//!
//! One amplification step is Q = A·S₀·A⁻¹·S_χ, where A is the prediction
//! circuit, S₀ reflects about the all-zeros state of the working
//! registers and S_χ about the class-0 subspace. The estimation loop
//! runs trials k = 0, 1, 2, …: prepare A|0⟩ afresh, apply Q exactly k
//! times, sample the class qubit once; the first class-0 outcome stops
//! the loop and k converts to the probability estimate (sin(π/4k))²
//! (1 for k = 0). The estimator's range is discrete by construction.
//!
//! The classic exponential Grover schedule is available as an
//! alternative: trial r draws its power uniformly below a bound that
//! grows geometrically. The linear schedule is the default.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::f64::consts::PI;

use crate::circuit::{Circuit, CircuitError};
use crate::forest::{ForestError, ForestModel, TreeModel};
use crate::simulator::{SimError, Statevector};
use crate::synth::{synthesize_reflections, synthesize_rf_predict, SynthError, SynthesizedPredictor};

pub const DEFAULT_TRIAL_CAP: usize = 64;

const EXPONENTIAL_GROWTH: f64 = 1.2;

#[derive(Debug, thiserror::Error)]
pub enum QaeError {
    #[error("no class-0 outcome within {cap} trials; the class-0 probability may be (near) zero")]
    CapExceeded { cap: usize },
    #[error(transparent)]
    Circuit(#[from] CircuitError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Forest(#[from] ForestError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Schedule {
    #[default]
    Linear,
    Exponential,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrialRecord {
    /// Number of Q applications in this trial.
    pub k: u64,
    /// Simulated class measurement: 0 stops the loop.
    pub measured: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimationResult {
    /// Q applications at the successful trial.
    pub k: u64,
    /// 1 when k = 0, (sin(π/4k))² otherwise.
    pub estimate: f64,
    pub trial_log: Vec<TrialRecord>,
    pub seed: u64,
}

/// Discrete probability estimate from the successful trial count.
pub fn estimate_from_count(k: u64) -> f64 {
    if k == 0 {
        1.0
    } else {
        (PI / (4.0 * k as f64)).sin().powi(2)
    }
}

/// One amplification step: S_χ, then the inverse prediction circuit,
/// then S₀, then the prediction circuit.
pub fn build_q(predictor: &SynthesizedPredictor) -> Result<Circuit, QaeError> {
    let (s0, s_chi) = synthesize_reflections(&predictor.layout);
    let mut q = Circuit::new(predictor.circuit.width());
    q.layout = predictor.circuit.layout.clone();
    q.extend(s_chi.gates().to_vec())?;
    q.extend(predictor.circuit.inverse().gates().to_vec())?;
    q.extend(s0.gates().to_vec())?;
    q.extend(predictor.circuit.gates().to_vec())?;
    Ok(q)
}

/// Run the estimation loop. The seed fully determines the trial log;
/// measurement is simulated by one seeded Bernoulli draw against the
/// exact class marginal per trial (the post-measurement state is
/// discarded either way). Errors out after `trial_cap` trials.
pub fn estimate_probability(
    predictor: &SynthesizedPredictor,
    seed: u64,
    schedule: Schedule,
    trial_cap: usize,
) -> Result<EstimationResult, QaeError> {
    let q = build_q(predictor)?;
    let class = predictor.layout.class;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut trial_log = Vec::new();
    let mut bound = 1.0f64;
    for trial in 0..trial_cap {
        let k = match schedule {
            Schedule::Linear => trial as u64,
            Schedule::Exponential => {
                let limit = (bound.ceil() as u64).max(1);
                let k = rng.gen_range(0..limit);
                bound *= EXPONENTIAL_GROWTH;
                k
            }
        };
        let mut state = Statevector::new(predictor.circuit.width())?;
        state.run(&predictor.circuit)?;
        for _ in 0..k {
            state.run(&q)?;
        }
        let p0 = state.marginal(class, 0);
        let measured = if rng.gen::<f64>() < p0 { 0u8 } else { 1u8 };
        trial_log.push(TrialRecord { k, measured });
        if measured == 0 {
            return Ok(EstimationResult {
                k,
                estimate: estimate_from_count(k),
                trial_log,
                seed,
            });
        }
    }
    Err(QaeError::CapExceeded { cap: trial_cap })
}

/// Monte-Carlo mean of the total Q applications per run (summed over a
/// run's trials) on a constant-probability single-tree fixture, across
/// seeded runs of [`estimate_probability`].
pub fn expected_iterations_check(p: f64, runs: u64, seed: u64) -> Result<f64, QaeError> {
    let forest = ForestModel::new(
        1,
        vec![TreeModel {
            height: 2,
            attr_index: vec![0],
            leaf_prob: vec![p, p],
        }],
    )?;
    let predictor = synthesize_rf_predict(&forest, &[0])?;
    let mut total = 0u64;
    for run in 0..runs {
        let result = estimate_probability(
            &predictor,
            seed.wrapping_add(run),
            Schedule::Linear,
            DEFAULT_TRIAL_CAP,
        )?;
        total += result.trial_log.iter().map(|t| t.k).sum::<u64>();
    }
    Ok(total as f64 / runs as f64)
}
