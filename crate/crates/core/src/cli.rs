//! Command-line front end.
//!
//! Subcommands: `validate`, `predict`, `estimate`, `count-gates`,
//! `mcx-table`, `synth`. In JSON mode (the default) stdout carries
//! exactly one JSON document per invocation; diagnostics go to stderr.
//! Exit codes: 0 success, 1 validation error, 2 internal invariant
//! violation, 3 estimation cap exceeded.

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;
use std::path::PathBuf;
use std::time::Instant;

use crate::circuit::{Circuit, GateCountReport};
use crate::decompose::{
    lower_mcx_recursion, lower_mcx_ucg, lower_to_basis, LowerOptions, StrategySelect,
};
use crate::forest::{parse_bitstring, parse_forest, predict_proba, ForestModel};
use crate::qae::{estimate_probability, EstimationResult, QaeError, Schedule, DEFAULT_TRIAL_CAP};
use crate::simulator::{SampleResult, Statevector};
use crate::synth::{synthesize_rf_predict, SynthesizedPredictor};

const EXIT_OK: i32 = 0;
const EXIT_VALIDATION: i32 = 1;
const EXIT_INTERNAL: i32 = 2;
const EXIT_CAP: i32 = 3;

/// Classical and simulated probabilities must agree this tightly in
/// every emitted report.
const REPORT_AGREEMENT: f64 = 1e-9;

#[derive(Parser)]
#[command(
    name = "qforest",
    about = "Synthesize, lower, simulate, and estimate random-forest prediction circuits",
    long_about = "Synthesizes a prediction circuit from a forest model (JSON), lowers it to the\n\
                  {single-qubit, CNOT} basis, simulates it exactly, and runs amplitude\n\
                  estimation. Input bitstrings list attribute 0 leftmost. The statevector\n\
                  width guard defaults to 22 qubits; set QFOREST_MAX_QUBITS to override."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyArg {
    Auto,
    Ucg,
    Recursion,
}

impl From<StrategyArg> for StrategySelect {
    fn from(value: StrategyArg) -> Self {
        match value {
            StrategyArg::Auto => StrategySelect::Auto,
            StrategyArg::Ucg => StrategySelect::ForceUcg,
            StrategyArg::Recursion => StrategySelect::ForceRecursion,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ScheduleArg {
    Linear,
    Exponential,
}

impl From<ScheduleArg> for Schedule {
    fn from(value: ScheduleArg) -> Self {
        match value {
            ScheduleArg::Linear => Schedule::Linear,
            ScheduleArg::Exponential => Schedule::Exponential,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Parse and validate a forest model file.
    Validate {
        #[arg(long)]
        forest: PathBuf,
    },
    /// Classical probability, exact simulated marginal, and optional
    /// seeded measurement counts for one input.
    Predict {
        #[arg(long)]
        forest: PathBuf,
        /// Attribute bitstring; leftmost character is attribute 0.
        #[arg(long)]
        input: String,
        #[arg(long)]
        shots: Option<u64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run the amplitude-estimation loop.
    Estimate {
        #[arg(long)]
        forest: PathBuf,
        #[arg(long)]
        input: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = ScheduleArg::Linear)]
        schedule: ScheduleArg,
        /// Independent runs; run r uses seed + r.
        #[arg(long, default_value_t = 1)]
        runs: u64,
    },
    /// Synthesize, lower, and report gate counts.
    CountGates {
        #[arg(long)]
        forest: PathBuf,
        #[arg(long)]
        input: String,
        #[arg(long, value_enum, default_value_t = StrategyArg::Auto)]
        strategy: StrategyArg,
    },
    /// Per-control-count gate costs of the multi-controlled-X
    /// realizations.
    McxTable {
        #[arg(long, default_value_t = 9)]
        max_controls: usize,
        /// Aligned text table instead of JSON.
        #[arg(long)]
        text: bool,
    },
    /// Write the lowered circuit as JSON; gate counts go to stdout.
    Synth {
        #[arg(long)]
        forest: PathBuf,
        #[arg(long)]
        input: String,
        #[arg(long)]
        out: PathBuf,
    },
}

enum CliError {
    Validation(String),
    Internal(String),
    CapExceeded(String),
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => EXIT_VALIDATION,
            CliError::Internal(_) => EXIT_INTERNAL,
            CliError::CapExceeded(_) => EXIT_CAP,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Validation(m) | CliError::Internal(m) | CliError::CapExceeded(m) => m,
        }
    }
}

fn validation<E: std::fmt::Display>(err: E) -> CliError {
    CliError::Validation(err.to_string())
}

fn internal<E: std::fmt::Display>(err: E) -> CliError {
    CliError::Internal(err.to_string())
}

#[derive(Serialize)]
struct RunReport {
    forest: String,
    input: String,
    seed: u64,
    classical_p0: f64,
    simulated_p0: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    samples: Option<SampleResult>,
    gate_counts: GateCountReport,
    duration_ms: f64,
}

#[derive(Serialize)]
struct EstimateReport {
    forest: String,
    input: String,
    seed: u64,
    schedule: String,
    runs: Vec<EstimationResult>,
    mean_q_applications: f64,
}

fn load_forest(path: &PathBuf) -> Result<ForestModel, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Validation(format!("{}: {}", path.display(), e)))?;
    parse_forest(&text).map_err(validation)
}

fn load_predictor(path: &PathBuf, input: &str) -> Result<(SynthesizedPredictor, Vec<u8>), CliError> {
    let forest = load_forest(path)?;
    let bits = parse_bitstring(input, forest.attr_count()).map_err(validation)?;
    let predictor = synthesize_rf_predict(&forest, &bits).map_err(internal)?;
    Ok((predictor, bits))
}

fn simulate(predictor: &SynthesizedPredictor) -> Result<Statevector, CliError> {
    let mut state = Statevector::new(predictor.circuit.width()).map_err(validation)?;
    state.run(&predictor.circuit).map_err(internal)?;
    Ok(state)
}

fn cmd_validate(forest_path: PathBuf) -> Result<(), CliError> {
    let forest = load_forest(&forest_path)?;
    print_json(&json!({
        "valid": true,
        "forest": forest_path.display().to_string(),
        "trees": forest.num_trees(),
        "tree_index_qubits": forest.tree_index_qubits(),
        "height": forest.height(),
        "attr_count": forest.attr_count(),
    }));
    Ok(())
}

fn cmd_predict(
    forest_path: PathBuf,
    input: String,
    shots: Option<u64>,
    seed: u64,
) -> Result<(), CliError> {
    let started = Instant::now();
    let (predictor, bits) = load_predictor(&forest_path, &input)?;
    let classical = predict_proba(&predictor.forest, &bits);
    let state = simulate(&predictor)?;
    let simulated = state.marginal(predictor.layout.class, 0);
    if (classical - simulated).abs() > REPORT_AGREEMENT {
        return Err(CliError::Internal(format!(
            "classical/simulated probability mismatch: {classical} vs {simulated}"
        )));
    }
    let samples = match shots {
        Some(n) => Some(
            state
                .sample(&[predictor.layout.class], n, seed)
                .map_err(validation)?,
        ),
        None => None,
    };
    let lowered = lower_to_basis(&predictor.circuit, &LowerOptions::default()).map_err(internal)?;
    let report = RunReport {
        forest: forest_path.display().to_string(),
        input,
        seed,
        classical_p0: classical,
        simulated_p0: simulated,
        samples,
        gate_counts: lowered.count_gates(),
        duration_ms: started.elapsed().as_secs_f64() * 1e3,
    };
    print_json(&report);
    Ok(())
}

fn cmd_estimate(
    forest_path: PathBuf,
    input: String,
    seed: u64,
    schedule: ScheduleArg,
    runs: u64,
) -> Result<(), CliError> {
    let (predictor, _) = load_predictor(&forest_path, &input)?;
    let mut results = Vec::new();
    for run in 0..runs.max(1) {
        let result = estimate_probability(
            &predictor,
            seed.wrapping_add(run),
            schedule.into(),
            DEFAULT_TRIAL_CAP,
        )
        .map_err(|e| match e {
            QaeError::CapExceeded { .. } => CliError::CapExceeded(e.to_string()),
            other => internal(other),
        })?;
        results.push(result);
    }
    let mean = results
        .iter()
        .map(|r| r.trial_log.iter().map(|t| t.k).sum::<u64>() as f64)
        .sum::<f64>()
        / results.len() as f64;
    print_json(&EstimateReport {
        forest: forest_path.display().to_string(),
        input,
        seed,
        schedule: match schedule {
            ScheduleArg::Linear => "linear".into(),
            ScheduleArg::Exponential => "exponential".into(),
        },
        runs: results,
        mean_q_applications: mean,
    });
    Ok(())
}

fn cmd_count_gates(
    forest_path: PathBuf,
    input: String,
    strategy: StrategyArg,
) -> Result<(), CliError> {
    let (predictor, _) = load_predictor(&forest_path, &input)?;
    let options = LowerOptions {
        strategy: strategy.into(),
        ancilla: Some(predictor.layout.anc_mct_rec),
    };
    let lowered = lower_to_basis(&predictor.circuit, &options).map_err(internal)?;
    print_json(&json!({
        "forest": forest_path.display().to_string(),
        "input": input,
        "width": lowered.width(),
        "gate_counts": lowered.count_gates(),
    }));
    Ok(())
}

#[derive(Serialize)]
struct McxRow {
    controls: usize,
    ucg_u: u64,
    ucg_cx: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    recursion_u: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    recursion_cx: Option<u64>,
}

fn mcx_rows(max_controls: usize) -> Result<Vec<McxRow>, CliError> {
    let mut rows = Vec::new();
    for k in 2..=max_controls {
        let controls: Vec<usize> = (0..k).collect();
        let mut ucg = Circuit::new(k + 2);
        ucg.extend(lower_mcx_ucg(&controls, k).map_err(internal)?)
            .map_err(internal)?;
        let ucg_report = ucg.count_gates();
        let (recursion_u, recursion_cx) = if k >= 3 {
            let mut rec = Circuit::new(k + 2);
            rec.extend(lower_mcx_recursion(&controls, k, k + 1).map_err(internal)?)
                .map_err(internal)?;
            let report = rec.count_gates();
            (Some(report.u_count), Some(report.cx_count))
        } else {
            (None, None)
        };
        rows.push(McxRow {
            controls: k,
            ucg_u: ucg_report.u_count,
            ucg_cx: ucg_report.cx_count,
            recursion_u,
            recursion_cx,
        });
    }
    Ok(rows)
}

fn cmd_mcx_table(max_controls: usize, text: bool) -> Result<(), CliError> {
    if !(2..=9).contains(&max_controls) {
        return Err(CliError::Validation(format!(
            "max_controls must be between 2 and 9, got {max_controls}"
        )));
    }
    let rows = mcx_rows(max_controls)?;
    if text {
        println!("{:>9}  {:>7} {:>7}  {:>11} {:>11}", "controls", "ucg U", "ucg CX", "recursion U", "recursion CX");
        for row in &rows {
            let (ru, rcx) = match (row.recursion_u, row.recursion_cx) {
                (Some(u), Some(cx)) => (u.to_string(), cx.to_string()),
                _ => ("-".into(), "-".into()),
            };
            println!(
                "{:>9}  {:>7} {:>7}  {:>11} {:>11}",
                row.controls, row.ucg_u, row.ucg_cx, ru, rcx
            );
        }
    } else {
        print_json(&json!({ "rows": rows }));
    }
    Ok(())
}

fn cmd_synth(forest_path: PathBuf, input: String, out: PathBuf) -> Result<(), CliError> {
    let (predictor, _) = load_predictor(&forest_path, &input)?;
    let lowered = lower_to_basis(&predictor.circuit, &LowerOptions::default()).map_err(internal)?;
    std::fs::write(&out, lowered.to_json())
        .map_err(|e| CliError::Validation(format!("{}: {}", out.display(), e)))?;
    print_json(&json!({
        "forest": forest_path.display().to_string(),
        "input": input,
        "out": out.display().to_string(),
        "gate_counts": lowered.count_gates(),
    }));
    Ok(())
}

fn print_json<T: Serialize>(value: &T) {
    println!(
        "{}",
        serde_json::to_string_pretty(value).expect("report serialization cannot fail")
    );
}

/// Parse arguments from the environment, run, and return the exit code.
pub fn run() -> i32 {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Validate { forest } => cmd_validate(forest),
        Command::Predict { forest, input, shots, seed } => cmd_predict(forest, input, shots, seed),
        Command::Estimate { forest, input, seed, schedule, runs } => {
            cmd_estimate(forest, input, seed, schedule, runs)
        }
        Command::CountGates { forest, input, strategy } => {
            cmd_count_gates(forest, input, strategy)
        }
        Command::McxTable { max_controls, text } => cmd_mcx_table(max_controls, text),
        Command::Synth { forest, input, out } => cmd_synth(forest, input, out),
    };
    match outcome {
        Ok(()) => EXIT_OK,
        Err(err) => {
            eprintln!("error: {}", err.message());
            err.exit_code()
        }
    }
}
