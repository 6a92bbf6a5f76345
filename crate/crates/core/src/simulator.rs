//! Dense statevector engine.
//!
//! A `Statevector` holds all 2^L complex amplitudes in double precision
//! with little-endian basis indexing: qubit `q` is bit `q` of the basis
//! index. Gate application is exact where the gate is a permutation or a
//! diagonal (X, CNOT, Z, CZ, MCX, MCZ move or negate amplitudes without
//! arithmetic on them), and single-rotation accurate elsewhere, so a
//! circuit of N rotations accumulates error of order N·ε.
//!
//! The composite gates are simulated directly — MCX, MCZ, Swap and the
//! multiplexed rotation by their ideal unitaries, the relative-phase
//! three-controlled NOT by its canonical basis sequence — so that
//! composite-level and lowered circuits can be cross-checked against each
//! other and inverses cancel exactly at either level.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::collections::BTreeMap;
use std::f64::consts::FRAC_1_SQRT_2;

use crate::circuit::{Circuit, Gate};

/// Hard ceiling for `unitary_of`, which materializes 4^L complex numbers.
pub const UNITARY_WIDTH_LIMIT: usize = 12;

/// Default statevector width guard; override with `QFOREST_MAX_QUBITS`.
pub const DEFAULT_MAX_QUBITS: usize = 22;

pub fn max_qubits() -> usize {
    std::env::var("QFOREST_MAX_QUBITS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .unwrap_or(DEFAULT_MAX_QUBITS)
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum SimError {
    #[error("statevector width {width} exceeds the guard of {max} qubits (set QFOREST_MAX_QUBITS to raise it)")]
    WidthExceeded { width: usize, max: usize },
    #[error("gate {kind} references qubit {qubit} but state width is {width}")]
    QubitOutOfRange {
        kind: &'static str,
        qubit: usize,
        width: usize,
    },
    #[error("circuit width {circuit} does not match state width {state}")]
    WidthMismatch { circuit: usize, state: usize },
    #[error("unitary extraction limited to {limit} qubits, circuit has {width}")]
    UnitaryTooWide { width: usize, limit: usize },
    #[error("sampling requires at least one qubit and one shot")]
    EmptySample,
}

/// Measurement counts for a run of shots over a qubit subset. Outcome
/// keys are bitstrings with the first listed qubit leftmost.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleResult {
    pub counts: BTreeMap<String, u64>,
    pub shots: u64,
    pub seed: u64,
}

impl SampleResult {
    pub fn count_of(&self, outcome: &str) -> u64 {
        self.counts.get(outcome).copied().unwrap_or(0)
    }
}

#[derive(Debug, Clone)]
pub struct Statevector {
    width: usize,
    amps: Vec<Complex64>,
}

impl Statevector {
    /// All-zeros state |0...0⟩ on `width` qubits.
    pub fn new(width: usize) -> Result<Self, SimError> {
        let max = max_qubits();
        if width > max {
            return Err(SimError::WidthExceeded { width, max });
        }
        let mut amps = vec![Complex64::new(0.0, 0.0); 1usize << width];
        amps[0] = Complex64::new(1.0, 0.0);
        Ok(Statevector { width, amps })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    fn check_qubit(&self, kind: &'static str, qubit: usize) -> Result<(), SimError> {
        if qubit >= self.width {
            Err(SimError::QubitOutOfRange {
                kind,
                qubit,
                width: self.width,
            })
        } else {
            Ok(())
        }
    }

    /// Apply one gate in place.
    pub fn apply(&mut self, gate: &Gate) -> Result<(), SimError> {
        for q in gate.qubits() {
            self.check_qubit(gate.kind_name(), q)?;
        }
        match gate {
            Gate::PauliX { target } => {
                let mask = 1usize << target;
                for i in 0..self.amps.len() {
                    if i & mask == 0 {
                        self.amps.swap(i, i | mask);
                    }
                }
            }
            Gate::Hadamard { target } => {
                let mask = 1usize << target;
                let s = FRAC_1_SQRT_2;
                for i in 0..self.amps.len() {
                    if i & mask == 0 {
                        let a = self.amps[i];
                        let b = self.amps[i | mask];
                        self.amps[i] = (a + b) * s;
                        self.amps[i | mask] = (a - b) * s;
                    }
                }
            }
            Gate::PauliZ { target } => {
                let mask = 1usize << target;
                for i in 0..self.amps.len() {
                    if i & mask != 0 {
                        self.amps[i] = -self.amps[i];
                    }
                }
            }
            Gate::RotY { target, angle } => {
                let mask = 1usize << target;
                let c = (angle / 2.0).cos();
                let s = (angle / 2.0).sin();
                for i in 0..self.amps.len() {
                    if i & mask == 0 {
                        let a = self.amps[i];
                        let b = self.amps[i | mask];
                        self.amps[i] = a * c - b * s;
                        self.amps[i | mask] = a * s + b * c;
                    }
                }
            }
            Gate::RotZ { target, angle } => {
                let mask = 1usize << target;
                let half = angle / 2.0;
                let lo = Complex64::from_polar(1.0, -half);
                let hi = Complex64::from_polar(1.0, half);
                for i in 0..self.amps.len() {
                    let phase = if i & mask == 0 { lo } else { hi };
                    self.amps[i] *= phase;
                }
            }
            Gate::Cnot { control, target } => {
                let c = 1usize << control;
                let t = 1usize << target;
                for i in 0..self.amps.len() {
                    if i & c != 0 && i & t == 0 {
                        self.amps.swap(i, i | t);
                    }
                }
            }
            Gate::Cz { a, b } => {
                let m = (1usize << a) | (1usize << b);
                for i in 0..self.amps.len() {
                    if i & m == m {
                        self.amps[i] = -self.amps[i];
                    }
                }
            }
            Gate::Swap { a, b } => {
                let ma = 1usize << a;
                let mb = 1usize << b;
                for i in 0..self.amps.len() {
                    if i & ma != 0 && i & mb == 0 {
                        self.amps.swap(i, i ^ ma ^ mb);
                    }
                }
            }
            Gate::Mcx { controls, target } => {
                let cm: usize = controls.iter().map(|&q| 1usize << q).sum();
                let t = 1usize << target;
                for i in 0..self.amps.len() {
                    if i & cm == cm && i & t == 0 {
                        self.amps.swap(i, i | t);
                    }
                }
            }
            Gate::Mcz { qubits } => {
                let m: usize = qubits.iter().map(|&q| 1usize << q).sum();
                for i in 0..self.amps.len() {
                    if i & m == m {
                        self.amps[i] = -self.amps[i];
                    }
                }
            }
            Gate::Rc3x { controls, target } => {
                for g in crate::circuit::rc3x_basis_sequence(*controls, *target, false) {
                    self.apply(&g)?;
                }
            }
            Gate::UcgRotY { selects, target, angles } => {
                let t = 1usize << target;
                let cos: Vec<f64> = angles.iter().map(|a| (a / 2.0).cos()).collect();
                let sin: Vec<f64> = angles.iter().map(|a| (a / 2.0).sin()).collect();
                for i in 0..self.amps.len() {
                    if i & t == 0 {
                        let mut s = 0usize;
                        for (bit, &q) in selects.iter().enumerate() {
                            if i & (1usize << q) != 0 {
                                s |= 1 << bit;
                            }
                        }
                        let a = self.amps[i];
                        let b = self.amps[i | t];
                        self.amps[i] = a * cos[s] - b * sin[s];
                        self.amps[i | t] = a * sin[s] + b * cos[s];
                    }
                }
            }
        }
        Ok(())
    }

    /// Apply a whole circuit in gate order.
    pub fn run(&mut self, circuit: &Circuit) -> Result<(), SimError> {
        if circuit.width() != self.width {
            return Err(SimError::WidthMismatch {
                circuit: circuit.width(),
                state: self.width,
            });
        }
        for gate in circuit.gates() {
            self.apply(gate)?;
        }
        Ok(())
    }

    /// Probability that `qubit` measures `value`.
    pub fn marginal(&self, qubit: usize, value: u8) -> f64 {
        let mask = 1usize << qubit;
        let want = if value == 0 { 0 } else { mask };
        self.amps
            .iter()
            .enumerate()
            .filter(|(i, _)| i & mask == want)
            .map(|(_, a)| a.norm_sqr())
            .sum()
    }

    /// Seeded measurement sampling of a qubit subset: `shots` independent
    /// draws from the exact joint distribution. The seed fully determines
    /// the result.
    pub fn sample(&self, qubits: &[usize], shots: u64, seed: u64) -> Result<SampleResult, SimError> {
        if qubits.is_empty() || shots == 0 {
            return Err(SimError::EmptySample);
        }
        for &q in qubits {
            self.check_qubit("sample", q)?;
        }
        let buckets = 1usize << qubits.len();
        let mut dist = vec![0.0f64; buckets];
        for (i, amp) in self.amps.iter().enumerate() {
            let mut outcome = 0usize;
            for (pos, &q) in qubits.iter().enumerate() {
                if i & (1usize << q) != 0 {
                    outcome |= 1 << pos;
                }
            }
            dist[outcome] += amp.norm_sqr();
        }
        let mut cumulative = dist.clone();
        for i in 1..buckets {
            cumulative[i] += cumulative[i - 1];
        }
        let total = cumulative[buckets - 1];

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut tallies = vec![0u64; buckets];
        for _ in 0..shots {
            let r: f64 = rng.gen::<f64>() * total;
            let idx = cumulative.partition_point(|&c| c < r).min(buckets - 1);
            tallies[idx] += 1;
        }

        let mut counts = BTreeMap::new();
        for (outcome, &n) in tallies.iter().enumerate() {
            if n > 0 {
                let label: String = (0..qubits.len())
                    .map(|pos| if outcome & (1 << pos) != 0 { '1' } else { '0' })
                    .collect();
                counts.insert(label, n);
            }
        }
        Ok(SampleResult { counts, shots, seed })
    }
}

/// Brute-force unitary of a circuit: column `c` is the result of running
/// the circuit on basis state `c`. Returned as `matrix[row][col]`.
pub fn unitary_of(circuit: &Circuit) -> Result<Vec<Vec<Complex64>>, SimError> {
    let width = circuit.width();
    if width > UNITARY_WIDTH_LIMIT {
        return Err(SimError::UnitaryTooWide {
            width,
            limit: UNITARY_WIDTH_LIMIT,
        });
    }
    let dim = 1usize << width;
    let mut matrix = vec![vec![Complex64::new(0.0, 0.0); dim]; dim];
    for col in 0..dim {
        let mut state = Statevector::new(width)?;
        state.amps[0] = Complex64::new(0.0, 0.0);
        state.amps[col] = Complex64::new(1.0, 0.0);
        state.run(circuit)?;
        for (row, amp) in state.amps.iter().enumerate() {
            matrix[row][col] = *amp;
        }
    }
    Ok(matrix)
}

/// Max elementwise |difference| of two equally sized square matrices.
pub fn max_deviation(a: &[Vec<Complex64>], b: &[Vec<Complex64>]) -> f64 {
    let mut worst = 0.0f64;
    for (ra, rb) in a.iter().zip(b) {
        for (x, y) in ra.iter().zip(rb) {
            worst = worst.max((x - y).norm());
        }
    }
    worst
}

/// Divide a matrix by its first entry of largest modulus so that two
/// matrices equal up to global phase compare equal.
pub fn align_global_phase(m: &[Vec<Complex64>]) -> Vec<Vec<Complex64>> {
    let mut best = Complex64::new(1.0, 0.0);
    let mut best_norm = 0.0f64;
    for row in m {
        for &e in row {
            if e.norm() > best_norm + 1e-12 {
                best_norm = e.norm();
                best = e;
            }
        }
    }
    let phase = best / best.norm();
    m.iter()
        .map(|row| row.iter().map(|&e| e / phase).collect())
        .collect()
}

/// The ideal k-controlled-X unitary on `k + 1` qubits (controls first,
/// target last in the little-endian bit order), for brute-force checks.
pub fn mcx_matrix(k: usize) -> Vec<Vec<Complex64>> {
    let dim = 1usize << (k + 1);
    let all_controls = dim - 1 - (1 << k);
    let mut m = vec![vec![Complex64::new(0.0, 0.0); dim]; dim];
    for col in 0..dim {
        let row = if col & all_controls == all_controls {
            col ^ (1 << k)
        } else {
            col
        };
        m[row][col] = Complex64::new(1.0, 0.0);
    }
    m
}
