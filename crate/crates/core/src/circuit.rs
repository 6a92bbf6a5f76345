//! Gate and circuit representation at two levels.
//!
//! Synthesis emits composite gates (multi-controlled X/Z, multiplexed
//! rotations, the relative-phase three-controlled NOT) that read well and
//! simulate directly; a separate lowering pass rewrites them into the
//! basis set of single-qubit gates plus CNOT. Circuits are value-like:
//! built once, then immutable and freely shareable.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::f64::consts::FRAC_PI_4;

use crate::synth::RegisterLayout;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum CircuitError {
    #[error("gate {kind} references qubit {qubit} but circuit width is {width}")]
    QubitOutOfRange {
        kind: &'static str,
        qubit: usize,
        width: usize,
    },
    #[error("gate {kind} uses qubit {qubit} more than once")]
    DuplicateQubit { kind: &'static str, qubit: usize },
    #[error("ucg_ry with {selects} select qubits needs {expected} angles, got {got}")]
    AngleCount {
        selects: usize,
        expected: usize,
        got: usize,
    },
    #[error("multi-controlled gate needs at least one control")]
    MissingControls,
    #[error("circuit JSON: {0}")]
    Json(String),
    #[error("unknown gate kind \"{0}\"")]
    UnknownKind(String),
}

/// One gate. Multi-qubit composites carry their qubit lists with the
/// target last; `UcgRotY` applies `RotY(angles[s])` to the target where
/// `s` is the integer read from the select qubits (`selects[0]` is bit 0).
#[derive(Debug, Clone, PartialEq)]
pub enum Gate {
    PauliX { target: usize },
    Hadamard { target: usize },
    PauliZ { target: usize },
    RotY { target: usize, angle: f64 },
    RotZ { target: usize, angle: f64 },
    Cnot { control: usize, target: usize },
    Cz { a: usize, b: usize },
    Swap { a: usize, b: usize },
    Mcx { controls: Vec<usize>, target: usize },
    Mcz { qubits: Vec<usize> },
    Rc3x { controls: [usize; 3], target: usize },
    UcgRotY { selects: Vec<usize>, target: usize, angles: Vec<f64> },
}

impl Gate {
    pub fn kind_name(&self) -> &'static str {
        match self {
            Gate::PauliX { .. } => "x",
            Gate::Hadamard { .. } => "h",
            Gate::PauliZ { .. } => "z",
            Gate::RotY { .. } => "ry",
            Gate::RotZ { .. } => "rz",
            Gate::Cnot { .. } => "cx",
            Gate::Cz { .. } => "cz",
            Gate::Swap { .. } => "swap",
            Gate::Mcx { .. } => "mcx",
            Gate::Mcz { .. } => "mcz",
            Gate::Rc3x { .. } => "rc3x",
            Gate::UcgRotY { .. } => "ucg_ry",
        }
    }

    /// All qubit indexes the gate touches, target last.
    pub fn qubits(&self) -> Vec<usize> {
        match self {
            Gate::PauliX { target }
            | Gate::Hadamard { target }
            | Gate::PauliZ { target }
            | Gate::RotY { target, .. }
            | Gate::RotZ { target, .. } => vec![*target],
            Gate::Cnot { control, target } => vec![*control, *target],
            Gate::Cz { a, b } | Gate::Swap { a, b } => vec![*a, *b],
            Gate::Mcx { controls, target } => {
                let mut q = controls.clone();
                q.push(*target);
                q
            }
            Gate::Mcz { qubits } => qubits.clone(),
            Gate::Rc3x { controls, target } => {
                vec![controls[0], controls[1], controls[2], *target]
            }
            Gate::UcgRotY { selects, target, .. } => {
                let mut q = selects.clone();
                q.push(*target);
                q
            }
        }
    }

    /// True for the gates allowed in a basis-level circuit.
    pub fn is_basis(&self) -> bool {
        matches!(
            self,
            Gate::PauliX { .. }
                | Gate::Hadamard { .. }
                | Gate::PauliZ { .. }
                | Gate::RotY { .. }
                | Gate::RotZ { .. }
                | Gate::Cnot { .. }
        )
    }

    pub fn is_single_qubit(&self) -> bool {
        matches!(
            self,
            Gate::PauliX { .. }
                | Gate::Hadamard { .. }
                | Gate::PauliZ { .. }
                | Gate::RotY { .. }
                | Gate::RotZ { .. }
        )
    }

    fn validate(&self, width: usize) -> Result<(), CircuitError> {
        let kind = self.kind_name();
        let qubits = self.qubits();
        if qubits.is_empty() {
            return Err(CircuitError::MissingControls);
        }
        let mut seen = vec![false; width];
        for &q in &qubits {
            if q >= width {
                return Err(CircuitError::QubitOutOfRange {
                    kind,
                    qubit: q,
                    width,
                });
            }
            if seen[q] {
                return Err(CircuitError::DuplicateQubit { kind, qubit: q });
            }
            seen[q] = true;
        }
        match self {
            Gate::Mcx { controls, .. } => {
                if controls.is_empty() {
                    return Err(CircuitError::MissingControls);
                }
            }
            Gate::Mcz { qubits } => {
                if qubits.len() < 2 {
                    return Err(CircuitError::MissingControls);
                }
            }
            Gate::UcgRotY { selects, angles, .. } => {
                let expected = 1usize << selects.len();
                if angles.len() != expected {
                    return Err(CircuitError::AngleCount {
                        selects: selects.len(),
                        expected,
                        got: angles.len(),
                    });
                }
            }
            _ => {}
        }
        Ok(())
    }

    /// The gate's inverse when it is representable as a single gate.
    /// `Rc3x` has no single-gate inverse; callers expand it instead.
    fn single_gate_inverse(&self) -> Option<Gate> {
        match self {
            Gate::RotY { target, angle } => Some(Gate::RotY {
                target: *target,
                angle: -angle,
            }),
            Gate::RotZ { target, angle } => Some(Gate::RotZ {
                target: *target,
                angle: -angle,
            }),
            Gate::UcgRotY { selects, target, angles } => Some(Gate::UcgRotY {
                selects: selects.clone(),
                target: *target,
                angles: angles.iter().map(|a| -a).collect(),
            }),
            Gate::Rc3x { .. } => None,
            other => Some(other.clone()),
        }
    }
}

/// The canonical basis realization of the relative-phase three-controlled
/// NOT: 12 single-qubit gates and 6 CNOTs. Equal to CCCX up to a diagonal
/// of unit-modulus phases; the phases are undone exactly by the
/// `inverted` form, which is the adjoint sequence.
///
/// This sequence is also what the simulator applies for a composite
/// `Rc3x`, so composite and lowered circuits agree amplitude-for-amplitude.
pub(crate) fn rc3x_basis_sequence(
    controls: [usize; 3],
    target: usize,
    inverted: bool,
) -> Vec<Gate> {
    let [c0, c1, c2] = controls;
    let t = target;
    let h = |v: &mut Vec<Gate>| v.push(Gate::Hadamard { target: t });
    let rz = |v: &mut Vec<Gate>, angle: f64| v.push(Gate::RotZ { target: t, angle });
    let cx = |v: &mut Vec<Gate>, control: usize| {
        v.push(Gate::Cnot { control, target: t })
    };

    let mut seq = Vec::with_capacity(18);
    h(&mut seq);
    rz(&mut seq, FRAC_PI_4);
    cx(&mut seq, c2);
    rz(&mut seq, -FRAC_PI_4);
    h(&mut seq);
    cx(&mut seq, c0);
    rz(&mut seq, FRAC_PI_4);
    cx(&mut seq, c1);
    rz(&mut seq, -FRAC_PI_4);
    cx(&mut seq, c0);
    rz(&mut seq, FRAC_PI_4);
    cx(&mut seq, c1);
    rz(&mut seq, -FRAC_PI_4);
    h(&mut seq);
    rz(&mut seq, FRAC_PI_4);
    cx(&mut seq, c2);
    rz(&mut seq, -FRAC_PI_4);
    h(&mut seq);

    if inverted {
        seq.reverse();
        for g in &mut seq {
            if let Gate::RotZ { angle, .. } = g {
                *angle = -*angle;
            }
        }
    }
    seq
}

/// An ordered gate sequence over a fixed-width register.
#[derive(Debug, Clone, PartialEq)]
pub struct Circuit {
    width: usize,
    gates: Vec<Gate>,
    pub layout: Option<RegisterLayout>,
}

impl Circuit {
    pub fn new(width: usize) -> Self {
        Circuit {
            width,
            gates: Vec::new(),
            layout: None,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn len(&self) -> usize {
        self.gates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }

    pub fn append(&mut self, gate: Gate) -> Result<(), CircuitError> {
        gate.validate(self.width)?;
        self.gates.push(gate);
        Ok(())
    }

    pub fn extend(&mut self, gates: impl IntoIterator<Item = Gate>) -> Result<(), CircuitError> {
        for g in gates {
            self.append(g)?;
        }
        Ok(())
    }

    pub fn is_basis_level(&self) -> bool {
        self.gates.iter().all(Gate::is_basis)
    }

    /// Gate-reversed inverse. Self-inverse kinds stay as they are,
    /// rotation angles are negated, and `Rc3x` is replaced by the explicit
    /// adjoint of its basis sequence so its relative phases are undone
    /// exactly.
    pub fn inverse(&self) -> Circuit {
        let mut out = Circuit::new(self.width);
        out.layout = self.layout.clone();
        for gate in self.gates.iter().rev() {
            match gate.single_gate_inverse() {
                Some(inv) => out.gates.push(inv),
                None => {
                    if let Gate::Rc3x { controls, target } = gate {
                        out.gates
                            .extend(rc3x_basis_sequence(*controls, *target, true));
                    }
                }
            }
        }
        out
    }

    pub fn count_gates(&self) -> GateCountReport {
        let mut counts: BTreeMap<String, u64> = BTreeMap::new();
        let mut u_count = 0u64;
        let mut cx_count = 0u64;
        let mut qubit_depth = vec![0u64; self.width];
        for gate in &self.gates {
            *counts.entry(gate.kind_name().to_string()).or_insert(0) += 1;
            if gate.is_single_qubit() {
                u_count += 1;
            }
            if matches!(gate, Gate::Cnot { .. }) {
                cx_count += 1;
            }
            let qubits = gate.qubits();
            let level = qubits.iter().map(|&q| qubit_depth[q]).max().unwrap_or(0) + 1;
            for &q in &qubits {
                qubit_depth[q] = level;
            }
        }
        GateCountReport {
            width: self.width,
            total: self.gates.len() as u64,
            u_count,
            cx_count,
            depth: qubit_depth.into_iter().max().unwrap_or(0),
            counts,
        }
    }

    pub fn to_json(&self) -> String {
        let doc = CircuitDoc {
            width: self.width,
            gates: self.gates.iter().map(GateRecord::from_gate).collect(),
        };
        serde_json::to_string_pretty(&doc).expect("circuit serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Circuit, CircuitError> {
        let doc: CircuitDoc =
            serde_json::from_str(text).map_err(|e| CircuitError::Json(e.to_string()))?;
        let mut c = Circuit::new(doc.width);
        for record in doc.gates {
            c.append(record.into_gate()?)?;
        }
        Ok(c)
    }
}

/// Per-kind gate tallies for a circuit. `u_count` covers all single-qubit
/// gates, `cx_count` the CNOTs; for a basis-level circuit the two sum to
/// the total gate count.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct GateCountReport {
    pub width: usize,
    pub total: u64,
    pub u_count: u64,
    pub cx_count: u64,
    pub depth: u64,
    pub counts: BTreeMap<String, u64>,
}

#[derive(Serialize, Deserialize)]
struct CircuitDoc {
    width: usize,
    gates: Vec<GateRecord>,
}

#[derive(Serialize, Deserialize)]
struct GateRecord {
    kind: String,
    qubits: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    angle: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    angles: Option<Vec<f64>>,
}

impl GateRecord {
    fn from_gate(gate: &Gate) -> GateRecord {
        let (angle, angles) = match gate {
            Gate::RotY { angle, .. } | Gate::RotZ { angle, .. } => (Some(*angle), None),
            Gate::UcgRotY { angles, .. } => (None, Some(angles.clone())),
            _ => (None, None),
        };
        GateRecord {
            kind: gate.kind_name().to_string(),
            qubits: gate.qubits(),
            angle,
            angles,
        }
    }

    fn into_gate(self) -> Result<Gate, CircuitError> {
        let bad = |msg: &str| CircuitError::Json(format!("gate \"{}\": {}", self.kind, msg));
        let need = |n: usize, q: &[usize]| -> Result<(), CircuitError> {
            if q.len() != n {
                Err(CircuitError::Json(format!(
                    "gate \"{}\": expected {} qubits, got {}",
                    self.kind,
                    n,
                    q.len()
                )))
            } else {
                Ok(())
            }
        };
        let q = &self.qubits;
        match self.kind.as_str() {
            "x" => {
                need(1, q)?;
                Ok(Gate::PauliX { target: q[0] })
            }
            "h" => {
                need(1, q)?;
                Ok(Gate::Hadamard { target: q[0] })
            }
            "z" => {
                need(1, q)?;
                Ok(Gate::PauliZ { target: q[0] })
            }
            "ry" => {
                need(1, q)?;
                Ok(Gate::RotY {
                    target: q[0],
                    angle: self.angle.ok_or_else(|| bad("missing angle"))?,
                })
            }
            "rz" => {
                need(1, q)?;
                Ok(Gate::RotZ {
                    target: q[0],
                    angle: self.angle.ok_or_else(|| bad("missing angle"))?,
                })
            }
            "cx" => {
                need(2, q)?;
                Ok(Gate::Cnot {
                    control: q[0],
                    target: q[1],
                })
            }
            "cz" => {
                need(2, q)?;
                Ok(Gate::Cz { a: q[0], b: q[1] })
            }
            "swap" => {
                need(2, q)?;
                Ok(Gate::Swap { a: q[0], b: q[1] })
            }
            "mcx" => {
                if q.len() < 2 {
                    return Err(bad("needs at least one control and a target"));
                }
                Ok(Gate::Mcx {
                    controls: q[..q.len() - 1].to_vec(),
                    target: q[q.len() - 1],
                })
            }
            "mcz" => Ok(Gate::Mcz { qubits: q.clone() }),
            "rc3x" => {
                need(4, q)?;
                Ok(Gate::Rc3x {
                    controls: [q[0], q[1], q[2]],
                    target: q[3],
                })
            }
            "ucg_ry" => {
                if q.is_empty() {
                    return Err(bad("needs a target"));
                }
                Ok(Gate::UcgRotY {
                    selects: q[..q.len() - 1].to_vec(),
                    target: q[q.len() - 1],
                    angles: self.angles.ok_or_else(|| bad("missing angles"))?,
                })
            }
            other => Err(CircuitError::UnknownKind(other.to_string())),
        }
    }
}
