//! Synthesis of the forest-prediction circuit.
//!
//! The register is laid out as
//! |anc_mct_rec⟩|X⟩|anc_i⟩|i⟩|anc_j⟩|j⟩|class⟩: one ancilla reserved for
//! wide multi-controlled-X lowering, the input attributes, a tree-match
//! ancilla, the tree index, a node-match ancilla, the node position, and
//! the class qubit. Qubit 0 is anc_mct_rec and the class qubit comes
//! last, for a total width of attr_count + n + height + 3.
//!
//! The prediction circuit puts the tree index register into uniform
//! superposition, then unrolls the trees: for each tree the tree-match
//! ancilla is toggled by a multi-controlled X on the index pattern, the
//! traversal walks the node levels under that ancilla, and the ancilla
//! is toggled back. Within a level the nodes are visited in descending
//! position order; each node comparison toggles the node-match ancilla
//! on the current position, the position is doubled by ancilla-controlled
//! swaps, the branch bit is appended from the node's attribute qubit
//! through a relative-phase three-controlled NOT, and the comparison is
//! undone against the doubled position. Node positions are kept
//! level-local (re-enumerated from zero), which is what lets the node
//! register fit in height − 1 qubits: the constant leading one of a
//! heap-style index is never stored. At the leaf level the appended bit
//! is first set outright and then decremented away when the attribute
//! reads zero. Once every tree has finished, a single multiplexed
//! y-rotation selected on (node, tree) writes the leaf probability into
//! the class qubit: P(class = 0 | tree, leaf) = p(tree, leaf).

use serde::Serialize;

use crate::circuit::{Circuit, CircuitError, Gate};
use crate::forest::{leaf_angles, ForestError, ForestModel, TreeModel};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum SynthError {
    #[error(transparent)]
    Forest(#[from] ForestError),
    #[error(transparent)]
    Circuit(#[from] CircuitError),
}

/// Qubit offsets of the seven register parts, in register order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegisterLayout {
    pub anc_mct_rec: usize,
    pub x_start: usize,
    pub x_len: usize,
    pub anc_i: usize,
    pub i_start: usize,
    pub i_len: usize,
    pub anc_j: usize,
    pub j_start: usize,
    pub j_len: usize,
    pub class: usize,
    pub width: usize,
}

impl RegisterLayout {
    pub fn new(attr_count: usize, tree_index_qubits: usize, height: usize) -> Self {
        let anc_mct_rec = 0;
        let x_start = 1;
        let x_len = attr_count;
        let anc_i = x_start + x_len;
        let i_start = anc_i + 1;
        let i_len = tree_index_qubits;
        let anc_j = i_start + i_len;
        let j_start = anc_j + 1;
        let j_len = height - 1;
        let class = j_start + j_len;
        RegisterLayout {
            anc_mct_rec,
            x_start,
            x_len,
            anc_i,
            i_start,
            i_len,
            anc_j,
            j_start,
            j_len,
            class,
            width: class + 1,
        }
    }

    pub fn for_forest(forest: &ForestModel) -> Self {
        RegisterLayout::new(
            forest.attr_count(),
            forest.tree_index_qubits(),
            forest.height(),
        )
    }

    pub fn x_qubit(&self, attr: usize) -> usize {
        debug_assert!(attr < self.x_len);
        self.x_start + attr
    }

    pub fn i_qubit(&self, bit: usize) -> usize {
        debug_assert!(bit < self.i_len);
        self.i_start + bit
    }

    pub fn j_qubit(&self, bit: usize) -> usize {
        debug_assert!(bit < self.j_len);
        self.j_start + bit
    }

    /// The non-ancilla qubits: attributes, tree index, node position,
    /// class.
    pub fn working_qubits(&self) -> Vec<usize> {
        let mut qs: Vec<usize> = (self.x_start..self.x_start + self.x_len).collect();
        qs.extend(self.i_start..self.i_start + self.i_len);
        qs.extend(self.j_start..self.j_start + self.j_len);
        qs.push(self.class);
        qs
    }

    pub fn ancilla_qubits(&self) -> Vec<usize> {
        vec![self.anc_mct_rec, self.anc_i, self.anc_j]
    }
}

/// The synthesized prediction circuit together with its layout, source
/// forest, and the multiplexed rotation table (one angle per
/// (tree, leaf) select pattern).
#[derive(Debug, Clone)]
pub struct SynthesizedPredictor {
    pub circuit: Circuit,
    pub layout: RegisterLayout,
    pub rotation_angles: Vec<f64>,
    pub forest: ForestModel,
    pub input: Vec<u8>,
}

/// X gates loading the classical input into the attribute register: one
/// X per set bit, nothing else.
pub fn prepare_x(layout: &RegisterLayout, x: &[u8]) -> Result<Vec<Gate>, SynthError> {
    if x.len() != layout.x_len {
        return Err(SynthError::Forest(ForestError::InputLength {
            expected: layout.x_len,
            got: x.len(),
        }));
    }
    Ok(x.iter()
        .enumerate()
        .filter(|(_, &bit)| bit == 1)
        .map(|(attr, _)| Gate::PauliX {
            target: layout.x_qubit(attr),
        })
        .collect())
}

/// Toggle `target` where the listed qubits match the given bit pattern
/// and `gate_control` is 1: X-conjugation for the zero bits around one
/// multi-controlled X.
fn append_pattern_toggle(
    circuit: &mut Circuit,
    pattern: &[(usize, u8)],
    gate_control: usize,
    target: usize,
) -> Result<(), CircuitError> {
    for &(q, bit) in pattern {
        if bit == 0 {
            circuit.append(Gate::PauliX { target: q })?;
        }
    }
    let mut controls: Vec<usize> = pattern.iter().map(|&(q, _)| q).collect();
    controls.push(gate_control);
    if controls.len() == 1 {
        circuit.append(Gate::Cnot {
            control: controls[0],
            target,
        })?;
    } else {
        circuit.append(Gate::Mcx { controls, target })?;
    }
    for &(q, bit) in pattern {
        if bit == 0 {
            circuit.append(Gate::PauliX { target: q })?;
        }
    }
    Ok(())
}

/// Toggle the tree-match ancilla on tree index `t`.
fn append_tree_index_toggle(
    circuit: &mut Circuit,
    layout: &RegisterLayout,
    t: usize,
) -> Result<(), CircuitError> {
    if layout.i_len == 0 {
        return circuit.append(Gate::PauliX {
            target: layout.anc_i,
        });
    }
    for bit in 0..layout.i_len {
        if t >> bit & 1 == 0 {
            circuit.append(Gate::PauliX {
                target: layout.i_qubit(bit),
            })?;
        }
    }
    if layout.i_len == 1 {
        circuit.append(Gate::Cnot {
            control: layout.i_qubit(0),
            target: layout.anc_i,
        })?;
    } else {
        circuit.append(Gate::Mcx {
            controls: (0..layout.i_len).map(|b| layout.i_qubit(b)).collect(),
            target: layout.anc_i,
        })?;
    }
    for bit in 0..layout.i_len {
        if t >> bit & 1 == 0 {
            circuit.append(Gate::PauliX {
                target: layout.i_qubit(bit),
            })?;
        }
    }
    Ok(())
}

/// The per-tree traversal, gated on the tree-match ancilla. Moves the
/// node register from position 0 to the leaf selected by the attribute
/// register, leaving the node-match ancilla back at 0.
fn append_controlled_traversal(
    circuit: &mut Circuit,
    layout: &RegisterLayout,
    tree: &TreeModel,
) -> Result<(), CircuitError> {
    let levels = tree.height - 1;
    for level in 0..levels {
        // Descending position order: a node updated to 2q + bit can then
        // never collide with a comparison pattern still to come.
        for q in (0..1usize << level).rev() {
            let attr_qubit = layout.x_qubit(tree.attr_at(level, q));

            // match the current position over bits 0..=level (bit
            // `level` of any position at this level is still 0)
            let compare: Vec<(usize, u8)> = (0..=level)
                .map(|b| (layout.j_qubit(b), (q >> b & 1) as u8))
                .collect();
            append_pattern_toggle(circuit, &compare, layout.anc_i, layout.anc_j)?;

            // double the position: controlled swaps shift bits 0..level
            // up by one
            for b in (1..=level).rev() {
                let hi = layout.j_qubit(b);
                let lo = layout.j_qubit(b - 1);
                circuit.append(Gate::Cnot { control: hi, target: lo })?;
                circuit.append(Gate::Rc3x {
                    controls: [layout.anc_i, layout.anc_j, lo],
                    target: hi,
                })?;
                circuit.append(Gate::Cnot { control: hi, target: lo })?;
            }

            // append the branch bit read from the node's attribute
            let j0 = layout.j_qubit(0);
            if level == levels - 1 {
                // leaf step: set the bit outright, then subtract it back
                // off when the attribute reads 0
                circuit.append(Gate::Mcx {
                    controls: vec![layout.anc_i, layout.anc_j],
                    target: j0,
                })?;
                circuit.append(Gate::PauliX { target: attr_qubit })?;
                circuit.append(Gate::Rc3x {
                    controls: [layout.anc_i, layout.anc_j, attr_qubit],
                    target: j0,
                })?;
                circuit.append(Gate::PauliX { target: attr_qubit })?;
            } else {
                circuit.append(Gate::Rc3x {
                    controls: [layout.anc_i, layout.anc_j, attr_qubit],
                    target: j0,
                })?;
            }

            // undo the match against the doubled position: bits 1..=level
            // now hold q, bit 0 holds the branch bit
            let uncompare: Vec<(usize, u8)> = (1..=level)
                .map(|b| (layout.j_qubit(b), (q >> (b - 1) & 1) as u8))
                .collect();
            append_pattern_toggle(circuit, &uncompare, layout.anc_i, layout.anc_j)?;
        }
    }
    Ok(())
}

/// Rotation table for the multiplexed class rotation: entry
/// `leaf + (tree << (height − 1))` rotates by twice the leaf angle, so
/// that conditioned on (tree, leaf) the class qubit measures 0 with the
/// leaf's class-0 probability.
fn rotation_table(forest: &ForestModel) -> Vec<f64> {
    let angles = leaf_angles(forest);
    let leaves = 1usize << (forest.height() - 1);
    let mut table = Vec::with_capacity(forest.num_trees() * leaves);
    for tree in 0..forest.num_trees() {
        for leaf in 0..leaves {
            table.push(2.0 * angles.angle(tree, leaf));
        }
    }
    // table[leaf + (tree << (h-1))]: tree index in the high select bits
    table
}

/// Build the full prediction circuit for one input.
pub fn synthesize_rf_predict(
    forest: &ForestModel,
    x: &[u8],
) -> Result<SynthesizedPredictor, SynthError> {
    let layout = RegisterLayout::for_forest(forest);
    if x.len() != layout.x_len {
        return Err(SynthError::Forest(ForestError::InputLength {
            expected: layout.x_len,
            got: x.len(),
        }));
    }
    let mut circuit = Circuit::new(layout.width);
    circuit.layout = Some(layout.clone());

    circuit.extend(prepare_x(&layout, x)?)?;
    for bit in 0..layout.i_len {
        circuit.append(Gate::Hadamard {
            target: layout.i_qubit(bit),
        })?;
    }
    for (t, tree) in forest.trees().iter().enumerate() {
        append_tree_index_toggle(&mut circuit, &layout, t)?;
        append_controlled_traversal(&mut circuit, &layout, tree)?;
        append_tree_index_toggle(&mut circuit, &layout, t)?;
    }

    let rotation_angles = rotation_table(forest);
    let mut selects: Vec<usize> = (0..layout.j_len).map(|b| layout.j_qubit(b)).collect();
    selects.extend((0..layout.i_len).map(|b| layout.i_qubit(b)));
    circuit.append(Gate::UcgRotY {
        selects,
        target: layout.class,
        angles: rotation_angles.clone(),
    })?;

    Ok(SynthesizedPredictor {
        circuit,
        layout,
        rotation_angles,
        forest: forest.clone(),
        input: x.to_vec(),
    })
}

/// The two reflections of the amplitude-amplification step: the first
/// flips the sign of the all-zeros state of the working registers (X
/// conjugation around a multi-controlled Z), the second flips the sign
/// of every state whose class qubit reads 0.
pub fn synthesize_reflections(layout: &RegisterLayout) -> (Circuit, Circuit) {
    let mut s0 = Circuit::new(layout.width);
    s0.layout = Some(layout.clone());
    let working = layout.working_qubits();
    for &q in &working {
        s0.append(Gate::PauliX { target: q }).expect("layout qubit");
    }
    s0.append(Gate::Mcz {
        qubits: working.clone(),
    })
    .expect("layout qubits");
    for &q in &working {
        s0.append(Gate::PauliX { target: q }).expect("layout qubit");
    }

    let mut s_chi = Circuit::new(layout.width);
    s_chi.layout = Some(layout.clone());
    s_chi
        .append(Gate::PauliX { target: layout.class })
        .expect("class qubit");
    s_chi
        .append(Gate::PauliZ { target: layout.class })
        .expect("class qubit");
    s_chi
        .append(Gate::PauliX { target: layout.class })
        .expect("class qubit");

    (s0, s_chi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decompose::{lower_to_basis, LowerOptions};
    use crate::forest::{fixture_two_trees, predict_proba, tree_predict_classical};
    use crate::simulator::Statevector;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn simulate(predictor: &SynthesizedPredictor) -> Statevector {
        let mut st = Statevector::new(predictor.circuit.width()).unwrap();
        st.run(&predictor.circuit).unwrap();
        st
    }

    pub(crate) fn random_forest(seed: u64, n: usize, height: usize, attr_count: usize) -> ForestModel {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let trees = (0..1usize << n)
            .map(|_| TreeModel {
                height,
                attr_index: (0..(1usize << (height - 1)) - 1)
                    .map(|_| rng.gen_range(0..attr_count))
                    .collect(),
                leaf_prob: (0..1usize << (height - 1)).map(|_| rng.gen()).collect(),
            })
            .collect();
        ForestModel::new(attr_count, trees).unwrap()
    }

    #[test]
    fn layout_covers_the_register_in_order() {
        let layout = RegisterLayout::new(3, 1, 3);
        assert_eq!(layout.anc_mct_rec, 0);
        assert_eq!(layout.x_start, 1);
        assert_eq!(layout.anc_i, 4);
        assert_eq!(layout.i_start, 5);
        assert_eq!(layout.anc_j, 6);
        assert_eq!(layout.j_start, 7);
        assert_eq!(layout.j_len, 2);
        assert_eq!(layout.class, 9);
        assert_eq!(layout.width, 3 + 1 + 3 + 3);
        let mut all = layout.working_qubits();
        all.extend(layout.ancilla_qubits());
        all.sort_unstable();
        assert_eq!(all, (0..layout.width).collect::<Vec<_>>());
    }

    #[test]
    fn prepare_x_places_x_gates_on_set_bits() {
        let layout = RegisterLayout::new(3, 1, 3);
        assert!(prepare_x(&layout, &[0, 0, 0]).unwrap().is_empty());
        let gates = prepare_x(&layout, &[1, 0, 1]).unwrap();
        assert_eq!(
            gates,
            vec![
                Gate::PauliX { target: layout.x_qubit(0) },
                Gate::PauliX { target: layout.x_qubit(2) },
            ]
        );
        let err = prepare_x(&layout, &[1, 0]).unwrap_err();
        assert_eq!(
            err,
            SynthError::Forest(ForestError::InputLength { expected: 3, got: 2 })
        );
    }

    #[test]
    fn prepare_x_loads_the_basis_state() {
        let layout = RegisterLayout::new(3, 0, 2);
        let mut c = Circuit::new(layout.width);
        c.extend(prepare_x(&layout, &[1, 1, 0]).unwrap()).unwrap();
        let mut st = Statevector::new(layout.width).unwrap();
        st.run(&c).unwrap();
        let expect = (1usize << layout.x_qubit(0)) | (1usize << layout.x_qubit(1));
        assert_eq!(st.amplitudes()[expect].re, 1.0);
    }

    #[test]
    fn constant_leaf_forest_reproduces_the_constant() {
        let forest = ForestModel::new(
            2,
            vec![
                TreeModel { height: 2, attr_index: vec![0], leaf_prob: vec![0.3, 0.3] },
                TreeModel { height: 2, attr_index: vec![1], leaf_prob: vec![0.3, 0.3] },
            ],
        )
        .unwrap();
        for x in [[0u8, 0], [0, 1], [1, 0], [1, 1]] {
            let pred = synthesize_rf_predict(&forest, &x).unwrap();
            let st = simulate(&pred);
            assert!((st.marginal(pred.layout.class, 0) - 0.3).abs() <= 1e-9);
        }
    }

    #[test]
    fn fixture_marginal_matches_hand_value() {
        let forest = fixture_two_trees();
        let pred = synthesize_rf_predict(&forest, &[0, 0, 0]).unwrap();
        let st = simulate(&pred);
        assert!((st.marginal(pred.layout.class, 0) - 0.05).abs() <= 1e-9);
    }

    #[test]
    fn single_tree_forest_skips_superposition() {
        let forest = random_forest(17, 0, 3, 3);
        let pred = synthesize_rf_predict(&forest, &[1, 1, 0]).unwrap();
        assert!(!pred
            .circuit
            .gates()
            .iter()
            .any(|g| matches!(g, Gate::Hadamard { .. })));
        // node register ends at the classical leaf
        let st = simulate(&pred);
        let leaf = tree_predict_classical(&forest.trees()[0], &[1, 1, 0]);
        let leaf_mass: f64 = st
            .amplitudes()
            .iter()
            .enumerate()
            .filter(|(idx, _)| {
                (0..pred.layout.j_len).all(|b| {
                    (idx >> pred.layout.j_qubit(b)) & 1 == (leaf >> b) & 1
                })
            })
            .map(|(_, a)| a.norm_sqr())
            .sum();
        assert!((leaf_mass - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn marginal_equals_classical_oracle_on_random_forests() {
        let mut case = 0u64;
        for n in 0..=2usize {
            for height in 2..=3usize {
                let forest = random_forest(100 + case, n, height, 3);
                case += 1;
                for xv in 0..8usize {
                    let x = [(xv & 1) as u8, (xv >> 1 & 1) as u8, (xv >> 2 & 1) as u8];
                    let pred = synthesize_rf_predict(&forest, &x).unwrap();
                    let st = simulate(&pred);
                    let quantum = st.marginal(pred.layout.class, 0);
                    let classical = predict_proba(&forest, &x);
                    assert!(
                        (quantum - classical).abs() <= 1e-9,
                        "n={n} h={height} x={x:?}: {quantum} vs {classical}"
                    );
                }
            }
        }
    }

    #[test]
    fn ancillas_are_clean_in_the_final_state() {
        let forest = fixture_two_trees();
        for xv in 0..8usize {
            let x = [(xv & 1) as u8, (xv >> 1 & 1) as u8, (xv >> 2 & 1) as u8];
            let pred = synthesize_rf_predict(&forest, &x).unwrap();
            let st = simulate(&pred);
            let dirty: f64 = st
                .amplitudes()
                .iter()
                .enumerate()
                .filter(|(idx, _)| {
                    pred.layout
                        .ancilla_qubits()
                        .iter()
                        .any(|&a| idx >> a & 1 == 1)
                })
                .map(|(_, amp)| amp.norm_sqr())
                .sum();
            assert!(dirty <= 1e-18, "x={x:?}: dirty mass {dirty}");
        }
    }

    #[test]
    fn node_register_holds_the_classical_leaf_per_tree() {
        let forest = fixture_two_trees();
        for xv in 0..8usize {
            let x = [(xv & 1) as u8, (xv >> 1 & 1) as u8, (xv >> 2 & 1) as u8];
            let pred = synthesize_rf_predict(&forest, &x).unwrap();
            let st = simulate(&pred);
            for (idx, amp) in st.amplitudes().iter().enumerate() {
                if amp.norm_sqr() <= 1e-20 {
                    continue;
                }
                let tree = (0..pred.layout.i_len)
                    .map(|b| (idx >> pred.layout.i_qubit(b) & 1) << b)
                    .sum::<usize>();
                let node = (0..pred.layout.j_len)
                    .map(|b| (idx >> pred.layout.j_qubit(b) & 1) << b)
                    .sum::<usize>();
                let expected = tree_predict_classical(&forest.trees()[tree], &x);
                assert_eq!(node, expected, "x={x:?} tree={tree}");
            }
        }
    }

    #[test]
    fn lowered_circuit_has_unit_norm_and_same_marginal() {
        let forest = fixture_two_trees();
        let pred = synthesize_rf_predict(&forest, &[1, 0, 1]).unwrap();
        let lowered = lower_to_basis(&pred.circuit, &LowerOptions::default()).unwrap();
        assert!(lowered.is_basis_level());
        let mut st = Statevector::new(lowered.width()).unwrap();
        st.run(&lowered).unwrap();
        assert!((st.norm_sqr() - 1.0).abs() <= 1e-9);
        let composite = simulate(&pred);
        assert!(
            (st.marginal(pred.layout.class, 0) - composite.marginal(pred.layout.class, 0)).abs()
                <= 1e-10
        );
    }

    #[test]
    fn s_chi_flips_exactly_class_zero_states() {
        let layout = RegisterLayout::new(1, 0, 2);
        let (_, s_chi) = synthesize_reflections(&layout);
        for basis in 0..1usize << layout.width {
            let mut st = Statevector::new(layout.width).unwrap();
            for q in 0..layout.width {
                if basis >> q & 1 == 1 {
                    st.apply(&Gate::PauliX { target: q }).unwrap();
                }
            }
            st.run(&s_chi).unwrap();
            let amp = st.amplitudes()[basis];
            let expect = if basis >> layout.class & 1 == 0 { -1.0 } else { 1.0 };
            assert!((amp.re - expect).abs() <= 1e-12, "basis {basis:b}");
        }
    }

    #[test]
    fn s0_flips_exactly_the_zero_working_state() {
        let layout = RegisterLayout::new(1, 0, 2);
        let (s0, _) = synthesize_reflections(&layout);
        for basis in 0..1usize << layout.width {
            let mut st = Statevector::new(layout.width).unwrap();
            for q in 0..layout.width {
                if basis >> q & 1 == 1 {
                    st.apply(&Gate::PauliX { target: q }).unwrap();
                }
            }
            st.run(&s0).unwrap();
            let amp = st.amplitudes()[basis];
            let working_zero = layout
                .working_qubits()
                .iter()
                .all(|&q| basis >> q & 1 == 0);
            let expect = if working_zero { -1.0 } else { 1.0 };
            assert!((amp.re - expect).abs() <= 1e-12, "basis {basis:b}");
        }
    }

    #[test]
    fn reflections_are_involutions() {
        let layout = RegisterLayout::new(2, 1, 2);
        let (s0, s_chi) = synthesize_reflections(&layout);
        for refl in [s0, s_chi] {
            let mut st = Statevector::new(layout.width).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(9);
            for q in 0..layout.width {
                st.apply(&Gate::RotY { target: q, angle: rng.gen_range(-3.0..3.0) })
                    .unwrap();
            }
            let before = st.amplitudes().to_vec();
            st.run(&refl).unwrap();
            st.run(&refl).unwrap();
            for (a, b) in st.amplitudes().iter().zip(&before) {
                assert!((a - b).norm() <= 1e-10);
            }
        }
    }
}
