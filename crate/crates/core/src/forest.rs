//! Random-forest model: representation, validation, JSON ingestion, the
//! classical prediction oracle, and per-leaf rotation angles.
//!
//! Trees are balanced binary trees of `height` node levels (leaf level
//! included), so a tree has 2^(h−1) leaves and a leaf index fits in h−1
//! bits. Internal nodes are stored in level order with the root first;
//! leaves left to right. Descending from the root, attribute value 0
//! goes left and 1 goes right, which makes the bits of the reached leaf
//! index, most significant first, exactly the attribute values read
//! along the path. The forest holds 2^n trees of equal height.

use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ForestError {
    #[error("forest JSON: {0}")]
    Json(String),
    #[error("attr_count must be at least 1")]
    AttrCountZero,
    #[error("tree count must be a power of two, got {0}")]
    TreeCountNotPowerOfTwo(usize),
    #[error("trees[{tree}].height: must be at least 2, got {height}")]
    HeightTooSmall { tree: usize, height: usize },
    #[error("trees[{tree}].height: all trees must share the same height ({expected}), got {found}")]
    HeightMismatch {
        tree: usize,
        expected: usize,
        found: usize,
    },
    #[error("trees[{tree}].attr_index: expected {expected} entries for height {height}, got {found}")]
    AttrIndexLength {
        tree: usize,
        height: usize,
        expected: usize,
        found: usize,
    },
    #[error("trees[{tree}].leaf_prob: expected {expected} entries for height {height}, got {found}")]
    LeafProbLength {
        tree: usize,
        height: usize,
        expected: usize,
        found: usize,
    },
    #[error("trees[{tree}].attr_index[{node}]: attribute {value} out of range for attr_count {attr_count}")]
    AttrIndexOutOfRange {
        tree: usize,
        node: usize,
        value: usize,
        attr_count: usize,
    },
    #[error("trees[{tree}].leaf_prob[{leaf}]: probability {value} outside [0, 1]")]
    LeafProbOutOfRange { tree: usize, leaf: usize, value: f64 },
    #[error("input bitstring length {got} does not match attr_count {expected}")]
    InputLength { expected: usize, got: usize },
    #[error("input bitstring may only contain '0' and '1', found {0:?}")]
    InputChar(char),
}

/// One balanced binary decision tree: attribute indexes for the internal
/// nodes (level order, root first) and a class-0 probability per leaf
/// (left to right).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeModel {
    pub height: usize,
    pub attr_index: Vec<usize>,
    pub leaf_prob: Vec<f64>,
}

impl TreeModel {
    pub fn leaf_count(&self) -> usize {
        1usize << (self.height - 1)
    }

    /// Attribute index at level `level`, position `pos` within the level.
    pub fn attr_at(&self, level: usize, pos: usize) -> usize {
        self.attr_index[(1usize << level) - 1 + pos]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForestModel {
    attr_count: usize,
    trees: Vec<TreeModel>,
    tree_index_qubits: usize,
}

impl ForestModel {
    pub fn new(attr_count: usize, trees: Vec<TreeModel>) -> Result<Self, ForestError> {
        if attr_count == 0 {
            return Err(ForestError::AttrCountZero);
        }
        if !trees.len().is_power_of_two() {
            return Err(ForestError::TreeCountNotPowerOfTwo(trees.len()));
        }
        let height = trees[0].height;
        for (t, tree) in trees.iter().enumerate() {
            if tree.height < 2 {
                return Err(ForestError::HeightTooSmall {
                    tree: t,
                    height: tree.height,
                });
            }
            if tree.height != height {
                return Err(ForestError::HeightMismatch {
                    tree: t,
                    expected: height,
                    found: tree.height,
                });
            }
            let internal = (1usize << (tree.height - 1)) - 1;
            if tree.attr_index.len() != internal {
                return Err(ForestError::AttrIndexLength {
                    tree: t,
                    height: tree.height,
                    expected: internal,
                    found: tree.attr_index.len(),
                });
            }
            let leaves = 1usize << (tree.height - 1);
            if tree.leaf_prob.len() != leaves {
                return Err(ForestError::LeafProbLength {
                    tree: t,
                    height: tree.height,
                    expected: leaves,
                    found: tree.leaf_prob.len(),
                });
            }
            for (node, &attr) in tree.attr_index.iter().enumerate() {
                if attr >= attr_count {
                    return Err(ForestError::AttrIndexOutOfRange {
                        tree: t,
                        node,
                        value: attr,
                        attr_count,
                    });
                }
            }
            for (leaf, &p) in tree.leaf_prob.iter().enumerate() {
                if !(0.0..=1.0).contains(&p) || p.is_nan() {
                    return Err(ForestError::LeafProbOutOfRange {
                        tree: t,
                        leaf,
                        value: p,
                    });
                }
            }
        }
        let tree_index_qubits = trees.len().trailing_zeros() as usize;
        Ok(ForestModel {
            attr_count,
            trees,
            tree_index_qubits,
        })
    }

    pub fn attr_count(&self) -> usize {
        self.attr_count
    }

    pub fn trees(&self) -> &[TreeModel] {
        &self.trees
    }

    pub fn num_trees(&self) -> usize {
        self.trees.len()
    }

    /// Number of qubits needed to index the trees: log2 of the tree count.
    pub fn tree_index_qubits(&self) -> usize {
        self.tree_index_qubits
    }

    pub fn height(&self) -> usize {
        self.trees[0].height
    }
}

#[derive(Serialize, Deserialize)]
struct ForestDoc {
    attr_count: usize,
    trees: Vec<TreeModel>,
}

/// Parse and validate a forest from its JSON document form.
pub fn parse_forest(document: &str) -> Result<ForestModel, ForestError> {
    let doc: ForestDoc =
        serde_json::from_str(document).map_err(|e| ForestError::Json(e.to_string()))?;
    ForestModel::new(doc.attr_count, doc.trees)
}

/// Serialize a forest back to its JSON document form. Round-trips
/// exactly: `parse_forest(serialize_forest(f)) == f`.
pub fn serialize_forest(forest: &ForestModel) -> String {
    let doc = ForestDoc {
        attr_count: forest.attr_count,
        trees: forest.trees.clone(),
    };
    serde_json::to_string_pretty(&doc).expect("forest serialization cannot fail")
}

/// Parse an attribute bitstring; the leftmost character is attribute 0.
pub fn parse_bitstring(text: &str, attr_count: usize) -> Result<Vec<u8>, ForestError> {
    let mut bits = Vec::with_capacity(text.len());
    for ch in text.chars() {
        match ch {
            '0' => bits.push(0),
            '1' => bits.push(1),
            other => return Err(ForestError::InputChar(other)),
        }
    }
    if bits.len() != attr_count {
        return Err(ForestError::InputLength {
            expected: attr_count,
            got: bits.len(),
        });
    }
    Ok(bits)
}

/// Descend one tree on input `x`: at each internal node read the node's
/// attribute and go left on 0, right on 1. Returns the reached leaf
/// index; its bits, most significant first, are the attribute values
/// read along the path.
pub fn tree_predict_classical(tree: &TreeModel, x: &[u8]) -> usize {
    let mut leaf = 0usize;
    for level in 0..tree.height - 1 {
        let bit = x[tree.attr_at(level, leaf)] as usize;
        leaf = 2 * leaf + bit;
    }
    leaf
}

/// Class-0 probability for `x`: the arithmetic mean over trees of the
/// probability stored at the leaf each tree reaches.
pub fn predict_proba(forest: &ForestModel, x: &[u8]) -> f64 {
    let total: f64 = forest
        .trees
        .iter()
        .map(|tree| tree.leaf_prob[tree_predict_classical(tree, x)])
        .sum();
    total / forest.num_trees() as f64
}

/// Rotation angles per tree and leaf: θ = arccos(√p), so that a
/// y-rotation by 2θ puts probability p on the |0⟩ class outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct LeafAngles {
    angles: Vec<Vec<f64>>,
}

impl LeafAngles {
    pub fn angle(&self, tree: usize, leaf: usize) -> f64 {
        self.angles[tree][leaf]
    }

    pub fn per_tree(&self) -> &[Vec<f64>] {
        &self.angles
    }
}

pub fn leaf_angles(forest: &ForestModel) -> LeafAngles {
    let angles = forest
        .trees
        .iter()
        .map(|tree| tree.leaf_prob.iter().map(|p| p.sqrt().acos()).collect())
        .collect();
    LeafAngles { angles }
}

/// The two-tree verification fixture used across the test suites: three
/// attributes, two height-3 trees with hand-checkable traversals.
#[cfg(test)]
pub(crate) fn fixture_two_trees() -> ForestModel {
    ForestModel::new(
        3,
        vec![
            TreeModel {
                height: 3,
                attr_index: vec![0, 1, 2],
                leaf_prob: vec![0.1, 0.9, 0.3, 0.5],
            },
            TreeModel {
                height: 3,
                attr_index: vec![2, 0, 1],
                leaf_prob: vec![0.0, 0.4, 0.8, 0.2],
            },
        ],
    )
    .unwrap()
}
