//! Best-known CZ counts and depths for the bundled targets and
//! connectivities, used to sanity-check search output.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KnownRecord {
    /// Target gate name as accepted by `named_gate`.
    pub target: &'static str,
    /// Connectivity preset name as accepted by `ConnectivityGraph::preset`.
    pub graph: &'static str,
    /// Number of |0>-initialized ancilla qubits appended after the data
    /// qubits.
    pub ancillas: usize,
    pub best_cz_count: usize,
    /// None when no depth record is published for this row.
    pub best_cz_depth: Option<usize>,
}

pub const KNOWN_RECORDS: &[KnownRecord] = &[
    KnownRecord {
        target: "ccz",
        graph: "triangle",
        ancillas: 0,
        best_cz_count: 6,
        best_cz_depth: Some(6),
    },
    KnownRecord {
        target: "ccz",
        graph: "line3",
        ancillas: 0,
        best_cz_count: 8,
        best_cz_depth: Some(8),
    },
    KnownRecord {
        target: "ccz",
        graph: "square4",
        ancillas: 1,
        best_cz_count: 8,
        best_cz_depth: Some(4),
    },
    KnownRecord {
        target: "cccz",
        graph: "fully4",
        ancillas: 0,
        best_cz_count: 14,
        best_cz_depth: Some(8),
    },
    KnownRecord {
        target: "cccz",
        graph: "t-shape",
        ancillas: 0,
        best_cz_count: 17,
        best_cz_depth: Some(17),
    },
    KnownRecord {
        target: "cccz",
        graph: "square",
        ancillas: 0,
        best_cz_count: 16,
        best_cz_depth: Some(8),
    },
    KnownRecord {
        target: "cccz",
        graph: "paw",
        ancillas: 0,
        best_cz_count: 14,
        best_cz_depth: None,
    },
    KnownRecord {
        target: "cccz",
        graph: "line4",
        ancillas: 0,
        best_cz_count: 18,
        best_cz_depth: Some(12),
    },
];

/// Look up the record for a (target, graph, ancilla count) row, if any.
pub fn lookup(target: &str, graph: &str, ancillas: usize) -> Option<&'static KnownRecord> {
    KNOWN_RECORDS
        .iter()
        .find(|r| r.target == target && r.graph == graph && r.ancillas == ancillas)
}
