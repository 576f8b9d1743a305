//! Enumeration of candidate CZ placements respecting a qubit-connectivity
//! graph, with symmetry deduplication.
//!
//! Structures are emitted in canonical lexicographic order, one per orbit
//! of the dedup group, so that workers can partition the stream by index.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub type Edge = (usize, usize);

fn norm_edge(a: usize, b: usize) -> Edge {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Undirected qubit-connectivity graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConnectivityGraph {
    pub n_qubits: usize,
    edges: Vec<Edge>,
}

impl ConnectivityGraph {
    pub fn new(n_qubits: usize, edges: impl IntoIterator<Item = Edge>) -> Result<Self> {
        let mut es: Vec<Edge> = Vec::new();
        for (a, b) in edges {
            if a == b {
                return Err(Error::InvalidArgument(format!("self-loop on qubit {a}")));
            }
            if a >= n_qubits || b >= n_qubits {
                return Err(Error::InvalidArgument(format!(
                    "edge ({a},{b}) out of range for {n_qubits} qubits"
                )));
            }
            let e = norm_edge(a, b);
            if !es.contains(&e) {
                es.push(e);
            }
        }
        es.sort_unstable();
        Ok(Self { n_qubits, edges: es })
    }

    /// Named presets for the benchmark connectivities.
    pub fn preset(name: &str) -> Result<Self> {
        let (n, edges): (usize, Vec<Edge>) = match name.to_ascii_lowercase().as_str() {
            "edge" | "line2" => (2, vec![(0, 1)]),
            "triangle" | "fully3" => (3, vec![(0, 1), (0, 2), (1, 2)]),
            "line3" => (3, vec![(0, 1), (1, 2)]),
            // 4-cycle; `square4` is the ancilla-assisted CCZ connectivity,
            // `square` the same graph with all four qubits as data qubits
            "square4" | "square" => (4, vec![(0, 1), (1, 2), (2, 3), (0, 3)]),
            "fully4" => (4, vec![(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]),
            // star with center 0, no closed loop
            "t-shape" | "tshape" | "star4" => (4, vec![(0, 1), (0, 2), (0, 3)]),
            // triangle {1,2,3} with pendant qubit 0 attached at 1
            "paw" => (4, vec![(0, 1), (1, 2), (1, 3), (2, 3)]),
            "line4" => (4, vec![(0, 1), (1, 2), (2, 3)]),
            other => {
                return Err(Error::InvalidArgument(format!(
                    "unknown connectivity preset '{other}'"
                )))
            }
        };
        Self::new(n, edges)
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.edges.binary_search(&norm_edge(a, b)).is_ok()
    }

    /// All qubit permutations that map the edge set onto itself.
    pub fn automorphisms(&self) -> Vec<Vec<usize>> {
        let n = self.n_qubits;
        let mut out = Vec::new();
        let mut perm: Vec<usize> = (0..n).collect();
        loop {
            let ok = self
                .edges
                .iter()
                .all(|&(a, b)| self.has_edge(perm[a], perm[b]));
            if ok {
                out.push(perm.clone());
            }
            if !next_permutation(&mut perm) {
                break;
            }
        }
        out
    }

    /// All nonempty matchings (pairwise-disjoint edge sets), each sorted,
    /// in lexicographic order.
    pub fn nonempty_matchings(&self) -> Vec<Vec<Edge>> {
        let m = self.edges.len();
        let mut out = Vec::new();
        for mask in 1u32..(1u32 << m) {
            let mut used = 0usize;
            let mut ok = true;
            let mut layer = Vec::new();
            for (i, &(a, b)) in self.edges.iter().enumerate() {
                if mask & (1 << i) == 0 {
                    continue;
                }
                let bits = (1usize << a) | (1usize << b);
                if used & bits != 0 {
                    ok = false;
                    break;
                }
                used |= bits;
                layer.push((a, b));
            }
            if ok {
                out.push(layer);
            }
        }
        out.sort();
        out
    }
}

fn next_permutation(p: &mut [usize]) -> bool {
    let n = p.len();
    if n < 2 {
        return false;
    }
    let mut i = n - 1;
    while i > 0 && p[i - 1] >= p[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = n - 1;
    while p[j] <= p[i - 1] {
        j -= 1;
    }
    p.swap(i - 1, j);
    p[i..].reverse();
    true
}

#[derive(Serialize, Deserialize)]
struct GraphJson {
    n_qubits: usize,
    edges: Vec<[usize; 2]>,
}

impl Serialize for ConnectivityGraph {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        GraphJson {
            n_qubits: self.n_qubits,
            edges: self.edges.iter().map(|&(a, b)| [a, b]).collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for ConnectivityGraph {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let j = GraphJson::deserialize(d)?;
        ConnectivityGraph::new(j.n_qubits, j.edges.iter().map(|&[a, b]| (a, b)))
            .map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StructureMode {
    Count,
    Depth,
}

/// A connectivity-respecting sequence (count mode) or layering (depth mode)
/// of CZ placements, before rotation angles are attached.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CircuitStructure {
    pub mode: StructureMode,
    /// Count mode: one edge per layer. Depth mode: each layer a nonempty
    /// matching. Layers are in temporal order (first applied first).
    pub layers: Vec<Vec<Edge>>,
}

impl CircuitStructure {
    pub fn from_sequence(edges: Vec<Edge>) -> Self {
        Self {
            mode: StructureMode::Count,
            layers: edges.into_iter().map(|e| vec![e]).collect(),
        }
    }

    pub fn from_layers(layers: Vec<Vec<Edge>>) -> Self {
        Self {
            mode: StructureMode::Depth,
            layers,
        }
    }

    /// Flat placement sequence in temporal order.
    pub fn placements(&self) -> Vec<Edge> {
        self.layers.iter().flatten().copied().collect()
    }

    pub fn cz_count(&self) -> usize {
        self.layers.iter().map(Vec::len).sum()
    }

    pub fn cz_depth(&self) -> usize {
        match self.mode {
            StructureMode::Depth => self.layers.len(),
            StructureMode::Count => compute_depth(&self.placements()),
        }
    }

    pub fn validate(&self, graph: &ConnectivityGraph) -> Result<()> {
        for layer in &self.layers {
            let mut used = 0usize;
            for &(a, b) in layer {
                if !graph.has_edge(a, b) {
                    return Err(Error::InvalidArgument(format!(
                        "placement ({a},{b}) is not an edge of the connectivity graph"
                    )));
                }
                let bits = (1usize << a) | (1usize << b);
                if used & bits != 0 {
                    return Err(Error::InvalidArgument(
                        "depth layer is not a matching".into(),
                    ));
                }
                used |= bits;
            }
            if self.mode == StructureMode::Depth && layer.is_empty() {
                return Err(Error::InvalidArgument("empty depth layer".into()));
            }
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
enum StructureJson {
    Count { placements: Vec<[usize; 2]> },
    Depth { placements: Vec<Vec<[usize; 2]>> },
}

impl Serialize for CircuitStructure {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self.mode {
            StructureMode::Count => StructureJson::Count {
                placements: self.placements().iter().map(|&(a, b)| [a, b]).collect(),
            },
            StructureMode::Depth => StructureJson::Depth {
                placements: self
                    .layers
                    .iter()
                    .map(|l| l.iter().map(|&(a, b)| [a, b]).collect())
                    .collect(),
            },
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for CircuitStructure {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        Ok(match StructureJson::deserialize(d)? {
            StructureJson::Count { placements } => CircuitStructure::from_sequence(
                placements.iter().map(|&[a, b]| norm_edge(a, b)).collect(),
            ),
            StructureJson::Depth { placements } => CircuitStructure::from_layers(
                placements
                    .iter()
                    .map(|l| l.iter().map(|&[a, b]| norm_edge(a, b)).collect())
                    .collect(),
            ),
        })
    }
}

/// Greedy ASAP layering depth of a flat CZ sequence: each gate is scheduled
/// at the earliest layer after the latest prior gate sharing a qubit.
pub fn compute_depth(placements: &[Edge]) -> usize {
    let mut last = std::collections::HashMap::<usize, usize>::new();
    let mut depth = 0;
    for &(a, b) in placements {
        let layer = last.get(&a).copied().unwrap_or(0).max(last.get(&b).copied().unwrap_or(0)) + 1;
        last.insert(a, layer);
        last.insert(b, layer);
        depth = depth.max(layer);
    }
    depth
}

/// The dedup group acting on structures: qubit relabelings that are both
/// connectivity automorphisms and symmetries of the target, plus sequence
/// reversal when the target is self-adjoint.
#[derive(Debug, Clone)]
pub struct DedupSymmetry {
    /// Always contains at least the identity.
    pub perms: Vec<Vec<usize>>,
    pub reversal: bool,
}

impl DedupSymmetry {
    pub fn trivial(n_qubits: usize) -> Self {
        Self {
            perms: vec![(0..n_qubits).collect()],
            reversal: false,
        }
    }

    pub fn new(perms: Vec<Vec<usize>>, reversal: bool) -> Self {
        assert!(!perms.is_empty());
        Self { perms, reversal }
    }

    fn map_layers(&self, perm: &[usize], layers: &[Vec<Edge>], reverse: bool) -> Vec<Vec<Edge>> {
        let mut mapped: Vec<Vec<Edge>> = layers
            .iter()
            .map(|l| {
                let mut layer: Vec<Edge> =
                    l.iter().map(|&(a, b)| norm_edge(perm[a], perm[b])).collect();
                layer.sort_unstable();
                layer
            })
            .collect();
        if reverse {
            mapped.reverse();
        }
        mapped
    }

    /// True when `layers` is the lexicographic minimum of its orbit.
    pub fn is_canonical(&self, layers: &[Vec<Edge>]) -> bool {
        for perm in &self.perms {
            for reverse in [false, true] {
                if reverse && !self.reversal {
                    continue;
                }
                if self.map_layers(perm, layers, reverse).as_slice() < layers {
                    return false;
                }
            }
        }
        true
    }
}

/// Streaming enumeration of edge sequences of the given length, one
/// canonical representative per dedup orbit, in lexicographic order.
pub fn enumerate_count<'a>(
    graph: &'a ConnectivityGraph,
    cz_count: usize,
    sym: &'a DedupSymmetry,
) -> impl Iterator<Item = CircuitStructure> + 'a {
    let alphabet: Vec<Vec<Edge>> = graph.edges().iter().map(|&e| vec![e]).collect();
    Odometer::new(alphabet, cz_count, sym).map(|layers| CircuitStructure {
        mode: StructureMode::Count,
        layers,
    })
}

/// Streaming enumeration of depth-layered structures: sequences of nonempty
/// matchings of the given length, deduplicated as in `enumerate_count`.
pub fn enumerate_depth<'a>(
    graph: &'a ConnectivityGraph,
    cz_depth: usize,
    sym: &'a DedupSymmetry,
) -> impl Iterator<Item = CircuitStructure> + 'a {
    Odometer::new(graph.nonempty_matchings(), cz_depth, sym).map(|layers| CircuitStructure {
        mode: StructureMode::Depth,
        layers,
    })
}

/// Base-|alphabet| counter over layer sequences, filtered to canonical
/// representatives.
struct Odometer<'a> {
    alphabet: Vec<Vec<Edge>>,
    digits: Vec<usize>,
    sym: &'a DedupSymmetry,
    done: bool,
}

impl<'a> Odometer<'a> {
    fn new(alphabet: Vec<Vec<Edge>>, len: usize, sym: &'a DedupSymmetry) -> Self {
        let done = len > 0 && alphabet.is_empty();
        Self {
            alphabet,
            digits: vec![0; len],
            sym,
            done,
        }
    }

    fn advance(&mut self) {
        for d in self.digits.iter_mut().rev() {
            *d += 1;
            if *d < self.alphabet.len() {
                return;
            }
            *d = 0;
        }
        self.done = true;
    }
}

impl Iterator for Odometer<'_> {
    type Item = Vec<Vec<Edge>>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            if self.done {
                return None;
            }
            let layers: Vec<Vec<Edge>> = self
                .digits
                .iter()
                .map(|&d| self.alphabet[d].clone())
                .collect();
            // len == 0: single empty sequence, emit once
            if self.digits.is_empty() {
                self.done = true;
                return Some(layers);
            }
            self.advance();
            if self.sym.is_canonical(&layers) {
                return Some(layers);
            }
        }
    }
}
