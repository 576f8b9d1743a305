//! Parameterized circuits in alternating form: fixed multi-qubit blocks
//! interleaved with single-qubit rotations R_A(theta), A^2 = I.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::structure::CircuitStructure;
use crate::tensor::{rotation_2x2, ComplexMatrix, RotationAxis};
use crate::{Error, Result};

/// A fixed (non-parameterized) gate.
#[derive(Debug, Clone, PartialEq)]
pub enum FixedGate {
    Cz { a: usize, b: usize },
    /// Arbitrary fixed unitary on explicit targets. Never produced by the
    /// template generator, accepted from circuit files.
    Dense {
        matrix: ComplexMatrix,
        targets: Vec<usize>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum CircuitElement {
    Fixed(FixedGate),
    Rotation {
        axis: RotationAxis,
        target: usize,
        param_id: usize,
    },
}

/// Alternating circuit V = W_K R_K(theta_K) ... W_1 R_1(theta_1) W_0.
///
/// `elements` is stored in matrix-product order: elements[0] acts last.
/// param_id 0 belongs to the rotation applied first in time (theta_1).
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterizedCircuit {
    pub n_qubits: usize,
    pub elements: Vec<CircuitElement>,
    k: usize,
}

/// Rotation angles in radians. Stored unnormalized during optimization and
/// canonicalized into (-pi, pi] at serialization.
#[derive(Debug, Clone, PartialEq)]
pub struct AngleVector(pub Vec<f64>);

/// Map an angle into (-pi, pi].
pub fn canonical_angle(theta: f64) -> f64 {
    // already canonical: return unchanged so the map is idempotent at the
    // ulp level (serialized angles survive a read/write cycle byte-exactly)
    if theta > -PI && theta <= PI {
        return theta;
    }
    let r = theta.rem_euclid(2.0 * PI);
    if r > PI {
        r - 2.0 * PI
    } else {
        r
    }
}

impl AngleVector {
    pub fn zeros(k: usize) -> Self {
        Self(vec![0.0; k])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn canonicalized(&self) -> AngleVector {
        AngleVector(self.0.iter().map(|&t| canonical_angle(t)).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TemplateStyle {
    /// Z-X-Z layer on each wire before every CZ.
    Full,
    /// Z-X layer before every CZ; the dropped R_Z commutes through CZ.
    Reduced,
}

impl ParameterizedCircuit {
    pub fn new(n_qubits: usize, elements: Vec<CircuitElement>) -> Result<Self> {
        let mut param_seen = Vec::new();
        for e in &elements {
            match e {
                CircuitElement::Rotation { target, param_id, .. } => {
                    if *target >= n_qubits {
                        return Err(Error::InvalidArgument(format!(
                            "rotation target {target} out of range"
                        )));
                    }
                    if param_seen.len() <= *param_id {
                        param_seen.resize(*param_id + 1, false);
                    }
                    if param_seen[*param_id] {
                        return Err(Error::InvalidArgument(format!(
                            "param id {param_id} used more than once"
                        )));
                    }
                    param_seen[*param_id] = true;
                }
                CircuitElement::Fixed(FixedGate::Cz { a, b }) => {
                    if a == b || *a >= n_qubits || *b >= n_qubits {
                        return Err(Error::InvalidArgument(format!(
                            "bad CZ targets ({a},{b})"
                        )));
                    }
                }
                CircuitElement::Fixed(FixedGate::Dense { matrix, targets }) => {
                    if matrix.dim() != 1 << targets.len() {
                        return Err(Error::DimensionMismatch(
                            "dense gate dim does not match target count".into(),
                        ));
                    }
                    let mut seen = vec![false; n_qubits];
                    for &t in targets {
                        if t >= n_qubits || seen[t] {
                            return Err(Error::InvalidArgument(format!(
                                "bad dense gate target {t}"
                            )));
                        }
                        seen[t] = true;
                    }
                }
            }
        }
        if !param_seen.iter().all(|&s| s) {
            return Err(Error::InvalidArgument(
                "param ids must cover 0..K-1 exactly once".into(),
            ));
        }
        let k = param_seen.len();
        Ok(Self {
            n_qubits,
            elements,
            k,
        })
    }

    /// Number of rotation parameters K.
    pub fn num_params(&self) -> usize {
        self.k
    }

    pub fn dim(&self) -> usize {
        1 << self.n_qubits
    }

    pub fn cz_count(&self) -> usize {
        self.elements
            .iter()
            .filter(|e| matches!(e, CircuitElement::Fixed(FixedGate::Cz { .. })))
            .count()
    }

    /// CZ placements in temporal order (first applied first).
    pub fn cz_placements(&self) -> Vec<(usize, usize)> {
        self.elements
            .iter()
            .rev()
            .filter_map(|e| match e {
                CircuitElement::Fixed(FixedGate::Cz { a, b }) => Some((*a, *b)),
                _ => None,
            })
            .collect()
    }

    pub fn cz_depth(&self) -> usize {
        crate::structure::compute_depth(&self.cz_placements())
    }

    /// Full 2^n unitary at the given angles. The rightmost (last) element
    /// is applied first.
    pub fn evaluate(&self, angles: &AngleVector) -> Result<ComplexMatrix> {
        if angles.len() != self.k {
            return Err(Error::InvalidArgument(format!(
                "angle count {} does not match K={}",
                angles.len(),
                self.k
            )));
        }
        let n = self.n_qubits;
        let mut m = ComplexMatrix::identity(self.dim());
        for e in self.elements.iter().rev() {
            match e {
                CircuitElement::Rotation {
                    axis,
                    target,
                    param_id,
                } => {
                    let g = rotation_2x2(*axis, angles.0[*param_id]);
                    m.apply_single_qubit_left(&g, *target, n);
                }
                CircuitElement::Fixed(FixedGate::Cz { a, b }) => {
                    m.apply_cz_left(*a, *b, n);
                }
                CircuitElement::Fixed(FixedGate::Dense { matrix, targets }) => {
                    let full = crate::tensor::embed(matrix, targets, n)?;
                    m = full.matmul(&m)?;
                }
            }
        }
        Ok(m)
    }

    /// Remove the rotation gate with the given param id (fixing its angle
    /// to zero), re-indexing the remaining parameters.
    pub fn without_rotation(&self, param_id: usize) -> Result<ParameterizedCircuit> {
        if param_id >= self.k {
            return Err(Error::InvalidArgument(format!(
                "param id {param_id} out of range"
            )));
        }
        let elements = self
            .elements
            .iter()
            .filter(|e| {
                !matches!(e, CircuitElement::Rotation { param_id: p, .. } if *p == param_id)
            })
            .map(|e| match e {
                CircuitElement::Rotation {
                    axis,
                    target,
                    param_id: p,
                } => CircuitElement::Rotation {
                    axis: *axis,
                    target: *target,
                    param_id: if *p > param_id { *p - 1 } else { *p },
                },
                other => other.clone(),
            })
            .collect();
        ParameterizedCircuit::new(self.n_qubits, elements)
    }
}

/// Attach parameterized single-qubit layers around the structure's CZ
/// placements. Each CZ gets a pre-layer on both wires (Z-X-Z in full style,
/// Z-X in reduced); the post-layer of one CZ is folded into the pre-layer
/// of the next gate on the same wire, and every qubit gets a closing full
/// Z-X-Z layer.
pub fn apply_template(
    structure: &CircuitStructure,
    n_qubits: usize,
    style: TemplateStyle,
) -> Result<ParameterizedCircuit> {
    use CircuitElement::*;
    let mut temporal: Vec<CircuitElement> = Vec::new();
    let mut next_param = 0usize;
    let mut push_layer = |out: &mut Vec<CircuitElement>, q: usize, axes: &[RotationAxis]| {
        for &axis in axes {
            out.push(Rotation {
                axis,
                target: q,
                param_id: next_param,
            });
            next_param += 1;
        }
    };
    let pre: &[RotationAxis] = match style {
        TemplateStyle::Full => &[RotationAxis::Z, RotationAxis::X, RotationAxis::Z],
        TemplateStyle::Reduced => &[RotationAxis::Z, RotationAxis::X],
    };
    for layer in &structure.layers {
        for &(a, b) in layer {
            if a.max(b) >= n_qubits {
                return Err(Error::InvalidArgument(format!(
                    "placement ({a},{b}) out of range for {n_qubits} qubits"
                )));
            }
            push_layer(&mut temporal, a, pre);
            push_layer(&mut temporal, b, pre);
            temporal.push(Fixed(FixedGate::Cz { a, b }));
        }
    }
    let closing = [RotationAxis::Z, RotationAxis::X, RotationAxis::Z];
    for q in 0..n_qubits {
        push_layer(&mut temporal, q, &closing);
    }
    temporal.reverse();
    ParameterizedCircuit::new(n_qubits, temporal)
}

/// Circuit interchange format. Elements appear in the stored order
/// (first listed acts last); angles are canonicalized on write.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CircuitFile {
    pub n_qubits: usize,
    pub elements: Vec<ElementJson>,
    pub angles: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum ElementJson {
    Cz {
        targets: [usize; 2],
    },
    Rot {
        axis: RotationAxis,
        target: usize,
        param: usize,
    },
    Gate {
        targets: Vec<usize>,
        matrix: ComplexMatrix,
    },
}

impl CircuitFile {
    pub fn from_circuit(circuit: &ParameterizedCircuit, angles: &AngleVector) -> Self {
        let elements = circuit
            .elements
            .iter()
            .map(|e| match e {
                CircuitElement::Fixed(FixedGate::Cz { a, b }) => {
                    ElementJson::Cz { targets: [*a, *b] }
                }
                CircuitElement::Fixed(FixedGate::Dense { matrix, targets }) => ElementJson::Gate {
                    targets: targets.clone(),
                    matrix: matrix.clone(),
                },
                CircuitElement::Rotation {
                    axis,
                    target,
                    param_id,
                } => ElementJson::Rot {
                    axis: *axis,
                    target: *target,
                    param: *param_id,
                },
            })
            .collect();
        Self {
            n_qubits: circuit.n_qubits,
            elements,
            angles: angles.canonicalized().0,
        }
    }

    pub fn into_circuit(self) -> Result<(ParameterizedCircuit, AngleVector)> {
        let elements = self
            .elements
            .into_iter()
            .map(|e| match e {
                ElementJson::Cz { targets: [a, b] } => {
                    CircuitElement::Fixed(FixedGate::Cz { a, b })
                }
                ElementJson::Gate { targets, matrix } => {
                    CircuitElement::Fixed(FixedGate::Dense { matrix, targets })
                }
                ElementJson::Rot {
                    axis,
                    target,
                    param,
                } => CircuitElement::Rotation {
                    axis,
                    target,
                    param_id: param,
                },
            })
            .collect();
        let circuit = ParameterizedCircuit::new(self.n_qubits, elements)?;
        if self.angles.len() != circuit.num_params() {
            return Err(Error::InvalidArgument(format!(
                "angle count {} does not match circuit K={}",
                self.angles.len(),
                circuit.num_params()
            )));
        }
        Ok((circuit, AngleVector(self.angles)))
    }
}
