//! Shared helpers for integration tests.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

use qgd::circuit::{AngleVector, CircuitElement, ParameterizedCircuit};
use qgd::tensor::RotationAxis;

fn push_rot(
    elems: &mut Vec<CircuitElement>,
    angles: &mut Vec<f64>,
    axis: RotationAxis,
    target: usize,
    theta: f64,
) {
    elems.push(CircuitElement::Rotation {
        axis,
        target,
        param_id: angles.len(),
    });
    angles.push(theta);
}

fn push_h(elems: &mut Vec<CircuitElement>, angles: &mut Vec<f64>, q: usize) {
    // Hadamard up to global phase: Rz(pi/2) Rx(pi/2) Rz(pi/2)
    push_rot(elems, angles, RotationAxis::Z, q, FRAC_PI_2);
    push_rot(elems, angles, RotationAxis::X, q, FRAC_PI_2);
    push_rot(elems, angles, RotationAxis::Z, q, FRAC_PI_2);
}

fn push_cx(elems: &mut Vec<CircuitElement>, angles: &mut Vec<f64>, control: usize, target: usize) {
    push_h(elems, angles, target);
    elems.push(CircuitElement::Fixed(qgd::circuit::FixedGate::Cz {
        a: control,
        b: target,
    }));
    push_h(elems, angles, target);
}

/// Phase-polynomial CCCZ parity network: Gray-code cycles visit every
/// multi-qubit parity once using 14 CX gates, with a +-pi/8 Z rotation at
/// each parity's first appearance. CZ count 14.
pub fn cccz_parity_network() -> (ParameterizedCircuit, AngleVector) {
    let cx_seq: [(usize, usize); 14] = [
        (0, 3), (1, 3), (0, 3), (2, 3), (0, 3), (1, 3), (0, 3), (2, 3),
        (0, 2), (1, 2), (0, 2), (1, 2),
        (0, 1), (0, 1),
    ];
    let pi8 = std::f64::consts::PI / 8.0;
    let mut elems = Vec::new();
    let mut angles = Vec::new();
    for q in 0..4 {
        push_rot(&mut elems, &mut angles, RotationAxis::Z, q, pi8);
    }
    let mut labels: [u8; 4] = [1, 2, 4, 8];
    let mut seen = std::collections::HashSet::new();
    for &(a, b) in &cx_seq {
        push_cx(&mut elems, &mut angles, a, b);
        labels[b] ^= labels[a];
        let m = labels[b];
        if m.count_ones() >= 2 && seen.insert(m) {
            // odd-weight parities enter with +, even-weight with -
            let sign = if m.count_ones() % 2 == 1 { 1.0 } else { -1.0 };
            push_rot(&mut elems, &mut angles, RotationAxis::Z, b, sign * pi8);
        }
    }
    elems.reverse();
    let circuit = ParameterizedCircuit::new(4, elems).expect("valid circuit");
    (circuit, AngleVector(angles))
}

/// The 14 CZ placements of [`cccz_parity_network`], as a structure.
pub fn cccz_fourteen_cz_structure() -> qgd::structure::CircuitStructure {
    qgd::structure::CircuitStructure::from_sequence(vec![
        (0, 3), (1, 3), (0, 3), (2, 3), (0, 3), (1, 3), (0, 3), (2, 3),
        (0, 2), (1, 2), (0, 2), (1, 2),
        (0, 1), (0, 1),
    ])
}

/// The textbook phase-polynomial CCZ circuit: six CZ gates (CX conjugated
/// by Hadamards) interleaved with +-pi/4 Z rotations. CZ count 6, depth 6.
pub fn textbook_ccz() -> (ParameterizedCircuit, AngleVector) {
    let t = FRAC_PI_4;
    let mut elems = Vec::new();
    let mut angles = Vec::new();
    // temporal order; reversed into matrix order below
    push_cx(&mut elems, &mut angles, 1, 2);
    push_rot(&mut elems, &mut angles, RotationAxis::Z, 2, -t);
    push_cx(&mut elems, &mut angles, 0, 2);
    push_rot(&mut elems, &mut angles, RotationAxis::Z, 2, t);
    push_cx(&mut elems, &mut angles, 1, 2);
    push_rot(&mut elems, &mut angles, RotationAxis::Z, 2, -t);
    push_cx(&mut elems, &mut angles, 0, 2);
    push_rot(&mut elems, &mut angles, RotationAxis::Z, 2, t);
    push_rot(&mut elems, &mut angles, RotationAxis::Z, 1, t);
    push_cx(&mut elems, &mut angles, 0, 1);
    push_rot(&mut elems, &mut angles, RotationAxis::Z, 1, -t);
    push_rot(&mut elems, &mut angles, RotationAxis::Z, 0, t);
    push_cx(&mut elems, &mut angles, 0, 1);
    elems.reverse();
    let circuit = ParameterizedCircuit::new(3, elems).expect("valid circuit");
    (circuit, AngleVector(angles))
}
