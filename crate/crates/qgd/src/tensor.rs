//! Dense complex linear algebra and gate construction for registers of up
//! to `N_MAX` qubits.
//!
//! Qubit index 0 is the most-significant bit of a basis-state index: on an
//! n-qubit register, qubit q addresses bit (n-1-q) of the row/column index.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Default register-size cap. All bundled targets fit in 6 qubits.
pub const N_MAX: usize = 6;

/// Default absolute tolerance for unitarity / equality checks.
pub const TOL: f64 = 1e-12;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Rotation generator axis. Both Pauli generators square to the identity,
/// which is what the closed-form angle update relies on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RotationAxis {
    X,
    Z,
}

/// Dense square complex matrix in row-major order. The universal carrier
/// for states, gates and projectors.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    dim: usize,
    data: Vec<Complex64>,
}

impl ComplexMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![ZERO; dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.data[i * dim + i] = ONE;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<Complex64>]) -> Result<Self> {
        let dim = rows.len();
        let mut data = Vec::with_capacity(dim * dim);
        for r in rows {
            if r.len() != dim {
                return Err(Error::DimensionMismatch(format!(
                    "row length {} in {}x{} matrix",
                    r.len(),
                    dim,
                    dim
                )));
            }
            data.extend_from_slice(r);
        }
        Ok(Self { dim, data })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.dim + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: Complex64) {
        self.data[i * self.dim + j] = v;
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn matmul(&self, rhs: &ComplexMatrix) -> Result<ComplexMatrix> {
        if self.dim != rhs.dim {
            return Err(Error::DimensionMismatch(format!(
                "matmul {}x{} * {}x{}",
                self.dim, self.dim, rhs.dim, rhs.dim
            )));
        }
        let d = self.dim;
        let mut out = ComplexMatrix::zeros(d);
        for i in 0..d {
            for k in 0..d {
                let a = self.data[i * d + k];
                if a == ZERO {
                    continue;
                }
                let row = &rhs.data[k * d..(k + 1) * d];
                let dst = &mut out.data[i * d..(i + 1) * d];
                for (o, b) in dst.iter_mut().zip(row) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn dagger(&self) -> ComplexMatrix {
        let d = self.dim;
        let mut out = ComplexMatrix::zeros(d);
        for i in 0..d {
            for j in 0..d {
                out.data[j * d + i] = self.data[i * d + j].conj();
            }
        }
        out
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.dim).map(|i| self.data[i * self.dim + i]).sum()
    }

    pub fn scale(&self, s: Complex64) -> ComplexMatrix {
        ComplexMatrix {
            dim: self.dim,
            data: self.data.iter().map(|x| x * s).collect(),
        }
    }

    /// max_ij |self_ij - rhs_ij|
    pub fn max_abs_diff(&self, rhs: &ComplexMatrix) -> f64 {
        assert_eq!(self.dim, rhs.dim);
        self.data
            .iter()
            .zip(&rhs.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// max-entry |U^dag U - I|
    pub fn unitarity_defect(&self) -> f64 {
        let g = self.dagger().matmul(self).expect("square");
        g.max_abs_diff(&ComplexMatrix::identity(self.dim))
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        self.unitarity_defect() < tol
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.max_abs_diff(&self.dagger()) < tol
    }

    /// Left-multiply in place by a single-qubit gate embedded on `qubit`:
    /// self <- embed(g, qubit) * self, in O(dim^2).
    pub fn apply_single_qubit_left(&mut self, g: &[[Complex64; 2]; 2], qubit: usize, n: usize) {
        let d = self.dim;
        debug_assert_eq!(d, 1 << n);
        let mask = 1usize << (n - 1 - qubit);
        for i0 in 0..d {
            if i0 & mask != 0 {
                continue;
            }
            let i1 = i0 | mask;
            for j in 0..d {
                let a = self.data[i0 * d + j];
                let b = self.data[i1 * d + j];
                self.data[i0 * d + j] = g[0][0] * a + g[0][1] * b;
                self.data[i1 * d + j] = g[1][0] * a + g[1][1] * b;
            }
        }
    }

    /// Right-multiply in place: self <- self * embed(g, qubit).
    pub fn apply_single_qubit_right(&mut self, g: &[[Complex64; 2]; 2], qubit: usize, n: usize) {
        let d = self.dim;
        debug_assert_eq!(d, 1 << n);
        let mask = 1usize << (n - 1 - qubit);
        for i in 0..d {
            let row = &mut self.data[i * d..(i + 1) * d];
            for j0 in 0..d {
                if j0 & mask != 0 {
                    continue;
                }
                let j1 = j0 | mask;
                let a = row[j0];
                let b = row[j1];
                row[j0] = a * g[0][0] + b * g[1][0];
                row[j1] = a * g[0][1] + b * g[1][1];
            }
        }
    }

    /// self <- CZ(a,b) * self. CZ is diagonal, so this just flips signs on
    /// rows whose index has both qubit bits set.
    pub fn apply_cz_left(&mut self, a: usize, b: usize, n: usize) {
        let d = self.dim;
        let mask = (1usize << (n - 1 - a)) | (1usize << (n - 1 - b));
        for i in 0..d {
            if i & mask == mask {
                for v in &mut self.data[i * d..(i + 1) * d] {
                    *v = -*v;
                }
            }
        }
    }

    /// self <- self * CZ(a,b).
    pub fn apply_cz_right(&mut self, a: usize, b: usize, n: usize) {
        let d = self.dim;
        let mask = (1usize << (n - 1 - a)) | (1usize << (n - 1 - b));
        for i in 0..d {
            let row = &mut self.data[i * d..(i + 1) * d];
            for (j, v) in row.iter_mut().enumerate() {
                if j & mask == mask {
                    *v = -*v;
                }
            }
        }
    }

    /// tr(embed(g, qubit) * self) in O(dim).
    pub fn trace_single_qubit_product(
        &self,
        g: &[[Complex64; 2]; 2],
        qubit: usize,
        n: usize,
    ) -> Complex64 {
        let d = self.dim;
        let mask = 1usize << (n - 1 - qubit);
        let mut t = ZERO;
        for i in 0..d {
            let bi = usize::from(i & mask != 0);
            t += g[bi][bi] * self.data[i * d + i];
            t += g[bi][1 - bi] * self.data[(i ^ mask) * d + i];
        }
        t
    }
}

/// Serialized form: {dim, entries: [[re, im], ...]} row-major.
#[derive(Serialize, Deserialize)]
struct MatrixJson {
    dim: usize,
    entries: Vec<[f64; 2]>,
}

impl Serialize for ComplexMatrix {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        MatrixJson {
            dim: self.dim,
            entries: self.data.iter().map(|c| [c.re, c.im]).collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for ComplexMatrix {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let j = MatrixJson::deserialize(d)?;
        if j.entries.len() != j.dim * j.dim {
            return Err(serde::de::Error::custom(format!(
                "matrix dim {} requires {} entries, got {}",
                j.dim,
                j.dim * j.dim,
                j.entries.len()
            )));
        }
        Ok(ComplexMatrix {
            dim: j.dim,
            data: j
                .entries
                .iter()
                .map(|[re, im]| Complex64::new(*re, *im))
                .collect(),
        })
    }
}

/// 2x2 rotation R_A(theta) = exp(-i theta A / 2) = cos(theta/2) I - i sin(theta/2) A.
pub fn rotation_2x2(axis: RotationAxis, theta: f64) -> [[Complex64; 2]; 2] {
    let c = (theta / 2.0).cos();
    let s = (theta / 2.0).sin();
    let mis = Complex64::new(0.0, -s);
    match axis {
        RotationAxis::X => [
            [Complex64::new(c, 0.0), mis],
            [mis, Complex64::new(c, 0.0)],
        ],
        RotationAxis::Z => [
            [Complex64::new(c, -s), ZERO],
            [ZERO, Complex64::new(c, s)],
        ],
    }
}

/// Rotation gate as a full 2x2 matrix.
pub fn rotation_gate(axis: RotationAxis, theta: f64) -> Result<ComplexMatrix> {
    if !theta.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "non-finite rotation angle {theta}"
        )));
    }
    let g = rotation_2x2(axis, theta);
    ComplexMatrix::from_rows(&[vec![g[0][0], g[0][1]], vec![g[1][0], g[1][1]]])
}

/// Embed a k-qubit gate onto `targets` within an n-qubit register.
/// Entry (i,j) is gate[(target bits of i), (target bits of j)] when all
/// non-target bits of i and j agree, 0 otherwise.
pub fn embed(gate: &ComplexMatrix, targets: &[usize], n: usize) -> Result<ComplexMatrix> {
    let k = targets.len();
    if gate.dim() != 1 << k {
        return Err(Error::DimensionMismatch(format!(
            "gate dim {} does not match {} targets",
            gate.dim(),
            k
        )));
    }
    let mut seen = vec![false; n];
    for &t in targets {
        if t >= n {
            return Err(Error::InvalidArgument(format!(
                "target qubit {t} out of range for {n}-qubit register"
            )));
        }
        if seen[t] {
            return Err(Error::InvalidArgument(format!("duplicate target qubit {t}")));
        }
        seen[t] = true;
    }
    let dim = 1usize << n;
    let masks: Vec<usize> = targets.iter().map(|&t| 1usize << (n - 1 - t)).collect();
    let rest_mask = !masks.iter().fold(0usize, |m, &b| m | b) & (dim - 1);
    let sub_index = |i: usize| -> usize {
        masks
            .iter()
            .fold(0usize, |acc, &m| (acc << 1) | usize::from(i & m != 0))
    };
    let mut out = ComplexMatrix::zeros(dim);
    for i in 0..dim {
        let si = sub_index(i);
        for j in 0..dim {
            if i & rest_mask != j & rest_mask {
                continue;
            }
            out.set(i, j, gate.get(si, sub_index(j)));
        }
    }
    Ok(out)
}

/// Gates in the shipped registry: identity and the C..CZ family, all
/// diagonal with -1 on the all-ones basis state.
pub fn named_gate(name: &str) -> Result<ComplexMatrix> {
    let n = match name.to_ascii_lowercase().as_str() {
        "i" => return Ok(ComplexMatrix::identity(2)),
        "z" => 1,
        "cz" => 2,
        "ccz" => 3,
        "cccz" => 4,
        other => {
            return Err(Error::InvalidArgument(format!("unknown gate name '{other}'")));
        }
    };
    let dim = 1usize << n;
    let mut m = ComplexMatrix::identity(dim);
    m.set(dim - 1, dim - 1, -ONE);
    Ok(m)
}

/// Haar-ish random unitary by Gram-Schmidt of a complex Gaussian matrix.
pub fn random_unitary<R: rand::Rng>(dim: usize, rng: &mut R) -> ComplexMatrix {
    use rand::distributions::Distribution;
    let normal = rand_distr_normal();
    let mut cols: Vec<Vec<Complex64>> = (0..dim)
        .map(|_| {
            (0..dim)
                .map(|_| Complex64::new(normal.sample(rng), normal.sample(rng)))
                .collect()
        })
        .collect();
    for c in 0..dim {
        for p in 0..c {
            let proj: Complex64 = (0..dim).map(|i| cols[p][i].conj() * cols[c][i]).sum();
            for i in 0..dim {
                let sub = proj * cols[p][i];
                cols[c][i] -= sub;
            }
        }
        let norm: f64 = cols[c].iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        for v in &mut cols[c] {
            *v /= norm;
        }
    }
    let mut m = ComplexMatrix::zeros(dim);
    for (j, col) in cols.iter().enumerate() {
        for (i, &v) in col.iter().enumerate() {
            m.set(i, j, v);
        }
    }
    m
}

fn rand_distr_normal() -> impl rand::distributions::Distribution<f64> {
    // Box-Muller via two uniforms; avoids a rand_distr dependency.
    struct BoxMuller;
    impl rand::distributions::Distribution<f64> for BoxMuller {
        fn sample<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> f64 {
            let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
            let u2: f64 = rng.gen_range(0.0..1.0);
            (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
        }
    }
    BoxMuller
}
