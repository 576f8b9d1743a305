//! Sequential rotation-angle optimizer.
//!
//! Each update maximizes |tr(V_T^dag V P)|^2 over a single rotation angle
//! in closed form: with the circuit split as V = V' R_k(theta_k + theta) V''
//! and M = V'' P V_T^dag V', the objective is
//!     a cos(theta) + b sin(theta) + c
//! where a, b, c come from the two complex endpoint traces
//! t0 = tr(R_k(theta_k) M) and tpi = tr(R_k(theta_k + pi) M).
//! The cache M is carried between updates along a zigzag sweep order
//! K -> K-1 -> ... -> 1 -> 2 -> ... -> K, so each step costs a handful of
//! O(dim^2) gate applications instead of a full circuit rebuild.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::circuit::{AngleVector, CircuitElement, FixedGate, ParameterizedCircuit};
use crate::objective::TargetSpec;
use crate::tensor::{rotation_2x2, ComplexMatrix, RotationAxis};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    /// Maximum number of zigzag periods.
    pub max_sweeps: usize,
    /// Stop when 1 - normalized fidelity drops below this.
    pub convergence_eps: f64,
    /// Stall threshold on the per-period objective gain, as a fraction of
    /// D^2. Three consecutive stalled periods stop the run.
    pub stall_eps: f64,
    pub stall_periods: usize,
    pub rng_seed: u64,
    /// Record the per-period objective trace in the outcome.
    pub record_trace: bool,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            max_sweeps: 10_000,
            convergence_eps: crate::objective::CONVERGENCE_EPS,
            stall_eps: 1e-14,
            stall_periods: 3,
            rng_seed: 0,
            record_trace: false,
        }
    }
}

impl OptimizerConfig {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            rng_seed: seed,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Down,
    Up,
}

#[derive(Debug, Clone)]
enum WallOp {
    Cz(usize, usize),
    Dense {
        full: ComplexMatrix,
        full_dagger: ComplexMatrix,
    },
}

struct RotationSlot {
    axis: RotationAxis,
    qubit: usize,
    param_id: usize,
}

/// Circuit flattened into alternating form: walls[k] is the fixed block W_k
/// between rotation k and rotation k+1, ops stored in temporal order.
struct Compiled {
    n: usize,
    rotations: Vec<RotationSlot>,
    walls: Vec<Vec<WallOp>>,
}

fn compile(circuit: &ParameterizedCircuit) -> Result<Compiled> {
    let n = circuit.n_qubits;
    let mut rotations = Vec::new();
    let mut walls = vec![Vec::new()];
    for e in circuit.elements.iter().rev() {
        match e {
            CircuitElement::Fixed(FixedGate::Cz { a, b }) => {
                walls.last_mut().unwrap().push(WallOp::Cz(*a, *b));
            }
            CircuitElement::Fixed(FixedGate::Dense { matrix, targets }) => {
                let full = crate::tensor::embed(matrix, targets, n)?;
                let full_dagger = full.dagger();
                walls
                    .last_mut()
                    .unwrap()
                    .push(WallOp::Dense { full, full_dagger });
            }
            CircuitElement::Rotation {
                axis,
                target,
                param_id,
            } => {
                rotations.push(RotationSlot {
                    axis: *axis,
                    qubit: *target,
                    param_id: *param_id,
                });
                walls.push(Vec::new());
            }
        }
    }
    Ok(Compiled {
        n,
        rotations,
        walls,
    })
}

impl Compiled {
    fn k(&self) -> usize {
        self.rotations.len()
    }

    /// m <- W * m, ops applied in temporal order.
    fn left_apply_wall(&self, wall: usize, m: &mut ComplexMatrix) {
        for op in &self.walls[wall] {
            match op {
                WallOp::Cz(a, b) => m.apply_cz_left(*a, *b, self.n),
                WallOp::Dense { full, .. } => *m = full.matmul(m).expect("dims"),
            }
        }
    }

    /// m <- m * W.
    fn right_apply_wall(&self, wall: usize, m: &mut ComplexMatrix) {
        for op in self.walls[wall].iter().rev() {
            match op {
                WallOp::Cz(a, b) => m.apply_cz_right(*a, *b, self.n),
                WallOp::Dense { full, .. } => *m = m.matmul(full).expect("dims"),
            }
        }
    }

    /// m <- W^dag * m.
    fn left_apply_wall_dagger(&self, wall: usize, m: &mut ComplexMatrix) {
        for op in self.walls[wall].iter().rev() {
            match op {
                WallOp::Cz(a, b) => m.apply_cz_left(*a, *b, self.n),
                WallOp::Dense { full_dagger, .. } => *m = full_dagger.matmul(m).expect("dims"),
            }
        }
    }

    /// m <- m * W^dag.
    fn right_apply_wall_dagger(&self, wall: usize, m: &mut ComplexMatrix) {
        for op in &self.walls[wall] {
            match op {
                WallOp::Cz(a, b) => m.apply_cz_right(*a, *b, self.n),
                WallOp::Dense { full_dagger, .. } => *m = m.matmul(full_dagger).expect("dims"),
            }
        }
    }
}

/// Mutable state of one optimization run: the angle vector, the cursor of
/// the zigzag sweep, and the cached M = V'' P V_T^dag V' for that cursor.
pub struct SweepState<'a> {
    spec: &'a TargetSpec,
    compiled: Compiled,
    /// P V_T^dag, the fixed inner factor of M.
    a_matrix: ComplexMatrix,
    /// Angles indexed by param id.
    pub angles: Vec<f64>,
    m: ComplexMatrix,
    /// 1-based rotation index of the current split.
    cursor: usize,
    direction: Direction,
    pub objective: f64,
    pub update_count: usize,
}

impl<'a> SweepState<'a> {
    pub fn new(
        circuit: &ParameterizedCircuit,
        spec: &'a TargetSpec,
        angles: Vec<f64>,
    ) -> Result<Self> {
        if circuit.dim() != spec.v_t.dim() {
            return Err(Error::DimensionMismatch(format!(
                "circuit dim {} vs target dim {}",
                circuit.dim(),
                spec.v_t.dim()
            )));
        }
        if angles.len() != circuit.num_params() {
            return Err(Error::InvalidArgument("angle count mismatch".into()));
        }
        let compiled = compile(circuit)?;
        if compiled.k() == 0 {
            return Err(Error::InvalidArgument(
                "circuit has no rotation parameters to optimize".into(),
            ));
        }
        let a_matrix = spec.p_vt_dagger();
        let mut state = Self {
            spec,
            compiled,
            a_matrix,
            angles,
            m: ComplexMatrix::zeros(0),
            cursor: 0,
            direction: Direction::Down,
            objective: 0.0,
            update_count: 0,
        };
        let k = state.compiled.k();
        state.set_cursor(k, Direction::Down);
        state.objective = state.objective_from_cache();
        Ok(state)
    }

    pub fn cursor(&self) -> usize {
        self.cursor
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    /// Current |tr(V_T^dag V P)|^2 as tracked by the cache.
    pub fn objective(&self) -> f64 {
        self.objective
    }

    /// Current angles, indexed by parameter id.
    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    fn theta_at_slot(&self, slot: usize) -> f64 {
        self.angles[self.compiled.rotations[slot - 1].param_id]
    }

    fn set_theta_at_slot(&mut self, slot: usize, theta: f64) {
        let p = self.compiled.rotations[slot - 1].param_id;
        self.angles[p] = theta;
    }

    /// Rebuild M = V'' P V_T^dag V' from scratch for the given cursor.
    fn build_cache(&self, cursor: usize) -> ComplexMatrix {
        let k_total = self.compiled.k();
        let mut m = self.a_matrix.clone();
        // m <- m * V', V' = W_K R_K ... R_{cursor+1} W_cursor
        for slot in (cursor + 1..=k_total).rev() {
            if slot == k_total {
                self.compiled.right_apply_wall(k_total, &mut m);
            }
            let rot = &self.compiled.rotations[slot - 1];
            let g = rotation_2x2(rot.axis, self.angles[rot.param_id]);
            m.apply_single_qubit_right(&g, rot.qubit, self.compiled.n);
            self.compiled.right_apply_wall(slot - 1, &mut m);
        }
        if cursor == k_total {
            self.compiled.right_apply_wall(k_total, &mut m);
        }
        // m <- V'' * m, V'' = W_{cursor-1} R_{cursor-1} ... R_1 W_0
        self.compiled.left_apply_wall(0, &mut m);
        for slot in 1..cursor {
            let rot = &self.compiled.rotations[slot - 1];
            let g = rotation_2x2(rot.axis, self.angles[rot.param_id]);
            m.apply_single_qubit_left(&g, rot.qubit, self.compiled.n);
            self.compiled.left_apply_wall(slot, &mut m);
        }
        m
    }

    fn set_cursor(&mut self, cursor: usize, direction: Direction) {
        self.cursor = cursor;
        self.direction = direction;
        self.m = self.build_cache(cursor);
    }

    /// Refresh M from scratch at the current cursor (bounds float drift on
    /// long runs).
    pub fn rebuild_cache(&mut self) {
        self.m = self.build_cache(self.cursor);
    }

    /// Max-entry difference between the cached M and a from-scratch
    /// recomputation.
    pub fn cache_defect(&self) -> f64 {
        self.build_cache(self.cursor).max_abs_diff(&self.m)
    }

    /// The two complex endpoint traces t0 = tr(R_k(theta_k) M) and
    /// tpi = tr(R_k(theta_k + pi) M).
    pub fn endpoint_traces(&self) -> (Complex64, Complex64) {
        let rot = &self.compiled.rotations[self.cursor - 1];
        let theta = self.theta_at_slot(self.cursor);
        let g0 = rotation_2x2(rot.axis, theta);
        let gpi = rotation_2x2(rot.axis, theta + std::f64::consts::PI);
        (
            self.m.trace_single_qubit_product(&g0, rot.qubit, self.compiled.n),
            self.m.trace_single_qubit_product(&gpi, rot.qubit, self.compiled.n),
        )
    }

    /// Objective |tr(R_k(theta_k) M)|^2 evaluated from the cache.
    pub fn objective_from_cache(&self) -> f64 {
        let rot = &self.compiled.rotations[self.cursor - 1];
        let g = rotation_2x2(rot.axis, self.theta_at_slot(self.cursor));
        self.m
            .trace_single_qubit_product(&g, rot.qubit, self.compiled.n)
            .norm_sqr()
    }

    /// Sinusoid coefficients (a, b, c) of the objective as a function of the
    /// offset applied to the cursor rotation's angle.
    pub fn sinusoid_coefficients(&self) -> (f64, f64, f64) {
        let (t0, tpi) = self.endpoint_traces();
        let a = (t0.norm_sqr() - tpi.norm_sqr()) / 2.0;
        let b = (t0 * tpi.conj()).re;
        let c = (t0.norm_sqr() + tpi.norm_sqr()) / 2.0;
        (a, b, c)
    }

    /// Closed-form update of the cursor rotation's angle. Returns the chosen
    /// offset. The objective never decreases.
    pub fn angle_update(&mut self) -> f64 {
        let (a, b, c) = self.sinusoid_coefficients();
        // flat direction: any angle is optimal, keep the current one
        let theta_check = if a == 0.0 && b == 0.0 {
            0.0
        } else {
            b.atan2(a)
        };
        let amp = (a * a + b * b).sqrt();
        let new_objective = amp + c;
        debug_assert!(new_objective >= self.objective - 1e-9 * self.objective.max(1.0));
        self.objective = new_objective;
        let theta = self.theta_at_slot(self.cursor);
        self.set_theta_at_slot(self.cursor, theta + theta_check);
        self.update_count += 1;
        theta_check
    }

    /// Move the cursor one step along the zigzag, updating M by the
    /// closed-form recurrence (no full circuit rebuild).
    pub fn advance_cursor(&mut self) {
        let k_total = self.compiled.k();
        if k_total == 1 {
            // degenerate sweep: M does not depend on the single angle
            return;
        }
        let k = self.cursor;
        let go_down = match self.direction {
            Direction::Down => k > 1,
            Direction::Up => false,
        };
        if go_down {
            // M <- R_{k-1}(-theta_{k-1}) W_{k-1}^dag M R_k(theta_k) W_{k-1}
            let n = self.compiled.n;
            let rk = &self.compiled.rotations[k - 1];
            let g = rotation_2x2(rk.axis, self.angles[rk.param_id]);
            self.m.apply_single_qubit_right(&g, rk.qubit, n);
            self.compiled.right_apply_wall(k - 1, &mut self.m);
            self.compiled.left_apply_wall_dagger(k - 1, &mut self.m);
            let rprev = &self.compiled.rotations[k - 2];
            let ginv = rotation_2x2(rprev.axis, -self.angles[rprev.param_id]);
            self.m.apply_single_qubit_left(&ginv, rprev.qubit, n);
            self.cursor = k - 1;
            if self.cursor == 1 {
                self.direction = Direction::Up;
            }
        } else {
            // M <- W_k R_k(theta_k) M W_k^dag R_{k+1}(-theta_{k+1})
            let n = self.compiled.n;
            let rk = &self.compiled.rotations[k - 1];
            let g = rotation_2x2(rk.axis, self.angles[rk.param_id]);
            self.m.apply_single_qubit_left(&g, rk.qubit, n);
            self.compiled.left_apply_wall(k, &mut self.m);
            self.compiled.right_apply_wall_dagger(k, &mut self.m);
            let rnext = &self.compiled.rotations[k];
            let ginv = rotation_2x2(rnext.axis, -self.angles[rnext.param_id]);
            self.m.apply_single_qubit_right(&ginv, rnext.qubit, n);
            self.cursor = k + 1;
            if self.cursor == k_total {
                self.direction = Direction::Down;
            }
        }
    }

    pub fn d_squared(&self) -> f64 {
        let d = self.spec.subspace.d as f64;
        d * d
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OptimizeOutcome {
    pub angles: Vec<f64>,
    /// Final |tr(V_T^dag V P)|^2 from the optimizer state.
    pub objective: f64,
    /// objective / D^2.
    pub fidelity: f64,
    pub converged: bool,
    /// Zigzag periods consumed.
    pub sweeps: usize,
    /// Per-period objective values (only when record_trace is set).
    pub trace: Vec<f64>,
}

/// Run the full sequential optimization: random initial angles from the
/// config seed, zigzag sweeps until convergence, stall, or the sweep cap.
/// Deterministic given the seed. Non-convergence is an outcome, not an error.
pub fn optimize(
    circuit: &ParameterizedCircuit,
    spec: &TargetSpec,
    config: &OptimizerConfig,
) -> Result<OptimizeOutcome> {
    let k = circuit.num_params();
    let d2 = {
        let d = spec.subspace.d as f64;
        d * d
    };
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    let angles: Vec<f64> = (0..k)
        .map(|_| rng.gen_range(0.0..2.0 * std::f64::consts::PI))
        .collect();

    if k == 0 {
        let v = circuit.evaluate(&AngleVector::zeros(0))?;
        let objective = crate::objective::trace_objective(spec, &v)?;
        let fidelity = objective / d2;
        return Ok(OptimizeOutcome {
            angles,
            objective,
            fidelity,
            converged: 1.0 - fidelity < config.convergence_eps,
            sweeps: 0,
            trace: vec![],
        });
    }

    let mut state = SweepState::new(circuit, spec, angles)?;
    let period_len = if k == 1 { 1 } else { 2 * k - 2 };
    let stall_threshold = config.stall_eps * d2;
    let mut stalled = 0usize;
    let mut trace = Vec::new();
    let mut converged = false;
    let mut sweeps = 0usize;

    while sweeps < config.max_sweeps {
        let before = state.objective;
        for _ in 0..period_len {
            state.angle_update();
            state.advance_cursor();
        }
        sweeps += 1;
        if config.record_trace {
            trace.push(state.objective);
        }
        if 1.0 - state.objective / d2 < config.convergence_eps {
            converged = true;
            break;
        }
        if state.objective - before < stall_threshold {
            stalled += 1;
            if stalled >= config.stall_periods {
                break;
            }
        } else {
            stalled = 0;
        }
        // bound float drift in the carried cache on long runs
        if sweeps % 256 == 0 {
            state.rebuild_cache();
        }
    }

    Ok(OptimizeOutcome {
        angles: state.angles.clone(),
        objective: state.objective,
        fidelity: state.objective / d2,
        converged,
        sweeps,
        trace,
    })
}
