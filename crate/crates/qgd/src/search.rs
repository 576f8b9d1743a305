//! Search pipeline: template instantiation over enumerated structures,
//! massively-restarted optimization, budget escalation, and statistical
//! gate pruning.
//!
//! Work is task-parallel over independent (structure, restart) pairs. Every
//! task's seed is derived from (base seed, structure index, restart index),
//! so the result set is identical for any worker count.

use std::collections::HashSet;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::circuit::{
    apply_template, canonical_angle, AngleVector, CircuitFile, ParameterizedCircuit,
    TemplateStyle,
};
use crate::objective::{normalized_fidelity, TargetSpec, TargetSpecFile};
use crate::structure::{
    enumerate_count, enumerate_depth, CircuitStructure, ConnectivityGraph, DedupSymmetry,
};
use crate::sweep::{optimize, OptimizerConfig};
use crate::tensor::ComplexMatrix;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Budget {
    Count(usize),
    Depth(usize),
}

#[derive(Clone)]
pub struct SearchJob {
    pub spec: TargetSpec,
    pub graph: ConnectivityGraph,
    pub budget: Budget,
    pub restarts_per_structure: usize,
    pub template_style: TemplateStyle,
    pub optimizer: OptimizerConfig,
    pub worker_count: usize,
    pub base_seed: u64,
    /// Stop once this many solutions are recorded; None exhausts the space.
    pub max_solutions: Option<usize>,
    /// Skip enumeration and optimize exactly these structures instead.
    pub fixed_structures: Option<Vec<CircuitStructure>>,
}

impl SearchJob {
    pub fn new(spec: TargetSpec, graph: ConnectivityGraph, budget: Budget) -> Self {
        Self {
            spec,
            graph,
            budget,
            restarts_per_structure: 100,
            template_style: TemplateStyle::Reduced,
            optimizer: OptimizerConfig::default(),
            worker_count: 1,
            base_seed: 0,
            max_solutions: Some(1),
            fixed_structures: None,
        }
    }
}

/// Increase the two-qubit count or depth budget by one.
pub fn escalate(job: &SearchJob) -> SearchJob {
    let mut next = job.clone();
    next.budget = match job.budget {
        Budget::Count(k) => Budget::Count(k + 1),
        Budget::Depth(d) => Budget::Depth(d + 1),
    };
    next
}

/// A solved circuit with angles, re-verified fidelity and recomputed
/// CZ metrics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecompositionResult {
    pub structure_index: usize,
    pub restart_index: usize,
    pub seed: u64,
    pub sweeps: usize,
    pub fidelity: f64,
    pub cz_count: usize,
    pub cz_depth: usize,
    pub structure: CircuitStructure,
    pub circuit: CircuitFile,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SearchSummary {
    pub structures_tried: usize,
    pub restarts_run: usize,
    pub solutions: usize,
    /// False when the run stopped early (solution cap) before exhausting
    /// the structure stream.
    pub complete: bool,
}

#[derive(Debug)]
pub enum SearchEvent {
    Result(DecompositionResult),
    StructureDone(usize),
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E3779B97F4A7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// Per-task seed: a pure function of (base seed, structure, restart), never
/// of thread identity or scheduling.
pub fn task_seed(base_seed: u64, structure_index: usize, restart_index: usize) -> u64 {
    splitmix64(splitmix64(splitmix64(base_seed) ^ structure_index as u64) ^ restart_index as u64)
}

/// Qubit-relabeling permutation matrix: basis-state bit at qubit q moves to
/// qubit perm[q].
pub fn permutation_matrix(perm: &[usize], n: usize) -> ComplexMatrix {
    let dim = 1usize << n;
    let mut m = ComplexMatrix::zeros(dim);
    for i in 0..dim {
        let mut j = 0usize;
        for q in 0..n {
            let bit = (i >> (n - 1 - q)) & 1;
            j |= bit << (n - 1 - perm[q]);
        }
        m.set(j, i, crate::tensor::ONE);
    }
    m
}

/// Dedup group for a (graph, target) pair: connectivity automorphisms that
/// also fix the target gate and its input subspace, plus sequence reversal
/// when the target is self-adjoint.
pub fn dedup_symmetry_for(graph: &ConnectivityGraph, spec: &TargetSpec) -> DedupSymmetry {
    let n = graph.n_qubits;
    let tol = 1e-9;
    let perms: Vec<Vec<usize>> = graph
        .automorphisms()
        .into_iter()
        .filter(|perm| {
            let pm = permutation_matrix(perm, n);
            let pmd = pm.dagger();
            let vt = pm.matmul(&spec.v_t).unwrap().matmul(&pmd).unwrap();
            if vt.max_abs_diff(&spec.v_t) > tol {
                return false;
            }
            let p = pm.matmul(&spec.subspace.p).unwrap().matmul(&pmd).unwrap();
            p.max_abs_diff(&spec.subspace.p) <= tol
        })
        .collect();
    let commutes = {
        let vp = spec.v_t.matmul(&spec.subspace.p).unwrap();
        let pv = spec.subspace.p.matmul(&spec.v_t).unwrap();
        vp.max_abs_diff(&pv) <= tol
    };
    let reversal = spec.v_t.is_hermitian(tol) && commutes;
    DedupSymmetry::new(perms, reversal)
}

/// Task-parallel map with a fixed worker count. Output order is the input
/// order regardless of scheduling.
pub struct Executor {
    #[cfg(feature = "parallel")]
    pool: Option<rayon::ThreadPool>,
    #[cfg(not(feature = "parallel"))]
    _workers: usize,
}

impl Executor {
    pub fn new(workers: usize) -> Self {
        #[cfg(feature = "parallel")]
        {
            let pool = if workers > 1 {
                Some(
                    rayon::ThreadPoolBuilder::new()
                        .num_threads(workers)
                        .build()
                        .expect("thread pool"),
                )
            } else {
                None
            };
            Self { pool }
        }
        #[cfg(not(feature = "parallel"))]
        {
            Self { _workers: workers }
        }
    }

    pub fn map<T: Send, F: Fn(usize) -> T + Sync + Send>(&self, count: usize, f: F) -> Vec<T> {
        #[cfg(feature = "parallel")]
        if let Some(pool) = &self.pool {
            use rayon::prelude::*;
            return pool.install(|| (0..count).into_par_iter().map(f).collect());
        }
        (0..count).map(f).collect()
    }
}

/// One restart on one structure. Returns the re-verified result on
/// convergence.
fn run_task(
    job: &SearchJob,
    structure_index: usize,
    structure: &CircuitStructure,
    circuit: &ParameterizedCircuit,
    restart_index: usize,
) -> Option<DecompositionResult> {
    let seed = task_seed(job.base_seed, structure_index, restart_index);
    let cfg = OptimizerConfig {
        rng_seed: seed,
        ..job.optimizer
    };
    let out = optimize(circuit, &job.spec, &cfg).ok()?;
    if !out.converged {
        return None;
    }
    // re-verify from scratch, never trusting optimizer state
    let angles = AngleVector(out.angles);
    let v = circuit.evaluate(&angles).ok()?;
    let fidelity = normalized_fidelity(&job.spec, &v).ok()?;
    if 1.0 - fidelity >= cfg.convergence_eps {
        return None;
    }
    Some(DecompositionResult {
        structure_index,
        restart_index,
        seed,
        sweeps: out.sweeps,
        fidelity,
        cz_count: structure.cz_count(),
        cz_depth: structure.cz_depth(),
        structure: structure.clone(),
        circuit: CircuitFile::from_circuit(circuit, &angles),
    })
}

/// Drive the search, emitting events in a deterministic order. `skip`
/// contains structure indices already completed (resume support);
/// `prior_solutions` counts solutions already on file.
pub fn run_search(
    job: &SearchJob,
    skip: &HashSet<usize>,
    prior_solutions: usize,
    mut on_event: impl FnMut(SearchEvent) -> Result<()>,
) -> Result<SearchSummary> {
    let n = job.graph.n_qubits;
    if job.spec.v_t.dim() != 1 << n {
        return Err(Error::DimensionMismatch(format!(
            "target dim {} vs {}-qubit connectivity",
            job.spec.v_t.dim(),
            n
        )));
    }
    let sym = dedup_symmetry_for(&job.graph, &job.spec);
    let structures: Box<dyn Iterator<Item = CircuitStructure>> = match &job.fixed_structures {
        Some(list) => {
            for s in list {
                s.validate(&job.graph)?;
            }
            Box::new(list.clone().into_iter())
        }
        None => match job.budget {
            Budget::Count(k) => Box::new(enumerate_count(&job.graph, k, &sym)),
            Budget::Depth(d) => Box::new(enumerate_depth(&job.graph, d, &sym)),
        },
    };
    // structures already own their sym-filtered stream; enumerate with the
    // lifetime pinned locally
    let sym = &sym;
    let _ = sym;

    let executor = Executor::new(job.worker_count.max(1));
    let restarts = job.restarts_per_structure.max(1);
    // chunk size is a pure function of the job, never of the worker count
    let structs_per_chunk = (256 / restarts).max(1);

    let mut summary = SearchSummary {
        structures_tried: 0,
        restarts_run: 0,
        solutions: prior_solutions,
        complete: true,
    };

    let mut iter = structures.enumerate().peekable();
    'outer: while iter.peek().is_some() {
        let mut chunk: Vec<(usize, CircuitStructure, ParameterizedCircuit)> = Vec::new();
        while chunk.len() < structs_per_chunk {
            match iter.next() {
                Some((si, s)) => {
                    if skip.contains(&si) {
                        continue;
                    }
                    let circuit = apply_template(&s, n, job.template_style)?;
                    chunk.push((si, s, circuit));
                }
                None => break,
            }
        }
        if chunk.is_empty() {
            break;
        }
        let tasks = chunk.len() * restarts;
        let outcomes = executor.map(tasks, |t| {
            let (si, s, circuit) = &chunk[t / restarts];
            run_task(job, *si, s, circuit, t % restarts)
        });
        summary.structures_tried += chunk.len();
        summary.restarts_run += tasks;
        for out in outcomes.into_iter().flatten() {
            summary.solutions += 1;
            on_event(SearchEvent::Result(out))?;
        }
        for (si, _, _) in &chunk {
            on_event(SearchEvent::StructureDone(*si))?;
        }
        if let Some(cap) = job.max_solutions {
            if summary.solutions >= cap {
                summary.complete = iter.peek().is_none();
                break 'outer;
            }
        }
    }
    Ok(summary)
}

/// Serializable form of a job for manifests and resume checks.
#[derive(Serialize, Deserialize)]
pub struct JobFile {
    pub target: TargetSpecFile,
    pub graph: ConnectivityGraph,
    pub budget: Budget,
    pub restarts_per_structure: usize,
    pub template_style: TemplateStyle,
    pub optimizer: OptimizerConfig,
    pub base_seed: u64,
    pub max_solutions: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixed_structures: Option<Vec<CircuitStructure>>,
}

impl JobFile {
    pub fn from_job(job: &SearchJob) -> Self {
        Self {
            target: TargetSpecFile::from_spec(&job.spec),
            graph: job.graph.clone(),
            budget: job.budget,
            restarts_per_structure: job.restarts_per_structure,
            template_style: job.template_style,
            optimizer: job.optimizer,
            base_seed: job.base_seed,
            max_solutions: job.max_solutions,
            fixed_structures: job.fixed_structures.clone(),
        }
    }

    /// Content hash of everything that determines the result set. The
    /// worker count is deliberately excluded.
    pub fn config_hash(&self) -> String {
        let json = serde_json::to_string(self).expect("job serializes");
        let mut h = Sha256::new();
        h.update(json.as_bytes());
        hex::encode(h.finalize())
    }
}

/// One line of the write-ahead results file.
#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ResultLine {
    Manifest { config_hash: String },
    Result(DecompositionResult),
    StructureDone { index: usize },
}

#[derive(Serialize, Deserialize)]
pub struct RunManifest {
    pub job: JobFile,
    pub config_hash: String,
    pub totals: SearchSummary,
}

/// Run a search writing JSON-lines results to `out_path`. If the file
/// already holds a partial run of the same job (matching config hash),
/// completed structures are skipped and results are appended.
pub fn run_search_to_file(job: &SearchJob, out_path: &std::path::Path) -> Result<SearchSummary> {
    let job_file = JobFile::from_job(job);
    let hash = job_file.config_hash();

    let mut skip = HashSet::new();
    let mut prior_solutions = 0usize;
    let mut append = false;
    if out_path.exists() && std::fs::metadata(out_path)?.len() > 0 {
        let reader = std::io::BufReader::new(std::fs::File::open(out_path)?);
        let mut lines = reader.lines();
        let first = lines
            .next()
            .transpose()?
            .ok_or_else(|| Error::InvalidArgument("empty results file".into()))?;
        match serde_json::from_str::<ResultLine>(&first)? {
            ResultLine::Manifest { config_hash } if config_hash == hash => {}
            ResultLine::Manifest { .. } => {
                return Err(Error::InvalidArgument(format!(
                    "results file {} belongs to a different job configuration",
                    out_path.display()
                )));
            }
            _ => {
                return Err(Error::InvalidArgument(
                    "results file does not start with a manifest line".into(),
                ));
            }
        }
        for line in lines {
            match serde_json::from_str::<ResultLine>(&line?)? {
                ResultLine::StructureDone { index } => {
                    skip.insert(index);
                }
                ResultLine::Result(_) => prior_solutions += 1,
                ResultLine::Manifest { .. } => {}
            }
        }
        append = true;
    }

    let mut file = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(out_path)?;
    if !append {
        serde_json::to_writer(&mut file, &ResultLine::Manifest { config_hash: hash.clone() })?;
        file.write_all(b"\n")?;
    }

    let summary = run_search(job, &skip, prior_solutions, |event| {
        let line = match event {
            SearchEvent::Result(r) => ResultLine::Result(r),
            SearchEvent::StructureDone(index) => ResultLine::StructureDone { index },
        };
        serde_json::to_writer(&mut file, &line)?;
        file.write_all(b"\n")?;
        Ok(())
    })?;
    file.flush()?;

    let manifest = RunManifest {
        job: job_file,
        config_hash: hash,
        totals: summary.clone(),
    };
    let manifest_path = out_path.with_extension("manifest.json");
    std::fs::write(&manifest_path, serde_json::to_string_pretty(&manifest)?)?;
    Ok(summary)
}

/// Thresholds for the statistical pruning pass.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PruneThresholds {
    /// |theta| window (radians, after canonicalization) counted as "near zero".
    pub near_zero_delta: f64,
    /// Fraction of converged runs inside the window for a gate to qualify.
    pub near_zero_fraction: f64,
    /// Circular resultant length below which a distribution counts as
    /// "almost even".
    pub dispersion_resultant: f64,
    /// Minimum converged samples before the dispersion rule applies.
    pub min_samples: usize,
    /// Restarts of the verify-by-reoptimization step after each removal.
    pub reopt_restarts: usize,
}

impl Default for PruneThresholds {
    fn default() -> Self {
        Self {
            near_zero_delta: 0.01,
            near_zero_fraction: 0.9,
            dispersion_resultant: 0.2,
            min_samples: 1000,
            reopt_restarts: 50,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RotationStats {
    pub param_id: usize,
    pub circular_mean: f64,
    /// Circular resultant length R-bar in [0, 1]; 0 is uniform, 1 is a
    /// point mass.
    pub resultant_length: f64,
    pub fraction_near_zero: f64,
}

/// Distribution of converged rotation angles over many restarts.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AngleStatistics {
    pub total_runs: usize,
    pub converged_runs: usize,
    pub per_rotation: Vec<RotationStats>,
    /// Canonicalized samples, indexed [param_id][converged run].
    pub samples: Vec<Vec<f64>>,
}

/// Optimize `runs` times from fresh random angles and summarize the
/// converged angle distributions. Non-converged runs are counted but
/// excluded from the statistics.
pub fn collect_angle_statistics(
    circuit: &ParameterizedCircuit,
    spec: &TargetSpec,
    runs: usize,
    base_seed: u64,
    optimizer: &OptimizerConfig,
    executor: &Executor,
    near_zero_delta: f64,
) -> Result<AngleStatistics> {
    let k = circuit.num_params();
    let outcomes = executor.map(runs, |r| {
        let cfg = OptimizerConfig {
            rng_seed: task_seed(base_seed, 0, r),
            ..*optimizer
        };
        optimize(circuit, spec, &cfg)
            .ok()
            .filter(|o| o.converged)
            .map(|o| o.angles)
    });
    let mut samples: Vec<Vec<f64>> = vec![Vec::new(); k];
    let mut converged_runs = 0usize;
    for angles in outcomes.into_iter().flatten() {
        converged_runs += 1;
        for (p, &theta) in angles.iter().enumerate() {
            samples[p].push(canonical_angle(theta));
        }
    }
    let per_rotation = samples
        .iter()
        .enumerate()
        .map(|(param_id, s)| {
            let n = s.len() as f64;
            let (sum_cos, sum_sin) = s
                .iter()
                .fold((0.0, 0.0), |(c, si), &t| (c + t.cos(), si + t.sin()));
            let (circular_mean, resultant_length) = if s.is_empty() {
                (0.0, 0.0)
            } else {
                (
                    sum_sin.atan2(sum_cos),
                    (sum_cos * sum_cos + sum_sin * sum_sin).sqrt() / n,
                )
            };
            let near = s.iter().filter(|&&t| t.abs() < near_zero_delta).count();
            RotationStats {
                param_id,
                circular_mean,
                resultant_length,
                fraction_near_zero: if s.is_empty() { 0.0 } else { near as f64 / n },
            }
        })
        .collect();
    Ok(AngleStatistics {
        total_runs: runs,
        converged_runs,
        per_rotation,
        samples,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PruneReport {
    /// Original param ids removed, in removal order.
    pub removed: Vec<usize>,
    pub initial_params: usize,
    pub final_params: usize,
    /// Statistics of the final (pruned) circuit.
    pub stats: Vec<RotationStats>,
    pub converged_runs: usize,
    pub total_runs: usize,
}

/// Outcome of pruning: the reduced circuit plus a converged angle vector
/// for it.
pub struct PruneOutcome {
    pub circuit: ParameterizedCircuit,
    pub angles: AngleVector,
    pub report: PruneReport,
}

/// Remove rotation gates whose converged angle is statistically near zero
/// or almost uniformly distributed, keeping a removal only when the reduced
/// circuit re-converges. Repeats until no candidate survives.
pub fn prune(
    circuit: &ParameterizedCircuit,
    spec: &TargetSpec,
    stat_runs: usize,
    thresholds: &PruneThresholds,
    optimizer: &OptimizerConfig,
    executor: &Executor,
    base_seed: u64,
) -> Result<PruneOutcome> {
    let initial_params = circuit.num_params();
    let mut current = circuit.clone();
    let mut best_angles: Option<AngleVector> = None;
    let mut removed_original: Vec<usize> = Vec::new();
    // live -> original param id map, maintained across removals
    let mut origin: Vec<usize> = (0..initial_params).collect();
    let mut round = 0u64;
    let mut last_stats;

    loop {
        let stats = collect_angle_statistics(
            &current,
            spec,
            stat_runs,
            splitmix64(base_seed ^ round),
            optimizer,
            executor,
            thresholds.near_zero_delta,
        )?;
        last_stats = Some(stats);
        let stats = last_stats.as_ref().unwrap();
        if stats.converged_runs == 0 {
            // nothing to go on: report empty statistics, keep the circuit
            break;
        }
        let mut candidates: Vec<&RotationStats> = stats
            .per_rotation
            .iter()
            .filter(|r| {
                r.fraction_near_zero >= thresholds.near_zero_fraction
                    || (stats.converged_runs >= thresholds.min_samples
                        && r.resultant_length < thresholds.dispersion_resultant)
            })
            .collect();
        candidates.sort_by(|a, b| {
            b.fraction_near_zero
                .partial_cmp(&a.fraction_near_zero)
                .unwrap()
                .then(
                    (1.0 - b.resultant_length)
                        .partial_cmp(&(1.0 - a.resultant_length))
                        .unwrap(),
                )
        });

        let mut removed_this_round = false;
        for cand in candidates {
            let reduced = current.without_rotation(cand.param_id)?;
            if reduced.num_params() == 0 {
                // a rotation-free circuit either matches or it does not
                let v = reduced.evaluate(&AngleVector::zeros(0))?;
                if 1.0 - normalized_fidelity(spec, &v)? < optimizer.convergence_eps {
                    removed_original.push(origin[cand.param_id]);
                    origin.remove(cand.param_id);
                    current = reduced;
                    best_angles = Some(AngleVector::zeros(0));
                    removed_this_round = true;
                    break;
                }
                continue;
            }
            let reopt = (0..thresholds.reopt_restarts).find_map(|r| {
                let cfg = OptimizerConfig {
                    rng_seed: task_seed(splitmix64(base_seed ^ (round << 16)), 1, r),
                    ..*optimizer
                };
                optimize(&reduced, spec, &cfg)
                    .ok()
                    .filter(|o| o.converged)
            });
            if let Some(out) = reopt {
                // re-verify from scratch before accepting the removal
                let angles = AngleVector(out.angles);
                let v = reduced.evaluate(&angles)?;
                if 1.0 - normalized_fidelity(spec, &v)? < optimizer.convergence_eps {
                    removed_original.push(origin[cand.param_id]);
                    origin.remove(cand.param_id);
                    current = reduced;
                    best_angles = Some(angles);
                    removed_this_round = true;
                    break;
                }
            }
        }
        if !removed_this_round {
            break;
        }
        round += 1;
    }

    let stats = last_stats.unwrap_or(AngleStatistics {
        total_runs: 0,
        converged_runs: 0,
        per_rotation: vec![],
        samples: vec![],
    });

    // guarantee a converged angle vector for the returned circuit
    let angles = match best_angles {
        Some(a) => a,
        None => {
            let out = (0..thresholds.reopt_restarts.max(1))
                .find_map(|r| {
                    let cfg = OptimizerConfig {
                        rng_seed: task_seed(base_seed, 2, r),
                        ..*optimizer
                    };
                    optimize(&current, spec, &cfg).ok().filter(|o| o.converged)
                })
                .ok_or_else(|| {
                    Error::InvalidArgument(
                        "circuit does not converge to the target for any tried seed".into(),
                    )
                })?;
            AngleVector(out.angles)
        }
    };

    Ok(PruneOutcome {
        circuit: current.clone(),
        angles,
        report: PruneReport {
            removed: removed_original,
            initial_params,
            final_params: current.num_params(),
            stats: stats.per_rotation,
            converged_runs: stats.converged_runs,
            total_runs: stats.total_runs,
        },
    })
}
