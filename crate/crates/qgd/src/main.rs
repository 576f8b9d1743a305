use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

use qgd::circuit::{CircuitFile, TemplateStyle};
use qgd::objective::{
    ancilla_extend, infidelity, normalized_fidelity, Ancilla, TargetSpec, TargetSpecFile,
};
use qgd::registry::{lookup, KNOWN_RECORDS};
use qgd::search::{
    escalate, prune, run_search_to_file, Budget, Executor, PruneThresholds, ResultLine, SearchJob,
};
use qgd::structure::{CircuitStructure, ConnectivityGraph};
use qgd::sweep::OptimizerConfig;
use qgd::tensor::named_gate;

/// Search, verify and prune CZ + single-rotation decompositions of small
/// multi-qubit gates under connectivity constraints.
#[derive(Parser)]
#[command(name = "qgd", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Search for decompositions of a target gate on a connectivity graph.
    Decompose(DecomposeArgs),
    /// Check a circuit file against a target and report fidelity.
    Verify(VerifyArgs),
    /// Statistically remove unnecessary rotation gates from a circuit.
    Prune(PruneArgs),
    /// List best-known records, or compare achieved metrics against them.
    Registry(RegistryArgs),
}

#[derive(Args, Clone)]
struct TargetArgs {
    /// Target gate: a name (i, z, cz, ccz, cccz) or a path to a target
    /// spec JSON file.
    #[arg(long)]
    target: String,
    /// Append this many |0>-initialized ancilla qubits after the data
    /// qubits (named targets only).
    #[arg(long, default_value_t = 0)]
    ancillas: usize,
}

impl TargetArgs {
    fn load(&self) -> anyhow::Result<TargetSpec> {
        if Path::new(&self.target).exists() {
            if self.ancillas != 0 {
                bail!("--ancillas applies to named targets only; encode ancillas in the spec file");
            }
            let text = std::fs::read_to_string(&self.target)
                .with_context(|| format!("reading {}", self.target))?;
            let file: TargetSpecFile = serde_json::from_str(&text)?;
            return Ok(file.into_spec()?);
        }
        let gate = named_gate(&self.target)
            .with_context(|| format!("target '{}' is neither a file nor a known gate", self.target))?;
        let n_data = gate.dim().trailing_zeros() as usize;
        if self.ancillas == 0 {
            let mut spec = TargetSpec::full_space(gate)?;
            spec.name = Some(self.target.clone());
            return Ok(spec);
        }
        let n_total = n_data + self.ancillas;
        let ancillas: Vec<Ancilla> = (n_data..n_total)
            .map(|qubit| Ancilla {
                qubit,
                init_state: 0,
            })
            .collect();
        let mut spec = ancilla_extend(&gate, n_total, &ancillas)?;
        spec.name = Some(self.target.clone());
        Ok(spec)
    }
}

fn load_graph(arg: &str) -> anyhow::Result<ConnectivityGraph> {
    if Path::new(arg).exists() {
        let text = std::fs::read_to_string(arg).with_context(|| format!("reading {arg}"))?;
        let g: ConnectivityGraph = serde_json::from_str(&text)?;
        return Ok(g);
    }
    Ok(ConnectivityGraph::preset(arg)
        .with_context(|| format!("graph '{arg}' is neither a file nor a known preset"))?)
}

#[derive(Clone, Copy, ValueEnum)]
enum StyleArg {
    Reduced,
    Full,
}

impl From<StyleArg> for TemplateStyle {
    fn from(s: StyleArg) -> Self {
        match s {
            StyleArg::Reduced => TemplateStyle::Reduced,
            StyleArg::Full => TemplateStyle::Full,
        }
    }
}

#[derive(Args)]
struct DecomposeArgs {
    #[command(flatten)]
    target: TargetArgs,
    /// Connectivity: a preset name (triangle, line3, square4, fully4,
    /// t-shape, square, paw, line4, edge) or a JSON file.
    #[arg(long)]
    graph: String,
    /// Budget on the number of CZ gates.
    #[arg(long, conflicts_with = "depth")]
    count: Option<usize>,
    /// Budget on CZ depth (enumerates layered placements).
    #[arg(long)]
    depth: Option<usize>,
    /// Random restarts per candidate structure.
    #[arg(long, default_value_t = 100)]
    restarts: usize,
    /// Single-qubit template placed around the CZ skeleton.
    #[arg(long, value_enum, default_value_t = StyleArg::Reduced)]
    style: StyleArg,
    /// Base RNG seed; results are a pure function of this and the job.
    #[arg(long, env = "QGD_SEED", default_value_t = 0)]
    seed: u64,
    /// Worker threads (defaults to the number of CPUs).
    #[arg(long, env = "QGD_WORKERS")]
    workers: Option<usize>,
    /// Exhaust the structure space instead of stopping at the first
    /// solution.
    #[arg(long, conflicts_with = "max_solutions")]
    all: bool,
    /// Stop after this many solutions.
    #[arg(long)]
    max_solutions: Option<usize>,
    /// If no solution is found, raise the budget by one and retry, up to
    /// this many times.
    #[arg(long, default_value_t = 0)]
    escalate: usize,
    /// Optimize exactly the structures in this JSON file (an array of
    /// structures or a single one) instead of enumerating.
    #[arg(long)]
    structures: Option<PathBuf>,
    /// Maximum optimizer sweeps per restart.
    #[arg(long, default_value_t = 10_000)]
    max_sweeps: usize,
    /// Results file (JSON lines). Re-running with the same job resumes it.
    #[arg(long)]
    out: PathBuf,
    /// Also write the best solution as a standalone circuit JSON file.
    #[arg(long)]
    best: Option<PathBuf>,
    /// Compare the best solution against the published records table.
    #[arg(long)]
    check_registry: bool,
}

#[derive(Args)]
struct VerifyArgs {
    /// Circuit JSON file (elements + angles).
    #[arg(long)]
    circuit: PathBuf,
    #[command(flatten)]
    target: TargetArgs,
    /// Maximum accepted normalized infidelity 1 - F.
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
}

#[derive(Args)]
struct PruneArgs {
    /// Circuit JSON file to prune (angles in the file are ignored; the
    /// statistics come from fresh restarts).
    #[arg(long)]
    circuit: PathBuf,
    #[command(flatten)]
    target: TargetArgs,
    /// Restarts used to estimate each angle distribution.
    #[arg(long, default_value_t = 1000)]
    runs: usize,
    /// Near-zero window half-width (radians).
    #[arg(long, default_value_t = 0.01)]
    delta: f64,
    /// Near-zero fraction threshold.
    #[arg(long, default_value_t = 0.9)]
    near_zero_fraction: f64,
    /// Resultant-length threshold for the dispersion rule.
    #[arg(long, default_value_t = 0.2)]
    dispersion: f64,
    /// Minimum converged samples before the dispersion rule applies.
    #[arg(long, default_value_t = 1000)]
    min_samples: usize,
    /// Restarts used to re-verify the circuit after each removal.
    #[arg(long, default_value_t = 50)]
    reopt_restarts: usize,
    #[arg(long, env = "QGD_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long, env = "QGD_WORKERS")]
    workers: Option<usize>,
    #[arg(long, default_value_t = 10_000)]
    max_sweeps: usize,
    /// Output circuit JSON file.
    #[arg(long)]
    out: PathBuf,
    /// Optional JSON report with per-gate statistics and removals.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct RegistryArgs {
    /// Compare an achieved CZ count (and optionally depth) against the
    /// record for --target/--graph/--ancillas.
    #[arg(long, requires_all = ["target", "graph"])]
    cz_count: Option<usize>,
    #[arg(long, requires = "cz_count")]
    cz_depth: Option<usize>,
    #[arg(long)]
    target: Option<String>,
    #[arg(long)]
    graph: Option<String>,
    #[arg(long, default_value_t = 0)]
    ancillas: usize,
}

fn default_workers() -> usize {
    std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
}

fn escalated_out_path(base: &Path, budget: Budget) -> PathBuf {
    let stem = base.file_stem().and_then(|s| s.to_str()).unwrap_or("results");
    let ext = base.extension().and_then(|s| s.to_str()).unwrap_or("jsonl");
    let tag = match budget {
        Budget::Count(k) => format!("count{k}"),
        Budget::Depth(d) => format!("depth{d}"),
    };
    base.with_file_name(format!("{stem}-{tag}.{ext}"))
}

/// Best result = minimal (cz_count, cz_depth), ties broken by task order.
fn read_best_result(path: &Path) -> anyhow::Result<Option<qgd::search::DecompositionResult>> {
    use std::io::BufRead;
    let reader = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut best: Option<qgd::search::DecompositionResult> = None;
    for line in reader.lines() {
        if let ResultLine::Result(r) = serde_json::from_str(&line?)? {
            let better = match &best {
                None => true,
                Some(b) => (r.cz_count, r.cz_depth) < (b.cz_count, b.cz_depth),
            };
            if better {
                best = Some(r);
            }
        }
    }
    Ok(best)
}

fn cmd_decompose(args: DecomposeArgs) -> anyhow::Result<ExitCode> {
    let spec = args.target.load()?;
    let graph = load_graph(&args.graph)?;
    let budget = match (args.count, args.depth) {
        (Some(k), None) => Budget::Count(k),
        (None, Some(d)) => Budget::Depth(d),
        (None, None) => bail!("one of --count or --depth is required"),
        _ => unreachable!("clap conflict"),
    };
    let fixed_structures = match &args.structures {
        Some(p) => {
            let text = std::fs::read_to_string(p)?;
            let list: Vec<CircuitStructure> = serde_json::from_str(&text)
                .or_else(|_| serde_json::from_str::<CircuitStructure>(&text).map(|s| vec![s]))?;
            Some(list)
        }
        None => None,
    };
    let mut job = SearchJob::new(spec, graph, budget);
    job.restarts_per_structure = args.restarts;
    job.template_style = args.style.into();
    job.optimizer = OptimizerConfig {
        max_sweeps: args.max_sweeps,
        ..OptimizerConfig::default()
    };
    job.worker_count = args.workers.unwrap_or_else(default_workers);
    job.base_seed = args.seed;
    job.max_solutions = if args.all { None } else { Some(args.max_solutions.unwrap_or(1)) };
    job.fixed_structures = fixed_structures;

    let mut attempt = 0usize;
    let (out_path, summary) = loop {
        let out_path = if args.escalate > 0 {
            escalated_out_path(&args.out, job.budget)
        } else {
            args.out.clone()
        };
        let summary = run_search_to_file(&job, &out_path)?;
        eprintln!(
            "budget {:?}: {} structures, {} restarts, {} solution(s)",
            job.budget, summary.structures_tried, summary.restarts_run, summary.solutions
        );
        if summary.solutions > 0 || attempt >= args.escalate {
            break (out_path, summary);
        }
        attempt += 1;
        job = escalate(&job);
    };

    if summary.solutions == 0 {
        eprintln!("no solution found");
        return Ok(ExitCode::from(1));
    }
    let best = read_best_result(&out_path)?.expect("solutions > 0");
    println!(
        "best: cz_count={} cz_depth={} fidelity={:.2e} (structure {}, restart {}, seed {})",
        best.cz_count,
        best.cz_depth,
        1.0 - best.fidelity,
        best.structure_index,
        best.restart_index,
        best.seed
    );
    if let Some(p) = &args.best {
        std::fs::write(p, serde_json::to_string_pretty(&best.circuit)?)?;
        eprintln!("wrote best circuit to {}", p.display());
    }
    if args.check_registry {
        match lookup(&args.target.target, &args.graph, args.target.ancillas) {
            Some(rec) => {
                let count_ok = best.cz_count <= rec.best_cz_count;
                let depth_ok = rec.best_cz_depth.map_or(true, |d| best.cz_depth <= d);
                println!(
                    "registry: record cz_count={} cz_depth={:?}; achieved {} / {} -> {}",
                    rec.best_cz_count,
                    rec.best_cz_depth,
                    best.cz_count,
                    best.cz_depth,
                    if count_ok && depth_ok { "matches or beats" } else { "worse" }
                );
            }
            None => eprintln!("registry: no record for this target/graph/ancillas row"),
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_verify(args: VerifyArgs) -> anyhow::Result<ExitCode> {
    let spec = args.target.load()?;
    let text = std::fs::read_to_string(&args.circuit)
        .with_context(|| format!("reading {}", args.circuit.display()))?;
    let file: CircuitFile = serde_json::from_str(&text)?;
    let (circuit, angles) = file.into_circuit()?;
    let v = circuit.evaluate(&angles)?;
    let f = normalized_fidelity(&spec, &v)?;
    let inf = infidelity(&spec, &v)?;
    println!(
        "fidelity={f:.15} infidelity(1-F)={:.3e} frobenius_objective={inf:.3e} cz_count={} cz_depth={}",
        1.0 - f,
        circuit.cz_count(),
        circuit.cz_depth()
    );
    if 1.0 - f < args.tol {
        println!("PASS");
        Ok(ExitCode::SUCCESS)
    } else {
        println!("FAIL (tol {:.1e})", args.tol);
        Ok(ExitCode::from(1))
    }
}

fn cmd_prune(args: PruneArgs) -> anyhow::Result<ExitCode> {
    let spec = args.target.load()?;
    let text = std::fs::read_to_string(&args.circuit)?;
    let file: CircuitFile = serde_json::from_str(&text)?;
    let (circuit, _) = file.into_circuit()?;
    let thresholds = PruneThresholds {
        near_zero_delta: args.delta,
        near_zero_fraction: args.near_zero_fraction,
        dispersion_resultant: args.dispersion,
        min_samples: args.min_samples,
        reopt_restarts: args.reopt_restarts,
    };
    let cfg = OptimizerConfig {
        max_sweeps: args.max_sweeps,
        ..OptimizerConfig::default()
    };
    let executor = Executor::new(args.workers.unwrap_or_else(default_workers));
    let out = prune(
        &circuit,
        &spec,
        args.runs,
        &thresholds,
        &cfg,
        &executor,
        args.seed,
    )?;
    println!(
        "pruned {} of {} rotation gates ({} converged of {} statistic runs)",
        out.report.removed.len(),
        out.report.initial_params,
        out.report.converged_runs,
        out.report.total_runs
    );
    let pruned_file = CircuitFile::from_circuit(&out.circuit, &out.angles);
    std::fs::write(&args.out, serde_json::to_string_pretty(&pruned_file)?)?;
    if let Some(p) = &args.report {
        std::fs::write(p, serde_json::to_string_pretty(&out.report)?)?;
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_registry(args: RegistryArgs) -> anyhow::Result<ExitCode> {
    match args.cz_count {
        None => {
            println!("{:<6} {:<9} {:<9} {:<9} depth", "target", "graph", "ancillas", "count");
            for r in KNOWN_RECORDS {
                println!(
                    "{:<6} {:<9} {:<9} {:<9} {}",
                    r.target,
                    r.graph,
                    r.ancillas,
                    r.best_cz_count,
                    r.best_cz_depth.map_or("-".into(), |d| d.to_string())
                );
            }
            Ok(ExitCode::SUCCESS)
        }
        Some(count) => {
            let target = args.target.as_deref().unwrap();
            let graph = args.graph.as_deref().unwrap();
            let rec = lookup(target, graph, args.ancillas)
                .with_context(|| format!("no record for {target} on {graph} with {} ancillas", args.ancillas))?;
            let count_ok = count <= rec.best_cz_count;
            let depth_ok = match (args.cz_depth, rec.best_cz_depth) {
                (Some(d), Some(rd)) => d <= rd,
                _ => true,
            };
            println!(
                "record: cz_count={} cz_depth={:?}; achieved cz_count={count} cz_depth={:?}",
                rec.best_cz_count, rec.best_cz_depth, args.cz_depth
            );
            if count_ok && depth_ok {
                println!("matches or beats record");
                Ok(ExitCode::SUCCESS)
            } else {
                println!("worse than record");
                Ok(ExitCode::from(1))
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Decompose(a) => cmd_decompose(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Prune(a) => cmd_prune(a),
        Command::Registry(a) => cmd_registry(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
