use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use qroute::circuit::{parse_qasm, LogicalCircuit};
use qroute::device::{Device, BUILTIN_NAMES};
use qroute::model::{MoveCostModel, RearrangementSample};
use qroute::pipeline::{
    compile, compile_baseline, working_device, CompileConfig, CompileOutput, PipelineError, SolverBackend,
    DEFAULT_LAYER_CAP, DEFAULT_TIMEOUT_MS, DEFAULT_VAR_BUDGET,
};
use qroute::schedule::Strategy;
use qroute::solver::remote::TOKEN_ENV;
use qroute::token_swap::DEFAULT_EXACT_LIMIT;

const STATS_SCHEMA_VERSION: u32 = 1;
/// Exit status when the routed circuit fails the equivalence check.
const EXIT_UNVERIFIED: u8 = 2;

#[derive(Parser)]
#[command(
    name = "qroute",
    version,
    about = "Route quantum circuits onto qubit-coupling graphs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compile one OpenQASM file.
    Compile(CompileArgs),
    /// Compile every .qasm file in a directory and write per-circuit CSV rows.
    Bench(BenchArgs),
    /// Refit a move-cost model from its history and optional stats files.
    FitModel(FitArgs),
    /// List builtin devices, or print one device as JSON.
    Devices {
        /// Device name or JSON file to print.
        device: Option<String>,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Compiler {
    Qubo,
    Naive,
}

#[derive(Args)]
struct Routing {
    /// Builtin device name or path to a device JSON file.
    #[arg(long)]
    device: String,
    #[arg(long, default_value = "qubo")]
    compiler: Compiler,
    /// independent, sequential or binary.
    #[arg(long, default_value_t = Strategy::Binary)]
    strategy: Strategy,
    /// Number of solver instances running at once.
    #[arg(long, default_value_t = 1)]
    solvers: usize,
    /// Per-chunk solve time.
    #[arg(long, default_value_t = DEFAULT_TIMEOUT_MS)]
    timeout_ms: u64,
    /// Fixed annealing sweep budget per chunk; overrides the timeout and makes runs reproducible.
    #[arg(long)]
    sweeps: Option<u64>,
    /// sa or remote:<url>. The remote bearer token is read from the environment.
    #[arg(long, default_value = "sa", env = "QROUTE_SOLVER_BACKEND")]
    solver_backend: SolverBackend,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Most CNOTs per layer.
    #[arg(long, default_value_t = DEFAULT_LAYER_CAP)]
    layer_cap: usize,
    /// Most binary variables per chunk QUBO.
    #[arg(long, default_value_t = DEFAULT_VAR_BUDGET)]
    var_budget: usize,
    /// One-hot penalty weight; defaults to twice the largest cost term.
    #[arg(long)]
    penalty: Option<f64>,
    /// Largest working device (in qubits) that gets exact token swapping.
    #[arg(long, default_value_t = DEFAULT_EXACT_LIMIT)]
    exact_token_swap_limit: usize,
    /// Build every CNOT group directly, never through a relay qubit.
    #[arg(long)]
    no_relay: bool,
    /// Use the decoded solver output as is, without the swap descent.
    #[arg(long)]
    no_polish: bool,
}

impl Routing {
    fn config(&self) -> CompileConfig {
        CompileConfig {
            strategy: self.strategy,
            backend: self.solver_backend.clone(),
            solvers: self.solvers,
            timeout_ms: self.timeout_ms,
            sweeps: self.sweeps,
            layer_cap: self.layer_cap,
            var_budget: self.var_budget,
            penalty: self.penalty,
            seed: self.seed,
            exact_limit: self.exact_token_swap_limit,
            relay: !self.no_relay,
            polish: !self.no_polish,
            dump_dir: None,
        }
    }

    fn device(&self) -> Result<Device> {
        Device::resolve(&self.device).with_context(|| format!("device {}", self.device))
    }

    fn run(
        &self,
        circuit: &LogicalCircuit,
        device: &Device,
        model: Option<&MoveCostModel>,
        config: &CompileConfig,
    ) -> Result<CompileOutput, PipelineError> {
        match self.compiler {
            Compiler::Qubo => compile(circuit, device, model, config),
            Compiler::Naive => compile_baseline(circuit, device),
        }
    }
}

#[derive(Args)]
struct CompileArgs {
    input: PathBuf,
    #[command(flatten)]
    routing: Routing,
    /// Output QASM; stdout when omitted.
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Write a JSON stats report here.
    #[arg(long)]
    stats: Option<PathBuf>,
    /// Move-cost model for the working device; created on first use. New
    /// rearrangement samples are appended to its history.
    #[arg(long)]
    model_path: Option<PathBuf>,
    /// Write every chunk QUBO as JSON into this directory.
    #[arg(long)]
    dump_qubo: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    corpus: PathBuf,
    #[command(flatten)]
    routing: Routing,
    /// Also route with the naive baseline and add its columns.
    #[arg(long)]
    with_baseline: bool,
    /// Output CSV; stdout when omitted.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct FitArgs {
    #[arg(long)]
    model_path: PathBuf,
    /// Device for a model file that does not exist yet.
    #[arg(long)]
    device: Option<String>,
    /// Stats reports whose swap samples join the history before the fit.
    #[arg(long, num_args = 1..)]
    stats: Vec<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_EXACT_LIMIT)]
    exact_token_swap_limit: usize,
}

#[derive(Serialize, Deserialize)]
struct StatsReport {
    schema_version: u32,
    circuit: String,
    device: String,
    working_device: String,
    compiler: String,
    strategy: String,
    seed: u64,
    building_cost: usize,
    moving_cost: usize,
    total: usize,
    logical_cnots: usize,
    average_compilation_cost: f64,
    layers: usize,
    chunks: usize,
    waves: usize,
    verified: bool,
    swap_samples: Vec<RearrangementSample>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Compile(a) => run_compile(a),
        Command::Bench(a) => run_bench(a),
        Command::FitModel(a) => run_fit(a),
        Command::Devices { device } => run_devices(device.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            match e.downcast_ref::<PipelineError>() {
                Some(PipelineError::Verification(_)) => ExitCode::from(EXIT_UNVERIFIED),
                _ => ExitCode::FAILURE,
            }
        }
    }
}

fn read_circuit(path: &Path) -> Result<LogicalCircuit> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_qasm(&text).with_context(|| format!("parsing {}", path.display()))
}

fn write_out(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => io::stdout().write_all(text.as_bytes()).context("writing stdout"),
    }
}

fn run_compile(a: CompileArgs) -> Result<()> {
    let circuit = read_circuit(&a.input)?;
    let device = a.routing.device()?;
    let mut config = a.routing.config();
    config.dump_dir = a.dump_qubo.clone();
    if let Some(dir) = &config.dump_dir {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let mut model = match &a.model_path {
        Some(p) if a.routing.compiler == Compiler::Qubo => {
            let (work, _) = working_device(&circuit, &device)?;
            Some(
                MoveCostModel::load_or_init(Some(p), &work, config.exact_limit)
                    .with_context(|| format!("model {}", p.display()))?,
            )
        }
        _ => None,
    };
    let out = a.routing.run(&circuit, &device, model.as_ref(), &config)?;
    write_out(a.output.as_deref(), &out.to_qasm())?;
    if let Some(p) = &a.stats {
        let report = stats_report(&a.input, &a.routing, &device, &out);
        fs::write(p, serde_json::to_string_pretty(&report)? + "\n")
            .with_context(|| format!("writing {}", p.display()))?;
    }
    if let (Some(m), Some(p)) = (model.as_mut(), &a.model_path) {
        m.record(out.samples())?;
        m.save(p).with_context(|| format!("writing {}", p.display()))?;
    }
    let s = out.stats();
    eprintln!(
        "{}: {} logical CNOTs -> {} physical (building {}, moving {}), average {:.3}",
        a.input.display(),
        s.logical_cnots,
        s.total,
        s.building_cost,
        s.moving_cost,
        s.average_compilation_cost
    );
    Ok(())
}

fn stats_report(input: &Path, r: &Routing, device: &Device, out: &CompileOutput) -> StatsReport {
    let s = out.stats();
    StatsReport {
        schema_version: STATS_SCHEMA_VERSION,
        circuit: input
            .file_name()
            .map(|f| f.to_string_lossy().into_owned())
            .unwrap_or_default(),
        device: device.name().to_string(),
        working_device: out.device.name().to_string(),
        compiler: match r.compiler {
            Compiler::Qubo => "qubo",
            Compiler::Naive => "naive",
        }
        .to_string(),
        strategy: r.strategy.to_string(),
        seed: r.seed,
        building_cost: s.building_cost,
        moving_cost: s.moving_cost,
        total: s.total,
        logical_cnots: s.logical_cnots,
        average_compilation_cost: s.average_compilation_cost,
        layers: out.layers,
        chunks: out.chunks,
        waves: out.waves.len(),
        // unverified output never gets this far
        verified: true,
        swap_samples: out.samples().to_vec(),
    }
}

fn run_bench(a: BenchArgs) -> Result<()> {
    let device = a.routing.device()?;
    let config = a.routing.config();
    let mut files: Vec<PathBuf> = fs::read_dir(&a.corpus)
        .with_context(|| format!("reading {}", a.corpus.display()))?
        .map(|e| e.map(|e| e.path()))
        .collect::<io::Result<_>>()?;
    files.retain(|p| p.extension().is_some_and(|e| e == "qasm"));
    files.sort();

    let sink: Box<dyn Write> = match &a.output {
        Some(p) => Box::new(fs::File::create(p).with_context(|| format!("creating {}", p.display()))?),
        None => Box::new(io::stdout()),
    };
    let mut w = csv::Writer::from_writer(sink);
    let mut header = vec![
        "circuit",
        "logical_cnots",
        "building",
        "moving",
        "total",
        "avg_cost",
        "wall_ms",
        "strategy",
        "seed",
    ];
    if a.with_baseline {
        header.extend(["baseline_total", "baseline_avg_cost"]);
    }
    header.push("error");
    w.write_record(&header)?;

    for path in &files {
        let name = path
            .file_name()
            .map(|f| f.to_string_lossy().into_owned())
            .unwrap_or_default();
        let mut row = vec![name];
        let mut fields = vec![String::new(); header.len() - 1];
        let outcome = read_circuit(path).and_then(|c| {
            let ours = a.routing.run(&c, &device, None, &config)?;
            let base = if a.with_baseline {
                Some(compile_baseline(&c, &device)?)
            } else {
                None
            };
            Ok((ours, base))
        });
        match outcome {
            Ok((ours, base)) => {
                let s = ours.stats();
                fields[..8].clone_from_slice(&[
                    s.logical_cnots.to_string(),
                    s.building_cost.to_string(),
                    s.moving_cost.to_string(),
                    s.total.to_string(),
                    format!("{:.4}", s.average_compilation_cost),
                    ours.wall_ms.to_string(),
                    a.routing.strategy.to_string(),
                    a.routing.seed.to_string(),
                ]);
                if let Some(b) = base {
                    fields[8] = b.stats().total.to_string();
                    fields[9] = format!("{:.4}", b.stats().average_compilation_cost);
                }
            }
            Err(e) => *fields.last_mut().unwrap() = format!("{e:#}"),
        }
        row.extend(fields);
        w.write_record(&row)?;
        w.flush()?;
    }
    w.flush()?;
    Ok(())
}

fn run_fit(a: FitArgs) -> Result<()> {
    let mut model = if a.model_path.exists() {
        MoveCostModel::load(&a.model_path).with_context(|| format!("model {}", a.model_path.display()))?
    } else {
        let Some(spec) = &a.device else {
            bail!(
                "{} does not exist; pass --device to start a new model",
                a.model_path.display()
            );
        };
        let device = Device::resolve(spec).with_context(|| format!("device {spec}"))?;
        MoveCostModel::load_or_init(None, &device, a.exact_token_swap_limit)?
    };
    for p in &a.stats {
        let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
        let report: StatsReport = serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))?;
        if report.schema_version != STATS_SCHEMA_VERSION {
            bail!(
                "{}: unsupported stats schema version {}",
                p.display(),
                report.schema_version
            );
        }
        model
            .record(&report.swap_samples)
            .with_context(|| format!("samples in {}", p.display()))?;
    }
    let refit = model.refit()?;
    let before = model.rmse(&model.history)?;
    let after = refit.rmse(&refit.history)?;
    refit
        .save(&a.model_path)
        .with_context(|| format!("writing {}", a.model_path.display()))?;
    println!(
        "{} v{} -> v{}: {} samples, RMSE {before:.4} -> {after:.4}",
        refit.device_name,
        model.version,
        refit.version,
        refit.history.len()
    );
    Ok(())
}

fn run_devices(spec: Option<&str>) -> Result<()> {
    match spec {
        Some(s) => {
            let d = Device::resolve(s).with_context(|| format!("device {s}"))?;
            println!("{}", d.to_json());
        }
        None => {
            for name in BUILTIN_NAMES {
                println!("{name}");
            }
            println!("(or a JSON file: {{\"name\", \"num_qubits\", \"edges\": [[u, v], ...]}})");
            println!("remote solver token: ${TOKEN_ENV}");
        }
    }
    Ok(())
}
