//! End-to-end compilation: partition the circuit, solve one placement QUBO
//! per chunk under the chosen schedule, synthesize and verify.

use std::path::PathBuf;
use std::sync::{Arc, OnceLock};
use std::time::Instant;

use thiserror::Error;

use crate::baseline::compile_naive;
use crate::circuit::{CircuitError, LogicalCircuit};
use crate::device::{Device, DeviceError};
use crate::model::{uniform_init, ModelError, MoveCostModel, RearrangementSample};
use crate::partition::{group_chunks, slice_layers, PartitionError};
use crate::qubo::{build_chunk_qubo, Boundary, ChunkInput, QuboError, Side};
use crate::schedule::{make_schedule, Strategy};
use crate::solver::{
    calibrate_work_rate, derive_seed, pool_solve, PoolError, RemoteSolver, SaSolver, SolveRequest, Solver, SolverError,
};
use crate::synthesis::{synthesize, verify_equivalence, PhysicalCircuit, Stats, SynthesisError, SynthesisOptions};
use crate::token_swap::DEFAULT_EXACT_LIMIT;

pub const DEFAULT_TIMEOUT_MS: u64 = 1000;
pub const DEFAULT_LAYER_CAP: usize = 20;
const POLISH_PASSES: usize = 50;
pub const DEFAULT_VAR_BUDGET: usize = 1200;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Circuit(#[from] CircuitError),
    #[error(transparent)]
    Device(#[from] DeviceError),
    #[error(transparent)]
    Partition(#[from] PartitionError),
    #[error(transparent)]
    Qubo(#[from] QuboError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Synthesis(#[from] SynthesisError),
    #[error("chunk {chunk}: {source}")]
    Solver { chunk: usize, source: SolverError },
    #[error("chunk {chunk} not solved: {message}")]
    Chunk { chunk: usize, message: String },
    #[error("circuit has {logical} qubits but device {device} has {physical}")]
    TooManyQubits {
        logical: usize,
        physical: usize,
        device: String,
    },
    #[error("move-cost model is for {model} qubits, working device has {device}")]
    ModelSize { model: usize, device: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("verification failed: {0}")]
    Verification(String),
    #[error("cannot write QUBO dump {path}: {source}")]
    Dump { path: PathBuf, source: std::io::Error },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SolverBackend {
    /// Built-in annealer. Runs a fixed sweep count when `sweeps` is set,
    /// otherwise spends each chunk's timeout.
    Sa,
    Remote(String),
}

impl std::str::FromStr for SolverBackend {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "sa" => Ok(Self::Sa),
            _ => match s.strip_prefix("remote:") {
                Some(url) if !url.is_empty() => Ok(Self::Remote(url.to_string())),
                _ => Err(format!("unknown solver backend {s:?} (expected sa or remote:<url>)")),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompileConfig {
    pub strategy: Strategy,
    pub backend: SolverBackend,
    /// Number of chunk solves allowed in flight.
    pub solvers: usize,
    pub timeout_ms: u64,
    /// Pins the annealer's sweep budget, making runs reproducible.
    pub sweeps: Option<u64>,
    pub layer_cap: usize,
    pub var_budget: usize,
    pub penalty: Option<f64>,
    pub seed: u64,
    pub exact_limit: usize,
    pub relay: bool,
    /// Runs a swap descent on each decoded chunk before synthesis.
    pub polish: bool,
    /// Writes each chunk's QUBO as `chunk_<j>.json` into this directory.
    pub dump_dir: Option<PathBuf>,
}

impl Default for CompileConfig {
    fn default() -> Self {
        Self {
            strategy: Strategy::Binary,
            backend: SolverBackend::Sa,
            solvers: 1,
            timeout_ms: DEFAULT_TIMEOUT_MS,
            sweeps: None,
            layer_cap: DEFAULT_LAYER_CAP,
            var_budget: DEFAULT_VAR_BUDGET,
            penalty: None,
            seed: 0,
            exact_limit: DEFAULT_EXACT_LIMIT,
            relay: true,
            polish: true,
            dump_dir: None,
        }
    }
}

impl CompileConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: &str| Err(PipelineError::Config(m.to_string()));
        if self.solvers == 0 {
            return bad("solvers must be at least 1");
        }
        if self.timeout_ms == 0 {
            return bad("timeout_ms must be positive");
        }
        if self.sweeps == Some(0) {
            return bad("sweeps must be positive");
        }
        if self.layer_cap == 0 {
            return bad("layer_cap must be positive");
        }
        if let Some(p) = self.penalty {
            if !(p.is_finite() && p > 0.0) {
                return bad("penalty must be positive and finite");
            }
        }
        if self.exact_limit > crate::token_swap::MAX_EXACT_QUBITS {
            return Err(PipelineError::Config(format!(
                "exact token-swap limit is at most {}",
                crate::token_swap::MAX_EXACT_QUBITS
            )));
        }
        Ok(())
    }

    fn solver(&self) -> Arc<dyn Solver> {
        match &self.backend {
            SolverBackend::Remote(url) => Arc::new(RemoteSolver::from_env(url.clone())),
            SolverBackend::Sa => match self.sweeps {
                Some(s) => Arc::new(SaSolver::with_sweeps(s)),
                None => {
                    static RATE: OnceLock<f64> = OnceLock::new();
                    Arc::new(SaSolver::with_work_rate(*RATE.get_or_init(calibrate_work_rate)))
                }
            },
        }
    }
}

#[derive(Debug, Clone)]
struct ChunkSolution {
    mappings: Vec<Vec<usize>>,
}

#[derive(Debug, Clone)]
pub struct CompileOutput {
    /// The subset of the device the circuit was placed on.
    pub device: Device,
    /// Working-device qubit to original device qubit.
    pub labels: Vec<usize>,
    /// Size of the original device register.
    pub register_size: usize,
    pub physical: PhysicalCircuit,
    pub layers: usize,
    pub chunks: usize,
    /// Chunk indices solved together, in order.
    pub waves: Vec<Vec<usize>>,
    pub max_in_flight: usize,
    pub wall_ms: u64,
}

impl CompileOutput {
    pub fn stats(&self) -> &Stats {
        &self.physical.stats
    }

    pub fn samples(&self) -> &[RearrangementSample] {
        &self.physical.samples
    }

    /// Output program over the original device's qubit numbering.
    pub fn to_qasm(&self) -> String {
        self.physical.to_qasm_with_labels(&self.labels, self.register_size)
    }
}

/// The connected device subset a circuit is placed on, with each working
/// qubit's index on the original device.
pub fn working_device(circuit: &LogicalCircuit, device: &Device) -> Result<(Device, Vec<usize>), PipelineError> {
    let k = circuit.num_qubits();
    if k > device.num_qubits() {
        return Err(PipelineError::TooManyQubits {
            logical: k,
            physical: device.num_qubits(),
            device: device.name().to_string(),
        });
    }
    Ok(device.select_subset(k.max(1))?)
}

fn pad(circuit: &LogicalCircuit, n: usize) -> Result<LogicalCircuit, PipelineError> {
    Ok(if circuit.num_qubits() < n {
        LogicalCircuit::new(n, circuit.gates().to_vec())?
    } else {
        circuit.clone()
    })
}

/// Routes `circuit` with the naive baseline on the same working subset
/// [`compile`] would use, verified the same way.
pub fn compile_baseline(circuit: &LogicalCircuit, device: &Device) -> Result<CompileOutput, PipelineError> {
    let start = Instant::now();
    let (work, labels) = working_device(circuit, device)?;
    let circuit = pad(circuit, work.num_qubits())?;
    let physical = compile_naive(&circuit, &work)?;
    let verdict = verify_equivalence(&circuit, &physical, &work);
    if !verdict.ok {
        return Err(PipelineError::Verification(verdict.diagnostic.unwrap_or_default()));
    }
    Ok(CompileOutput {
        register_size: device.num_qubits(),
        device: work,
        labels,
        physical,
        layers: 0,
        chunks: 0,
        waves: Vec::new(),
        max_in_flight: 0,
        wall_ms: start.elapsed().as_millis() as u64,
    })
}

/// Compiles `circuit` onto `device`. `model` must match the working device
/// (see [`working_device`]); `None` uses the uniform-rearrangement model.
pub fn compile(
    circuit: &LogicalCircuit,
    device: &Device,
    model: Option<&MoveCostModel>,
    config: &CompileConfig,
) -> Result<CompileOutput, PipelineError> {
    config.validate()?;
    let start = Instant::now();
    let (work, labels) = working_device(circuit, device)?;
    let n = work.num_qubits();
    let circuit = pad(circuit, n)?;
    let owned;
    let model = match model {
        Some(m) => m,
        None => {
            owned = uniform_init(&work, config.exact_limit);
            &owned
        }
    };
    if model.n != n {
        return Err(PipelineError::ModelSize {
            model: model.n,
            device: n,
        });
    }

    let layers = slice_layers(&circuit, config.layer_cap)?;
    let chunks = group_chunks(layers.len(), n, config.var_budget)?;
    let schedule = make_schedule(chunks.len(), config.strategy);
    let solver = config.solver();

    let report = pool_solve(
        &schedule.tasks(),
        config.solvers,
        |j, done: &[Option<Arc<ChunkSolution>>]| {
            let node = &schedule.nodes[j];
            let mut boundaries = Vec::new();
            for (src, side) in [(node.left, Side::Left), (node.right, Side::Right)] {
                let Some(src) = src else { continue };
                let sol = done[src.chunk].as_ref().ok_or_else(|| PipelineError::Chunk {
                    chunk: j,
                    message: format!("boundary chunk {} missing", src.chunk),
                })?;
                let mapping = match side {
                    Side::Left => sol.mappings.last(),
                    Side::Right => sol.mappings.first(),
                }
                .expect("chunks are nonempty")
                .clone();
                boundaries.push(Boundary {
                    side,
                    mapping,
                    distance: src.distance,
                });
            }
            let qubo = build_chunk_qubo(&ChunkInput {
                layers: &layers[chunks[j].layers.clone()],
                device: &work,
                model,
                boundaries: &boundaries,
                penalty: config.penalty,
            })?;
            if let Some(dir) = &config.dump_dir {
                let path = dir.join(format!("chunk_{j}.json"));
                std::fs::write(&path, qubo.to_json(Some(config.timeout_ms)))
                    .map_err(|source| PipelineError::Dump { path, source })?;
            }
            let req = SolveRequest {
                qubo: Arc::new(qubo),
                timeout_ms: config.timeout_ms,
                seed: derive_seed(config.seed, j as u64),
            };
            let res = solver
                .solve(&req)
                .map_err(|source| PipelineError::Solver { chunk: j, source })?;
            let mut mappings = req.qubo.decode(&res.bits)?;
            if config.polish {
                req.qubo.polish(&mut mappings, POLISH_PASSES)?;
            }
            Ok(ChunkSolution { mappings })
        },
    );

    // a chunk's own failure explains the dependants that were skipped
    let mut first_other = None;
    let mut mappings = Vec::with_capacity(layers.len());
    for (j, r) in report.results.into_iter().enumerate() {
        match r {
            Ok(sol) => mappings.extend(sol.mappings.iter().cloned()),
            Err(PoolError::Job(e)) => return Err(e),
            Err(e) => {
                first_other.get_or_insert(PipelineError::Chunk {
                    chunk: j,
                    message: e.to_string(),
                });
            }
        }
    }
    if let Some(e) = first_other {
        return Err(e);
    }

    let physical = synthesize(
        &layers,
        &mappings,
        &work,
        SynthesisOptions {
            relay: config.relay,
            exact_limit: config.exact_limit,
        },
    )?;
    let verdict = verify_equivalence(&circuit, &physical, &work);
    if !verdict.ok {
        return Err(PipelineError::Verification(verdict.diagnostic.unwrap_or_default()));
    }
    Ok(CompileOutput {
        register_size: device.num_qubits(),
        device: work,
        labels,
        physical,
        layers: layers.len(),
        chunks: chunks.len(),
        waves: report.waves,
        max_in_flight: report.max_in_flight,
        wall_ms: start.elapsed().as_millis() as u64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::parse_qasm;

    fn cfg(seed: u64) -> CompileConfig {
        CompileConfig {
            sweeps: Some(2000),
            seed,
            ..Default::default()
        }
    }

    #[test]
    fn backend_parsing() {
        assert_eq!("sa".parse::<SolverBackend>(), Ok(SolverBackend::Sa));
        assert_eq!(
            "remote:http://x/solve".parse::<SolverBackend>(),
            Ok(SolverBackend::Remote("http://x/solve".into()))
        );
        assert!("remote:".parse::<SolverBackend>().is_err());
        assert!("gpu".parse::<SolverBackend>().is_err());
    }

    #[test]
    fn config_validation() {
        assert!(CompileConfig::default().validate().is_ok());
        for bad in [
            CompileConfig {
                solvers: 0,
                ..Default::default()
            },
            CompileConfig {
                layer_cap: 0,
                ..Default::default()
            },
            CompileConfig {
                penalty: Some(-1.0),
                ..Default::default()
            },
            CompileConfig {
                exact_limit: 11,
                ..Default::default()
            },
        ] {
            assert!(matches!(bad.validate(), Err(PipelineError::Config(_))));
        }
    }

    #[test]
    fn empty_circuit_compiles_to_nothing() {
        let d = Device::builtin("ring:4").unwrap();
        let c = parse_qasm("qreg q[3];").unwrap();
        let out = compile(&c, &d, None, &cfg(0)).unwrap();
        assert!(out.physical.gates.is_empty());
        assert_eq!(out.stats().total, 0);
        assert_eq!(out.register_size, 4);
    }

    #[test]
    fn too_many_qubits_is_an_error() {
        let d = Device::builtin("ring:4").unwrap();
        let c = parse_qasm("qreg q[5]; cx q[0],q[4];").unwrap();
        assert!(matches!(
            compile(&c, &d, None, &cfg(0)),
            Err(PipelineError::TooManyQubits { logical: 5, .. })
        ));
    }

    #[test]
    fn model_size_must_match_working_device() {
        let d = Device::builtin("ring:6").unwrap();
        let c = parse_qasm("qreg q[4]; cx q[0],q[3];").unwrap();
        let m = MoveCostModel::zeros("ring:6", 6);
        assert!(matches!(
            compile(&c, &d, Some(&m), &cfg(0)),
            Err(PipelineError::ModelSize { model: 6, device: 4 })
        ));
    }

    #[test]
    fn deterministic_with_pinned_sweeps() {
        let d = Device::builtin("ring:5").unwrap();
        let src = "qreg q[5]; cx q[0],q[2]; h q[1]; cx q[1],q[3]; cx q[4],q[0]; cx q[2],q[4]; t q[0]; cx q[3],q[1];";
        let c = parse_qasm(src).unwrap();
        let mut config = CompileConfig {
            layer_cap: 2,
            var_budget: 25,
            solvers: 3,
            ..cfg(7)
        };
        let a = compile(&c, &d, None, &config).unwrap();
        let b = compile(&c, &d, None, &config).unwrap();
        assert_eq!(a.to_qasm(), b.to_qasm());
        assert_eq!(a.stats(), b.stats());
        assert_eq!(a.chunks, 3);
        for s in [Strategy::Independent, Strategy::Sequential] {
            config.strategy = s;
            let out = compile(&c, &d, None, &config).unwrap();
            assert_eq!(out.stats().logical_cnots, 5);
        }
    }

    #[test]
    fn subset_labels_refer_to_original_qubits() {
        let d = Device::builtin("ibm_qx20").unwrap();
        let c = parse_qasm("qreg q[3]; cx q[0],q[1]; cx q[1],q[2];").unwrap();
        let out = compile(&c, &d, None, &cfg(1)).unwrap();
        assert_eq!(out.device.num_qubits(), 3);
        assert_eq!(out.register_size, 20);
        let qasm = out.to_qasm();
        assert!(qasm.contains("qreg q[20];"));
        for (p, &orig) in out.labels.iter().enumerate() {
            assert!(orig < 20, "p{p} -> {orig}");
        }
    }

    #[test]
    fn baseline_uses_the_working_subset() {
        let d = Device::builtin("ibm_qx20").unwrap();
        let c = parse_qasm("qreg q[3]; cx q[0],q[2]; h q[1]; cx q[2],q[1];").unwrap();
        let out = compile_baseline(&c, &d).unwrap();
        assert_eq!(out.device.num_qubits(), 3);
        assert_eq!(out.stats().logical_cnots, 2);
        assert!(out.to_qasm().contains("qreg q[20];"));
        assert!(compile_baseline(&c, &Device::builtin("linear:2").unwrap()).is_err());
    }

    #[test]
    fn qubo_dump_writes_one_file_per_chunk() {
        let dir = tempfile::tempdir().unwrap();
        let c = parse_qasm("qreg q[3]; cx q[0],q[1]; cx q[1],q[2]; cx q[0],q[2];").unwrap();
        let config = CompileConfig {
            layer_cap: 1,
            var_budget: 9,
            dump_dir: Some(dir.path().to_path_buf()),
            ..cfg(0)
        };
        let out = compile(&c, &Device::builtin("ring:3").unwrap(), None, &config).unwrap();
        assert_eq!(out.chunks, 3);
        for j in 0..3 {
            let text = std::fs::read_to_string(dir.path().join(format!("chunk_{j}.json"))).unwrap();
            let v: serde_json::Value = serde_json::from_str(&text).unwrap();
            assert_eq!(v["num_vars"], 9);
        }
        let missing = CompileConfig {
            dump_dir: Some(dir.path().join("nope")),
            ..config
        };
        let err = compile(&c, &Device::builtin("ring:3").unwrap(), None, &missing).unwrap_err();
        assert!(matches!(err, PipelineError::Dump { .. }), "{err:?}");
    }

    #[test]
    fn polish_off_still_verifies() {
        let c = parse_qasm("qreg q[4]; cx q[0],q[2]; cx q[1],q[3]; cx q[3],q[0]; cx q[2],q[1];").unwrap();
        let config = CompileConfig {
            polish: false,
            layer_cap: 2,
            ..cfg(3)
        };
        let out = compile(&c, &Device::builtin("linear:4").unwrap(), None, &config).unwrap();
        assert_eq!(out.stats().logical_cnots, 4);
    }
}
