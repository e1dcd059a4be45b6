//! Physical circuit synthesis: build each layer's CNOTs under its placement,
//! stitch consecutive layers with SWAPs, and verify the result.

use std::ops::Range;

use serde::Serialize;
use thiserror::Error;

use crate::circuit::{commuting_shared_groups, format_single, Cnot, Gate, LogicalCircuit, SharedRole};
use crate::device::Device;
use crate::model::RearrangementSample;
use crate::partition::Layer;
use crate::perm;
use crate::qubo::rearrangement;
use crate::token_swap::{self, TokenSwapError, DEFAULT_EXACT_LIMIT};

mod fanout;
mod verify;

pub use fanout::{fanout, ladder, tree_fanout};
pub use verify::{verify_equivalence, Verdict};

#[derive(Debug, Error, PartialEq)]
pub enum SynthesisError {
    #[error("control and target are the same physical qubit p{0}")]
    SameQubit(usize),
    #[error("p{0} and p{1} are not adjacent")]
    NotAdjacent(usize, usize),
    #[error("mapping error: {0}")]
    BadMapping(String),
    #[error(transparent)]
    TokenSwap(#[from] TokenSwapError),
}

#[derive(Debug, Clone, PartialEq)]
pub enum PhysicalGate {
    Cnot {
        control: usize,
        target: usize,
    },
    Single {
        name: String,
        params: Vec<f64>,
        qubit: usize,
    },
}

impl PhysicalGate {
    pub fn cx(control: usize, target: usize) -> Self {
        Self::Cnot { control, target }
    }

    pub fn is_cnot(&self) -> bool {
        matches!(self, Self::Cnot { .. })
    }
}

/// Which part of the circuit a run of physical gates implements.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Segment {
    /// Gates of layer `layer`, placed with `mappings[layer]`.
    Layer { layer: usize, gates: Range<usize> },
    /// SWAPs from `mappings[after]` to `mappings[after + 1]`.
    Stitch { after: usize, gates: Range<usize> },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Stats {
    pub building_cost: usize,
    pub moving_cost: usize,
    pub total: usize,
    pub logical_cnots: usize,
    pub average_compilation_cost: f64,
}

impl Stats {
    pub fn new(building_cost: usize, moving_cost: usize, logical_cnots: usize) -> Self {
        let total = building_cost + moving_cost;
        Self {
            building_cost,
            moving_cost,
            total,
            logical_cnots,
            average_compilation_cost: if logical_cnots == 0 {
                0.0
            } else {
                total as f64 / logical_cnots as f64
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhysicalCircuit {
    pub num_qubits: usize,
    pub gates: Vec<PhysicalGate>,
    pub segments: Vec<Segment>,
    /// Per-layer placement, logical to physical.
    pub mappings: Vec<Vec<usize>>,
    pub stats: Stats,
    pub samples: Vec<RearrangementSample>,
}

impl PhysicalCircuit {
    pub fn cnot_count(&self) -> usize {
        self.gates.iter().filter(|g| g.is_cnot()).count()
    }

    pub fn initial_mapping(&self) -> Option<&[usize]> {
        self.mappings.first().map(Vec::as_slice)
    }

    pub fn final_mapping(&self) -> Option<&[usize]> {
        self.mappings.last().map(Vec::as_slice)
    }

    /// OpenQASM 2 over `q[register_size]`, physical qubit `p` written as
    /// `q[labels[p]]`.
    pub fn to_qasm_with_labels(&self, labels: &[usize], register_size: usize) -> String {
        let mut out = String::from("OPENQASM 2.0;\ninclude \"qelib1.inc\";\n");
        out.push_str(&format!("qreg q[{register_size}];\n"));
        for g in &self.gates {
            match g {
                PhysicalGate::Cnot { control, target } => {
                    out.push_str(&format!("cx q[{}],q[{}];\n", labels[*control], labels[*target]))
                }
                PhysicalGate::Single { name, params, qubit } => {
                    out.push_str(&format_single(name, params, labels[*qubit]))
                }
            }
        }
        out
    }

    pub fn to_qasm(&self) -> String {
        self.to_qasm_with_labels(&perm::identity(self.num_qubits), self.num_qubits)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SynthesisOptions {
    /// Use relay qubits for groups of commuting CNOTs when cheaper.
    pub relay: bool,
    pub exact_limit: usize,
}

impl Default for SynthesisOptions {
    fn default() -> Self {
        Self {
            relay: true,
            exact_limit: DEFAULT_EXACT_LIMIT,
        }
    }
}

fn cnot_gates(pairs: &[(usize, usize)]) -> Vec<PhysicalGate> {
    pairs.iter().map(|&(c, t)| PhysicalGate::cx(c, t)).collect()
}

/// CNOT pairs for a CNOT between arbitrary qubits: one gate when adjacent,
/// otherwise the doubled ladder along the lexicographically smallest
/// shortest path, `4(d-1)` gates that leave intermediate qubits unchanged.
pub fn remote_cnot_pairs(
    device: &Device,
    control: usize,
    target: usize,
) -> Result<Vec<(usize, usize)>, SynthesisError> {
    if control == target {
        return Err(SynthesisError::SameQubit(control));
    }
    let path = device.shortest_path(control, target);
    let k = path.len() - 1;
    if k == 1 {
        return Ok(vec![(control, target)]);
    }
    let mut ladder = Vec::with_capacity(2 * k - 2);
    for j in (0..k).rev() {
        ladder.push((path[j], path[j + 1]));
    }
    for j in 1..k - 1 {
        ladder.push((path[j], path[j + 1]));
    }
    let mut out = ladder.clone();
    out.extend(ladder);
    Ok(out)
}

pub fn remote_cnot(device: &Device, control: usize, target: usize) -> Result<Vec<PhysicalGate>, SynthesisError> {
    Ok(cnot_gates(&remote_cnot_pairs(device, control, target)?))
}

pub fn swap_gate(device: &Device, u: usize, v: usize) -> Result<Vec<PhysicalGate>, SynthesisError> {
    if !device.is_adjacent(u, v) {
        return Err(SynthesisError::NotAdjacent(u, v));
    }
    Ok(vec![
        PhysicalGate::cx(u, v),
        PhysicalGate::cx(v, u),
        PhysicalGate::cx(u, v),
    ])
}

fn check_mapping(device: &Device, mapping: &[usize]) -> Result<(), SynthesisError> {
    if mapping.len() != device.num_qubits() || !perm::is_permutation(mapping) {
        return Err(SynthesisError::BadMapping(format!(
            "{mapping:?} is not a bijection onto {} physical qubits",
            device.num_qubits()
        )));
    }
    Ok(())
}

/// Physical gates for one layer under `mapping` (logical to physical), and
/// the number of CNOTs they contain.
///
/// CNOTs are collected into runs between single-qubit gates that touch
/// them; each run is split into commuting groups sharing a control or a
/// target, and each group is built as a fan-out (or fan-in) from the
/// shared qubit. A single-qubit gate on a qubit untouched by the pending run
/// is emitted ahead of it, which is safe because they commute.
pub fn construct_layer(
    layer: &Layer,
    mapping: &[usize],
    device: &Device,
    relay: bool,
) -> Result<(Vec<PhysicalGate>, usize), SynthesisError> {
    check_mapping(device, mapping)?;
    let mut out = Vec::new();
    let mut pending: Vec<Cnot> = Vec::new();
    for g in &layer.gates {
        match g {
            Gate::Cnot(c) => pending.push(*c),
            Gate::Single { name, params, qubit } => {
                if pending.iter().any(|c| c.touches(*qubit)) {
                    emit_run(&pending, mapping, device, relay, &mut out)?;
                    pending.clear();
                }
                out.push(PhysicalGate::Single {
                    name: name.clone(),
                    params: params.clone(),
                    qubit: mapping[qubit.index()],
                });
            }
        }
    }
    emit_run(&pending, mapping, device, relay, &mut out)?;
    let cost = out.iter().filter(|g| g.is_cnot()).count();
    Ok((out, cost))
}

fn emit_run(
    run: &[Cnot],
    mapping: &[usize],
    device: &Device,
    relay: bool,
    out: &mut Vec<PhysicalGate>,
) -> Result<(), SynthesisError> {
    for group in commuting_shared_groups(run) {
        let shared = mapping[group.shared.index()];
        let partners: Vec<usize> = group.partners().iter().map(|q| mapping[q.index()]).collect();
        // repeated partners cancel pairwise, so build them as separate fan-outs
        let mut start = 0;
        while start < partners.len() {
            let mut end = start + 1;
            while end < partners.len() && !partners[start..end].contains(&partners[end]) {
                end += 1;
            }
            let block = &partners[start..end];
            let mut pairs = if block.len() == 1 {
                remote_cnot_pairs(device, shared, block[0])?
            } else {
                fanout(device, shared, block, relay)
            };
            if group.role == SharedRole::Target {
                // transpose: reverse the order and swap every control/target
                pairs.reverse();
                for p in &mut pairs {
                    *p = (p.1, p.0);
                }
            }
            out.extend(cnot_gates(&pairs));
            start = end;
        }
    }
    Ok(())
}

/// SWAP network taking `from` to `to` (both logical to physical), its CNOT
/// count, and the observed rearrangement sample.
pub fn stitch_layers(
    from: &[usize],
    to: &[usize],
    device: &Device,
    exact_limit: usize,
) -> Result<(Vec<PhysicalGate>, usize, RearrangementSample), SynthesisError> {
    check_mapping(device, from)?;
    check_mapping(device, to)?;
    let pi = rearrangement(from, to);
    let seq = token_swap::min_swaps(device, &perm::inverse(&pi), exact_limit)?;
    let mut gates = Vec::with_capacity(3 * seq.len());
    for &(u, v) in &seq {
        gates.extend(swap_gate(device, u, v)?);
    }
    let cost = gates.len();
    Ok((gates, cost, RearrangementSample { pi, swaps: seq.len() }))
}

/// Builds every layer under its mapping and joins consecutive layers with
/// SWAP networks.
pub fn synthesize(
    layers: &[Layer],
    mappings: &[Vec<usize>],
    device: &Device,
    options: SynthesisOptions,
) -> Result<PhysicalCircuit, SynthesisError> {
    if layers.len() != mappings.len() {
        return Err(SynthesisError::BadMapping(format!(
            "{} layers but {} mappings",
            layers.len(),
            mappings.len()
        )));
    }
    let mut gates = Vec::new();
    let mut segments = Vec::new();
    let mut samples = Vec::new();
    let (mut building, mut moving) = (0, 0);
    for (m, layer) in layers.iter().enumerate() {
        if m > 0 {
            let (g, cost, sample) = stitch_layers(&mappings[m - 1], &mappings[m], device, options.exact_limit)?;
            let start = gates.len();
            gates.extend(g);
            segments.push(Segment::Stitch {
                after: m - 1,
                gates: start..gates.len(),
            });
            moving += cost;
            samples.push(sample);
        }
        let (g, cost) = construct_layer(layer, &mappings[m], device, options.relay)?;
        let start = gates.len();
        gates.extend(g);
        segments.push(Segment::Layer {
            layer: m,
            gates: start..gates.len(),
        });
        building += cost;
    }
    let logical: usize = layers.iter().map(|l| l.cnot_count).sum();
    let circuit = PhysicalCircuit {
        num_qubits: device.num_qubits(),
        gates,
        segments,
        mappings: mappings.to_vec(),
        stats: Stats::new(building, moving, logical),
        samples,
    };
    debug_assert_eq!(circuit.stats.total, circuit.cnot_count());
    Ok(circuit)
}

/// A single-layer physical circuit for `circuit` under one fixed placement.
pub fn synthesize_single_layer(
    circuit: &LogicalCircuit,
    mapping: &[usize],
    device: &Device,
    relay: bool,
) -> Result<PhysicalCircuit, SynthesisError> {
    let layer = Layer {
        index: 0,
        gates: circuit.gates().to_vec(),
        cnot_count: circuit.cnot_count(),
    };
    synthesize(
        &[layer],
        &[mapping.to_vec()],
        device,
        SynthesisOptions {
            relay,
            ..Default::default()
        },
    )
}
