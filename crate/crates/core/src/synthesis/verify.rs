//! Equivalence check between a logical circuit and its physical form.
//!
//! CNOTs act on GF(2) row vectors, one bit per input qubit. Both circuits
//! are simulated on rows expressed over the physical inputs (logical qubit
//! `i` starts on `mappings[0][i]`). A single-qubit gate is opaque: its
//! output is a fresh symbol with its own bit. The physical circuit is
//! equivalent when
//!
//! * every physical CNOT acts on a device edge,
//! * each logical single-qubit gate appears exactly once, per logical qubit
//!   in program order, inside a layer segment on the qubit that layer's
//!   mapping assigns, and at that moment the physical row equals the
//!   logical row at the gate's program point,
//! * after the last gate, physical qubit `mappings.last()[i]` holds the
//!   final logical row of qubit `i`.

use std::collections::VecDeque;

use super::{PhysicalCircuit, PhysicalGate, Segment};
use crate::circuit::{Gate, LogicalCircuit};
use crate::device::Device;
use crate::perm;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Verdict {
    pub ok: bool,
    pub diagnostic: Option<String>,
}

impl Verdict {
    fn pass() -> Self {
        Self {
            ok: true,
            diagnostic: None,
        }
    }

    fn fail(msg: String) -> Self {
        Self {
            ok: false,
            diagnostic: Some(msg),
        }
    }
}

type Row = Vec<u64>;

fn unit(width: usize, bit: usize) -> Row {
    let mut r = vec![0; width];
    r[bit / 64] |= 1 << (bit % 64);
    r
}

fn xor_into(rows: &mut [Row], target: usize, control: usize) {
    let (t, c) = if target < control {
        let (lo, hi) = rows.split_at_mut(control);
        (&mut lo[target], &hi[0])
    } else {
        let (lo, hi) = rows.split_at_mut(target);
        (&mut hi[0], &lo[control])
    };
    for (a, b) in t.iter_mut().zip(c) {
        *a ^= b;
    }
}

struct PendingSingle<'a> {
    name: &'a str,
    params: &'a [f64],
    row: Row,
    symbol: usize,
}

pub fn verify_equivalence(logical: &LogicalCircuit, physical: &PhysicalCircuit, device: &Device) -> Verdict {
    match check(logical, physical, device) {
        Ok(()) => Verdict::pass(),
        Err(msg) => Verdict::fail(msg),
    }
}

fn check(logical: &LogicalCircuit, physical: &PhysicalCircuit, device: &Device) -> Result<(), String> {
    let n = device.num_qubits();
    if logical.num_qubits() > n {
        return Err(format!(
            "logical circuit has {} qubits, device {n}",
            logical.num_qubits()
        ));
    }
    if physical.num_qubits != n {
        return Err(format!(
            "physical circuit is over {} qubits, device {n}",
            physical.num_qubits
        ));
    }
    for (m, p) in physical.mappings.iter().enumerate() {
        if p.len() != n || !perm::is_permutation(p) {
            return Err(format!("mapping {m} is not a bijection"));
        }
    }
    let Some(first) = physical.mappings.first() else {
        return if logical.gates().is_empty() && physical.gates.is_empty() {
            Ok(())
        } else {
            Err("no mappings for a nonempty circuit".into())
        };
    };
    let width = (n + logical.gates().len()).div_ceil(64).max(1);

    // logical simulation over physical input bits, recording the row at each
    // single-qubit gate; symbol `n + k` is the output of gate `k`
    let mut lrow: Vec<Row> = (0..n).map(|_| Vec::new()).collect();
    for (i, &mu) in first.iter().enumerate() {
        lrow[i] = unit(width, mu);
    }
    let mut singles: Vec<VecDeque<PendingSingle>> = (0..n).map(|_| VecDeque::new()).collect();
    for (k, g) in logical.gates().iter().enumerate() {
        match g {
            Gate::Cnot(c) => xor_into(&mut lrow, c.target.index(), c.control.index()),
            Gate::Single { name, params, qubit } => {
                let q = qubit.index();
                let row = std::mem::replace(&mut lrow[q], unit(width, n + k));
                singles[q].push_back(PendingSingle {
                    name,
                    params,
                    row,
                    symbol: n + k,
                });
            }
        }
    }

    let mut prow: Vec<Row> = (0..n).map(|mu| unit(width, mu)).collect();
    let mut next = 0;
    for seg in &physical.segments {
        let (range, layer) = match seg {
            Segment::Layer { layer, gates } => (gates, Some(*layer)),
            Segment::Stitch { gates, after } => {
                if *after + 1 >= physical.mappings.len() {
                    return Err(format!("stitch after layer {after} has no following mapping"));
                }
                (gates, None)
            }
        };
        if range.start != next || range.end > physical.gates.len() || range.end < range.start {
            return Err(format!("segment {seg:?} does not continue at gate {next}"));
        }
        next = range.end;
        let inverse = match layer {
            Some(m) => Some(perm::inverse(
                physical
                    .mappings
                    .get(m)
                    .ok_or_else(|| format!("layer segment {m} has no mapping"))?,
            )),
            None => None,
        };
        for k in range.clone() {
            match &physical.gates[k] {
                PhysicalGate::Cnot { control, target } => {
                    if control >= &n || target >= &n || !device.is_adjacent(*control, *target) {
                        return Err(format!("gate {k}: cx p{control},p{target} is not on a device edge"));
                    }
                    xor_into(&mut prow, *target, *control);
                }
                PhysicalGate::Single { name, params, qubit } => {
                    let Some(inv) = &inverse else {
                        return Err(format!("gate {k}: single-qubit gate inside a SWAP network"));
                    };
                    if *qubit >= n {
                        return Err(format!("gate {k}: qubit p{qubit} out of range"));
                    }
                    let i = inv[*qubit];
                    let Some(expect) = singles[i].pop_front() else {
                        return Err(format!("gate {k}: unexpected {name} on p{qubit} (logical {i})"));
                    };
                    if expect.name != name || expect.params != params.as_slice() {
                        return Err(format!(
                            "gate {k}: {name} on p{qubit} but logical {i} expects {} next",
                            expect.name
                        ));
                    }
                    if expect.row != prow[*qubit] {
                        return Err(format!(
                            "gate {k}: {name} on p{qubit} sees the wrong GF(2) state for logical {i}"
                        ));
                    }
                    prow[*qubit] = unit(width, expect.symbol);
                }
            }
        }
    }
    if next != physical.gates.len() {
        return Err(format!("gates from {next} on are not covered by any segment"));
    }
    if let Some(i) = singles.iter().position(|q| !q.is_empty()) {
        return Err(format!(
            "logical {i} has {} single-qubit gate(s) never emitted",
            singles[i].len()
        ));
    }
    let last = physical.mappings.last().expect("nonempty");
    for i in 0..n {
        if prow[last[i]] != lrow[i] {
            return Err(format!(
                "final state of logical {i} on p{} differs from the logical circuit",
                last[i]
            ));
        }
    }
    Ok(())
}
