//! Naive reference router: identity placement, then for every CNOT the
//! control is swapped along a shortest path until it sits next to the
//! target. Each CNOT costs `3 (d - 1) + 1`.

use crate::circuit::{Gate, LogicalCircuit};
use crate::device::Device;
use crate::perm;
use crate::synthesis::{swap_gate, PhysicalCircuit, PhysicalGate, Segment, Stats, SynthesisError};

pub fn compile_naive(circuit: &LogicalCircuit, device: &Device) -> Result<PhysicalCircuit, SynthesisError> {
    let n = device.num_qubits();
    if circuit.num_qubits() > n {
        return Err(SynthesisError::BadMapping(format!(
            "{} logical qubits on a {n}-qubit device",
            circuit.num_qubits()
        )));
    }
    let mut pos = perm::identity(n);
    let mut mappings = vec![pos.clone()];
    let mut gates = Vec::new();
    let mut segments = Vec::new();
    let mut layer_start = 0;
    let mut swaps = 0;

    for g in circuit.gates() {
        match g {
            Gate::Single { name, params, qubit } => gates.push(PhysicalGate::Single {
                name: name.clone(),
                params: params.clone(),
                qubit: pos[qubit.index()],
            }),
            Gate::Cnot(c) => {
                let (lc, lt) = (c.control.index(), c.target.index());
                let path = device.shortest_path(pos[lc], pos[lt]);
                if path.len() > 2 {
                    let m = mappings.len() - 1;
                    segments.push(Segment::Layer {
                        layer: m,
                        gates: layer_start..gates.len(),
                    });
                    let start = gates.len();
                    let mut occupant = perm::inverse(&pos);
                    for w in path[..path.len() - 1].windows(2) {
                        let (u, v) = (w[0], w[1]);
                        gates.extend(swap_gate(device, u, v)?);
                        occupant.swap(u, v);
                        pos[occupant[u]] = u;
                        pos[occupant[v]] = v;
                        swaps += 1;
                    }
                    segments.push(Segment::Stitch {
                        after: m,
                        gates: start..gates.len(),
                    });
                    mappings.push(pos.clone());
                    layer_start = gates.len();
                }
                gates.push(PhysicalGate::cx(pos[lc], pos[lt]));
            }
        }
    }
    segments.push(Segment::Layer {
        layer: mappings.len() - 1,
        gates: layer_start..gates.len(),
    });
    let logical = circuit.cnot_count();
    Ok(PhysicalCircuit {
        num_qubits: n,
        gates,
        segments,
        mappings,
        stats: Stats::new(logical, 3 * swaps, logical),
        samples: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;
    use crate::circuit::parse_qasm;
    use crate::synthesis::verify_equivalence;

    #[test]
    fn adjacent_gates_cost_one_each() {
        let d = Device::builtin("ring:4").unwrap();
        let c = parse_qasm("qreg q[4]; h q[0]; cx q[0],q[1]; cx q[1],q[2]; t q[2];").unwrap();
        let p = compile_naive(&c, &d).unwrap();
        assert_eq!(p.stats.total, 2);
        assert_eq!(p.stats.average_compilation_cost, 1.0);
        assert!(verify_equivalence(&c, &p, &d).ok);
    }

    #[test]
    fn far_control_is_walked_over() {
        let d = Device::builtin("linear:4").unwrap();
        let c = parse_qasm("qreg q[4]; cx q[0],q[3]; h q[0]; cx q[0],q[3];").unwrap();
        let p = compile_naive(&c, &d).unwrap();
        assert_eq!(p.stats.moving_cost, 6);
        assert_eq!(p.stats.total, 8);
        assert_eq!(p.final_mapping().unwrap(), &[2, 0, 1, 3]);
        assert!(verify_equivalence(&c, &p, &d).ok);
    }

    #[test]
    fn too_many_qubits() {
        let d = Device::builtin("ring:4").unwrap();
        let c = parse_qasm("qreg q[5]; cx q[0],q[4];").unwrap();
        assert!(compile_naive(&c, &d).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn naive_output_verifies_and_is_bounded(
            gates in prop::collection::vec((0usize..6, 1usize..6, any::<bool>()), 0..60),
            dev_ix in 0usize..3,
        ) {
            let d = Device::builtin(["ring:6", "linear:6", "star:0:6"][dev_ix]).unwrap();
            let gates = gates
                .into_iter()
                .map(|(a, o, single)| if single { Gate::single("h", a) } else { Gate::cnot(a, (a + o) % 6) })
                .collect();
            let c = LogicalCircuit::new(6, gates).unwrap();
            let p = compile_naive(&c, &d).unwrap();
            let v = verify_equivalence(&c, &p, &d);
            prop_assert!(v.ok, "{:?}", v.diagnostic);
            prop_assert_eq!(p.cnot_count(), p.stats.total);
            prop_assert!(p.stats.total <= c.cnot_count() * (3 * d.diameter() + 1));
        }
    }
}
