//! Workload generators shared by the benchmarks.

use qroute::circuit::{Gate, LogicalCircuit};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random CNOT circuit on `n >= 2` qubits with `singles` single-qubit gates
/// scattered through it.
pub fn random_circuit(n: usize, cnots: usize, singles: usize, seed: u64) -> LogicalCircuit {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut gates: Vec<Gate> = (0..cnots)
        .map(|_| {
            let c = rng.random_range(0..n);
            Gate::cnot(c, (c + rng.random_range(1..n)) % n)
        })
        .collect();
    for _ in 0..singles {
        let at = rng.random_range(0..=gates.len());
        gates.insert(at, Gate::single("h", rng.random_range(0..n)));
    }
    LogicalCircuit::new(n, gates).expect("indices are in range")
}

/// Random permutation of `0..n`.
pub fn random_permutation(n: usize, seed: u64) -> Vec<usize> {
    use rand::seq::SliceRandom;
    let mut p: Vec<usize> = (0..n).collect();
    p.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    p
}
