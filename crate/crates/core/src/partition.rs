//! Layer slicing and chunk grouping.

use std::ops::Range;

use thiserror::Error;

use crate::circuit::{Gate, LogicalCircuit};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PartitionError {
    #[error("variable budget {budget} cannot hold one layer of {n}x{n} mapping variables")]
    BudgetTooSmall { budget: usize, n: usize },
    #[error("layer cap must be at least 1")]
    ZeroLayerCap,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub index: usize,
    pub gates: Vec<Gate>,
    pub cnot_count: usize,
}

impl Layer {
    pub fn cnots(&self) -> impl Iterator<Item = &crate::circuit::Cnot> {
        self.gates.iter().filter_map(Gate::as_cnot)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Chunk {
    pub index: usize,
    pub layers: Range<usize>,
    pub var_count: usize,
}

impl Chunk {
    pub fn len(&self) -> usize {
        self.layers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }
}

/// Greedy left-to-right slicing: a CNOT opens a new layer exactly when the
/// current one already holds `layer_cap` CNOTs. Always returns at least one
/// layer.
pub fn slice_layers(circuit: &LogicalCircuit, layer_cap: usize) -> Result<Vec<Layer>, PartitionError> {
    if layer_cap == 0 {
        return Err(PartitionError::ZeroLayerCap);
    }
    let mut layers = vec![Layer {
        index: 0,
        gates: Vec::new(),
        cnot_count: 0,
    }];
    for g in circuit.gates() {
        if g.is_cnot() && layers.last().unwrap().cnot_count == layer_cap {
            let index = layers.len();
            layers.push(Layer {
                index,
                gates: Vec::new(),
                cnot_count: 0,
            });
        }
        let cur = layers.last_mut().unwrap();
        if g.is_cnot() {
            cur.cnot_count += 1;
        }
        cur.gates.push(g.clone());
    }
    Ok(layers)
}

/// Groups `m` layers into chunks of `floor(var_budget / n^2)` layers.
pub fn group_chunks(m: usize, n: usize, var_budget: usize) -> Result<Vec<Chunk>, PartitionError> {
    let per_layer = n * n;
    if per_layer == 0 || var_budget < per_layer {
        return Err(PartitionError::BudgetTooSmall { budget: var_budget, n });
    }
    let size = var_budget / per_layer;
    Ok((0..m)
        .step_by(size)
        .enumerate()
        .map(|(index, lo)| {
            let hi = (lo + size).min(m);
            Chunk {
                index,
                layers: lo..hi,
                var_count: (hi - lo) * per_layer,
            }
        })
        .collect())
}
