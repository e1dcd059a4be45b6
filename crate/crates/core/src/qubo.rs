//! QUBO formulation of qubit placement for one chunk of layers.
//!
//! Variable `x[m][i][mu]` is 1 when logical qubit `i` sits on physical qubit
//! `mu` during chunk-local layer `m`. The objective adds
//!
//! * the building cost of every CNOT under the layer's placement,
//! * `3 * a[mu][nu]` for each logical qubit moving from `mu` to `nu` between
//!   adjacent layers (the linear SWAP-count model),
//! * the same moving term against already solved neighbouring chunks,
//!   scaled by `1/d` for a neighbour `d` chunks away,
//! * one-hot penalties `lambda * (sum x - 1)^2` for every row and column.

use std::collections::HashMap;

use serde::Serialize;
use thiserror::Error;

use crate::device::Device;
use crate::model::MoveCostModel;
use crate::partition::Layer;

#[derive(Debug, Error, PartialEq)]
pub enum QuboError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("penalty weight {0} must be positive and finite")]
    InvalidPenalty(f64),
    #[error("chunk has no layers")]
    EmptyChunk,
    #[error("bit vector has length {got}, expected {expected}")]
    LengthMismatch { expected: usize, got: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    /// The fixed mapping precedes the chunk's first layer.
    Left,
    /// The fixed mapping follows the chunk's last layer.
    Right,
}

/// A solved neighbouring layer whose mapping is frozen.
#[derive(Debug, Clone, PartialEq)]
pub struct Boundary {
    pub side: Side,
    /// Logical to physical.
    pub mapping: Vec<usize>,
    /// Distance in chunks, at least 1.
    pub distance: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VarLayout {
    pub layers: usize,
    pub n: usize,
}

impl VarLayout {
    pub fn index(&self, m: usize, i: usize, mu: usize) -> usize {
        (m * self.n + i) * self.n + mu
    }

    pub fn num_vars(&self) -> usize {
        self.layers * self.n * self.n
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuboProblem {
    num_vars: usize,
    /// `(u, v, coeff)` with `u <= v`, sorted, no zero coefficients.
    /// `u == v` entries are linear terms.
    terms: Vec<(usize, usize, f64)>,
    constant: f64,
    layout: VarLayout,
    penalty: f64,
    layer_pairs: Vec<Vec<(usize, usize)>>,
    build_cost: Vec<usize>,
}

#[derive(Serialize)]
struct WireQubo<'a> {
    num_vars: usize,
    terms: &'a [(usize, usize, f64)],
    constant: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    timeout_ms: Option<u64>,
}

#[derive(Default)]
struct TermAccumulator {
    map: HashMap<(usize, usize), f64>,
    /// Largest single summand added, before merging equal variable pairs.
    max_single: f64,
}

impl TermAccumulator {
    fn add(&mut self, u: usize, v: usize, c: f64) {
        let key = if u <= v { (u, v) } else { (v, u) };
        *self.map.entry(key).or_insert(0.0) += c;
        self.max_single = self.max_single.max(c.abs());
    }

    fn into_sorted(self) -> Vec<(usize, usize, f64)> {
        let mut v: Vec<_> = self
            .map
            .into_iter()
            .filter(|&(_, c)| c != 0.0)
            .map(|((u, v), c)| (u, v, c))
            .collect();
        v.sort_unstable_by_key(|t| (t.0, t.1));
        v
    }
}

/// Inputs for one chunk. All layers must act on exactly as many logical
/// qubits as the device has physical ones.
pub struct ChunkInput<'a> {
    pub layers: &'a [Layer],
    pub device: &'a Device,
    pub model: &'a MoveCostModel,
    pub boundaries: &'a [Boundary],
    /// Penalty weight; `None` picks twice the largest single cost term, taken
    /// before terms on the same variable pair are merged.
    pub penalty: Option<f64>,
}

pub fn build_chunk_qubo(input: &ChunkInput<'_>) -> Result<QuboProblem, QuboError> {
    let n = input.device.num_qubits();
    if input.layers.is_empty() {
        return Err(QuboError::EmptyChunk);
    }
    if input.model.n != n {
        return Err(QuboError::DimensionMismatch(format!(
            "move model has {} qubits, device has {n}",
            input.model.n
        )));
    }
    let layout = VarLayout {
        layers: input.layers.len(),
        n,
    };
    let mut layer_pairs = Vec::with_capacity(input.layers.len());
    for layer in input.layers {
        let pairs: Vec<(usize, usize)> = layer.cnots().map(|c| (c.control.index(), c.target.index())).collect();
        if let Some(&(c, t)) = pairs.iter().find(|&&(c, t)| c >= n || t >= n) {
            return Err(QuboError::DimensionMismatch(format!(
                "cx {c},{t} outside the {n}-qubit device"
            )));
        }
        layer_pairs.push(pairs);
    }
    for b in input.boundaries {
        if b.mapping.len() != n || b.distance == 0 {
            return Err(QuboError::DimensionMismatch(format!(
                "boundary mapping of length {} at distance {}",
                b.mapping.len(),
                b.distance
            )));
        }
    }
    let build_cost: Vec<usize> = (0..n * n).map(|k| input.device.cost(k / n, k % n)).collect();

    let mut acc = TermAccumulator::default();
    let a = &input.model.a;

    for (m, pairs) in layer_pairs.iter().enumerate() {
        for &(c, t) in pairs {
            for mu in 0..n {
                for nu in 0..n {
                    if mu != nu {
                        acc.add(
                            layout.index(m, c, mu),
                            layout.index(m, t, nu),
                            build_cost[mu * n + nu] as f64,
                        );
                    }
                }
            }
        }
    }
    for m in 0..layout.layers.saturating_sub(1) {
        for i in 0..n {
            for mu in 0..n {
                for nu in 0..n {
                    acc.add(layout.index(m, i, mu), layout.index(m + 1, i, nu), 3.0 * a[mu][nu]);
                }
            }
        }
    }
    for b in input.boundaries {
        let w = 3.0 / b.distance as f64;
        for i in 0..n {
            let fixed = b.mapping[i];
            for free in 0..n {
                let (var, coef) = match b.side {
                    Side::Left => (layout.index(0, i, free), a[fixed][free]),
                    Side::Right => (layout.index(layout.layers - 1, i, free), a[free][fixed]),
                };
                acc.add(var, var, w * coef);
            }
        }
    }

    let max_cost = acc.max_single;
    let lambda = input
        .penalty
        .unwrap_or(if max_cost > 0.0 { 2.0 * max_cost } else { 1.0 });
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(QuboError::InvalidPenalty(lambda));
    }
    let mut constant = 0.0;
    for m in 0..layout.layers {
        for i in 0..n {
            let row: Vec<usize> = (0..n).map(|mu| layout.index(m, i, mu)).collect();
            add_one_hot(&mut acc, &row, lambda);
            let col: Vec<usize> = (0..n).map(|j| layout.index(m, j, i)).collect();
            add_one_hot(&mut acc, &col, lambda);
            constant += 2.0 * lambda;
        }
    }

    Ok(QuboProblem {
        num_vars: layout.num_vars(),
        terms: acc.into_sorted(),
        constant,
        layout,
        penalty: lambda,
        layer_pairs,
        build_cost,
    })
}

/// `lambda * (sum x - 1)^2` without its constant, using `x^2 = x`.
fn add_one_hot(acc: &mut TermAccumulator, vars: &[usize], lambda: f64) {
    for (k, &u) in vars.iter().enumerate() {
        acc.add(u, u, -lambda);
        for &v in &vars[k + 1..] {
            acc.add(u, v, 2.0 * lambda);
        }
    }
}

impl QuboProblem {
    /// A bare objective with no placement structure; decoding is meaningless.
    pub fn from_terms(num_vars: usize, terms: impl IntoIterator<Item = (usize, usize, f64)>, constant: f64) -> Self {
        let mut acc = TermAccumulator::default();
        for (u, v, c) in terms {
            assert!(u < num_vars && v < num_vars, "term ({u},{v}) out of range");
            acc.add(u, v, c);
        }
        Self {
            num_vars,
            terms: acc.into_sorted(),
            constant,
            layout: VarLayout { layers: 0, n: 0 },
            penalty: 0.0,
            layer_pairs: Vec::new(),
            build_cost: Vec::new(),
        }
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn terms(&self) -> &[(usize, usize, f64)] {
        &self.terms
    }

    pub fn constant(&self) -> f64 {
        self.constant
    }

    pub fn layout(&self) -> VarLayout {
        self.layout
    }

    pub fn penalty(&self) -> f64 {
        self.penalty
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.terms.iter().fold(0.0, |m, t| m.max(t.2.abs()))
    }

    pub fn energy(&self, bits: &[u8]) -> Result<f64, QuboError> {
        if bits.len() != self.num_vars {
            return Err(QuboError::LengthMismatch {
                expected: self.num_vars,
                got: bits.len(),
            });
        }
        Ok(self.constant
            + self
                .terms
                .iter()
                .filter(|&&(u, v, _)| bits[u] != 0 && bits[v] != 0)
                .map(|t| t.2)
                .sum::<f64>())
    }

    /// JSON body for remote solvers and debugging dumps.
    pub fn to_json(&self, timeout_ms: Option<u64>) -> String {
        serde_json::to_string(&WireQubo {
            num_vars: self.num_vars,
            terms: &self.terms,
            constant: self.constant,
            timeout_ms,
        })
        .expect("qubo serialises")
    }

    /// Bits for a sequence of per-layer mappings (logical to physical).
    pub fn encode(&self, mappings: &[Vec<usize>]) -> Vec<u8> {
        let mut bits = vec![0u8; self.num_vars];
        for (m, p) in mappings.iter().enumerate() {
            for (i, &mu) in p.iter().enumerate() {
                bits[self.layout.index(m, i, mu)] = 1;
            }
        }
        bits
    }

    /// Per-layer bijections read from `bits`, repairing invalid rows and
    /// columns.
    ///
    /// Set bits are accepted in `(i, mu)` order whenever both the row and the
    /// column are still free. Remaining logical qubits, lowest first, take
    /// the free physical qubit that adds the least building cost against
    /// already placed CNOT partners (ties to the lowest index).
    pub fn decode(&self, bits: &[u8]) -> Result<Vec<Vec<usize>>, QuboError> {
        if bits.len() != self.num_vars {
            return Err(QuboError::LengthMismatch {
                expected: self.num_vars,
                got: bits.len(),
            });
        }
        let n = self.layout.n;
        let mut out = Vec::with_capacity(self.layout.layers);
        for m in 0..self.layout.layers {
            let mut map = vec![usize::MAX; n];
            let mut used = vec![false; n];
            for i in 0..n {
                for mu in 0..n {
                    if bits[self.layout.index(m, i, mu)] != 0 && map[i] == usize::MAX && !used[mu] {
                        map[i] = mu;
                        used[mu] = true;
                    }
                }
            }
            for i in 0..n {
                if map[i] != usize::MAX {
                    continue;
                }
                let mu = (0..n)
                    .filter(|&mu| !used[mu])
                    .min_by_key(|&mu| {
                        let added: usize = self.layer_pairs[m]
                            .iter()
                            .filter_map(|&(c, t)| {
                                let other = if c == i {
                                    t
                                } else if t == i {
                                    c
                                } else {
                                    return None;
                                };
                                (map[other] != usize::MAX).then(|| self.build_cost[mu * n + map[other]])
                            })
                            .sum();
                        (added, mu)
                    })
                    .expect("a free column remains");
                map[i] = mu;
                used[mu] = true;
            }
            out.push(map);
        }
        Ok(out)
    }

    /// Greedy descent over feasible placements. Moves swap the positions of
    /// two logical qubits in one layer or in a layer and all later ones, or
    /// copy a neighbouring layer's mapping (forward copies may extend to the
    /// end of the chunk). Any move that lowers the energy is taken. Stops at
    /// a local minimum or after `max_passes` passes.
    pub fn polish(&self, mappings: &mut [Vec<usize>], max_passes: usize) -> Result<(), QuboError> {
        let n = self.layout.n;
        let layers = self.layout.layers;
        if mappings.len() != layers || mappings.iter().any(|p| p.len() != n) {
            return Err(QuboError::DimensionMismatch(format!(
                "{} mappings for {layers} layers of {n} qubits",
                mappings.len()
            )));
        }
        let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); self.num_vars];
        let mut lin = vec![0.0; self.num_vars];
        for &(u, v, c) in &self.terms {
            if u == v {
                lin[u] += c;
            } else {
                adj[u].push((v, c));
                adj[v].push((u, c));
            }
        }
        let mut x = self.encode(mappings);
        let mut in_move = vec![false; self.num_vars];
        let mut vars = Vec::new();
        let mut cand: Vec<Vec<usize>> = Vec::new();
        for _ in 0..max_passes {
            let mut improved = false;
            for m in 0..layers {
                let mut moves: Vec<Move> = Vec::new();
                for i in 0..n {
                    for j in i + 1..n {
                        moves.push(Move::Swap(i, j, m + 1));
                        if m + 1 < layers {
                            moves.push(Move::Swap(i, j, layers));
                        }
                    }
                }
                if m > 0 {
                    moves.extend([Move::Copy(m - 1, m + 1), Move::Copy(m - 1, layers)]);
                }
                if m + 1 < layers {
                    moves.push(Move::Copy(m + 1, m + 1));
                }
                for mv in moves {
                    cand.clear();
                    match mv {
                        Move::Swap(i, j, last) => {
                            for map in &mappings[m..last] {
                                let mut p = map.clone();
                                p.swap(i, j);
                                cand.push(p);
                            }
                        }
                        Move::Copy(src, last) => {
                            cand.extend(std::iter::repeat_n(mappings[src].clone(), last - m));
                        }
                    }
                    vars.clear();
                    for (k, new) in cand.iter().enumerate() {
                        let old = &mappings[m + k];
                        for q in 0..n {
                            if old[q] != new[q] {
                                vars.push(self.layout.index(m + k, q, old[q]));
                                vars.push(self.layout.index(m + k, q, new[q]));
                            }
                        }
                    }
                    if vars.is_empty() || flip_delta(&x, &vars, &lin, &adj, &mut in_move) >= -1e-9 {
                        continue;
                    }
                    for &v in &vars {
                        x[v] ^= 1;
                    }
                    for (k, new) in cand.drain(..).enumerate() {
                        mappings[m + k] = new;
                    }
                    improved = true;
                }
            }
            if !improved {
                break;
            }
        }
        Ok(())
    }
}

/// A placement change starting at the current layer `m`, covering layers
/// `m..last`.
#[derive(Clone, Copy)]
enum Move {
    /// Swap the positions of two logical qubits.
    Swap(usize, usize, usize),
    /// Take over the mapping of another layer.
    Copy(usize, usize),
}

/// Energy change from flipping every variable in `vars` (distinct) at once.
fn flip_delta(x: &[u8], vars: &[usize], lin: &[f64], adj: &[Vec<(usize, f64)>], in_move: &mut [bool]) -> f64 {
    for &v in vars {
        in_move[v] = true;
    }
    let mut d = 0.0;
    for &v in vars {
        let s = if x[v] == 0 { 1.0 } else { -1.0 };
        let mut f = lin[v];
        let mut inner = 0.0;
        for &(u, w) in &adj[v] {
            if in_move[u] {
                // each internal pair is seen from both ends
                inner += 0.5 * w * ((1 - x[u]) as f64 * (1 - x[v]) as f64 - (x[u] * x[v]) as f64);
            } else if x[u] != 0 {
                f += w;
            }
        }
        d += s * f + inner;
    }
    for &v in vars {
        in_move[v] = false;
    }
    d
}

/// Building cost of the CNOTs of `layer` under `mapping`.
pub fn layer_building_cost(layer: &Layer, mapping: &[usize], device: &Device) -> usize {
    layer
        .cnots()
        .map(|c| device.cost(mapping[c.control.index()], mapping[c.target.index()]))
        .sum()
}

/// Destination-form rearrangement between two consecutive mappings:
/// `pi[from[i]] = to[i]`.
pub fn rearrangement(from: &[usize], to: &[usize]) -> Vec<usize> {
    let mut pi = vec![0; from.len()];
    for (i, &mu) in from.iter().enumerate() {
        pi[mu] = to[i];
    }
    pi
}

/// Objective value of a feasible placement computed straight from the cost
/// definitions, without going through the QUBO terms.
pub fn direct_objective(input: &ChunkInput<'_>, mappings: &[Vec<usize>]) -> f64 {
    let mut total = 0.0;
    for (layer, p) in input.layers.iter().zip(mappings) {
        total += layer_building_cost(layer, p, input.device) as f64;
    }
    for w in mappings.windows(2) {
        total += 3.0 * input.model.estimate_swaps(&rearrangement(&w[0], &w[1]));
    }
    for b in input.boundaries {
        let scale = 1.0 / b.distance as f64;
        let pi = match b.side {
            Side::Left => rearrangement(&b.mapping, &mappings[0]),
            Side::Right => rearrangement(mappings.last().unwrap(), &b.mapping),
        };
        total += scale * 3.0 * input.model.estimate_swaps(&pi);
    }
    total
}
