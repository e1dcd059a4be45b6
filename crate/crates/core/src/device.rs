//! Physical devices: undirected coupling graphs with precomputed hop
//! distances and CNOT building costs.

use std::collections::VecDeque;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

const QX5_JSON: &str = include_str!("../devices/ibm_qx5.json");
const QX20_JSON: &str = include_str!("../devices/ibm_qx20.json");

/// Names accepted by [`Device::builtin`], for help text.
pub const BUILTIN_NAMES: &[&str] = &["ibm_qx5", "ibm_qx20", "linear:<n>", "ring:<n>", "star:<hub>:<n>"];

#[derive(Debug, Error)]
pub enum DeviceError {
    #[error("coupling graph is disconnected")]
    DisconnectedGraph,
    #[error("control and target are the same physical qubit p{0}")]
    SameQubit(usize),
    #[error("unknown device `{0}`")]
    UnknownDevice(String),
    #[error("invalid topology: {0}")]
    InvalidTopology(String),
    #[error("cannot select a connected {k}-qubit subset of a {n}-qubit device")]
    SubsetInfeasible { k: usize, n: usize },
    #[error("cannot read device file: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed device file: {0}")]
    Json(#[from] serde_json::Error),
}

/// Hop counts between every pair of physical qubits.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DistanceMatrix {
    n: usize,
    d: Vec<usize>,
}

impl DistanceMatrix {
    pub fn get(&self, u: usize, v: usize) -> usize {
        self.d[u * self.n + v]
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }
}

/// Unweighted all-pairs shortest paths by one BFS per source.
pub fn all_pairs_distance(adj: &[Vec<usize>]) -> Result<DistanceMatrix, DeviceError> {
    let n = adj.len();
    let mut d = vec![usize::MAX; n * n];
    for s in 0..n {
        let row = &mut d[s * n..(s + 1) * n];
        row[s] = 0;
        let mut queue = VecDeque::from([s]);
        while let Some(u) = queue.pop_front() {
            for &v in &adj[u] {
                if row[v] == usize::MAX {
                    row[v] = row[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        if row.contains(&usize::MAX) {
            return Err(DeviceError::DisconnectedGraph);
        }
    }
    Ok(DistanceMatrix { n, d })
}

/// Physical CNOTs needed for a CNOT between qubits at hop distance `d`.
pub fn cost_for_distance(d: usize) -> usize {
    if d <= 1 {
        1
    } else {
        4 * (d - 1)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct DeviceFile {
    name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    source: Option<String>,
    num_qubits: usize,
    edges: Vec<[usize; 2]>,
}

#[derive(Debug, Clone)]
pub struct Device {
    name: String,
    num_qubits: usize,
    edges: Vec<(usize, usize)>,
    adj: Vec<Vec<usize>>,
    dist: DistanceMatrix,
}

impl PartialEq for Device {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name && self.num_qubits == other.num_qubits && self.edges == other.edges
    }
}

impl Device {
    /// Validates and normalises an undirected coupling graph. Duplicate and
    /// reversed edges collapse to one `(lo, hi)` pair.
    pub fn new(
        name: impl Into<String>,
        num_qubits: usize,
        edges: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self, DeviceError> {
        if num_qubits == 0 {
            return Err(DeviceError::InvalidTopology("device has no qubits".into()));
        }
        let mut norm = Vec::new();
        for (u, v) in edges {
            if u >= num_qubits || v >= num_qubits {
                return Err(DeviceError::InvalidTopology(format!(
                    "edge ({u},{v}) out of range for {num_qubits} qubits"
                )));
            }
            if u == v {
                return Err(DeviceError::InvalidTopology(format!("self-loop on {u}")));
            }
            norm.push((u.min(v), u.max(v)));
        }
        norm.sort_unstable();
        norm.dedup();
        let mut adj = vec![Vec::new(); num_qubits];
        for &(u, v) in &norm {
            adj[u].push(v);
            adj[v].push(u);
        }
        for a in &mut adj {
            a.sort_unstable();
        }
        let dist = all_pairs_distance(&adj)?;
        Ok(Self {
            name: name.into(),
            num_qubits,
            edges: norm,
            adj,
            dist,
        })
    }

    pub fn builtin(spec: &str) -> Result<Self, DeviceError> {
        let unknown = || DeviceError::UnknownDevice(spec.to_string());
        let num = |s: &str| s.parse::<usize>().map_err(|_| unknown());
        let parts: Vec<&str> = spec.split(':').collect();
        match parts.as_slice() {
            ["ibm_qx5"] => Self::from_json(QX5_JSON),
            ["ibm_qx20"] => Self::from_json(QX20_JSON),
            ["linear", n] => {
                let n = num(n)?;
                Self::new(spec, n, (1..n).map(|i| (i - 1, i)))
            }
            ["ring", n] => {
                let n = num(n)?;
                if n < 3 {
                    return Err(DeviceError::InvalidTopology(format!(
                        "a ring needs at least 3 qubits, got {n}"
                    )));
                }
                Self::new(spec, n, (0..n).map(|i| (i, (i + 1) % n)))
            }
            ["star", hub, n] => {
                let (hub, n) = (num(hub)?, num(n)?);
                if hub >= n {
                    return Err(DeviceError::InvalidTopology(format!(
                        "hub {hub} out of range for {n} qubits"
                    )));
                }
                Self::new(spec, n, (0..n).filter(|&i| i != hub).map(|i| (hub, i)))
            }
            _ => Err(unknown()),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, DeviceError> {
        let f: DeviceFile = serde_json::from_str(text)?;
        Self::new(f.name, f.num_qubits, f.edges.into_iter().map(|[u, v]| (u, v)))
    }

    pub fn load(path: &Path) -> Result<Self, DeviceError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Resolves a builtin name, falling back to a JSON file path.
    pub fn resolve(spec: &str) -> Result<Self, DeviceError> {
        match Self::builtin(spec) {
            Err(DeviceError::UnknownDevice(_)) if Path::new(spec).exists() => Self::load(Path::new(spec)),
            r => r,
        }
    }

    pub fn to_json(&self) -> String {
        let f = DeviceFile {
            name: self.name.clone(),
            source: None,
            num_qubits: self.num_qubits,
            edges: self.edges.iter().map(|&(u, v)| [u, v]).collect(),
        };
        serde_json::to_string_pretty(&f).expect("device serialises")
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn neighbors(&self, u: usize) -> &[usize] {
        &self.adj[u]
    }

    pub fn is_adjacent(&self, u: usize, v: usize) -> bool {
        self.adj[u].binary_search(&v).is_ok()
    }

    pub fn distances(&self) -> &DistanceMatrix {
        &self.dist
    }

    pub fn distance(&self, u: usize, v: usize) -> usize {
        self.dist.get(u, v)
    }

    /// `max(1, 4(d-1))`, the cost of a CNOT between two distinct qubits.
    pub fn build_cost(&self, u: usize, v: usize) -> Result<usize, DeviceError> {
        if u == v {
            return Err(DeviceError::SameQubit(u));
        }
        Ok(self.cost(u, v))
    }

    /// Build cost without the distinctness check; zero on the diagonal.
    pub fn cost(&self, u: usize, v: usize) -> usize {
        if u == v {
            0
        } else {
            cost_for_distance(self.distance(u, v))
        }
    }

    pub fn eccentricity(&self, u: usize) -> usize {
        (0..self.num_qubits).map(|v| self.distance(u, v)).max().unwrap_or(0)
    }

    pub fn diameter(&self) -> usize {
        (0..self.num_qubits).map(|u| self.eccentricity(u)).max().unwrap_or(0)
    }

    /// The lexicographically smallest shortest path from `from` to `to`,
    /// both endpoints included.
    pub fn shortest_path(&self, from: usize, to: usize) -> Vec<usize> {
        let mut path = vec![from];
        let mut cur = from;
        while cur != to {
            let d = self.distance(cur, to);
            cur = *self.adj[cur]
                .iter()
                .find(|&&w| self.distance(w, to) + 1 == d)
                .expect("connected graph has a next hop");
            path.push(cur);
        }
        path
    }

    /// Greedy connected subset of `k` qubits: seed at the highest-degree
    /// vertex, then repeatedly add the frontier vertex with the smallest
    /// total distance to the chosen set (ties to the lowest index).
    ///
    /// Returns the induced subgraph (relabelled `0..k` in original index
    /// order) and the original index of each new qubit.
    pub fn select_subset(&self, k: usize) -> Result<(Device, Vec<usize>), DeviceError> {
        let n = self.num_qubits;
        if k == 0 || k > n {
            return Err(DeviceError::SubsetInfeasible { k, n });
        }
        if k == n {
            return Ok((self.clone(), (0..n).collect()));
        }
        let seed = (0..n)
            .max_by_key(|&u| (self.adj[u].len(), std::cmp::Reverse(u)))
            .expect("nonempty");
        let mut chosen = vec![false; n];
        chosen[seed] = true;
        let mut order = vec![seed];
        while order.len() < k {
            let next = (0..n)
                .filter(|&v| !chosen[v] && self.adj[v].iter().any(|&w| chosen[w]))
                .min_by_key(|&v| (order.iter().map(|&c| self.distance(v, c)).sum::<usize>(), v))
                .ok_or(DeviceError::SubsetInfeasible { k, n })?;
            chosen[next] = true;
            order.push(next);
        }
        let mut keep = order;
        keep.sort_unstable();
        let mut remap = vec![usize::MAX; n];
        for (new, &old) in keep.iter().enumerate() {
            remap[old] = new;
        }
        let edges: Vec<(usize, usize)> = self
            .edges
            .iter()
            .filter(|&&(u, v)| chosen[u] && chosen[v])
            .map(|&(u, v)| (remap[u], remap[v]))
            .collect();
        let sub = Device::new(format!("{}[{k}]", self.name), k, edges)?;
        Ok((sub, keep))
    }
}
