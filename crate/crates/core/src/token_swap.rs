//! Token swapping: realise a rearrangement of qubit states on the coupling
//! graph as a sequence of adjacent SWAPs.
//!
//! Both solvers take a *target arrangement*: `target[pos]` is the position
//! whose state must end up at `pos`. Applying the returned swaps to the
//! identity arrangement with [`apply_swaps`] yields `target`. A rearrangement
//! in destination form (`pi[mu] = nu`, the state at `mu` moves to `nu`) has
//! target arrangement `perm::inverse(pi)`.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap, VecDeque};
use std::sync::{Arc, Mutex, OnceLock};

use thiserror::Error;

use crate::device::Device;
use crate::perm;

pub type SwapSequence = Vec<(usize, usize)>;

/// The exact solver keeps one byte of distance and one of parent edge per
/// permutation; 10! states is where that stops being cheap.
pub const MAX_EXACT_QUBITS: usize = 10;
pub const DEFAULT_EXACT_LIMIT: usize = 8;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TokenSwapError {
    #[error("{n} qubits exceeds the exact token-swap limit of {limit}")]
    TooLarge { n: usize, limit: usize },
    #[error("({0},{1}) is not a device edge")]
    InvalidEdge(usize, usize),
    #[error("arrangement is not a permutation of the device qubits")]
    NotAPermutation,
}

/// Swaps positions pairwise in order. Every pair must be a device edge.
pub fn apply_swaps(
    device: &Device,
    arrangement: &[usize],
    seq: &[(usize, usize)],
) -> Result<Vec<usize>, TokenSwapError> {
    let mut arr = arrangement.to_vec();
    for &(u, v) in seq {
        if u >= arr.len() || v >= arr.len() || !device.is_adjacent(u, v) {
            return Err(TokenSwapError::InvalidEdge(u, v));
        }
        arr.swap(u, v);
    }
    Ok(arr)
}

/// Breadth-first search over every arrangement of a device, rooted at the
/// identity. Distances are exact minimum swap counts.
pub struct ExactSwapTable {
    n: usize,
    edges: Vec<(usize, usize)>,
    dist: Vec<u8>,
    parent_edge: Vec<u8>,
}

const NO_EDGE: u8 = u8::MAX;

impl ExactSwapTable {
    fn build(device: &Device) -> Self {
        let n = device.num_qubits();
        let edges = device.edges().to_vec();
        assert!(edges.len() < NO_EDGE as usize);
        let states = perm::factorial(n);
        let mut dist = vec![u8::MAX; states];
        let mut parent_edge = vec![NO_EDGE; states];
        dist[0] = 0;
        let mut queue = VecDeque::from([0usize]);
        let mut arr = Vec::with_capacity(n);
        while let Some(r) = queue.pop_front() {
            perm::unrank(r, n, &mut arr);
            for (e, &(u, v)) in edges.iter().enumerate() {
                arr.swap(u, v);
                let s = perm::rank(&arr);
                if dist[s] == u8::MAX {
                    dist[s] = dist[r] + 1;
                    parent_edge[s] = e as u8;
                    queue.push_back(s);
                }
                arr.swap(u, v);
            }
        }
        Self {
            n,
            edges,
            dist,
            parent_edge,
        }
    }

    /// Shared table for `device`, built on first use.
    pub fn for_device(device: &Device) -> Arc<ExactSwapTable> {
        type Cache = Mutex<HashMap<(usize, Vec<(usize, usize)>), Arc<ExactSwapTable>>>;
        static CACHE: OnceLock<Cache> = OnceLock::new();
        let key = (device.num_qubits(), device.edges().to_vec());
        let cache = CACHE.get_or_init(Default::default);
        if let Some(t) = cache.lock().unwrap().get(&key) {
            return Arc::clone(t);
        }
        // Built outside the lock; a racing builder just wastes work.
        let table = Arc::new(Self::build(device));
        Arc::clone(cache.lock().unwrap().entry(key).or_insert(table))
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    /// Minimum swap count for the arrangement with lexicographic rank `r`.
    pub fn distance_by_rank(&self, r: usize) -> usize {
        self.dist[r] as usize
    }

    pub fn distance(&self, target: &[usize]) -> usize {
        self.dist[perm::rank(target)] as usize
    }

    pub fn sequence(&self, target: &[usize]) -> SwapSequence {
        let mut arr = target.to_vec();
        let mut r = perm::rank(&arr);
        let mut seq = Vec::with_capacity(self.dist[r] as usize);
        while r != 0 {
            let (u, v) = self.edges[self.parent_edge[r] as usize];
            seq.push((u, v));
            arr.swap(u, v);
            r = perm::rank(&arr);
        }
        seq.reverse();
        seq
    }
}

/// A provably shortest swap sequence realising `target`.
pub fn min_swaps_exact(device: &Device, target: &[usize], limit: usize) -> Result<SwapSequence, TokenSwapError> {
    let n = device.num_qubits();
    let limit = limit.min(MAX_EXACT_QUBITS);
    if n > limit {
        return Err(TokenSwapError::TooLarge { n, limit });
    }
    check_target(n, target)?;
    Ok(ExactSwapTable::for_device(device).sequence(target))
}

fn check_target(n: usize, target: &[usize]) -> Result<(), TokenSwapError> {
    if target.len() != n || !perm::is_permutation(target) {
        return Err(TokenSwapError::NotAPermutation);
    }
    Ok(())
}

/// Order in which destinations are fixed: grow a connected sequence from the
/// vertex of largest eccentricity, always appending the lowest-index
/// frontier vertex, then reverse it. Every suffix of the result induces a
/// connected subgraph.
pub fn destination_order(device: &Device) -> Vec<usize> {
    let n = device.num_qubits();
    let seed = (0..n)
        .max_by_key(|&u| (device.eccentricity(u), Reverse(u)))
        .expect("nonempty device");
    let mut chosen = vec![false; n];
    chosen[seed] = true;
    let mut order = vec![seed];
    while order.len() < n {
        let next = (0..n)
            .find(|&v| !chosen[v] && device.neighbors(v).iter().any(|&w| chosen[w]))
            .expect("connected device");
        chosen[next] = true;
        order.push(next);
    }
    order.reverse();
    order
}

/// Routes tokens one destination at a time along minimum-weight paths in the
/// not-yet-fixed subgraph.
///
/// Moving the token at `mu` onto `nu` is weighted by the change in distance
/// to its own destination plus the change for the token pushed back from
/// `nu`, offset by 2 so every weight is non-negative. Weights are taken at
/// the start of each routing.
pub fn min_swaps_heuristic(device: &Device, target: &[usize]) -> Result<SwapSequence, TokenSwapError> {
    let n = device.num_qubits();
    check_target(n, target)?;
    let d = |a: usize, b: usize| device.distance(a, b) as i64;
    // token -> position it must reach
    let goal = perm::inverse(target);
    let mut cur = perm::identity(n);
    let mut fixed = vec![false; n];
    let mut seq = Vec::new();

    for dest in destination_order(device) {
        let token = target[dest];
        let start = cur.iter().position(|&t| t == token).expect("token present");
        if start != dest {
            let weight = |mu: usize, nu: usize| -> i64 {
                let own = d(nu, goal[token]) - d(mu, goal[token]);
                let q = goal[cur[nu]];
                let other = d(mu, q) - d(nu, q);
                own + other + 2
            };
            let path = min_weight_path(device, &fixed, start, dest, weight);
            for w in path.windows(2) {
                cur.swap(w[0], w[1]);
                seq.push((w[0], w[1]));
            }
        }
        fixed[dest] = true;
    }
    debug_assert_eq!(cur, target);
    Ok(seq)
}

fn min_weight_path(
    device: &Device,
    fixed: &[bool],
    start: usize,
    dest: usize,
    weight: impl Fn(usize, usize) -> i64,
) -> Vec<usize> {
    let n = device.num_qubits();
    // Dijkstra towards `dest` over reversed edges.
    let mut to_dest = vec![i64::MAX; n];
    to_dest[dest] = 0;
    let mut heap = BinaryHeap::from([Reverse((0i64, dest))]);
    while let Some(Reverse((dv, v))) = heap.pop() {
        if dv > to_dest[v] {
            continue;
        }
        for &u in device.neighbors(v) {
            if fixed[u] {
                continue;
            }
            let du = dv + weight(u, v);
            if du < to_dest[u] {
                to_dest[u] = du;
                heap.push(Reverse((du, u)));
            }
        }
    }

    let mut path = vec![start];
    let mut visited = vec![false; n];
    visited[start] = true;
    let mut cur = start;
    while cur != dest {
        let next = device.neighbors(cur).iter().copied().find(|&v| {
            !fixed[v] && !visited[v] && to_dest[v] != i64::MAX && weight(cur, v) + to_dest[v] == to_dest[cur]
        });
        match next {
            Some(v) => {
                visited[v] = true;
                path.push(v);
                cur = v;
            }
            None => return bfs_path(device, fixed, start, dest),
        }
    }
    path
}

fn bfs_path(device: &Device, fixed: &[bool], start: usize, dest: usize) -> Vec<usize> {
    let n = device.num_qubits();
    let mut prev = vec![usize::MAX; n];
    prev[start] = start;
    let mut queue = VecDeque::from([start]);
    while let Some(u) = queue.pop_front() {
        if u == dest {
            break;
        }
        for &v in device.neighbors(u) {
            if !fixed[v] && prev[v] == usize::MAX {
                prev[v] = u;
                queue.push_back(v);
            }
        }
    }
    let mut path = vec![dest];
    let mut cur = dest;
    while cur != start {
        cur = prev[cur];
        path.push(cur);
    }
    path.reverse();
    path
}

/// Exact when the device is within `exact_limit` qubits, heuristic otherwise.
pub fn min_swaps(device: &Device, target: &[usize], exact_limit: usize) -> Result<SwapSequence, TokenSwapError> {
    match min_swaps_exact(device, target, exact_limit) {
        Err(TokenSwapError::TooLarge { .. }) => min_swaps_heuristic(device, target),
        r => r,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dev(s: &str) -> Device {
        Device::builtin(s).unwrap()
    }

    #[test]
    fn identity_needs_nothing() {
        let d = dev("ring:4");
        let id = perm::identity(4);
        assert!(min_swaps_exact(&d, &id, 8).unwrap().is_empty());
        assert!(min_swaps_heuristic(&d, &id).unwrap().is_empty());
    }

    #[test]
    fn adjacent_transposition() {
        let d = dev("linear:4");
        let t = vec![0, 2, 1, 3];
        assert_eq!(min_swaps_exact(&d, &t, 8).unwrap(), vec![(1, 2)]);
        assert_eq!(min_swaps_heuristic(&d, &t).unwrap().len(), 1);
    }

    #[test]
    fn cyclic_shift_on_path() {
        let d = dev("linear:3");
        // [a,b,c] -> [c,a,b]
        let t = vec![2, 0, 1];
        let seq = min_swaps_exact(&d, &t, 8).unwrap();
        assert_eq!(seq.len(), 2);
        assert_eq!(apply_swaps(&d, &perm::identity(3), &seq).unwrap(), t);
    }

    #[test]
    fn ring_rotation_heuristic_matches_exact() {
        let d = dev("ring:4");
        let t = vec![3, 0, 1, 2];
        let exact = min_swaps_exact(&d, &t, 8).unwrap();
        let heur = min_swaps_heuristic(&d, &t).unwrap();
        assert_eq!(exact.len(), 3);
        assert_eq!(heur.len(), exact.len());
        assert_eq!(apply_swaps(&d, &perm::identity(4), &heur).unwrap(), t);
    }

    #[test]
    fn apply_swaps_basics() {
        let d = dev("linear:3");
        let a = vec![0, 1, 2];
        assert_eq!(apply_swaps(&d, &a, &[]).unwrap(), a);
        assert_eq!(apply_swaps(&d, &a, &[(0, 1), (0, 1)]).unwrap(), a);
        assert_eq!(apply_swaps(&d, &a, &[(0, 2)]), Err(TokenSwapError::InvalidEdge(0, 2)));
    }

    #[test]
    fn too_large_for_exact() {
        let d = dev("linear:9");
        assert_eq!(
            min_swaps_exact(&d, &perm::identity(9), 8),
            Err(TokenSwapError::TooLarge { n: 9, limit: 8 })
        );
        assert!(min_swaps(&d, &perm::identity(9), 8).unwrap().is_empty());
    }

    #[test]
    fn destination_order_suffixes_stay_connected() {
        for s in ["linear:6", "ring:7", "star:0:6", "ibm_qx5", "ibm_qx20"] {
            let d = dev(s);
            let order = destination_order(&d);
            for k in 0..order.len() {
                let alive: Vec<usize> = order[k..].to_vec();
                let mut seen = vec![alive[0]];
                let mut i = 0;
                while i < seen.len() {
                    for &w in d.neighbors(seen[i]) {
                        if alive.contains(&w) && !seen.contains(&w) {
                            seen.push(w);
                        }
                    }
                    i += 1;
                }
                assert_eq!(seen.len(), alive.len(), "{s} suffix {k}");
            }
        }
    }

    #[test]
    fn inverse_has_same_length() {
        let d = dev("ring:5");
        let table = ExactSwapTable::for_device(&d);
        perm::for_each_permutation(5, |p| {
            assert_eq!(table.distance(p), table.distance(&perm::inverse(p)));
        });
    }

    #[test]
    fn heuristic_on_larger_devices() {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for s in ["ibm_qx5", "ibm_qx20", "ring:12", "linear:11"] {
            let d = dev(s);
            let n = d.num_qubits();
            for _ in 0..50 {
                let mut t = perm::identity(n);
                t.shuffle(&mut rng);
                let seq = min_swaps_heuristic(&d, &t).unwrap();
                assert_eq!(apply_swaps(&d, &perm::identity(n), &seq).unwrap(), t);
                assert!(seq.len() <= n * d.diameter(), "{s}: {} swaps", seq.len());
            }
        }
    }
}
