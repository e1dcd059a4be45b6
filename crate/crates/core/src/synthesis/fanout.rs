//! Fan-out of one control onto several targets, optionally through a relay
//! qubit that carries the control's value closer to a cluster of targets.

use super::remote_cnot_pairs;
use crate::device::Device;

type Pairs = Vec<(usize, usize)>;

/// `t ^= ` parity of the path from `r` to `t` excluding `t`, with every
/// intermediate qubit restored: up the path and back down, `2d - 1` CNOTs.
pub fn ladder(device: &Device, r: usize, t: usize) -> Pairs {
    let path = device.shortest_path(r, t);
    let d = path.len() - 1;
    let mut out = Vec::with_capacity(2 * d - 1);
    for j in 0..d {
        out.push((path[j], path[j + 1]));
    }
    for j in (0..d.saturating_sub(1)).rev() {
        out.push((path[j], path[j + 1]));
    }
    out
}

fn direct(device: &Device, c: usize, targets: &[usize]) -> Pairs {
    targets
        .iter()
        .flat_map(|&t| remote_cnot_pairs(device, c, t).expect("distinct qubits"))
        .collect()
}

/// CNOTs from `c` onto every qubit of `targets` (distinct, excluding `c`).
///
/// Candidates are the plain sequence of remote CNOTs and, when `relay` is
/// set, one relay construction per physical qubit; the candidate with the
/// fewest CNOTs wins, ties going to the plain sequence and then to the
/// lowest relay index.
pub fn fanout(device: &Device, c: usize, targets: &[usize], relay: bool) -> Pairs {
    let mut best = direct(device, c, targets);
    if !relay {
        return best;
    }
    for r in 0..device.num_qubits() {
        if r == c {
            continue;
        }
        let cand = if targets.contains(&r) {
            relay_in_targets(device, c, r, targets)
        } else {
            match relay_outside(device, c, r, targets) {
                Some(p) => p,
                None => continue,
            }
        };
        if cand.len() < best.len() {
            best = cand;
        }
    }
    best
}

/// Targets that are cheaper to reach from `r` by a ladder pair than
/// directly from `c`, closest to `r` first.
fn relayed(device: &Device, c: usize, r: usize, targets: &[usize]) -> (Vec<usize>, Vec<usize>) {
    let (mut via, mut rest) = (Vec::new(), Vec::new());
    for &t in targets {
        if t == r {
            continue;
        }
        if 4 * device.distance(r, t) - 2 < device.cost(c, t) {
            via.push(t);
        } else {
            rest.push(t);
        }
    }
    via.sort_by_key(|&t| (device.distance(r, t), t));
    (via, rest)
}

/// Ladders from `r` before and after loading `c` onto `r`. Ladders run
/// nearest-first on the way out and farthest-first on the way back, so every
/// intermediate a ladder reads holds the same value both times.
fn sandwich(device: &Device, c: usize, r: usize, via: &[usize]) -> Pairs {
    let mut out = Pairs::new();
    for &t in via {
        out.extend(ladder(device, r, t));
    }
    out.extend(remote_cnot_pairs(device, c, r).expect("distinct qubits"));
    for &t in via.iter().rev() {
        out.extend(ladder(device, r, t));
    }
    out
}

fn relay_in_targets(device: &Device, c: usize, r: usize, targets: &[usize]) -> Pairs {
    let (via, rest) = relayed(device, c, r, targets);
    let mut out = direct(device, c, &rest);
    out.extend(sandwich(device, c, r, &via));
    out
}

fn relay_outside(device: &Device, c: usize, r: usize, targets: &[usize]) -> Option<Pairs> {
    let (via, rest) = relayed(device, c, r, targets);
    if via.is_empty() {
        return None;
    }
    let mut out = direct(device, c, &rest);
    match relay_tree(device, c, r, &via) {
        Some(tree) => out.extend(tree),
        None => {
            out.extend(sandwich(device, c, r, &via));
            // undo the relay's copy of the control
            out.extend(remote_cnot_pairs(device, c, r).expect("distinct qubits"));
        }
    }
    Some(out)
}

/// The relay as a branch point of a tree: union of BFS-tree paths from `r`
/// to `c` and to each relayed target, used as a multi-target remote CNOT
/// rooted at `c`. Only valid when the tree's leaves are exactly the relayed
/// targets and none of them is adjacent to `c` in the tree.
fn relay_tree(device: &Device, c: usize, r: usize, via: &[usize]) -> Option<Pairs> {
    let n = device.num_qubits();
    let mut bfs_parent = vec![usize::MAX; n];
    for v in 0..n {
        if v != r {
            let dv = device.distance(r, v);
            bfs_parent[v] = *device
                .neighbors(v)
                .iter()
                .find(|&&w| device.distance(r, w) + 1 == dv)
                .expect("connected");
        }
    }
    let mut in_tree = vec![false; n];
    in_tree[r] = true;
    let mut edges = Vec::new();
    for &x in std::iter::once(&c).chain(via) {
        let mut v = x;
        while !in_tree[v] {
            in_tree[v] = true;
            edges.push((bfs_parent[v], v));
            v = bfs_parent[v];
        }
    }
    tree_fanout(n, c, &edges, via)
}

/// Multi-target remote CNOT over a tree given by undirected `edges`, rooted
/// at `root`. Every leaf receives `root`'s value; internal qubits are
/// restored. Returns `None` unless the leaves are exactly `leaves` and each
/// sits at depth two or more.
pub fn tree_fanout(n: usize, root: usize, edges: &[(usize, usize)], leaves: &[usize]) -> Option<Pairs> {
    let mut adj = vec![Vec::new(); n];
    for &(u, v) in edges {
        adj[u].push(v);
        adj[v].push(u);
    }
    let mut parent = vec![usize::MAX; n];
    let mut depth = vec![0usize; n];
    let mut order = vec![root];
    parent[root] = root;
    let mut k = 0;
    while k < order.len() {
        let u = order[k];
        for &v in &adj[u] {
            if parent[v] == usize::MAX {
                parent[v] = u;
                depth[v] = depth[u] + 1;
                order.push(v);
            }
        }
        k += 1;
    }
    if order.len() != edges.len() + 1 {
        return None;
    }
    let is_leaf = |v: usize| v != root && adj[v].len() == 1;
    let mut tree_leaves: Vec<usize> = order.iter().copied().filter(|&v| is_leaf(v)).collect();
    tree_leaves.sort_unstable();
    let mut want = leaves.to_vec();
    want.sort_unstable();
    if tree_leaves != want || want.iter().any(|&t| depth[t] < 2) {
        return None;
    }

    let mut nodes: Vec<usize> = order[1..].to_vec();
    nodes.sort_by_key(|&v| (std::cmp::Reverse(depth[v]), v));
    let mut ladder: Pairs = nodes.iter().map(|&v| (parent[v], v)).collect();
    let mut up: Vec<usize> = order[1..]
        .iter()
        .copied()
        .filter(|&v| parent[v] != root && !is_leaf(v))
        .collect();
    up.sort_by_key(|&v| (depth[v], v));
    ladder.extend(up.iter().map(|&v| (parent[v], v)));
    let mut out = ladder.clone();
    out.extend(ladder);
    Some(out)
}
