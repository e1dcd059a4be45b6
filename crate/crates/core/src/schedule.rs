//! Order in which chunk problems are solved, and which solved chunks feed
//! boundary terms into each one.

use std::fmt;
use std::str::FromStr;

use crate::solver::PoolTask;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Strategy {
    /// Every chunk at once, no boundary terms.
    Independent,
    /// Left to right, each chunk seeing its left neighbour.
    Sequential,
    /// Midpoint tree solved root first; each chunk sees the nearest solved
    /// chunk on either side.
    #[default]
    Binary,
}

impl FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "independent" => Ok(Self::Independent),
            "sequential" => Ok(Self::Sequential),
            "binary" => Ok(Self::Binary),
            _ => Err(format!(
                "unknown strategy `{s}` (expected independent, sequential or binary)"
            )),
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Independent => "independent",
            Self::Sequential => "sequential",
            Self::Binary => "binary",
        })
    }
}

/// A solved chunk used as a boundary, `distance` chunks away.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundarySource {
    pub chunk: usize,
    pub distance: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ScheduleNode {
    pub deps: Vec<usize>,
    pub left: Option<BoundarySource>,
    pub right: Option<BoundarySource>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Schedule {
    pub strategy: Strategy,
    pub nodes: Vec<ScheduleNode>,
}

pub fn make_schedule(q: usize, strategy: Strategy) -> Schedule {
    let mut nodes = vec![ScheduleNode::default(); q];
    match strategy {
        Strategy::Independent => {}
        Strategy::Sequential => {
            for (k, node) in nodes.iter_mut().enumerate().skip(1) {
                node.deps = vec![k - 1];
                node.left = Some(BoundarySource {
                    chunk: k - 1,
                    distance: 1,
                });
            }
        }
        Strategy::Binary => binary(&mut nodes, 0, q, None),
    }
    Schedule { strategy, nodes }
}

fn binary(nodes: &mut [ScheduleNode], lo: usize, hi: usize, parent: Option<usize>) {
    if lo >= hi {
        return;
    }
    let q = nodes.len();
    let mid = (lo + hi - 1) / 2;
    let node = &mut nodes[mid];
    node.deps = parent.into_iter().collect();
    node.left = (lo > 0).then(|| BoundarySource {
        chunk: lo - 1,
        distance: mid - (lo - 1),
    });
    node.right = (hi < q).then(|| BoundarySource {
        chunk: hi,
        distance: hi - mid,
    });
    binary(nodes, lo, mid, Some(mid));
    binary(nodes, mid + 1, hi, Some(mid));
}

impl Schedule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn tasks(&self) -> Vec<PoolTask> {
        self.nodes.iter().map(|n| PoolTask { deps: n.deps.clone() }).collect()
    }

    /// Unit-time list schedule: each step runs up to `workers` ready nodes,
    /// lowest index first. Matches the pool's wave planning.
    pub fn waves(&self, workers: usize) -> Vec<Vec<usize>> {
        let workers = workers.max(1);
        let mut done = vec![false; self.nodes.len()];
        let mut waves = Vec::new();
        while done.iter().any(|d| !d) {
            let wave: Vec<usize> = (0..self.nodes.len())
                .filter(|&i| !done[i] && self.nodes[i].deps.iter().all(|&d| done[d]))
                .take(workers)
                .collect();
            assert!(!wave.is_empty(), "schedule dependencies are cyclic");
            for &i in &wave {
                done[i] = true;
            }
            waves.push(wave);
        }
        waves
    }
}

pub fn steps(q: usize, workers: usize, strategy: Strategy) -> usize {
    make_schedule(q, strategy).waves(workers).len()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binary_tree_of_fifteen() {
        let s = make_schedule(15, Strategy::Binary);
        let roots: Vec<usize> = (0..15).filter(|&i| s.nodes[i].deps.is_empty()).collect();
        assert_eq!(roots, vec![7]);
        let children: Vec<usize> = (0..15).filter(|&i| s.nodes[i].deps == vec![7]).collect();
        assert_eq!(children, vec![3, 11]);
        assert_eq!(s.nodes[3].right, Some(BoundarySource { chunk: 7, distance: 4 }));
        assert_eq!(s.nodes[3].left, None);
        // chunk 5 lies between solved 3 and 7
        assert_eq!(s.nodes[5].left, Some(BoundarySource { chunk: 3, distance: 2 }));
        assert_eq!(s.nodes[5].right, Some(BoundarySource { chunk: 7, distance: 2 }));
    }

    #[test]
    fn sequential_chain() {
        let s = make_schedule(4, Strategy::Sequential);
        let deps: Vec<Vec<usize>> = s.nodes.iter().map(|n| n.deps.clone()).collect();
        assert_eq!(deps, vec![vec![], vec![0], vec![1], vec![2]]);
    }

    #[test]
    fn single_chunk() {
        for st in [Strategy::Independent, Strategy::Sequential, Strategy::Binary] {
            let s = make_schedule(1, st);
            assert_eq!(s.nodes, vec![ScheduleNode::default()]);
        }
    }

    #[test]
    fn step_counts() {
        assert_eq!(steps(28, 4, Strategy::Independent), 7);
        assert_eq!(steps(28, 4, Strategy::Sequential), 28);
        assert_eq!(steps(15, 1, Strategy::Binary), 15);
        assert!(steps(15, 4, Strategy::Binary) <= 8);
    }

    #[test]
    fn bounds_hold_over_grid() {
        for q in 1..=64usize {
            let log2 = usize::BITS as usize - 1 - q.leading_zeros() as usize;
            for i in 1..=8usize {
                assert_eq!(steps(q, i, Strategy::Independent), q.div_ceil(i));
                assert_eq!(steps(q, i, Strategy::Sequential), q);
                let b = steps(q, i, Strategy::Binary) as f64;
                assert!(b < q as f64 / i as f64 + log2 as f64 + 2.0, "q={q} i={i} b={b}");
            }
            let s = make_schedule(q, Strategy::Binary);
            let waves = s.waves(1);
            let mut when = vec![0; q];
            for (w, wave) in waves.iter().enumerate() {
                for &c in wave {
                    when[c] = w;
                }
            }
            for (c, node) in s.nodes.iter().enumerate() {
                assert!(node.deps.len() <= 1);
                for b in node.left.iter().chain(node.right.iter()) {
                    assert!(b.distance >= 1);
                    assert!(when[b.chunk] < when[c]);
                }
            }
        }
    }

    #[test]
    fn strategy_parsing() {
        assert_eq!("binary".parse::<Strategy>(), Ok(Strategy::Binary));
        assert!("random".parse::<Strategy>().is_err());
        assert_eq!(Strategy::Independent.to_string(), "independent");
    }
}
