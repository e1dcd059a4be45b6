use std::collections::VecDeque;

use qroute::device::Device;

/// Greedy dense-subset growth written out over plain BFS distances.
fn greedy_subset(d: &Device, k: usize) -> Vec<usize> {
    let n = d.num_qubits();
    let dist: Vec<Vec<usize>> = (0..n)
        .map(|s| {
            let mut out = vec![usize::MAX; n];
            out[s] = 0;
            let mut q = VecDeque::from([s]);
            while let Some(u) = q.pop_front() {
                for &v in d.neighbors(u) {
                    if out[v] == usize::MAX {
                        out[v] = out[u] + 1;
                        q.push_back(v);
                    }
                }
            }
            out
        })
        .collect();
    let seed = (0..n)
        .max_by_key(|&v| (d.neighbors(v).len(), std::cmp::Reverse(v)))
        .unwrap();
    let mut chosen = vec![seed];
    while chosen.len() < k {
        let next = (0..n)
            .filter(|v| !chosen.contains(v))
            .filter(|&v| chosen.iter().any(|&c| d.is_adjacent(c, v)))
            .min_by_key(|&v| (chosen.iter().map(|&c| dist[c][v]).sum::<usize>(), v))
            .unwrap();
        chosen.push(next);
    }
    chosen.sort_unstable();
    chosen
}

#[test]
fn qx20_seven_qubit_subset_is_frozen() {
    let d = Device::builtin("ibm_qx20").unwrap();
    let (s, idx) = d.select_subset(7).unwrap();
    assert_eq!(idx, [0, 1, 2, 5, 6, 7, 10]);
    assert_eq!(idx, greedy_subset(&d, 7));
    assert_eq!(s.name(), "ibm_qx20[7]");
    assert_eq!(
        s.edges(),
        [
            (0, 1),
            (0, 3),
            (1, 2),
            (1, 4),
            (1, 5),
            (2, 4),
            (2, 5),
            (3, 4),
            (3, 6),
            (4, 5),
            (4, 6)
        ]
    );
    assert_eq!(d.select_subset(7).unwrap().1, idx);
}

#[test]
fn subsets_are_induced_and_connected() {
    for name in ["ibm_qx5", "ibm_qx20", "ring:9", "star:4:8"] {
        let d = Device::builtin(name).unwrap();
        for k in 1..=d.num_qubits() {
            let (s, idx) = d.select_subset(k).unwrap();
            assert_eq!(s.num_qubits(), k);
            assert_eq!(idx, greedy_subset(&d, k), "{name} k={k}");
            for a in 0..k {
                for b in 0..k {
                    assert_eq!(s.is_adjacent(a, b), d.is_adjacent(idx[a], idx[b]));
                }
            }
            // connected: every distance finite
            assert!(s.diameter() < k.max(1));
        }
        assert!(d.select_subset(0).is_err());
        assert!(d.select_subset(d.num_qubits() + 1).is_err());
    }
}

#[test]
fn device_files_round_trip() {
    for name in ["ibm_qx5", "ibm_qx20"] {
        let d = Device::builtin(name).unwrap();
        let back = Device::from_json(&d.to_json()).unwrap();
        assert_eq!(back.edges(), d.edges());
        assert_eq!(back.num_qubits(), d.num_qubits());
    }
    assert_eq!(Device::builtin("ibm_qx5").unwrap().num_qubits(), 16);
    assert_eq!(Device::builtin("ibm_qx20").unwrap().num_qubits(), 20);
}
