//! Small helpers for permutations stored as index arrays.

pub fn identity(n: usize) -> Vec<usize> {
    (0..n).collect()
}

pub fn is_permutation(p: &[usize]) -> bool {
    let mut seen = vec![false; p.len()];
    for &x in p {
        if x >= p.len() || seen[x] {
            return false;
        }
        seen[x] = true;
    }
    true
}

pub fn inverse(p: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; p.len()];
    for (i, &x) in p.iter().enumerate() {
        inv[x] = i;
    }
    inv
}

/// Rank of a permutation in lexicographic order (Lehmer code).
pub fn rank(p: &[usize]) -> usize {
    let n = p.len();
    let mut r = 0;
    for i in 0..n {
        let smaller_after = p[i + 1..].iter().filter(|&&x| x < p[i]).count();
        r = r * (n - i) + smaller_after;
    }
    r
}

pub fn unrank(mut r: usize, n: usize, out: &mut Vec<usize>) {
    let mut digits = vec![0; n];
    for i in (0..n).rev() {
        let base = n - i;
        digits[i] = r % base;
        r /= base;
    }
    let mut pool: Vec<usize> = (0..n).collect();
    out.clear();
    for d in digits {
        out.push(pool.remove(d));
    }
}

pub fn factorial(n: usize) -> usize {
    (1..=n).product()
}

/// Calls `f` on every permutation of `0..n` in lexicographic order.
pub fn for_each_permutation(n: usize, mut f: impl FnMut(&[usize])) {
    let mut p = Vec::with_capacity(n);
    for r in 0..factorial(n) {
        unrank(r, n, &mut p);
        f(&p);
    }
}
