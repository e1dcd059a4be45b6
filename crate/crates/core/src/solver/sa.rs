//! Single-flip Metropolis annealer with geometric cooling and restarts.
//!
//! One cooling schedule spans the whole sweep budget unless a run length is
//! set. With a timed budget, leftover time before the deadline is spent on
//! further runs.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{derive_seed, SolveRequest, SolveResult, Solver, SolverError};
use crate::qubo::QuboProblem;

const CALIBRATION_MS: u128 = 100;
/// Leftover budgets below this are not worth another run.
const MIN_RESTART_SWEEPS: u64 = 50;

#[derive(Debug, Clone, Copy, PartialEq)]
enum Budget {
    Sweeps(u64),
    /// Adjacency entries visited per millisecond; the sweep budget is
    /// derived from each request's timeout.
    WorkRate(f64),
}

#[derive(Debug, Clone)]
pub struct SaSolver {
    budget: Budget,
    sweeps_per_run: Option<u64>,
}

impl SaSolver {
    /// A fixed sweep budget per solve, independent of the timeout.
    pub fn with_sweeps(sweeps: u64) -> Self {
        Self {
            budget: Budget::Sweeps(sweeps.max(1)),
            sweeps_per_run: None,
        }
    }

    /// Converts each request's timeout to sweeps using a measured work rate
    /// (see [`calibrate_work_rate`]).
    pub fn with_work_rate(work_per_ms: f64) -> Self {
        Self {
            budget: Budget::WorkRate(work_per_ms),
            sweeps_per_run: None,
        }
    }

    /// Splits the budget into independent runs of at most `s` sweeps.
    pub fn sweeps_per_run(mut self, s: u64) -> Self {
        self.sweeps_per_run = Some(s.max(1));
        self
    }

    pub fn sweep_budget(&self, qubo: &QuboProblem, timeout_ms: u64) -> u64 {
        match self.budget {
            Budget::Sweeps(s) => s,
            Budget::WorkRate(rate) => {
                let work = Csr::new(qubo).work_per_sweep() as f64;
                ((timeout_ms as f64 * rate / work) as u64).max(1)
            }
        }
    }
}

impl Solver for SaSolver {
    fn solve(&self, req: &SolveRequest) -> Result<SolveResult, SolverError> {
        let start = Instant::now();
        let q = &req.qubo;
        let sweeps = self.sweep_budget(q, req.timeout_ms);
        let mut bits = anneal(q, sweeps, self.sweeps_per_run.unwrap_or(sweeps), req.seed);
        let mut energy = q.energy(&bits).expect("annealer returns full-length bits");
        if let Budget::WorkRate(_) = self.budget {
            let deadline = start + Duration::from_millis(req.timeout_ms);
            for k in 1.. {
                let left = deadline.saturating_duration_since(Instant::now()).as_millis() as u64;
                let more = if left == 0 { 0 } else { self.sweep_budget(q, left) };
                if more < MIN_RESTART_SWEEPS {
                    break;
                }
                let cand = anneal(q, more, self.sweeps_per_run.unwrap_or(more), derive_seed(req.seed, k));
                let e = q.energy(&cand).expect("annealer returns full-length bits");
                if e < energy {
                    bits = cand;
                    energy = e;
                }
            }
        }
        Ok(SolveResult {
            bits,
            energy,
            elapsed_ms: start.elapsed().as_millis() as u64,
            solver_id: self.id(),
        })
    }

    fn id(&self) -> String {
        match self.budget {
            Budget::Sweeps(s) => format!("sa(sweeps={s})"),
            Budget::WorkRate(_) => "sa(timed)".to_string(),
        }
    }
}

struct Csr {
    start: Vec<usize>,
    nb: Vec<usize>,
    w: Vec<f64>,
    h: Vec<f64>,
}

impl Csr {
    fn new(q: &QuboProblem) -> Self {
        let n = q.num_vars();
        let mut h = vec![0.0; n];
        let mut deg = vec![0usize; n];
        for &(u, v, c) in q.terms() {
            if u == v {
                h[u] += c;
            } else {
                deg[u] += 1;
                deg[v] += 1;
            }
        }
        let mut start = vec![0; n + 1];
        for v in 0..n {
            start[v + 1] = start[v] + deg[v];
        }
        let mut fill = start.clone();
        let mut nb = vec![0; start[n]];
        let mut w = vec![0.0; start[n]];
        for &(u, v, c) in q.terms() {
            if u != v {
                nb[fill[u]] = v;
                w[fill[u]] = c;
                fill[u] += 1;
                nb[fill[v]] = u;
                w[fill[v]] = c;
                fill[v] += 1;
            }
        }
        Self { start, nb, w, h }
    }

    fn work_per_sweep(&self) -> usize {
        self.h.len() + self.nb.len()
    }
}

/// Best bit vector found over `total_sweeps` sweeps split into restarts of
/// at most `sweeps_per_run`. The all-zero vector is always a candidate.
pub fn anneal(q: &QuboProblem, total_sweeps: u64, sweeps_per_run: u64, seed: u64) -> Vec<u8> {
    let n = q.num_vars();
    let csr = Csr::new(q);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let t0 = q.max_abs_coeff().max(f64::MIN_POSITIVE);
    let t1 = 1e-3 * t0;

    let mut best = vec![0u8; n];
    let mut best_e = q.constant();
    let mut x = vec![0u8; n];
    let mut field = vec![0.0; n];
    let mut remaining = total_sweeps;

    while remaining > 0 {
        let len = remaining.min(sweeps_per_run.max(1));
        remaining -= len;
        for b in x.iter_mut() {
            *b = rng.random_bool(0.5) as u8;
        }
        for v in 0..n {
            let mut f = csr.h[v];
            for k in csr.start[v]..csr.start[v + 1] {
                if x[csr.nb[k]] != 0 {
                    f += csr.w[k];
                }
            }
            field[v] = f;
        }
        let mut e = q.energy(&x).expect("length matches");
        let ratio = if len > 1 {
            (t1 / t0).powf(1.0 / (len - 1) as f64)
        } else {
            1.0
        };
        let mut temp = t0;
        for _ in 0..len {
            for v in 0..n {
                let delta = if x[v] == 0 { field[v] } else { -field[v] };
                if delta <= 0.0 || rng.random::<f64>() < (-delta / temp).exp() {
                    flip(&csr, &mut x, &mut field, v);
                    e += delta;
                }
            }
            if e < best_e - 1e-9 {
                best_e = e;
                best.copy_from_slice(&x);
            }
            temp *= ratio;
        }
        // zero-temperature descent to the nearest local minimum
        loop {
            let mut improved = false;
            for v in 0..n {
                let delta = if x[v] == 0 { field[v] } else { -field[v] };
                if delta < -1e-12 {
                    flip(&csr, &mut x, &mut field, v);
                    e += delta;
                    improved = true;
                }
            }
            if !improved {
                break;
            }
        }
        if e < best_e - 1e-9 {
            best_e = e;
            best.copy_from_slice(&x);
        }
    }
    best
}

fn flip(csr: &Csr, x: &mut [u8], field: &mut [f64], v: usize) {
    x[v] ^= 1;
    let sign = if x[v] != 0 { 1.0 } else { -1.0 };
    for k in csr.start[v]..csr.start[v + 1] {
        field[csr.nb[k]] += sign * csr.w[k];
    }
}

/// Measures annealer throughput in adjacency entries per millisecond on a
/// synthetic placement-sized problem, over roughly 100 ms.
pub fn calibrate_work_rate() -> f64 {
    let n = 400;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut terms = Vec::new();
    for u in 0..n {
        terms.push((u, u, rng.random_range(-2.0..2.0)));
        for _ in 0..20 {
            let v = rng.random_range(0..n);
            terms.push((u, v, rng.random_range(-2.0..2.0)));
        }
    }
    let q = QuboProblem::from_terms(n, terms, 0.0);
    let work = Csr::new(&q).work_per_sweep() as f64;
    let start = Instant::now();
    let mut sweeps = 0u64;
    let mut seed = 0;
    while start.elapsed().as_millis() < CALIBRATION_MS {
        std::hint::black_box(anneal(&q, 10, 10, seed));
        sweeps += 10;
        seed += 1;
    }
    let ms = start.elapsed().as_secs_f64() * 1e3;
    sweeps as f64 * work / ms
}
