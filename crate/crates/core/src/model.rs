//! Linear model of SWAP counts between layers.
//!
//! The number of SWAPs needed to realise a rearrangement `pi` (destination
//! form: the state at `mu` moves to `pi[mu]`) is approximated by
//! `sum_mu a[mu][pi[mu]]`. The matrix starts from a closed form that assumes
//! uniformly distributed rearrangements and can be refit from observed
//! compilation results.

use std::path::Path;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::device::Device;
use crate::perm;
use crate::token_swap::{self, ExactSwapTable};

pub const HISTORY_CAP: usize = 50_000;
pub const DEFAULT_INIT_SAMPLES: usize = 20_000;
const INIT_SEED: u64 = 0x0005_eed0_fa11;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("no rearrangement samples to fit")]
    EmptySampleSet,
    #[error("model is for {found} qubits but the device has {expected}")]
    SchemaMismatch { expected: usize, found: usize },
    #[error("sample {index} is not a permutation of {n} qubits")]
    BadSample { index: usize, n: usize },
    #[error("cannot access model file: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed model file: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RearrangementSample {
    pub pi: Vec<usize>,
    pub swaps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MoveCostModel {
    pub device_name: String,
    pub n: usize,
    pub version: u64,
    pub a: Vec<Vec<f64>>,
    #[serde(default)]
    pub history: Vec<RearrangementSample>,
}

impl MoveCostModel {
    pub fn zeros(device_name: &str, n: usize) -> Self {
        Self {
            device_name: device_name.to_string(),
            n,
            version: 0,
            a: vec![vec![0.0; n]; n],
            history: Vec::new(),
        }
    }

    pub fn coeff(&self, mu: usize, nu: usize) -> f64 {
        self.a[mu][nu]
    }

    pub fn estimate_swaps(&self, pi: &[usize]) -> f64 {
        pi.iter().enumerate().map(|(mu, &nu)| self.a[mu][nu]).sum()
    }

    /// Root mean squared error of the CNOT-scaled estimate `3 * sum a`.
    pub fn rmse(&self, samples: &[RearrangementSample]) -> Result<f64, ModelError> {
        if samples.is_empty() {
            return Err(ModelError::EmptySampleSet);
        }
        let sq: f64 = samples
            .iter()
            .map(|s| {
                let e = 3.0 * s.swaps as f64 - 3.0 * self.estimate_swaps(&s.pi);
                e * e
            })
            .sum();
        Ok((sq / samples.len() as f64).sqrt())
    }

    /// Minimum-norm least-squares fit over the existing history plus
    /// `samples`. The returned model carries the merged (capped) history and
    /// a bumped version.
    pub fn fit(&self, samples: &[RearrangementSample]) -> Result<Self, ModelError> {
        if samples.is_empty() {
            return Err(ModelError::EmptySampleSet);
        }
        self.check_samples(samples)?;
        let mut history = self.history.clone();
        history.extend_from_slice(samples);
        if history.len() > HISTORY_CAP {
            history.drain(..history.len() - HISTORY_CAP);
        }
        let a = min_norm_fit(self.n, &history);
        Ok(Self {
            device_name: self.device_name.clone(),
            n: self.n,
            version: self.version + 1,
            a,
            history,
        })
    }

    /// Refits on the stored history alone.
    pub fn refit(&self) -> Result<Self, ModelError> {
        if self.history.is_empty() {
            return Err(ModelError::EmptySampleSet);
        }
        Ok(Self {
            a: min_norm_fit(self.n, &self.history),
            version: self.version + 1,
            ..self.clone()
        })
    }

    /// Appends samples without refitting, respecting the history cap.
    pub fn record(&mut self, samples: &[RearrangementSample]) -> Result<(), ModelError> {
        self.check_samples(samples)?;
        self.history.extend_from_slice(samples);
        if self.history.len() > HISTORY_CAP {
            self.history.drain(..self.history.len() - HISTORY_CAP);
        }
        Ok(())
    }

    fn check_samples(&self, samples: &[RearrangementSample]) -> Result<(), ModelError> {
        for (index, s) in samples.iter().enumerate() {
            if s.pi.len() != self.n || !perm::is_permutation(&s.pi) {
                return Err(ModelError::BadSample { index, n: self.n });
            }
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<(), ModelError> {
        std::fs::write(path, serde_json::to_string(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, ModelError> {
        let m: Self = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        if m.a.len() != m.n || m.a.iter().any(|r| r.len() != m.n) {
            return Err(ModelError::SchemaMismatch {
                expected: m.n,
                found: m.a.len(),
            });
        }
        Ok(m)
    }

    /// Loads the model at `path` for `device`, or starts from
    /// [`uniform_init`] when no path is given or the file does not exist yet.
    pub fn load_or_init(path: Option<&Path>, device: &Device, exact_limit: usize) -> Result<Self, ModelError> {
        match path {
            Some(p) if p.exists() => {
                let m = Self::load(p)?;
                if m.n != device.num_qubits() {
                    return Err(ModelError::SchemaMismatch {
                        expected: device.num_qubits(),
                        found: m.n,
                    });
                }
                Ok(m)
            }
            _ => Ok(uniform_init(device, exact_limit)),
        }
    }
}

/// Closed-form coefficients for uniformly random rearrangements:
/// `a[mu][nu] = (N-1)/N * E[Ns | pi(mu)=nu] - (N-2)/N * E[Ns]`.
///
/// Devices within `exact_limit` qubits enumerate every permutation with exact
/// swap counts; larger ones use [`DEFAULT_INIT_SAMPLES`] random permutations
/// scored by the heuristic solver, which overestimates.
pub fn uniform_init(device: &Device, exact_limit: usize) -> MoveCostModel {
    let n = device.num_qubits();
    let mut cond_sum = vec![vec![0.0; n]; n];
    let mut cond_cnt = vec![vec![0usize; n]; n];
    let mut total = 0.0;
    let mut count = 0usize;
    let mut add = |pi: &[usize], ns: usize| {
        for (mu, &nu) in pi.iter().enumerate() {
            cond_sum[mu][nu] += ns as f64;
            cond_cnt[mu][nu] += 1;
        }
        total += ns as f64;
        count += 1;
    };

    if n <= exact_limit.min(token_swap::MAX_EXACT_QUBITS) {
        let table = ExactSwapTable::for_device(device);
        let mut arr = Vec::with_capacity(n);
        for r in 0..perm::factorial(n) {
            perm::unrank(r, n, &mut arr);
            add(&perm::inverse(&arr), table.distance_by_rank(r));
        }
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(INIT_SEED);
        let mut pi = perm::identity(n);
        for _ in 0..DEFAULT_INIT_SAMPLES {
            pi.shuffle(&mut rng);
            let seq = token_swap::min_swaps_heuristic(device, &perm::inverse(&pi)).expect("valid permutation");
            add(&pi, seq.len());
        }
    }

    let nf = n as f64;
    let mean = total / count as f64;
    let a = (0..n)
        .map(|mu| {
            (0..n)
                .map(|nu| {
                    let cond = if cond_cnt[mu][nu] == 0 {
                        mean
                    } else {
                        cond_sum[mu][nu] / cond_cnt[mu][nu] as f64
                    };
                    (nf - 1.0) / nf * cond - (nf - 2.0) / nf * mean
                })
                .collect()
        })
        .collect();
    MoveCostModel {
        device_name: device.name().to_string(),
        n,
        version: 0,
        a,
        history: Vec::new(),
    }
}

/// Minimum-norm least squares via the pseudoinverse of the Gram matrix.
///
/// Each sample contributes a 0/1 design row with ones at `(mu, pi[mu])`.
/// With `G = A^T A` and `b = A^T y`, `G^+ b` equals `A^+ y`, the
/// minimum-norm solution. `G^+` comes from a symmetric eigendecomposition
/// with eigenvalues below a relative tolerance treated as zero.
pub fn min_norm_fit(n: usize, samples: &[RearrangementSample]) -> Vec<Vec<f64>> {
    let m = n * n;
    let mut g = DMatrix::<f64>::zeros(m, m);
    let mut b = DVector::<f64>::zeros(m);
    let mut idx = vec![0; n];
    for s in samples {
        for (mu, &nu) in s.pi.iter().enumerate() {
            idx[mu] = mu * n + nu;
        }
        for &i in &idx {
            b[i] += s.swaps as f64;
            for &j in &idx {
                g[(i, j)] += 1.0;
            }
        }
    }
    let eig = SymmetricEigen::new(g);
    let max_ev = eig.eigenvalues.iter().fold(0.0f64, |acc, &v| acc.max(v.abs()));
    let tol = max_ev * m as f64 * 1e-12;
    let qt_b = eig.eigenvectors.transpose() * &b;
    let mut scaled = qt_b;
    for (k, &ev) in eig.eigenvalues.iter().enumerate() {
        scaled[k] = if ev.abs() > tol { scaled[k] / ev } else { 0.0 };
    }
    let x = &eig.eigenvectors * scaled;
    (0..n).map(|mu| (0..n).map(|nu| x[mu * n + nu]).collect()).collect()
}
