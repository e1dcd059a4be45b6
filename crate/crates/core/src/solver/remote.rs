//! Client for remote annealing services.
//!
//! Request: `POST` with JSON
//! `{"num_vars": n, "terms": [[u, v, coeff], ...], "constant": c, "timeout_ms": t}`
//! and an optional `Authorization: Bearer <token>` header.
//! Response: `{"bits": [0|1, ...], "energy": e}`. The reported energy is
//! ignored; it is recomputed locally from the bits.

use std::thread;
use std::time::{Duration, Instant};

use serde::Deserialize;

use super::{SolveRequest, SolveResult, Solver, SolverError};

pub const TOKEN_ENV: &str = "QROUTE_SOLVER_TOKEN";
pub const DEFAULT_RETRIES: u32 = 3;

#[derive(Debug, Deserialize)]
struct WireResult {
    bits: Vec<i64>,
    #[allow(dead_code)]
    #[serde(default)]
    energy: Option<f64>,
}

pub struct RemoteSolver {
    endpoint: String,
    token: Option<String>,
    retries: u32,
    backoff: Duration,
    /// Added to the solve timeout to allow for transfer and queueing.
    slack: Duration,
}

impl RemoteSolver {
    pub fn new(endpoint: impl Into<String>, token: Option<String>) -> Self {
        Self {
            endpoint: endpoint.into(),
            token,
            retries: DEFAULT_RETRIES,
            backoff: Duration::from_millis(200),
            slack: Duration::from_secs(10),
        }
    }

    /// Token read from the `QROUTE_SOLVER_TOKEN` environment variable.
    pub fn from_env(endpoint: impl Into<String>) -> Self {
        Self::new(endpoint, std::env::var(TOKEN_ENV).ok())
    }

    pub fn retries(mut self, r: u32) -> Self {
        self.retries = r;
        self
    }

    pub fn backoff(mut self, d: Duration) -> Self {
        self.backoff = d;
        self
    }

    pub fn slack(mut self, d: Duration) -> Self {
        self.slack = d;
        self
    }

    fn attempt(&self, agent: &ureq::Agent, body: &str) -> Result<String, Attempt> {
        let mut req = agent.post(&self.endpoint).header("Content-Type", "application/json");
        if let Some(t) = &self.token {
            req = req.header("Authorization", &format!("Bearer {t}"));
        }
        let resp = req.send(body).map_err(|e| match e {
            ureq::Error::Timeout(_) => Attempt::Timeout,
            e => Attempt::Retry(e.to_string()),
        })?;
        let status = resp.status().as_u16();
        let text = resp
            .into_body()
            .read_to_string()
            .map_err(|e| Attempt::Retry(e.to_string()))?;
        match status {
            200..=299 => Ok(text),
            500..=599 => Err(Attempt::Retry(format!("server returned {status}"))),
            _ => Err(Attempt::Fatal(SolverError::Protocol(format!(
                "server returned {status}: {}",
                text.chars().take(200).collect::<String>()
            )))),
        }
    }
}

enum Attempt {
    Retry(String),
    Timeout,
    Fatal(SolverError),
}

impl Solver for RemoteSolver {
    fn solve(&self, req: &SolveRequest) -> Result<SolveResult, SolverError> {
        let start = Instant::now();
        let body = req.qubo.to_json(Some(req.timeout_ms));
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(Duration::from_millis(req.timeout_ms) + self.slack))
            .build()
            .into();

        let attempts = self.retries + 1;
        let mut last = String::new();
        let mut timed_out = false;
        let mut text = None;
        for k in 0..attempts {
            if k > 0 {
                thread::sleep(self.backoff * k);
            }
            match self.attempt(&agent, &body) {
                Ok(t) => {
                    text = Some(t);
                    break;
                }
                Err(Attempt::Retry(msg)) => {
                    timed_out = false;
                    last = msg;
                }
                Err(Attempt::Timeout) => {
                    timed_out = true;
                    last = "timed out".into();
                }
                Err(Attempt::Fatal(e)) => return Err(e),
            }
        }
        let text = match text {
            Some(t) => t,
            None if timed_out => return Err(SolverError::Timeout(start.elapsed().as_millis() as u64)),
            None => {
                return Err(SolverError::Transport {
                    attempts,
                    message: last,
                })
            }
        };

        let wire: WireResult =
            serde_json::from_str(&text).map_err(|e| SolverError::Protocol(format!("bad response body: {e}")))?;
        let n = req.qubo.num_vars();
        if wire.bits.len() != n {
            return Err(SolverError::Protocol(format!(
                "expected {n} bits, got {}",
                wire.bits.len()
            )));
        }
        let bits = wire
            .bits
            .iter()
            .map(|&b| match b {
                0 | 1 => Ok(b as u8),
                _ => Err(SolverError::Protocol(format!("non-binary value {b} in bits"))),
            })
            .collect::<Result<Vec<u8>, _>>()?;
        let energy = req.qubo.energy(&bits).expect("length checked");
        Ok(SolveResult {
            bits,
            energy,
            elapsed_ms: start.elapsed().as_millis() as u64,
            solver_id: self.id(),
        })
    }

    fn id(&self) -> String {
        format!("remote({})", self.endpoint)
    }
}
