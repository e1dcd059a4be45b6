//! Bounded-parallel execution of jobs with dependencies.
//!
//! Jobs run in lockstep waves: each wave takes up to `workers` ready jobs
//! (lowest index first), runs them on scoped threads and waits for all of
//! them before planning the next wave. A job sees a snapshot of every
//! result completed before its wave started.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;

use thiserror::Error;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PoolTask {
    pub deps: Vec<usize>,
}

#[derive(Debug, Error, PartialEq)]
pub enum PoolError<E> {
    #[error("job failed: {0}")]
    Job(E),
    #[error("dependency {0} failed")]
    DependencyFailed(usize),
    #[error("dependency cycle")]
    Cycle,
}

#[derive(Debug)]
pub struct PoolReport<T, E> {
    pub results: Vec<Result<Arc<T>, PoolError<E>>>,
    pub waves: Vec<Vec<usize>>,
    pub completion_order: Vec<usize>,
    pub max_in_flight: usize,
}

enum State<T, E> {
    Pending,
    Done(Result<Arc<T>, PoolError<E>>),
}

pub fn pool_solve<T, E, F>(tasks: &[PoolTask], workers: usize, job: F) -> PoolReport<T, E>
where
    T: Send + Sync,
    E: Send,
    F: Fn(usize, &[Option<Arc<T>>]) -> Result<T, E> + Sync,
{
    let workers = workers.max(1);
    let n = tasks.len();
    let mut state: Vec<State<T, E>> = (0..n).map(|_| State::Pending).collect();
    let mut waves = Vec::new();
    let completion = Mutex::new(Vec::with_capacity(n));
    let in_flight = AtomicUsize::new(0);
    let peak = AtomicUsize::new(0);

    loop {
        let mut ready = Vec::new();
        let mut changed = false;
        for i in 0..n {
            if !matches!(state[i], State::Pending) {
                continue;
            }
            let mut blocked = false;
            let mut failed = None;
            for &d in &tasks[i].deps {
                match &state[d] {
                    State::Pending => blocked = true,
                    State::Done(Err(_)) => failed = failed.or(Some(d)),
                    State::Done(Ok(_)) => {}
                }
            }
            if let Some(d) = failed {
                state[i] = State::Done(Err(PoolError::DependencyFailed(d)));
                changed = true;
            } else if !blocked {
                ready.push(i);
            }
        }
        if ready.is_empty() {
            if changed {
                continue;
            }
            break;
        }
        ready.truncate(workers);

        let snapshot: Vec<Option<Arc<T>>> = state
            .iter()
            .map(|s| match s {
                State::Done(Ok(v)) => Some(Arc::clone(v)),
                _ => None,
            })
            .collect();
        let outcomes: Vec<(usize, Result<T, E>)> = thread::scope(|scope| {
            let handles: Vec<_> = ready
                .iter()
                .map(|&i| {
                    let (job, snapshot, completion) = (&job, &snapshot, &completion);
                    let (in_flight, peak) = (&in_flight, &peak);
                    scope.spawn(move || {
                        let now = in_flight.fetch_add(1, Ordering::SeqCst) + 1;
                        peak.fetch_max(now, Ordering::SeqCst);
                        let r = job(i, snapshot);
                        in_flight.fetch_sub(1, Ordering::SeqCst);
                        completion.lock().unwrap().push(i);
                        (i, r)
                    })
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("pool job panicked"))
                .collect()
        });
        for (i, r) in outcomes {
            state[i] = State::Done(r.map(Arc::new).map_err(PoolError::Job));
        }
        waves.push(ready);
    }

    let results = state
        .into_iter()
        .map(|s| match s {
            State::Done(r) => r,
            State::Pending => Err(PoolError::Cycle),
        })
        .collect();
    PoolReport {
        results,
        waves,
        completion_order: completion.into_inner().unwrap(),
        max_in_flight: peak.load(Ordering::SeqCst),
    }
}
