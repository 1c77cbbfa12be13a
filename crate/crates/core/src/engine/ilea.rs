use std::fmt;
use std::str::FromStr;
use std::sync::Arc;
use std::time::{Duration, Instant};

use crate::comm::Transport;
use crate::error::{IleaError, Result};
use crate::losses::LocalLoss;
use crate::manifold::{Manifold, Point};

use super::inner::{inner_minimize_tolerant, InnerConfig};
use super::objective::{shard_weights, weighted_average, Objective};
use super::surrogate::SurrogateLoss;

/// Which machine builds the surrogate in each outer iteration.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Schedule {
    /// Iteration `s` uses machine `s mod m`.
    #[default]
    RoundRobin,
    /// Always machine 0.
    FixedFirst,
}

impl Schedule {
    pub fn machine(self, iter: usize, workers: usize) -> usize {
        match self {
            Schedule::RoundRobin => iter % workers,
            Schedule::FixedFirst => 0,
        }
    }
}

impl FromStr for Schedule {
    type Err = IleaError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "roundrobin" | "round-robin" => Ok(Schedule::RoundRobin),
            "fixedfirst" | "fixed-first" => Ok(Schedule::FixedFirst),
            other => Err(IleaError::Config(format!("unknown schedule {other:?}"))),
        }
    }
}

impl fmt::Display for Schedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Schedule::RoundRobin => "roundrobin",
            Schedule::FixedFirst => "fixedfirst",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IleaConfig {
    pub outer_iters: usize,
    pub inner: InnerConfig,
    pub schedule: Schedule,
    pub seed: u64,
}

impl Default for IleaConfig {
    fn default() -> Self {
        Self {
            outer_iters: 10,
            inner: InnerConfig::default(),
            schedule: Schedule::RoundRobin,
            seed: 0,
        }
    }
}

impl IleaConfig {
    pub fn validate(&self) -> Result<()> {
        if self.outer_iters == 0 {
            return Err(IleaError::Config("outer_iters must be positive".into()));
        }
        self.inner.validate()
    }
}

/// State after one communication round.
///
/// Record `s` describes the iterate `theta_s` broadcast in round `s`; the
/// inner fields describe the solve that produced `theta_{s+1}` from it and
/// are empty for the last record.
#[derive(Clone, Debug)]
pub struct IterationRecord {
    pub iter: usize,
    pub iterate: Point,
    /// Norm of the global gradient at the iterate.
    pub grad_norm: f64,
    pub oracle_dr: Option<f64>,
    pub oracle_dg: Option<f64>,
    pub comm_bytes: u64,
    pub machine: Option<usize>,
    pub inner_steps: usize,
    pub stalled: bool,
    /// Time since the run started, taken when the record was made.
    pub wall: Duration,
}

#[derive(Clone, Debug)]
pub struct IleaOutcome {
    pub point: Point,
    pub records: Vec<IterationRecord>,
}

fn oracle_distances(
    manifold: &dyn Manifold,
    theta: &Point,
    oracle: Option<&Point>,
) -> Result<(Option<f64>, Option<f64>)> {
    let Some(o) = oracle else {
        return Ok((None, None));
    };
    let dg = manifold.geodesic_distance(theta, o)?;
    let dr = match manifold.retraction_distance(theta, o) {
        Ok(d) => Some(d),
        Err(IleaError::CutLocus) => None,
        Err(e) => return Err(e),
    };
    Ok((dr, Some(dg)))
}

/// Runs `outer_iters` outer iterations from `start`, followed by one final
/// round that evaluates the global gradient at the result.
///
/// Every round broadcasts the iterate, gathers one gradient per worker at
/// the designated machine and averages them with weights `n_j / N`. The
/// designated machine then minimizes its surrogate starting from the iterate.
pub fn run_ilea(
    manifold: &dyn Manifold,
    shards: &[Arc<dyn LocalLoss>],
    start: &Point,
    cfg: &IleaConfig,
    transport: &mut dyn Transport,
    oracle: Option<&Point>,
    observer: &mut dyn FnMut(&IterationRecord) -> Result<()>,
) -> Result<IleaOutcome> {
    cfg.validate()?;
    let m = shards.len();
    if m == 0 || transport.workers() != m {
        return Err(IleaError::Config(format!(
            "{m} shards but {} workers",
            transport.workers()
        )));
    }
    manifold.check_point(start)?;
    let sizes: Vec<usize> = shards.iter().map(|s| s.len()).collect();
    let weights = shard_weights(&sizes);
    let clock = Instant::now();
    let mut theta = start.clone();
    let mut records = Vec::with_capacity(cfg.outer_iters + 1);
    let mut sender = cfg.schedule.machine(0, m);
    for s in 0..=cfg.outer_iters {
        let round = s as u64;
        let machine = cfg.schedule.machine(s, m);
        transport.broadcast(&theta, round, sender)?;
        let grads = transport.gather_gradients(&theta, round, machine)?;
        let global = weighted_average(&grads, &weights)?;
        let comm_bytes = transport
            .stats()
            .round(round)
            .map_or(0, |r| r.total_bytes());
        let (oracle_dr, oracle_dg) = oracle_distances(manifold, &theta, oracle)?;
        let mut record = IterationRecord {
            iter: s,
            iterate: theta.clone(),
            grad_norm: global.norm(),
            oracle_dr,
            oracle_dg,
            comm_bytes,
            machine: None,
            inner_steps: 0,
            stalled: false,
            wall: Duration::ZERO,
        };
        if s < cfg.outer_iters {
            let sur = SurrogateLoss::from_gradients(
                manifold,
                machine,
                Arc::clone(&shards[machine]),
                &grads[machine],
                &global,
            )?;
            let (out, stalled) = inner_minimize_tolerant(manifold, &sur, &theta, &cfg.inner)?;
            if stalled {
                log::info!("round {s}: surrogate solve on machine {machine} ended at the line-search floor");
            }
            record.machine = Some(machine);
            record.inner_steps = out.steps;
            record.stalled = stalled;
            theta = out.point;
            sender = machine;
        }
        record.wall = clock.elapsed();
        log::debug!(
            "round {s}: |grad| = {:.3e}, {} bytes, {} inner steps",
            record.grad_norm,
            record.comm_bytes,
            record.inner_steps
        );
        observer(&record)?;
        records.push(record);
    }
    Ok(IleaOutcome {
        point: theta,
        records,
    })
}

/// Single-machine counterpart of [`run_ilea`]: the same sequence of inner
/// solves, each on the full-data loss.
pub fn centralized_descent(
    manifold: &dyn Manifold,
    loss: &dyn Objective,
    start: &Point,
    cfg: &IleaConfig,
    oracle: Option<&Point>,
) -> Result<IleaOutcome> {
    cfg.validate()?;
    manifold.check_point(start)?;
    let clock = Instant::now();
    let mut theta = start.clone();
    let mut records = Vec::with_capacity(cfg.outer_iters + 1);
    for s in 0..=cfg.outer_iters {
        let grad_norm = loss.value_grad(&theta)?.grad.norm();
        let (oracle_dr, oracle_dg) = oracle_distances(manifold, &theta, oracle)?;
        let mut record = IterationRecord {
            iter: s,
            iterate: theta.clone(),
            grad_norm,
            oracle_dr,
            oracle_dg,
            comm_bytes: 0,
            machine: None,
            inner_steps: 0,
            stalled: false,
            wall: Duration::ZERO,
        };
        if s < cfg.outer_iters {
            let (out, stalled) = inner_minimize_tolerant(manifold, loss, &theta, &cfg.inner)?;
            record.machine = Some(0);
            record.inner_steps = out.steps;
            record.stalled = stalled;
            theta = out.point;
        }
        record.wall = clock.elapsed();
        records.push(record);
    }
    Ok(IleaOutcome {
        point: theta,
        records,
    })
}
