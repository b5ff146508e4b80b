//! Seeded, order-independent trial runner and per-protocol summaries.
//!
//! Trial `i` always draws from `root.with(TRIAL, i)`, so results are the
//! same for any thread count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::and_protocols::{run_and, run_and_majority, run_and_tilde, AndParams, AndValue};
use crate::error::Result;
use crate::grover::{run_grover, run_grover_blocked, GroverParams};
use crate::optics::ChannelModel;
use crate::rng::{tag, StreamKey};
use crate::scheduler::{run_pi_d, Calendar, ProtocolParams, ScheduleResult};
use crate::stats::ExecStats;

pub fn trial_key(root: StreamKey, trial: u64) -> StreamKey {
    root.with(tag::TRIAL, trial)
}

/// Shared and local streams for one trial of a two-party protocol.
pub fn trial_streams(root: StreamKey, trial: u64) -> (StreamKey, StreamKey) {
    let k = trial_key(root, trial);
    (k.with(tag::SHARED, 0), k.with(tag::LOCAL, 0))
}

/// Runs `f` once per trial in parallel and returns the results in trial
/// order. The first error in trial order wins.
pub fn run_trials<T, F>(root: StreamKey, trials: u64, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(StreamKey) -> Result<T> + Sync,
{
    (0..trials).into_par_iter().map(|i| f(trial_key(root, i))).collect()
}

/// A success count with its binomial standard error.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Proportion {
    pub hits: u64,
    pub trials: u64,
}

impl Proportion {
    pub fn rate(&self) -> f64 {
        self.hits as f64 / self.trials as f64
    }

    /// Standard error at the reference probability `p`.
    pub fn sigma_at(&self, p: f64) -> f64 {
        (p * (1.0 - p) / self.trials as f64).sqrt()
    }

    /// `|rate - p| <= k sigma(p)`. A zero-variance reference needs an exact match.
    pub fn within(&self, p: f64, k: f64) -> bool {
        (self.rate() - p).abs() <= k * self.sigma_at(p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AndTildeSummary {
    pub trials: u64,
    pub zeros: u64,
    pub ones: u64,
    pub inconclusive: u64,
}

impl AndTildeSummary {
    pub fn inconclusive_rate(&self) -> Proportion {
        Proportion {
            hits: self.inconclusive,
            trials: self.trials,
        }
    }
}

pub fn simulate_and_tilde(a: bool, b: bool, p: &AndParams, ch: &ChannelModel, root: StreamKey, trials: u64) -> Result<AndTildeSummary> {
    let values = run_trials(root, trials, |k| Ok(run_and_tilde(a, b, p, ch, &mut k.rng())?.value))?;
    let count = |v: AndValue| values.iter().filter(|&&x| x == v).count() as u64;
    Ok(AndTildeSummary {
        trials,
        zeros: count(AndValue::Zero),
        ones: count(AndValue::One),
        inconclusive: count(AndValue::Inconclusive),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AndSummary {
    pub trials: u64,
    pub ones: u64,
    pub wrong: u64,
    pub budget_exhausted: u64,
    pub mean_reruns: f64,
    pub stats: ExecStats,
}

/// Conclusive AND, or the majority variant when `reps` is given.
pub fn simulate_and(
    a: bool,
    b: bool,
    reps: Option<u32>,
    p: &AndParams,
    ch: &ChannelModel,
    root: StreamKey,
    trials: u64,
) -> Result<AndSummary> {
    let runs = run_trials(root, trials, |k| {
        let mut rng = k.rng();
        let run = match reps {
            Some(m) => run_and_majority(a, b, m, p, ch, &mut rng),
            None => run_and(a, b, p, ch, &mut rng),
        };
        match run {
            Ok(r) => Ok(Some(r)),
            Err(crate::Error::BudgetExhausted { .. }) => Ok(None),
            Err(e) => Err(e),
        }
    })?;
    let mut s = AndSummary {
        trials,
        ones: 0,
        wrong: 0,
        budget_exhausted: 0,
        mean_reruns: 0.0,
        stats: ExecStats::default(),
    };
    for run in &runs {
        match run {
            Some(r) => {
                s.ones += r.value as u64;
                s.wrong += (r.value != (a && b)) as u64;
                s.stats.merge(&r.stats);
            }
            None => s.budget_exhausted += 1,
        }
    }
    s.mean_reruns = s.stats.reruns as f64 / trials as f64;
    Ok(s)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleSummary {
    pub trials: u64,
    pub found: u64,
    pub empty: u64,
    /// Dates returned that are not common free dates.
    pub unsound: u64,
    /// Empty results although an intersection exists.
    pub missed: u64,
    pub mean_quantum_messages: f64,
    pub mean_classical_bits: f64,
    pub stats: ExecStats,
}

/// Aggregates scheduling results for fixed inputs `x`, `y`.
pub fn summarize_schedules(x: &Calendar, y: &Calendar, results: &[(ScheduleResult, ExecStats)]) -> ScheduleSummary {
    let intersect = x.first_intersection(y).is_some();
    let trials = results.len() as u64;
    let mut s = ScheduleSummary {
        trials,
        found: 0,
        empty: 0,
        unsound: 0,
        missed: 0,
        mean_quantum_messages: 0.0,
        mean_classical_bits: 0.0,
        stats: ExecStats::default(),
    };
    for (res, st) in results {
        match res {
            ScheduleResult::Date(d) => {
                s.found += 1;
                s.unsound += !(x.get(*d) && y.get(*d)) as u64;
            }
            ScheduleResult::Empty => {
                s.empty += 1;
                s.missed += intersect as u64;
            }
        }
        s.stats.merge(st);
    }
    if trials > 0 {
        s.mean_quantum_messages = s.stats.quantum_messages as f64 / trials as f64;
        s.mean_classical_bits = s.stats.classical_bits as f64 / trials as f64;
    }
    s
}

pub fn simulate_pi_d(
    x: &Calendar,
    y: &Calendar,
    p: &ProtocolParams,
    ch: &ChannelModel,
    root: StreamKey,
    trials: u64,
) -> Result<ScheduleSummary> {
    let results = (0..trials)
        .into_par_iter()
        .map(|i| {
            let (shared, local) = trial_streams(root, i);
            let out = run_pi_d(x, y, p, ch, shared, local)?;
            Ok((out.result, out.stats))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(summarize_schedules(x, y, &results))
}

pub fn simulate_grover(
    x: &Calendar,
    y: &Calendar,
    gp: &GroverParams,
    ch: &ChannelModel,
    root: StreamKey,
    trials: u64,
) -> Result<ScheduleSummary> {
    let results = run_trials(root, trials, |k| {
        let out = run_grover(x, y, gp, ch, &mut k.rng())?;
        Ok((out.result, out.stats))
    })?;
    Ok(summarize_schedules(x, y, &results))
}

pub fn simulate_grover_blocked(
    x: &Calendar,
    y: &Calendar,
    block_scale: usize,
    gp: &GroverParams,
    ch: &ChannelModel,
    root: StreamKey,
    trials: u64,
) -> Result<ScheduleSummary> {
    let results = run_trials(root, trials, |k| {
        let out = run_grover_blocked(x, y, block_scale, gp, ch, k)?;
        Ok((out.result, out.stats))
    })?;
    Ok(summarize_schedules(x, y, &results))
}
