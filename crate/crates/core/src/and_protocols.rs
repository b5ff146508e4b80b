//! Single-date AND subroutines.
//!
//! The round structure is shared by every variant: Alice holds a two-mode
//! register, acts on it according to her bit, sends it to Bob, who acts
//! according to his bit and sends it back. After `r` rounds Alice measures
//! both modes. Light ending in the first mode means "0", in the second "1".
//!
//! [`AndSchedule`] exposes the per-round actions so that the network harness
//! can drive the exact same arithmetic from two separate endpoints.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::optics::{check_transmissivity, detect, rotate_pair, scale_in_place, ChannelModel, ClickPattern, ModeAmplitudes};
use crate::stats::ExecStats;

/// Bits in the result announcement that ends every attempt (one per detector).
pub const RESULT_BITS: u64 = 2;
/// Bits exchanged by the classical verification after a raw "1".
pub const VERIFY_BITS: u64 = 2;

pub const DEFAULT_MAX_RERUNS: u32 = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum AndVariant {
    /// Beamsplitter rotation by `pi/2r` with re-injection on `b = 0`.
    #[default]
    Main,
    /// Coherent-state image of the reflection-based qubit protocol.
    Jrs,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AndParams {
    pub r: u32,
    pub alpha_out: f64,
    pub variant: AndVariant,
    pub max_reruns: u32,
    /// Re-inject `alpha_out` every round instead of the loss-compensating
    /// schedule. Exact on a lossless channel.
    pub constant_amplitude: bool,
}

impl AndParams {
    pub fn new(r: u32, alpha_out: f64) -> Self {
        AndParams {
            r,
            alpha_out,
            variant: AndVariant::Main,
            max_reruns: DEFAULT_MAX_RERUNS,
            constant_amplitude: false,
        }
    }

    pub fn with_variant(mut self, variant: AndVariant) -> Self {
        self.variant = variant;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.r == 0 {
            return Err(Error::param("r", "at least one round is required"));
        }
        if !(self.alpha_out > 0.0 && self.alpha_out.is_finite()) {
            return Err(Error::param("alpha_out", format!("{} is not a positive amplitude", self.alpha_out)));
        }
        if self.max_reruns == 0 {
            return Err(Error::param("max_reruns", "must be at least 1"));
        }
        if self.variant == AndVariant::Jrs && self.r % 2 == 1 {
            return Err(Error::param("r", format!("the reflection variant needs an even round count, got {}", self.r)));
        }
        Ok(())
    }

    /// Messages in one attempt: `2r` quantum hops plus Alice's announcement.
    pub fn messages_per_attempt(&self) -> u64 {
        2 * self.r as u64 + 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AndValue {
    Zero,
    One,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AndOutcome {
    pub value: AndValue,
    pub click_pattern: ClickPattern,
    pub transcript_len: u64,
}

/// Result of a conclusive wrapper run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AndRun {
    pub value: bool,
    pub stats: ExecStats,
}

/// `alpha_0 = alpha_out / eta^r`, `alpha_i = alpha_out / eta^(r - i + 1/2)`.
pub fn amplitude_schedule(alpha_out: f64, eta: f64, r: u32) -> Result<Vec<f64>> {
    check_transmissivity("eta", eta)?;
    if r == 0 {
        return Err(Error::param("r", "at least one round is required"));
    }
    let rf = r as f64;
    let mut out = Vec::with_capacity(r as usize + 1);
    out.push(alpha_out / eta.powf(rf));
    for i in 1..=r {
        out.push(alpha_out / eta.powf(rf - i as f64 + 0.5));
    }
    Ok(out)
}

pub fn classify(clicks: &ClickPattern) -> AndValue {
    match clicks.0.as_slice() {
        [true, false] => AndValue::Zero,
        [false, true] => AndValue::One,
        _ => AndValue::Inconclusive,
    }
}

/// Per-round actions of one AND attempt, shared by both parties.
#[derive(Debug, Clone, PartialEq)]
pub struct AndSchedule {
    variant: AndVariant,
    r: u32,
    theta: f64,
    amps: Vec<f64>,
}

impl AndSchedule {
    pub fn new(p: &AndParams, eta: f64) -> Result<Self> {
        p.validate()?;
        check_transmissivity("eta", eta)?;
        let rf = p.r as f64;
        let (theta, amps) = match p.variant {
            AndVariant::Main => {
                let amps = if p.constant_amplitude {
                    vec![p.alpha_out; p.r as usize + 1]
                } else {
                    amplitude_schedule(p.alpha_out, eta, p.r)?
                };
                (PI / (2.0 * rf), amps)
            }
            // no re-injection: only the initial amplitude matters
            AndVariant::Jrs => {
                let a0 = if p.constant_amplitude {
                    p.alpha_out
                } else {
                    p.alpha_out / eta.powf(rf)
                };
                (PI / (4.0 * rf), vec![a0])
            }
        };
        Ok(AndSchedule {
            variant: p.variant,
            r: p.r,
            theta,
            amps,
        })
    }

    pub fn rounds(&self) -> u32 {
        self.r
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn initial_state(&self) -> ModeAmplitudes {
        ModeAmplitudes::single(self.amps[0])
    }

    pub fn alice_round(&self, a: bool, state: &mut ModeAmplitudes) {
        if !a {
            return;
        }
        let m = state.as_mut_slice();
        match self.variant {
            AndVariant::Main => {
                let (x, y) = rotate_pair(m[0], m[1], self.theta);
                m[0] = x;
                m[1] = y;
            }
            AndVariant::Jrs => {
                // reflection about (cos theta, sin theta)
                let (s, c) = (2.0 * self.theta).sin_cos();
                let (x, y) = (m[0], m[1]);
                m[0] = x * c + y * s;
                m[1] = x * s - y * c;
            }
        }
    }

    /// Bob's action in round `round` (1-based).
    pub fn bob_round(&self, b: bool, round: u32, state: &mut ModeAmplitudes) {
        let m = state.as_mut_slice();
        match self.variant {
            AndVariant::Main => {
                if !b {
                    m[0] = Complex64::new(self.amps[round as usize], 0.0);
                    m[1] = Complex64::new(0.0, 0.0);
                }
            }
            AndVariant::Jrs => {
                if b {
                    m[1] = -m[1];
                }
            }
        }
    }
}

/// Amplitudes reaching Alice's detectors, before measurement.
pub fn pre_detection_state(a: bool, b: bool, p: &AndParams, ch: &ChannelModel) -> Result<ModeAmplitudes> {
    ch.validate()?;
    let sched = AndSchedule::new(p, ch.eta)?;
    let mut state = sched.initial_state();
    for round in 1..=p.r {
        sched.alice_round(a, &mut state);
        scale_in_place(state.as_mut_slice(), ch.eta);
        sched.bob_round(b, round, &mut state);
        scale_in_place(state.as_mut_slice(), ch.eta);
    }
    Ok(state)
}

/// One attempt of the inconclusive-capable AND, in the variant named by `p`.
/// Draws exactly two uniforms from `rng` (one per detector).
pub fn run_and_tilde<R: Rng + ?Sized>(a: bool, b: bool, p: &AndParams, ch: &ChannelModel, rng: &mut R) -> Result<AndOutcome> {
    let state = pre_detection_state(a, b, p, ch)?;
    let clicks = detect(&state, ch, rng);
    Ok(AndOutcome {
        value: classify(&clicks),
        click_pattern: clicks,
        transcript_len: p.messages_per_attempt(),
    })
}

pub fn run_and_jrs<R: Rng + ?Sized>(a: bool, b: bool, p: &AndParams, ch: &ChannelModel, rng: &mut R) -> Result<AndOutcome> {
    run_and_tilde(a, b, &p.with_variant(AndVariant::Jrs), ch, rng)
}

pub(crate) fn record_attempt(stats: &mut ExecStats, p: &AndParams, out: &AndOutcome) {
    stats.attempts += 1;
    stats.quantum_messages += 2 * p.r as u64;
    stats.classical_messages += 1;
    stats.classical_bits += RESULT_BITS;
    stats.detector_clicks += out.click_pattern.clicks() as u64;
}

pub(crate) fn record_verification(stats: &mut ExecStats) {
    stats.classical_messages += 2;
    stats.classical_bits += VERIFY_BITS;
}

/// Conclusive AND: rerun on inconclusive, verify a raw "1" classically.
pub fn run_and<R: Rng + ?Sized>(a: bool, b: bool, p: &AndParams, ch: &ChannelModel, rng: &mut R) -> Result<AndRun> {
    let mut stats = ExecStats::default();
    for attempt in 0..p.max_reruns {
        let out = run_and_tilde(a, b, p, ch, rng)?;
        record_attempt(&mut stats, p, &out);
        if attempt > 0 {
            stats.reruns += 1;
        }
        match out.value {
            AndValue::Zero => return Ok(AndRun { value: false, stats }),
            AndValue::One => {
                record_verification(&mut stats);
                return Ok(AndRun { value: a && b, stats });
            }
            AndValue::Inconclusive => {}
        }
    }
    Err(Error::BudgetExhausted { budget: p.max_reruns })
}

/// Majority-vote AND: `reps` attempts, verify only if more than half of all
/// attempts returned "1".
pub fn run_and_majority<R: Rng + ?Sized>(
    a: bool,
    b: bool,
    reps: u32,
    p: &AndParams,
    ch: &ChannelModel,
    rng: &mut R,
) -> Result<AndRun> {
    if reps == 0 {
        return Err(Error::param("reps", "must be at least 1"));
    }
    let mut stats = ExecStats::default();
    let mut ones = 0u32;
    for _ in 0..reps {
        let out = run_and_tilde(a, b, p, ch, rng)?;
        record_attempt(&mut stats, p, &out);
        if out.value == AndValue::One {
            ones += 1;
        }
    }
    if 2 * ones > reps {
        record_verification(&mut stats);
        return Ok(AndRun { value: a && b, stats });
    }
    Ok(AndRun { value: false, stats })
}

/// `ceil(c ln n)`, at least 1.
pub fn reps_from_constant(n: f64, c: f64) -> Result<u32> {
    if !(n >= 2.0) || !(c > 0.0) || !c.is_finite() {
        return Err(Error::param("reps", format!("need n >= 2 and c > 0, got n={n}, c={c}")));
    }
    Ok(((c * n.ln()).ceil() as u32).max(1))
}

/// `ln Pr[Binomial(m, q) > m/2]`.
pub fn ln_majority_tail(m: u32, q: f64) -> f64 {
    if q <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if q >= 1.0 {
        return 0.0;
    }
    let (lq, l1q) = (q.ln(), (-q).ln_1p());
    let mut ln_choose = 0.0;
    let mut terms = Vec::new();
    for k in 0..=m {
        if k > 0 {
            ln_choose += ((m - k + 1) as f64).ln() - (k as f64).ln();
        }
        if 2 * k > m {
            terms.push(ln_choose + k as f64 * lq + (m - k) as f64 * l1q);
        }
    }
    let top = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    top + terms.iter().map(|t| (t - top).exp()).sum::<f64>().ln()
}

/// Smallest repetition count whose majority of spurious "1"s has probability
/// at most `1/n^2`, given the per-attempt spurious "1" probability.
pub fn majority_reps(n: f64, spurious_one: f64) -> Result<u32> {
    if !(n >= 2.0) {
        return Err(Error::param("n", format!("{n} is below 2")));
    }
    if !(0.0..0.5).contains(&spurious_one) {
        return Err(Error::param("spurious_one", format!("{spurious_one} is outside [0, 1/2)")));
    }
    let target = -2.0 * n.ln();
    (1..=1_000_000u32)
        .find(|&m| ln_majority_tail(m, spurious_one) <= target)
        .ok_or_else(|| Error::Infeasible("no repetition count up to 1e6 reaches 1/n^2".into()))
}

/// Probability that an AND=0 attempt reports "1": the lit first mode stays
/// dark while the empty second mode dark-counts.
pub fn spurious_one_probability(alpha_out: f64, ch: &ChannelModel) -> f64 {
    ch.p_dark * (1.0 - ch.p_dark) * (-ch.eta_det * alpha_out * alpha_out).exp()
}
