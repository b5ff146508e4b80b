//! Appointment scheduling by classical subsampling followed by date-wise AND.

use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use crate::and_protocols::{run_and, AndParams};
use crate::error::{Error, Result};
use crate::optics::ChannelModel;
use crate::rng::{tag, StreamKey};
use crate::stats::ExecStats;

/// Availability indicator over `n` dates.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Calendar(Vec<bool>);

impl Calendar {
    pub fn new(bits: Vec<bool>) -> Result<Self> {
        if bits.is_empty() {
            return Err(Error::param("calendar", "at least one date is required"));
        }
        Ok(Calendar(bits))
    }

    /// Low `n` bits of `mask`, date 0 first.
    pub fn from_mask(mask: u64, n: usize) -> Result<Self> {
        if n > 64 {
            return Err(Error::param("n", "masks cover at most 64 dates"));
        }
        Self::new((0..n).map(|i| mask >> i & 1 == 1).collect())
    }

    /// Each date available independently with probability `density`.
    pub fn random<R: Rng + ?Sized>(n: usize, density: f64, rng: &mut R) -> Result<Self> {
        Self::new((0..n).map(|_| rng.random::<f64>() < density).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn bits(&self) -> &[bool] {
        &self.0
    }

    pub fn get(&self, date: usize) -> bool {
        self.0[date]
    }

    pub fn intersections<'a>(&'a self, other: &'a Calendar) -> impl Iterator<Item = usize> + 'a {
        self.0
            .iter()
            .zip(&other.0)
            .enumerate()
            .filter(|(_, (&a, &b))| a && b)
            .map(|(i, _)| i)
    }

    pub fn first_intersection(&self, other: &Calendar) -> Option<usize> {
        self.intersections(other).next()
    }

    pub(crate) fn expect_same_len(&self, other: &Calendar) -> Result<()> {
        if self.len() != other.len() {
            return Err(Error::Dimension {
                expected: self.len(),
                got: other.len(),
            });
        }
        Ok(())
    }
}

impl FromStr for Calendar {
    type Err = Error;

    /// Parses strings like `"0110"`; date 0 is the first character.
    fn from_str(s: &str) -> Result<Self> {
        let bits = s
            .trim()
            .chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(Error::param("calendar", format!("unexpected character {other:?}"))),
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(bits)
    }
}

impl fmt::Display for Calendar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.0 {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind", content = "date")]
pub enum ScheduleResult {
    Date(usize),
    Empty,
}

impl ScheduleResult {
    pub fn date(&self) -> Option<usize> {
        match *self {
            ScheduleResult::Date(d) => Some(d),
            ScheduleResult::Empty => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchedulerOutput {
    pub result: ScheduleResult,
    pub stats: ExecStats,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProtocolParams {
    /// Number of public draws, with replacement.
    pub s: usize,
    pub and: AndParams,
    /// Stop the date-wise phase at the first intersecting date. The answer
    /// is the same (dates run in increasing order); the statistics are not.
    pub early_stop: bool,
}

impl ProtocolParams {
    pub fn new(s: usize, and: AndParams) -> Self {
        ProtocolParams {
            s,
            and,
            early_stop: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.and.validate()
    }
}

/// `s` independent uniform dates from `[0, n)`.
pub fn subsample<R: Rng + ?Sized>(n: usize, s: usize, shared: &mut R) -> Result<Vec<usize>> {
    if n == 0 {
        return Err(Error::param("n", "calendar is empty"));
    }
    Ok((0..s).map(|_| shared.random_range(0..n)).collect())
}

/// Bits in Bob's reply after the disclosure: a found/not-found flag plus the
/// position of the earliest sampled intersection.
pub fn reply_bits(s: usize) -> u64 {
    (s as f64).log2().ceil() as u64 + 1
}

/// Outcome of the classical phase, shared with the network harness.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SamplePhase {
    pub draws: Vec<usize>,
    /// Distinct sampled dates, ascending.
    pub support: BTreeSet<usize>,
    pub found: Option<usize>,
}

/// The public sample both parties derive from the shared stream.
pub fn public_draws(n: usize, s: usize, shared: StreamKey) -> Result<Vec<usize>> {
    subsample(n, s, &mut shared.with(tag::SHARED, 0).rng())
}

pub fn sample_phase(x: &Calendar, y: &Calendar, s: usize, shared: StreamKey) -> Result<SamplePhase> {
    x.expect_same_len(y)?;
    let draws = public_draws(x.len(), s, shared)?;
    let support: BTreeSet<usize> = draws.iter().copied().collect();
    let found = support.iter().copied().find(|&d| x.get(d) && y.get(d));
    Ok(SamplePhase { draws, support, found })
}

pub(crate) fn record_sample_phase(stats: &mut ExecStats, s: usize) {
    if s > 0 {
        stats.classical_messages += 2;
        stats.classical_bits += s as u64 + reply_bits(s);
    }
}

/// Random stream used by the AND run on `date`.
pub fn date_stream(local: StreamKey, date: usize) -> StreamKey {
    local.with(tag::DATE, date as u64)
}

/// Runs the full scheduling protocol. `shared` seeds the public sample,
/// `local` seeds detector noise; dates get independent noise streams.
pub fn run_pi_d(
    x: &Calendar,
    y: &Calendar,
    p: &ProtocolParams,
    ch: &ChannelModel,
    shared: StreamKey,
    local: StreamKey,
) -> Result<SchedulerOutput> {
    p.validate()?;
    ch.validate()?;
    let phase = sample_phase(x, y, p.s, shared)?;
    let mut stats = ExecStats::default();
    record_sample_phase(&mut stats, p.s);
    if let Some(d) = phase.found {
        return Ok(SchedulerOutput {
            result: ScheduleResult::Date(d),
            stats,
        });
    }
    let mut first = None;
    for date in (0..x.len()).filter(|d| !phase.support.contains(d)) {
        let run = run_and(x.get(date), y.get(date), &p.and, ch, &mut date_stream(local, date).rng())?;
        stats.merge(&run.stats);
        if run.value && first.is_none() {
            first = Some(date);
            if p.early_stop {
                break;
            }
        }
    }
    Ok(SchedulerOutput {
        result: first.map_or(ScheduleResult::Empty, ScheduleResult::Date),
        stats,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn params(s: usize) -> ProtocolParams {
        ProtocolParams::new(s, AndParams::new(4, 1.2))
    }

    #[test]
    fn calendar_parsing() {
        let c: Calendar = "0110".parse().unwrap();
        assert_eq!(c.bits(), &[false, true, true, false]);
        assert_eq!(c.to_string(), "0110");
        assert!("01x".parse::<Calendar>().is_err());
        assert!("".parse::<Calendar>().is_err());
        assert_eq!(Calendar::from_mask(0b101, 3).unwrap().to_string(), "101");
    }

    #[test]
    fn subsample_basics() {
        let mut rng = StreamKey::new(1).rng();
        assert_eq!(subsample(1, 3, &mut rng).unwrap(), vec![0, 0, 0]);
        assert!(subsample(5, 0, &mut rng).unwrap().is_empty());
        let a = subsample(100, 20, &mut StreamKey::new(9).rng()).unwrap();
        let b = subsample(100, 20, &mut StreamKey::new(9).rng()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn subsample_is_uniform() {
        let (n, s) = (10_000usize, 100_000usize);
        let draws = subsample(n, s, &mut StreamKey::new(2).rng()).unwrap();
        let mut counts = vec![0u32; n];
        for d in draws {
            counts[d] += 1;
        }
        let e = s as f64 / n as f64;
        let chi2: f64 = counts.iter().map(|&c| (c as f64 - e).powi(2) / e).sum();
        // chi-square with 9999 dof, upper 0.001 quantile via Wilson-Hilferty
        let k = (n - 1) as f64;
        let z = 3.090_232;
        let crit = k * (1.0 - 2.0 / (9.0 * k) + z * (2.0 / (9.0 * k)).sqrt()).powi(3);
        assert!(chi2 < crit, "chi2 {chi2} crit {crit}");
    }

    #[test]
    fn reply_bit_counts() {
        assert_eq!(reply_bits(1), 1);
        assert_eq!(reply_bits(2), 2);
        assert_eq!(reply_bits(16), 5);
        assert_eq!(reply_bits(17), 6);
    }

    #[test]
    fn sampled_intersection_short_circuits() {
        let x: Calendar = "11111111".parse().unwrap();
        let y = x.clone();
        let out = run_pi_d(&x, &y, &params(4), &ChannelModel::ideal(), StreamKey::new(3), StreamKey::new(4)).unwrap();
        let phase = sample_phase(&x, &y, 4, StreamKey::new(3)).unwrap();
        assert_eq!(out.result, ScheduleResult::Date(*phase.support.iter().next().unwrap()));
        assert_eq!(out.stats.quantum_messages, 0);
        assert_eq!(out.stats.classical_bits, 4 + 3);
    }

    #[test]
    fn empty_intersection_gives_empty() {
        let x: Calendar = "10101010".parse().unwrap();
        let y: Calendar = "01010101".parse().unwrap();
        let noisy = ChannelModel::new(0.9, 0.7, 0.2).unwrap();
        for seed in 0..200 {
            let out = run_pi_d(&x, &y, &params(2), &noisy, StreamKey::new(seed), StreamKey::new(seed + 1000)).unwrap();
            assert_eq!(out.result, ScheduleResult::Empty);
        }
    }

    #[test]
    fn exhaustive_zero_error_small() {
        let n = 4;
        for xm in 0..1u64 << n {
            for ym in 0..1u64 << n {
                let x = Calendar::from_mask(xm, n).unwrap();
                let y = Calendar::from_mask(ym, n).unwrap();
                let out = run_pi_d(&x, &y, &params(1), &ChannelModel::ideal(), StreamKey::new(xm), StreamKey::new(ym)).unwrap();
                assert_eq!(out.result.date().is_some(), x.first_intersection(&y).is_some());
            }
        }
    }

    #[test]
    fn every_attempt_costs_2r_quantum_messages() {
        let x: Calendar = "1101100111".parse().unwrap();
        let y: Calendar = "0111011010".parse().unwrap();
        let ch = ChannelModel::new(0.95, 0.9, 0.01).unwrap();
        let p = params(0);
        let out = run_pi_d(&x, &y, &p, &ch, StreamKey::new(5), StreamKey::new(6)).unwrap();
        assert_eq!(out.stats.quantum_messages, out.stats.attempts * 2 * p.and.r as u64);
    }

    #[test]
    fn early_stop_keeps_answer() {
        let x: Calendar = "0011011101".parse().unwrap();
        let y: Calendar = "0101011111".parse().unwrap();
        let ch = ChannelModel::new(0.97, 0.9, 0.0).unwrap();
        let mut p = params(2);
        let full = run_pi_d(&x, &y, &p, &ch, StreamKey::new(7), StreamKey::new(8)).unwrap();
        p.early_stop = true;
        let quick = run_pi_d(&x, &y, &p, &ch, StreamKey::new(7), StreamKey::new(8)).unwrap();
        assert_eq!(full.result, quick.result);
        assert!(quick.stats.attempts <= full.stats.attempts);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(128))]

        #[test]
        fn reported_date_is_an_intersection(
            xm in any::<u64>(), ym in any::<u64>(), n in 1usize..40, s in 0usize..10,
            eta in 0.8f64..=1.0, p_dark in 0.0f64..0.3, seed in any::<u64>(),
        ) {
            let x = Calendar::from_mask(xm, n).unwrap();
            let y = Calendar::from_mask(ym, n).unwrap();
            let ch = ChannelModel::new(eta, 0.9, p_dark).unwrap();
            let out = run_pi_d(&x, &y, &params(s), &ch, StreamKey::new(seed), StreamKey::new(!seed)).unwrap();
            if let ScheduleResult::Date(d) = out.result {
                prop_assert!(x.get(d) && y.get(d));
            }
        }
    }
}
