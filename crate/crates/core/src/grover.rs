//! Coherent-state distributed Grover search.
//!
//! Alice holds `n` modes starting at `alpha/sqrt(n)` each. One iteration is
//! the distributed oracle (two quantum messages over `2n` modes) followed by
//! Alice's inversion about the mean. Amplitudes track the qubit algorithm
//! exactly, scaled by `alpha`.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::{E, LN_2, PI};

use crate::error::{Error, Result};
use crate::leakage::{BoundParams, BoundTerms, BoundVariant, LeakageBound};
use crate::optics::{detect, scale_in_place, ChannelModel, ModeAmplitudes};
use crate::rng::{tag, StreamKey};
use crate::scheduler::{Calendar, ScheduleResult, SchedulerOutput};
use crate::stats::ExecStats;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroverParams {
    pub n: usize,
    /// Promised number of intersections when the inputs intersect.
    pub k: usize,
    pub alpha: f64,
    pub epsilon: f64,
    /// Overrides the computed repetition count.
    pub max_reps: Option<u32>,
    /// Check the promise against the inputs before running.
    pub verify_promise: bool,
}

impl GroverParams {
    pub fn new(n: usize, k: usize, alpha: f64, epsilon: f64) -> Self {
        GroverParams {
            n,
            k,
            alpha,
            epsilon,
            max_reps: None,
            verify_promise: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::param("n", "at least one mode is required"));
        }
        if self.k == 0 || self.k > self.n {
            return Err(Error::param("k", format!("promised count {} is outside [1, n]", self.k)));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::param("alpha", format!("{} is not a positive amplitude", self.alpha)));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::param("epsilon", format!("{} is outside (0, 1)", self.epsilon)));
        }
        if self.max_reps == Some(0) {
            return Err(Error::param("max_reps", "must be at least 1"));
        }
        Ok(())
    }

    pub fn theta(&self) -> f64 {
        (self.k as f64 / self.n as f64).sqrt().asin()
    }

    /// `floor(pi / 4 theta)` with `sin^2 theta = k/n`.
    pub fn iterations(&self) -> u32 {
        grover_iterations(self.n, self.k)
    }

    pub fn repetitions(&self) -> Result<u32> {
        match self.max_reps {
            Some(k) => Ok(k),
            None => grover_repetitions(self.n, self.k, self.alpha, self.epsilon),
        }
    }

    /// One-way quantum transmissions over all repetitions.
    pub fn total_hops(&self) -> Result<u64> {
        Ok(2 * self.iterations() as u64 * self.repetitions()? as u64)
    }
}

const MAX_REPETITIONS: f64 = 1e9;

pub fn grover_iterations(n: usize, k: usize) -> u32 {
    if k == 0 || k > n {
        return 0;
    }
    let theta = (k as f64 / n as f64).sqrt().asin();
    (PI / (4.0 * theta)).floor() as u32
}

/// `ceil(log(1/eps) / log(1/q))` with `q = 1 - e^(-alpha^2 k/n) + e^(-alpha^2)`.
pub fn grover_repetitions(n: usize, k: usize, alpha: f64, epsilon: f64) -> Result<u32> {
    let a2 = alpha * alpha;
    let q = -(-a2 * k as f64 / n as f64).exp_m1() + (-a2).exp();
    if !(q < 1.0) {
        return Err(Error::param(
            "alpha",
            format!("per-repetition failure bound {q} is not below 1; alpha = {alpha} is too small"),
        ));
    }
    let reps = ((1.0 / epsilon).ln() / (1.0 / q).ln()).ceil().max(1.0);
    if reps > MAX_REPETITIONS {
        return Err(Error::param("alpha", format!("{reps:.3e} repetitions needed; alpha = {alpha} is too small")));
    }
    Ok(reps as u32)
}

fn expect_lengths(amps: &ModeAmplitudes, x: &Calendar, y: &Calendar) -> Result<()> {
    x.expect_same_len(y)?;
    if amps.len() != x.len() {
        return Err(Error::Dimension {
            expected: x.len(),
            got: amps.len(),
        });
    }
    Ok(())
}

/// Net effect of the oracle: flip the sign of every intersecting mode.
pub fn oracle_sign_flip(amps: &ModeAmplitudes, x: &Calendar, y: &Calendar) -> Result<ModeAmplitudes> {
    expect_lengths(amps, x, y)?;
    let mut out = amps.clone();
    for (i, a) in out.as_mut_slice().iter_mut().enumerate() {
        if x.get(i) && y.get(i) {
            *a = -*a;
        }
    }
    Ok(out)
}

/// Distributed oracle over `2n` modes: Alice swaps pair `i` into the
/// auxiliary slot where `x_i = 1`, sends everything to Bob (one hop), Bob
/// flips the auxiliary sign where `y_i = 1`, sends it back (one hop), Alice
/// swaps back and drops the auxiliaries.
fn oracle_two_hop(amps: &ModeAmplitudes, x: &Calendar, y: &Calendar, eta: f64) -> Result<ModeAmplitudes> {
    expect_lengths(amps, x, y)?;
    let mut reg = oracle_register(amps.as_slice(), x);
    scale_in_place(&mut reg, eta);
    oracle_mark(&mut reg, y);
    scale_in_place(&mut reg, eta);
    ModeAmplitudes::new(oracle_unregister(reg, x))
}

/// Alice's half before the first hop. Layout: `[main_0, aux_0, main_1, aux_1, ...]`.
pub(crate) fn oracle_register(amps: &[Complex64], x: &Calendar) -> Vec<Complex64> {
    let zero = Complex64::new(0.0, 0.0);
    let mut reg: Vec<Complex64> = amps.iter().flat_map(|&a| [a, zero]).collect();
    swap_marked(&mut reg, x);
    reg
}

/// Bob's half: sign flip on the auxiliary slot of every available date.
pub(crate) fn oracle_mark(reg: &mut [Complex64], y: &Calendar) {
    for i in (0..reg.len() / 2).filter(|&i| y.get(i)) {
        reg[2 * i + 1] = -reg[2 * i + 1];
    }
}

/// Alice's half after the return hop: swap back and drop the auxiliaries.
pub(crate) fn oracle_unregister(mut reg: Vec<Complex64>, x: &Calendar) -> Vec<Complex64> {
    swap_marked(&mut reg, x);
    reg.into_iter().step_by(2).collect()
}

fn swap_marked(reg: &mut [Complex64], x: &Calendar) {
    for i in (0..reg.len() / 2).filter(|&i| x.get(i)) {
        reg.swap(2 * i, 2 * i + 1);
    }
}

pub fn grover_oracle(amps: &ModeAmplitudes, x: &Calendar, y: &Calendar) -> Result<ModeAmplitudes> {
    oracle_two_hop(amps, x, y, 1.0)
}

/// Inversion about the mean, `a_i -> 2 mean - a_i`.
pub fn grover_diffusion(amps: &ModeAmplitudes) -> ModeAmplitudes {
    let mut out = amps.clone();
    diffuse_in_place(out.as_mut_slice());
    out
}

pub(crate) fn diffuse_in_place(a: &mut [Complex64]) {
    let mean = a.iter().sum::<Complex64>() / a.len() as f64;
    for v in a {
        *v = 2.0 * mean - *v;
    }
}

pub fn uniform_state(n: usize, alpha: f64) -> Result<ModeAmplitudes> {
    ModeAmplitudes::new(vec![Complex64::new(alpha / (n as f64).sqrt(), 0.0); n])
}

fn iterate(state: &mut ModeAmplitudes, x: &Calendar, y: &Calendar, eta: f64) -> Result<()> {
    if eta == 1.0 {
        // auxiliary modes never carry light between the swaps on a lossless
        // channel, so the direct sign flip is exact
        for (i, a) in state.as_mut_slice().iter_mut().enumerate() {
            if x.get(i) && y.get(i) {
                *a = -*a;
            }
        }
    } else {
        *state = oracle_two_hop(state, x, y, eta)?;
    }
    diffuse_in_place(state.as_mut_slice());
    Ok(())
}

/// States after `0..=iterations` oracle-plus-diffusion steps on a lossless channel.
pub fn grover_trace(x: &Calendar, y: &Calendar, alpha: f64, iterations: u32) -> Result<Vec<ModeAmplitudes>> {
    x.expect_same_len(y)?;
    let mut state = uniform_state(x.len(), alpha)?;
    let mut out = vec![state.clone()];
    for _ in 0..iterations {
        iterate(&mut state, x, y, 1.0)?;
        out.push(state.clone());
    }
    Ok(out)
}

/// Bits Alice sends after a repetition with at least one click: the index and `x_i`.
pub fn announce_bits(n: usize) -> u64 {
    (n as f64).log2().ceil() as u64 + 1
}

pub fn run_grover<R: Rng + ?Sized>(
    x: &Calendar,
    y: &Calendar,
    gp: &GroverParams,
    ch: &ChannelModel,
    rng: &mut R,
) -> Result<SchedulerOutput> {
    gp.validate()?;
    ch.validate()?;
    x.expect_same_len(y)?;
    if x.len() != gp.n {
        return Err(Error::Dimension {
            expected: gp.n,
            got: x.len(),
        });
    }
    if gp.verify_promise {
        let actual = x.intersections(y).count();
        if actual != 0 && actual != gp.k {
            return Err(Error::PromiseViolation {
                promised: gp.k,
                actual,
            });
        }
    }
    let iters = gp.iterations();
    let reps = gp.repetitions()?;
    let mut stats = ExecStats::default();
    for rep in 0..reps {
        stats.attempts += 1;
        if rep > 0 {
            stats.reruns += 1;
        }
        let mut state = uniform_state(gp.n, gp.alpha)?;
        for _ in 0..iters {
            iterate(&mut state, x, y, ch.eta)?;
        }
        stats.quantum_messages += 2 * iters as u64;
        let clicks = detect(&state, ch, rng);
        let clicked: Vec<usize> = clicks.clicked_indices().collect();
        stats.detector_clicks += clicked.len() as u64;
        if clicked.is_empty() {
            stats.classical_messages += 1;
            stats.classical_bits += 1;
            continue;
        }
        let i = clicked[rng.random_range(0..clicked.len())];
        stats.classical_messages += 2;
        stats.classical_bits += announce_bits(gp.n) + 1;
        if x.get(i) && y.get(i) {
            return Ok(SchedulerOutput {
                result: ScheduleResult::Date(i),
                stats,
            });
        }
    }
    Ok(SchedulerOutput {
        result: ScheduleResult::Empty,
        stats,
    })
}

/// Splits the calendar into blocks of `block_scale^2` dates (the last block
/// padded with unavailable dates), searches each block, and returns the
/// smallest verified intersection.
pub fn run_grover_blocked(
    x: &Calendar,
    y: &Calendar,
    block_scale: usize,
    gp: &GroverParams,
    ch: &ChannelModel,
    local: StreamKey,
) -> Result<SchedulerOutput> {
    x.expect_same_len(y)?;
    let size = block_scale * block_scale;
    if block_scale == 0 || size > x.len() {
        return Err(Error::param("block_scale", format!("block size {size} must lie in [1, n = {}]", x.len())));
    }
    let blocks = x.len().div_ceil(size);
    let block_params = GroverParams {
        n: size,
        verify_promise: false,
        ..*gp
    };
    let padded = |c: &Calendar, b: usize| {
        Calendar::new((b * size..(b + 1) * size).map(|i| i < c.len() && c.get(i)).collect())
    };
    let mut stats = ExecStats::default();
    let mut best = None;
    for b in 0..blocks {
        let (xb, yb) = (padded(x, b)?, padded(y, b)?);
        let out = run_grover(&xb, &yb, &block_params, ch, &mut local.with(tag::BLOCK, b as u64).rng())?;
        stats.merge(&out.stats);
        if let ScheduleResult::Date(d) = out.result {
            // candidate bits exchanged at the end
            stats.classical_messages += 2;
            stats.classical_bits += 2;
            if best.is_none() {
                best = Some(b * size + d);
            }
        }
    }
    Ok(SchedulerOutput {
        result: best.map_or(ScheduleResult::Empty, ScheduleResult::Date),
        stats,
    })
}

/// Photon-number bins around the mean `|alpha|^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinningParams {
    pub delta: f64,
    /// Last bin kept; the Chernoff tail beyond it is below `1e-12`.
    pub j_max: u32,
}

impl BinningParams {
    /// Smallest admissible width, `max((e^2 - 1) alpha^2, 1)`.
    pub fn for_alpha(alpha: f64) -> Self {
        Self::with_delta(((E * E - 1.0) * alpha * alpha).max(1.0))
    }

    pub fn with_delta(delta: f64) -> Self {
        let j_max = ((12.0 * 10f64.ln()) / delta).ceil() as u32 + 1;
        BinningParams { delta, j_max }
    }

    pub fn validate(&self, alpha: f64) -> Result<()> {
        let floor = (E * E - 1.0) * alpha * alpha;
        if !(self.delta >= floor && self.delta > 0.5 && self.delta.is_finite()) {
            return Err(Error::param(
                "delta",
                format!("{} is below max((e^2-1) alpha^2, 1/2) = {}", self.delta, floor.max(0.5)),
            ));
        }
        Ok(())
    }
}

/// Poisson probabilities `P(N = k)` for `k = 0..`, truncated once the
/// remaining mass is below `1e-12` of the total.
pub fn poisson_pmf(mean: f64) -> Vec<f64> {
    if mean == 0.0 {
        return vec![1.0];
    }
    let lm = mean.ln();
    let mut out = Vec::new();
    let mut ln_fact = 0.0;
    for k in 0u64.. {
        if k > 0 {
            ln_fact += (k as f64).ln();
        }
        let p = (-mean + k as f64 * lm - ln_fact).exp();
        out.push(p);
        // past the mode the tail after k is at most p (k+1)/(k+1-mean)
        let kf = k as f64 + 1.0;
        if kf > mean + 1.0 && p * kf / (kf - mean) < 1e-12 {
            break;
        }
    }
    out
}

/// Chernoff bound on the mass of bin `j`.
pub fn chernoff_bin_bound(j: u32, delta: f64) -> f64 {
    (-(j as f64) * delta).exp()
}

/// Bin of photon number `k`: `floor(|k - mean| / delta)`.
pub fn bin_index(k: u64, mean: f64, delta: f64) -> u32 {
    ((k as f64 - mean).abs() / delta).floor() as u32
}

/// `log2 dim` of the span of Fock states in bin `j` over `n` modes.
pub fn bin_dimlog(j: u32, mean: f64, delta: f64, n: f64) -> f64 {
    let top = mean + (j as f64 + 1.0) * delta;
    let width = if j == 0 { 2.0 * delta - 1.0 } else { 2.0 * delta };
    (top - 1.0) * (top + n - 2.0).log2() + width.log2()
}

/// Exact binned photon-number distribution, bins `0..=j_max`.
pub fn binned_masses(alpha: f64, bp: &BinningParams) -> Vec<f64> {
    let mean = alpha * alpha;
    let mut bins = vec![0.0; bp.j_max as usize + 1];
    for (k, p) in poisson_pmf(mean).into_iter().enumerate() {
        let j = bin_index(k as u64, mean, bp.delta);
        if let Some(slot) = bins.get_mut(j as usize) {
            *slot += p;
        }
    }
    bins
}

fn entropy_bits(ps: &[f64]) -> f64 {
    ps.iter().filter(|&&p| p > 0.0).map(|&p| -p * p.ln()).sum::<f64>() / LN_2
}

/// Leakage bound for `hops` one-way transmissions of `n`-mode coherent
/// states with total mean photon number `alpha^2`, plus `reps` rounds of
/// classical verification.
pub fn grover_leakage_bound(n: usize, alpha: f64, hops: u64, bp: &BinningParams, reps: u32) -> Result<LeakageBound> {
    if n == 0 {
        return Err(Error::param("n", "at least one mode is required"));
    }
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::param("alpha", format!("{alpha} is not a positive amplitude")));
    }
    bp.validate(alpha)?;
    let mean = alpha * alpha;
    let masses = binned_masses(alpha, bp);
    let h_bins = entropy_bits(&masses);
    let dim_term: f64 = masses
        .iter()
        .enumerate()
        .map(|(j, &p)| p * bin_dimlog(j as u32, mean, bp.delta, n as f64))
        .sum();
    let nf = n as f64;
    let terms = BoundTerms {
        classical_bits: reps as f64 * (nf.log2().ceil() + 3.0),
        darkcount_term: 0.0,
        prefactor: 2.0 * hops as f64,
        branch_a: 0.0,
        branch_b: 2.0 * h_bins + dim_term,
        entropy_term: 2.0 * h_bins,
        continuity_term: dim_term,
        messages: hops,
    };
    Ok(LeakageBound::assemble(
        terms,
        BoundParams {
            variant: BoundVariant::Grover,
            n: nf,
            s: 0.0,
            r: u32::try_from(hops).unwrap_or(u32::MAX),
            alpha,
            eta: 1.0,
            eta_det: 1.0,
            p_dark: 0.0,
            reps: Some(reps),
        },
    ))
}

/// Leakage of the full search: `2 r K` hops with `r` and `K` from the parameters.
pub fn grover_protocol_bound(gp: &GroverParams, bp: &BinningParams) -> Result<LeakageBound> {
    gp.validate()?;
    grover_leakage_bound(gp.n, gp.alpha, gp.total_hops()?, bp, gp.repetitions()?)
}

/// Blocked search bound: `ceil(n / block_scale^2)` copies of the bound for
/// one block.
pub fn grover_blocked_bound(n: usize, block_scale: usize, gp: &GroverParams, bp: &BinningParams) -> Result<LeakageBound> {
    let size = block_scale * block_scale;
    if block_scale == 0 || size > n {
        return Err(Error::param("block_scale", format!("block size {size} must lie in [1, n = {n}]")));
    }
    let blocks = n.div_ceil(size) as f64;
    let block = grover_protocol_bound(&GroverParams { n: size, ..*gp }, bp)?;
    let mut terms = block.terms;
    terms.classical_bits *= blocks;
    terms.prefactor *= blocks;
    let mut params = block.params;
    params.variant = BoundVariant::GroverBlocked;
    params.n = n as f64;
    Ok(LeakageBound::assemble(terms, params))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cal(s: &str) -> Calendar {
        s.parse().unwrap()
    }

    /// Calendars intersecting exactly at `dates`.
    fn promise(n: usize, dates: &[usize]) -> (Calendar, Calendar) {
        let x = Calendar::new((0..n).map(|i| dates.contains(&i) || i % 3 == 0).collect()).unwrap();
        let y = Calendar::new((0..n).map(|i| dates.contains(&i) || i % 3 == 1).collect()).unwrap();
        (x, y)
    }

    #[test]
    fn iteration_and_repetition_counts() {
        assert_eq!(grover_iterations(4, 1), 1);
        assert_eq!(grover_iterations(16, 1), 3);
        assert_eq!(grover_iterations(10_000, 1), 78);
        let q: f64 = 1.0 - (-4.0f64 / 64.0).exp() + (-4.0f64).exp();
        let want = ((10.0f64).ln() / (1.0 / q).ln()).ceil() as u32;
        assert_eq!(grover_repetitions(64, 1, 2.0, 0.1).unwrap(), want);
        assert!(grover_repetitions(64, 64, 1.0, 0.1).is_err());
        assert!(grover_repetitions(64, 1, 1e-6, 0.1).is_err());
    }

    #[test]
    fn oracle_cases() {
        let a = ModeAmplitudes::from_real(&[0.1, -0.2, 0.3, 0.4]).unwrap();
        let none = oracle_sign_flip(&a, &cal("1100"), &cal("0011")).unwrap();
        assert_eq!(none, a);
        let all = grover_oracle(&a, &cal("1111"), &cal("1111")).unwrap();
        assert_eq!(all, ModeAmplitudes::from_real(&[-0.1, 0.2, -0.3, -0.4]).unwrap());
        assert!(grover_oracle(&a, &cal("111"), &cal("111")).is_err());
    }

    #[test]
    fn two_hop_oracle_equals_sign_flip_exhaustively() {
        let a = ModeAmplitudes::new(vec![
            Complex64::new(0.3, 0.1),
            Complex64::new(-0.7, 0.2),
            Complex64::new(1.1, -0.4),
            Complex64::new(0.05, 0.9),
        ])
        .unwrap();
        for xm in 0..16 {
            for ym in 0..16 {
                let x = Calendar::from_mask(xm, 4).unwrap();
                let y = Calendar::from_mask(ym, 4).unwrap();
                assert_eq!(grover_oracle(&a, &x, &y).unwrap(), oracle_sign_flip(&a, &x, &y).unwrap());
            }
        }
    }

    #[test]
    fn lossy_oracle_scales_by_eta() {
        let a = ModeAmplitudes::from_real(&[0.3, 0.5]).unwrap();
        let out = oracle_two_hop(&a, &cal("11"), &cal("10"), 0.81).unwrap();
        assert!((out[0].re + 0.3 * 0.81).abs() < 1e-15);
        assert!((out[1].re - 0.5 * 0.81).abs() < 1e-15);
    }

    #[test]
    fn diffusion_cases() {
        let u = uniform_state(5, 1.3).unwrap();
        assert!(grover_diffusion(&u).max_abs_diff(&u) < 1e-15);
        let d = grover_diffusion(&ModeAmplitudes::from_real(&[0.8, 0.0]).unwrap());
        assert!(d.max_abs_diff(&ModeAmplitudes::from_real(&[0.0, 0.8]).unwrap()) < 1e-15);
    }

    #[test]
    fn trace_matches_closed_form() {
        for (n, dates) in [(16usize, vec![5usize]), (16, vec![2, 9]), (64, vec![1, 30, 63])] {
            let (x, y) = promise(n, &dates);
            let k = dates.len();
            let theta = (k as f64 / n as f64).sqrt().asin();
            let r = grover_iterations(n, k);
            let alpha = 1.7;
            for (l, s) in grover_trace(&x, &y, alpha, r).unwrap().iter().enumerate() {
                let phase = (2 * l + 1) as f64 * theta;
                for i in 0..n {
                    let want = if dates.contains(&i) {
                        phase.sin() * alpha / (k as f64).sqrt()
                    } else {
                        phase.cos() * alpha / ((n - k) as f64).sqrt()
                    };
                    assert!((s[i] - Complex64::new(want, 0.0)).norm() < 1e-10, "n={n} l={l} i={i}");
                }
            }
        }
    }

    #[test]
    fn exact_case_lands_on_target() {
        let (x, y) = promise(4, &[2]);
        let s = grover_trace(&x, &y, 1.0, 1).unwrap();
        let last = &s[1];
        assert!((last[2].re - 1.0).abs() < 1e-12);
        for i in [0, 1, 3] {
            assert!(last[i].norm() < 1e-12);
        }
    }

    #[test]
    fn empty_intersection_gives_empty() {
        let x = cal("1010101010101010");
        let y = cal("0101010101010101");
        let gp = GroverParams::new(16, 1, 2.0, 0.1);
        let noisy = ChannelModel::new(0.9, 0.8, 0.05).unwrap();
        for seed in 0..100 {
            let out = run_grover(&x, &y, &gp, &noisy, &mut StreamKey::new(seed).rng()).unwrap();
            assert_eq!(out.result, ScheduleResult::Empty);
        }
    }

    #[test]
    fn promise_check() {
        let (x, y) = promise(16, &[1, 2]);
        let mut gp = GroverParams::new(16, 1, 2.0, 0.1);
        gp.verify_promise = true;
        assert!(matches!(
            run_grover(&x, &y, &gp, &ChannelModel::ideal(), &mut StreamKey::new(1).rng()),
            Err(Error::PromiseViolation { promised: 1, actual: 2 })
        ));
        assert!(GroverParams::new(16, 0, 2.0, 0.1).validate().is_err());
    }

    #[test]
    fn failure_rate_within_epsilon() {
        let (x, y) = promise(64, &[17]);
        let gp = GroverParams::new(64, 1, 2.0, 0.1);
        let trials = 10_000u32;
        let fails = (0..trials)
            .filter(|&t| {
                run_grover(&x, &y, &gp, &ChannelModel::ideal(), &mut StreamKey::new(t as u64).rng())
                    .unwrap()
                    .result
                    == ScheduleResult::Empty
            })
            .count() as f64;
        let eps = 0.1;
        let sd = (eps * (1.0 - eps) / trials as f64).sqrt();
        assert!(fails / (trials as f64) <= eps + 3.0 * sd);
    }

    #[test]
    fn blocked_finds_unique_intersection() {
        let (x, y) = promise(16, &[10]);
        let gp = GroverParams::new(16, 1, 3.0, 1e-6);
        let out = run_grover_blocked(&x, &y, 2, &gp, &ChannelModel::ideal(), StreamKey::new(3)).unwrap();
        assert_eq!(out.result, ScheduleResult::Date(10));
        let none = run_grover_blocked(&cal("1000100010001000"), &cal("0100010001000100"), 2, &gp, &ChannelModel::ideal(), StreamKey::new(3)).unwrap();
        assert_eq!(none.result, ScheduleResult::Empty);
    }

    #[test]
    fn poisson_and_binning() {
        let pmf = poisson_pmf(2.5);
        assert!((pmf.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!((pmf[3] - (-2.5f64).exp() * 2.5f64.powi(3) / 6.0).abs() < 1e-15);
        assert!((poisson_pmf(400.0).iter().sum::<f64>() - 1.0).abs() < 1e-11);
        let alpha = 1.0;
        let bp = BinningParams::for_alpha(alpha);
        let masses = binned_masses(alpha, &bp);
        assert!((masses.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        // coarse-graining cannot raise entropy
        assert!(entropy_bits(&masses) <= entropy_bits(&poisson_pmf(alpha * alpha)) + 1e-12);
        for (j, &m) in masses.iter().enumerate() {
            assert!(m <= chernoff_bin_bound(j as u32, bp.delta) + 1e-15);
        }
        assert!(BinningParams::with_delta(1.0).validate(1.0).is_err());
    }

    #[test]
    fn bound_positive_and_blocked_monotone() {
        let bp = BinningParams::for_alpha(1.0);
        let b = grover_leakage_bound(1_000_000, 1.0, 2000, &bp, 10).unwrap();
        assert!(b.total_bits.is_finite() && b.total_bits > 0.0);
        let gp = GroverParams::new(1 << 12, 1, 1.0, 0.01);
        let vals: Vec<f64> = [2usize, 4, 8]
            .iter()
            .map(|&r| grover_blocked_bound(1 << 12, r, &gp, &bp).unwrap().total_bits)
            .collect();
        assert!(vals.windows(2).all(|w| w[1] < w[0]), "{vals:?}");
        let one = grover_protocol_bound(&GroverParams { n: 16, ..gp }, &bp).unwrap().total_bits;
        let blocked = grover_blocked_bound(1 << 12, 4, &gp, &bp).unwrap().total_bits;
        assert!((blocked - 256.0 * one).abs() < 1e-9 * blocked);
    }

    proptest! {
        #[test]
        fn steps_conserve_photon_number(re in proptest::collection::vec(-2.0f64..2.0, 8), im in proptest::collection::vec(-2.0f64..2.0, 8), xm in 0u64..256, ym in 0u64..256) {
            let a = ModeAmplitudes::new(re.iter().zip(&im).map(|(&r, &i)| Complex64::new(r, i)).collect()).unwrap();
            let x = Calendar::from_mask(xm, 8).unwrap();
            let y = Calendar::from_mask(ym, 8).unwrap();
            let n0 = a.mean_photon_number();
            let n1 = grover_oracle(&a, &x, &y).unwrap().mean_photon_number();
            let n2 = grover_diffusion(&a).mean_photon_number();
            prop_assert!((n0 - n1).abs() <= 1e-12 * n0.max(1e-300));
            prop_assert!((n0 - n2).abs() <= 1e-12 * n0.max(1e-300));
        }
    }
}
