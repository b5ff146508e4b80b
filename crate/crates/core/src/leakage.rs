//! Closed-form information-leakage bounds.
//!
//! All logarithms are base 2 except where a natural log is written out
//! (`2 ln n / s`). Bounds come back as a [`LeakageBound`] whose breakdown
//! always satisfies
//! `total = classical_bits + darkcount_term + prefactor * max(branch_a, branch_b)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optics::{check_transmissivity, ChannelModel};

const ROUNDOFF: f64 = 1e-12;

/// Binary entropy in bits. Arguments within `1e-12` outside `[0, 1]` are
/// treated as round-off and clamped.
pub fn binary_entropy(x: f64) -> Result<f64> {
    if !(-ROUNDOFF..=1.0 + ROUNDOFF).contains(&x) {
        return Err(Error::Domain {
            function: "binary_entropy",
            value: x,
        });
    }
    let x = x.clamp(0.0, 1.0);
    if x == 0.0 || x == 1.0 {
        return Ok(0.0);
    }
    Ok(-x * x.log2() - (1.0 - x) * (-x).ln_1p() / std::f64::consts::LN_2)
}

/// Von Neumann entropy of `p |psi><psi| + (1-p) |phi><phi|` with `|<psi|phi>| = fidelity`.
pub fn rank_two_entropy(p: f64, fidelity: f64) -> Result<f64> {
    for (v, name) in [(p, "rank_two_entropy(p)"), (fidelity, "rank_two_entropy(F)")] {
        if !(-ROUNDOFF..=1.0 + ROUNDOFF).contains(&v) {
            return Err(Error::Domain { function: name, value: v });
        }
    }
    let (p, f) = (p.clamp(0.0, 1.0), fidelity.clamp(0.0, 1.0));
    let z = 4.0 * p * (1.0 - p) * (1.0 - f * f);
    // 1/2 - sqrt(1 - z)/2 without cancellation
    binary_entropy(z / (2.0 * (1.0 + (1.0 - z).max(0.0).sqrt())))
}

/// `1 - cos(pi / 2r)`, accurate for large r.
fn angle_defect(r: u32) -> f64 {
    let s = (std::f64::consts::PI / (4.0 * r as f64)).sin();
    2.0 * s * s
}

/// `(eta^-2r - 1) / (1 - eta^2)`, the summed squared schedule amplitudes in
/// units of `alpha_out^2`. Tends to `r` as `eta -> 1`.
pub fn geometric_weight(r: u32, eta: f64) -> Result<f64> {
    check_transmissivity("eta", eta)?;
    if (1.0 - eta).abs() < 1e-8 {
        return Ok(r as f64);
    }
    let l = eta.ln();
    Ok((-2.0 * r as f64 * l).exp_m1() / -(2.0 * l).exp_m1())
}

fn check_rounds(r: u32) -> Result<()> {
    if r == 0 {
        return Err(Error::param("r", "at least one round is required"));
    }
    Ok(())
}

/// Overlap exponent in `F = exp(-exponent)`; kept separate so that `1 - F`
/// can be formed with `expm1`.
fn ideal_exponent(r: u32, alpha: f64) -> f64 {
    r as f64 * alpha * alpha * angle_defect(r)
}

fn lossy_exponent(r: u32, alpha_out: f64, eta: f64) -> Result<f64> {
    Ok(geometric_weight(r, eta)? * alpha_out * alpha_out * angle_defect(r))
}

fn jrs_exponent(r: u32, alpha: f64) -> f64 {
    alpha * alpha * angle_defect(r)
}

/// `h((1 - exp(-exponent)) / 2)`.
fn half_infidelity_entropy(exponent: f64) -> Result<f64> {
    binary_entropy(-0.5 * (-exponent).exp_m1())
}

/// `F(r, alpha) = exp(-r alpha^2 (1 - cos(pi/2r)))`.
pub fn fidelity_ideal(r: u32, alpha: f64) -> Result<f64> {
    check_rounds(r)?;
    Ok((-ideal_exponent(r, alpha)).exp())
}

/// Lossy-channel analogue of [`fidelity_ideal`] for the compensating schedule.
pub fn fidelity_lossy(r: u32, alpha_out: f64, eta: f64) -> Result<f64> {
    check_rounds(r)?;
    if !(eta > 0.0) {
        return Err(Error::Domain {
            function: "fidelity_lossy",
            value: eta,
        });
    }
    Ok((-lossy_exponent(r, alpha_out, eta)?).exp())
}

/// Per-message overlap of the reflection variant, `exp(-alpha^2 (1 - cos(pi/2r)))`.
pub fn fidelity_jrs(r: u32, alpha: f64) -> Result<f64> {
    check_rounds(r)?;
    Ok((-jrs_exponent(r, alpha)).exp())
}

/// Probability that neither or both detectors click when `alpha_out` lands
/// in one mode and the other mode is empty.
pub fn inconclusive_probability(alpha_out: f64, ch: &ChannelModel) -> f64 {
    let e = (-ch.eta_det * alpha_out * alpha_out).exp();
    let pd = ch.p_dark;
    e * (1.0 - pd) * (1.0 - pd) + (1.0 - e + e * pd) * pd
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundVariant {
    Ideal,
    Experimental,
    Jrs,
    JrsExperimental,
    NOverR,
    Grover,
    GroverBlocked,
}

/// Whether the proven validity range `n >= 4, 8 ln n <= s <= n` is enforced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RangeCheck {
    #[default]
    Enforce,
    /// Evaluate the formula outside the range it is proven for.
    Expert,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundTerms {
    /// Bits outside the bracket: `s + log s + 1` for the subsampling
    /// protocols, answer or verification bits elsewhere.
    pub classical_bits: f64,
    pub darkcount_term: f64,
    pub prefactor: f64,
    /// Left side of the max.
    pub branch_a: f64,
    /// Right side of the max, `entropy_term + continuity_term`.
    pub branch_b: f64,
    pub entropy_term: f64,
    pub continuity_term: f64,
    /// Messages per AND attempt entering the continuity term.
    pub messages: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundParams {
    pub variant: BoundVariant,
    pub n: f64,
    pub s: f64,
    pub r: u32,
    pub alpha: f64,
    pub eta: f64,
    pub eta_det: f64,
    pub p_dark: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reps: Option<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LeakageBound {
    pub total_bits: f64,
    pub terms: BoundTerms,
    pub params: BoundParams,
}

impl LeakageBound {
    pub(crate) fn assemble(terms: BoundTerms, params: BoundParams) -> Self {
        let total_bits = terms.classical_bits + terms.darkcount_term + terms.prefactor * terms.branch_a.max(terms.branch_b);
        LeakageBound {
            total_bits,
            terms,
            params,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassicalBound {
    pub epsilon: f64,
    pub n: f64,
    pub bits: f64,
}

fn check_range(n: f64, s: f64, check: RangeCheck) -> Result<()> {
    if !(n.is_finite() && s.is_finite()) {
        return Err(Error::param("n", "n and s must be finite"));
    }
    match check {
        RangeCheck::Enforce => {
            if n < 4.0 {
                return Err(Error::Precondition {
                    constraint: format!("n >= 4 (n = {n})"),
                });
            }
            if s < 8.0 * n.ln() {
                return Err(Error::Precondition {
                    constraint: format!("8 ln n <= s (8 ln n = {:.6}, s = {s})", 8.0 * n.ln()),
                });
            }
            if s > n {
                return Err(Error::Precondition {
                    constraint: format!("s <= n (s = {s}, n = {n})"),
                });
            }
        }
        RangeCheck::Expert => {
            if !(n > 1.0 && s >= 1.0) {
                return Err(Error::Precondition {
                    constraint: format!("n > 1 and s >= 1 even in expert mode (n = {n}, s = {s})"),
                });
            }
        }
    }
    Ok(())
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::param("alpha", format!("{alpha} is not a positive amplitude")));
    }
    Ok(())
}

/// Shared shape of all subsampling bounds.
#[allow(clippy::too_many_arguments)]
fn subsampling_bound(
    variant: BoundVariant,
    n: f64,
    s: f64,
    r: u32,
    alpha: f64,
    ch: &ChannelModel,
    messages: u64,
    p_inconclusive: f64,
    darkcount_term: f64,
    entropy_term: f64,
) -> Result<LeakageBound> {
    let m = messages as f64;
    let continuity_term = 2.0 * m * binary_entropy(2.0 * n.ln() / s + 1.0 / n)?;
    let terms = BoundTerms {
        classical_bits: s + s.log2() + 1.0,
        darkcount_term,
        prefactor: n / (1.0 - p_inconclusive),
        branch_a: 2.0 * m / n,
        branch_b: entropy_term + continuity_term,
        entropy_term,
        continuity_term,
        messages,
    };
    Ok(LeakageBound::assemble(
        terms,
        BoundParams {
            variant,
            n,
            s,
            r,
            alpha,
            eta: ch.eta,
            eta_det: ch.eta_det,
            p_dark: ch.p_dark,
            reps: None,
        },
    ))
}

/// Leakage of the subsampling protocol on a perfect set-up.
pub fn qic_bound_ideal(n: f64, s: f64, r: u32, alpha: f64, check: RangeCheck) -> Result<LeakageBound> {
    check_rounds(r)?;
    check_alpha(alpha)?;
    check_range(n, s, check)?;
    let p = (-alpha * alpha).exp();
    let entropy = half_infidelity_entropy(ideal_exponent(r, alpha))?;
    subsampling_bound(BoundVariant::Ideal, n, s, r, alpha, &ChannelModel::ideal(), 2 * r as u64 + 1, p, 0.0, entropy)
}

/// Leakage with loss, detector inefficiency and dark counts, using the
/// loss-compensating amplitude schedule.
pub fn qic_bound_experimental(n: f64, s: f64, r: u32, alpha_out: f64, ch: &ChannelModel, check: RangeCheck) -> Result<LeakageBound> {
    check_rounds(r)?;
    check_alpha(alpha_out)?;
    ch.validate()?;
    check_range(n, s, check)?;
    let p = inconclusive_probability(alpha_out, ch);
    let dark = 2.0 * n / (1.0 - p) * ch.p_dark;
    let entropy = half_infidelity_entropy(lossy_exponent(r, alpha_out, ch.eta)?)?;
    subsampling_bound(BoundVariant::Experimental, n, s, r, alpha_out, ch, 2 * r as u64 + 3, p, dark, entropy)
}

/// Leakage of the subsampling protocol built on the reflection-based AND.
pub fn qic_bound_jrs(n: f64, s: f64, r: u32, alpha: f64, check: RangeCheck) -> Result<LeakageBound> {
    check_rounds(r)?;
    check_alpha(alpha)?;
    check_range(n, s, check)?;
    let p = (-alpha * alpha).exp();
    let entropy = r as f64 * half_infidelity_entropy(jrs_exponent(r, alpha))?;
    subsampling_bound(BoundVariant::Jrs, n, s, r, alpha, &ChannelModel::ideal(), 2 * r as u64 + 1, p, 0.0, entropy)
}

/// Lossy extension of [`qic_bound_jrs`].
///
/// Alice starts at `alpha_out / eta^r` so that `alpha_out` reaches her
/// detectors. Each of the `r` informative messages (both hops of every odd
/// round) contributes `h((1 - F_m)/2)` with `F_m` the overlap at the amplitude
/// actually sent in that hop. Dark counts, the inconclusive probability and
/// the message count are handled as in [`qic_bound_experimental`].
pub fn qic_bound_jrs_experimental(n: f64, s: f64, r: u32, alpha_out: f64, ch: &ChannelModel, check: RangeCheck) -> Result<LeakageBound> {
    check_rounds(r)?;
    if r % 2 == 1 {
        return Err(Error::param("r", format!("the reflection variant needs an even round count, got {r}")));
    }
    check_alpha(alpha_out)?;
    ch.validate()?;
    check_range(n, s, check)?;
    let defect = angle_defect(r);
    let mut entropy = 0.0;
    for round in (1..=r).step_by(2) {
        for hop in [2 * round - 1, 2 * round] {
            let sent = alpha_out * ch.eta.powf(-(r as f64) + (hop as f64 - 1.0) / 2.0);
            entropy += half_infidelity_entropy(sent * sent * defect)?;
        }
    }
    let p = inconclusive_probability(alpha_out, ch);
    let dark = 2.0 * n / (1.0 - p) * ch.p_dark;
    let mut b = subsampling_bound(BoundVariant::JrsExperimental, n, s, r, alpha_out, ch, 2 * r as u64 + 3, p, dark, entropy)?;
    b.params.variant = BoundVariant::JrsExperimental;
    Ok(b)
}

/// Leakage of the majority-vote scheduler without subsampling, meant for
/// `eta` around `1 - 1/r`. Each date runs `reps` attempts; the per-date cost
/// is `reps` times the rank-two entropy of one attempt plus `2/n^2` for the
/// verification, and announcing the answer costs `ceil(log n) + 1` bits.
pub fn qic_bound_n_over_r(n: f64, r: u32, alpha_out: f64, ch: &ChannelModel, reps: u32) -> Result<LeakageBound> {
    check_rounds(r)?;
    check_alpha(alpha_out)?;
    ch.validate()?;
    if !(n >= 2.0 && n.is_finite()) {
        return Err(Error::param("n", format!("{n} is below 2")));
    }
    if reps == 0 {
        return Err(Error::param("reps", "must be at least 1"));
    }
    let fid = fidelity_lossy(r, alpha_out, ch.eta)?;
    let per_attempt = if fid < 1.0 - 1e-3 {
        rank_two_entropy(0.5, fid)?
    } else {
        // same value, formed without cancellation
        half_infidelity_entropy(lossy_exponent(r, alpha_out, ch.eta)?)?
    };
    let entropy_term = reps as f64 * per_attempt;
    let continuity_term = 2.0 / (n * n);
    let terms = BoundTerms {
        classical_bits: n.log2().ceil() + 1.0,
        darkcount_term: 0.0,
        prefactor: n,
        branch_a: 0.0,
        branch_b: entropy_term + continuity_term,
        entropy_term,
        continuity_term,
        messages: 2 * r as u64 + 3,
    };
    Ok(LeakageBound::assemble(
        terms,
        BoundParams {
            variant: BoundVariant::NOverR,
            n,
            s: 0.0,
            r,
            alpha: alpha_out,
            eta: ch.eta,
            eta_det: ch.eta_det,
            p_dark: ch.p_dark,
            reps: Some(reps),
        },
    ))
}

/// Information lower bound for any classical disjointness protocol with
/// error at most `epsilon`.
pub fn classical_lower_bound(n: f64, epsilon: f64) -> Result<ClassicalBound> {
    if !(0.0..1.0).contains(&epsilon) {
        return Err(Error::param("epsilon", format!("{epsilon} is outside [0, 1)")));
    }
    if !(n >= 1.0 && n.is_finite()) {
        return Err(Error::param("n", format!("{n} is not a calendar size")));
    }
    let bits = if epsilon == 0.0 {
        0.48 * n
    } else {
        (0.48 - 16.0 * binary_entropy(epsilon.sqrt())?).max(0.0) * n
    };
    Ok(ClassicalBound { epsilon, n, bits })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Entropy of `p |psi><psi| + (1-p) |phi><phi|` from a Jacobi rotation of
    /// the explicit 2x2 density matrix.
    pub(crate) fn gram_entropy(p: f64, f: f64) -> f64 {
        let (c, s) = (f, (1.0 - f * f).max(0.0).sqrt());
        // psi = (1, 0), phi = (c, s)
        let a = p + (1.0 - p) * c * c;
        let b = (1.0 - p) * c * s;
        let d = (1.0 - p) * s * s;
        let t = 0.5 * (2.0 * b).atan2(a - d);
        let (st, ct) = t.sin_cos();
        let l1 = a * ct * ct + 2.0 * b * st * ct + d * st * st;
        let l2 = a * st * st - 2.0 * b * st * ct + d * ct * ct;
        [l1, l2]
            .iter()
            .filter(|&&l| l > 0.0)
            .map(|&l| -l * l.log2())
            .sum()
    }

    #[test]
    fn entropy_values() {
        assert_eq!(binary_entropy(0.5).unwrap(), 1.0);
        assert_eq!(binary_entropy(0.0).unwrap(), 0.0);
        assert_eq!(binary_entropy(1.0).unwrap(), 0.0);
        // mpmath, 30 digits
        assert!((binary_entropy(0.11).unwrap() - 0.499_915_958_164_528).abs() < 1e-15);
        assert!(binary_entropy(1.0 + 1e-13).is_ok());
        assert!(binary_entropy(1.0 + 1e-9).is_err());
        assert!(binary_entropy(-0.1).is_err());
        assert!(binary_entropy(f64::NAN).is_err());
    }

    #[test]
    fn rank_two_values() {
        assert_eq!(rank_two_entropy(0.3, 1.0).unwrap(), 0.0);
        assert!((rank_two_entropy(0.5, 0.0).unwrap() - 1.0).abs() < 1e-15);
        let h02 = binary_entropy(0.2).unwrap();
        assert!((rank_two_entropy(0.5, 0.6).unwrap() - h02).abs() < 1e-14);
        assert!((h02 - 0.721_928_094_887_362_3).abs() < 1e-15);
        assert!((gram_entropy(0.5, 0.6) - h02).abs() < 1e-12);
    }

    #[test]
    fn rank_two_matches_gram_on_grid() {
        let mut worst = 0.0f64;
        for i in 0..200 {
            for j in 0..200 {
                let (p, f) = (i as f64 / 199.0, j as f64 / 199.0);
                let d = (rank_two_entropy(p, f).unwrap() - gram_entropy(p, f)).abs();
                worst = worst.max(d);
                assert!(rank_two_entropy(p, f).unwrap() <= binary_entropy(0.5 * (1.0 - f)).unwrap() + 1e-12);
            }
        }
        assert!(worst < 1e-10, "{worst}");
    }

    #[test]
    fn fidelities() {
        assert!((fidelity_ideal(1, 1.0).unwrap() - (-1.0f64).exp()).abs() < 1e-15);
        let want = (-2.0 * (1.0 - (std::f64::consts::PI / 4.0).cos())).exp();
        assert!((fidelity_ideal(2, 1.0).unwrap() - want).abs() < 1e-15);
        assert!((want - 0.556_667_905_035_692).abs() < 1e-12);
        assert!(fidelity_ideal(1_000_000, 1.0).unwrap() > 0.999_998);
        assert_eq!(fidelity_lossy(12, 1.3, 1.0).unwrap(), fidelity_ideal(12, 1.3).unwrap());
        let near = fidelity_lossy(12, 1.3, 1.0 - 1e-9).unwrap();
        assert!((near - fidelity_ideal(12, 1.3).unwrap()).abs() < 1e-6);
        assert!(fidelity_lossy(3, 1.0, 0.0).is_err());
        assert_eq!(fidelity_jrs(1, 0.7).unwrap(), fidelity_ideal(1, 0.7).unwrap());
    }

    #[test]
    fn lossy_exponent_is_schedule_sum() {
        let (r, alpha, eta) = (10u32, 1.0, 0.99);
        let sched = crate::and_protocols::amplitude_schedule(alpha, eta, r).unwrap();
        let defect = 1.0 - (std::f64::consts::PI / 20.0).cos();
        let sum: f64 = sched[1..].iter().map(|a| a * a / eta * defect).sum();
        let f = fidelity_lossy(r, alpha, eta).unwrap();
        assert!((f - (-sum).exp()).abs() < 1e-12);
    }

    #[test]
    fn inconclusive_cases() {
        let ideal = ChannelModel::ideal();
        assert!((inconclusive_probability(1.2, &ideal) - (-1.44f64).exp()).abs() < 1e-16);
        assert_eq!(inconclusive_probability(0.0, &ideal), 1.0);
        let ch = ChannelModel::new(1.0, 0.9, 4e-8).unwrap();
        let q1 = 1.0 - (1.0 - 4e-8) * (-0.9f64).exp();
        let q2 = 4e-8;
        let want = (1.0 - q1) * (1.0 - q2) + q1 * q2;
        assert!((inconclusive_probability(1.0, &ch) - want).abs() < 1e-15);
    }

    #[test]
    fn preconditions() {
        assert!(matches!(qic_bound_ideal(3.0, 3.0, 2, 1.0, RangeCheck::Enforce), Err(Error::Precondition { .. })));
        assert!(matches!(qic_bound_ideal(1e6, 10.0, 2, 1.0, RangeCheck::Enforce), Err(Error::Precondition { .. })));
        assert!(matches!(qic_bound_ideal(1e6, 2e6, 2, 1.0, RangeCheck::Enforce), Err(Error::Precondition { .. })));
        assert!(qic_bound_ideal(1e6, 50.0, 2, 1.0, RangeCheck::Expert).is_ok());
        assert!(qic_bound_ideal(1e6, 1e4, 0, 1.0, RangeCheck::Enforce).is_err());
    }

    #[test]
    fn ideal_reference_value() {
        // mpmath, 40 digits
        let b = qic_bound_ideal(1e6, 1e4, 100, 1.0, RangeCheck::Enforce).unwrap();
        assert!((b.total_bits / 17_567_632.805_702_79 - 1.0).abs() < 1e-9, "{}", b.total_bits);
    }

    #[test]
    fn jrs_reference_value() {
        // mpmath, 40 digits
        let b = qic_bound_jrs(1e4, 400.0, 10, 1.0, RangeCheck::Enforce).unwrap();
        assert!((b.total_bits / 188_194.093_858_107_45 - 1.0).abs() < 1e-9, "{}", b.total_bits);
    }

    #[test]
    fn experimental_degenerates_to_ideal_shape() {
        let e = qic_bound_experimental(1e8, 1e5, 40, 1.1, &ChannelModel::ideal(), RangeCheck::Enforce).unwrap();
        let i = qic_bound_ideal(1e8, 1e5, 40, 1.1, RangeCheck::Enforce).unwrap();
        assert_eq!(e.terms.entropy_term, i.terms.entropy_term);
        assert_eq!(e.terms.prefactor, i.terms.prefactor);
        assert_eq!(e.terms.darkcount_term, 0.0);
        assert_eq!(e.terms.messages, 83);
        let cont = 2.0 * 83.0 * binary_entropy(2.0 * 1e8f64.ln() / 1e5 + 1e-8).unwrap();
        assert!((e.terms.continuity_term - cont).abs() < 1e-12 * cont);
    }

    #[test]
    fn experimental_monotone_in_pdark() {
        let mut last = 0.0;
        for i in 0..100 {
            let pd = i as f64 * 1e-4;
            let ch = ChannelModel::new(0.99, 0.9, pd).unwrap();
            let b = qic_bound_experimental(1e9, 1e6, 50, 1.0, &ch, RangeCheck::Enforce).unwrap();
            assert!(b.total_bits >= last);
            last = b.total_bits;
        }
    }

    #[test]
    fn n_over_r_degenerations() {
        let ch = ChannelModel::new(1.0 - 1.0 / 50.0, 0.9, 4e-8).unwrap();
        let b = qic_bound_n_over_r(1e9, 50, 1.0, &ch, 1).unwrap();
        let ent = binary_entropy(0.5 * (1.0 - fidelity_lossy(50, 1.0, ch.eta).unwrap())).unwrap();
        assert!((b.terms.branch_b - (ent + 2e-18)).abs() < 1e-12);
        // bounded per-date entropy along eta = 1 - 1/r
        let per_date: Vec<f64> = [10u32, 100, 1000, 10000]
            .iter()
            .map(|&r| {
                let ch = ChannelModel::new(1.0 - 1.0 / r as f64, 0.9, 4e-8).unwrap();
                qic_bound_n_over_r(1e12, r, 1.0, &ch, 1).unwrap().terms.entropy_term
            })
            .collect();
        assert!(per_date.iter().all(|&x| x < 1.0));
        assert!(per_date.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn classical_values() {
        assert_eq!(classical_lower_bound(100.0, 0.0).unwrap().bits, 48.0);
        let c = classical_lower_bound(1.0, 4e-8).unwrap().bits;
        let h = binary_entropy(2e-4).unwrap();
        assert!((c - (0.48 - 16.0 * h)).abs() < 1e-15);
        assert!((c - 0.436_063_157_947_790_7).abs() < 1e-12);
        assert_eq!(classical_lower_bound(1e6, 0.01).unwrap().bits, 0.0);
        assert!(classical_lower_bound(1e6, 1.0).is_err());
    }

    proptest! {
        #[test]
        fn breakdown_sums(n in 1e4f64..1e14, frac in 0.0f64..1.0, r in 1u32..3000, alpha in 0.05f64..5.0,
                          eta in 0.9f64..=1.0, p_dark in 0.0f64..1e-3) {
            let s = 8.0 * n.ln() + frac * (n - 8.0 * n.ln());
            let ch = ChannelModel::new(eta, 0.9, p_dark).unwrap();
            for b in [
                qic_bound_ideal(n, s, r, alpha, RangeCheck::Enforce).unwrap(),
                qic_bound_experimental(n, s, r, alpha, &ch, RangeCheck::Enforce).unwrap(),
                qic_bound_jrs(n, s, r, alpha, RangeCheck::Enforce).unwrap(),
            ] {
                let t = b.terms;
                let sum = t.classical_bits + t.darkcount_term + t.prefactor * t.branch_a.max(t.branch_b);
                prop_assert!((sum - b.total_bits).abs() <= 1e-12 * b.total_bits);
                prop_assert!(t.classical_bits >= 0.0 && t.darkcount_term >= 0.0 && t.entropy_term >= 0.0);
                prop_assert!(b.total_bits >= s);
            }
        }

        #[test]
        fn experimental_dominates_ideal_shape(n in 1e4f64..1e14, frac in 0.0f64..1.0, r in 1u32..3000,
                                              alpha in 0.05f64..5.0, eta in 0.9f64..=1.0, p_dark in 0.0f64..1e-3) {
            let s = 8.0 * n.ln() + frac * (n - 8.0 * n.ln());
            let ch = ChannelModel::new(eta, 1.0, p_dark).unwrap();
            let e = qic_bound_experimental(n, s, r, alpha, &ch, RangeCheck::Enforce).unwrap();
            let base = qic_bound_experimental(n, s, r, alpha, &ChannelModel::ideal(), RangeCheck::Enforce).unwrap();
            prop_assert!(e.total_bits >= base.total_bits * (1.0 - 1e-12));
        }

        #[test]
        fn jrs_entropy_dominates(r in 1u32..100, alpha in 0.1f64..3.0) {
            let jrs = r as f64 * binary_entropy(0.5 * (1.0 - fidelity_jrs(r, alpha).unwrap())).unwrap();
            let main = binary_entropy(0.5 * (1.0 - fidelity_ideal(r, alpha).unwrap())).unwrap();
            prop_assert!(jrs >= main - 1e-15);
        }
    }
}
