//! Parameter search over the leakage bounds and sweep tables.
//!
//! The bounds are cheap closed forms, so the search is exhaustive over
//! integer `r` and one-dimensional in `alpha`: a coarse scan followed by
//! golden-section refinement around the best scan point.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::leakage::{
    classical_lower_bound, qic_bound_experimental, qic_bound_ideal, qic_bound_jrs, qic_bound_jrs_experimental, LeakageBound,
    RangeCheck,
};
use crate::optics::ChannelModel;

pub const CSV_HEADER: [&str; 9] = ["swept_param", "value", "r", "alpha", "s", "qic_bits", "classical_bits", "ratio", "status"];

/// How the subsample size is chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SPolicy {
    /// `s = f n`.
    FixedFraction(f64),
    /// A fixed absolute `s`.
    Absolute(f64),
    /// Every `f n` for `f` in the list.
    Grid(Vec<f64>),
    /// `s = n^(2/3)`.
    TwoThirds,
    /// 31 log-spaced fractions in `[1e-4, 1e-1]` plus `n^(2/3)`.
    Auto,
}

impl SPolicy {
    pub fn candidates(&self, n: f64) -> Vec<f64> {
        match self {
            SPolicy::FixedFraction(f) => vec![f * n],
            SPolicy::Absolute(s) => vec![*s],
            SPolicy::Grid(fs) => fs.iter().map(|f| f * n).collect(),
            SPolicy::TwoThirds => vec![n.powf(2.0 / 3.0)],
            SPolicy::Auto => {
                let mut v: Vec<f64> = (0..31).map(|i| 10f64.powf(-4.0 + 3.0 * i as f64 / 30.0) * n).collect();
                v.push(n.powf(2.0 / 3.0));
                v
            }
        }
    }
}

impl FromStr for SPolicy {
    type Err = Error;

    /// `frac:F`, `abs:S`, `grid:F1,F2,...`, `two-thirds` or `auto`.
    fn from_str(s: &str) -> Result<Self> {
        let num = |t: &str| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| Error::param("s_policy", format!("cannot parse {t:?} as a number")))
        };
        match s.split_once(':') {
            Some(("frac", f)) => Ok(SPolicy::FixedFraction(num(f)?)),
            Some(("abs", v)) => Ok(SPolicy::Absolute(num(v)?)),
            Some(("grid", list)) => Ok(SPolicy::Grid(list.split(',').map(num).collect::<Result<_>>()?)),
            None if s == "two-thirds" => Ok(SPolicy::TwoThirds),
            None if s == "auto" => Ok(SPolicy::Auto),
            _ => Err(Error::param("s_policy", format!("unknown policy {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptVariant {
    Ideal,
    #[default]
    Experimental,
    Jrs,
    JrsExperimental,
}

impl FromStr for OptVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ideal" => Ok(OptVariant::Ideal),
            "experimental" => Ok(OptVariant::Experimental),
            "jrs" => Ok(OptVariant::Jrs),
            "jrs-experimental" => Ok(OptVariant::JrsExperimental),
            _ => Err(Error::param("variant", format!("unknown variant {s:?}"))),
        }
    }
}

/// Classical bound the quantum bound is compared against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparator {
    /// `(0.48 - 16 h(sqrt eps)) n` with `eps = p_dark`.
    #[default]
    EpsilonError,
    /// `0.48 n`.
    ZeroError,
}

impl Comparator {
    pub fn bits(&self, n: f64, ch: &ChannelModel) -> Result<f64> {
        let eps = match self {
            Comparator::EpsilonError => ch.p_dark,
            Comparator::ZeroError => 0.0,
        };
        Ok(classical_lower_bound(n, eps)?.bits)
    }
}

pub fn evaluate(variant: OptVariant, n: f64, s: f64, r: u32, alpha: f64, ch: &ChannelModel, check: RangeCheck) -> Result<LeakageBound> {
    match variant {
        OptVariant::Ideal => qic_bound_ideal(n, s, r, alpha, check),
        OptVariant::Experimental => qic_bound_experimental(n, s, r, alpha, ch, check),
        OptVariant::Jrs => qic_bound_jrs(n, s, r, alpha, check),
        OptVariant::JrsExperimental => qic_bound_jrs_experimental(n, s, r, alpha, ch, check),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptConfig {
    pub r_min: u32,
    pub r_max: u32,
    pub alpha_min: f64,
    pub alpha_max: f64,
    pub s_policy: SPolicy,
    pub variant: OptVariant,
    pub comparator: Comparator,
    pub range_check: RangeCheck,
    /// Points in the coarse alpha scan.
    pub alpha_scan: usize,
}

impl Default for OptConfig {
    fn default() -> Self {
        OptConfig {
            r_min: 1,
            r_max: 5000,
            alpha_min: 0.05,
            alpha_max: 5.0,
            s_policy: SPolicy::Auto,
            variant: OptVariant::Experimental,
            comparator: Comparator::EpsilonError,
            range_check: RangeCheck::Enforce,
            alpha_scan: 100,
        }
    }
}

impl OptConfig {
    pub fn with_s_policy(mut self, p: SPolicy) -> Self {
        self.s_policy = p;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.r_min == 0 || self.r_max < self.r_min {
            return Err(Error::param("r_max", format!("r range [{}, {}] is empty", self.r_min, self.r_max)));
        }
        if !(self.alpha_min > 0.0 && self.alpha_max > self.alpha_min && self.alpha_max.is_finite()) {
            return Err(Error::param("alpha_max", format!("alpha range [{}, {}] is empty", self.alpha_min, self.alpha_max)));
        }
        if self.alpha_scan < 3 {
            return Err(Error::param("alpha_scan", "need at least 3 scan points"));
        }
        Ok(())
    }

    fn r_values(&self) -> Vec<u32> {
        let step = matches!(self.variant, OptVariant::JrsExperimental) as u32 + 1;
        (self.r_min..=self.r_max).filter(|r| r % step == 0).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptResult {
    pub best_r: u32,
    pub best_alpha: f64,
    pub best_s: f64,
    pub s_fraction: f64,
    pub bound_bits: f64,
    pub classical_bits: f64,
    pub ratio: f64,
    pub bound: LeakageBound,
}

const GOLDEN: f64 = 0.618_033_988_749_894_9;

/// Minimizes `f` on `[lo, hi]` to relative width `1e-10`.
pub fn golden_section<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64) -> (f64, f64) {
    let mut a = hi - GOLDEN * (hi - lo);
    let mut b = lo + GOLDEN * (hi - lo);
    let (mut fa, mut fb) = (f(a), f(b));
    while hi - lo > 1e-10 * (lo.abs() + hi.abs()).max(1e-300) {
        if fa <= fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - GOLDEN * (hi - lo);
            fa = f(a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + GOLDEN * (hi - lo);
            fb = f(b);
        }
    }
    if fa <= fb {
        (a, fa)
    } else {
        (b, fb)
    }
}

/// Best `alpha` for fixed `(n, s, r)`, or `None` if the point is infeasible.
fn best_alpha(cfg: &OptConfig, n: f64, s: f64, r: u32, ch: &ChannelModel) -> Option<(f64, f64)> {
    let f = |a: f64| evaluate(cfg.variant, n, s, r, a, ch, cfg.range_check).map_or(f64::INFINITY, |b| b.total_bits);
    let m = cfg.alpha_scan;
    let grid: Vec<f64> = (0..m)
        .map(|i| cfg.alpha_min + (cfg.alpha_max - cfg.alpha_min) * i as f64 / (m - 1) as f64)
        .collect();
    let (mut i_best, mut f_best) = (0, f64::INFINITY);
    for (i, &a) in grid.iter().enumerate() {
        let v = f(a);
        if v < f_best {
            i_best = i;
            f_best = v;
        }
    }
    if !f_best.is_finite() {
        return None;
    }
    let lo = grid[i_best.saturating_sub(1)];
    let hi = grid[(i_best + 1).min(m - 1)];
    let (a, v) = golden_section(f, lo, hi);
    Some(if v <= f_best { (a, v) } else { (grid[i_best], f_best) })
}

/// Minimizes the selected bound over the configured `(s, r, alpha)` grid.
pub fn optimize_params(n: f64, ch: &ChannelModel, cfg: &OptConfig) -> Result<OptResult> {
    cfg.validate()?;
    ch.validate()?;
    if !(n >= 4.0 && n.is_finite()) {
        return Err(Error::param("n", format!("{n} is below 4")));
    }
    let rs = cfg.r_values();
    let mut best: Option<(f64, f64, u32, f64)> = None;
    for s in cfg.s_policy.candidates(n) {
        let found = rs
            .par_iter()
            .filter_map(|&r| best_alpha(cfg, n, s, r, ch).map(|(a, v)| (v, r, a)))
            // ties go to the smaller r so the result does not depend on scheduling
            .reduce_with(|x, y| if y.0 < x.0 || (y.0 == x.0 && y.1 < x.1) { y } else { x });
        if let Some((v, r, a)) = found {
            if best.is_none_or(|b| v < b.0) {
                best = Some((v, s, r, a));
            }
        }
    }
    let (_, s, r, alpha) = best.ok_or_else(|| {
        Error::Infeasible(format!(
            "no subsample size from {:?} satisfies the bound's range at n = {n}",
            cfg.s_policy
        ))
    })?;
    let bound = evaluate(cfg.variant, n, s, r, alpha, ch, cfg.range_check)?;
    let classical_bits = cfg.comparator.bits(n, ch)?;
    Ok(OptResult {
        best_r: r,
        best_alpha: alpha,
        best_s: s,
        s_fraction: s / n,
        bound_bits: bound.total_bits,
        classical_bits,
        ratio: classical_bits / bound.total_bits,
        bound,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweptParam {
    N,
    Eta,
    EtaDet,
    PDark,
}

impl SweptParam {
    pub fn name(&self) -> &'static str {
        match self {
            SweptParam::N => "n",
            SweptParam::Eta => "eta",
            SweptParam::EtaDet => "eta_det",
            SweptParam::PDark => "p_dark",
        }
    }
}

impl fmt::Display for SweptParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweptParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "n" => Ok(SweptParam::N),
            "eta" => Ok(SweptParam::Eta),
            "eta-det" | "eta_det" => Ok(SweptParam::EtaDet),
            "pdark" | "p_dark" => Ok(SweptParam::PDark),
            _ => Err(Error::param("param", format!("cannot sweep {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Spacing {
    #[default]
    Linear,
    Log,
}

/// Fixed-rule evaluation without optimization: `r = round(n^r_exponent)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectRule {
    pub r_exponent: f64,
    pub alpha: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepMode {
    Optimize,
    Direct(DirectRule),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub param: SweptParam,
    pub start: f64,
    pub stop: f64,
    pub steps: usize,
    pub spacing: Spacing,
    /// Values for the parameters that are not swept.
    pub n: f64,
    pub channel: ChannelModel,
    pub config: OptConfig,
    pub mode: SweepMode,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.steps < 2 {
            return Err(Error::param("steps", "a sweep needs at least 2 points"));
        }
        if !(self.start.is_finite() && self.stop.is_finite()) || self.start == self.stop {
            return Err(Error::param("range", format!("[{}, {}] is empty", self.start, self.stop)));
        }
        if self.spacing == Spacing::Log && !(self.start > 0.0 && self.stop > 0.0) {
            return Err(Error::param("range", "log spacing needs positive endpoints"));
        }
        Ok(())
    }

    pub fn values(&self) -> Vec<f64> {
        let last = (self.steps - 1) as f64;
        (0..self.steps)
            .map(|i| {
                let t = i as f64 / last;
                match self.spacing {
                    _ if i + 1 == self.steps => self.stop,
                    Spacing::Linear => self.start + (self.stop - self.start) * t,
                    Spacing::Log => 10f64.powf(self.start.log10() + (self.stop.log10() - self.start.log10()) * t),
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub swept_param: String,
    pub value: f64,
    pub r: Option<u32>,
    pub alpha: Option<f64>,
    pub s: Option<f64>,
    pub qic_bits: Option<f64>,
    pub classical_bits: Option<f64>,
    pub ratio: Option<f64>,
    pub status: String,
}

fn sweep_point(spec: &SweepSpec, value: f64) -> Result<OptResult> {
    let mut n = spec.n;
    let mut ch = spec.channel;
    match spec.param {
        SweptParam::N => n = value,
        SweptParam::Eta => ch.eta = value,
        SweptParam::EtaDet => ch.eta_det = value,
        SweptParam::PDark => ch.p_dark = value,
    }
    ch.validate()?;
    match &spec.mode {
        SweepMode::Optimize => optimize_params(n, &ch, &spec.config),
        SweepMode::Direct(rule) => {
            let r = (n.powf(rule.r_exponent).round() as u32).max(1);
            let s = *spec
                .config
                .s_policy
                .candidates(n)
                .first()
                .ok_or_else(|| Error::param("s_policy", "direct mode needs one subsample size"))?;
            let bound = evaluate(spec.config.variant, n, s, r, rule.alpha, &ch, spec.config.range_check)?;
            let classical_bits = spec.config.comparator.bits(n, &ch)?;
            Ok(OptResult {
                best_r: r,
                best_alpha: rule.alpha,
                best_s: s,
                s_fraction: s / n,
                bound_bits: bound.total_bits,
                classical_bits,
                ratio: classical_bits / bound.total_bits,
                bound,
            })
        }
    }
}

/// One row per grid value, in grid order. Failing points are reported in
/// the `status` column instead of aborting the sweep.
pub fn sweep(spec: &SweepSpec) -> Result<Vec<SweepRow>> {
    spec.validate()?;
    let name = spec.param.name().to_string();
    Ok(spec
        .values()
        .into_par_iter()
        .map(|v| match sweep_point(spec, v) {
            Ok(o) => SweepRow {
                swept_param: name.clone(),
                value: v,
                r: Some(o.best_r),
                alpha: Some(o.best_alpha),
                s: Some(o.best_s),
                qic_bits: Some(o.bound_bits),
                classical_bits: Some(o.classical_bits),
                ratio: Some(o.ratio),
                status: "ok".into(),
            },
            Err(e) => SweepRow {
                swept_param: name.clone(),
                value: v,
                r: None,
                alpha: None,
                s: None,
                qic_bits: None,
                classical_bits: None,
                ratio: None,
                status: format!("error: {e}"),
            },
        })
        .collect())
}

pub fn write_csv<W: Write>(rows: &[SweepRow], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    let io = |e: csv::Error| Error::Encode(e.to_string());
    w.write_record(CSV_HEADER).map_err(io)?;
    for row in rows {
        w.serialize(row).map_err(io)?;
    }
    w.flush().map_err(|e| Error::Encode(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lab_channel(eta: f64) -> ChannelModel {
        ChannelModel::new(eta, 0.9, 4e-8).unwrap()
    }

    #[test]
    fn golden_section_finds_parabola_minimum() {
        let (x, v) = golden_section(|x| (x - 1.234).powi(2) + 3.0, 0.0, 5.0);
        assert!((x - 1.234).abs() < 1e-6);
        assert!((v - 3.0).abs() < 1e-12);
    }

    #[test]
    fn policy_parsing_and_candidates() {
        assert_eq!("frac:0.001".parse::<SPolicy>().unwrap(), SPolicy::FixedFraction(0.001));
        assert_eq!("grid:0.1,0.01".parse::<SPolicy>().unwrap(), SPolicy::Grid(vec![0.1, 0.01]));
        assert_eq!("auto".parse::<SPolicy>().unwrap(), SPolicy::Auto);
        assert!("bogus".parse::<SPolicy>().is_err());
        let c = SPolicy::Auto.candidates(1e9);
        assert_eq!(c.len(), 32);
        assert!((c[0] - 1e5).abs() < 1e-6 && (c[30] - 1e8).abs() < 1e-3);
        assert!((c[31] - 1e6).abs() < 1e-3);
    }

    #[test]
    fn ratio_consistency_and_local_optimality() {
        let cfg = OptConfig {
            r_max: 400,
            ..OptConfig::default().with_s_policy(SPolicy::FixedFraction(0.001))
        };
        let ch = lab_channel(0.99);
        let o = optimize_params(1e10, &ch, &cfg).unwrap();
        assert!(o.best_r < cfg.r_max);
        assert!((o.ratio * o.bound_bits - o.classical_bits).abs() <= 1e-12 * o.classical_bits);
        let f = |r: u32, a: f64| evaluate(cfg.variant, 1e10, o.best_s, r, a, &ch, cfg.range_check).unwrap().total_bits;
        for (r, a) in [
            (o.best_r - 1, o.best_alpha),
            (o.best_r + 1, o.best_alpha),
            (o.best_r, o.best_alpha * 1.02),
            (o.best_r, o.best_alpha * 0.98),
        ] {
            assert!(f(r, a) >= o.bound_bits * (1.0 - 1e-6));
        }
    }

    #[test]
    fn no_advantage_at_low_transmissivity() {
        let cfg = OptConfig::default().with_s_policy(SPolicy::FixedFraction(0.001));
        let o = optimize_params(1e15, &lab_channel(0.9), &cfg).unwrap();
        assert!(o.ratio < 1.0, "{}", o.ratio);
    }

    #[test]
    fn infeasible_policy_is_an_error() {
        let cfg = OptConfig::default().with_s_policy(SPolicy::Absolute(3.0));
        assert!(matches!(optimize_params(1e6, &lab_channel(0.99), &cfg), Err(Error::Infeasible(_))));
    }

    #[test]
    fn sweep_rows_and_csv() {
        let spec = SweepSpec {
            param: SweptParam::N,
            start: 1e6,
            stop: 1e9,
            steps: 4,
            spacing: Spacing::Log,
            n: 0.0,
            channel: ChannelModel::ideal(),
            config: OptConfig {
                variant: OptVariant::Ideal,
                ..OptConfig::default().with_s_policy(SPolicy::TwoThirds)
            },
            mode: SweepMode::Direct(DirectRule {
                r_exponent: 1.0 / 3.0,
                alpha: 1.0,
            }),
        };
        let rows = sweep(&spec).unwrap();
        assert_eq!(rows.len(), 4);
        assert_eq!(rows[1].r, Some(215));
        // bound per date falls with n
        let per_n: Vec<f64> = rows.iter().map(|r| r.qic_bits.unwrap() / r.value).collect();
        assert!(per_n.windows(2).all(|w| w[1] < w[0]));
        let mut a = Vec::new();
        let mut b = Vec::new();
        write_csv(&rows, &mut a).unwrap();
        write_csv(&sweep(&spec).unwrap(), &mut b).unwrap();
        assert_eq!(a, b);
        let text = String::from_utf8(a).unwrap();
        assert!(text.starts_with("swept_param,value,r,alpha,s,qic_bits,classical_bits,ratio,status\n"));
        let mut rdr = csv::Reader::from_reader(text.as_bytes());
        assert_eq!(rdr.records().count(), 4);
    }

    #[test]
    fn failed_points_are_marked() {
        let spec = SweepSpec {
            param: SweptParam::Eta,
            start: 0.5,
            stop: 1.5,
            steps: 3,
            spacing: Spacing::Linear,
            n: 1e8,
            channel: lab_channel(0.99),
            config: OptConfig {
                r_max: 50,
                ..OptConfig::default().with_s_policy(SPolicy::FixedFraction(0.01))
            },
            mode: SweepMode::Optimize,
        };
        let rows = sweep(&spec).unwrap();
        assert_eq!(rows[0].status, "ok");
        assert!(rows[2].status.starts_with("error"));
        assert!(rows[2].r.is_none());
    }
}
