//! Multimode coherent states and the linear-optics operations that act on them.
//!
//! A product of coherent states `|a_1> ⊗ ... ⊗ |a_n>` is stored as its amplitude
//! vector. Beamsplitters, phase shifters and pure loss all map coherent states
//! to coherent states, so no Fock-space truncation is ever needed.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Amplitudes of a multimode coherent state, one per optical mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Complex64>", into = "Vec<Complex64>")]
pub struct ModeAmplitudes(Vec<Complex64>);

impl ModeAmplitudes {
    pub fn new(amps: Vec<Complex64>) -> Result<Self> {
        if amps.is_empty() {
            return Err(Error::Dimension {
                expected: 1,
                got: 0,
            });
        }
        if let Some(bad) = amps.iter().find(|a| !a.re.is_finite() || !a.im.is_finite()) {
            return Err(Error::param(
                "amps",
                format!("non-finite amplitude {bad}"),
            ));
        }
        Ok(ModeAmplitudes(amps))
    }

    pub fn from_real(amps: &[f64]) -> Result<Self> {
        Self::new(amps.iter().map(|&a| Complex64::new(a, 0.0)).collect())
    }

    pub fn vacuum(modes: usize) -> Result<Self> {
        Self::new(vec![Complex64::new(0.0, 0.0); modes])
    }

    /// Two-mode state `|alpha, 0>`.
    pub fn single(alpha: f64) -> Self {
        ModeAmplitudes(vec![Complex64::new(alpha, 0.0), Complex64::new(0.0, 0.0)])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.0
    }

    pub(crate) fn as_mut_slice(&mut self) -> &mut [Complex64] {
        &mut self.0
    }

    pub fn into_vec(self) -> Vec<Complex64> {
        self.0
    }

    /// Total mean photon number, `sum |a_i|^2`.
    pub fn mean_photon_number(&self) -> f64 {
        self.0.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn max_abs_diff(&self, other: &ModeAmplitudes) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    fn expect_len(&self, modes: usize) -> Result<()> {
        if self.len() != modes {
            return Err(Error::Dimension {
                expected: modes,
                got: self.len(),
            });
        }
        Ok(())
    }
}

impl TryFrom<Vec<Complex64>> for ModeAmplitudes {
    type Error = Error;

    fn try_from(v: Vec<Complex64>) -> Result<Self> {
        ModeAmplitudes::new(v)
    }
}

impl From<ModeAmplitudes> for Vec<Complex64> {
    fn from(m: ModeAmplitudes) -> Self {
        m.0
    }
}

impl std::ops::Index<usize> for ModeAmplitudes {
    type Output = Complex64;

    fn index(&self, i: usize) -> &Complex64 {
        &self.0[i]
    }
}

/// One-hop channel and detector imperfections.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelModel {
    /// One-way transmissivity, coupling included.
    pub eta: f64,
    /// Detector efficiency.
    pub eta_det: f64,
    /// Per-detector, per-measurement dark count probability.
    pub p_dark: f64,
}

impl ChannelModel {
    pub fn new(eta: f64, eta_det: f64, p_dark: f64) -> Result<Self> {
        let ch = ChannelModel { eta, eta_det, p_dark };
        ch.validate()?;
        Ok(ch)
    }

    pub fn ideal() -> Self {
        ChannelModel {
            eta: 1.0,
            eta_det: 1.0,
            p_dark: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_transmissivity("eta", self.eta)?;
        check_transmissivity("eta_det", self.eta_det)?;
        if !(0.0..1.0).contains(&self.p_dark) {
            return Err(Error::param(
                "p_dark",
                format!("{} is outside [0, 1)", self.p_dark),
            ));
        }
        Ok(())
    }

    pub fn is_lossless(&self) -> bool {
        self.eta == 1.0
    }
}

pub(crate) fn check_transmissivity(name: &'static str, eta: f64) -> Result<()> {
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::param(name, format!("{eta} is outside (0, 1]")));
    }
    Ok(())
}

/// Threshold-detector outcomes, one per measured mode.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ClickPattern(pub Vec<bool>);

impl ClickPattern {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn clicks(&self) -> usize {
        self.0.iter().filter(|&&c| c).count()
    }

    pub fn clicked_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().enumerate().filter(|(_, &c)| c).map(|(i, _)| i)
    }
}

/// Two-mode rotation `R_theta`.
#[inline]
pub(crate) fn rotate_pair(a: Complex64, b: Complex64, theta: f64) -> (Complex64, Complex64) {
    let (s, c) = theta.sin_cos();
    (a * c - b * s, a * s + b * c)
}

pub fn apply_beamsplitter(state: &ModeAmplitudes, theta: f64) -> Result<ModeAmplitudes> {
    state.expect_len(2)?;
    if !theta.is_finite() {
        return Err(Error::param("theta", "angle must be finite"));
    }
    let (a, b) = rotate_pair(state[0], state[1], theta);
    Ok(ModeAmplitudes(vec![a, b]))
}

/// One lossy hop: every amplitude scales by `sqrt(eta)`.
pub fn apply_loss(state: &ModeAmplitudes, eta: f64) -> Result<ModeAmplitudes> {
    check_transmissivity("eta", eta)?;
    let mut out = state.clone();
    scale_in_place(out.as_mut_slice(), eta);
    Ok(out)
}

#[inline]
pub(crate) fn scale_in_place(amps: &mut [Complex64], eta: f64) {
    if eta != 1.0 {
        let t = eta.sqrt();
        for a in amps {
            *a *= t;
        }
    }
}

/// Probability that a threshold detector fires on a coherent state of the given
/// amplitude: `1 - (1 - p_dark) exp(-eta_det |a|^2)`.
pub fn click_probability(amplitude: Complex64, ch: &ChannelModel) -> f64 {
    let mu = ch.eta_det * amplitude.norm_sqr();
    // -expm1 keeps precision for tiny mean photon numbers
    let p = -(-mu).exp_m1() + ch.p_dark * (-mu).exp();
    p.clamp(0.0, 1.0)
}

/// Measure every mode with a threshold detector. Draws exactly one uniform
/// variate per mode, in mode order.
pub fn detect<R: Rng + ?Sized>(state: &ModeAmplitudes, ch: &ChannelModel, rng: &mut R) -> ClickPattern {
    ClickPattern(
        state
            .as_slice()
            .iter()
            .map(|&a| {
                let u: f64 = rng.random();
                u < click_probability(a, ch)
            })
            .collect(),
    )
}

/// `|<a|b>| = exp(-1/2 sum |a_i - b_i|^2)` for product coherent states.
pub fn coherent_overlap(a: &ModeAmplitudes, b: &ModeAmplitudes) -> Result<f64> {
    b.expect_len(a.len())?;
    let dist: f64 = a
        .as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(x, y)| (x - y).norm_sqr())
        .sum();
    Ok((-0.5 * dist).exp())
}
