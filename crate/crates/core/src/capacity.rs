//! Effective capacity of the two air interfaces and the statistical QoS tests
//! built on it.
//!
//! Both links are handled through their *decay-rate map* `delta -> theta C`,
//! where `delta = beta theta`. The effective capacity at `(beta, theta)` is
//! `decay(beta theta) / theta`, and the delay-bound violation estimate is
//! `exp(-decay D)`. For the unlicensed link `decay(delta) = F^{-1}(delta
//! log2(1+snr) t_s) / tick`; for the licensed Rayleigh link
//! `decay(delta) = -ln E[(1+gamma)^{-delta T / ln 2}] / T`.

use std::f64::consts::LN_2;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::dcf::DcfModel;
use crate::error::{Error, Result};
use crate::quadrature;

/// Tail cut-off (in units of the mean SNR) for the exponential fading density.
const SNR_TAIL: f64 = 40.0;
const QUAD_REL_TOL: f64 = 1e-9;

/// Per-user rate and delay requirements.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UserQos {
    /// Minimum data rate `R_n` (bit/s).
    pub rate: f64,
    /// Delay bound `D_th` (s).
    pub delay_bound: f64,
    /// Maximum delay-bound violation probability `P_th`.
    pub violation_prob: f64,
}

impl UserQos {
    pub fn validate(&self) -> Result<()> {
        if !(self.rate.is_finite() && self.rate > 0.0) {
            return Err(Error::invalid("rate", "minimum rate must be positive"));
        }
        if !(self.delay_bound.is_finite() && self.delay_bound > 0.0) {
            return Err(Error::invalid("delay_bound", "must be positive"));
        }
        if !(self.violation_prob > 0.0 && self.violation_prob < 1.0) {
            return Err(Error::invalid("violation_prob", "must lie in (0, 1)"));
        }
        Ok(())
    }

    /// Decay rate `theta C` at which a single band meets the violation target
    /// with equality: `-ln(P_th) / D_th`.
    pub fn target_decay(&self) -> f64 {
        -self.violation_prob.ln() / self.delay_bound
    }
}

/// Air interface index: 1 = unlicensed WiFi, 2 = licensed LTE.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Band {
    Unlicensed,
    Licensed,
}

impl Band {
    pub const ALL: [Band; 2] = [Band::Unlicensed, Band::Licensed];

    pub fn index(self) -> usize {
        match self {
            Band::Unlicensed => 0,
            Band::Licensed => 1,
        }
    }
}

impl From<Band> for u8 {
    fn from(b: Band) -> u8 {
        b.index() as u8 + 1
    }
}

impl TryFrom<u8> for Band {
    type Error = String;
    fn try_from(v: u8) -> std::result::Result<Self, String> {
        match v {
            1 => Ok(Band::Unlicensed),
            2 => Ok(Band::Licensed),
            other => Err(format!("band id must be 1 or 2, got {other}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandChannel {
    pub band_id: Band,
    /// Average SNR, linear scale.
    pub gamma_bar: f64,
}

/// One operating point of a band: bandwidth, QoS exponent and the capacity they give.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EcPoint {
    /// Bandwidth (Hz).
    pub beta: f64,
    /// QoS exponent (1/bit); infinite when `a = 0`.
    #[serde(with = "crate::serde_util::extended_f64")]
    pub theta: f64,
    /// `beta theta`.
    pub delta: f64,
    /// `1 / theta` (bit).
    pub a: f64,
    /// Effective capacity (bit/s).
    pub ec: f64,
    /// `theta ec` (1/s), finite even when `theta` is not.
    pub decay: f64,
}

impl EcPoint {
    /// Builds the point from the `(delta, a)` parameterisation.
    pub fn from_delta_a(link: &BandLink, delta: f64, a: f64) -> Result<Self> {
        let decay = link.decay(delta)?;
        Ok(Self {
            beta: delta * a,
            theta: if a > 0.0 { 1.0 / a } else { f64::INFINITY },
            delta,
            a,
            ec: a * decay,
            decay,
        })
    }

    /// `exp(-theta C D)`.
    pub fn violation(&self, delay_bound: f64) -> f64 {
        violation_from_decay(self.decay, delay_bound)
    }
}

/// Unlicensed link of one user: shared contention model plus the user's SNR.
#[derive(Debug, Clone)]
pub struct UnlicensedLink {
    model: Arc<DcfModel>,
    spectral: f64,
}

impl UnlicensedLink {
    pub fn new(model: Arc<DcfModel>, gamma_bar: f64) -> Result<Self> {
        check_snr(gamma_bar)?;
        Ok(Self {
            model,
            spectral: (1.0 + gamma_bar).log2(),
        })
    }

    fn slope(&self) -> f64 {
        self.spectral * self.model.params().t_s
    }

    pub fn decay(&self, delta: f64) -> Result<f64> {
        let x = self
            .model
            .f_inverse(delta * self.slope())
            .map_err(|e| e.context("unlicensed effective capacity"))?;
        Ok(x / self.model.tick())
    }

    pub fn decay_derivatives(&self, delta: f64) -> Result<(f64, f64, f64)> {
        let s = self.slope();
        let tick = self.model.tick();
        let x = self.model.f_inverse(delta * s)?;
        let (_, f1, f2) = self.model.f_derivatives(x);
        Ok((x / tick, s / (f1 * tick), -s * s * f2 / (f1.powi(3) * tick)))
    }

    pub fn delta_for_decay(&self, decay: f64) -> Result<f64> {
        Ok(self.model.f(decay * self.model.tick()) / self.slope())
    }

    /// Long-run service rate per Hz: `log2(1+snr) t_s / (t_s + E[t_off])`.
    pub fn mean_rate_per_hz(&self) -> f64 {
        let t_s = self.model.params().t_s;
        self.spectral * t_s / (t_s + self.model.mean_off_time())
    }
}

/// Licensed Rayleigh block-fading link of one user.
#[derive(Debug, Clone, Copy)]
pub struct LicensedLink {
    gamma_bar: f64,
    frame: f64,
}

impl LicensedLink {
    pub fn new(gamma_bar: f64, frame: f64) -> Result<Self> {
        check_snr(gamma_bar)?;
        if !(frame.is_finite() && frame > 0.0) {
            return Err(Error::invalid("frame", "frame length must be positive"));
        }
        Ok(Self { gamma_bar, frame })
    }

    /// `[1 - M, E[L e^{-kL}], E[L^2 e^{-kL}]]` with `L = ln(1+gamma)` and
    /// `M = E[e^{-kL}]`, `k = delta T / ln 2`.
    fn moments(&self, delta: f64) -> Result<[f64; 3]> {
        let k = delta * self.frame / LN_2;
        let g = self.gamma_bar;
        quadrature::integrate(
            |u| {
                let l = (g * u).ln_1p();
                let w = (-u).exp();
                let kernel = (-k * l).exp() * w;
                [-(-k * l).exp_m1() * w, l * kernel, l * l * kernel]
            },
            &[0.0, 0.25, 1.0, 4.0, 12.0, SNR_TAIL],
            QUAD_REL_TOL,
            1e-300,
        )
        .map_err(|e| e.context("licensed effective capacity"))
    }

    pub fn decay(&self, delta: f64) -> Result<f64> {
        if delta == 0.0 {
            return Ok(0.0);
        }
        let [one_minus_m, _, _] = self.moments(delta)?;
        Ok(-(-one_minus_m).ln_1p() / self.frame)
    }

    pub fn decay_derivatives(&self, delta: f64) -> Result<(f64, f64, f64)> {
        let [one_minus_m, m1, m2] = self.moments(delta)?;
        let m = 1.0 - one_minus_m;
        let mean = m1 / m;
        let var = m2 / m - mean * mean;
        Ok((
            -(-one_minus_m).ln_1p() / self.frame,
            mean / LN_2,
            -self.frame * var / (LN_2 * LN_2),
        ))
    }

    pub fn delta_for_decay(&self, decay: f64) -> Result<f64> {
        if decay <= 0.0 {
            return Ok(0.0);
        }
        let (mut lo, mut hi) = (0.0, decay / self.mean_rate_per_hz());
        while self.decay(hi)? < decay {
            lo = hi;
            hi *= 2.0;
            if !hi.is_finite() {
                return Err(Error::OutOfRange {
                    value: decay,
                    reason: "licensed decay rate not reachable",
                });
            }
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.decay(mid)? < decay {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(hi)
    }

    /// Ergodic rate per Hz, `E[log2(1+gamma)] = e^{1/g} E1(1/g) / ln 2`.
    pub fn mean_rate_per_hz(&self) -> f64 {
        let g = self.gamma_bar;
        let [v] = quadrature::integrate(
            |u| [(g * u).ln_1p() * (-u).exp()],
            &[0.0, 0.25, 1.0, 4.0, 12.0, SNR_TAIL],
            1e-12,
            0.0,
        )
        .expect("smooth integrand");
        v / LN_2
    }
}

/// Either air interface behind a common decay-rate interface.
#[derive(Debug, Clone)]
pub enum BandLink {
    Unlicensed(UnlicensedLink),
    Licensed(LicensedLink),
}

impl BandLink {
    pub fn band(&self) -> Band {
        match self {
            BandLink::Unlicensed(_) => Band::Unlicensed,
            BandLink::Licensed(_) => Band::Licensed,
        }
    }

    /// `theta C` as a function of `delta = beta theta` (1/s).
    pub fn decay(&self, delta: f64) -> Result<f64> {
        if !(delta.is_finite() && delta >= 0.0) {
            return Err(Error::invalid("delta", "must be finite and non-negative"));
        }
        match self {
            BandLink::Unlicensed(l) => l.decay(delta),
            BandLink::Licensed(l) => l.decay(delta),
        }
    }

    /// Value, first and second derivative of [`decay`](Self::decay).
    pub fn decay_derivatives(&self, delta: f64) -> Result<(f64, f64, f64)> {
        if !(delta.is_finite() && delta >= 0.0) {
            return Err(Error::invalid("delta", "must be finite and non-negative"));
        }
        match self {
            BandLink::Unlicensed(l) => l.decay_derivatives(delta),
            BandLink::Licensed(l) => l.decay_derivatives(delta),
        }
    }

    /// Smallest `delta` whose decay rate reaches `decay`.
    pub fn delta_for_decay(&self, decay: f64) -> Result<f64> {
        match self {
            BandLink::Unlicensed(l) => l.delta_for_decay(decay),
            BandLink::Licensed(l) => l.delta_for_decay(decay),
        }
    }

    pub fn mean_rate_per_hz(&self) -> f64 {
        match self {
            BandLink::Unlicensed(l) => l.mean_rate_per_hz(),
            BandLink::Licensed(l) => l.mean_rate_per_hz(),
        }
    }

    /// Effective capacity (bit/s) at bandwidth `beta` and exponent `theta`.
    pub fn ec(&self, beta: f64, theta: f64) -> Result<f64> {
        check_beta_theta(beta, theta)?;
        if beta == 0.0 {
            return Ok(0.0);
        }
        Ok(self.decay(beta * theta)? / theta)
    }
}

fn check_snr(gamma_bar: f64) -> Result<()> {
    if !(gamma_bar.is_finite() && gamma_bar > 0.0) {
        return Err(Error::invalid("gamma_bar", "average SNR must be positive"));
    }
    Ok(())
}

fn check_beta_theta(beta: f64, theta: f64) -> Result<()> {
    if !(beta.is_finite() && beta >= 0.0) {
        return Err(Error::invalid("beta", "bandwidth must be finite and non-negative"));
    }
    if !(theta.is_finite() && theta > 0.0) {
        return Err(Error::invalid("theta", "QoS exponent must be positive"));
    }
    Ok(())
}

/// Effective capacity of the unlicensed band: `F^{-1}(beta theta log2(1+snr) t_s) / theta`.
pub fn ec_unlicensed(beta: f64, theta: f64, gamma_bar: f64, dcf: &Arc<DcfModel>) -> Result<f64> {
    BandLink::Unlicensed(UnlicensedLink::new(Arc::clone(dcf), gamma_bar)?).ec(beta, theta)
}

/// Effective capacity of the licensed band under Rayleigh block fading with frame `frame`.
pub fn ec_licensed(beta: f64, theta: f64, gamma_bar: f64, frame: f64) -> Result<f64> {
    BandLink::Licensed(LicensedLink::new(gamma_bar, frame)?).ec(beta, theta)
}

fn violation_from_decay(decay: f64, delay_bound: f64) -> f64 {
    (-decay * delay_bound).exp().clamp(0.0, 1.0)
}

/// Delay-bound violation estimate `exp(-theta ec D)`, clamped to `[0, 1]`.
pub fn delay_violation(theta: f64, ec: f64, delay_bound: f64) -> f64 {
    violation_from_decay(theta * ec, delay_bound)
}

/// One band of a user in a QoS test.
#[derive(Debug, Clone, Copy)]
pub struct SelectedBand {
    /// Selection variable `x` (binary for the exact test, relaxed in `[0, 1]` otherwise).
    pub x: f64,
    pub point: EcPoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QosCheck {
    /// Capacity-weighted violation probability of the aggregated stream.
    pub exact_lhs: f64,
    /// `sum_m (e_m - 1 + x_m)`.
    pub relaxed_lhs: f64,
    /// `P_th sum_m x_m`.
    pub relaxed_rhs: f64,
    pub exact_satisfied: bool,
    pub relaxed_satisfied: bool,
}

/// Evaluates the aggregated QoS constraint exactly and in its separable
/// (summed) relaxation.
pub fn aggregate_qos_check(bands: &[SelectedBand], qos: &UserQos, user: usize) -> Result<QosCheck> {
    if bands.iter().map(|b| b.x).sum::<f64>() < 1.0 - 1e-12 {
        return Err(Error::NoBandSelected { user });
    }
    let d = qos.delay_bound;
    let p = qos.violation_prob;
    let num: f64 = bands
        .iter()
        .map(|b| b.x * b.point.violation(d) * b.point.ec)
        .sum();
    let den: f64 = bands.iter().map(|b| b.x * b.point.ec).sum();
    let exact_lhs = if den > 0.0 {
        num / den
    } else {
        // Nothing is delivered: every selected band is judged on its own exponent.
        bands
            .iter()
            .filter(|b| b.x > 0.0)
            .map(|b| b.point.violation(d))
            .fold(0.0, f64::max)
    };
    let relaxed_lhs: f64 = bands
        .iter()
        .map(|b| b.point.violation(d) - 1.0 + b.x)
        .sum();
    let relaxed_rhs = p * bands.iter().map(|b| b.x).sum::<f64>();
    Ok(QosCheck {
        exact_lhs,
        relaxed_lhs,
        relaxed_rhs,
        exact_satisfied: exact_lhs <= p * (1.0 + 1e-9),
        relaxed_satisfied: relaxed_lhs <= relaxed_rhs + 1e-12,
    })
}
