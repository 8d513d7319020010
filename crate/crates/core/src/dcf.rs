//! Saturated 802.11 DCF contention model seen from the LWA base station.
//!
//! The base station is the tagged node; it competes with `contenders` other
//! saturated WiFi nodes. The module provides the per-slot transmit/collision
//! fixed point, the PMF of a generic slot duration, the retransmission-count
//! PMF, the generating functions of the slot and off-time durations, and the
//! log-MGF transform `F(x) = ln t_off(e^x) + x t_s` together with its inverse.
//!
//! All generating functions take their argument in the log domain (`x = ln z`)
//! and durations are measured in ticks of [`DcfParams::tick`] seconds, so
//! `z^d` is evaluated as `exp(d x)` for arbitrary real `d`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const FIXED_POINT_TOL: f64 = 1e-13;
const FIXED_POINT_MAX_ITERS: usize = 10_000;

/// Contention and timing parameters of the unlicensed MAC.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DcfParams {
    /// Initial contention window `W_0` in slots.
    pub w0: u32,
    /// Maximum number of transmission attempts per packet `K`.
    pub max_attempts: u32,
    /// Idle minislot duration (s).
    pub sigma: f64,
    /// Duration of a successful transmission slot (s).
    pub t_s: f64,
    /// Duration of a collided transmission slot (s).
    pub t_c: f64,
    /// Number of WiFi nodes contending with the base station (`L`).
    pub contenders: u32,
    /// Time unit used for generating-function exponents (s). Defaults to `sigma`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tick: Option<f64>,
}

impl Default for DcfParams {
    fn default() -> Self {
        Self::from_payload(1500, 12.0e6, 4)
    }
}

impl DcfParams {
    /// 802.11a-style timings for a basic-access exchange carrying `payload_bytes`
    /// at `phy_rate` bit/s: 9 us slots, 20 us PLCP header, SIFS 16 us, DIFS 34 us
    /// and a 14-byte ACK sent at the same rate.
    pub fn from_payload(payload_bytes: u32, phy_rate: f64, contenders: u32) -> Self {
        let sigma = 9e-6;
        let header = 20e-6;
        let sifs = 16e-6;
        let difs = 34e-6;
        let data = header + f64::from(payload_bytes) * 8.0 / phy_rate;
        let ack = header + 14.0 * 8.0 / phy_rate;
        Self {
            w0: 16,
            max_attempts: 7,
            sigma,
            t_s: data + sifs + ack + difs,
            t_c: data + difs,
            contenders,
            tick: None,
        }
    }

    pub fn with_contenders(mut self, contenders: u32) -> Self {
        self.contenders = contenders;
        self
    }

    pub fn tick(&self) -> f64 {
        self.tick.unwrap_or(self.sigma)
    }

    /// Contention window of attempt `i` (zero based): `2^i W_0`.
    pub fn window(&self, attempt: u32) -> f64 {
        f64::from(self.w0) * 2f64.powi(attempt as i32)
    }

    pub fn validate(&self) -> Result<()> {
        if self.w0 < 1 {
            return Err(Error::invalid("w0", "initial contention window must be >= 1"));
        }
        if self.max_attempts < 1 {
            return Err(Error::invalid("max_attempts", "must be >= 1"));
        }
        if self.max_attempts > 30 {
            return Err(Error::invalid("max_attempts", "windows beyond 2^30 W0 are not supported"));
        }
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return Err(Error::invalid("sigma", "must be positive"));
        }
        if !(self.t_s.is_finite() && self.t_s >= self.sigma) {
            return Err(Error::invalid("t_s", "must be at least one minislot"));
        }
        if !(self.t_c.is_finite() && self.t_c >= self.sigma) {
            return Err(Error::invalid("t_c", "must be at least one minislot"));
        }
        if let Some(tick) = self.tick {
            if !(tick.is_finite() && tick > 0.0) {
                return Err(Error::invalid("tick", "must be positive"));
            }
        }
        Ok(())
    }
}

/// Per-slot transmission probability `tau` and conditional collision probability `p_c`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContentionPoint {
    pub tau: f64,
    pub p_c: f64,
}

/// Distribution of a generic slot seen by the tagged node while it backs off.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlotPmf {
    pub p_idle: f64,
    pub p_succ: f64,
    pub p_coll: f64,
}

/// Attempt rate of a saturated node whose attempts collide with probability `p`.
///
/// Renewal argument over one packet: stage `i` is reached with probability `p^i`
/// and occupies `(W_i + 1) / 2` slots on average (uniform counter in `[0, W_i)`
/// plus the transmission slot).
pub fn attempt_probability(p: f64, params: &DcfParams) -> f64 {
    let mut attempts = 0.0;
    let mut slots = 0.0;
    let mut reach = 1.0;
    for i in 0..params.max_attempts {
        attempts += reach;
        slots += reach * (params.window(i) + 1.0) / 2.0;
        reach *= p;
    }
    attempts / slots
}

fn collision_given_tau(tau: f64, contenders: u32) -> f64 {
    1.0 - (1.0 - tau).powi(contenders as i32)
}

/// Solves the coupled attempt/collision equations of the saturated DCF.
///
/// Damped fixed-point iteration on `p_c` (damping 0.5) with a bisection fallback
/// on `tau`; the map `tau -> tau - attempt_probability(p_c(tau))` is increasing so
/// the root is unique.
pub fn bianchi_fixed_point(params: &DcfParams) -> Result<ContentionPoint> {
    params.validate()?;
    let l = params.contenders;
    if l == 0 {
        return Ok(ContentionPoint {
            tau: attempt_probability(0.0, params),
            p_c: 0.0,
        });
    }

    let residual = |p: f64| collision_given_tau(attempt_probability(p, params), l) - p;

    let mut p = 0.0;
    for _ in 0..FIXED_POINT_MAX_ITERS {
        let next = collision_given_tau(attempt_probability(p, params), l);
        if (next - p).abs() < FIXED_POINT_TOL {
            p = next;
            break;
        }
        p = 0.5 * p + 0.5 * next;
    }
    if residual(p).abs() < FIXED_POINT_TOL {
        return Ok(ContentionPoint {
            tau: attempt_probability(p, params),
            p_c: p,
        });
    }

    // g(tau) = tau - attempt_probability(p_c(tau)) is increasing on [0, 1].
    let g = |tau: f64| tau - attempt_probability(collision_given_tau(tau, l), params);
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let tau = 0.5 * (lo + hi);
    let p_c = collision_given_tau(tau, l);
    let res = (attempt_probability(p_c, params) - tau).abs();
    if res > 1e-10 {
        return Err(Error::FixedPointNonConvergence {
            iterations: FIXED_POINT_MAX_ITERS + 200,
            residual: res,
        });
    }
    Ok(ContentionPoint { tau, p_c })
}

pub fn slot_pmf(point: &ContentionPoint, params: &DcfParams) -> Result<SlotPmf> {
    let tau = point.tau;
    if !(0.0..=1.0).contains(&tau) {
        return Err(Error::invalid("tau", "must lie in [0, 1]"));
    }
    let l = params.contenders as i32;
    let p_idle = (1.0 - tau).powi(l);
    let p_succ = if l == 0 {
        0.0
    } else {
        f64::from(l) * tau * (1.0 - tau).powi(l - 1)
    };
    let p_coll = (1.0 - p_idle - p_succ).max(0.0);
    Ok(SlotPmf {
        p_idle,
        p_succ,
        p_coll,
    })
}

/// Probability that a packet reaches exactly attempt `k` (zero based); the last
/// entry collects every packet reaching the final attempt.
pub fn retrans_count_pmf(point: &ContentionPoint, params: &DcfParams) -> Vec<f64> {
    let k = params.max_attempts as usize;
    let p = point.p_c;
    (0..k)
        .map(|i| {
            if i + 1 < k {
                (1.0 - p) * p.powi(i as i32)
            } else {
                p.powi(i as i32)
            }
        })
        .collect()
}

/// `ln sum_i exp(a_i)`, ignoring `-inf` entries.
pub(crate) fn log_sum_exp(terms: &[f64]) -> f64 {
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln()
}

/// `ln( (1/W) sum_{j<W} e^{j s} )`, the log-PGF of a uniform backoff counter
/// evaluated at `e^s`. The removable singularity at `s = 0` is handled by the
/// cumulant series.
pub(crate) fn ln_uniform_counter_mgf(s: f64, window: f64) -> f64 {
    if window <= 1.0 {
        return 0.0;
    }
    if (s * window).abs() < 1e-3 {
        let w2 = window * window;
        let k1 = (window - 1.0) / 2.0;
        let k2 = (w2 - 1.0) / 12.0;
        let k4 = -(w2 - 1.0) * (w2 + 1.0) / 120.0;
        return k1 * s + k2 * s * s / 2.0 + k4 * s.powi(4) / 24.0;
    }
    if s > 0.0 {
        let num = window * s + (-(-window * s).exp_m1()).ln();
        let den = s + (-(-s).exp_m1()).ln();
        num - den - window.ln()
    } else {
        (-(window * s).exp_m1()).ln() - (-s.exp_m1()).ln() - window.ln()
    }
}

/// First and second derivative in `s` of [`ln_uniform_counter_mgf`], i.e. the
/// mean and variance of the exponentially tilted counter.
fn uniform_counter_tilt(s: f64, window: f64) -> (f64, f64) {
    if window <= 1.0 {
        return (0.0, 0.0);
    }
    let w = window;
    if (s * w).abs() < 0.1 {
        // Cumulants of the discrete uniform on {0..W-1}: B_n (W^n - 1) / n.
        let w2 = w * w;
        let k2 = (w2 - 1.0) / 12.0;
        let k4 = -(w2 * w2 - 1.0) / 120.0;
        let k6 = (w2 * w2 * w2 - 1.0) / 252.0;
        let k8 = -(w2 * w2 * w2 * w2 - 1.0) / 240.0;
        let s2 = s * s;
        let mean = (w - 1.0) / 2.0 + s * (k2 + s2 * (k4 / 6.0 + s2 * (k6 / 120.0 + s2 * k8 / 5040.0)));
        let var = k2 + s2 * (k4 / 2.0 + s2 * (k6 / 24.0 + s2 * k8 / 720.0));
        return (mean, var);
    }
    // Reflection J -> W-1-J maps s to -s; evaluate on the decaying side.
    // Written in the decaying exponentials e^t, e^{tW} so nothing overflows.
    let t = -s.abs();
    let (a, b) = (t.exp(), (t * w).exp());
    let (d1, dw) = (t.exp_m1(), (t * w).exp_m1());
    let mean = -a / d1 + w * b / dw;
    let var = a / (d1 * d1) - w * w * b / (dw * dw);
    let mean = if s > 0.0 { w - 1.0 - mean } else { mean };
    (mean, var)
}

/// Log-partition, mean and variance of `value` under weights `exp(log_weight)`.
fn tilted_moments(terms: &[(f64, f64)]) -> (f64, f64, f64) {
    let max = terms.iter().map(|t| t.0).fold(f64::NEG_INFINITY, f64::max);
    let (mut z, mut m1, mut m2) = (0.0, 0.0, 0.0);
    for &(l, v) in terms {
        let w = (l - max).exp();
        z += w;
        m1 += w * v;
        m2 += w * v * v;
    }
    let mean = m1 / z;
    (max + z.ln(), mean, (m2 / z - mean * mean).max(0.0))
}

/// Durations of the three slot kinds in ticks.
#[derive(Debug, Clone, Copy)]
struct TickDurations {
    sigma: f64,
    t_s: f64,
    t_c: f64,
}

impl TickDurations {
    fn new(params: &DcfParams) -> Self {
        let tick = params.tick();
        Self {
            sigma: params.sigma / tick,
            t_s: params.t_s / tick,
            t_c: params.t_c / tick,
        }
    }
}

fn ln_slot_mgf_raw(x: f64, pmf: &SlotPmf, d: &TickDurations) -> f64 {
    log_sum_exp(&[
        pmf.p_idle.ln() + d.sigma * x,
        pmf.p_succ.ln() + d.t_s * x,
        pmf.p_coll.ln() + d.t_c * x,
    ])
}

/// Slot-duration PGF `p_idle z^sigma + p_succ z^t_s + p_coll z^t_c`, with
/// durations in ticks. Evaluated in the log domain; overflows to `+inf` only when
/// the true value is not representable.
pub fn slot_pgf_eval(z: f64, pmf: &SlotPmf, params: &DcfParams) -> Result<f64> {
    if !(z.is_finite() && z > 0.0) {
        return Err(Error::invalid("z", "PGF argument must be positive"));
    }
    let d = TickDurations::new(params);
    Ok(ln_slot_mgf_raw(z.ln(), pmf, &d).exp())
}

/// Off-time PGF `sum_k P_k z^{k t_c} prod_{i<=k} eta_i(X(z))`.
pub fn toff_pgf_eval(z: f64, params: &DcfParams, point: &ContentionPoint) -> Result<f64> {
    if !(z.is_finite() && z > 0.0) {
        return Err(Error::invalid("z", "PGF argument must be positive"));
    }
    let model = DcfModel::with_point(*params, *point)?;
    Ok(model.ln_toff_mgf(z.ln()).exp())
}

/// Precomputed contention model: fixed point, slot PMF, retransmission PMF and
/// the transforms derived from them.
#[derive(Debug, Clone)]
pub struct DcfModel {
    params: DcfParams,
    point: ContentionPoint,
    pmf: SlotPmf,
    ln_retrans: Vec<f64>,
    windows: Vec<f64>,
    durations: TickDurations,
    /// F'(0) in ticks; sets the natural x scale for finite differences.
    mean_cycle_ticks: f64,
}

impl DcfModel {
    pub fn new(params: DcfParams) -> Result<Self> {
        let point = bianchi_fixed_point(&params)?;
        Self::with_point(params, point)
    }

    pub fn with_point(params: DcfParams, point: ContentionPoint) -> Result<Self> {
        params.validate()?;
        if !(0.0..=1.0).contains(&point.p_c) {
            return Err(Error::invalid("p_c", "must lie in [0, 1]"));
        }
        let pmf = slot_pmf(&point, &params)?;
        let ln_retrans = retrans_count_pmf(&point, &params)
            .into_iter()
            .map(f64::ln)
            .collect();
        let windows = (0..params.max_attempts).map(|i| params.window(i)).collect();
        let durations = TickDurations::new(&params);
        let mut model = Self {
            params,
            point,
            pmf,
            ln_retrans,
            windows,
            durations,
            mean_cycle_ticks: 0.0,
        };
        model.mean_cycle_ticks = (model.mean_off_time() + params.t_s) / params.tick();
        Ok(model)
    }

    pub fn params(&self) -> &DcfParams {
        &self.params
    }

    pub fn point(&self) -> &ContentionPoint {
        &self.point
    }

    pub fn slot_pmf(&self) -> &SlotPmf {
        &self.pmf
    }

    pub fn retrans_pmf(&self) -> Vec<f64> {
        self.ln_retrans.iter().map(|l| l.exp()).collect()
    }

    pub fn tick(&self) -> f64 {
        self.params.tick()
    }

    /// `t_s` expressed in ticks.
    pub fn t_s_ticks(&self) -> f64 {
        self.durations.t_s
    }

    /// `ln X(e^x)` with `x` per tick.
    pub fn ln_slot_mgf(&self, x: f64) -> f64 {
        ln_slot_mgf_raw(x, &self.pmf, &self.durations)
    }

    /// `ln t_off(e^x)` with `x` per tick.
    pub fn ln_toff_mgf(&self, x: f64) -> f64 {
        let s = self.ln_slot_mgf(x);
        let mut backoff = 0.0;
        let mut terms = Vec::with_capacity(self.windows.len());
        for (k, (&ln_pk, &w)) in self.ln_retrans.iter().zip(&self.windows).enumerate() {
            backoff += ln_uniform_counter_mgf(s, w);
            terms.push(ln_pk + k as f64 * self.durations.t_c * x + backoff);
        }
        log_sum_exp(&terms)
    }

    /// Mean slot duration (s).
    pub fn mean_slot(&self) -> f64 {
        let p = &self.pmf;
        p.p_idle * self.params.sigma + p.p_succ * self.params.t_s + p.p_coll * self.params.t_c
    }

    /// Mean off time (s): `sum_k P_k (k t_c + E[X] sum_{i<=k} (W_i - 1)/2)`.
    pub fn mean_off_time(&self) -> f64 {
        let slot = self.mean_slot();
        let mut backoff_slots = 0.0;
        let mut mean = 0.0;
        for (k, (&ln_pk, &w)) in self.ln_retrans.iter().zip(&self.windows).enumerate() {
            backoff_slots += (w - 1.0) / 2.0;
            mean += ln_pk.exp() * (k as f64 * self.params.t_c + backoff_slots * slot);
        }
        mean
    }

    /// `F(x) = ln t_off(e^x) + x t_s`, `x` per tick.
    pub fn f(&self, x: f64) -> f64 {
        self.ln_toff_mgf(x) + x * self.durations.t_s
    }

    /// `F(x)`, `F'(x)` and `F''(x)`.
    ///
    /// Every factor of the off-time transform is a log-MGF, so its derivatives
    /// are means and variances under the exponentially tilted law.
    pub fn f_derivatives(&self, x: f64) -> (f64, f64, f64) {
        let d = &self.durations;
        let p = &self.pmf;
        let slot_terms = [
            (p.p_idle.ln() + d.sigma * x, d.sigma),
            (p.p_succ.ln() + d.t_s * x, d.t_s),
            (p.p_coll.ln() + d.t_c * x, d.t_c),
        ];
        let (s, s1, s2) = tilted_moments(&slot_terms);

        let mut terms = Vec::with_capacity(self.windows.len());
        let (mut g, mut g1, mut g2) = (0.0, 0.0, 0.0);
        for (k, (&ln_pk, &w)) in self.ln_retrans.iter().zip(&self.windows).enumerate() {
            g += ln_uniform_counter_mgf(s, w);
            let (m, v) = uniform_counter_tilt(s, w);
            g1 += m;
            g2 += v;
            let kt = k as f64 * d.t_c;
            let slope = kt + s1 * g1;
            let curv = s2 * g1 + s1 * s1 * g2;
            terms.push((ln_pk + kt * x + g, slope, curv));
        }
        let max = terms.iter().map(|t| t.0).fold(f64::NEG_INFINITY, f64::max);
        let (mut z, mut m1, mut m2, mut c) = (0.0, 0.0, 0.0, 0.0);
        for &(l, slope, curv) in &terms {
            let w = (l - max).exp();
            z += w;
            m1 += w * slope;
            m2 += w * slope * slope;
            c += w * curv;
        }
        let (m1, m2, c) = (m1 / z, m2 / z, c / z);
        let ln_toff = max + z.ln();
        (ln_toff + x * d.t_s, m1 + d.t_s, c + m2 - m1 * m1)
    }

    /// Inverse of the strictly increasing map `F`.
    ///
    /// The bracket is grown geometrically from `[0, 1]` (or `[-1, 0]`) and then
    /// bisected until it cannot shrink further in double precision.
    pub fn f_inverse(&self, y: f64) -> Result<f64> {
        if !y.is_finite() {
            return Err(Error::OutOfRange {
                value: y,
                reason: "F inverse needs a finite argument",
            });
        }
        if y == 0.0 {
            return Ok(0.0);
        }
        let (mut lo, mut hi) = if y > 0.0 { (0.0, 1.0) } else { (-1.0, 0.0) };
        let mut grown = 0;
        loop {
            if y > 0.0 && self.f(hi) < y {
                lo = hi;
                hi *= 2.0;
            } else if y < 0.0 && self.f(lo) > y {
                hi = lo;
                lo *= 2.0;
            } else {
                break;
            }
            grown += 1;
            if grown > 1000 || !hi.is_finite() || !lo.is_finite() {
                return Err(Error::OutOfRange {
                    value: y,
                    reason: "F does not reach the requested value",
                });
            }
        }
        for _ in 0..2000 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.f(mid) < y {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }
}
