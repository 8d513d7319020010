//! Analytic model against simulation: contention point, off-time moments and
//! retransmission histogram per contender count, plus the delay-violation
//! audit of the on-off queue.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::capacity::UnlicensedLink;
use crate::dcf::{DcfModel, DcfParams};
use crate::error::Result;
use crate::sim::{simulate_dcf, simulate_onoff_queue, QueueConfig, SimConfig};

pub const TAU_REL_TOL: f64 = 0.02;
pub const MEAN_REL_TOL: f64 = 0.03;
pub const BIN_SIGMAS: f64 = 3.0;
pub const MGF_REL_TOL: f64 = 0.05;
/// Allowed factor between simulated and predicted violation probability.
pub const QUEUE_FACTOR: f64 = 3.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ValidationOptions {
    pub dcf: DcfParams,
    pub contenders: Vec<u32>,
    pub slots: u64,
    pub seed: u64,
    /// Contenders, SNR and bandwidth of the queue audit link.
    pub queue_contenders: u32,
    pub queue_gamma_bar: f64,
    pub queue_beta: f64,
    pub queue_delay_bound: f64,
    /// `theta EC D` of the audited operating point.
    pub queue_exponent: f64,
    pub queue_cycles: u64,
}

impl Default for ValidationOptions {
    fn default() -> Self {
        Self {
            dcf: DcfParams::default(),
            contenders: vec![2, 5, 10],
            slots: 1_000_000,
            seed: 1,
            queue_contenders: 4,
            queue_gamma_bar: 10.0,
            queue_beta: 1e6,
            queue_delay_bound: 0.2,
            queue_exponent: 3.0,
            queue_cycles: 200_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Compared {
    pub model: f64,
    pub sim: f64,
    pub rel_err: f64,
}

impl Compared {
    fn new(model: f64, sim: f64) -> Self {
        Self {
            model,
            sim,
            rel_err: if model == 0.0 { sim.abs() } else { (sim - model).abs() / model.abs() },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinCheck {
    pub k: usize,
    pub expected: f64,
    pub observed: u64,
    /// `(observed - expected) / sqrt(n p (1 - p))`.
    pub z: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContentionCheck {
    pub contenders: u32,
    pub tau: Compared,
    pub p_c: Compared,
    pub mean_off_time: Compared,
    pub bins: Vec<BinCheck>,
    /// Empirical off-time MGF against the analytic transform on the grid
    /// `x / E[t_off]`.
    pub mgf: Vec<Compared>,
    pub contention_ok: bool,
    pub mean_ok: bool,
    pub histogram_ok: bool,
    pub mgf_ok: bool,
}

pub fn check_contention(dcf: DcfParams, slots: u64, seed: u64) -> Result<ContentionCheck> {
    let cfg = SimConfig {
        dcf,
        horizon_slots: slots,
        seed,
        warmup_slots: slots / 100,
    };
    let (stats, _) = simulate_dcf(&cfg)?;
    let model = DcfModel::new(dcf)?;
    let point = model.point();
    let tau = Compared::new(point.tau, stats.tau);
    let p_c = Compared::new(point.p_c, stats.p_c);
    let mean_off_time = Compared::new(model.mean_off_time(), stats.off_time.mean);

    let n = stats.off_time.packets as f64;
    let bins: Vec<BinCheck> = model
        .retrans_pmf()
        .iter()
        .zip(&stats.off_time.k_histogram)
        .enumerate()
        .map(|(k, (&p, &obs))| {
            let expected = n * p;
            let sd = (n * p * (1.0 - p)).sqrt();
            let diff = obs as f64 - expected;
            BinCheck {
                k,
                expected,
                observed: obs,
                z: if sd > 0.0 { diff / sd } else if diff == 0.0 { 0.0 } else { f64::INFINITY },
            }
        })
        .collect();

    let unit = stats.off_time.mean;
    let mgf: Vec<Compared> = stats
        .off_time
        .empirical_mgf
        .iter()
        .map(|&[x, v]| Compared::new(model.ln_toff_mgf(x / unit * model.tick()).exp(), v))
        .collect();

    Ok(ContentionCheck {
        contenders: dcf.contenders,
        contention_ok: tau.rel_err <= TAU_REL_TOL && p_c.rel_err <= TAU_REL_TOL,
        mean_ok: mean_off_time.rel_err <= MEAN_REL_TOL,
        histogram_ok: bins.iter().all(|b| b.z.abs() <= BIN_SIGMAS),
        mgf_ok: mgf.iter().all(|c| c.rel_err <= MGF_REL_TOL),
        tau,
        p_c,
        mean_off_time,
        bins,
        mgf,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueueAudit {
    pub contenders: u32,
    pub gamma_bar: f64,
    pub beta: f64,
    pub theta: f64,
    pub effective_capacity: f64,
    pub delay_bound: f64,
    /// `exp(-theta EC D)`.
    pub predicted: f64,
    pub simulated: f64,
    /// `simulated / predicted`.
    pub ratio: f64,
    pub busy_prob: f64,
    pub ok: bool,
}

/// Feeds the link at its effective capacity for `theta` chosen so that
/// `theta EC D` equals `opts.queue_exponent`.
pub fn audit_queue(opts: &ValidationOptions) -> Result<QueueAudit> {
    let dcf = opts.dcf.with_contenders(opts.queue_contenders);
    let link = UnlicensedLink::new(Arc::new(DcfModel::new(dcf)?), opts.queue_gamma_bar)?;
    let decay = opts.queue_exponent / opts.queue_delay_bound;
    let delta = link.delta_for_decay(decay)?;
    let theta = delta / opts.queue_beta;
    let ec = decay / theta;
    let stats = simulate_onoff_queue(&QueueConfig {
        dcf,
        beta: opts.queue_beta,
        gamma_bar: opts.queue_gamma_bar,
        arrival_rate: ec,
        delay_bound: opts.queue_delay_bound,
        cycles: opts.queue_cycles,
        warmup_cycles: opts.queue_cycles / 100,
        seed: opts.seed,
    })?;
    let predicted = (-opts.queue_exponent).exp();
    let ratio = stats.violation_prob / predicted;
    Ok(QueueAudit {
        contenders: opts.queue_contenders,
        gamma_bar: opts.queue_gamma_bar,
        beta: opts.queue_beta,
        theta,
        effective_capacity: ec,
        delay_bound: opts.queue_delay_bound,
        predicted,
        simulated: stats.violation_prob,
        ratio,
        busy_prob: stats.busy_prob,
        ok: (1.0 / QUEUE_FACTOR..=QUEUE_FACTOR).contains(&ratio),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub options: ValidationOptions,
    pub contention: Vec<ContentionCheck>,
    pub queue: QueueAudit,
    pub passed: bool,
}

/// Runs every check; contender counts are simulated in parallel and reported
/// in the order given.
pub fn validate_model(opts: &ValidationOptions) -> Result<ValidationReport> {
    let contention = opts
        .contenders
        .par_iter()
        .map(|&l| check_contention(opts.dcf.with_contenders(l), opts.slots, opts.seed))
        .collect::<Result<Vec<_>>>()?;
    let queue = audit_queue(opts)?;
    let passed = queue.ok
        && contention
            .iter()
            .all(|c| c.contention_ok && c.mean_ok && c.histogram_ok);
    Ok(ValidationReport {
        options: opts.clone(),
        contention,
        queue,
        passed,
    })
}
