use serde::{Deserialize, Serialize};

use super::dcf::DcfSimulator;
use crate::dcf::{DcfModel, DcfParams};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QueueConfig {
    #[serde(default)]
    pub dcf: DcfParams,
    /// Unlicensed bandwidth (Hz).
    pub beta: f64,
    /// Average SNR (linear).
    pub gamma_bar: f64,
    /// Constant fluid arrival rate (bit/s).
    pub arrival_rate: f64,
    /// `D_th` (s).
    pub delay_bound: f64,
    /// Measured busy cycles (one off-time followed by one success).
    pub cycles: u64,
    #[serde(default)]
    pub warmup_cycles: u64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueueStats {
    pub cycles: u64,
    /// Arrival instants at which the delay was evaluated.
    pub probes: u64,
    /// Service rate while on (bit/s).
    pub on_rate: f64,
    /// Long-run service rate `on_rate t_s / (t_s + E[t_off])` (bit/s).
    pub mean_service_rate: f64,
    /// Fraction of arrival instants whose delay exceeds `delay_bound`.
    pub violation_prob: f64,
    /// Fraction of arrival instants that found a non-empty queue.
    pub busy_prob: f64,
}

/// Cumulative service capacity `C(t)` of an on-off schedule.
struct Schedule {
    on_start: Vec<f64>,
    t_s: f64,
    rate: f64,
}

impl Schedule {
    fn capacity(&self, t: f64) -> f64 {
        let i = self.on_start.partition_point(|&s| s <= t);
        if i == 0 {
            return 0.0;
        }
        let partial = (t - self.on_start[i - 1]).min(self.t_s);
        self.rate * (self.t_s * (i - 1) as f64 + partial)
    }
}

/// Fluid FIFO queue with constant-rate arrivals, served at
/// `beta log2(1 + gamma_bar)` during each success of the tagged node and not
/// at all during its off-times. Arrivals are probed on a regular grid; an
/// arrival at `t` misses the bound iff the backlog it finds exceeds the
/// service capacity offered in `(t, t + D]`.
pub fn simulate_onoff_queue(cfg: &QueueConfig) -> Result<QueueStats> {
    cfg.dcf.validate()?;
    for (name, v) in [
        ("beta", cfg.beta),
        ("gamma_bar", cfg.gamma_bar),
        ("delay_bound", cfg.delay_bound),
    ] {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::invalid(name, "must be positive"));
        }
    }
    if !(cfg.arrival_rate.is_finite() && cfg.arrival_rate >= 0.0) {
        return Err(Error::invalid("arrival_rate", "must be finite and non-negative"));
    }
    if cfg.cycles == 0 {
        return Err(Error::invalid("cycles", "must be positive"));
    }
    let t_s = cfg.dcf.t_s;
    let on_rate = cfg.beta * cfg.gamma_bar.ln_1p() / std::f64::consts::LN_2;
    let mean_off = DcfModel::new(cfg.dcf)?.mean_off_time();
    let mean_service_rate = on_rate * t_s / (t_s + mean_off);
    if cfg.arrival_rate >= mean_service_rate {
        return Err(Error::invalid(
            "arrival_rate",
            format!("unstable: arrival rate must stay below the mean service rate {mean_service_rate:.6e} bit/s"),
        ));
    }

    let mut sim = DcfSimulator::new(cfg.dcf, cfg.seed)?;
    let mut on_start = Vec::new();
    let mut t = 0.0;
    let mut next_cycle = |t: &mut f64, on_start: &mut Vec<f64>| {
        *t += sim.next_off_time();
        on_start.push(*t);
        *t += t_s;
    };
    for _ in 0..cfg.warmup_cycles + cfg.cycles {
        next_cycle(&mut t, &mut on_start);
    }
    let measure_from = if cfg.warmup_cycles > 0 {
        on_start[cfg.warmup_cycles as usize - 1] + t_s
    } else {
        0.0
    };
    let measure_to = t;
    while t < measure_to + cfg.delay_bound + t_s {
        next_cycle(&mut t, &mut on_start);
    }
    let sched = Schedule {
        on_start,
        t_s,
        rate: on_rate,
    };

    // Walk segment boundaries and probe instants in time order.
    let h = cfg.dcf.t_s.min(cfg.dcf.sigma * 16.0) / 4.0;
    let lambda = cfg.arrival_rate;
    let mut q = 0.0_f64;
    let mut now = 0.0_f64;
    let mut seg = 0usize;
    let advance = |q: &mut f64, now: &mut f64, seg: &mut usize, to: f64| {
        while *now < to {
            let on = sched.on_start[*seg];
            let (end, serving) = if *now < on {
                (on.min(to), false)
            } else {
                ((on + t_s).min(to), true)
            };
            let dt = end - *now;
            *q = if serving {
                (*q + (lambda - on_rate) * dt).max(0.0)
            } else {
                *q + lambda * dt
            };
            *now = end;
            if *now >= on + t_s {
                *seg += 1;
            }
        }
    };
    let mut probes = 0u64;
    let mut late = 0u64;
    let mut busy = 0u64;
    let mut k = (measure_from / h).ceil() as u64;
    loop {
        let at = k as f64 * h;
        if at >= measure_to {
            break;
        }
        advance(&mut q, &mut now, &mut seg, at);
        probes += 1;
        if q > 0.0 {
            busy += 1;
            if q > sched.capacity(at + cfg.delay_bound) - sched.capacity(at) {
                late += 1;
            }
        }
        k += 1;
    }
    Ok(QueueStats {
        cycles: cfg.cycles,
        probes,
        on_rate,
        mean_service_rate,
        violation_prob: late as f64 / probes.max(1) as f64,
        busy_prob: busy as f64 / probes.max(1) as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(arrival_rate: f64) -> QueueConfig {
        QueueConfig {
            dcf: DcfParams::default(),
            beta: 1e6,
            gamma_bar: 10.0,
            arrival_rate,
            delay_bound: 0.05,
            cycles: 20_000,
            warmup_cycles: 100,
            seed: 11,
        }
    }

    #[test]
    fn no_arrivals_never_violate() {
        let s = simulate_onoff_queue(&cfg(0.0)).unwrap();
        assert_eq!(s.violation_prob, 0.0);
        assert!(s.probes > 0);
    }

    #[test]
    fn unstable_load_is_rejected() {
        let s = simulate_onoff_queue(&cfg(1.0)).unwrap();
        assert!(simulate_onoff_queue(&cfg(s.mean_service_rate)).is_err());
    }

    #[test]
    fn violation_grows_with_load() {
        let mean = simulate_onoff_queue(&cfg(1.0)).unwrap().mean_service_rate;
        let v: Vec<f64> = [0.5, 0.6, 0.7, 0.8, 0.9]
            .iter()
            .map(|f| simulate_onoff_queue(&cfg(f * mean)).unwrap().violation_prob)
            .collect();
        assert!(v.windows(2).all(|w| w[0] <= w[1]), "{v:?}");
        assert!(v[4] > 0.0);
    }

    #[test]
    fn capacity_is_piecewise_linear() {
        let s = Schedule {
            on_start: vec![1.0, 3.0],
            t_s: 0.5,
            rate: 2.0,
        };
        assert_eq!(s.capacity(0.5), 0.0);
        assert_eq!(s.capacity(1.25), 0.5);
        assert_eq!(s.capacity(2.0), 1.0);
        assert_eq!(s.capacity(3.5), 2.0);
        assert_eq!(s.capacity(9.0), 2.0);
    }
}
