//! Multi-user scenarios, allocations and the exact feasibility check shared by
//! the optimiser and the baselines.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::capacity::{
    aggregate_qos_check, Band, BandChannel, BandLink, EcPoint, LicensedLink, SelectedBand,
    UnlicensedLink, UserQos,
};
use crate::dcf::{DcfModel, DcfParams};
use crate::error::{Error, Result};

/// Tolerances of the exact feasibility test.
pub const RATE_TOL: f64 = 1e-6;
pub const BUDGET_TOL: f64 = 1e-6;
pub const QOS_TOL: f64 = 1e-6;
pub const BINARY_TOL: f64 = 1e-9;

fn default_frame() -> f64 {
    1e-3
}

fn default_id() -> String {
    "scenario".to_string()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserSpec {
    pub qos: UserQos,
    /// Unlicensed channel first, licensed second.
    pub channels: [BandChannel; 2],
}

impl UserSpec {
    pub fn new(qos: UserQos, unlicensed_snr: f64, licensed_snr: f64) -> Self {
        Self {
            qos,
            channels: [
                BandChannel {
                    band_id: Band::Unlicensed,
                    gamma_bar: unlicensed_snr,
                },
                BandChannel {
                    band_id: Band::Licensed,
                    gamma_bar: licensed_snr,
                },
            ],
        }
    }

    pub fn snr(&self, band: Band) -> f64 {
        self.channels[band.index()].gamma_bar
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    #[serde(default = "default_id")]
    pub id: String,
    pub users: Vec<UserSpec>,
    /// Unlicensed bandwidth budget `B_1` (Hz).
    pub b1: f64,
    /// LTE frame length `T` (s).
    #[serde(default = "default_frame")]
    pub frame: f64,
    #[serde(default)]
    pub dcf: DcfParams,
    /// Big-M bandwidth cap `Lambda` (Hz); chosen by the solver when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub big_m: Option<f64>,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        if self.users.is_empty() {
            return Err(Error::invalid("users", "scenario needs at least one user"));
        }
        if !(self.b1.is_finite() && self.b1 >= 0.0) {
            return Err(Error::invalid("b1", "unlicensed budget must be finite and non-negative"));
        }
        if !(self.frame.is_finite() && self.frame > 0.0) {
            return Err(Error::invalid("frame", "must be positive"));
        }
        if let Some(m) = self.big_m {
            if !(m.is_finite() && m >= self.b1 && m > 0.0) {
                return Err(Error::invalid("big_m", "must be finite, positive and at least b1"));
            }
        }
        self.dcf.validate()?;
        for (n, u) in self.users.iter().enumerate() {
            u.qos.validate().map_err(|e| e.context(format!("user {n}")))?;
            for (band, ch) in Band::ALL.iter().zip(&u.channels) {
                if ch.band_id != *band {
                    return Err(Error::invalid(
                        "channels",
                        format!("user {n}: channels must be listed as band 1 then band 2"),
                    ));
                }
                if !(ch.gamma_bar.is_finite() && ch.gamma_bar > 0.0) {
                    return Err(Error::invalid("gamma_bar", format!("user {n}: must be positive")));
                }
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let s: Scenario = serde_json::from_str(text)?;
        s.validate()?;
        Ok(s)
    }

    pub fn total_rate(&self) -> f64 {
        self.users.iter().map(|u| u.qos.rate).sum()
    }
}

/// A validated scenario with its per-user link models built once.
#[derive(Debug, Clone)]
pub struct ScenarioModel {
    scenario: Scenario,
    dcf: Arc<DcfModel>,
    links: Vec<[BandLink; 2]>,
}

impl ScenarioModel {
    pub fn new(scenario: Scenario) -> Result<Self> {
        scenario.validate()?;
        let dcf = Arc::new(DcfModel::new(scenario.dcf)?);
        let links = scenario
            .users
            .iter()
            .map(|u| -> Result<[BandLink; 2]> {
                Ok([
                    BandLink::Unlicensed(UnlicensedLink::new(
                        Arc::clone(&dcf),
                        u.snr(Band::Unlicensed),
                    )?),
                    BandLink::Licensed(LicensedLink::new(u.snr(Band::Licensed), scenario.frame)?),
                ])
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            scenario,
            dcf,
            links,
        })
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn dcf(&self) -> &Arc<DcfModel> {
        &self.dcf
    }

    pub fn num_users(&self) -> usize {
        self.links.len()
    }

    pub fn link(&self, user: usize, band: Band) -> &BandLink {
        &self.links[user][band.index()]
    }

    pub fn qos(&self, user: usize) -> &UserQos {
        &self.scenario.users[user].qos
    }

    /// `delta` at which band `band` alone meets user `user`'s violation target.
    pub fn single_band_delta(&self, user: usize, band: Band) -> Result<f64> {
        self.link(user, band)
            .delta_for_decay(self.qos(user).target_decay())
    }
}

/// Decision variables per user and band, indexed `[user][band.index()]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vars {
    pub x: Vec<[f64; 2]>,
    pub delta: Vec<[f64; 2]>,
    pub a: Vec<[f64; 2]>,
}

impl Vars {
    pub fn zeros(users: usize) -> Self {
        Self {
            x: vec![[0.0; 2]; users],
            delta: vec![[0.0; 2]; users],
            a: vec![[0.0; 2]; users],
        }
    }

    pub fn beta(&self, user: usize, band: Band) -> f64 {
        let m = band.index();
        self.delta[user][m] * self.a[user][m]
    }

    /// Licensed bandwidth `sum_n delta_2n a_2n` (Hz).
    pub fn licensed(&self) -> f64 {
        (0..self.x.len()).map(|n| self.beta(n, Band::Licensed)).sum()
    }

    pub fn unlicensed(&self) -> f64 {
        (0..self.x.len()).map(|n| self.beta(n, Band::Unlicensed)).sum()
    }

    /// `max x (1 - x)` over all selection variables.
    pub fn binarity(&self) -> f64 {
        self.x
            .iter()
            .flatten()
            .map(|x| x * (1.0 - x))
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandAllocation {
    pub x: f64,
    #[serde(flatten)]
    pub point: EcPoint,
    /// `exp(-theta C D_th)`.
    pub violation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserAllocation {
    pub bands: [BandAllocation; 2],
    /// `sum_m x_m C_m` (bit/s).
    pub aggregate_ec: f64,
    /// Capacity-weighted violation probability of the aggregate stream.
    pub exact_lhs: f64,
    pub relaxed_lhs: f64,
    pub relaxed_rhs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Allocation {
    pub users: Vec<UserAllocation>,
    /// Total licensed bandwidth (Hz).
    pub licensed_bandwidth: f64,
    /// Total unlicensed bandwidth (Hz).
    pub unlicensed_bandwidth: f64,
}

impl Allocation {
    pub fn evaluate(model: &ScenarioModel, vars: &Vars) -> Result<Self> {
        let users = (0..model.num_users())
            .map(|n| {
                let d = model.qos(n).delay_bound;
                let mut bands = [BandAllocation {
                    x: 0.0,
                    point: EcPoint {
                        beta: 0.0,
                        theta: f64::INFINITY,
                        delta: 0.0,
                        a: 0.0,
                        ec: 0.0,
                        decay: 0.0,
                    },
                    violation: 1.0,
                }; 2];
                for band in Band::ALL {
                    let m = band.index();
                    let point =
                        EcPoint::from_delta_a(model.link(n, band), vars.delta[n][m], vars.a[n][m])?;
                    bands[m] = BandAllocation {
                        x: vars.x[n][m],
                        point,
                        violation: point.violation(d),
                    };
                }
                let selected: Vec<SelectedBand> = bands
                    .iter()
                    .map(|b| SelectedBand { x: b.x, point: b.point })
                    .collect();
                let check = aggregate_qos_check(&selected, model.qos(n), n)?;
                Ok(UserAllocation {
                    aggregate_ec: bands.iter().map(|b| b.x * b.point.ec).sum(),
                    exact_lhs: check.exact_lhs,
                    relaxed_lhs: check.relaxed_lhs,
                    relaxed_rhs: check.relaxed_rhs,
                    bands,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            users,
            licensed_bandwidth: vars.licensed(),
            unlicensed_bandwidth: vars.unlicensed(),
        })
    }
}

/// Worst violation of each constraint family; zero means satisfied.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    /// `max_n (R_n - sum_m x C) / R_n`.
    pub rate: f64,
    /// `(sum_n beta_1n - B_1) / max(B_1, 1 Hz)`.
    pub budget: f64,
    /// `max (delta a - x Lambda) / Lambda`.
    pub big_m: f64,
    /// `max_n (exact_lhs - P_th) / P_th`.
    pub qos: f64,
    /// `max x (1 - x)`.
    pub binarity: f64,
    /// Users failing the rate or exact QoS test.
    pub violating_users: Vec<usize>,
    pub feasible: bool,
}

/// Exact P1 feasibility of an allocation with selection variables `vars.x`.
pub fn check_feasibility(
    model: &ScenarioModel,
    vars: &Vars,
    alloc: &Allocation,
    big_m: f64,
) -> FeasibilityReport {
    let b1 = model.scenario().b1;
    let mut report = FeasibilityReport {
        budget: ((vars.unlicensed() - b1) / b1.max(1.0)).max(0.0),
        binarity: vars.binarity(),
        ..Default::default()
    };
    for (n, u) in alloc.users.iter().enumerate() {
        let qos = model.qos(n);
        let rate = ((qos.rate - u.aggregate_ec) / qos.rate).max(0.0);
        let q = ((u.exact_lhs - qos.violation_prob) / qos.violation_prob).max(0.0);
        report.rate = report.rate.max(rate);
        report.qos = report.qos.max(q);
        if rate > RATE_TOL || q > QOS_TOL {
            report.violating_users.push(n);
        }
        for band in Band::ALL {
            let m = band.index();
            let excess = (vars.beta(n, band) - vars.x[n][m] * big_m) / big_m;
            report.big_m = report.big_m.max(excess.max(0.0));
        }
    }
    let binary = vars
        .x
        .iter()
        .flatten()
        .all(|&x| x.abs() <= BINARY_TOL || (1.0 - x).abs() <= BINARY_TOL);
    report.feasible = report.violating_users.is_empty()
        && report.budget <= BUDGET_TOL
        && report.big_m <= BUDGET_TOL
        && binary;
    report
}
