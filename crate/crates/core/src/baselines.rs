//! Heuristic schedulers used as comparison points: sequential allocation (SAS)
//! and static rate mapping (SMS).
//!
//! Both give every selected band its own share of the violation target, so
//! each band runs at the exponent `delta*` where `exp(-theta C D) = P_th`.
//! Since `theta C` depends on `(beta, theta)` only through `delta = beta theta`,
//! the smallest bandwidth carrying rate `r` on a band is `r delta* / phi(delta*)`.

use serde::{Deserialize, Serialize};

use crate::capacity::Band;
use crate::error::{Error, Result};
use crate::scenario::{check_feasibility, Allocation, FeasibilityReport, ScenarioModel, Vars};
use crate::scheduler::find_feasible_start;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BaselineScheme {
    Sas,
    Sms,
}

impl BaselineScheme {
    pub fn as_str(self) -> &'static str {
        match self {
            BaselineScheme::Sas => "sas",
            BaselineScheme::Sms => "sms",
        }
    }
}

fn default_gamma_split() -> f64 {
    0.6
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaselineConfig {
    pub scheme: BaselineScheme,
    /// Fraction of each rate mapped to the unlicensed band under SMS.
    #[serde(default = "default_gamma_split")]
    pub gamma_split: f64,
}

impl BaselineConfig {
    pub fn sas() -> Self {
        Self {
            scheme: BaselineScheme::Sas,
            gamma_split: default_gamma_split(),
        }
    }

    pub fn sms(gamma_split: f64) -> Self {
        Self {
            scheme: BaselineScheme::Sms,
            gamma_split,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.gamma_split) {
            return Err(Error::invalid("gamma_split", "must lie in [0, 1]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BaselineResult {
    pub scheme: BaselineScheme,
    pub vars: Vars,
    pub allocation: Allocation,
    pub licensed_bandwidth: f64,
    /// Cap used for the big-M part of the feasibility check (Hz).
    pub big_m: f64,
    pub feasibility: FeasibilityReport,
}

/// Per user and band: `delta*` and the rate carried per unit of `a` there.
struct BandTerms {
    delta: f64,
    rate_per_a: f64,
}

fn band_terms(model: &ScenarioModel, n: usize, band: Band) -> Result<BandTerms> {
    let delta = model.single_band_delta(n, band)?;
    let rate_per_a = model.link(n, band).decay(delta)?;
    Ok(BandTerms { delta, rate_per_a })
}

fn set_band(vars: &mut Vars, n: usize, band: Band, t: &BandTerms, rate: f64) {
    let m = band.index();
    if rate <= 0.0 {
        vars.x[n][m] = 0.0;
        vars.delta[n][m] = 0.0;
        vars.a[n][m] = 0.0;
    } else {
        vars.x[n][m] = 1.0;
        vars.delta[n][m] = t.delta;
        vars.a[n][m] = rate / t.rate_per_a;
    }
}

/// Users in descending unlicensed SNR fill the budget one after another; the
/// user that exhausts it keeps the remainder and tops up on the licensed band,
/// everyone after it is served on the licensed band alone.
pub fn run_sas(model: &ScenarioModel) -> Result<BaselineResult> {
    let n_users = model.num_users();
    let mut order: Vec<usize> = (0..n_users).collect();
    let snr = |n: usize| model.scenario().users[n].snr(Band::Unlicensed);
    order.sort_by(|&i, &j| snr(j).total_cmp(&snr(i)).then(i.cmp(&j)));

    let mut vars = Vars::zeros(n_users);
    let mut remaining = model.scenario().b1;
    for n in order {
        let rate = model.qos(n).rate;
        let t1 = band_terms(model, n, Band::Unlicensed)?;
        let t2 = band_terms(model, n, Band::Licensed)?;
        let need = rate * t1.delta / t1.rate_per_a;
        let r1 = if need <= remaining {
            rate
        } else {
            remaining / t1.delta * t1.rate_per_a
        };
        set_band(&mut vars, n, Band::Unlicensed, &t1, r1);
        remaining = (remaining - vars.beta(n, Band::Unlicensed)).max(0.0);
        set_band(&mut vars, n, Band::Licensed, &t2, rate - r1);
    }
    finish(model, BaselineScheme::Sas, vars)
}

/// Every user sends `gamma R` unlicensed and `(1 - gamma) R` licensed; if the
/// unlicensed demand exceeds the budget all unlicensed shares shrink by the
/// same factor and the lost rate moves to the licensed band.
pub fn run_sms(model: &ScenarioModel, gamma_split: f64) -> Result<BaselineResult> {
    BaselineConfig::sms(gamma_split).validate()?;
    let n_users = model.num_users();
    let b1 = model.scenario().b1;
    let mut terms = Vec::with_capacity(n_users);
    let mut demand = 0.0;
    for n in 0..n_users {
        let t1 = band_terms(model, n, Band::Unlicensed)?;
        let t2 = band_terms(model, n, Band::Licensed)?;
        demand += gamma_split * model.qos(n).rate * t1.delta / t1.rate_per_a;
        terms.push((t1, t2));
    }
    let scale = if demand > b1 { b1 / demand } else { 1.0 };
    let mut vars = Vars::zeros(n_users);
    for (n, (t1, t2)) in terms.iter().enumerate() {
        let rate = model.qos(n).rate;
        let r1 = gamma_split * rate * scale;
        set_band(&mut vars, n, Band::Unlicensed, t1, r1);
        set_band(&mut vars, n, Band::Licensed, t2, rate - r1);
    }
    finish(model, BaselineScheme::Sms, vars)
}

pub fn run_baseline(model: &ScenarioModel, config: &BaselineConfig) -> Result<BaselineResult> {
    config.validate()?;
    match config.scheme {
        BaselineScheme::Sas => run_sas(model),
        BaselineScheme::Sms => run_sms(model, config.gamma_split),
    }
}

fn finish(model: &ScenarioModel, scheme: BaselineScheme, vars: Vars) -> Result<BaselineResult> {
    let widest = (0..model.num_users())
        .flat_map(|n| Band::ALL.map(|b| vars.beta(n, b)))
        .fold(0.0, f64::max);
    let big_m = match model.scenario().big_m {
        Some(m) => {
            if widest > m * (1.0 + 1e-12) {
                return Err(Error::Infeasible(format!(
                    "{}: a band needs {widest:.6e} Hz, above the cap {m:.6e} Hz",
                    scheme.as_str()
                )));
            }
            m
        }
        None => find_feasible_start(model)?.big_m.max(widest),
    };
    let allocation = Allocation::evaluate(model, &vars)?;
    let feasibility = check_feasibility(model, &vars, &allocation, big_m);
    Ok(BaselineResult {
        scheme,
        licensed_bandwidth: vars.licensed(),
        vars,
        allocation,
        big_m,
        feasibility,
    })
}
