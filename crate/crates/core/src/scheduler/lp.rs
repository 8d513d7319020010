//! The `a`-block of the alternation. With `delta` and `x` fixed every
//! constraint is linear in `a`: user `n` needs `c_1 a_1 + c_2 a_2 >= R_n` with
//! `c_m = theta C` at `delta_m`, band-1 usage `delta_1 a_1` draws on the
//! shared budget and `delta_m a_m <= x_m Lambda` caps each band. The program is
//! a fractional knapsack over the budget and is solved exactly by a greedy
//! fill; a dual solution is built alongside as an optimality certificate.

use serde::{Deserialize, Serialize};

use crate::capacity::Band;
use crate::error::{Error, Result};
use crate::scenario::{ScenarioModel, Vars};

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LpCertificate {
    /// `|primal - dual| / max(primal, 1 Hz)`.
    pub duality_gap: f64,
    /// Worst stationarity / sign violation of the dual, relative to the cost scale.
    pub dual_residual: f64,
    /// Shadow price of the unlicensed budget (licensed Hz per unlicensed Hz).
    pub budget_price: f64,
}

#[derive(Debug, Clone)]
pub struct LpOutcome {
    pub a: Vec<[f64; 2]>,
    pub objective: f64,
    pub certificate: LpCertificate,
}

#[derive(Debug, Clone, Copy)]
struct UserTerms {
    rate: f64,
    c: [f64; 2],
    delta: [f64; 2],
    cap: [f64; 2],
}

impl UserTerms {
    fn usable(&self, m: usize) -> bool {
        self.c[m] > 0.0 && self.cap[m] > 0.0
    }
}

fn terms(model: &ScenarioModel, vars: &Vars, big_m: f64) -> Result<Vec<UserTerms>> {
    let b1 = model.scenario().b1;
    (0..model.num_users())
        .map(|n| {
            let mut t = UserTerms {
                rate: model.qos(n).rate,
                c: [0.0; 2],
                delta: vars.delta[n],
                cap: [0.0; 2],
            };
            for band in Band::ALL {
                let m = band.index();
                let d = vars.delta[n][m];
                t.c[m] = model.link(n, band).decay(d)?;
                t.cap[m] = if d > 0.0 {
                    vars.x[n][m].max(0.0) * big_m / d
                } else {
                    f64::INFINITY
                };
            }
            if b1 <= 0.0 && t.delta[0] > 0.0 {
                t.cap[0] = 0.0;
            }
            Ok(t)
        })
        .collect()
}

/// Minimises `sum_n delta_2n a_2n` over `a` for fixed `(delta, x)`.
pub fn lp_step_in_a(model: &ScenarioModel, vars: &Vars, big_m: f64) -> Result<LpOutcome> {
    let b1 = model.scenario().b1;
    let users = terms(model, vars, big_m)?;
    let n_users = users.len();

    // Band-1 range per user: forced minimum (band 2 missing or capped) and
    // the point beyond which band 1 no longer saves licensed bandwidth.
    let mut lo = vec![0.0; n_users];
    let mut hi = vec![0.0; n_users];
    for (n, u) in users.iter().enumerate() {
        let band2 = if u.usable(1) { u.cap[1] * u.c[1] } else { 0.0 };
        let missing = (u.rate - band2).max(0.0);
        if !u.usable(0) {
            if missing > 0.0 {
                return Err(Error::Infeasible(format!(
                    "user {n}: licensed band alone cannot carry the rate at the current exponent"
                )));
            }
            continue;
        }
        lo[n] = missing / u.c[0];
        hi[n] = u.cap[0].min(u.rate / u.c[0]);
        if lo[n] > hi[n] * (1.0 + 1e-12) {
            return Err(Error::Infeasible(format!(
                "user {n}: rate not reachable within the big-M caps"
            )));
        }
        hi[n] = hi[n].max(lo[n]);
    }
    let forced: f64 = (0..n_users).map(|n| lo[n] * users[n].delta[0]).sum();
    if forced > b1 * (1.0 + 1e-12) + 1e-12 {
        return Err(Error::Infeasible(format!(
            "forced unlicensed usage {forced:.6e} Hz exceeds the budget {b1:.6e} Hz"
        )));
    }

    // Licensed bandwidth saved per unlicensed Hz.
    let ratio = |u: &UserTerms| {
        if u.usable(1) {
            u.delta[1] * u.c[0] / (u.c[1] * u.delta[0])
        } else {
            0.0
        }
    };
    let mut order: Vec<usize> = (0..n_users).filter(|&n| hi[n] > lo[n]).collect();
    order.sort_by(|&i, &j| ratio(&users[j]).total_cmp(&ratio(&users[i])).then(i.cmp(&j)));

    let mut a1 = lo.clone();
    let mut remaining = (b1 - forced).max(0.0);
    for &n in &order {
        if remaining <= 0.0 {
            break;
        }
        let d = users[n].delta[0];
        let extra = if d > 0.0 { (hi[n] - lo[n]).min(remaining / d) } else { hi[n] - lo[n] };
        a1[n] += extra;
        remaining -= extra * d;
    }

    let mut a = vec![[0.0; 2]; n_users];
    for (n, u) in users.iter().enumerate() {
        a[n][0] = a1[n];
        if u.usable(1) {
            a[n][1] = ((u.rate - a1[n] * u.c[0]) / u.c[1]).clamp(0.0, u.cap[1]);
        }
    }
    let objective: f64 = (0..n_users).map(|n| users[n].delta[1] * a[n][1]).sum();
    let certificate = certify(&users, &a, &lo, &hi, b1, remaining, objective, &ratio);
    Ok(LpOutcome {
        a,
        objective,
        certificate,
    })
}

#[allow(clippy::too_many_arguments)]
fn certify(
    users: &[UserTerms],
    a: &[[f64; 2]],
    lo: &[f64],
    hi: &[f64],
    b1: f64,
    slack: f64,
    primal: f64,
    ratio: &dyn Fn(&UserTerms) -> f64,
) -> LpCertificate {
    let rel = |x: f64, y: f64| x > y + 1e-12 * y.abs().max(1e-300);
    let pi = if slack > 1e-12 * b1.max(1.0) {
        0.0
    } else {
        let filled = (0..users.len())
            .filter(|&n| rel(a[n][0], lo[n]))
            .map(|n| ratio(&users[n]))
            .fold(f64::INFINITY, f64::min);
        if filled.is_finite() {
            filled
        } else {
            (0..users.len())
                .filter(|&n| rel(hi[n], a[n][0]))
                .map(|n| ratio(&users[n]))
                .fold(0.0, f64::max)
        }
    };

    let mut dual = -pi * b1;
    let mut residual: f64 = 0.0;
    for (n, u) in users.iter().enumerate() {
        let cost = [pi * u.delta[0], u.delta[1]];
        let usable = [u.usable(0), u.usable(1)];
        let interior = |m: usize| usable[m] && a[n][m] > 0.0 && rel(u.cap[m], a[n][m]);
        let at_cap = |m: usize| usable[m] && a[n][m] > 0.0 && !rel(u.cap[m], a[n][m]);
        let per_rate = |m: usize| cost[m] / u.c[m];
        let mu = if interior(1) {
            per_rate(1)
        } else if interior(0) {
            per_rate(0)
        } else if at_cap(1) || at_cap(0) {
            (0..2).filter(|&m| at_cap(m)).map(per_rate).fold(0.0, f64::max)
        } else {
            0.0
        };
        dual += mu * u.rate;
        for m in 0..2 {
            let scale = cost[m].abs() + mu * u.c[m] + 1e-300;
            let reduced = cost[m] - mu * u.c[m];
            let r = if !usable[m] {
                (-cost[m]).max(0.0)
            } else if interior(m) {
                reduced.abs()
            } else if at_cap(m) {
                // nu = -reduced must be non-negative
                dual -= (-reduced).max(0.0) * u.cap[m];
                reduced.max(0.0)
            } else {
                (-reduced).max(0.0)
            };
            residual = residual.max(r / scale);
        }
    }
    LpCertificate {
        duality_gap: (primal - dual).abs() / primal.max(1.0),
        dual_residual: residual,
        budget_price: pi,
    }
}
