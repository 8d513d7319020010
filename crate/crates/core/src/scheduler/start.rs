use crate::capacity::Band;
use crate::error::{Error, Result};
use crate::scenario::{ScenarioModel, Vars};

/// Initial point of the alternation together with the big-M constant it implies.
#[derive(Debug, Clone)]
pub struct Start {
    pub vars: Vars,
    /// `Lambda` (Hz).
    pub big_m: f64,
    /// Per user and band, the `delta` at which that band alone meets the violation target.
    pub single_band_delta: Vec<[f64; 2]>,
}

/// Both bands selected for every user, the unlicensed budget split equally,
/// each band's exponent at its single-band QoS equality, and the licensed
/// bandwidth topping up whatever rate the unlicensed share leaves uncovered.
pub fn find_feasible_start(model: &ScenarioModel) -> Result<Start> {
    let n_users = model.num_users();
    let b1 = model.scenario().b1;
    let share = b1 / n_users as f64;
    let mut vars = Vars::zeros(n_users);
    let mut single = Vec::with_capacity(n_users);
    for n in 0..n_users {
        let target = model.qos(n).target_decay();
        let d1 = model.single_band_delta(n, Band::Unlicensed)?;
        let d2 = model.single_band_delta(n, Band::Licensed)?;
        single.push([d1, d2]);
        let a1 = if share > 0.0 { share / d1 } else { 0.0 };
        let missing = model.qos(n).rate - a1 * target;
        let a2 = if missing > 0.0 { missing / target } else { 0.0 };
        vars.x[n] = [1.0, 1.0];
        vars.delta[n] = [d1, d2];
        vars.a[n] = [a1, a2];
    }
    let licensed = vars.licensed();
    let big_m = match model.scenario().big_m {
        Some(m) => {
            if let Some(n) = (0..n_users).find(|&n| vars.beta(n, Band::Licensed) > m) {
                return Err(Error::Infeasible(format!(
                    "user {n} needs {:.6e} Hz of licensed bandwidth at the start, above the cap {m:.6e} Hz",
                    vars.beta(n, Band::Licensed)
                )));
            }
            m
        }
        None => b1.max(4.0 * licensed).max(1.0),
    };
    Ok(Start {
        vars,
        big_m,
        single_band_delta: single,
    })
}
