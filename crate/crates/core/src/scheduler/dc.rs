//! The `(delta, x)`-block. The penalised problem is a difference of convex
//! functions: the concave penalty `-lambda x^2` is linearised at the previous
//! `x` and the resulting convex program is solved with the log-barrier method.
//! Repeating this is a majorise-minimise scheme, so each accepted inner step
//! lowers the penalised objective.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::barrier::{self, BarrierOptions, BarrierStatus, ConvexProgram, Eval};
use crate::capacity::Band;
use crate::error::Result;
use crate::scenario::{ScenarioModel, Vars};

/// How the per-user delay constraint enters the convex step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum QosForm {
    /// `e_m - 1 + (1 - P) x_m <= 0` for each band: a selected band meets the
    /// target on its own, which is sufficient for the aggregate constraint.
    #[default]
    PerBand,
    /// `sum_m (e_m - 1 + x_m) <= P sum_m x_m`, the ordering-based relaxation.
    Summed,
}

#[derive(Debug, Clone, Copy)]
pub struct DcOptions {
    pub lambda: f64,
    pub form: QosForm,
    /// Keep `x` at its current value and optimise `delta` only.
    pub fix_x: bool,
    pub max_inner: usize,
    pub x_tol: f64,
    pub barrier: BarrierOptions,
}

impl Default for DcOptions {
    fn default() -> Self {
        Self {
            lambda: 0.0,
            form: QosForm::PerBand,
            fix_x: false,
            max_inner: 50,
            x_tol: 1e-6,
            barrier: BarrierOptions::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct DcOutcome {
    pub vars: Vars,
    pub inner_iters: usize,
    pub newton_iters: usize,
    /// The convex solver broke down; the last accepted iterate was kept.
    pub solver_failed: bool,
    /// The convex program had no strictly feasible point; the iterate was kept.
    pub no_interior: bool,
}

/// `sum delta_2 a_2 + lambda sum x (1 - x)`.
pub fn penalised_objective(vars: &Vars, lambda: f64) -> f64 {
    vars.licensed() + lambda * vars.x.iter().flatten().map(|x| x * (1.0 - x)).sum::<f64>()
}

struct Program<'a> {
    model: &'a ScenarioModel,
    base: &'a Vars,
    big_m: f64,
    lambda: f64,
    form: QosForm,
    scale: f64,
    /// `(user, band)` of each free `delta`, then of each free `x`.
    delta_vars: Vec<(usize, usize)>,
    x_vars: Vec<(usize, usize)>,
    delta_pos: Vec<[Option<usize>; 2]>,
    x_pos: Vec<[Option<usize>; 2]>,
}

/// Every constraint is loosened by this much (in its normalised units; delay
/// constraints by `SLACK P_th`). Binding constraints of the exact problem
/// often leave it without interior points, e.g. a band-1 exponent pinned both
/// by its delay target and by a fully used budget; with the slack the current
/// iterate is always strictly feasible. The following LP step restores rate
/// and budget exactly, so only the delay constraints keep the slack.
const SLACK: f64 = 1e-9;

/// Trust region: one step may grow an exponent at most this many times over.
/// Exponents that do not enter the objective are otherwise bounded only by
/// `Lambda / a`, which for small `a` lies many orders of magnitude away and
/// leaves the barrier crawling towards it.
const TRUST: f64 = 10.0;

/// Decay rate with first and second derivative at one (user, band).
type Decay = (f64, f64, f64);

impl<'a> Program<'a> {
    fn new(model: &'a ScenarioModel, base: &'a Vars, big_m: f64, opts: &DcOptions) -> Self {
        let n_users = model.num_users();
        let mut delta_vars = Vec::new();
        let mut x_vars = Vec::new();
        let mut delta_pos = vec![[None; 2]; n_users];
        let mut x_pos = vec![[None; 2]; n_users];
        for n in 0..n_users {
            for m in 0..2 {
                if base.a[n][m] > 0.0 {
                    delta_pos[n][m] = Some(delta_vars.len());
                    delta_vars.push((n, m));
                }
            }
        }
        if !opts.fix_x {
            for n in 0..n_users {
                for m in 0..2 {
                    x_pos[n][m] = Some(delta_vars.len() + x_vars.len());
                    x_vars.push((n, m));
                }
            }
        }
        let scale = base.licensed().max(opts.lambda).max(1.0);
        Self {
            model,
            base,
            big_m,
            lambda: opts.lambda,
            form: opts.form,
            scale,
            delta_vars,
            x_vars,
            delta_pos,
            x_pos,
        }
    }

    fn pack(&self, v: &Vars) -> DVector<f64> {
        let mut z = DVector::zeros(self.dim());
        for (i, &(n, m)) in self.delta_vars.iter().enumerate() {
            z[i] = v.delta[n][m];
        }
        for (j, &(n, m)) in self.x_vars.iter().enumerate() {
            z[self.delta_vars.len() + j] = v.x[n][m];
        }
        z
    }

    fn unpack(&self, z: &DVector<f64>) -> Vars {
        let mut v = self.base.clone();
        for (i, &(n, m)) in self.delta_vars.iter().enumerate() {
            v.delta[n][m] = z[i];
        }
        for (j, &(n, m)) in self.x_vars.iter().enumerate() {
            v.x[n][m] = z[self.delta_vars.len() + j];
        }
        v
    }

    fn decays(&self, v: &Vars) -> Result<Vec<[Decay; 2]>> {
        (0..self.model.num_users())
            .map(|n| {
                let mut out = [(0.0, 0.0, 0.0); 2];
                for band in Band::ALL {
                    let m = band.index();
                    let d = v.delta[n][m];
                    let link = self.model.link(n, band);
                    out[m] = if self.delta_pos[n][m].is_some() {
                        link.decay_derivatives(d)?
                    } else {
                        (link.decay(d)?, 0.0, 0.0)
                    };
                }
                Ok(out)
            })
            .collect()
    }

    fn unit(&self, i: usize, coef: f64) -> DVector<f64> {
        let mut g = DVector::zeros(self.dim());
        g[i] = coef;
        g
    }
}

impl ConvexProgram for Program<'_> {
    fn dim(&self) -> usize {
        self.delta_vars.len() + self.x_vars.len()
    }

    fn objective(&self, z: &DVector<f64>) -> Result<Eval> {
        let v = self.unpack(z);
        let mut value = 0.0;
        let mut grad = DVector::zeros(self.dim());
        for n in 0..self.model.num_users() {
            value += v.delta[n][1] * self.base.a[n][1];
            if let Some(i) = self.delta_pos[n][1] {
                grad[i] = self.base.a[n][1] / self.scale;
            }
        }
        for (j, &(n, m)) in self.x_vars.iter().enumerate() {
            let slope = self.lambda * (1.0 - 2.0 * self.base.x[n][m]);
            value += slope * v.x[n][m];
            grad[self.delta_vars.len() + j] = slope / self.scale;
        }
        Ok(Eval {
            value: value / self.scale,
            grad,
            hess: None,
        })
    }

    fn constraints(&self, z: &DVector<f64>) -> Result<Vec<Eval>> {
        let v = self.unpack(z);
        let phi = self.decays(&v)?;
        let dim = self.dim();
        let a = &self.base.a;
        let mut out = Vec::new();

        for n in 0..self.model.num_users() {
            let qos = self.model.qos(n);
            let d_th = qos.delay_bound;
            let p = qos.violation_prob;

            // Rate: (R - sum_m a_m phi_m(delta_m)) / R <= 0.
            if self.delta_pos[n].iter().any(Option::is_some) {
                let mut value = qos.rate;
                let mut grad = DVector::zeros(dim);
                let mut hess = DMatrix::zeros(dim, dim);
                for m in 0..2 {
                    value -= a[n][m] * phi[n][m].0;
                    if let Some(i) = self.delta_pos[n][m] {
                        grad[i] = -a[n][m] * phi[n][m].1 / qos.rate;
                        hess[(i, i)] = -a[n][m] * phi[n][m].2 / qos.rate;
                    }
                }
                out.push(Eval {
                    value: value / qos.rate - SLACK,
                    grad,
                    hess: Some(hess),
                });
            }

            // Delay: e_m = exp(-phi_m D).
            let mut e = [(0.0, 0.0, 0.0); 2];
            for m in 0..2 {
                let (f, f1, f2) = phi[n][m];
                let ev = (-f * d_th).exp();
                e[m] = (ev, -d_th * f1 * ev, (d_th * d_th * f1 * f1 - d_th * f2) * ev);
            }
            let mut push_qos = |bands: &[usize], x_coef: f64| {
                let depends = bands
                    .iter()
                    .any(|&m| self.delta_pos[n][m].is_some() || self.x_pos[n][m].is_some());
                if !depends {
                    return;
                }
                let mut value = 0.0;
                let mut grad = DVector::zeros(dim);
                let mut hess = DMatrix::zeros(dim, dim);
                for &m in bands {
                    value += e[m].0 - 1.0 + x_coef * v.x[n][m];
                    if let Some(i) = self.delta_pos[n][m] {
                        grad[i] = e[m].1;
                        hess[(i, i)] = e[m].2;
                    }
                    if let Some(j) = self.x_pos[n][m] {
                        grad[j] = x_coef;
                    }
                }
                out.push(Eval {
                    value: value - SLACK * p,
                    grad,
                    hess: Some(hess),
                });
            };
            match self.form {
                QosForm::PerBand => {
                    push_qos(&[0], 1.0 - p);
                    push_qos(&[1], 1.0 - p);
                }
                QosForm::Summed => push_qos(&[0, 1], 1.0 - p),
            }

            for m in 0..2 {
                let (dp, xp) = (self.delta_pos[n][m], self.x_pos[n][m]);
                // Big-M: (delta a - x Lambda) / Lambda <= 0.
                if (dp.is_some() || xp.is_some()) && a[n][m] > 0.0 {
                    let mut grad = DVector::zeros(dim);
                    if let Some(i) = dp {
                        grad[i] = a[n][m] / self.big_m;
                    }
                    if let Some(j) = xp {
                        grad[j] = -1.0;
                    }
                    out.push(Eval {
                        value: (v.delta[n][m] * a[n][m] - v.x[n][m] * self.big_m) / self.big_m - SLACK,
                        grad,
                        hess: None,
                    });
                }
                if let Some(i) = dp {
                    let r = self.base.delta[n][m].max(1e-12);
                    out.push(Eval {
                        value: -v.delta[n][m] / r - SLACK,
                        grad: self.unit(i, -1.0 / r),
                        hess: None,
                    });
                    out.push(Eval {
                        value: v.delta[n][m] / r - TRUST - SLACK,
                        grad: self.unit(i, 1.0 / r),
                        hess: None,
                    });
                }
                if let Some(j) = xp {
                    out.push(Eval {
                        value: -v.x[n][m] - SLACK,
                        grad: self.unit(j, -1.0),
                        hess: None,
                    });
                    out.push(Eval {
                        value: v.x[n][m] - 1.0 - SLACK,
                        grad: self.unit(j, 1.0),
                        hess: None,
                    });
                }
            }
        }

        // Unlicensed budget.
        let b1 = self.model.scenario().b1;
        if b1 > 0.0 && self.delta_vars.iter().any(|&(_, m)| m == 0) {
            let mut grad = DVector::zeros(dim);
            let mut used = 0.0;
            for n in 0..self.model.num_users() {
                used += v.delta[n][0] * a[n][0];
                if let Some(i) = self.delta_pos[n][0] {
                    grad[i] = a[n][0] / b1;
                }
            }
            out.push(Eval {
                value: (used - b1) / b1 - SLACK,
                grad,
                hess: None,
            });
        }
        Ok(out)
    }
}

/// Runs the DC inner loop from `vars` with `a` held fixed.
pub fn dc_step_in_delta_x(
    model: &ScenarioModel,
    vars: &Vars,
    big_m: f64,
    opts: &DcOptions,
) -> Result<DcOutcome> {
    let mut current = vars.clone();
    let mut outcome = DcOutcome {
        vars: current.clone(),
        inner_iters: 0,
        newton_iters: 0,
        solver_failed: false,
        no_interior: false,
    };
    let slack = 1e-9 * vars.licensed().max(opts.lambda).max(1.0);
    for _ in 0..opts.max_inner {
        let program = Program::new(model, &current, big_m, opts);
        if program.dim() == 0 {
            break;
        }
        let result = barrier::solve(&program, program.pack(&current), &opts.barrier);
        outcome.newton_iters += result.newton_iters;
        match result.status {
            BarrierStatus::Optimal => {}
            BarrierStatus::NoInterior => {
                outcome.no_interior = true;
                break;
            }
            BarrierStatus::Failed => {
                outcome.solver_failed = true;
                break;
            }
        }
        let next = program.unpack(&result.z);
        let better = penalised_objective(&next, opts.lambda)
            <= penalised_objective(&current, opts.lambda) + slack
            && next.licensed() <= current.licensed() + slack;
        if !better {
            break;
        }
        outcome.inner_iters += 1;
        let moved = next
            .x
            .iter()
            .flatten()
            .zip(current.x.iter().flatten())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        current = next;
        if moved < opts.x_tol {
            break;
        }
    }
    outcome.vars = current;
    Ok(outcome)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::capacity::UserQos;
    use crate::dcf::DcfParams;
    use crate::scenario::{Scenario, UserSpec};
    use crate::scheduler::start::find_feasible_start;

    fn one_user(b1: f64) -> ScenarioModel {
        ScenarioModel::new(Scenario {
            id: "dc".into(),
            users: vec![UserSpec::new(
                UserQos {
                    rate: 4e6,
                    delay_bound: 0.2,
                    violation_prob: 0.01,
                },
                6.0,
                9.0,
            )],
            b1,
            frame: 1e-3,
            dcf: DcfParams::default(),
            big_m: None,
        })
        .unwrap()
    }

    #[test]
    fn fixed_selection_makes_rate_constraint_active() {
        let model = one_user(2e5);
        let st = find_feasible_start(&model).unwrap();
        let mut v = st.vars.clone();
        // Shrink the licensed share so the rate needs an exponent above the
        // delay target, and start from a generous exponent.
        v.a[0][1] *= 0.8;
        v.delta[0][1] *= 3.0;
        let opts = DcOptions {
            fix_x: true,
            ..Default::default()
        };
        let out = dc_step_in_delta_x(&model, &v, st.big_m, &opts).unwrap();
        assert!(!out.solver_failed && !out.no_interior);

        // Oracle: bisection on delta_2 for the rate equation.
        let link2 = model.link(0, Band::Licensed);
        let c1 = v.a[0][0] * model.link(0, Band::Unlicensed).decay(out.vars.delta[0][0]).unwrap();
        let need = 4e6 - c1;
        let (mut lo, mut hi) = (st.vars.delta[0][1], v.delta[0][1]);
        assert!(v.a[0][1] * link2.decay(lo).unwrap() < need);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if v.a[0][1] * link2.decay(mid).unwrap() < need {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let got = out.vars.delta[0][1];
        assert!((got - hi).abs() < 1e-7 * hi, "{got} vs {hi}");
        assert!(out.vars.licensed() < v.licensed());
    }

    #[test]
    fn binary_start_is_a_fixed_point_of_the_linearisation() {
        let model = one_user(2e5);
        let st = find_feasible_start(&model).unwrap();
        let opts = DcOptions {
            lambda: 10.0 * st.vars.licensed(),
            ..Default::default()
        };
        let out = dc_step_in_delta_x(&model, &st.vars, st.big_m, &opts).unwrap();
        for x in out.vars.x.iter().flatten() {
            assert!((x - 1.0).abs() < 1e-6, "{x}");
        }
        assert!(out.vars.licensed() <= st.vars.licensed() * (1.0 + 1e-9));
    }
}
