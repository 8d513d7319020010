use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::dc::{dc_step_in_delta_x, DcOptions, QosForm};
use super::lp::lp_step_in_a;
use super::start::find_feasible_start;
use crate::capacity::Band;
use crate::error::{Error, Result};
use crate::scenario::{check_feasibility, Allocation, FeasibilityReport, ScenarioModel, Vars};

#[derive(Debug, Clone, Copy)]
pub struct SolveOptions {
    pub max_outer: usize,
    /// Outer stop: relative change of the licensed bandwidth.
    pub rel_tol: f64,
    pub form: QosForm,
    /// Initial penalty; `10 max(start objective, floor)` when absent.
    pub lambda0: Option<f64>,
    pub lambda_growth: f64,
    pub lambda_cap_factor: f64,
    pub binarity_tol: f64,
    pub dc: DcOptions,
    /// Record wall-clock time in the report (makes reports run dependent).
    pub timing: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            max_outer: 200,
            rel_tol: 1e-6,
            form: QosForm::PerBand,
            lambda0: None,
            lambda_growth: 2.0,
            lambda_cap_factor: 1e8,
            binarity_tol: 1e-3,
            dc: DcOptions::default(),
            timing: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveStatus {
    Converged,
    IterationCap,
    Infeasible,
}

impl SolveStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            SolveStatus::Converged => "converged",
            SolveStatus::IterationCap => "iteration-cap",
            SolveStatus::Infeasible => "infeasible",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub status: SolveStatus,
    /// Licensed bandwidth at the start and after each outer iteration (Hz).
    pub objective_trace: Vec<f64>,
    /// Licensed bandwidth of the returned (rounded, repaired) allocation (Hz).
    pub objective: f64,
    pub outer_iters: usize,
    pub dc_inner_iters: Vec<usize>,
    pub newton_iters: usize,
    pub penalty_lambda: f64,
    /// `max x (1 - x)` before rounding.
    pub binarity_residual: f64,
    pub big_m: f64,
    /// Worst duality gap over all LP steps.
    pub lp_duality_gap: f64,
    pub dc_solver_failures: usize,
    pub dc_no_interior: usize,
    /// Users whose band selection was changed by the repair step.
    pub repaired_users: Vec<usize>,
    /// Users for which the summed delay constraint holds but the exact one does not.
    pub relaxed_not_exact: Vec<usize>,
    pub feasibility: FeasibilityReport,
    pub diagnostics: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_time: Option<f64>,
}

impl SolveReport {
    fn new() -> Self {
        Self {
            status: SolveStatus::Infeasible,
            objective_trace: Vec::new(),
            objective: f64::NAN,
            outer_iters: 0,
            dc_inner_iters: Vec::new(),
            newton_iters: 0,
            penalty_lambda: 0.0,
            binarity_residual: 0.0,
            big_m: 0.0,
            lp_duality_gap: 0.0,
            dc_solver_failures: 0,
            dc_no_interior: 0,
            repaired_users: Vec::new(),
            relaxed_not_exact: Vec::new(),
            feasibility: FeasibilityReport::default(),
            diagnostics: Vec::new(),
            wall_time: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Solution {
    pub vars: Vars,
    pub allocation: Option<Allocation>,
    pub report: SolveReport,
}

fn relative_change(prev: f64, next: f64, floor: f64) -> f64 {
    (prev - next).abs() / prev.abs().max(floor)
}

/// Block coordinate descent between the LP in `a` and the penalised DC step
/// in `(delta, x)`, followed by rounding of `x`, a fixed-selection re-solve and
/// repair.
pub fn solve_bcd(model: &ScenarioModel, opts: &SolveOptions) -> Result<Solution> {
    let clock = Instant::now();
    let mut report = SolveReport::new();
    let finish = |mut report: SolveReport, vars: Vars, allocation: Option<Allocation>| {
        if opts.timing {
            report.wall_time = Some(clock.elapsed().as_secs_f64());
        }
        Ok(Solution {
            vars,
            allocation,
            report,
        })
    };

    let start = match find_feasible_start(model) {
        Ok(s) => s,
        Err(Error::Infeasible(msg)) => {
            report.diagnostics.push(msg);
            return finish(report, Vars::zeros(model.num_users()), None);
        }
        Err(e) => return Err(e),
    };
    let big_m = start.big_m;
    report.big_m = big_m;
    let scale_floor = (1e-3 * model.scenario().b1).max(1.0);
    let obj0 = start.vars.licensed();
    let lambda0 = opts.lambda0.unwrap_or(10.0 * obj0.max(scale_floor));
    let lambda_cap = lambda0 * opts.lambda_cap_factor;
    let mut lambda = lambda0;
    let mut vars = start.vars.clone();
    report.objective_trace.push(obj0);
    let mut status = SolveStatus::IterationCap;

    let mut dc_opts = opts.dc;
    dc_opts.form = opts.form;
    for _ in 0..opts.max_outer {
        report.outer_iters += 1;
        let before = vars.licensed();
        match lp_step_in_a(model, &vars, big_m) {
            Ok(lp) => {
                report.lp_duality_gap = report.lp_duality_gap.max(lp.certificate.duality_gap);
                if lp.objective <= before {
                    vars.a = lp.a;
                }
            }
            Err(Error::Infeasible(msg)) => {
                report.diagnostics.push(format!("lp step: {msg}"));
                break;
            }
            Err(e) => return Err(e),
        }
        dc_opts.lambda = lambda;
        dc_opts.fix_x = false;
        let dc = dc_step_in_delta_x(model, &vars, big_m, &dc_opts)?;
        report.dc_inner_iters.push(dc.inner_iters);
        report.newton_iters += dc.newton_iters;
        report.dc_solver_failures += dc.solver_failed as usize;
        report.dc_no_interior += dc.no_interior as usize;
        vars = dc.vars;
        let after = vars.licensed();
        report.objective_trace.push(after);
        if relative_change(before, after, scale_floor) <= opts.rel_tol {
            if vars.binarity() > opts.binarity_tol && lambda < lambda_cap {
                lambda = (lambda * opts.lambda_growth).min(lambda_cap);
                continue;
            }
            status = SolveStatus::Converged;
            break;
        }
    }
    report.penalty_lambda = lambda;
    report.binarity_residual = vars.binarity();

    // Round, then re-solve the continuous part with the selection fixed.
    for n in 0..model.num_users() {
        vars.x[n][0] = if vars.x[n][0] >= 0.5 { 1.0 } else { 0.0 };
        vars.x[n][1] = if vars.x[n][1] > 0.5 { 1.0 } else { 0.0 };
        if vars.x[n] == [0.0, 0.0] {
            let m = if vars.a[n][1] > 0.0 { 1 } else { 0 };
            vars.x[n][m] = 1.0;
        }
    }
    let mut fixed = dc_opts;
    fixed.fix_x = true;
    fixed.lambda = 0.0;
    let resolve = |vars: &mut Vars, report: &mut SolveReport| -> Result<()> {
        for _ in 0..2 {
            match lp_step_in_a(model, vars, big_m) {
                Ok(lp) => vars.a = lp.a,
                Err(Error::Infeasible(msg)) => {
                    report.diagnostics.push(format!("fixed-selection lp: {msg}"));
                    return Ok(());
                }
                Err(e) => return Err(e),
            }
            let dc = dc_step_in_delta_x(model, vars, big_m, &fixed)?;
            report.newton_iters += dc.newton_iters;
            *vars = dc.vars;
        }
        if let Ok(lp) = lp_step_in_a(model, vars, big_m) {
            vars.a = lp.a;
        }
        Ok(())
    };
    resolve(&mut vars, &mut report)?;
    deselect_idle_bands(&mut vars);

    let mut check = evaluate(model, &vars, big_m);
    let mut repaired = false;
    if let Some((_, r)) = &check {
        if !r.feasible {
            for &n in &r.violating_users {
                report.repaired_users.push(n);
                vars.x[n] = [vars.x[n][0], 1.0];
                vars.delta[n][1] = vars.delta[n][1].max(start.single_band_delta[n][1]);
                vars.delta[n][0] = vars.delta[n][0].max(start.single_band_delta[n][0]);
            }
            repaired = true;
        }
    }
    if repaired {
        resolve(&mut vars, &mut report)?;
        deselect_idle_bands(&mut vars);
        check = evaluate(model, &vars, big_m);
    }

    match check {
        Some((alloc, feas)) => {
            report.relaxed_not_exact = alloc
                .users
                .iter()
                .enumerate()
                .filter(|(n, u)| {
                    let p = model.qos(*n).violation_prob;
                    u.relaxed_lhs <= u.relaxed_rhs + 1e-12 && u.exact_lhs > p * (1.0 + 1e-9)
                })
                .map(|(n, _)| n)
                .collect();
            report.objective = vars.licensed();
            report.status = if feas.feasible {
                status
            } else {
                report.diagnostics.push(format!(
                    "users {:?} still violate the exact constraints after repair",
                    feas.violating_users
                ));
                SolveStatus::Infeasible
            };
            report.feasibility = feas;
            finish(report, vars, Some(alloc))
        }
        None => {
            report.diagnostics.push("allocation could not be evaluated".into());
            finish(report, vars, None)
        }
    }
}

fn evaluate(model: &ScenarioModel, vars: &Vars, big_m: f64) -> Option<(Allocation, FeasibilityReport)> {
    let alloc = Allocation::evaluate(model, vars).ok()?;
    let feas = check_feasibility(model, vars, &alloc, big_m);
    Some((alloc, feas))
}

/// A selected band that ends up with no bandwidth is reported as unselected,
/// provided the user keeps at least one band.
fn deselect_idle_bands(vars: &mut Vars) {
    for n in 0..vars.x.len() {
        for band in Band::ALL {
            let m = band.index();
            let other = 1 - m;
            if vars.x[n][m] == 1.0 && vars.a[n][m] == 0.0 && vars.x[n][other] == 1.0 && vars.a[n][other] > 0.0
            {
                vars.x[n][m] = 0.0;
            }
        }
    }
}
