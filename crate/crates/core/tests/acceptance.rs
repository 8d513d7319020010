//! Acceptance harness. Prints one PASS/FAIL line per criterion.
//!
//! Runs without libtest so the report is always visible. A failing criterion
//! is reported, not panicked on; set `LWA_ACCEPTANCE_STRICT=1` to make any FAIL
//! exit non-zero. Criterion numbers given as arguments select a subset.

use std::sync::Arc;
use std::time::Instant;

use lwa_core::capacity::{ec_licensed, ec_unlicensed, Band, BandLink, UserQos};
use lwa_core::dcf::{toff_pgf_eval, DcfModel, DcfParams};
use lwa_core::experiment::{run_sweep, write_sweep_csv, ChannelModel, ExperimentSpec, Scheme, SweepRow, TrendSummary};
use lwa_core::scenario::{check_feasibility, Allocation, Scenario, ScenarioModel, UserSpec, Vars};
use lwa_core::scheduler::{solve_bcd, QosForm, SolveOptions, SolveStatus};
use lwa_core::sim::{simulate_dcf, SimConfig};
use lwa_core::validation::{audit_queue, check_contention, ValidationOptions, QUEUE_FACTOR};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};

// Tolerances as pinned by the acceptance contract.
const C1_SLOTS: u64 = 1_000_000;
const C1_SEED: u64 = 1;
const C1_SECONDS_PER_L: f64 = 300.0;
const C2_PGF_TOL: f64 = 1e-12;
const C2_ROUND_TRIP_TOL: f64 = 1e-9;
const C2_SECONDS: f64 = 1.0;
const C3_THETA: f64 = 1e-8;
const C3_REL_TOL: f64 = 0.01;
const C3_MC_SAMPLES: usize = 10_000_000;
const C4_TOL: f64 = 1e-8;
const C4_DRAWS: usize = 20;
const C4_POINTS: usize = 100;
const C5_SCENARIOS: u64 = 100;
const C5_BINARITY: f64 = 1e-3;
const C5_FEAS_TOL: f64 = 1e-6;
const C6_SCENARIOS: u64 = 20;
const C6_REL_GAP: f64 = 0.02;
const C6_GRID: usize = 1000;
const C6_SECONDS: f64 = 1800.0;
const C7_SPEARMAN: f64 = 0.9;
const C7_SECONDS: f64 = 7200.0;
/// Means over seeds are compared with the solver's own feasibility tolerance.
const C7_DOMINANCE_REL: f64 = 1e-6;
const C7_DOMINANCE_ABS_HZ: f64 = 1.0;
const C8_EXPONENT: f64 = 3.0;

struct Verdict {
    id: u8,
    title: &'static str,
    pass: bool,
    summary: String,
}

fn note(line: impl AsRef<str>) {
    println!("    {}", line.as_ref());
}

fn pct(x: f64) -> String {
    format!("{:.3}%", 100.0 * x)
}

fn rel_err(value: f64, reference: f64) -> f64 {
    (value - reference).abs() / reference.abs()
}

// ---------------------------------------------------------------------------

fn criterion_1() -> Verdict {
    let mut pass = true;
    let mut worst = (0.0_f64, 0.0_f64, 0.0_f64);
    for l in [2, 5, 10] {
        let params = DcfParams::default().with_contenders(l);
        let clock = Instant::now();
        let c = check_contention(params, C1_SLOTS, C1_SEED).expect("simulation runs");
        let secs = clock.elapsed().as_secs_f64();
        let max_z = c.bins.iter().map(|b| b.z.abs()).fold(0.0, f64::max);
        let ok = c.contention_ok && c.mean_ok && c.histogram_ok && secs <= C1_SECONDS_PER_L;
        pass &= ok;
        worst.0 = worst.0.max(c.tau.rel_err.max(c.p_c.rel_err));
        worst.1 = worst.1.max(c.mean_off_time.rel_err);
        worst.2 = worst.2.max(max_z);
        note(format!(
            "L={l:<2} W0={} K={}: tau {:.5} vs {:.5} ({}), p_c {:.5} vs {:.5} ({}), E[t_off] {:.4e} vs {:.4e} s ({}), max |z| {:.2}, {:.1} s -> {}",
            params.w0,
            params.max_attempts,
            c.tau.model,
            c.tau.sim,
            pct(c.tau.rel_err),
            c.p_c.model,
            c.p_c.sim,
            pct(c.p_c.rel_err),
            c.mean_off_time.model,
            c.mean_off_time.sim,
            pct(c.mean_off_time.rel_err),
            max_z,
            secs,
            if ok { "ok" } else { "fails" }
        ));
    }
    Verdict {
        id: 1,
        title: "analytic vs simulated contention",
        pass,
        summary: format!(
            "worst (tau, p_c) err {} (tol 2%), worst mean off-time err {} (tol 3%), worst bin |z| {:.2} (tol 3)",
            pct(worst.0),
            pct(worst.1),
            worst.2
        ),
    }
}

fn criterion_2() -> Verdict {
    let clock = Instant::now();
    let mut pass = true;
    let (mut pgf_err, mut f0_err, mut trip_err) = (0.0_f64, 0.0_f64, 0.0_f64);
    let mut monotone = true;
    let mut convex = true;
    for l in 1..=10 {
        let model = DcfModel::new(DcfParams::default().with_contenders(l)).unwrap();
        pgf_err = pgf_err.max((toff_pgf_eval(1.0, model.params(), model.point()).unwrap() - 1.0).abs());
        f0_err = f0_err.max(model.f(0.0).abs());
        // Grid in units of the mean cycle length so every L sees the same shape.
        let scale = model.f_derivatives(0.0).1;
        let xs: Vec<f64> = (0..100).map(|i| (-10.0 + 20.0 * i as f64 / 99.0) / scale).collect();
        let ys: Vec<f64> = xs.iter().map(|&x| model.f(x)).collect();
        for (&x, &y) in xs.iter().zip(&ys) {
            let back = model.f_inverse(y).unwrap();
            trip_err = trip_err.max((back - x).abs() / x.abs().max(1.0 / scale));
        }
        monotone &= ys.windows(2).all(|w| w[1] > w[0]);
        let span = ys.iter().fold(0.0_f64, |m, y| m.max(y.abs()));
        convex &= ys.windows(3).all(|w| w[2] - 2.0 * w[1] + w[0] >= -1e-12 * span);
    }
    let secs = clock.elapsed().as_secs_f64();
    pass &= pgf_err <= C2_PGF_TOL && f0_err <= C2_PGF_TOL && trip_err <= C2_ROUND_TRIP_TOL;
    pass &= monotone && convex && secs < C2_SECONDS;
    Verdict {
        id: 2,
        title: "transform identities",
        pass,
        summary: format!(
            "|t_off(1)-1| {pgf_err:.1e}, |F(0)| {f0_err:.1e}, round trip {trip_err:.1e} (scaled), monotone {monotone}, convex {convex}, {secs:.2} s for L=1..10"
        ),
    }
}

fn criterion_3() -> Verdict {
    let mut pass = true;
    let beta = 20e6;
    let mut worst_u = 0.0_f64;
    for l in [2, 5, 10] {
        let model = Arc::new(DcfModel::new(DcfParams::default().with_contenders(l)).unwrap());
        let t_s = model.params().t_s;
        for snr in [0.5_f64, 10.0, 300.0] {
            let limit = beta * (1.0 + snr).log2() * t_s / (t_s + model.mean_off_time());
            let ec = ec_unlicensed(beta, C3_THETA, snr, &model).unwrap();
            worst_u = worst_u.max(rel_err(ec, limit));
        }
    }
    note(format!("band 1: worst |EC(theta=1e-8) - time-share rate| / rate = {}", pct(worst_u)));
    pass &= worst_u <= C3_REL_TOL;

    let frame = 1e-3;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut worst_l, mut worst_mc) = (0.0_f64, 0.0_f64);
    for snr in [0.5, 10.0, 300.0] {
        let spectral: Vec<f64> = (0..C3_MC_SAMPLES)
            .map(|_| {
                let g: f64 = Exp1.sample(&mut rng);
                (1.0 + snr * g).log2()
            })
            .collect();
        let n = spectral.len() as f64;
        let ergodic = beta * spectral.iter().sum::<f64>() / n;
        let ec = ec_licensed(beta, C3_THETA, snr, frame).unwrap();
        worst_l = worst_l.max(rel_err(ec, ergodic));
        // Exponents of order one per frame, where EC sits well below the mean.
        for bits_exponent in [0.3, 3.0] {
            let theta = bits_exponent / (frame * beta);
            let mgf = spectral.iter().map(|s| (-bits_exponent * s).exp()).sum::<f64>() / n;
            let mc = -mgf.ln() / (theta * frame);
            let quad = ec_licensed(beta, theta, snr, frame).unwrap();
            let e = rel_err(quad, mc);
            worst_mc = worst_mc.max(e);
            note(format!(
                "band 2: snr {snr:>5}, theta T beta {bits_exponent}: quadrature {quad:.6e} vs Monte Carlo {mc:.6e} ({})",
                pct(e)
            ));
        }
    }
    note(format!("band 2: worst |EC(theta=1e-8) - ergodic rate| / rate = {}", pct(worst_l)));
    pass &= worst_l <= C3_REL_TOL && worst_mc <= C3_REL_TOL;
    Verdict {
        id: 3,
        title: "effective capacity limits",
        pass,
        summary: format!(
            "band 1 limit err {}, band 2 limit err {}, quadrature vs 1e7-sample MC err {} (tol 1%)",
            pct(worst_u),
            pct(worst_l),
            pct(worst_mc)
        ),
    }
}

fn criterion_4() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = [f64::NEG_INFINITY; 2];
    let a = 1e5;
    for _ in 0..C4_DRAWS {
        let l = rng.gen_range(1..=10);
        let snr = 10f64.powf(rng.gen_range(-0.5..3.0));
        let frame = 10f64.powf(rng.gen_range(-3.5..-2.0));
        let model = Arc::new(DcfModel::new(DcfParams::default().with_contenders(l)).unwrap());
        let links = [
            BandLink::Unlicensed(lwa_core::capacity::UnlicensedLink::new(model, snr).unwrap()),
            BandLink::Licensed(lwa_core::capacity::LicensedLink::new(snr, frame).unwrap()),
        ];
        for (m, link) in links.iter().enumerate() {
            let top = link.delta_for_decay(rng.gen_range(20.0..500.0)).unwrap();
            let c: Vec<f64> = (0..C4_POINTS)
                .map(|i| a * link.decay(top * i as f64 / (C4_POINTS - 1) as f64).unwrap())
                .collect();
            let span = c.iter().fold(0.0_f64, |s, v| s.max(v.abs()));
            let second = c
                .windows(3)
                .map(|w| (w[2] - 2.0 * w[1] + w[0]) / span)
                .fold(f64::NEG_INFINITY, f64::max);
            worst[m] = worst[m].max(second);
        }
    }
    Verdict {
        id: 4,
        title: "concavity in delta",
        pass: worst.iter().all(|&w| w <= C4_TOL),
        summary: format!(
            "largest second difference / max C over {C4_DRAWS} draws x {C4_POINTS} points: band 1 {:.2e}, band 2 {:.2e} (tol 1e-8)",
            worst[0], worst[1]
        ),
    }
}

/// Random scenario whose unlicensed budget covers a random fraction of what
/// all users would need on that band alone, so the budget binds in varied ways.
fn random_scenario(rng: &mut ChaCha8Rng, users: usize, id: String) -> Scenario {
    let channel = ChannelModel::default();
    let dcf = DcfParams::default().with_contenders(rng.gen_range(1..=10));
    let delay_bound = [0.05, 0.1, 0.2, 0.5][rng.gen_range(0..4)];
    let specs: Vec<UserSpec> = (0..users)
        .map(|_| {
            let qos = UserQos {
                rate: 10f64.powf(rng.gen_range(5.7..6.3)),
                delay_bound,
                violation_prob: 0.01,
            };
            let snr = channel.draw(rng).unwrap();
            UserSpec::new(qos, snr[0], snr[1])
        })
        .collect();
    let mut scenario = Scenario {
        id,
        users: specs,
        b1: 1.0,
        frame: 1e-3,
        dcf,
        big_m: None,
    };
    let model = ScenarioModel::new(scenario.clone()).unwrap();
    let need: f64 = (0..users)
        .map(|n| {
            let d = model.single_band_delta(n, Band::Unlicensed).unwrap();
            model.qos(n).rate * d / model.link(n, Band::Unlicensed).decay(d).unwrap()
        })
        .sum();
    scenario.b1 = need * rng.gen_range(0.1..1.2);
    scenario
}

fn criterion_5() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let opts = SolveOptions::default();
    let (mut converged, mut other, mut bad) = (0, 0, Vec::new());
    let (mut worst_rise, mut worst_bin, mut worst_feas) = (0.0_f64, 0.0_f64, 0.0_f64);
    for i in 0..C5_SCENARIOS {
        let scenario = random_scenario(&mut rng, 4, format!("c5-{i}"));
        let model = ScenarioModel::new(scenario).unwrap();
        let sol = solve_bcd(&model, &opts).unwrap();
        if sol.report.status != SolveStatus::Converged {
            other += 1;
            note(format!("scenario {i}: status {}", sol.report.status.as_str()));
            continue;
        }
        converged += 1;
        let trace = &sol.report.objective_trace;
        let rise = trace
            .windows(2)
            .map(|w| (w[1] - w[0]) / w[0].abs().max(1.0))
            .fold(0.0, f64::max);
        let alloc = Allocation::evaluate(&model, &sol.vars).unwrap();
        let f = check_feasibility(&model, &sol.vars, &alloc, sol.report.big_m);
        let feas = f.rate.max(f.budget).max(f.big_m).max(f.qos);
        let binary = sol.vars.x.iter().flatten().all(|&x| x == 0.0 || x == 1.0);
        worst_rise = worst_rise.max(rise);
        worst_bin = worst_bin.max(sol.report.binarity_residual);
        worst_feas = worst_feas.max(feas);
        if rise > 1e-9 || sol.report.binarity_residual >= C5_BINARITY || feas > C5_FEAS_TOL || !binary {
            bad.push(i);
        }
    }
    Verdict {
        id: 5,
        title: "optimizer soundness",
        pass: bad.is_empty() && converged > 0,
        summary: format!(
            "{converged}/{C5_SCENARIOS} converged ({other} other); worst relative objective rise {worst_rise:.1e}, worst binarity residual {worst_bin:.1e} (tol 1e-3), worst exact-feasibility violation {worst_feas:.1e} (tol 1e-6); failing scenarios {bad:?}"
        ),
    }
}

/// Bandwidth per unit of capacity, `delta / decay`, tabulated in `ln decay`.
struct BandwidthPerBit {
    ln_lo: f64,
    step: f64,
    h: Vec<f64>,
}

impl BandwidthPerBit {
    fn new(link: &BandLink, lo: f64, hi: f64, points: usize) -> Self {
        let (ln_lo, ln_hi) = (lo.ln(), hi.ln());
        let step = (ln_hi - ln_lo) / (points - 1) as f64;
        let h = (0..points)
            .map(|i| {
                let decay = (ln_lo + step * i as f64).exp();
                link.delta_for_decay(decay).unwrap() / decay
            })
            .collect();
        Self { ln_lo, step, h }
    }

    fn at(&self, decay: f64) -> f64 {
        let u = ((decay.ln() - self.ln_lo) / self.step).max(0.0);
        let i = (u.floor() as usize).min(self.h.len() - 2);
        let t = (u - i as f64).min(1.0);
        self.h[i] * (1.0 - t) + self.h[i + 1] * t
    }
}

/// One way a user can meet its requirements: unlicensed and licensed
/// bandwidth, licensed share of the rate and the two band violation levels.
#[derive(Clone, Copy)]
struct OraclePoint {
    unlicensed: f64,
    licensed: f64,
    share: f64,
    e: [f64; 2],
}

/// Lower-left frontier over all ways one user can meet its rate and the
/// exact aggregate delay constraint (or the per-band one when `!exact`).
fn user_frontier(model: &ScenarioModel, n: usize, exact: bool) -> Vec<OraclePoint> {
    let qos = *model.qos(n);
    let (p, d, r) = (qos.violation_prob, qos.delay_bound, qos.rate);
    let lo = 1e-7 / d;
    let hi = -(p / C6_GRID as f64).ln() / d * 1.01;
    let tab = [
        BandwidthPerBit::new(model.link(n, Band::Unlicensed), lo, hi, 4001),
        BandwidthPerBit::new(model.link(n, Band::Licensed), lo, hi, 4001),
    ];
    let point = |share: f64, e: [f64; 2]| OraclePoint {
        unlicensed: r * (1.0 - share) * tab[0].at(-e[0].ln() / d),
        licensed: r * share * tab[1].at(-e[1].ln() / d),
        share,
        e,
    };
    let mut pts = vec![point(0.0, [p, p]), point(1.0, [p, p])];
    let g = C6_GRID as f64;
    for i in 1..C6_GRID {
        let s = i as f64 / g;
        if !exact {
            pts.push(point(s, [p, p]));
            continue;
        }
        // w: share of the capacity-weighted violation budget carried by band 2.
        for j in 1..C6_GRID {
            let w = j as f64 / g;
            let e = [(1.0 - w) * p / (1.0 - s), w * p / s];
            if e[0] < 1.0 && e[1] < 1.0 {
                pts.push(point(s, e));
            }
        }
    }
    pts.sort_by(|a, b| a.unlicensed.total_cmp(&b.unlicensed).then(a.licensed.total_cmp(&b.licensed)));
    let mut frontier: Vec<OraclePoint> = Vec::new();
    for pt in pts {
        if frontier.last().is_none_or(|last| pt.licensed < last.licensed) {
            frontier.push(pt);
        }
    }
    frontier
}

fn two_user_oracle(model: &ScenarioModel, exact: bool) -> (f64, [OraclePoint; 2]) {
    let b1 = model.scenario().b1;
    let f0 = user_frontier(model, 0, exact);
    let f1 = user_frontier(model, 1, exact);
    let mut best = (f64::INFINITY, [f0[0], f1[0]]);
    for q0 in &f0 {
        if q0.unlicensed > b1 {
            break;
        }
        let k = f1.partition_point(|q| q.unlicensed <= b1 - q0.unlicensed);
        if k > 0 && q0.licensed + f1[k - 1].licensed < best.0 {
            best = (q0.licensed + f1[k - 1].licensed, [*q0, f1[k - 1]]);
        }
    }
    best
}

/// Rebuilds the oracle allocation as decision variables and scores it with the
/// library's exact feasibility check: worst relative violation of rate, budget
/// and delay constraints.
fn oracle_residual(model: &ScenarioModel, pts: &[OraclePoint; 2]) -> f64 {
    let mut vars = Vars::zeros(2);
    for (n, pt) in pts.iter().enumerate() {
        let qos = model.qos(n);
        for band in Band::ALL {
            let m = band.index();
            let rate = qos.rate * if m == 0 { 1.0 - pt.share } else { pt.share };
            if rate <= 0.0 {
                continue;
            }
            let decay = -pt.e[m].ln() / qos.delay_bound;
            vars.x[n][m] = 1.0;
            vars.delta[n][m] = model.link(n, band).delta_for_decay(decay).unwrap();
            vars.a[n][m] = rate / decay;
        }
    }
    let big_m = (0..2)
        .flat_map(|n| Band::ALL.map(|b| vars.beta(n, b)))
        .fold(model.scenario().b1, f64::max);
    let alloc = Allocation::evaluate(model, &vars).unwrap();
    let f = check_feasibility(model, &vars, &alloc, big_m);
    f.rate.max(f.budget).max(f.qos)
}

fn criterion_6() -> Verdict {
    let clock = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let opts = SolveOptions::default();
    let summed_opts = SolveOptions {
        form: QosForm::Summed,
        ..SolveOptions::default()
    };
    let mut pass = true;
    let (mut worst_exact, mut worst_band) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    let mut worst_residual = 0.0_f64;
    for i in 0..C6_SCENARIOS {
        let scenario = random_scenario(&mut rng, 2, format!("c6-{i}"));
        let model = ScenarioModel::new(scenario).unwrap();
        let sol = solve_bcd(&model, &opts).unwrap();
        let bcd = sol.report.objective;
        let (exact, exact_pts) = two_user_oracle(&model, true);
        let (per_band, _) = two_user_oracle(&model, false);
        let residual = oracle_residual(&model, &exact_pts);
        worst_residual = worst_residual.max(residual);
        let summed = solve_bcd(&model, &summed_opts).unwrap();
        let gap = |oracle: f64| (bcd - oracle) / oracle.max(C7_DOMINANCE_ABS_HZ);
        let ok = sol.report.feasibility.feasible && bcd <= exact * (1.0 + C6_REL_GAP) + C7_DOMINANCE_ABS_HZ;
        pass &= ok;
        worst_exact = worst_exact.max(gap(exact));
        worst_band = worst_band.max(gap(per_band));
        note(format!(
            "scenario {i:>2} (L={}, B1 {:.3e} Hz): BCD {bcd:.6e}, exact oracle {exact:.6e} (gap {}, residual {residual:.1e}), per-band oracle {per_band:.6e} (gap {}), summed-form BCD {:.6e} (exact-feasible {}) -> {}",
            model.scenario().dcf.contenders,
            model.scenario().b1,
            pct(gap(exact)),
            pct(gap(per_band)),
            summed.report.objective,
            summed.report.feasibility.feasible,
            if ok { "ok" } else { "fails" }
        ));
    }
    let secs = clock.elapsed().as_secs_f64();
    pass &= secs <= C6_SECONDS;
    Verdict {
        id: 6,
        title: "two-user optimality",
        pass,
        summary: format!(
            "worst gap to exact-constraint oracle {} (tol 2%), worst gap to per-band oracle {}, oracle points re-checked exactly (worst residual {worst_residual:.1e}), {secs:.0} s",
            pct(worst_exact),
            pct(worst_band)
        ),
    }
}

fn row_mean(rows: &[SweepRow], x: f64, s: Scheme) -> Option<f64> {
    rows.iter()
        .find(|r| r.x == x && r.scheme == s)
        .map(|r| r.mean_licensed_hz)
}

/// Checks one sweep; `sign` is +1 for a nondecreasing and -1 for a
/// nonincreasing trend.
fn sweep_check(spec: &ExperimentSpec, sign: f64) -> (bool, TrendSummary) {
    let out = run_sweep(spec).unwrap();
    let trend = TrendSummary::new(&out.rows);
    let mut pass = true;
    for t in &trend.schemes {
        let ok = sign * t.spearman > C7_SPEARMAN;
        pass &= ok;
        note(format!(
            "{}: {}: Spearman {:.4}, worst step against the trend {:.3e} Hz -> {}",
            spec.name,
            t.scheme.as_str(),
            t.spearman,
            if sign > 0.0 { t.worst_decrease } else { t.worst_increase },
            if ok { "ok" } else { "fails" }
        ));
    }
    let mut xs: Vec<f64> = out.rows.iter().map(|r| r.x).collect();
    xs.dedup();
    for x in xs {
        let o = row_mean(&out.rows, x, Scheme::Optimal).unwrap_or(f64::NAN);
        let best = [Scheme::Sas, Scheme::Sms]
            .iter()
            .filter_map(|&s| row_mean(&out.rows, x, s))
            .fold(f64::INFINITY, f64::min);
        let ok = o <= best * (1.0 + C7_DOMINANCE_REL) + C7_DOMINANCE_ABS_HZ;
        pass &= ok;
        if !ok {
            note(format!("{}: x={x}: optimal {o:.6e} Hz above best baseline {best:.6e} Hz", spec.name));
        }
    }
    note(format!(
        "{}: {} runs, {} failed; max saving vs SAS {:.2}%, vs SMS {:.2}%",
        spec.name,
        out.runs.len(),
        out.failures(),
        trend.max_gain_vs_sas_pct,
        trend.max_gain_vs_sms_pct
    ));
    (pass && out.failures() == 0, trend)
}

fn criterion_7() -> Verdict {
    let clock = Instant::now();
    let (p2, t2) = sweep_check(&ExperimentSpec::contention_sweep(), 1.0);
    let (p3, t3) = sweep_check(&ExperimentSpec::delay_sweep(), -1.0);
    let secs = clock.elapsed().as_secs_f64();
    note("published savings for comparison only: up to 16.89% (contention sweep), 15.07% vs SMS and 5.38% vs SAS (delay sweep)");
    Verdict {
        id: 7,
        title: "figure trends and dominance",
        pass: p2 && p3 && secs <= C7_SECONDS,
        summary: format!(
            "contention sweep {}, delay sweep {}; savings vs SAS/SMS {:.2}%/{:.2}% and {:.2}%/{:.2}%; {secs:.0} s",
            if p2 { "ok" } else { "fails" },
            if p3 { "ok" } else { "fails" },
            t2.max_gain_vs_sas_pct,
            t2.max_gain_vs_sms_pct,
            t3.max_gain_vs_sas_pct,
            t3.max_gain_vs_sms_pct
        ),
    }
}

fn criterion_8() -> Verdict {
    let opts = ValidationOptions {
        queue_exponent: C8_EXPONENT,
        ..ValidationOptions::default()
    };
    let a = audit_queue(&opts).unwrap();
    note(format!(
        "L={}, snr {}, beta {:.1e} Hz, D {} s, theta {:.3e}, EC {:.4e} bit/s, busy fraction {:.3}",
        a.contenders, a.gamma_bar, a.beta, a.delay_bound, a.theta, a.effective_capacity, a.busy_prob
    ));
    Verdict {
        id: 8,
        title: "delay-violation audit",
        pass: a.ok,
        summary: format!(
            "simulated {:.4e} vs predicted {:.4e}, ratio {:.3} (band [1/{QUEUE_FACTOR}, {QUEUE_FACTOR}])",
            a.simulated, a.predicted, a.ratio
        ),
    }
}

fn sweep_bytes(spec: &ExperimentSpec, threads: usize) -> (Vec<u8>, Vec<u8>) {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
    let out = pool.install(|| run_sweep(spec)).unwrap();
    let mut csv = Vec::new();
    write_sweep_csv(&mut csv, spec.variable, &out.rows).unwrap();
    (csv, serde_json::to_vec(&out.runs).unwrap())
}

fn criterion_9() -> Verdict {
    let template = ExperimentSpec::contention_sweep().base;
    let scenario = lwa_core::experiment::generate_scenario(&template, 9, "c9").unwrap();
    let solve = || {
        let model = ScenarioModel::new(scenario.clone()).unwrap();
        serde_json::to_vec(&solve_bcd(&model, &SolveOptions::default()).unwrap()).unwrap()
    };
    let solve_same = solve() == solve();

    let cfg = SimConfig {
        dcf: DcfParams::default().with_contenders(5),
        horizon_slots: 200_000,
        seed: 9,
        warmup_slots: 1_000,
    };
    let simulate = || {
        let (stats, samples) = simulate_dcf(&cfg).unwrap();
        let bits: Vec<u64> = samples.iter().map(|s| s.to_bits()).collect();
        (serde_json::to_vec(&stats).unwrap(), bits)
    };
    let sim_same = simulate() == simulate();

    let mut spec = ExperimentSpec::contention_sweep();
    spec.grid = vec![2.0, 6.0];
    spec.seeds = 3;
    let first = sweep_bytes(&spec, 1);
    let sweep_same = first == sweep_bytes(&spec, 1) && first == sweep_bytes(&spec, 4);
    Verdict {
        id: 9,
        title: "determinism",
        pass: solve_same && sim_same && sweep_same,
        summary: format!(
            "solve report identical {solve_same}, simulation stats and samples identical {sim_same}, sweep CSV and run reports identical across reruns and 1/4 workers {sweep_same}"
        ),
    }
}

fn main() {
    let selected: Vec<u8> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let criteria: [(u8, fn() -> Verdict); 9] = [
        (1, criterion_1),
        (2, criterion_2),
        (3, criterion_3),
        (4, criterion_4),
        (5, criterion_5),
        (6, criterion_6),
        (7, criterion_7),
        (8, criterion_8),
        (9, criterion_9),
    ];
    let mut verdicts = Vec::new();
    for (id, run) in criteria {
        if !selected.is_empty() && !selected.contains(&id) {
            continue;
        }
        println!("criterion {id}:");
        let v = run();
        println!("{}", line(&v));
        verdicts.push(v);
    }
    println!();
    println!("acceptance summary");
    for v in &verdicts {
        println!("{}", line(v));
    }
    let failed = verdicts.iter().filter(|v| !v.pass).count();
    println!("{} passed, {failed} failed", verdicts.len() - failed);
    if failed > 0 && std::env::var_os("LWA_ACCEPTANCE_STRICT").is_some_and(|v| v == "1") {
        std::process::exit(1);
    }
}

fn line(v: &Verdict) -> String {
    format!(
        "[{}] criterion {} {}: {}",
        if v.pass { "PASS" } else { "FAIL" },
        v.id,
        v.title,
        v.summary
    )
}
