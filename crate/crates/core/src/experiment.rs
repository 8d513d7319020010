//! Scenario generation, scheme runners and the parameter sweeps behind the
//! licensed-bandwidth-versus-contention and versus-delay-bound curves.

use std::io::Write;
use std::path::{Path, PathBuf};

use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{run_sas, run_sms};
use crate::capacity::UserQos;
use crate::dcf::DcfParams;
use crate::error::{Error, Result};
use crate::scenario::{Scenario, ScenarioModel, UserSpec};
use crate::scheduler::{solve_bcd, QosForm, SolveOptions, SolveStatus};
use crate::sim::node_rng;

/// Version tag written into the first line of every sweep CSV.
pub const CSV_SCHEMA: &str = "lwa-sweep-csv/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Optimal,
    Sas,
    Sms,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [Scheme::Optimal, Scheme::Sas, Scheme::Sms];

    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::Optimal => "optimal",
            Scheme::Sas => "sas",
            Scheme::Sms => "sms",
        }
    }
}

impl std::str::FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "optimal" => Ok(Scheme::Optimal),
            "sas" => Ok(Scheme::Sas),
            "sms" => Ok(Scheme::Sms),
            _ => Err(Error::invalid("scheme", format!("unknown scheme `{s}`"))),
        }
    }
}

/// Log-distance path loss with log-normal shadowing. Users are uniform in an
/// annulus around the base station; `reference_snr_db` is the mean SNR at the
/// median user distance `sqrt((r_in^2 + r_out^2) / 2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChannelModel {
    pub inner_radius: f64,
    pub outer_radius: f64,
    pub path_loss_exponent: f64,
    pub reference_snr_db: f64,
    /// Added to the licensed band's SNR.
    pub licensed_offset_db: f64,
    pub shadowing_db: f64,
    pub min_snr_db: f64,
    pub max_snr_db: f64,
}

impl Default for ChannelModel {
    fn default() -> Self {
        Self {
            inner_radius: 10.0,
            outer_radius: 100.0,
            path_loss_exponent: 3.7,
            reference_snr_db: 10.0,
            licensed_offset_db: 0.0,
            shadowing_db: 4.0,
            min_snr_db: -5.0,
            max_snr_db: 30.0,
        }
    }
}

impl ChannelModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.inner_radius > 0.0 && self.outer_radius >= self.inner_radius) {
            return Err(Error::invalid("channel", "need 0 < inner_radius <= outer_radius"));
        }
        if !(self.shadowing_db >= 0.0 && self.path_loss_exponent > 0.0) {
            return Err(Error::invalid("channel", "shadowing and path-loss exponent must be non-negative"));
        }
        if !(self.min_snr_db <= self.max_snr_db) {
            return Err(Error::invalid("channel", "min_snr_db must not exceed max_snr_db"));
        }
        Ok(())
    }

    /// Average SNRs (linear) of one user, unlicensed band first.
    pub fn draw<R: Rng>(&self, rng: &mut R) -> Result<[f64; 2]> {
        let (ri, ro) = (self.inner_radius, self.outer_radius);
        let r = (ri * ri + rng.gen::<f64>() * (ro * ro - ri * ri)).sqrt();
        let r_ref = ((ri * ri + ro * ro) / 2.0).sqrt();
        let mean_db = self.reference_snr_db - 10.0 * self.path_loss_exponent * (r / r_ref).log10();
        let shadow = Normal::new(0.0, self.shadowing_db)
            .map_err(|e| Error::invalid("shadowing_db", e.to_string()))?;
        let mut out = [0.0; 2];
        for (band, offset) in [0.0, self.licensed_offset_db].into_iter().enumerate() {
            let db = (mean_db + offset + shadow.sample(rng)).clamp(self.min_snr_db, self.max_snr_db);
            out[band] = 10f64.powf(db / 10.0);
        }
        Ok(out)
    }
}

/// Everything needed to build a scenario except the channel draw.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioTemplate {
    pub users: usize,
    pub rate: f64,
    pub delay_bound: f64,
    pub violation_prob: f64,
    pub b1: f64,
    pub frame: f64,
    pub dcf: DcfParams,
    pub channel: ChannelModel,
    /// Explicit average SNRs (linear), unlicensed then licensed, one pair per
    /// user. Overrides `users` and `channel`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub snrs: Option<Vec<[f64; 2]>>,
    /// CSV file with columns `unlicensed_snr,licensed_snr`, resolved relative
    /// to the spec file; loaded into `snrs`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub snr_file: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub big_m: Option<f64>,
}

impl Default for ScenarioTemplate {
    fn default() -> Self {
        Self {
            users: 8,
            rate: 1e6,
            delay_bound: 0.2,
            violation_prob: 0.01,
            b1: 20e6,
            frame: 1e-3,
            dcf: DcfParams::default(),
            channel: ChannelModel::default(),
            snrs: None,
            snr_file: None,
            big_m: None,
        }
    }
}

#[derive(Debug, Deserialize)]
struct SnrRow {
    unlicensed_snr: f64,
    licensed_snr: f64,
}

pub fn read_snr_file(path: &Path) -> Result<Vec<[f64; 2]>> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::invalid("snr_file", format!("{}: {e}", path.display())))?;
    reader
        .deserialize::<SnrRow>()
        .map(|row| {
            row.map(|r| [r.unlicensed_snr, r.licensed_snr])
                .map_err(|e| Error::invalid("snr_file", format!("{}: {e}", path.display())))
        })
        .collect()
}

/// Builds the scenario for `seed`. Identical `(template, seed)` give identical
/// scenarios; explicit SNRs are copied through unchanged.
pub fn generate_scenario(template: &ScenarioTemplate, seed: u64, id: &str) -> Result<Scenario> {
    template.channel.validate()?;
    let qos = UserQos {
        rate: template.rate,
        delay_bound: template.delay_bound,
        violation_prob: template.violation_prob,
    };
    let snrs = match &template.snrs {
        Some(s) => s.clone(),
        None => {
            let mut rng = node_rng(seed, u64::MAX);
            (0..template.users)
                .map(|_| template.channel.draw(&mut rng))
                .collect::<Result<Vec<_>>>()?
        }
    };
    let scenario = Scenario {
        id: id.to_string(),
        users: snrs.iter().map(|s| UserSpec::new(qos, s[0], s[1])).collect(),
        b1: template.b1,
        frame: template.frame,
        dcf: template.dcf,
        big_m: template.big_m,
    };
    scenario.validate()?;
    Ok(scenario)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVariable {
    /// Number of contending WiFi nodes `L`.
    Contenders,
    DelayBound,
    Users,
}

impl SweepVariable {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepVariable::Contenders => "contenders",
            SweepVariable::DelayBound => "delay_bound",
            SweepVariable::Users => "users",
        }
    }

    fn apply(self, template: &ScenarioTemplate, value: f64) -> Result<ScenarioTemplate> {
        let mut t = template.clone();
        let count = || {
            if value >= 0.0 && value.fract() == 0.0 {
                Ok(value as u32)
            } else {
                Err(Error::invalid("grid", format!("{} must be a whole number", self.as_str())))
            }
        };
        match self {
            SweepVariable::Contenders => t.dcf.contenders = count()?,
            SweepVariable::DelayBound => t.delay_bound = value,
            SweepVariable::Users => t.users = count()? as usize,
        }
        Ok(t)
    }
}

fn default_seeds() -> u32 {
    20
}

fn default_gamma_split() -> f64 {
    0.6
}

fn default_tol() -> f64 {
    1e-6
}

fn default_name() -> String {
    "sweep".to_string()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    #[serde(default = "default_name")]
    pub name: String,
    #[serde(default)]
    pub base: ScenarioTemplate,
    pub variable: SweepVariable,
    pub grid: Vec<f64>,
    /// Scenario seeds `seed, seed + 1, ...`; every grid point and scheme uses
    /// the same seeds, i.e. the same user placements.
    #[serde(default = "default_seeds")]
    pub seeds: u32,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "all_schemes")]
    pub schemes: Vec<Scheme>,
    #[serde(default = "default_gamma_split")]
    pub gamma_split: f64,
    /// Relative outer tolerance of the optimiser.
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default)]
    pub qos_form: QosForm,
    /// Record solver wall time in the per-run reports (breaks byte-identical reruns).
    #[serde(default)]
    pub timing: bool,
}

fn all_schemes() -> Vec<Scheme> {
    Scheme::ALL.to_vec()
}

impl ExperimentSpec {
    /// Licensed bandwidth against the number of contending WiFi nodes, 1 to 10.
    pub fn contention_sweep() -> Self {
        Self {
            name: "fig2".into(),
            base: ScenarioTemplate::default(),
            variable: SweepVariable::Contenders,
            grid: (1..=10).map(f64::from).collect(),
            seeds: default_seeds(),
            seed: 0,
            schemes: all_schemes(),
            gamma_split: default_gamma_split(),
            tol: default_tol(),
            qos_form: QosForm::PerBand,
            timing: false,
        }
    }

    /// Licensed bandwidth against the delay bound at four contenders.
    pub fn delay_sweep() -> Self {
        let mut base = ScenarioTemplate::default();
        base.dcf.contenders = 4;
        Self {
            name: "fig3".into(),
            base,
            variable: SweepVariable::DelayBound,
            grid: vec![0.02, 0.05, 0.1, 0.2, 0.5, 1.0],
            ..Self::contention_sweep()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid.is_empty() {
            return Err(Error::invalid("grid", "must not be empty"));
        }
        if self.grid.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::invalid("grid", "must be strictly increasing"));
        }
        if self.seeds == 0 {
            return Err(Error::invalid("seeds", "must be at least 1"));
        }
        if self.schemes.is_empty() {
            return Err(Error::invalid("schemes", "must not be empty"));
        }
        if !(0.0..=1.0).contains(&self.gamma_split) {
            return Err(Error::invalid("gamma_split", "must lie in [0, 1]"));
        }
        if !(self.tol > 0.0) {
            return Err(Error::invalid("tol", "must be positive"));
        }
        self.base.channel.validate()
    }

    /// Reads a spec from JSON and loads any referenced SNR file, resolving it
    /// relative to the spec's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut spec: ExperimentSpec = serde_json::from_str(&text)?;
        if let Some(file) = spec.base.snr_file.clone() {
            let file = path.parent().unwrap_or(Path::new(".")).join(file);
            spec.base.snrs = Some(read_snr_file(&file)?);
        }
        spec.validate()?;
        Ok(spec)
    }

    pub fn solve_options(&self) -> SolveOptions {
        SolveOptions {
            rel_tol: self.tol,
            form: self.qos_form,
            timing: self.timing,
            ..SolveOptions::default()
        }
    }
}

/// Result of one scheme on one scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub scenario_id: String,
    pub variable: SweepVariable,
    pub x: f64,
    pub seed: u64,
    pub scheme: Scheme,
    /// Licensed bandwidth (Hz) of a feasible result.
    pub licensed_bandwidth: Option<f64>,
    pub status: String,
    pub iterations: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    /// Full solver or baseline output.
    pub detail: serde_json::Value,
}

impl RunRecord {
    pub fn ok(&self) -> bool {
        self.licensed_bandwidth.is_some()
    }
}

/// Runs one scheme. Never fails: errors are recorded in the returned
/// `status`/`error` fields.
pub fn run_scheme(
    model: &ScenarioModel,
    scheme: Scheme,
    gamma_split: f64,
    opts: &SolveOptions,
) -> (Option<f64>, String, usize, Option<String>, serde_json::Value) {
    let outcome: Result<(Option<f64>, String, usize, serde_json::Value)> = (|| match scheme {
        Scheme::Optimal => {
            let sol = solve_bcd(model, opts)?;
            let ok = sol.report.status == SolveStatus::Converged && sol.report.feasibility.feasible;
            Ok((
                ok.then_some(sol.report.objective),
                sol.report.status.as_str().to_string(),
                sol.report.outer_iters,
                serde_json::to_value(&sol)?,
            ))
        }
        Scheme::Sas | Scheme::Sms => {
            let r = if scheme == Scheme::Sas {
                run_sas(model)?
            } else {
                run_sms(model, gamma_split)?
            };
            let ok = r.feasibility.feasible;
            Ok((
                ok.then_some(r.licensed_bandwidth),
                if ok { "feasible" } else { "infeasible" }.to_string(),
                0,
                serde_json::to_value(&r)?,
            ))
        }
    })();
    match outcome {
        Ok((l, status, it, detail)) => (l, status, it, None, detail),
        Err(e) => (None, "error".into(), 0, Some(e.to_string()), serde_json::Value::Null),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub x: f64,
    pub scheme: Scheme,
    /// Mean licensed bandwidth over successful runs (Hz).
    pub mean_licensed_hz: f64,
    pub stderr_hz: f64,
    pub mean_iterations: f64,
    pub runs: u32,
    pub failures: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepOutput {
    pub spec: ExperimentSpec,
    pub rows: Vec<SweepRow>,
    pub runs: Vec<RunRecord>,
}

impl SweepOutput {
    pub fn failures(&self) -> u32 {
        self.rows.iter().map(|r| r.failures).sum()
    }
}

/// Runs every (grid point, seed, scheme) in parallel and merges in spec order.
pub fn run_sweep(spec: &ExperimentSpec) -> Result<SweepOutput> {
    spec.validate()?;
    let opts = spec.solve_options();
    let mut jobs = Vec::new();
    for &x in &spec.grid {
        let template = spec.variable.apply(&spec.base, x)?;
        for s in 0..spec.seeds {
            let seed = spec.seed + u64::from(s);
            for &scheme in &spec.schemes {
                jobs.push((x, template.clone(), seed, scheme));
            }
        }
    }
    let runs: Vec<RunRecord> = jobs
        .into_par_iter()
        .map(|(x, template, seed, scheme)| {
            let id = format!("{}-{}{}-s{}", spec.name, spec.variable.as_str(), x, seed);
            let built = generate_scenario(&template, seed, &id).and_then(ScenarioModel::new);
            let (licensed, status, iterations, error, detail) = match built {
                Ok(model) => run_scheme(&model, scheme, spec.gamma_split, &opts),
                Err(e) => (None, "error".into(), 0, Some(e.to_string()), serde_json::Value::Null),
            };
            RunRecord {
                scenario_id: id,
                variable: spec.variable,
                x,
                seed,
                scheme,
                licensed_bandwidth: licensed,
                status,
                iterations,
                error,
                detail,
            }
        })
        .collect();

    let mut rows = Vec::new();
    for &x in &spec.grid {
        for &scheme in &spec.schemes {
            let mine: Vec<&RunRecord> = runs.iter().filter(|r| r.x == x && r.scheme == scheme).collect();
            let vals: Vec<f64> = mine.iter().filter_map(|r| r.licensed_bandwidth).collect();
            let n = vals.len() as f64;
            let mean = if vals.is_empty() { f64::NAN } else { vals.iter().sum::<f64>() / n };
            let var = if vals.len() > 1 {
                vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
            } else {
                0.0
            };
            rows.push(SweepRow {
                x,
                scheme,
                mean_licensed_hz: mean,
                stderr_hz: (var / n.max(1.0)).sqrt(),
                mean_iterations: mine.iter().map(|r| r.iterations as f64).sum::<f64>() / mine.len() as f64,
                runs: mine.len() as u32,
                failures: (mine.len() - vals.len()) as u32,
            });
        }
    }
    Ok(SweepOutput {
        spec: spec.clone(),
        rows,
        runs,
    })
}

/// Writes the summary rows as RFC 4180 CSV preceded by a `#` schema line.
pub fn write_sweep_csv<W: Write>(out: W, variable: SweepVariable, rows: &[SweepRow]) -> Result<()> {
    let mut out = out;
    writeln!(
        out,
        "# schema={CSV_SCHEMA}; {},scheme,mean_licensed_hz,stderr_hz,mean_iterations,runs,failures",
        variable.as_str()
    )?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        variable.as_str(),
        "scheme",
        "mean_licensed_hz",
        "stderr_hz",
        "mean_iterations",
        "runs",
        "failures",
    ])
    ?;
    for r in rows {
        w.write_record([
            r.x.to_string(),
            r.scheme.as_str().to_string(),
            r.mean_licensed_hz.to_string(),
            r.stderr_hz.to_string(),
            r.mean_iterations.to_string(),
            r.runs.to_string(),
            r.failures.to_string(),
        ])
        ?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `<dir>/<variable>.csv`, `<dir>/summary.json` and one JSON report
/// per run under `<dir>/runs/`.
pub fn write_sweep(dir: &Path, output: &SweepOutput) -> Result<()> {
    std::fs::create_dir_all(dir.join("runs"))?;
    let csv_path = dir.join(format!("{}.csv", output.spec.name));
    write_sweep_csv(
        std::io::BufWriter::new(std::fs::File::create(csv_path)?),
        output.spec.variable,
        &output.rows,
    )?;
    let summary = serde_json::json!({
        "spec": output.spec,
        "rows": output.rows,
        "trend": TrendSummary::new(&output.rows),
    });
    std::fs::write(dir.join("summary.json"), serde_json::to_string_pretty(&summary)? + "\n")?;
    for r in &output.runs {
        let name = format!("{}-{}.json", r.scenario_id, r.scheme.as_str());
        std::fs::write(dir.join("runs").join(name), serde_json::to_string_pretty(r)? + "\n")?;
    }
    Ok(())
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut r = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            r[k] = avg;
        }
        i = j + 1;
    }
    r
}

/// Spearman rank correlation with average ranks for ties. `NaN` when either
/// side is constant.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    let (rx, ry) = (ranks(x), ranks(y));
    let n = rx.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    sxy / (sxx * syy).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeTrend {
    pub scheme: Scheme,
    pub spearman: f64,
    /// Largest decrease between neighbouring grid points (Hz, >= 0).
    pub worst_decrease: f64,
    /// Largest increase between neighbouring grid points (Hz, >= 0).
    pub worst_increase: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendSummary {
    pub schemes: Vec<SchemeTrend>,
    /// Per grid point: `optimal - min(sas, sms)` of the means (Hz).
    pub dominance_margin: Vec<[f64; 2]>,
    /// Largest relative saving of the optimiser over each baseline (%).
    pub max_gain_vs_sas_pct: f64,
    pub max_gain_vs_sms_pct: f64,
}

impl TrendSummary {
    pub fn new(rows: &[SweepRow]) -> Self {
        let mut xs: Vec<f64> = rows.iter().map(|r| r.x).collect();
        xs.dedup();
        let mean = |x: f64, s: Scheme| {
            rows.iter()
                .find(|r| r.x == x && r.scheme == s)
                .map(|r| r.mean_licensed_hz)
        };
        let mut schemes = Vec::new();
        for s in Scheme::ALL {
            let ys: Vec<f64> = xs.iter().filter_map(|&x| mean(x, s)).collect();
            if ys.len() != xs.len() {
                continue;
            }
            let steps = ys.windows(2).map(|w| w[1] - w[0]);
            schemes.push(SchemeTrend {
                scheme: s,
                spearman: spearman(&xs, &ys),
                worst_decrease: steps.clone().map(|d| -d).fold(0.0, f64::max),
                worst_increase: steps.fold(0.0, f64::max),
            });
        }
        let mut dominance_margin = Vec::new();
        let (mut gain_sas, mut gain_sms) = (0.0_f64, 0.0_f64);
        for &x in &xs {
            let (Some(o), sas, sms) = (mean(x, Scheme::Optimal), mean(x, Scheme::Sas), mean(x, Scheme::Sms)) else {
                continue;
            };
            let best = sas.unwrap_or(f64::INFINITY).min(sms.unwrap_or(f64::INFINITY));
            if best.is_finite() {
                dominance_margin.push([x, o - best]);
            }
            if let Some(b) = sas.filter(|&b| b > 0.0) {
                gain_sas = gain_sas.max(100.0 * (b - o) / b);
            }
            if let Some(b) = sms.filter(|&b| b > 0.0) {
                gain_sms = gain_sms.max(100.0 * (b - o) / b);
            }
        }
        Self {
            schemes,
            dominance_margin,
            max_gain_vs_sas_pct: gain_sas,
            max_gain_vs_sms_pct: gain_sms,
        }
    }

    pub fn scheme(&self, s: Scheme) -> Option<&SchemeTrend> {
        self.schemes.iter().find(|t| t.scheme == s)
    }
}
