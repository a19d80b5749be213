//! Experiment runner behind the `shiftcocycle` CLI.
//!
//! A run is (command, effective config). Every report embeds the SHA-256 of the effective
//! config and the master seed; output bytes do not depend on the worker count.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cocycle::{
    build_a_sigma_1, build_a_sigma_eta, build_bk, build_lk, exchange_check, fiber_bunching_margin,
    LocallyConstantCocycle,
};
use crate::error::{Error, Result};
use crate::exponent::{critical_weight, lyap_both_mc, lyap_diag_closed_form, ExponentEstimate};
use crate::induction::{abramov_check, cj_decay, kac_birkhoff};
use crate::mat2::{op_norm, rotation};
use crate::modulus::{
    analytic_bk_bound, analytic_lk_cases, bk_seminorm_bound, norm_distance, norm_distance_or_sampled, ModulusSpec,
};
use crate::shift::{make_wk, make_zk, Cylinder, LazyPoint};
use crate::stats::{derive_seed, mean_stderr};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Exponent,
    NormSweep,
    Boundary,
    Exchange,
    Induced,
    Kac,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Exponent => "exponent",
            Command::NormSweep => "norm-sweep",
            Command::Boundary => "boundary",
            Command::Exchange => "exchange",
            Command::Induced => "induced",
            Command::Kac => "kac",
        }
    }

    fn default_scenario(&self) -> &'static str {
        match self {
            Command::Exponent => "diagonal",
            Command::NormSweep => "bk",
            Command::Boundary => "eta-sweep",
            Command::Exchange => "exchange",
            Command::Induced => "cj",
            Command::Kac => "zk",
        }
    }

    fn scenarios(&self) -> &'static [&'static str] {
        match self {
            Command::Exponent => &["diagonal", "perturbation", "custom"],
            Command::NormSweep => &["bk", "lk"],
            Command::Boundary => &["eta-sweep"],
            Command::Exchange => &["exchange", "fiber-bunching"],
            Command::Induced => &["cj", "abramov"],
            Command::Kac => &["zk", "wk"],
        }
    }
}

/// All experiment parameters. Omitted fields take the defaults below; grids left unset take a
/// per-command default, while an explicitly empty grid is rejected.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: Option<String>,
    pub seed: u64,
    pub sigma: f64,
    pub eta: f64,
    pub p: f64,
    pub rho: f64,
    pub beta: f64,
    pub delta: f64,
    pub alpha: f64,
    pub k: usize,
    pub k_grid: Option<Vec<usize>>,
    pub eta_grid: Option<Vec<f64>>,
    pub sigma_grid: Option<Vec<f64>>,
    pub alpha_grid: Option<Vec<f64>>,
    pub j_grid: Option<Vec<usize>>,
    /// Ambient steps per trajectory.
    pub n: u64,
    pub trials: usize,
    /// Returns per trajectory (J).
    pub j_max: usize,
    /// Sampled points per k in the exchange scenario.
    pub samples: usize,
    /// Largest time searched for returns.
    pub cap: u64,
    /// Node budget for exact seminorm searches.
    pub budget: u64,
    /// Word pairs drawn when an exact seminorm search runs out of budget.
    pub sample_trials: u64,
    /// `bk`, `lk` or `a` (A_{ση}) for the induced scenarios.
    pub cocycle: String,
    /// JSON cocycle file for the `custom` exponent scenario.
    pub cocycle_file: Option<PathBuf>,
    pub format: Format,
    pub out: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            scenario: None,
            seed: 1,
            sigma: 2.0,
            eta: 1.0,
            p: 0.5,
            rho: 0.5,
            beta: 0.9,
            delta: 0.5,
            alpha: 1.0,
            k: 2,
            k_grid: None,
            eta_grid: None,
            sigma_grid: None,
            alpha_grid: None,
            j_grid: None,
            n: 100_000,
            trials: 50,
            j_max: 10_000,
            samples: 100,
            cap: 10_000_000_000,
            budget: crate::modulus::DEFAULT_BUDGET,
            sample_trials: 100_000,
            cocycle: "bk".into(),
            cocycle_file: None,
            format: Format::Csv,
            out: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Fills the scenario and unset grids with the command's defaults.
    pub fn resolved(&self, cmd: Command) -> Self {
        let mut c = self.clone();
        c.scenario.get_or_insert_with(|| cmd.default_scenario().to_string());
        let scenario = c.scenario.clone().unwrap_or_default();
        let k_default: Vec<usize> = match (cmd, scenario.as_str()) {
            (Command::Exponent, _) => vec![2, 5],
            (Command::NormSweep, "lk") => vec![2, 4, 8, 16, 32],
            (Command::NormSweep, _) => vec![2, 4, 8, 16, 32, 64],
            (Command::Exchange, _) => (1..=20).collect(),
            _ => vec![c.k],
        };
        c.k_grid.get_or_insert(k_default);
        c.eta_grid.get_or_insert_with(|| match cmd {
            Command::Boundary => vec![0.5, 0.8, 0.9, 1.0, 1.25, 1.5, 2.0],
            _ => vec![c.eta],
        });
        c.sigma_grid.get_or_insert_with(|| (0..=10).map(|i| 1.0 + 0.1 * i as f64).collect());
        c.alpha_grid.get_or_insert_with(|| vec![0.25, 0.5, 1.0, 1.5, 2.0]);
        c.j_grid.get_or_insert_with(|| {
            let mut g: Vec<usize> = (0..).map(|e| 10usize.pow(e)).take_while(|&j| j < c.j_max).collect();
            g.push(c.j_max);
            g
        });
        c
    }

    fn validate(&self, cmd: Command) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        let scenario = self.scenario.as_deref().unwrap_or_default();
        if !cmd.scenarios().contains(&scenario) {
            return bad(format!("unknown scenario {scenario:?} for {}; expected one of {:?}", cmd.name(), cmd.scenarios()));
        }
        if !(self.p > 0.0 && self.p < 1.0) {
            return bad(format!("p must lie in (0,1), got {}", self.p));
        }
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return bad(format!("rho must lie in (0,1), got {}", self.rho));
        }
        if !(self.sigma > 1.0 && self.sigma.is_finite()) {
            return bad(format!("sigma must exceed 1, got {}", self.sigma));
        }
        if !(self.delta > 0.0 && self.delta <= 1.0) {
            return bad(format!("delta must lie in (0,1], got {}", self.delta));
        }
        if self.trials == 0 || self.n == 0 || self.j_max == 0 || self.samples == 0 {
            return bad("trials, n, j_max and samples must be positive".into());
        }
        let grid = self.k_grid.as_deref().unwrap_or_default();
        if grid.is_empty() {
            return bad("k_grid is empty".into());
        }
        if grid.contains(&0) {
            return bad("k_grid entries must be positive".into());
        }
        let uses_lk = matches!(
            (cmd, scenario),
            (Command::Exponent, "perturbation") | (Command::NormSweep, "lk") | (Command::Exchange, "exchange")
        ) || (matches!(cmd, Command::Induced) && self.cocycle == "lk");
        if uses_lk && !(0.0 < self.delta && self.delta < self.beta && self.beta < 1.0) {
            return bad(format!("L_k scenarios need 0 < delta < beta < 1, got delta={}, beta={}", self.delta, self.beta));
        }
        if matches!((cmd, scenario), (Command::NormSweep, "lk")) && grid.iter().any(|&k| k < 2) {
            return bad("L_k needs k >= 2".into());
        }
        let etas = self.eta_grid.as_deref().unwrap_or_default();
        if matches!(cmd, Command::Boundary | Command::Exponent) {
            if etas.is_empty() {
                return bad("eta_grid is empty".into());
            }
            if let Some(e) = etas.iter().find(|&&e| !(e > 0.0 && e <= self.sigma)) {
                return bad(format!("need sigma >= eta > 0, got eta={e}"));
            }
        }
        if matches!(cmd, Command::Induced) {
            if !["bk", "lk", "a"].contains(&self.cocycle.as_str()) {
                return bad(format!("cocycle must be bk, lk or a, got {:?}", self.cocycle));
            }
            let g = self.j_grid.as_deref().unwrap_or_default();
            if g.is_empty() || g.contains(&0) || g.windows(2).any(|w| w[1] <= w[0]) {
                return bad("j_grid must be a nonempty strictly increasing list of positive integers".into());
            }
        }
        if matches!((cmd, scenario), (Command::Exponent, "custom")) && self.cocycle_file.is_none() {
            return bad("the custom scenario needs cocycle_file".into());
        }
        Ok(())
    }

    /// SHA-256 (hex) of the command name and the effective config without output paths.
    pub fn hash(&self, cmd: Command) -> String {
        let mut c = self.clone();
        c.out = None;
        let text = serde_json::to_string(&c).expect("config serializes");
        let mut h = Sha256::new();
        h.update(cmd.name().as_bytes());
        h.update([0u8]);
        h.update(text.as_bytes());
        hex::encode(h.finalize())
    }
}

/// One table cell.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Cell {
    Text(String),
    Int(i64),
    Float(f64),
    Bool(bool),
    Empty,
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Text(s) => s.clone(),
            Cell::Int(i) => i.to_string(),
            Cell::Float(x) => format!("{x:?}"),
            Cell::Bool(b) => b.to_string(),
            Cell::Empty => String::new(),
        }
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_string())
    }
}

impl From<String> for Cell {
    fn from(s: String) -> Self {
        Cell::Text(s)
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Float(x)
    }
}

impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::Int(x as i64)
    }
}

impl From<u64> for Cell {
    fn from(x: u64) -> Self {
        Cell::Int(x as i64)
    }
}

impl From<bool> for Cell {
    fn from(b: bool) -> Self {
        Cell::Bool(b)
    }
}

impl<T: Into<Cell>> From<Option<T>> for Cell {
    fn from(v: Option<T>) -> Self {
        v.map_or(Cell::Empty, Into::into)
    }
}

macro_rules! row {
    ($($x:expr),* $(,)?) => { vec![$(Cell::from($x)),*] };
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Report {
    pub command: String,
    pub scenario: String,
    pub config_hash: String,
    pub seed: u64,
    pub config: ExperimentConfig,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
    pub summary: serde_json::Value,
}

impl Report {
    fn new(cmd: Command, cfg: &ExperimentConfig, columns: &[&str]) -> Self {
        let mut config = cfg.clone();
        config.out = None;
        Self {
            command: cmd.name().to_string(),
            scenario: cfg.scenario.clone().unwrap_or_default(),
            config_hash: cfg.hash(cmd),
            seed: cfg.seed,
            config,
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
            summary: serde_json::Value::Null,
        }
    }

    /// CSV with `#` metadata lines before the header row.
    pub fn to_csv(&self) -> Result<String> {
        let mut out = String::new();
        writeln!(out, "# command={} scenario={}", self.command, self.scenario).expect("string write");
        writeln!(out, "# config_sha256={} seed={}", self.config_hash, self.seed).expect("string write");
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.columns)?;
        for r in &self.rows {
            w.write_record(r.iter().map(Cell::render))?;
        }
        let body = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        out.push_str(&String::from_utf8(body).expect("csv output is utf-8"));
        Ok(out)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    /// Everything except the table.
    pub fn summary_json(&self) -> Result<String> {
        let v = serde_json::json!({
            "command": self.command,
            "scenario": self.scenario,
            "config_hash": self.config_hash,
            "seed": self.seed,
            "config": self.config,
            "columns": self.columns,
            "rows": self.rows.len(),
            "summary": self.summary,
        });
        Ok(serde_json::to_string_pretty(&v)? + "\n")
    }

    pub fn render(&self, format: Format) -> Result<String> {
        match format {
            Format::Csv => self.to_csv(),
            Format::Json => self.to_json(),
        }
    }

    /// Writes the report to `path` and the summary to `path` + `.summary.json`.
    pub fn write(&self, path: &Path, format: Format) -> Result<()> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir)?;
        }
        fs::write(path, self.render(format)?)?;
        let mut side = path.as_os_str().to_owned();
        side.push(".summary.json");
        fs::write(PathBuf::from(side), self.summary_json()?)?;
        Ok(())
    }
}

/// Validates the config and runs one command.
pub fn run(cmd: Command, cfg: &ExperimentConfig) -> Result<Report> {
    let cfg = cfg.resolved(cmd);
    cfg.validate(cmd)?;
    match cmd {
        Command::Exponent => run_exponent(&cfg),
        Command::NormSweep => run_norm_sweep(&cfg),
        Command::Boundary => run_boundary(&cfg),
        Command::Exchange => run_exchange(&cfg),
        Command::Induced => run_induced(&cfg),
        Command::Kac => run_kac(&cfg),
    }
}

fn scenario(cfg: &ExperimentConfig) -> &str {
    cfg.scenario.as_deref().unwrap_or_default()
}

fn k_grid(cfg: &ExperimentConfig) -> &[usize] {
    cfg.k_grid.as_deref().unwrap_or_default()
}

fn estimate_row(name: &str, sigma: f64, eta_or_k: Cell, p: f64, e: &ExponentEstimate) -> Vec<Cell> {
    let mut r = row![name, sigma];
    r.push(eta_or_k);
    r.extend(row![p, e.method.as_str(), e.value, e.stderr, e.n, e.trials]);
    r
}

pub fn run_exponent(cfg: &ExperimentConfig) -> Result<Report> {
    let mut rep = Report::new(
        Command::Exponent,
        cfg,
        &["cocycle", "sigma", "eta_or_k", "p", "method", "value", "stderr", "n", "trials"],
    );
    let (sigma, p) = (cfg.sigma, cfg.p);
    let mut summary = Vec::new();
    match scenario(cfg) {
        "diagonal" => {
            for (i, &eta) in cfg.eta_grid.as_deref().unwrap_or_default().iter().enumerate() {
                let f = build_a_sigma_eta(sigma, eta)?;
                let closed = lyap_diag_closed_form(sigma, eta, p)?;
                let (top, bottom) = lyap_both_mc(&f, p, cfg.n, cfg.trials, derive_seed(cfg.seed, i as u64))?;
                rep.rows.push(estimate_row("A_sigma_eta", sigma, eta.into(), p, &closed));
                rep.rows.push(estimate_row("A_sigma_eta", sigma, eta.into(), p, &top));
                summary.push(serde_json::json!({
                    "eta": eta,
                    "closed_form": closed.value,
                    "top": top.value,
                    "top_stderr": top.stderr,
                    "bottom": bottom.value,
                    "bottom_stderr": bottom.stderr,
                    "critical_p": critical_weight(sigma, eta).ok(),
                }));
            }
        }
        "perturbation" => {
            let closed = lyap_diag_closed_form(sigma, 1.0, p)?;
            rep.rows.push(estimate_row("A_sigma_1", sigma, Cell::Empty, p, &closed));
            for (i, &k) in k_grid(cfg).iter().enumerate() {
                let seed = derive_seed(cfg.seed, i as u64);
                let b = induced_estimate(&build_bk(sigma, k)?, &make_zk(k)?, cfg, seed)?;
                rep.rows.push(estimate_row("B_k", sigma, k.into(), p, &b.0));
                summary.push(serde_json::json!({"cocycle": "B_k", "k": k, "value": b.0.value, "stderr": b.0.stderr, "decreasing": b.1}));
                if k >= 2 {
                    let l = induced_estimate(&build_lk(sigma, k, cfg.beta)?, &make_wk(k)?, cfg, seed)?;
                    rep.rows.push(estimate_row("L_k", sigma, k.into(), p, &l.0));
                    summary.push(serde_json::json!({"cocycle": "L_k", "k": k, "value": l.0.value, "stderr": l.0.stderr, "decreasing": l.1}));
                }
            }
        }
        "custom" => {
            let path = cfg.cocycle_file.as_ref().expect("validated");
            let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
            let f: LocallyConstantCocycle = serde_json::from_str(&text)?;
            let (top, bottom) = lyap_both_mc(&f, p, cfg.n, cfg.trials, cfg.seed)?;
            rep.rows.push(estimate_row(f.name(), sigma, Cell::Empty, p, &top));
            summary.push(serde_json::json!({"cocycle": f.name(), "top": top.value, "bottom": bottom.value, "top_stderr": top.stderr, "bottom_stderr": bottom.stderr}));
        }
        _ => unreachable!("validated scenario"),
    }
    rep.summary = serde_json::json!({
        "units": "nats per ambient step",
        "induced_convention": "signed c_J ln(sigma) / m_J per trial, value = |mean|",
        "results": summary,
    });
    Ok(rep)
}

/// Induced estimate at J = j_max and whether |c_j|/m_j decreases along the j grid.
fn induced_estimate(f: &LocallyConstantCocycle, c: &Cylinder, cfg: &ExperimentConfig, seed: u64) -> Result<(ExponentEstimate, bool)> {
    let mut grid: Vec<usize> = cfg.j_grid.clone().unwrap_or_default().into_iter().filter(|&j| j < cfg.j_max).collect();
    grid.push(cfg.j_max);
    let d = cj_decay(f, c, cfg.sigma, cfg.p, cfg.trials, &grid, seed, cfg.cap)?;
    let m = mean_stderr(&d.signed_rates);
    let e = ExponentEstimate {
        value: m.mean.abs(),
        n: 2 * cfg.j_max as u64,
        trials: cfg.trials,
        stderr: m.stderr,
        method: crate::exponent::Method::Induced,
    };
    Ok((e, d.is_decreasing()))
}

pub fn run_norm_sweep(cfg: &ExperimentConfig) -> Result<Report> {
    let (sigma, rho, delta) = (cfg.sigma, cfg.rho, cfg.delta);
    let a = build_a_sigma_1(sigma)?;
    let lk = scenario(cfg) == "lk";
    let mut cols = vec!["k", "spec", "sup_term", "seminorm_term", "total", "analytic_bound", "exact_or_sampled", "n_star"];
    if lk {
        cols.extend(["case1.1", "case1.2", "case1.3", "case2.1", "case2.2", "case2.3", "sup_bound"]);
    }
    let mut rep = Report::new(Command::NormSweep, cfg, &cols);
    let mut summary = Vec::new();
    for (i, &k) in k_grid(cfg).iter().enumerate() {
        let seed = derive_seed(cfg.seed, i as u64);
        if lk {
            let f = build_lk(sigma, k, cfg.beta)?;
            let spec = ModulusSpec::Log { delta };
            let d = norm_distance_or_sampled(&f, &a, &spec, rho, cfg.budget, cfg.sample_trials, seed)?;
            let b = analytic_lk_cases(k, sigma, cfg.beta, delta, rho)?;
            let mut r = row![
                k,
                spec.to_string(),
                d.sup_term,
                d.seminorm_term,
                d.total,
                b.total,
                if d.witness.exact { "exact" } else { "sampled" },
                d.witness.n_star
            ];
            r.extend(b.cases.iter().map(|c| Cell::Float(c.1)));
            r.push(b.sup_bound.into());
            rep.rows.push(r);
            summary.push(serde_json::json!({"k": k, "distance": d, "bounds": b}));
        } else {
            let f = build_bk(sigma, k)?;
            let specs = [
                (ModulusSpec::Log { delta }, if delta < 1.0 { Some(analytic_bk_bound(k, sigma, delta, rho)?) } else { None }),
                (
                    ModulusSpec::Log { delta: 1.0 },
                    Some(sigma * PI / (2.0 * k as f64) + bk_seminorm_bound(k, 1.0, rho)?),
                ),
                (ModulusSpec::Holder { alpha: cfg.alpha }, None),
            ];
            for (spec, bound) in specs {
                let d = norm_distance_or_sampled(&f, &a, &spec, rho, cfg.budget, cfg.sample_trials, seed)?;
                rep.rows.push(row![
                    k,
                    spec.to_string(),
                    d.sup_term,
                    d.seminorm_term,
                    d.total,
                    bound,
                    if d.witness.exact { "exact" } else { "sampled" },
                    d.witness.n_star
                ]);
                summary.push(serde_json::json!({"k": k, "distance": d, "analytic_bound": bound}));
            }
        }
    }
    rep.summary = serde_json::json!({
        "matrix_norm": "operator",
        "rho": rho,
        "results": summary,
    });
    Ok(rep)
}

pub fn run_boundary(cfg: &ExperimentConfig) -> Result<Report> {
    let mut rep = Report::new(
        Command::Boundary,
        cfg,
        &[
            "sigma",
            "eta",
            "p",
            "lambda_closed_form",
            "p_critical",
            "hyperbolic_constant",
            "uniformly_hyperbolic",
            "spec",
            "sup_term",
            "seminorm_term",
            "total",
        ],
    );
    let sigma = cfg.sigma;
    let a = build_a_sigma_1(sigma)?;
    let spec = ModulusSpec::Log { delta: cfg.delta };
    for &eta in cfg.eta_grid.as_deref().unwrap_or_default() {
        let f = build_a_sigma_eta(sigma, eta)?;
        let lambda = lyap_diag_closed_form(sigma, eta, cfg.p)?.value;
        let d = norm_distance(&f, &a, &spec, cfg.rho)?;
        rep.rows.push(row![
            sigma,
            eta,
            cfg.p,
            lambda,
            critical_weight(sigma, eta).ok().filter(|q| *q > 0.0 && *q < 1.0),
            (eta < 1.0).then(|| sigma / eta),
            eta < 1.0,
            spec.to_string(),
            d.sup_term,
            d.seminorm_term,
            d.total
        ]);
    }
    rep.summary = serde_json::json!({"reference": "A_sigma_1", "spec": spec});
    Ok(rep)
}

pub fn run_exchange(cfg: &ExperimentConfig) -> Result<Report> {
    if scenario(cfg) == "fiber-bunching" {
        return run_fiber_bunching(cfg);
    }
    let mut rep = Report::new(
        Command::Exchange,
        cfg,
        &["cocycle", "k", "steps", "samples", "max_angle", "max_forward_angle", "max_matrix_residual"],
    );
    let quarter = rotation(FRAC_PI_2);
    let mut worst: f64 = 0.0;
    for (i, &k) in k_grid(cfg).iter().enumerate() {
        let base = derive_seed(cfg.seed, i as u64);
        let z = make_zk(k)?;
        let b = build_bk(cfg.sigma, k)?;
        let (mut angle, mut forward, mut resid) = (0.0f64, 0.0f64, 0.0f64);
        for s in 0..cfg.samples {
            let x = LazyPoint::in_cylinder(derive_seed(base, s as u64), cfg.p, &z)?;
            let e = exchange_check(&b, &x, k as u64)?;
            angle = angle.max(e.max());
            forward = forward.max(e.e1_to_vertical_forward);
            resid = resid.max(op_norm(&(b.iterate(&x, k as i64)?.to_mat2() - quarter)));
        }
        worst = worst.max(resid);
        rep.rows.push(row!["B_k", k, k, cfg.samples, angle, forward, resid]);
        if k >= 2 {
            let w = make_wk(k)?;
            let l = build_lk(cfg.sigma, k, cfg.beta)?;
            let (mut angle, mut forward) = (0.0f64, 0.0f64);
            for s in 0..cfg.samples {
                let x = LazyPoint::in_cylinder(derive_seed(base ^ 0x4c4b, s as u64), cfg.p, &w)?;
                let e = exchange_check(&l, &x, 2 * k as u64 + 1)?;
                angle = angle.max(e.max());
                forward = forward.max(e.e1_to_vertical_forward);
            }
            rep.rows.push(row!["L_k", k, 2 * k + 1, cfg.samples, angle, forward, Cell::Empty]);
        }
    }
    rep.summary = serde_json::json!({
        "angle": "max of (H preimage of V) and (image of V vs H) line angles, radians",
        "max_bk_matrix_residual": worst,
    });
    Ok(rep)
}

fn run_fiber_bunching(cfg: &ExperimentConfig) -> Result<Report> {
    let mut rep = Report::new(
        Command::Exchange,
        cfg,
        &["sigma", "alpha", "rho", "sup", "threshold", "bunched", "predicted", "agree"],
    );
    let mut all_agree = true;
    for &sigma in cfg.sigma_grid.as_deref().unwrap_or_default() {
        for &alpha in cfg.alpha_grid.as_deref().unwrap_or_default() {
            let fb = fiber_bunching_margin(&build_a_sigma_1(sigma)?, alpha, cfg.rho)?;
            let predicted = sigma * sigma < cfg.rho.powf(-alpha);
            all_agree &= predicted == fb.bunched;
            rep.rows.push(row![sigma, alpha, cfg.rho, fb.sup, fb.threshold, fb.bunched, predicted, predicted == fb.bunched]);
        }
    }
    rep.summary = serde_json::json!({"criterion": "sigma^2 < rho^(-alpha)", "all_agree": all_agree});
    Ok(rep)
}

fn induced_target(cfg: &ExperimentConfig, k: usize) -> Result<(LocallyConstantCocycle, Cylinder)> {
    Ok(match cfg.cocycle.as_str() {
        "lk" => (build_lk(cfg.sigma, k, cfg.beta)?, make_wk(k)?),
        "a" => (build_a_sigma_eta(cfg.sigma, cfg.eta)?, make_zk(k)?),
        _ => (build_bk(cfg.sigma, k)?, make_zk(k)?),
    })
}

pub fn run_induced(cfg: &ExperimentConfig) -> Result<Report> {
    if scenario(cfg) == "abramov" {
        let mut rep = Report::new(
            Command::Induced,
            cfg,
            &["cocycle", "k", "p", "induced_times_mu", "induced_stderr", "ambient", "ambient_stderr", "discrepancy", "combined_stderr"],
        );
        for (i, &k) in k_grid(cfg).iter().enumerate() {
            let (f, c) = induced_target(cfg, k)?;
            let r = abramov_check(&f, &c, cfg.p, cfg.trials, cfg.j_max, derive_seed(cfg.seed, i as u64), cfg.cap)?;
            rep.rows.push(row![
                f.name(),
                k,
                cfg.p,
                r.induced_times_mu.mean,
                r.induced_times_mu.stderr,
                r.ambient.mean,
                r.ambient.stderr,
                r.discrepancy,
                r.combined_stderr
            ]);
        }
        rep.summary = serde_json::json!({"relation": "lambda(induced) * mu(C) = lambda(ambient)", "returns_per_trial": cfg.j_max});
        return Ok(rep);
    }
    let mut rep = Report::new(
        Command::Induced,
        cfg,
        &["cocycle", "k", "j", "m_j", "c_j", "abs_c_j_over_m_j", "stderr"],
    );
    let grid = cfg.j_grid.clone().unwrap_or_default();
    let mut summary = Vec::new();
    for (i, &k) in k_grid(cfg).iter().enumerate() {
        let (f, c) = induced_target(cfg, k)?;
        let d = cj_decay(&f, &c, cfg.sigma, cfg.p, cfg.trials, &grid, derive_seed(cfg.seed, i as u64), cfg.cap)?;
        for (g, &j) in grid.iter().enumerate() {
            rep.rows.push(row![f.name(), k, j, d.mean_m[g], d.mean_c[g], d.decay[g].mean, d.decay[g].stderr]);
        }
        let rate = mean_stderr(&d.signed_rates);
        summary.push(serde_json::json!({
            "cocycle": f.name(),
            "k": k,
            "decreasing": d.is_decreasing(),
            "max_residual": d.max_residual,
            "lambda_induced": rate.mean.abs(),
            "lambda_induced_stderr": rate.stderr,
        }));
    }
    rep.summary = serde_json::json!({
        "columns": "m_j and c_j are trial means; abs_c_j_over_m_j is the mean of |c_j|/m_j",
        "results": summary,
    });
    Ok(rep)
}

pub fn run_kac(cfg: &ExperimentConfig) -> Result<Report> {
    let mut rep = Report::new(
        Command::Kac,
        cfg,
        &["cylinder", "p", "trials", "j_max", "mean_tau", "tau_stderr", "kac_tau", "slope", "slope_stderr", "kac_slope"],
    );
    for (i, &k) in k_grid(cfg).iter().enumerate() {
        let c = if scenario(cfg) == "wk" { make_wk(k)? } else { make_zk(k)? };
        let r = kac_birkhoff(&c, cfg.p, cfg.trials, cfg.j_max, derive_seed(cfg.seed, i as u64), cfg.cap)?;
        rep.rows.push(row![
            c.to_string(),
            cfg.p,
            cfg.trials,
            cfg.j_max,
            r.mean_tau.mean,
            r.mean_tau.stderr,
            r.kac_tau,
            r.slope.mean,
            r.slope.stderr,
            r.kac_slope
        ]);
    }
    rep.summary = serde_json::json!({"tau": "first return time, x ~ mu_p restricted to C", "slope": "tau^(2J) / J"});
    Ok(rep)
}
