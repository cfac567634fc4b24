//! Command-line front end: `test`, `ci` and `simulate`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DVector;
use serde::Serialize;

use crate::classical::{
    bonferroni_naive, bonferroni_slepian, estimate_rho, invert_to_lower_bound, rho_estimate, run_rho_test,
    RhoEstimate, RhoSource,
};
use crate::error::{Error, Result};
use crate::io::{
    load_panel, read_key_values, sha256_file, to_sorted_json, write_ks_csv, write_p_values_csv, write_rho_sweep_csv,
    write_summary_csv, AssetSharpe, InputEcho, LoadedPanel, PanelFile, RfrSpec, RunReport,
};
use crate::moments::{estimate_kurtosis_factor, estimate_moments, sharpe_covariance, CovarianceFlavor, MomentEstimates};
use crate::outcome::{check_alpha, Method, TestOutcome};
use crate::selection::{select_max, truncation_bounds};
use crate::sim::{
    run_ks_sweep, run_null_calibration, run_power_study, run_rho_sweep, with_threads, CovarianceMode, KsRow,
    ReturnsLaw, RhoSweepRow, SimConfig, SimSummary, SnrConfig,
};

pub const SEED_ENV: &str = "MAXSHARPE_SEED";
const DEFAULT_TEST_METHODS: &str = "conditional,naive,bonferroni,bonferroni_fixed,chibar,follman,hansen_chibar,hansen_spa";
const DEFAULT_CI_METHODS: &str = "naive,bonferroni,bonferroni_fixed,chibar,conditional";

#[derive(Debug, Parser)]
#[command(name = "maxsharpe", version, about = "Inference on the asset with the largest Sharpe ratio")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Test H0: zeta = null value for the max-Sharpe asset.
    Test(TestArgs),
    /// One-sided lower confidence bounds per method.
    Ci(CiArgs),
    /// Run a Monte Carlo experiment.
    Simulate(SimulateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FlavorArg {
    Gaussian,
    Elliptical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RhoSourceArg {
    MedianPairwise,
    MeanSelectedVsRest,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Json,
    Table,
}

#[derive(Debug, Clone, Args)]
pub struct TestArgs {
    /// Wide CSV of returns, one column per asset.
    #[arg(long, short)]
    pub input: PathBuf,
    #[arg(long)]
    pub date_column: Option<String>,
    /// Constant risk-free rate per period.
    #[arg(long, conflicts_with = "rfr_column")]
    pub rfr: Option<f64>,
    /// Column holding a per-period risk-free rate.
    #[arg(long)]
    pub rfr_column: Option<String>,
    /// Comma separated method tags, or `all`.
    #[arg(long)]
    pub methods: Option<String>,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0.0)]
    pub null_value: f64,
    /// Common correlation for the rho-based tests, overriding the estimate.
    #[arg(long)]
    pub rho: Option<f64>,
    #[arg(long, value_enum, default_value_t = RhoSourceArg::MedianPairwise)]
    pub rho_source: RhoSourceArg,
    #[arg(long, value_enum, default_value_t = FlavorArg::Gaussian)]
    pub flavor: FlavorArg,
    /// Kurtosis factor for the elliptical flavor; estimated when absent.
    #[arg(long)]
    pub kurtosis: Option<f64>,
    #[arg(long, value_enum, default_value_t = OutputFormat::Json)]
    pub format: OutputFormat,
    /// Scale Sharpe quantities by sqrt(periods per year) in table output.
    #[arg(long, requires = "periods_per_year")]
    pub annualize: bool,
    #[arg(long)]
    pub periods_per_year: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct CiArgs {
    #[command(flatten)]
    pub common: TestArgs,
    /// Confidence level; overrides `--alpha` with `1 - level`.
    #[arg(long)]
    pub level: Option<f64>,
}

#[derive(Debug, Clone, Args, Default)]
pub struct SimulateArgs {
    /// key = value configuration file. Flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// null, power, rho_sweep or ks_sweep.
    #[arg(long)]
    pub experiment: Option<String>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub rho: Option<f64>,
    /// e.g. `uniform:-0.1:0.1`, `all_equal:0.1`, `one_good:0.15`, `half_good:0.1`, `zero`.
    #[arg(long)]
    pub snr: Option<String>,
    /// `gaussian` or `t:DF`.
    #[arg(long)]
    pub law: Option<String>,
    #[arg(long)]
    pub replications: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub methods: Option<String>,
    #[arg(long)]
    pub alpha: Option<f64>,
    /// infeasible, feasible_gaussian or feasible_elliptical.
    #[arg(long)]
    pub covariance: Option<String>,
    #[arg(long)]
    pub null_value: Option<f64>,
    #[arg(long)]
    pub retain_p_values: Option<bool>,
    #[arg(long)]
    pub threads: Option<usize>,
    /// Comma separated rho values for a rho sweep or K-S grid.
    #[arg(long)]
    pub rhos: Option<String>,
    /// Comma separated sample sizes for a K-S grid.
    #[arg(long)]
    pub grid_n: Option<String>,
    /// Comma separated asset counts for a K-S grid.
    #[arg(long)]
    pub grid_k: Option<String>,
}

fn panel_file(args: &TestArgs) -> PanelFile {
    let rfr = match (&args.rfr_column, args.rfr) {
        (Some(c), _) => RfrSpec::Column(c.clone()),
        (None, Some(r)) => RfrSpec::Constant(r),
        (None, None) => RfrSpec::Zero,
    };
    PanelFile { path: args.input.clone(), date_column: args.date_column.clone(), rfr }
}

struct Prepared {
    loaded: LoadedPanel,
    moments: MomentEstimates,
    methods: Vec<Method>,
    selected: usize,
    rho: Option<RhoEstimate>,
    flavor: CovarianceFlavor,
    input: InputEcho,
}

fn prepare(args: &TestArgs, alpha: f64, default_methods: &str) -> Result<Prepared> {
    check_alpha(alpha)?;
    if !args.null_value.is_finite() {
        return Err(Error::InvalidArgument("null value must be finite".into()));
    }
    let methods = Method::parse_list(args.methods.as_deref().unwrap_or(default_methods))?;
    if args.rho.is_some() && methods.contains(&Method::Conditional) {
        return Err(Error::InvalidArgument(
            "--rho does not apply to the conditional test, which uses the full covariance; drop one of them".into(),
        ));
    }
    let loaded = load_panel(&panel_file(args))?;
    let k = loaded.panel.k();
    if k == 1 && methods.contains(&Method::Conditional) {
        return Err(Error::InvalidArgument(
            "selection over a single asset is vacuous; use the unconditional `naive` method".into(),
        ));
    }
    let moments = estimate_moments(&loaded.panel, loaded.rfr)?;
    let selected = moments.argmax_sharpe();
    let needs_rho = methods.iter().any(Method::uses_rho);
    let rho = match (needs_rho, args.rho) {
        (false, _) => None,
        (true, Some(r)) => {
            crate::moments::check_rho(r, k)?;
            Some(rho_estimate(r, k, RhoSource::Supplied))
        }
        (true, None) => {
            let src = match args.rho_source {
                RhoSourceArg::MedianPairwise => RhoSource::MedianPairwise,
                RhoSourceArg::MeanSelectedVsRest => RhoSource::MeanSelectedVsRest,
            };
            Some(estimate_rho(&moments, selected, src)?)
        }
    };
    let flavor = match args.flavor {
        FlavorArg::Gaussian => CovarianceFlavor::Gaussian,
        FlavorArg::Elliptical => CovarianceFlavor::Elliptical {
            kurtosis_factor: match args.kurtosis {
                Some(kf) => kf,
                None => estimate_kurtosis_factor(&loaded.panel)?,
            },
        },
    };
    let input = InputEcho {
        path: args.input.display().to_string(),
        sha256: sha256_file(&args.input)?,
        rows: loaded.panel.n(),
        assets: k,
    };
    Ok(Prepared { loaded, moments, methods, selected, rho, flavor, input })
}

impl Prepared {
    fn sharpe(&self) -> &DVector<f64> {
        &self.moments.sharpe
    }

    fn n(&self) -> usize {
        self.moments.n
    }

    fn rho(&self) -> Result<&RhoEstimate> {
        self.rho.as_ref().ok_or_else(|| Error::InvalidArgument("rho not available".into()))
    }

    fn run(&self, method: Method, zeta0: f64, alpha: f64) -> Result<TestOutcome> {
        let (sharpe, n) = (self.sharpe(), self.n());
        let top = sharpe[self.selected];
        match method {
            Method::Conditional => {
                let q = sharpe_covariance(&self.moments.corr, sharpe, self.flavor, n)?;
                let event = select_max(sharpe)?;
                truncation_bounds(&event, sharpe, &q)?.test(zeta0, alpha)
            }
            Method::Naive => bonferroni_naive(top, n, 1, zeta0, alpha),
            Method::Bonferroni => bonferroni_naive(top, n, sharpe.len(), zeta0, alpha),
            Method::BonferroniSlepian => bonferroni_slepian(sharpe, n, &self.moments.corr, zeta0, alpha),
            _ => run_rho_test(method, sharpe, n, self.rho()?, zeta0, alpha),
        }
    }

    fn lower_bound(&self, method: Method, alpha: f64) -> Result<f64> {
        if method == Method::Conditional {
            let q = sharpe_covariance(&self.moments.corr, self.sharpe(), self.flavor, self.n())?;
            let event = select_max(self.sharpe())?;
            return truncation_bounds(&event, self.sharpe(), &q)?.lower_bound(alpha);
        }
        invert_to_lower_bound(|z0| self.run(method, z0, alpha), self.sharpe(), self.n(), alpha)
    }

    fn report(&self, command: &str, config: BTreeMap<String, String>, outcomes: Vec<TestOutcome>, t0: Instant) -> RunReport {
        let labels = self.loaded.panel.labels();
        let mut order: Vec<usize> = (0..labels.len()).collect();
        order.sort_by(|&a, &b| self.sharpe()[b].total_cmp(&self.sharpe()[a]).then(a.cmp(&b)));
        RunReport {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            input: self.input.clone(),
            config,
            selected_asset: labels[self.selected].clone(),
            sharpe: order.iter().map(|&i| AssetSharpe { label: labels[i].clone(), sharpe: self.sharpe()[i] }).collect(),
            rho: self.rho.map(|r| r.rho),
            outcomes,
            elapsed_ms: t0.elapsed().as_secs_f64() * 1e3,
        }
    }
}

fn echo_config(args: &TestArgs, p: &Prepared, alpha: f64) -> BTreeMap<String, String> {
    let mut c = BTreeMap::new();
    c.insert("alpha".into(), alpha.to_string());
    c.insert("null_value".into(), args.null_value.to_string());
    c.insert("methods".into(), p.methods.iter().map(Method::as_str).collect::<Vec<_>>().join(","));
    c.insert("flavor".into(), format!("{:?}", p.flavor));
    c.insert("rfr".into(), p.loaded.rfr.to_string());
    if let Some(col) = &args.rfr_column {
        c.insert("rfr_column".into(), col.clone());
    }
    if let Some(r) = &p.rho {
        c.insert("rho_source".into(), format!("{:?}", r.source));
    }
    c
}

pub fn cmd_test(args: &TestArgs) -> Result<RunReport> {
    let t0 = Instant::now();
    let p = prepare(args, args.alpha, DEFAULT_TEST_METHODS)?;
    let outcomes = p.methods.iter().map(|&m| p.run(m, args.null_value, args.alpha)).collect::<Result<Vec<_>>>()?;
    Ok(p.report("test", echo_config(args, &p, args.alpha), outcomes, t0))
}

pub fn cmd_ci(args: &CiArgs) -> Result<RunReport> {
    let t0 = Instant::now();
    let alpha = match args.level {
        Some(level) => {
            if !(level > 0.0 && level < 1.0) {
                return Err(Error::InvalidArgument(format!("level must be in (0, 1), got {level}")));
            }
            1.0 - level
        }
        None => args.common.alpha,
    };
    let p = prepare(&args.common, alpha, DEFAULT_CI_METHODS)?;
    let mut outcomes = Vec::with_capacity(p.methods.len());
    for &m in &p.methods {
        let mut o = p.run(m, args.common.null_value, alpha)?;
        o.lower_bound = Some(p.lower_bound(m, alpha)?);
        outcomes.push(o);
    }
    Ok(p.report("ci", echo_config(&args.common, &p, alpha), outcomes, t0))
}

/// Human-readable rendering of a report.
pub fn render_table(report: &RunReport, scale: f64) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{:<24} {:>12}", "asset", "sharpe");
    for a in &report.sharpe {
        let mark = if a.label == report.selected_asset { " *" } else { "" };
        let _ = writeln!(s, "{:<24} {:>12.4}{mark}", a.label, a.sharpe * scale);
    }
    if let Some(r) = report.rho {
        let _ = writeln!(s, "rho = {r:.4}");
    }
    let _ = writeln!(s);
    let _ = writeln!(s, "{:<20} {:>12} {:>12} {:>7} {:>12}", "method", "statistic", "p_value", "reject", "lower_bound");
    for o in &report.outcomes {
        let lb = o.lower_bound.map(|v| format!("{:.4}", v * scale)).unwrap_or_else(|| "-".into());
        let _ = writeln!(s, "{:<20} {:>12.4} {:>12.4e} {:>7} {:>12}", o.method.as_str(), o.statistic, o.p_value, o.reject, lb);
        for w in &o.warnings {
            let _ = writeln!(s, "  warning: {w}");
        }
    }
    s
}

fn display_scale(args: &TestArgs) -> f64 {
    match (args.annualize, args.periods_per_year) {
        (true, Some(p)) => p.sqrt(),
        _ => 1.0,
    }
}

/// Which experiment a simulate run performs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    Null,
    Power,
    RhoSweep,
    KsSweep,
}

/// A fully resolved simulate invocation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimPlan {
    pub experiment: Experiment,
    pub config: SimConfig,
    pub rhos: Vec<f64>,
    pub grid_n: Vec<usize>,
    pub grid_k: Vec<usize>,
    #[serde(skip)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum SimOutput {
    Summary(SimSummary),
    RhoSweep(Vec<RhoSweepRow>),
    KsSweep(Vec<KsRow>),
}

const SIM_KEYS: [&str; 17] = [
    "experiment",
    "k",
    "n",
    "rho",
    "snr",
    "law",
    "replications",
    "seed",
    "methods",
    "alpha",
    "covariance",
    "null_value",
    "retain_p_values",
    "threads",
    "rhos",
    "grid_n",
    "grid_k",
];

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.trim().parse().map_err(|_| Error::Config(format!("`{key}`: cannot parse `{v}`")))
}

fn parse_list<T: std::str::FromStr>(key: &str, v: &str) -> Result<Vec<T>> {
    v.split(',').map(str::trim).filter(|s| !s.is_empty()).map(|s| parse_num(key, s)).collect()
}

pub fn parse_snr(v: &str) -> Result<SnrConfig> {
    let parts: Vec<&str> = v.split(':').map(str::trim).collect();
    let num = |i: usize| -> Result<f64> {
        parts.get(i).ok_or_else(|| Error::Config(format!("snr `{v}` is missing a value"))).and_then(|s| parse_num("snr", s))
    };
    let cfg = match parts[0] {
        "uniform" | "uniform_range" if parts.len() == 3 => SnrConfig::UniformRange { lo: num(1)?, hi: num(2)? },
        "all_equal" if parts.len() == 2 => SnrConfig::AllEqual { zeta: num(1)? },
        "one_good" if parts.len() == 2 => SnrConfig::OneGood { zeta: num(1)? },
        "half_good" if parts.len() == 2 => SnrConfig::HalfGood { zeta: num(1)? },
        "zero" if parts.len() == 1 => SnrConfig::Zero,
        _ => return Err(Error::Config(format!("unrecognised snr `{v}`"))),
    };
    Ok(cfg)
}

pub fn parse_law(v: &str) -> Result<ReturnsLaw> {
    match v.trim() {
        "gaussian" | "normal" => Ok(ReturnsLaw::Gaussian),
        s => match s.strip_prefix("t:").or_else(|| s.strip_prefix("student_t:")) {
            Some(df) => Ok(ReturnsLaw::StudentT { df: parse_num("law", df)? }),
            None => Err(Error::Config(format!("unrecognised returns law `{v}`"))),
        },
    }
}

fn parse_covariance(v: &str) -> Result<CovarianceMode> {
    match v.trim() {
        "infeasible" => Ok(CovarianceMode::Infeasible),
        "feasible_gaussian" => Ok(CovarianceMode::FeasibleGaussian),
        "feasible_elliptical" => Ok(CovarianceMode::FeasibleElliptical),
        _ => Err(Error::Config(format!("unrecognised covariance mode `{v}`"))),
    }
}

/// Merges config file, the seed environment variable and flags, in
/// increasing precedence, and resolves them into a plan.
pub fn resolve_sim_plan(args: &SimulateArgs, env_seed: Option<&str>) -> Result<SimPlan> {
    let mut kv = match &args.config {
        Some(p) => read_key_values(p)?,
        None => BTreeMap::new(),
    };
    if let Some(bad) = kv.keys().find(|k| !SIM_KEYS.contains(&k.as_str())) {
        return Err(Error::Config(format!("unknown config key `{bad}`")));
    }
    if let Some(s) = env_seed {
        kv.insert("seed".into(), s.to_string());
    }
    let mut set = |key: &str, v: Option<String>| {
        if let Some(v) = v {
            kv.insert(key.to_string(), v);
        }
    };
    set("experiment", args.experiment.clone());
    set("k", args.k.map(|v| v.to_string()));
    set("n", args.n.map(|v| v.to_string()));
    set("rho", args.rho.map(|v| v.to_string()));
    set("snr", args.snr.clone());
    set("law", args.law.clone());
    set("replications", args.replications.map(|v| v.to_string()));
    set("seed", args.seed.map(|v| v.to_string()));
    set("methods", args.methods.clone());
    set("alpha", args.alpha.map(|v| v.to_string()));
    set("covariance", args.covariance.clone());
    set("null_value", args.null_value.map(|v| v.to_string()));
    set("retain_p_values", args.retain_p_values.map(|v| v.to_string()));
    set("threads", args.threads.map(|v| v.to_string()));
    set("rhos", args.rhos.clone());
    set("grid_n", args.grid_n.clone());
    set("grid_k", args.grid_k.clone());

    let experiment = match kv.get("experiment").map(String::as_str).unwrap_or("null") {
        "null" | "null_calibration" => Experiment::Null,
        "power" | "power_study" => Experiment::Power,
        "rho_sweep" => Experiment::RhoSweep,
        "ks_sweep" => Experiment::KsSweep,
        other => return Err(Error::Config(format!("unknown experiment `{other}`"))),
    };
    let mut c = SimConfig::default();
    for (key, v) in &kv {
        match key.as_str() {
            "k" => c.k = parse_num(key, v)?,
            "n" => c.n = parse_num(key, v)?,
            "rho" => c.rho = parse_num(key, v)?,
            "snr" => c.snr = parse_snr(v)?,
            "law" => c.returns_law = parse_law(v)?,
            "replications" => c.replications = parse_num(key, v)?,
            "seed" => c.seed = parse_num(key, v)?,
            "methods" => c.methods = Method::parse_list(v).map_err(|e| Error::Config(e.to_string()))?,
            "alpha" => c.alpha = parse_num(key, v)?,
            "covariance" => c.covariance_mode = parse_covariance(v)?,
            "null_value" => c.null_value = parse_num(key, v)?,
            "retain_p_values" => c.retain_p_values = parse_num(key, v)?,
            _ => {}
        }
    }
    if experiment == Experiment::RhoSweep && !kv.contains_key("snr") {
        c.snr = SnrConfig::Zero;
    }
    let rhos = match kv.get("rhos") {
        Some(v) => parse_list("rhos", v)?,
        None if experiment == Experiment::RhoSweep => vec![0.0, 0.2, 0.4, 0.6, 0.8],
        None => vec![c.rho],
    };
    let grid_n = match kv.get("grid_n") {
        Some(v) => parse_list("grid_n", v)?,
        None => vec![c.n],
    };
    let grid_k = match kv.get("grid_k") {
        Some(v) => parse_list("grid_k", v)?,
        None => vec![c.k],
    };
    let threads = kv.get("threads").map(|v| parse_num::<usize>("threads", v)).transpose()?;
    if threads == Some(0) {
        return Err(Error::Config("threads must be positive".into()));
    }
    c.validate()?;
    Ok(SimPlan { experiment, config: c, rhos, grid_n, grid_k, threads })
}

pub fn execute_plan(plan: &SimPlan) -> Result<SimOutput> {
    let c = &plan.config;
    match plan.experiment {
        Experiment::Null => run_null_calibration(c).map(SimOutput::Summary),
        Experiment::Power => run_power_study(c).map(SimOutput::Summary),
        Experiment::RhoSweep => run_rho_sweep(c, &plan.rhos).map(SimOutput::RhoSweep),
        Experiment::KsSweep => {
            let mut grid = Vec::new();
            for &n in &plan.grid_n {
                for &k in &plan.grid_k {
                    for &rho in &plan.rhos {
                        grid.push(SimConfig { n, k, rho, ..c.clone() });
                    }
                }
            }
            run_ks_sweep(&grid).map(SimOutput::KsSweep)
        }
    }
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    let path = dir.join(name);
    File::create(&path)
        .map(BufWriter::new)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

/// Writes the plan's result files into `out` and returns their names.
pub fn write_outputs(out: &Path, plan: &SimPlan, output: &SimOutput) -> Result<Vec<String>> {
    std::fs::create_dir_all(out)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", out.display()))))?;
    let mut files = Vec::new();
    match output {
        SimOutput::Summary(s) => {
            write_summary_csv(create(out, "summary.csv")?, s)?;
            files.push("summary.csv".to_string());
            if plan.config.retain_p_values {
                write_p_values_csv(create(out, "p_values.csv")?, s)?;
                files.push("p_values.csv".to_string());
            }
        }
        SimOutput::RhoSweep(rows) => {
            write_rho_sweep_csv(create(out, "rho_sweep.csv")?, rows)?;
            files.push("rho_sweep.csv".to_string());
        }
        SimOutput::KsSweep(rows) => {
            write_ks_csv(create(out, "ks_sweep.csv")?, rows)?;
            files.push("ks_sweep.csv".to_string());
        }
    }
    #[derive(Serialize)]
    struct Doc<'a> {
        tool_version: &'a str,
        plan: &'a SimPlan,
        result: &'a SimOutput,
    }
    let doc = Doc { tool_version: env!("CARGO_PKG_VERSION"), plan, result: output };
    std::fs::write(out.join("report.json"), to_sorted_json(&doc)?)?;
    files.push("report.json".to_string());
    Ok(files)
}

/// Text table of the headline results.
pub fn render_sim(output: &SimOutput) -> String {
    let mut s = String::new();
    match output {
        SimOutput::Summary(sum) => {
            let _ = writeln!(s, "replications {}  bad selections {}", sum.replications, sum.bad_selection_count);
            let _ = writeln!(s, "{:<20} {:>8} {:>10} {:>10} {:>10}", "method", "q", "delta", "band_lo", "band_hi");
            for m in &sum.methods {
                for d in &m.delta_curve {
                    let _ = writeln!(
                        s,
                        "{:<20} {:>8.3} {:>10.4} {:>10.4} {:>10.4}",
                        m.method.as_str(),
                        d.q,
                        d.delta,
                        d.band_lo,
                        d.band_hi
                    );
                }
                let ks = m.ks_statistic.map(|v| format!("{v:.4}")).unwrap_or_else(|| "-".into());
                let _ = writeln!(s, "{:<20} rejection rate {:.4}  K-S {ks}  failures {}", m.method.as_str(), m.rejection_rate, m.failures);
            }
        }
        SimOutput::RhoSweep(rows) => {
            let _ = writeln!(s, "{:>6} {:<20} {:>10}", "rho", "method", "size");
            for r in rows {
                let _ = writeln!(s, "{:>6.2} {:<20} {:>10.4}", r.rho, r.method.as_str(), r.rejection_rate);
            }
        }
        SimOutput::KsSweep(rows) => {
            let _ = writeln!(s, "{:>6} {:>6} {:>6} {:<20} {:>10}", "n", "k", "rho", "method", "ks");
            for r in rows {
                let ks = r.ks_statistic.map(|v| format!("{v:.4}")).unwrap_or_else(|| "-".into());
                let _ = writeln!(s, "{:>6} {:>6} {:>6.2} {:<20} {ks:>10}", r.n, r.k, r.rho, r.method.as_str());
            }
        }
    }
    s
}

pub fn cmd_simulate(args: &SimulateArgs) -> Result<(SimPlan, SimOutput)> {
    let env_seed = std::env::var(SEED_ENV).ok();
    let plan = resolve_sim_plan(args, env_seed.as_deref())?;
    let output = match plan.threads {
        Some(t) => with_threads(t, || execute_plan(&plan))??,
        None => execute_plan(&plan)?,
    };
    write_outputs(&args.out, &plan, &output)?;
    Ok((plan, output))
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Test(a) => {
            let r = cmd_test(&a)?;
            print_report(&r, &a)
        }
        Command::Ci(a) => {
            let r = cmd_ci(&a)?;
            print_report(&r, &a.common)
        }
        Command::Simulate(a) => {
            let t0 = Instant::now();
            let (_, output) = cmd_simulate(&a)?;
            print!("{}", render_sim(&output));
            eprintln!("done in {:.1} s", t0.elapsed().as_secs_f64());
            Ok(())
        }
    }
}

fn print_report(r: &RunReport, args: &TestArgs) -> Result<()> {
    match args.format {
        OutputFormat::Json => println!("{}", r.to_json()?),
        OutputFormat::Table => print!("{}", render_table(r, display_scale(args))),
    }
    Ok(())
}

/// Parses `argv` and runs the command, returning the process exit code:
/// 0 success, 2 usage error, 3 data error, 4 numerical failure.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sim_args(out: &Path) -> SimulateArgs {
        SimulateArgs { out: out.to_path_buf(), ..SimulateArgs::default() }
    }

    #[test]
    fn precedence_config_env_flags() {
        let d = tempfile::tempdir().unwrap();
        let cfg = d.path().join("c.txt");
        std::fs::write(&cfg, "seed = 1\nk = 7\nsnr = one_good:0.1\nexperiment = power\n").unwrap();
        let mut a = SimulateArgs { config: Some(cfg), ..sim_args(d.path()) };
        let p = resolve_sim_plan(&a, None).unwrap();
        assert_eq!((p.config.seed, p.config.k, p.experiment), (1, 7, Experiment::Power));
        assert_eq!(p.config.snr, SnrConfig::OneGood { zeta: 0.1 });
        assert_eq!(resolve_sim_plan(&a, Some("5")).unwrap().config.seed, 5);
        a.seed = Some(9);
        assert_eq!(resolve_sim_plan(&a, Some("5")).unwrap().config.seed, 9);
    }

    #[test]
    fn unknown_keys_and_bad_values() {
        let d = tempfile::tempdir().unwrap();
        let cfg = d.path().join("c.txt");
        std::fs::write(&cfg, "bogus = 1\n").unwrap();
        let e = resolve_sim_plan(&SimulateArgs { config: Some(cfg), ..sim_args(d.path()) }, None).unwrap_err();
        assert_eq!(e.exit_code(), 2);
        let a = SimulateArgs { snr: Some("wobbly".into()), ..sim_args(d.path()) };
        assert!(resolve_sim_plan(&a, None).is_err());
        let a = SimulateArgs { law: Some("t:3".into()), ..sim_args(d.path()) };
        assert!(resolve_sim_plan(&a, None).is_err());
    }

    #[test]
    fn parsers() {
        assert_eq!(parse_snr("uniform:0:0.1").unwrap(), SnrConfig::UniformRange { lo: 0.0, hi: 0.1 });
        assert_eq!(parse_snr("zero").unwrap(), SnrConfig::Zero);
        assert!(parse_snr("one_good").is_err());
        assert_eq!(parse_law("t:5").unwrap(), ReturnsLaw::StudentT { df: 5.0 });
        assert!(parse_law("cauchy").is_err());
    }

    #[test]
    fn rho_sweep_defaults_to_zero_snr() {
        let d = tempfile::tempdir().unwrap();
        let a = SimulateArgs { experiment: Some("rho_sweep".into()), rhos: Some("0,0.5".into()), ..sim_args(d.path()) };
        let p = resolve_sim_plan(&a, None).unwrap();
        assert_eq!(p.config.snr, SnrConfig::Zero);
        assert_eq!(p.rhos, vec![0.0, 0.5]);
    }
}
