//! `gmc` command-line interface.
//!
//! Every subcommand reads an optional flat `key=value` file (`--config`),
//! overlays the flags given on the command line, and writes a result bundle
//! into `--out`. Exit codes: 0 success, 2 invalid input or usage, 3 runtime
//! failure.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::error::{GmcError, Result};
use crate::io::write::{
    quantile_label, write_aggregate, write_diagnostics, write_failures, write_records,
};
use crate::io::{
    fmt_f64, parse_regression_csv, parse_survival_csv, read_draws, write_curve, write_draws,
    write_summary, KvConfig, RunManifest,
};
use crate::mcmc::{diagnose, summarize, ChainSet, SamplerConfig};
use crate::priors::{CommensurateHyper, GmcHyper};
use crate::regression::{
    deviation_identifiability, fit_ctp_gmc, fit_regression_conventional, fit_regression_gmc,
    predict_curve, predict_derivative, CurveSelector, ForceIndicators, GmcRegressionSpec,
    IndicatorMove, RegressionDataset, Source,
};
use crate::sim::{run_study, DMode, SimConfig, DEFAULT_D_GRID};
use crate::spline::{build_partition, Partition, Spacing};
use crate::survival::{
    fit_pwe_conventional, fit_pwe_gmc_forced, hazard_ratio_summary, kaplan_meier, median_survival,
    select_partition_dic, survival_curve, survival_curve_for, SurvivalDataset, DEFAULT_HORIZON_DAYS,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

const DEFAULT_SEED: u64 = 1;
const DEFAULT_PROBS: [f64; 3] = [0.025, 0.5, 0.975];

#[derive(Parser, Debug)]
#[command(name = "gmc", version, about = "Bayesian borrowing from supplemental data with GMC priors")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Conventional penalized-spline regression.
    FitRegression(RegressionArgs),
    /// Two-source GMC spline regression.
    FitRegressionGmc(RegressionGmcArgs),
    /// Hierarchical two-tissue GMC spline regression.
    FitCtp(RegressionGmcArgs),
    /// Conventional piecewise-exponential survival fit.
    FitSurvival(SurvivalArgs),
    /// Two-source GMC piecewise-exponential survival fit.
    FitSurvivalGmc(SurvivalGmcArgs),
    /// Ranks candidate time-axis partitions by DIC.
    SelectPartition(SelectArgs),
    /// Kaplan-Meier estimates per source and arm.
    Km(KmArgs),
    /// Simulation study of the three estimators.
    Simulate(SimulateArgs),
    /// Recomputes the summary of a draws file.
    Summarize(SummarizeArgs),
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Flat key=value configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    chains: Option<usize>,
    #[arg(long = "burn-in")]
    burn_in: Option<usize>,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    thin: Option<usize>,
    /// Credible level of every interval.
    #[arg(long)]
    level: Option<f64>,
}

#[derive(Args, Debug, Clone)]
struct SplineArgs {
    /// Regression CSV: y,t,source[,individual,region,tissue].
    #[arg(long)]
    data: PathBuf,
    /// Map raw t values linearly onto [0, 1].
    #[arg(long)]
    rescale: bool,
    /// Number of intervals.
    #[arg(long = "K")]
    k: Option<usize>,
    /// equal or quantile.
    #[arg(long)]
    spacing: Option<String>,
    /// Number of equally spaced curve grid points on [0, 1].
    #[arg(long = "grid-points")]
    grid_points: Option<usize>,
}

#[derive(Args, Debug)]
struct RegressionArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    spline: SplineArgs,
    /// primary, supplemental or all.
    #[arg(long)]
    source: Option<String>,
}

#[derive(Args, Debug)]
struct RegressionGmcArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    spline: SplineArgs,
    #[arg(long = "s-l")]
    s_l: Option<f64>,
    #[arg(long = "s-u")]
    s_u: Option<f64>,
    /// Spike precision.
    #[arg(long = "R")]
    r: Option<f64>,
    #[arg(long)]
    p0: Option<f64>,
    #[arg(long)]
    a1: Option<f64>,
    #[arg(long)]
    a2: Option<f64>,
    /// free, all_zero or all_one.
    #[arg(long = "force-indicators")]
    force_indicators: Option<String>,
    /// collapsed or conditional.
    #[arg(long = "indicator-move")]
    indicator_move: Option<String>,
}

#[derive(Args, Debug, Clone)]
struct HazardArgs {
    /// Follow-up horizon in days; later times are censored there.
    #[arg(long)]
    horizon: Option<f64>,
    /// Number of equal-width intervals.
    #[arg(long = "K")]
    k: Option<usize>,
    /// Explicit knots 0,...,1 on the rescaled axis; overrides --K.
    #[arg(long)]
    knots: Option<String>,
    #[arg(long = "grid-points")]
    grid_points: Option<usize>,
}

#[derive(Args, Debug)]
struct SurvivalArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    hazard: HazardArgs,
    /// Survival CSV: time_days,event,source[,z_F,z_I].
    #[arg(long)]
    data: PathBuf,
    /// primary, supplemental or all.
    #[arg(long)]
    source: Option<String>,
}

#[derive(Args, Debug)]
struct SurvivalGmcArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    hazard: HazardArgs,
    /// One file holding both sources.
    #[arg(long, conflicts_with_all = ["primary", "supplemental"])]
    data: Option<PathBuf>,
    #[arg(long, requires = "supplemental")]
    primary: Option<PathBuf>,
    #[arg(long, requires = "primary")]
    supplemental: Option<PathBuf>,
    #[arg(long = "R-gamma")]
    r_gamma: Option<f64>,
    /// Beta prior on nu_gamma as `a1,a2`.
    #[arg(long = "nu-prior")]
    nu_prior: Option<String>,
    #[arg(long = "force-indicators")]
    force_indicators: Option<String>,
}

#[derive(Args, Debug)]
struct SelectArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    horizon: Option<f64>,
    /// Comma-separated `K` or `K:quantile` entries.
    #[arg(long)]
    candidates: Option<String>,
}

#[derive(Args, Debug)]
struct KmArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    horizon: Option<f64>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[command(flatten)]
    common: Common,
    /// Replicate count.
    #[arg(long = "M")]
    m: Option<usize>,
    /// uniform or stratified.
    #[arg(long)]
    mode: Option<String>,
}

#[derive(Args, Debug)]
struct SummarizeArgs {
    #[arg(long)]
    draws: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Comma-separated quantile probabilities.
    #[arg(long)]
    probs: Option<String>,
}

const SAMPLER_KEYS: [&str; 7] = ["seed", "chains", "burn_in", "iterations", "thin", "level", "probs"];

/// Runs the CLI on `args` (including the program name) and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_VALIDATION } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return EXIT_VALIDATION;
    }
    match dispatch(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_validation() {
                EXIT_VALIDATION
            } else {
                EXIT_RUNTIME
            }
        }
    }
}

fn configure_threads() -> Result<()> {
    let Ok(v) = std::env::var("GMC_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n >= 1)
        .ok_or_else(|| GmcError::InvalidConfig(format!("GMC_THREADS must be a positive integer, got `{v}`")))?;
    // a pool built earlier in this process keeps its size
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::FitRegression(a) => cmd_fit_regression(a),
        Command::FitRegressionGmc(a) => cmd_fit_regression_gmc(a, false),
        Command::FitCtp(a) => cmd_fit_regression_gmc(a, true),
        Command::FitSurvival(a) => cmd_fit_survival(a),
        Command::FitSurvivalGmc(a) => cmd_fit_survival_gmc(a),
        Command::SelectPartition(a) => cmd_select_partition(a),
        Command::Km(a) => cmd_km(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Summarize(a) => cmd_summarize(a),
    }
}

fn overlay<T: ToString>(cfg: &mut KvConfig, key: &str, v: Option<T>) {
    if let Some(v) = v {
        cfg.set(key, v);
    }
}

fn load(path: Option<&Path>) -> Result<KvConfig> {
    match path {
        Some(p) => KvConfig::load(p),
        None => Ok(KvConfig::default()),
    }
}

fn base_config(c: &Common) -> Result<KvConfig> {
    let mut cfg = load(c.config.as_deref())?;
    overlay(&mut cfg, "seed", c.seed);
    overlay(&mut cfg, "chains", c.chains);
    overlay(&mut cfg, "burn_in", c.burn_in);
    overlay(&mut cfg, "iterations", c.iterations);
    overlay(&mut cfg, "thin", c.thin);
    overlay(&mut cfg, "level", c.level);
    Ok(cfg)
}

fn check_keys(cfg: &KvConfig, extra: &[&str]) -> Result<()> {
    let mut known: Vec<&str> = SAMPLER_KEYS.to_vec();
    known.extend_from_slice(extra);
    cfg.check_known(&known)
}

fn sampler(cfg: &KvConfig, default: fn(u64) -> SamplerConfig) -> Result<SamplerConfig> {
    let seed = cfg.get_or("seed", DEFAULT_SEED)?;
    let d = default(seed);
    let s = SamplerConfig {
        chains: cfg.get_or("chains", d.chains)?,
        burn_in: cfg.get_or("burn_in", d.burn_in)?,
        iterations: cfg.get_or("iterations", d.iterations)?,
        thin: cfg.get_or("thin", d.thin)?,
        seed,
    };
    s.validate()?;
    Ok(s)
}

fn probs(cfg: &KvConfig) -> Result<Vec<f64>> {
    Ok(cfg.get_list("probs")?.unwrap_or_else(|| DEFAULT_PROBS.to_vec()))
}

fn level(cfg: &KvConfig) -> Result<f64> {
    cfg.get_or("level", 0.95)
}

fn unit_grid(cfg: &KvConfig) -> Result<Vec<f64>> {
    let n: usize = cfg.get_or("grid_points", 101)?;
    if n < 2 {
        return Err(GmcError::InvalidConfig("grid_points must be >= 2".into()));
    }
    Ok((0..n).map(|i| i as f64 / (n - 1) as f64).collect())
}

/// Output directory plus the names of files written into it.
struct Bundle {
    dir: PathBuf,
    written: Vec<String>,
    manifest: RunManifest,
}

impl Bundle {
    fn new(dir: &Path, command: &str, cfg: &KvConfig, inputs: &[&Path]) -> Result<Self> {
        std::fs::create_dir_all(dir)?;
        let seed = cfg.get_or("seed", DEFAULT_SEED)?;
        let text = format!("command={command}\n{}", cfg.canonical());
        Ok(Self {
            dir: dir.to_path_buf(),
            written: Vec::new(),
            manifest: RunManifest::begin(command, &text, seed, inputs)?,
        })
    }

    fn id(&self) -> String {
        self.manifest.run_id.clone()
    }

    fn path(&mut self, name: &str) -> PathBuf {
        self.written.push(name.to_string());
        self.dir.join(name)
    }

    fn chains(&mut self, chains: &ChainSet, cfg: &KvConfig) -> Result<()> {
        let id = self.id();
        write_draws(&self.path("draws.csv"), &id, chains)?;
        let p = probs(cfg)?;
        write_summary(&self.path("summary.csv"), &id, &summarize(chains, &p)?, &p)?;
        write_diagnostics(&self.path("diagnostics.csv"), &id, &diagnose(chains)?)
    }

    fn finish(mut self) -> Result<()> {
        let outputs = std::mem::take(&mut self.written);
        self.manifest.finish(outputs);
        self.manifest.write(&self.dir.join("manifest.json"))
    }
}

fn spline_config(cfg: &mut KvConfig, s: &SplineArgs) {
    overlay(cfg, "K", s.k);
    overlay(cfg, "spacing", s.spacing.clone());
    overlay(cfg, "grid_points", s.grid_points);
    if s.rescale {
        cfg.set("rescale", true);
    }
}

const SPLINE_KEYS: [&str; 5] = ["K", "spacing", "grid_points", "rescale", "source"];

fn spline_partition(cfg: &KvConfig, t: &[f64], default_spacing: Spacing) -> Result<Partition> {
    let k = cfg.get_or("K", 10usize)?;
    let spacing = cfg.get_or("spacing", default_spacing)?;
    build_partition(k, spacing, t)
}

fn select_source(data: &RegressionDataset, which: &str) -> Result<RegressionDataset> {
    match which {
        "all" => Ok(data.clone()),
        other => Ok(data.select(other.parse::<Source>()?)),
    }
}

fn write_curves(
    bundle: &mut Bundle,
    chains: &ChainSet,
    partition: &Partition,
    cfg: &KvConfig,
    curves: &[CurveSelector],
) -> Result<()> {
    let grid = unit_grid(cfg)?;
    let lvl = level(cfg)?;
    let id = bundle.id();
    for &c in curves {
        let fit = predict_curve(chains, c, partition, &grid, lvl)?;
        write_curve(&bundle.path(&format!("curve_{c}.csv")), &id, &fit)?;
        let der = predict_derivative(chains, c, partition, &grid, lvl)?;
        write_curve(&bundle.path(&format!("derivative_{c}.csv")), &id, &der)?;
    }
    Ok(())
}

fn cmd_fit_regression(a: RegressionArgs) -> Result<()> {
    let mut cfg = base_config(&a.common)?;
    spline_config(&mut cfg, &a.spline);
    overlay(&mut cfg, "source", a.source.clone());
    check_keys(&cfg, &SPLINE_KEYS)?;
    let data = parse_regression_csv(&a.spline.data, cfg.get_or("rescale", false)?)?;
    let data = select_source(&data, cfg.raw("source").unwrap_or("all"))?;
    let partition = spline_partition(&cfg, &data.t, Spacing::Equal)?;
    let sc = sampler(&cfg, SamplerConfig::regression_default)?;
    let mut bundle = Bundle::new(&a.common.out, "fit-regression", &cfg, &[&a.spline.data])?;
    let chains = fit_regression_conventional(&data, &partition, &sc)?;
    bundle.chains(&chains, &cfg)?;
    write_curves(&mut bundle, &chains, &partition, &cfg, &[CurveSelector::Primary])?;
    bundle.finish()
}

const GMC_KEYS: [&str; 8] = ["s_l", "s_u", "R", "p0", "a1", "a2", "force_indicators", "indicator_move"];

fn gmc_spec(cfg: &KvConfig, partition: Partition, ctp: bool) -> Result<GmcRegressionSpec> {
    let d = if ctp {
        GmcRegressionSpec::ctp_default(partition)
    } else {
        GmcRegressionSpec::simulation_default(partition)
    };
    let r = cfg.get_or("R", d.curve_hyper.r)?;
    let spec = GmcRegressionSpec {
        curve_hyper: GmcHyper {
            r,
            a1: cfg.get_or("a1", d.curve_hyper.a1)?,
            a2: cfg.get_or("a2", d.curve_hyper.a2)?,
        },
        intercept_hyper: CommensurateHyper {
            s_l: cfg.get_or("s_l", d.intercept_hyper.s_l)?,
            s_u: cfg.get_or("s_u", d.intercept_hyper.s_u)?,
            r,
            p0: cfg.get_or("p0", d.intercept_hyper.p0)?,
        },
        force_indicators: cfg.get_or("force_indicators", ForceIndicators::Free)?,
        indicator_move: cfg.get_or("indicator_move", IndicatorMove::Collapsed)?,
        partition: d.partition,
    };
    spec.validate()?;
    Ok(spec)
}

fn cmd_fit_regression_gmc(a: RegressionGmcArgs, ctp: bool) -> Result<()> {
    let mut cfg = base_config(&a.common)?;
    spline_config(&mut cfg, &a.spline);
    overlay(&mut cfg, "s_l", a.s_l);
    overlay(&mut cfg, "s_u", a.s_u);
    overlay(&mut cfg, "R", a.r);
    overlay(&mut cfg, "p0", a.p0);
    overlay(&mut cfg, "a1", a.a1);
    overlay(&mut cfg, "a2", a.a2);
    overlay(&mut cfg, "force_indicators", a.force_indicators.clone());
    overlay(&mut cfg, "indicator_move", a.indicator_move.clone());
    let mut keys = SPLINE_KEYS.to_vec();
    keys.extend_from_slice(&GMC_KEYS);
    check_keys(&cfg, &keys)?;
    let data = parse_regression_csv(&a.spline.data, cfg.get_or("rescale", false)?)?;
    let sc = sampler(&cfg, SamplerConfig::regression_default)?;
    let command = if ctp { "fit-ctp" } else { "fit-regression-gmc" };
    if ctp {
        let partition = spline_partition(&cfg, &data.t, Spacing::Quantile)?;
        let spec = gmc_spec(&cfg, partition, true)?;
        let mut bundle = Bundle::new(&a.common.out, command, &cfg, &[&a.spline.data])?;
        let chains = fit_ctp_gmc(&data, &spec, &sc)?;
        bundle.chains(&chains, &cfg)?;
        let curves = [CurveSelector::Cancerous, CurveSelector::Noncancerous];
        write_curves(&mut bundle, &chains, &spec.partition, &cfg, &curves)?;
        let reports = deviation_identifiability(&chains, &spec.partition, &unit_grid(&cfg)?)?;
        let id = bundle.id();
        let mut w = crate::io::write::writer(&bundle.path("identifiability.csv"))?;
        crate::io::write::row(&mut w, ["run_id", "tissue", "individuals", "max_abs_sum", "average_range", "flagged"])?;
        for r in &reports {
            crate::io::write::row(
                &mut w,
                [
                    id.clone(),
                    r.tissue.to_string(),
                    r.individuals.to_string(),
                    fmt_f64(r.max_abs_sum),
                    fmt_f64(r.average_range),
                    r.flagged.to_string(),
                ],
            )?;
        }
        crate::io::write::done(w)?;
        bundle.finish()
    } else {
        let primary = data.select(Source::Primary);
        let supplemental = data.select(Source::Supplemental);
        let partition = spline_partition(&cfg, &primary.t, Spacing::Equal)?;
        let spec = gmc_spec(&cfg, partition, false)?;
        let mut bundle = Bundle::new(&a.common.out, command, &cfg, &[&a.spline.data])?;
        let chains = fit_regression_gmc(&primary, &supplemental, &spec, &sc)?;
        bundle.chains(&chains, &cfg)?;
        let curves = [CurveSelector::Primary, CurveSelector::Supplemental];
        write_curves(&mut bundle, &chains, &spec.partition, &cfg, &curves)?;
        bundle.finish()
    }
}

fn hazard_config(cfg: &mut KvConfig, h: &HazardArgs) {
    overlay(cfg, "horizon", h.horizon);
    overlay(cfg, "K", h.k);
    overlay(cfg, "knots", h.knots.clone());
    overlay(cfg, "grid_points", h.grid_points);
}

const HAZARD_KEYS: [&str; 4] = ["horizon", "K", "knots", "grid_points"];

fn horizon(cfg: &KvConfig) -> Result<f64> {
    cfg.get_or("horizon", DEFAULT_HORIZON_DAYS)
}

fn hazard_partition(cfg: &KvConfig) -> Result<Partition> {
    match cfg.get_list::<f64>("knots")? {
        Some(knots) => Partition::hazard(knots),
        None => Partition::hazard_equal(cfg.get_or("K", 8usize)?),
    }
}

/// Reference arm plus one setting per treatment.
fn covariate_settings(treatments: &[String]) -> Vec<(String, Vec<f64>)> {
    let mut out = vec![("reference".to_string(), vec![0.0; treatments.len()])];
    for (j, t) in treatments.iter().enumerate() {
        let mut z = vec![0.0; treatments.len()];
        z[j] = 1.0;
        out.push((t.clone(), z));
    }
    out
}

fn write_survival_outputs(
    bundle: &mut Bundle,
    chains: &ChainSet,
    partition: &Partition,
    treatments: &[String],
    cfg: &KvConfig,
) -> Result<()> {
    let grid = unit_grid(cfg)?;
    let lvl = level(cfg)?;
    let hz = horizon(cfg)?;
    let id = bundle.id();
    let mut medians = crate::io::write::writer(&bundle.path("medians.csv"))?;
    crate::io::write::row(
        &mut medians,
        ["run_id", "setting", "median_days", "lower", "upper", "beyond_horizon", "draws", "censored_at_horizon"],
    )?;
    for (label, z) in covariate_settings(treatments) {
        let s = survival_curve(chains, partition, &z, &grid, lvl)?;
        write_curve(&bundle.path(&format!("survival_{label}.csv")), &id, &s)?;
        let m = median_survival(chains, partition, &z, hz, lvl)?;
        crate::io::write::row(
            &mut medians,
            [
                id.clone(),
                label,
                fmt_f64(m.median_days),
                fmt_f64(m.lower),
                fmt_f64(m.upper),
                m.beyond_horizon.to_string(),
                m.draws.to_string(),
                m.censored_at_horizon.to_string(),
            ],
        )?;
    }
    crate::io::write::done(medians)?;
    if !treatments.is_empty() {
        let mut w = crate::io::write::writer(&bundle.path("hazard_ratios.csv"))?;
        crate::io::write::row(&mut w, ["run_id", "treatment", "mean", "lower", "upper"])?;
        for t in treatments {
            let hr = hazard_ratio_summary(chains, t, lvl)?;
            crate::io::write::row(&mut w, [id.clone(), t.clone(), fmt_f64(hr.mean), fmt_f64(hr.lower), fmt_f64(hr.upper)])?;
        }
        crate::io::write::done(w)?;
    }
    Ok(())
}

fn select_survival(data: &SurvivalDataset, which: &str) -> Result<SurvivalDataset> {
    match which {
        "all" => Ok(data.clone()),
        other => Ok(data.select(other.parse::<Source>()?)),
    }
}

fn cmd_fit_survival(a: SurvivalArgs) -> Result<()> {
    let mut cfg = base_config(&a.common)?;
    hazard_config(&mut cfg, &a.hazard);
    overlay(&mut cfg, "source", a.source.clone());
    let mut keys = HAZARD_KEYS.to_vec();
    keys.push("source");
    check_keys(&cfg, &keys)?;
    let data = parse_survival_csv(&a.data, horizon(&cfg)?)?;
    let data = select_survival(&data, cfg.raw("source").unwrap_or("primary"))?;
    let partition = hazard_partition(&cfg)?;
    let sc = sampler(&cfg, SamplerConfig::survival_default)?;
    let mut bundle = Bundle::new(&a.common.out, "fit-survival", &cfg, &[&a.data])?;
    let chains = fit_pwe_conventional(&data, &partition, &sc)?;
    bundle.chains(&chains, &cfg)?;
    write_survival_outputs(&mut bundle, &chains, &partition, &data.treatments, &cfg)?;
    bundle.finish()
}

fn cmd_fit_survival_gmc(a: SurvivalGmcArgs) -> Result<()> {
    let mut cfg = base_config(&a.common)?;
    hazard_config(&mut cfg, &a.hazard);
    overlay(&mut cfg, "R_gamma", a.r_gamma);
    if let Some(nu) = &a.nu_prior {
        let parts: Vec<&str> = nu.split(',').map(str::trim).collect();
        let [a1, a2] = parts.as_slice() else {
            return Err(GmcError::InvalidConfig(format!("--nu-prior expects a1,a2, got `{nu}`")));
        };
        cfg.set("a1", a1);
        cfg.set("a2", a2);
    }
    overlay(&mut cfg, "force_indicators", a.force_indicators.clone());
    let mut keys = HAZARD_KEYS.to_vec();
    keys.extend_from_slice(&["R_gamma", "a1", "a2", "force_indicators"]);
    check_keys(&cfg, &keys)?;
    let hz = horizon(&cfg)?;
    let (primary, supplemental, inputs): (SurvivalDataset, SurvivalDataset, Vec<&Path>) =
        match (&a.data, &a.primary, &a.supplemental) {
            (Some(d), _, _) => {
                let all = parse_survival_csv(d, hz)?;
                let supp = all.select(Source::Supplemental).without_treatments();
                (all.select(Source::Primary), supp, vec![d.as_path()])
            }
            (None, Some(p), Some(s)) => {
                let prim = parse_survival_csv(p, hz)?.relabel(Source::Primary);
                let supp = parse_survival_csv(s, hz)?;
                if supp.z.iter().flatten().any(|&v| v) {
                    return Err(GmcError::InvalidData(
                        "supplemental file must not carry treatment indicators".into(),
                    ));
                }
                let supp = supp.without_treatments().relabel(Source::Supplemental);
                (prim, supp, vec![p.as_path(), s.as_path()])
            }
            _ => {
                return Err(GmcError::InvalidConfig(
                    "give --data or both --primary and --supplemental".into(),
                ))
            }
        };
    let d = GmcHyper::survival_default();
    let hyper = GmcHyper::new(
        cfg.get_or("R_gamma", d.r)?,
        cfg.get_or("a1", d.a1)?,
        cfg.get_or("a2", d.a2)?,
    )?;
    let force = cfg.get_or("force_indicators", ForceIndicators::Free)?;
    let partition = hazard_partition(&cfg)?;
    let sc = sampler(&cfg, SamplerConfig::survival_default)?;
    let mut bundle = Bundle::new(&a.common.out, "fit-survival-gmc", &cfg, &inputs)?;
    let chains = fit_pwe_gmc_forced(&primary, &supplemental, &hyper, &partition, force, &sc)?;
    bundle.chains(&chains, &cfg)?;
    write_survival_outputs(&mut bundle, &chains, &partition, &primary.treatments, &cfg)?;
    let id = bundle.id();
    let s = survival_curve_for(&chains, &partition, Source::Supplemental, &[], &unit_grid(&cfg)?, level(&cfg)?)?;
    write_curve(&bundle.path("survival_supplemental.csv"), &id, &s)?;

    let mut w = crate::io::write::writer(&bundle.path("borrowing.csv"))?;
    crate::io::write::row(&mut w, ["run_id", "parameter", "posterior_mean"])?;
    for (i, name) in chains.names().iter().enumerate() {
        if name.starts_with("iota[") || name == "nu_gamma" {
            let v = chains.pooled(i);
            let m = v.iter().sum::<f64>() / v.len() as f64;
            crate::io::write::row(&mut w, [id.clone(), name.clone(), fmt_f64(m)])?;
        }
    }
    crate::io::write::done(w)?;
    bundle.finish()
}

fn parse_candidates(text: &str, data: &SurvivalDataset) -> Result<Vec<Partition>> {
    let event_times: Vec<f64> = (0..data.len()).filter(|&i| data.event[i]).map(|i| data.time[i]).collect();
    text.split(',')
        .map(|entry| {
            let entry = entry.trim();
            let (k, spacing) = match entry.split_once(':') {
                Some((k, s)) => (k, s.parse::<Spacing>()?),
                None => (entry, Spacing::Equal),
            };
            let k: usize = k
                .parse()
                .map_err(|_| GmcError::InvalidConfig(format!("bad candidate `{entry}`")))?;
            match spacing {
                Spacing::Equal => Partition::hazard_equal(k),
                Spacing::Quantile => Partition::quantile(k, &event_times),
            }
        })
        .collect()
}

fn cmd_select_partition(a: SelectArgs) -> Result<()> {
    let mut cfg = base_config(&a.common)?;
    overlay(&mut cfg, "horizon", a.horizon);
    overlay(&mut cfg, "candidates", a.candidates.clone());
    check_keys(&cfg, &["horizon", "candidates"])?;
    let text = cfg
        .raw("candidates")
        .ok_or_else(|| GmcError::InvalidConfig("candidate partitions are required (--candidates)".into()))?
        .to_string();
    let data = parse_survival_csv(&a.data, horizon(&cfg)?)?.select(Source::Primary);
    let candidates = parse_candidates(&text, &data)?;
    let sc = sampler(&cfg, SamplerConfig::survival_default)?;
    let mut bundle = Bundle::new(&a.common.out, "select-partition", &cfg, &[&a.data])?;
    let ranked = select_partition_dic(&data, &candidates, &sc)?;
    let id = bundle.id();
    let mut w = crate::io::write::writer(&bundle.path("dic.csv"))?;
    crate::io::write::row(&mut w, ["run_id", "rank", "label", "K", "dbar", "pd", "dic"])?;
    for (i, r) in ranked.iter().enumerate() {
        crate::io::write::row(
            &mut w,
            [
                id.clone(),
                (i + 1).to_string(),
                r.score.label.clone(),
                r.intervals.to_string(),
                fmt_f64(r.score.dbar),
                fmt_f64(r.score.pd),
                fmt_f64(r.score.dic),
            ],
        )?;
    }
    crate::io::write::done(w)?;
    bundle.finish()
}

fn cmd_km(a: KmArgs) -> Result<()> {
    let mut cfg = load(a.config.as_deref())?;
    overlay(&mut cfg, "horizon", a.horizon);
    cfg.check_known(&["horizon"])?;
    let hz = horizon(&cfg)?;
    let data = parse_survival_csv(&a.data, hz)?;
    let mut bundle = Bundle::new(&a.out, "km", &cfg, &[&a.data])?;
    let id = bundle.id();
    let mut w = crate::io::write::writer(&bundle.path("km.csv"))?;
    crate::io::write::row(&mut w, ["run_id", "source", "group", "time_days", "survival", "at_risk", "events"])?;
    for source in [Source::Primary, Source::Supplemental] {
        let part = data.select(source);
        if part.is_empty() {
            continue;
        }
        for (label, z) in covariate_settings(&data.treatments) {
            let idx: Vec<usize> = (0..part.len())
                .filter(|&i| part.z[i].iter().zip(&z).all(|(&a, &b)| a == (b > 0.5)))
                .collect();
            if idx.is_empty() {
                continue;
            }
            let km = kaplan_meier(&part.subset(&idx));
            for i in 0..km.times.len() {
                crate::io::write::row(
                    &mut w,
                    [
                        id.clone(),
                        source.to_string(),
                        label.clone(),
                        fmt_f64(km.times[i] * hz),
                        fmt_f64(km.survival[i]),
                        km.at_risk[i].to_string(),
                        km.events[i].to_string(),
                    ],
                )?;
            }
        }
    }
    crate::io::write::done(w)?;
    bundle.finish()
}

const SIM_KEYS: [&str; 14] = [
    "d_grid", "N", "N0", "sigma", "sigma0", "M", "mode", "K", "s_l", "s_u", "R", "p0", "a1", "a2",
];

/// Builds a simulation configuration from `key=value` entries.
pub fn sim_config(cfg: &KvConfig) -> Result<SimConfig> {
    let seed = cfg.get_or("seed", DEFAULT_SEED)?;
    let d = SimConfig::desk_default(seed);
    let sampler = sampler(cfg, SamplerConfig::regression_default)?;
    let r = cfg.get_or("R", d.curve_hyper.r)?;
    let sc = SimConfig {
        d_grid: cfg.get_list("d_grid")?.unwrap_or_else(|| DEFAULT_D_GRID.to_vec()),
        n: cfg.get_or("N", d.n)?,
        n0: cfg.get_or("N0", d.n0)?,
        sigma: cfg.get_or("sigma", d.sigma)?,
        sigma0: cfg.get_or("sigma0", d.sigma0)?,
        m: cfg.get_or("M", d.m)?,
        seed,
        mode: cfg.get_or("mode", DMode::Uniform)?,
        sampler,
        intervals: cfg.get_or("K", d.intervals)?,
        curve_hyper: GmcHyper {
            r,
            a1: cfg.get_or("a1", d.curve_hyper.a1)?,
            a2: cfg.get_or("a2", d.curve_hyper.a2)?,
        },
        intercept_hyper: CommensurateHyper {
            s_l: cfg.get_or("s_l", d.intercept_hyper.s_l)?,
            s_u: cfg.get_or("s_u", d.intercept_hyper.s_u)?,
            r,
            p0: cfg.get_or("p0", d.intercept_hyper.p0)?,
        },
    };
    sc.validate()?;
    Ok(sc)
}

fn cmd_simulate(a: SimulateArgs) -> Result<()> {
    let mut cfg = base_config(&a.common)?;
    overlay(&mut cfg, "M", a.m);
    overlay(&mut cfg, "mode", a.mode.clone());
    check_keys(&cfg, &SIM_KEYS)?;
    let sc = sim_config(&cfg)?;
    let inputs: Vec<&Path> = a.common.config.as_deref().into_iter().collect();
    let mut bundle = Bundle::new(&a.common.out, "simulate", &cfg, &inputs)?;
    let study = run_study(&sc)?;
    let id = bundle.id();
    write_aggregate(&bundle.path("aggregate.csv"), &id, &study.aggregate)?;
    write_records(&bundle.path("records.csv"), &id, &study.records)?;
    write_failures(&bundle.path("failures.csv"), &id, &study.failures)?;
    for f in &study.failures {
        log::warn!("replicate {} (seed {}) failed: {}", f.replicate, f.seed, f.message);
    }
    bundle.finish()
}

fn cmd_summarize(a: SummarizeArgs) -> Result<()> {
    let mut cfg = KvConfig::default();
    overlay(&mut cfg, "probs", a.probs.clone());
    let p = probs(&cfg)?;
    let (id, chains) = read_draws(&a.draws)?;
    let mut bundle = Bundle::new(&a.out, "summarize", &cfg, &[&a.draws])?;
    bundle.manifest.run_id = id.clone();
    write_summary(&bundle.path("summary.csv"), &id, &summarize(&chains, &p)?, &p)?;
    write_diagnostics(&bundle.path("diagnostics.csv"), &id, &diagnose(&chains)?)?;
    bundle.finish()
}

/// Column names of a summary file for the given probabilities.
pub fn summary_columns(probs: &[f64]) -> Vec<String> {
    let mut h = vec!["run_id".to_string(), "parameter".into(), "mean".into(), "sd".into()];
    h.extend(probs.iter().map(|&p| quantile_label(p)));
    h
}
