//! Command-line front end: `fit`, `summary`, `diag`, `select`, `simulate`.
//!
//! Covariate indices, levels, states and components are 1-based on the
//! command line and in configuration files.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use crate::datamodel::{parse_dataset, DurationMode, HyperParams, ModelConfig, ParseOptions, ShapeUpdate};
use crate::diagnostics::{self, Selector};
use crate::engine::{fit, run_chains};
use crate::error::{Error, Result};
use crate::model_selection::selection_scores;
use crate::persist::{read_fit, write_fit};
use crate::simulate::{make_demo_corpus, write_corpus, DemoKind};
use crate::summaries::{summarize, SummaryOptions, DEFAULT_DELTA};

/// Environment variable naming the default output root.
pub const OUT_DIR_ENV: &str = "BMRMM_OUT_DIR";

#[derive(Parser, Debug)]
#[command(name = "bmrmm", version, about = "Bayesian mixed-effect Markov and Markov renewal models for categorical sequences")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Fit a model and write the posterior draws to a directory.
    Fit(FitArgs),
    /// Summarize a fit directory.
    Summary(SummaryArgs),
    /// Trace and autocorrelation tables for selected parameters.
    Diag(DiagArgs),
    /// LPML and WAIC of a gamma-mixture fit.
    Select(SelectArgs),
    /// Write a demo corpus with its ground truth.
    Simulate(SimulateArgs),
}

#[derive(Args, Debug)]
pub struct FitArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long = "num-cov")]
    pub num_cov: usize,
    /// Covariates used for transitions (default: all).
    #[arg(long = "trans-cov-index", value_delimiter = ',')]
    pub trans_cov_index: Option<Vec<usize>>,
    /// Covariates used for durations (default: all).
    #[arg(long = "duration-cov-index", value_delimiter = ',')]
    pub duration_cov_index: Option<Vec<usize>>,
    /// ignore | dirichlet:<unit> | gamma:<K>
    #[arg(long = "duration-distr")]
    pub duration_distr: Option<String>,
    #[arg(long = "no-fixed-effect")]
    pub no_fixed_effect: bool,
    #[arg(long = "no-random-effect")]
    pub no_random_effect: bool,
    #[arg(long = "no-duration-prev-state")]
    pub no_duration_prev_state: bool,
    #[arg(long)]
    pub simsize: Option<usize>,
    #[arg(long)]
    pub burnin: Option<usize>,
    #[arg(long)]
    pub thin: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory (default: $BMRMM_OUT_DIR/fit-<seed>).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    pub chains: usize,
    /// Draw kernel shapes from the gamma approximation without correction.
    #[arg(long = "approximate-shapes")]
    pub approximate_shapes: bool,
    /// TOML file with any of the settings above plus hyperparameters.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SummaryArgs {
    pub fit: PathBuf,
    #[arg(long, default_value_t = DEFAULT_DELTA)]
    pub delta: f64,
    /// Output directory (default: <fit>/summary).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Average duration mixture probabilities over all kept draws.
    #[arg(long = "posterior-average")]
    pub posterior_average: bool,
    #[arg(long = "no-model-selection")]
    pub no_model_selection: bool,
    /// Also write SVG figures.
    #[arg(long)]
    pub render: bool,
}

#[derive(Args, Debug)]
pub struct DiagArgs {
    pub fit: PathBuf,
    /// Transition `prev,cur`; may be repeated.
    #[arg(long = "transition")]
    pub transitions: Vec<String>,
    /// Levels of the transition covariates, comma separated.
    #[arg(long = "cov-comb", value_delimiter = ',')]
    pub cov_comb: Option<Vec<usize>>,
    /// Individual id for individual-level transition probabilities.
    #[arg(long)]
    pub individual: Option<String>,
    /// Gamma kernel components; may be repeated or comma separated.
    #[arg(long = "component", value_delimiter = ',')]
    pub components: Vec<usize>,
    #[arg(long = "max-lag")]
    pub max_lag: Option<usize>,
    /// Output directory (default: <fit>/diag).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub render: bool,
}

#[derive(Args, Debug)]
pub struct SelectArgs {
    pub fit: PathBuf,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    /// foxp2-like | asthma-like
    #[arg(long, default_value = "foxp2-like")]
    pub kind: String,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Output directory (default: $BMRMM_OUT_DIR).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// File stem (default: the corpus kind).
    #[arg(long)]
    pub stem: Option<String>,
}

/// Settings accepted in a `--config` TOML file.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub num_cov: Option<usize>,
    pub trans_cov_index: Option<Vec<usize>>,
    pub duration_cov_index: Option<Vec<usize>>,
    pub duration_distr: Option<String>,
    /// Per-component shape/rate prior vectors of a gamma mixture.
    pub gamma_shape: Option<Vec<f64>>,
    pub gamma_rate: Option<Vec<f64>>,
    pub fixed_effect: Option<bool>,
    pub random_effect: Option<bool>,
    pub duration_incl_prev_state: Option<bool>,
    pub simsize: Option<usize>,
    pub burnin: Option<usize>,
    pub thin: Option<usize>,
    pub seed: Option<u64>,
    pub shape_update: Option<ShapeUpdate>,
    pub hyper: Option<HyperParams>,
    pub state_labels: Option<Vec<String>>,
    pub covariate_labels: Option<Vec<Vec<String>>>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }
}

/// Parses `ignore`, `dirichlet:<unit>` or `gamma:<K>`.
pub fn parse_duration_distr(s: &str) -> Result<DurationMode> {
    let bad = || Error::Config(format!("unknown duration distribution `{s}` (ignore, dirichlet:<unit>, gamma:<K>)"));
    let (kind, arg) = s.split_once(':').map_or((s, None), |(a, b)| (a, Some(b)));
    match (kind.trim().to_ascii_lowercase().as_str(), arg) {
        ("ignore", None) => Ok(DurationMode::Ignore),
        ("dirichlet", Some(u)) => Ok(DurationMode::Discretize {
            unit: u.trim().parse().map_err(|_| bad())?,
        }),
        ("gamma", Some(k)) => {
            let k: usize = k.trim().parse().map_err(|_| bad())?;
            if k == 0 {
                return Err(Error::Config("gamma mixture needs at least one component".into()));
            }
            Ok(DurationMode::gamma(k))
        }
        _ => Err(bad()),
    }
}

fn zero_based(idx: &[usize], what: &str) -> Result<Vec<usize>> {
    idx.iter()
        .map(|&i| {
            i.checked_sub(1)
                .ok_or_else(|| Error::Config(format!("{what}: indices are 1-based")))
        })
        .collect()
}

/// Builds the model configuration and parse options from flags and an
/// optional configuration file; flags win.
pub fn build_config(args: &FitArgs) -> Result<(ModelConfig, ParseOptions)> {
    let file = match &args.config {
        Some(p) => ConfigFile::load(p)?,
        None => ConfigFile::default(),
    };
    if let Some(n) = file.num_cov {
        if n != args.num_cov {
            return Err(Error::Config(format!("--num-cov {} disagrees with config file ({n})", args.num_cov)));
        }
    }
    let mut cfg = ModelConfig::default();
    let distr = args.duration_distr.clone().or(file.duration_distr.clone());
    if let Some(d) = distr {
        cfg.duration_mode = parse_duration_distr(&d)?;
    }
    if let DurationMode::GammaMixture { shape_prior, rate_prior } = &mut cfg.duration_mode {
        let k = shape_prior.len();
        if let Some(v) = &file.gamma_shape {
            *shape_prior = v.clone();
        }
        if let Some(v) = &file.gamma_rate {
            *rate_prior = v.clone();
        }
        if shape_prior.len() != k || rate_prior.len() != k {
            return Err(Error::Config(format!("gamma prior vectors must have {k} entries")));
        }
    }
    cfg.fixed_effect = !args.no_fixed_effect && file.fixed_effect.unwrap_or(true);
    cfg.random_effect = !args.no_random_effect && file.random_effect.unwrap_or(true);
    cfg.duration_incl_prev_state = !args.no_duration_prev_state && file.duration_incl_prev_state.unwrap_or(true);
    if let Some(i) = args.trans_cov_index.as_ref().or(file.trans_cov_index.as_ref()) {
        cfg.trans_cov_index = Some(zero_based(i, "trans-cov-index")?);
    }
    if let Some(i) = args.duration_cov_index.as_ref().or(file.duration_cov_index.as_ref()) {
        cfg.duration_cov_index = Some(zero_based(i, "duration-cov-index")?);
    }
    if let Some(n) = args.simsize.or(file.simsize) {
        cfg.simsize = n;
    }
    cfg.burnin = args.burnin.or(file.burnin);
    if let Some(t) = args.thin.or(file.thin) {
        cfg.thin = t;
    }
    cfg.seed = args
        .seed
        .or(file.seed)
        .ok_or_else(|| Error::Config("a seed is required (--seed or `seed` in the config file)".into()))?;
    if let Some(h) = file.hyper {
        cfg.hyper = h;
    }
    cfg.shape_update = if args.approximate_shapes {
        ShapeUpdate::Approximate
    } else {
        file.shape_update.unwrap_or_default()
    };
    cfg.validate(args.num_cov)?;
    let opts = ParseOptions {
        num_covariates: args.num_cov,
        state_labels: file.state_labels,
        covariate_labels: file.covariate_labels,
        require_durations: cfg.duration_mode != DurationMode::Ignore,
    };
    Ok((cfg, opts))
}

fn default_root() -> Option<PathBuf> {
    std::env::var_os(OUT_DIR_ENV).map(PathBuf::from)
}

fn cmd_fit(args: &FitArgs) -> Result<()> {
    let (cfg, opts) = build_config(args)?;
    let out = match (&args.out, default_root()) {
        (Some(o), _) => o.clone(),
        (None, Some(root)) => root.join(format!("fit-{}", cfg.seed)),
        (None, None) => return Err(Error::Config(format!("--out is required when {OUT_DIR_ENV} is not set"))),
    };
    let data = parse_dataset(&args.data, &opts)?;
    if args.chains <= 1 {
        let s = fit(&data, &cfg)?;
        write_fit(&s, &out)?;
        println!("wrote {} kept iterations to {}", s.kept(), out.display());
    } else {
        let chains = run_chains(&data, &cfg, args.chains)?;
        for s in &chains {
            let dir = out.join(format!("chain_{}", s.chain + 1));
            write_fit(s, &dir)?;
            println!("chain {}: wrote {} kept iterations to {}", s.chain + 1, s.kept(), dir.display());
        }
    }
    Ok(())
}

fn cmd_summary(args: &SummaryArgs) -> Result<()> {
    let samples = read_fit(&args.fit)?;
    let opts = SummaryOptions {
        delta: args.delta,
        dur_mix_probs_posterior_average: args.posterior_average,
        model_selection: !args.no_model_selection,
    };
    let summary = summarize(&samples, &opts)?;
    let out = args.out.clone().unwrap_or_else(|| args.fit.join("summary"));
    summary.write(&out)?;
    if args.render {
        crate::render::render_summary(&summary, out.join("figures"))?;
    }
    print!("{}", summary.report());
    println!("summary written to {}", out.display());
    Ok(())
}

fn parse_pair(s: &str) -> Result<(usize, usize)> {
    let v: Vec<&str> = s.split(',').collect();
    let num = |x: &str| -> Result<usize> {
        x.trim()
            .parse::<usize>()
            .ok()
            .and_then(|n| n.checked_sub(1))
            .ok_or_else(|| Error::Config(format!("bad transition `{s}` (expected prev,cur, 1-based)")))
    };
    match v.as_slice() {
        [a, b] => Ok((num(a)?, num(b)?)),
        _ => Err(Error::Config(format!("bad transition `{s}` (expected prev,cur)"))),
    }
}

fn cmd_diag(args: &DiagArgs) -> Result<()> {
    let samples = read_fit(&args.fit)?;
    let mut selectors = Vec::new();
    if !args.transitions.is_empty() {
        let n_cov = samples.trans_covariates().len();
        let levels = match &args.cov_comb {
            Some(c) => zero_based(c, "cov-comb")?,
            None => vec![0; n_cov],
        };
        let individual = match &args.individual {
            Some(id) => Some(
                samples
                    .data
                    .individual_ids
                    .iter()
                    .position(|x| x == id)
                    .ok_or_else(|| Error::Selector(format!("unknown individual `{id}`")))?,
            ),
            None => None,
        };
        for t in &args.transitions {
            let (prev, cur) = parse_pair(t)?;
            selectors.push(Selector::Transition {
                levels: levels.clone(),
                prev,
                cur,
                individual,
            });
        }
    }
    for &k in &args.components {
        let k = k.checked_sub(1).ok_or_else(|| Error::Config("components are 1-based".into()))?;
        selectors.push(Selector::KernelShape(k));
        selectors.push(Selector::KernelRate(k));
    }
    if selectors.is_empty() {
        return Err(Error::Config("nothing to diagnose: give --transition and/or --component".into()));
    }
    let out = args.out.clone().unwrap_or_else(|| args.fit.join("diag"));
    for sel in &selectors {
        diagnostics::write_diagnostic(&out, &samples, sel, args.max_lag)?;
        let series = diagnostics::trace(&samples, sel)?;
        let r1 = diagnostics::acf(&series, Some(1.min(series.len().saturating_sub(1)))).ok();
        let mean = series.iter().sum::<f64>() / series.len().max(1) as f64;
        println!(
            "{:<32} mean {:>10.4}  lag-1 acf {}",
            sel.name(),
            mean,
            r1.and_then(|r| r.get(1).copied()).map_or("NA".to_string(), |x| format!("{x:.3}"))
        );
        if args.render {
            crate::render::render_trace(out.join(format!("trace_{}.svg", sel.name())), &sel.name(), &series)?;
        }
    }
    println!("diagnostics written to {}", out.display());
    Ok(())
}

fn cmd_select(args: &SelectArgs) -> Result<()> {
    let samples = read_fit(&args.fit)?;
    let s = selection_scores(&samples)?;
    println!("LPML {}", s.lpml);
    println!("WAIC {}", s.waic);
    Ok(())
}

fn cmd_simulate(args: &SimulateArgs) -> Result<()> {
    let kind: DemoKind = args.kind.parse()?;
    let out = match (&args.out, default_root()) {
        (Some(o), _) => o.clone(),
        (None, Some(r)) => r,
        (None, None) => return Err(Error::Config(format!("--out is required when {OUT_DIR_ENV} is not set"))),
    };
    let (data, spec) = make_demo_corpus(kind, args.seed)?;
    let stem = args.stem.clone().unwrap_or_else(|| kind.name().to_string());
    write_corpus(&out, &stem, &data, &spec)?;
    println!(
        "wrote {} transitions in {} sequences to {}",
        data.len(),
        data.num_sequences,
        out.join(format!("{stem}.csv")).display()
    );
    Ok(())
}

pub fn execute(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Fit(a) => cmd_fit(a),
        Command::Summary(a) => cmd_summary(a),
        Command::Diag(a) => cmd_diag(a),
        Command::Select(a) => cmd_select(a),
        Command::Simulate(a) => cmd_simulate(a),
    }
}

/// Parses arguments, runs the command and returns the process exit code:
/// 0 ok, 1 usage, 2 data validation, 3 numerical failure.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
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

    #[test]
    fn duration_specs() {
        assert_eq!(parse_duration_distr("ignore").unwrap(), DurationMode::Ignore);
        assert_eq!(
            parse_duration_distr("dirichlet:0.2231").unwrap(),
            DurationMode::Discretize { unit: 0.2231 }
        );
        assert_eq!(parse_duration_distr("gamma:3").unwrap().num_components(), Some(3));
        assert!(parse_duration_distr("weibull:2").is_err());
        assert!(parse_duration_distr("gamma:0").is_err());
    }

    #[test]
    fn both_effects_off_is_usage_error() {
        let cli = Cli::try_parse_from([
            "bmrmm", "fit", "--data", "x.csv", "--num-cov", "2", "--no-fixed-effect", "--no-random-effect", "--seed", "1",
            "--out", "o",
        ])
        .unwrap();
        let Command::Fit(a) = &cli.command else { unreachable!() };
        let e = build_config(a).unwrap_err();
        assert_eq!(e.exit_code(), 1);
    }

    #[test]
    fn default_run_length() {
        let cli = Cli::try_parse_from(["bmrmm", "fit", "--data", "x.csv", "--num-cov", "2", "--seed", "1", "--out", "o"])
            .unwrap();
        let Command::Fit(a) = &cli.command else { unreachable!() };
        let (cfg, _) = build_config(a).unwrap();
        assert_eq!(cfg.simsize, 10_000);
        assert_eq!(cfg.burnin(), 5_000);
    }

    #[test]
    fn transition_pairs() {
        assert_eq!(parse_pair("4,2").unwrap(), (3, 1));
        assert!(parse_pair("0,2").is_err());
    }
}
