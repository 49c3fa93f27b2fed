//! Trace extraction and autocorrelation.

use std::io::Write;
use std::path::Path;

use crate::engine::PosteriorSamples;
use crate::error::{Error, Result};
use crate::trans_sampler::posterior_transition_matrix;

/// Which scalar to trace. All indices are 0-based.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Selector {
    /// Transition probability `prev → cur` for raw levels of the transition
    /// covariates; exogenous when `individual` is `None`.
    Transition {
        levels: Vec<usize>,
        prev: usize,
        cur: usize,
        individual: Option<usize>,
    },
    KernelShape(usize),
    KernelRate(usize),
}

impl Selector {
    /// Column name used in diagnostic tables (1-based).
    pub fn name(&self) -> String {
        let join = |v: &[usize]| v.iter().map(|x| (x + 1).to_string()).collect::<Vec<_>>().join("_");
        match self {
            Selector::Transition {
                levels,
                prev,
                cur,
                individual,
            } => {
                let who = individual.map_or(String::new(), |i| format!("_ind{}", i + 1));
                format!("trans_{}_{}to{}{}", join(levels), prev + 1, cur + 1, who)
            }
            Selector::KernelShape(k) => format!("shape_comp{}", k + 1),
            Selector::KernelRate(k) => format!("rate_comp{}", k + 1),
        }
    }
}

/// Kept-iteration series of one parameter.
pub fn trace(samples: &PosteriorSamples, selector: &Selector) -> Result<Vec<f64>> {
    match selector {
        Selector::Transition {
            levels,
            prev,
            cur,
            individual,
        } => {
            let layout = samples.trans_layout();
            let d = layout.n_outcomes;
            if *prev >= d || *cur >= d {
                return Err(Error::Selector(format!(
                    "transition {}→{} outside {d} states",
                    prev + 1,
                    cur + 1
                )));
            }
            samples
                .trans_draws
                .iter()
                .map(|p| posterior_transition_matrix(&layout, p, levels, *individual).map(|m| m[prev * d + cur]))
                .collect()
        }
        Selector::KernelShape(k) | Selector::KernelRate(k) => {
            let n = samples
                .config
                .duration_mode
                .num_components()
                .ok_or_else(|| Error::DurationModelRequired("kernel traces need a gamma mixture fit".into()))?;
            if *k >= n {
                return Err(Error::Selector(format!("no component {} (K = {n})", k + 1)));
            }
            let shape = matches!(selector, Selector::KernelShape(_));
            Ok(samples
                .dur_draws
                .iter()
                .map(|d| if shape { d.shapes[*k] } else { d.rates[*k] })
                .collect())
        }
    }
}

/// Default number of lags: min(50, len − 1).
pub fn default_max_lag(len: usize) -> usize {
    50.min(len.saturating_sub(1))
}

/// Sample autocorrelation at lags 0..=max_lag with the biased (denominator
/// n) autocovariance.
pub fn acf(series: &[f64], max_lag: Option<usize>) -> Result<Vec<f64>> {
    let n = series.len();
    if n < 2 {
        return Err(Error::Numerical("autocorrelation needs at least two values".into()));
    }
    let max_lag = max_lag.unwrap_or_else(|| default_max_lag(n));
    if max_lag >= n {
        return Err(Error::Selector(format!("max lag {max_lag} needs more than {n} values")));
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    let dev: Vec<f64> = series.iter().map(|x| x - mean).collect();
    let c0: f64 = dev.iter().map(|x| x * x).sum();
    if !(c0 > 0.0) {
        return Err(Error::Numerical("autocorrelation of a constant series".into()));
    }
    Ok((0..=max_lag)
        .map(|h| {
            if h == 0 {
                1.0
            } else {
                dev[..n - h].iter().zip(&dev[h..]).map(|(a, b)| a * b).sum::<f64>() / c0
            }
        })
        .collect())
}

/// Writes `iteration,value` and `lag,acf` tables for one selector into `dir`.
pub fn write_diagnostic(dir: &Path, samples: &PosteriorSamples, selector: &Selector, max_lag: Option<usize>) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let series = trace(samples, selector)?;
    let name = selector.name();
    let write = |file: String, header: &str, rows: Vec<String>| -> Result<()> {
        let path = dir.join(file);
        let mut f = std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
        writeln!(f, "{header}").map_err(|e| Error::io(&path, e))?;
        for r in rows {
            writeln!(f, "{r}").map_err(|e| Error::io(&path, e))?;
        }
        Ok(())
    };
    write(
        format!("trace_{name}.csv"),
        "iteration,value",
        series.iter().enumerate().map(|(i, v)| format!("{},{v}", i + 1)).collect(),
    )?;
    match acf(&series, max_lag) {
        Ok(r) => write(
            format!("acf_{name}.csv"),
            "lag,acf",
            r.iter().enumerate().map(|(h, v)| format!("{h},{v}")).collect(),
        ),
        // a constant trace has no autocorrelation; the trace table still stands
        Err(Error::Numerical(_)) => Ok(()),
        Err(e) => Err(e),
    }
}
