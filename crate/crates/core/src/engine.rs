//! Full MCMC runs.
//!
//! Chain `c` of a run with root seed `s` draws from the ChaCha20 stream
//! `(s, c)`; [`fit`] is chain 0, so `run_chains(.., 1)` reproduces it.

use std::collections::BTreeMap;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datamodel::{discretize_durations, DurationMode, ModelConfig, SequenceDataset};
use crate::dist::chain_rng;
use crate::dur_sampler::{duration_layout, DurationParams, DurationSampler};
use crate::error::{Error, Result};
use crate::hierarchy::{check_params, HierarchyAcceptance, Layout};
use crate::trans_sampler::{transition_layout, TransitionParams, TransitionSampler};

/// Acceptance tally of one Metropolis-Hastings family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AcceptanceRate {
    pub accepted: u64,
    pub proposed: u64,
}

impl AcceptanceRate {
    pub fn rate(&self) -> Option<f64> {
        (self.proposed > 0).then(|| self.accepted as f64 / self.proposed as f64)
    }
}

/// Wall-clock seconds per phase.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub init: f64,
    pub burnin: f64,
    pub sampling: f64,
}

/// Stored draws of one chain together with what is needed to interpret them.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorSamples {
    pub config: ModelConfig,
    pub chain: usize,
    /// The dataset actually modelled (after discretization, if any).
    pub data: SequenceDataset,
    pub trans_draws: Vec<TransitionParams>,
    /// Empty unless durations are modelled with a gamma mixture.
    pub dur_draws: Vec<DurationParams>,
    /// Keyed by `trans.*`, `dur.*`.
    pub acceptance: BTreeMap<String, AcceptanceRate>,
    pub timing: Timing,
}

impl PosteriorSamples {
    pub fn kept(&self) -> usize {
        self.trans_draws.len()
    }

    pub fn has_duration_model(&self) -> bool {
        matches!(self.config.duration_mode, DurationMode::GammaMixture { .. })
    }

    pub fn trans_layout(&self) -> Layout {
        transition_layout(&self.data, &self.config).0
    }

    /// Dataset covariates used by the transition fixed effect.
    pub fn trans_covariates(&self) -> Vec<usize> {
        self.config.trans_covariates(self.data.num_covariates())
    }

    pub fn dur_layout(&self) -> Option<Layout> {
        let k = self.config.duration_mode.num_components()?;
        Some(duration_layout(&self.data, &self.config, k).0)
    }

    /// Names of the clustered duration covariates, the previous state last
    /// when included.
    pub fn dur_covariate_names(&self) -> Vec<String> {
        let mut names: Vec<String> = self
            .config
            .duration_covariates(self.data.num_covariates())
            .iter()
            .map(|&j| self.data.covariate_names[j].clone())
            .collect();
        if self.config.duration_incl_prev_state {
            names.push(PREV_STATE_COVARIATE.to_string());
        }
        names
    }

    /// Level labels of the clustered duration covariates.
    pub fn dur_covariate_levels(&self) -> Vec<Vec<String>> {
        let mut levels: Vec<Vec<String>> = self
            .config
            .duration_covariates(self.data.num_covariates())
            .iter()
            .map(|&j| self.data.covariate_labels[j].clone())
            .collect();
        if self.config.duration_incl_prev_state {
            levels.push(self.data.state_labels.clone());
        }
        levels
    }

    /// Duration sampler bound to this fit's data, for likelihood and
    /// mixture-probability evaluation.
    pub fn duration_model(&self) -> Result<DurationSampler> {
        if !self.has_duration_model() {
            return Err(Error::DurationModelRequired(
                "the fit does not model durations with a gamma mixture".into(),
            ));
        }
        DurationSampler::new(&self.data, &self.config)
    }

    /// Duration log-likelihood matrix `[kept draw][record]`.
    pub fn loglik(&self) -> Result<Vec<Vec<f64>>> {
        let model = self.duration_model()?;
        Ok(crate::dur_sampler::duration_loglik_matrix(&model, &self.dur_draws))
    }

    /// Checks every stored snapshot against the simplex, positivity and
    /// partition invariants. Returns the number of violations.
    pub fn invariant_violations(&self) -> usize {
        let tl = self.trans_layout();
        let mut bad = self.trans_draws.iter().filter(|p| check_params(&tl, p).is_err()).count();
        if let Some(dl) = self.dur_layout() {
            for d in &self.dur_draws {
                let kernels_ok = d
                    .shapes
                    .iter()
                    .chain(&d.rates)
                    .all(|&x| x > 0.0 && x.is_finite());
                if check_params(&dl, &d.mixture).is_err() || !kernels_ok {
                    bad += 1;
                }
            }
        }
        bad
    }
}

/// Name of the previous state when used as a duration covariate.
pub const PREV_STATE_COVARIATE: &str = "prev_state";

/// Checks the configuration against the dataset and returns the dataset to
/// model.
pub fn prepare_data(data: &SequenceDataset, config: &ModelConfig) -> Result<SequenceDataset> {
    config.validate(data.num_covariates())?;
    data.validate()?;
    match &config.duration_mode {
        DurationMode::Ignore => Ok(data.clone()),
        DurationMode::Discretize { unit } => discretize_durations(data, *unit),
        DurationMode::GammaMixture { .. } => {
            if !data.has_durations {
                return Err(Error::Data("a gamma mixture needs a Duration column".into()));
            }
            Ok(data.clone())
        }
    }
}

fn ledger(prefix: &str, a: &HierarchyAcceptance, out: &mut BTreeMap<String, AcceptanceRate>) {
    for (name, x) in [
        ("lambda0", &a.lambda0),
        ("clusters", &a.clusters),
        ("alpha0", &a.alpha0),
        ("alpha_indiv", &a.alpha_indiv),
    ] {
        out.insert(
            format!("{prefix}.{name}"),
            AcceptanceRate {
                accepted: x.accepted,
                proposed: x.proposed,
            },
        );
    }
}

fn run_chain(data: &SequenceDataset, config: &ModelConfig, chain: usize) -> Result<PosteriorSamples> {
    let t0 = Instant::now();
    let data = prepare_data(data, config)?;
    let mut rng = chain_rng(config.seed, chain as u64);
    let mut trans = TransitionSampler::new(&data, config);
    let mut trans_state = trans.init_state(&mut rng);
    let mut dur = match config.duration_mode {
        DurationMode::GammaMixture { .. } => Some(DurationSampler::new(&data, config)?),
        _ => None,
    };
    let mut dur_state = dur.as_ref().map(|d| d.init_state(&mut rng));
    let mut timing = Timing {
        init: t0.elapsed().as_secs_f64(),
        ..Timing::default()
    };
    let burnin = config.burnin();
    let kept = config.kept_iterations();
    let mut trans_draws = Vec::with_capacity(kept);
    let mut dur_draws = Vec::with_capacity(if dur.is_some() { kept } else { 0 });
    let mut phase = Instant::now();
    for t in 1..=config.simsize {
        let adapt = t <= burnin;
        trans.sweep(&mut trans_state, &mut rng, adapt)?;
        if let (Some(d), Some(s)) = (dur.as_mut(), dur_state.as_mut()) {
            d.sweep(s, &mut rng, adapt)?;
        }
        if t == burnin {
            timing.burnin = phase.elapsed().as_secs_f64();
            phase = Instant::now();
        }
        if config.is_kept(t) {
            trans_draws.push(trans_state.params.clone());
            if let Some(s) = &dur_state {
                dur_draws.push(s.params());
            }
        }
    }
    timing.sampling = phase.elapsed().as_secs_f64();
    let mut acceptance = BTreeMap::new();
    ledger("trans", &trans.hier.acceptance, &mut acceptance);
    if let Some(d) = &dur {
        ledger("dur", &d.hier.acceptance, &mut acceptance);
        acceptance.insert(
            "dur.shapes".into(),
            AcceptanceRate {
                accepted: d.shape_acceptance.accepted,
                proposed: d.shape_acceptance.proposed,
            },
        );
    }
    Ok(PosteriorSamples {
        config: config.clone(),
        chain,
        data,
        trans_draws,
        dur_draws,
        acceptance,
        timing,
    })
}

/// Runs one chain.
pub fn fit(data: &SequenceDataset, config: &ModelConfig) -> Result<PosteriorSamples> {
    run_chain(data, config, 0)
}

/// Runs `n_chains` independent chains, in parallel on the current rayon
/// pool. Output order follows the chain index.
pub fn run_chains(data: &SequenceDataset, config: &ModelConfig, n_chains: usize) -> Result<Vec<PosteriorSamples>> {
    if n_chains == 0 {
        return Err(Error::Config("at least one chain is required".into()));
    }
    (0..n_chains)
        .into_par_iter()
        .map(|c| run_chain(data, config, c))
        .collect()
}

/// Potential scale reduction factor of a scalar across chains.
pub fn potential_scale_reduction(chains: &[Vec<f64>]) -> Option<f64> {
    let m = chains.len();
    let n = chains.iter().map(Vec::len).min()?;
    if m < 2 || n < 2 {
        return None;
    }
    let means: Vec<f64> = chains.iter().map(|c| c[..n].iter().sum::<f64>() / n as f64).collect();
    let grand = means.iter().sum::<f64>() / m as f64;
    let b = n as f64 / (m - 1) as f64 * means.iter().map(|x| (x - grand).powi(2)).sum::<f64>();
    let w = chains
        .iter()
        .zip(&means)
        .map(|(c, mu)| c[..n].iter().map(|x| (x - mu).powi(2)).sum::<f64>() / (n - 1) as f64)
        .sum::<f64>()
        / m as f64;
    let var = (n - 1) as f64 / n as f64 * w + b / n as f64;
    Some((var / w).sqrt())
}
