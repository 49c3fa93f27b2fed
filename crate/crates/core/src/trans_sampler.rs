//! Transition sub-model: the shared hierarchy with the previous state as
//! context and the current state as outcome.

use crate::datamodel::{MixedRadix, ModelConfig, SequenceDataset};
use crate::dist::ChainRng;
use crate::error::{Error, Result};
use crate::hierarchy::{label_map, HierarchyParams, HierarchySampler, HierarchyState, Layout, Obs};

/// Sampler state of the transition model.
pub type TransitionState = HierarchyState;
/// Stored parameters of one transition draw.
pub type TransitionParams = HierarchyParams;

pub struct TransitionSampler {
    pub hier: HierarchySampler,
    /// 0-based dataset covariates used by the fixed effect.
    pub covariates: Vec<usize>,
    outcomes: Vec<usize>,
}

/// Layout and observations of the transition hierarchy.
pub fn transition_layout(data: &SequenceDataset, config: &ModelConfig) -> (Layout, Vec<Obs>, Vec<usize>) {
    let covs = config.trans_covariates(data.num_covariates());
    let combos = MixedRadix::new(covs.iter().map(|&j| data.covariate_cardinalities[j]).collect());
    let obs = data
        .records
        .iter()
        .map(|r| Obs {
            individual: r.individual as u32,
            combo: combos.index(covs.iter().map(|&j| r.covariates[j])) as u32,
            context: r.prev as u32,
        })
        .collect();
    let layout = Layout {
        combos,
        n_contexts: data.num_states,
        n_outcomes: data.num_states,
        n_individuals: data.num_individuals(),
        fixed_effect: config.fixed_effect,
        random_effect: config.random_effect,
    };
    (layout, obs, covs)
}

impl TransitionSampler {
    pub fn new(data: &SequenceDataset, config: &ModelConfig) -> Self {
        let (layout, obs, covariates) = transition_layout(data, config);
        TransitionSampler {
            hier: HierarchySampler::new(layout, &config.hyper.trans, obs),
            covariates,
            outcomes: data.records.iter().map(|r| r.cur).collect(),
        }
    }

    pub fn layout(&self) -> &Layout {
        &self.hier.layout
    }

    pub fn init_state(&self, rng: &mut ChainRng) -> TransitionState {
        self.hier.init_state(&self.outcomes, rng)
    }

    pub fn sweep(&mut self, state: &mut TransitionState, rng: &mut ChainRng, adapt: bool) -> Result<()> {
        self.hier.sweep(state, &self.outcomes, rng, adapt)
    }

    pub fn outcomes(&self) -> &[usize] {
        &self.outcomes
    }
}

/// Transition matrix `[prev][cur]` for raw covariate levels `levels` (one per
/// model covariate). With an individual, rows mix the fixed and individual
/// vectors through the weights; without one, rows are the fixed-effect
/// (exogenous) vectors, or the base vectors when the fixed effect is off.
pub fn posterior_transition_matrix(
    layout: &Layout,
    params: &TransitionParams,
    levels: &[usize],
    individual: Option<usize>,
) -> Result<Vec<f64>> {
    let d = layout.n_outcomes;
    if levels.len() != layout.n_covariates() {
        return Err(Error::Selector(format!(
            "expected {} covariate levels, got {}",
            layout.n_covariates(),
            levels.len()
        )));
    }
    for (j, (&l, &card)) in levels.iter().zip(layout.cov_cards()).enumerate() {
        if l >= card {
            return Err(Error::Selector(format!("covariate {} has no level {}", j + 1, l + 1)));
        }
    }
    if let Some(i) = individual {
        if i >= layout.n_individuals {
            return Err(Error::Selector(format!("no individual {}", i + 1)));
        }
    }
    let label_combo = if layout.fixed_effect {
        Some(layout.combos.index(levels.iter().zip(&params.labels).map(|(&l, lab)| lab[l])))
    } else {
        None
    };
    let mut out = vec![0.0; d * d];
    for prev in 0..d {
        let row = &mut out[prev * d..(prev + 1) * d];
        let fixed = label_combo.map(|h| &params.lambda_fixed[layout.fixed_offset(h, prev)..][..d]);
        match (individual, fixed) {
            (None, Some(f)) => row.copy_from_slice(f),
            (None, None) => row.copy_from_slice(&params.lambda0[prev * d..(prev + 1) * d]),
            (Some(i), f) => {
                let ind = layout.random_effect.then(|| &params.lambda_indiv[layout.indiv_offset(i, prev)..][..d]);
                match (f, ind) {
                    (Some(f), Some(g)) => {
                        let w = params.pi0[layout.weight_index(i, prev)];
                        for ((x, &a), &b) in row.iter_mut().zip(f).zip(g) {
                            *x = w * a + (1.0 - w) * b;
                        }
                    }
                    (Some(f), None) => row.copy_from_slice(f),
                    (None, Some(g)) => row.copy_from_slice(g),
                    (None, None) => unreachable!("at least one effect is enabled"),
                }
            }
        }
    }
    Ok(out)
}

/// Log-probability of every transition record under `params`.
pub fn transition_loglik(sampler: &TransitionSampler, params: &TransitionParams) -> Vec<f64> {
    let h = &sampler.hier;
    let map = if h.layout.fixed_effect {
        label_map(&h.layout.combos, &params.labels)
    } else {
        vec![0; h.layout.n_combos()]
    };
    let mut buf = vec![0.0; h.layout.n_outcomes];
    h.obs
        .iter()
        .zip(sampler.outcomes())
        .map(|(o, &y)| {
            h.outcome_probs(params, &map, o, &mut buf);
            buf[y].ln()
        })
        .collect()
}
