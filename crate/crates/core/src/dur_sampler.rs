//! Gamma-mixture duration sub-model.
//!
//! Durations follow `Σ_k P(k) Ga(τ | α_k, β_k)` where the mixture
//! probabilities come from the shared hierarchy with one context and the
//! component as outcome. The previous state can enter as an extra clustered
//! covariate.

use serde::{Deserialize, Serialize};

use crate::datamodel::{MixedRadix, ModelConfig, ShapeUpdate};
use crate::datamodel::SequenceDataset;
use crate::dist::{self, ChainRng};
use crate::error::{Error, Result};
use crate::hierarchy::{label_map, Acceptance, HierarchyParams, HierarchySampler, HierarchyState, Layout, Obs};
use crate::special::{digamma, gamma_ln_pdf, ln_gamma, log_sum_exp, trigamma};

/// Maximum fixed-point iterations of the shape approximation.
pub const SHAPE_APPROX_MAX_ITER: usize = 10;
/// Relative tolerance on the approximating shape.
pub const SHAPE_APPROX_TOL: f64 = 1e-8;

/// Stored parameters of one duration draw.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DurationParams {
    pub mixture: HierarchyParams,
    pub shapes: Vec<f64>,
    pub rates: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DurationState {
    pub mixture: HierarchyState,
    pub shapes: Vec<f64>,
    pub rates: Vec<f64>,
    /// 0-based component of every duration record.
    pub comp_assignments: Vec<usize>,
}

impl DurationState {
    pub fn params(&self) -> DurationParams {
        DurationParams {
            mixture: self.mixture.params.clone(),
            shapes: self.shapes.clone(),
            rates: self.rates.clone(),
        }
    }
}

/// Per-component sufficient statistics (count, Σ τ, Σ log τ).
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ComponentStats {
    pub n: usize,
    pub sum: f64,
    pub sum_log: f64,
}

pub fn component_stats(tau: &[f64], comps: &[usize], k: usize) -> Vec<ComponentStats> {
    let mut out = vec![ComponentStats::default(); k];
    for (&t, &c) in tau.iter().zip(comps) {
        let s = &mut out[c];
        s.n += 1;
        s.sum += t;
        s.sum_log += t.ln();
    }
    out
}

/// Log of the unnormalized full conditional of a kernel shape:
/// `(a−1) log α − b α + α (n log β + Σ log τ) − n lnΓ(α)`.
pub fn shape_log_target(alpha: f64, n: usize, sum_log_tau: f64, log_beta: f64, prior: (f64, f64)) -> f64 {
    if !(alpha > 0.0) {
        return f64::NEG_INFINITY;
    }
    let (a, b) = prior;
    let nf = n as f64;
    (a - 1.0) * alpha.ln() - b * alpha + alpha * (nf * log_beta + sum_log_tau) - nf * ln_gamma(alpha)
}

/// Gamma (shape, rate) approximation of the shape full conditional, found by
/// matching first and second log-density derivatives at the mean of the
/// approximation and iterating to a fixed point.
pub fn approx_shape_conditional(n: usize, sum_log_tau: f64, log_beta: f64, prior: (f64, f64)) -> Result<(f64, f64)> {
    let (r0, s0) = prior;
    if n == 0 {
        return Ok((r0, s0));
    }
    let nf = n as f64;
    let t = nf * log_beta + sum_log_tau;
    let mut a = initial_shape(r0, s0, nf, t);
    let mut prev_a_shape = f64::NAN;
    let mut last = (f64::NAN, f64::NAN);
    for it in 0..SHAPE_APPROX_MAX_ITER {
        let tg = trigamma(a);
        let shape = r0 + nf * a * a * tg;
        let rate = s0 - t + nf * digamma(a) + nf * a * tg;
        last = (shape, rate);
        if !(rate > 0.0) || !shape.is_finite() {
            // the fixed point lies to the right
            a *= 2.0;
            continue;
        }
        if it > 0 && ((shape - prev_a_shape) / shape).abs() < SHAPE_APPROX_TOL {
            return Ok((shape, rate));
        }
        prev_a_shape = shape;
        a = shape / rate;
    }
    Err(Error::ShapeApproxNonConvergence {
        iterations: SHAPE_APPROX_MAX_ITER,
        shape: last.0,
        rate: last.1,
    })
}

/// Starting point from the Stirling forms ψ(a) ≈ log a − 1/(2a),
/// ψ'(a) ≈ 1/a + 1/(2a²): root of `(r0 + n/2)/a − n log a + t − s0`.
fn initial_shape(r0: f64, s0: f64, n: f64, t: f64) -> f64 {
    let k = r0 + n / 2.0;
    let c = t - s0;
    let mut u = 0.0f64;
    for _ in 0..200 {
        let e = (-u).exp();
        let h = k * e - n * u + c;
        let dh = -k * e - n;
        let step = (h / dh).clamp(-2.0, 2.0);
        u -= step;
        if step.abs() < 1e-12 {
            break;
        }
    }
    u.exp()
}

pub struct DurationSampler {
    pub hier: HierarchySampler,
    /// Dataset covariates used by the mixture fixed effect (the previous
    /// state is appended when enabled).
    pub covariates: Vec<usize>,
    pub include_prev_state: bool,
    pub tau: Vec<f64>,
    pub shape_priors: Vec<(f64, f64)>,
    pub rate_priors: Vec<(f64, f64)>,
    pub shape_update: ShapeUpdate,
    pub shape_acceptance: Acceptance,
}

/// Layout and observations of the duration mixture hierarchy.
pub fn duration_layout(data: &SequenceDataset, config: &ModelConfig, k: usize) -> (Layout, Vec<Obs>, Vec<usize>) {
    let covs = config.duration_covariates(data.num_covariates());
    let mut dims: Vec<usize> = covs.iter().map(|&j| data.covariate_cardinalities[j]).collect();
    if config.duration_incl_prev_state {
        dims.push(data.num_states);
    }
    let combos = MixedRadix::new(dims);
    let obs = data
        .records
        .iter()
        .map(|r| {
            let mut coords: Vec<usize> = covs.iter().map(|&j| r.covariates[j]).collect();
            if config.duration_incl_prev_state {
                coords.push(r.prev);
            }
            Obs {
                individual: r.individual as u32,
                combo: combos.index(coords) as u32,
                context: 0,
            }
        })
        .collect();
    let layout = Layout {
        combos,
        n_contexts: 1,
        n_outcomes: k,
        n_individuals: data.num_individuals(),
        fixed_effect: config.fixed_effect,
        random_effect: config.random_effect,
    };
    (layout, obs, covs)
}

impl DurationSampler {
    pub fn new(data: &SequenceDataset, config: &ModelConfig) -> Result<Self> {
        let (shape_priors, rate_priors) = config
            .kernel_priors()
            .ok_or_else(|| Error::Config("duration sampler needs a gamma mixture".into()))?;
        let tau = data
            .records
            .iter()
            .enumerate()
            .map(|(i, r)| r.duration.ok_or_else(|| Error::validation(i + 2, "Duration", "missing duration")))
            .collect::<Result<Vec<f64>>>()?;
        let (layout, obs, covariates) = duration_layout(data, config, shape_priors.len());
        Ok(DurationSampler {
            hier: HierarchySampler::new(layout, &config.hyper.dur, obs),
            covariates,
            include_prev_state: config.duration_incl_prev_state,
            tau,
            shape_priors,
            rate_priors,
            shape_update: config.shape_update,
            shape_acceptance: Acceptance::default(),
        })
    }

    pub fn n_components(&self) -> usize {
        self.shape_priors.len()
    }

    /// Kernels from a quantile split of the durations with moment matching
    /// per group, ordered by increasing mean.
    pub fn init_state(&self, rng: &mut ChainRng) -> DurationState {
        let k = self.n_components();
        let n = self.tau.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| self.tau[a].total_cmp(&self.tau[b]));
        let mut comps = vec![0usize; n];
        for (rank, &i) in order.iter().enumerate() {
            comps[i] = (rank * k / n.max(1)).min(k - 1);
        }
        let stats = component_stats(&self.tau, &comps, k);
        let mut shapes = Vec::with_capacity(k);
        let mut rates = Vec::with_capacity(k);
        for (g, s) in stats.iter().enumerate() {
            let (a, b) = if s.n >= 2 {
                let mean = s.sum / s.n as f64;
                let var = self
                    .tau
                    .iter()
                    .zip(&comps)
                    .filter(|&(_, &c)| c == g)
                    .map(|(&t, _)| (t - mean).powi(2))
                    .sum::<f64>()
                    / (s.n - 1) as f64;
                if var > 0.0 {
                    (mean * mean / var, mean / var)
                } else {
                    (1.0, 1.0 / mean)
                }
            } else if s.n == 1 {
                (1.0, s.n as f64 / s.sum)
            } else {
                let (a, b) = self.shape_priors[g];
                let (c, d) = self.rate_priors[g];
                (a / b, c / d)
            };
            shapes.push(a);
            rates.push(b);
        }
        let mixture = self.hier.init_state(&comps, rng);
        DurationState {
            mixture,
            shapes,
            rates,
            comp_assignments: comps,
        }
    }

    /// Component of every duration, drawn with probability proportional to
    /// `P(k) Ga(τ | α_k, β_k)`.
    pub fn sample_component_assignments(&self, state: &mut DurationState, rng: &mut ChainRng) -> Result<()> {
        let k = self.n_components();
        if k == 1 {
            state.comp_assignments.iter_mut().for_each(|c| *c = 0);
            return Ok(());
        }
        let l = &self.hier.layout;
        let params = &state.mixture.params;
        let map = if l.fixed_effect {
            label_map(&l.combos, &params.labels)
        } else {
            vec![0; l.n_combos()]
        };
        let mut probs = vec![0.0; k];
        let mut logw = vec![0.0; k];
        for (i, (o, &tau)) in self.hier.obs.iter().zip(&self.tau).enumerate() {
            self.hier.outcome_probs(params, &map, o, &mut probs);
            for c in 0..k {
                logw[c] = probs[c].ln() + gamma_ln_pdf(tau, state.shapes[c], state.rates[c]);
            }
            state.comp_assignments[i] = dist::categorical_from_log(rng, &logw).ok_or_else(|| {
                Error::Numerical(format!("duration record {} has zero density under every component", i + 1))
            })?;
        }
        Ok(())
    }

    /// Conjugate rate draws: β_k ∼ Ga(c_k + n_k α_k, d_k + Σ τ).
    pub fn update_rates(&self, state: &mut DurationState, stats: &[ComponentStats], rng: &mut ChainRng) {
        for (k, s) in stats.iter().enumerate() {
            let (c, d) = self.rate_priors[k];
            state.rates[k] = dist::gamma(rng, c + s.n as f64 * state.shapes[k], d + s.sum);
        }
    }

    /// Shape draws from the gamma approximation, corrected by an
    /// independence Metropolis-Hastings step unless approximate updates are
    /// configured.
    pub fn update_shapes(&mut self, state: &mut DurationState, stats: &[ComponentStats], rng: &mut ChainRng) -> Result<()> {
        for (k, s) in stats.iter().enumerate() {
            let prior = self.shape_priors[k];
            let log_beta = state.rates[k].ln();
            let (a, b) = approx_shape_conditional(s.n, s.sum_log, log_beta, prior)?;
            let prop = dist::gamma(rng, a, b);
            if self.shape_update == ShapeUpdate::Approximate {
                state.shapes[k] = prop;
                continue;
            }
            let cur = state.shapes[k];
            let log_ratio = shape_log_target(prop, s.n, s.sum_log, log_beta, prior)
                - shape_log_target(cur, s.n, s.sum_log, log_beta, prior)
                + gamma_ln_pdf(cur, a, b)
                - gamma_ln_pdf(prop, a, b);
            let accept = prop > 0.0 && (log_ratio >= 0.0 || dist::open_unit(rng).ln() < log_ratio);
            self.shape_acceptance.record(accept);
            if accept {
                state.shapes[k] = prop;
            }
        }
        Ok(())
    }

    /// Hierarchy sweep on the current component assignments.
    pub fn update_duration_mixture_hierarchy(&mut self, state: &mut DurationState, rng: &mut ChainRng, adapt: bool) -> Result<()> {
        self.hier.sweep(&mut state.mixture, &state.comp_assignments, rng, adapt)
    }

    /// One sweep: assignments, mixture hierarchy, rates, shapes.
    pub fn sweep(&mut self, state: &mut DurationState, rng: &mut ChainRng, adapt: bool) -> Result<()> {
        self.sample_component_assignments(state, rng)?;
        self.update_duration_mixture_hierarchy(state, rng, adapt)?;
        let stats = component_stats(&self.tau, &state.comp_assignments, self.n_components());
        self.update_rates(state, &stats, rng);
        self.update_shapes(state, &stats, rng)
    }

    /// Mixture probabilities of every record under `params`, row-major
    /// `[record][component]`.
    pub fn record_mixture_probs(&self, params: &DurationParams) -> Vec<f64> {
        let l = &self.hier.layout;
        let k = self.n_components();
        let map = if l.fixed_effect {
            label_map(&l.combos, &params.mixture.labels)
        } else {
            vec![0; l.n_combos()]
        };
        let mut out = vec![0.0; self.tau.len() * k];
        for (o, row) in self.hier.obs.iter().zip(out.chunks_mut(k)) {
            if k == 1 {
                row[0] = 1.0;
            } else {
                self.hier.outcome_probs(&params.mixture, &map, o, row);
            }
        }
        out
    }

    /// Log mixture density of every duration under `params`.
    pub fn record_loglik(&self, params: &DurationParams) -> Vec<f64> {
        let k = self.n_components();
        let probs = self.record_mixture_probs(params);
        let mut terms = vec![0.0; k];
        self.tau
            .iter()
            .zip(probs.chunks(k))
            .map(|(&tau, p)| mixture_ln_density(tau, p, &params.shapes, &params.rates, &mut terms))
            .collect()
    }
}

/// `log Σ_k p_k Ga(τ | α_k, β_k)`, stably.
pub fn mixture_ln_density(tau: f64, probs: &[f64], shapes: &[f64], rates: &[f64], scratch: &mut [f64]) -> f64 {
    for (((t, &p), &a), &b) in scratch.iter_mut().zip(probs).zip(shapes).zip(rates) {
        *t = p.ln() + gamma_ln_pdf(tau, a, b);
    }
    log_sum_exp(scratch)
}

/// Log-likelihood matrix `[draw][record]` of the durations.
pub fn duration_loglik_matrix(sampler: &DurationSampler, draws: &[DurationParams]) -> Vec<Vec<f64>> {
    draws.iter().map(|d| sampler.record_loglik(d)).collect()
}
