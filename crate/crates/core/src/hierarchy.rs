//! Mixed-effect Dirichlet hierarchy shared by the transition and duration
//! sub-models.
//!
//! Each observation has an individual, a combination of clustered covariate
//! levels, a context and an outcome. Its outcome distribution is
//!
//! ```text
//! P(· | i, x, c) = π₀⁽ⁱ⁾(c) λ_fixed[h(x)](· | c) + (1 − π₀⁽ⁱ⁾(c)) λ_indiv⁽ⁱ⁾(· | c)
//! ```
//!
//! where `h(x)` maps raw covariate levels to cluster labels. For transitions
//! the context is the previous state and the outcome the current state; for
//! durations there is a single context and the outcome is the mixture
//! component. A per-observation allocation indicator (fixed or individual
//! branch) restores conjugacy for the probability vectors and weights.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::datamodel::{HierarchyPriors, MixedRadix};
use crate::dist::{self, ChainRng};
use crate::error::{Error, Result};
use crate::special::{dirichlet_multinomial_ln, ln_gamma};

/// Sweeps between step-size adaptations during burn-in.
pub const ADAPT_WINDOW: u64 = 50;
const TARGET_ACCEPT_LOW: f64 = 0.2;
const TARGET_ACCEPT_HIGH: f64 = 0.5;

/// Dimensions of one hierarchy.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    /// Number of levels of each clustered covariate. Raw level combinations
    /// and cluster-label combinations share this indexer.
    pub combos: MixedRadix,
    pub n_contexts: usize,
    pub n_outcomes: usize,
    pub n_individuals: usize,
    pub fixed_effect: bool,
    pub random_effect: bool,
}

impl Layout {
    pub fn cov_cards(&self) -> &[usize] {
        self.combos.dims()
    }

    pub fn n_covariates(&self) -> usize {
        self.combos.dims().len()
    }

    pub fn n_combos(&self) -> usize {
        self.combos.size()
    }

    pub fn both_effects(&self) -> bool {
        self.fixed_effect && self.random_effect
    }

    #[inline]
    pub fn fixed_offset(&self, combo: usize, ctx: usize) -> usize {
        (combo * self.n_contexts + ctx) * self.n_outcomes
    }

    #[inline]
    pub fn indiv_offset(&self, ind: usize, ctx: usize) -> usize {
        (ind * self.n_contexts + ctx) * self.n_outcomes
    }

    #[inline]
    pub fn weight_index(&self, ind: usize, ctx: usize) -> usize {
        ind * self.n_contexts + ctx
    }
}

/// Static part of one observation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Obs {
    pub individual: u32,
    /// Index of the raw covariate-level combination.
    pub combo: u32,
    pub context: u32,
}

/// Priors with defaults resolved against the layout.
#[derive(Debug, Clone, PartialEq)]
pub struct Priors {
    pub cluster_concentration: Vec<f64>,
    pub top_concentration: f64,
    pub top_base: Vec<f64>,
    pub fixed_concentration: (f64, f64),
    pub indiv_concentration: (f64, f64),
    pub weight: (f64, f64),
}

impl Priors {
    pub fn resolve(p: &HierarchyPriors, layout: &Layout) -> Self {
        Priors {
            cluster_concentration: (0..layout.n_covariates()).map(|j| p.cluster_concentration(j)).collect(),
            top_concentration: p.top_concentration,
            top_base: p.top_base(layout.n_outcomes),
            fixed_concentration: p.fixed_concentration_prior,
            indiv_concentration: p.indiv_concentration_prior,
            weight: p.weight_prior,
        }
    }
}

/// Parameters of one hierarchy at one iteration. Vectors belonging to a
/// disabled effect are empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HierarchyParams {
    /// `[label combo][context][outcome]`, over the full label grid.
    pub lambda_fixed: Vec<f64>,
    /// `[individual][context][outcome]`.
    pub lambda_indiv: Vec<f64>,
    /// `[context][outcome]`.
    pub lambda0: Vec<f64>,
    /// Fixed-branch weight, `[individual][context]`. Empty unless both
    /// effects are on.
    pub pi0: Vec<f64>,
    /// Cluster label of every level of every clustered covariate, canonical
    /// (first appearance order, 0-based).
    pub labels: Vec<Vec<usize>>,
    /// Cluster probabilities per covariate (one entry per possible label).
    pub mu: Vec<Vec<f64>>,
    pub alpha0: f64,
    pub alpha_indiv: f64,
}

/// Full sampler state: parameters plus the per-observation allocations
/// (`true` = fixed branch).
#[derive(Debug, Clone, PartialEq)]
pub struct HierarchyState {
    pub params: HierarchyParams,
    pub allocations: Vec<bool>,
}

/// Number of distinct clusters in a label vector.
pub fn num_clusters(labels: &[usize]) -> usize {
    let mut seen: Vec<usize> = labels.to_vec();
    seen.sort_unstable();
    seen.dedup();
    seen.len()
}

/// Relabels to 0..k by order of first appearance. Returns the old → new map.
pub fn canonicalize(labels: &mut [usize]) -> Vec<Option<usize>> {
    let max = labels.iter().copied().max().unwrap_or(0);
    let mut map = vec![None; max + 1];
    let mut next = 0;
    for l in labels.iter_mut() {
        let new = *map[*l].get_or_insert_with(|| {
            next += 1;
            next - 1
        });
        *l = new;
    }
    map
}

/// Log prior of the partition induced by `labels`, with the cluster
/// probabilities μ ∼ Dir(α, …, α) over `d` possible labels integrated out and
/// summed over every labelling of the partition.
pub fn log_partition_prior(labels: &[usize], alpha: f64) -> f64 {
    let d = labels.len();
    let mut sizes = vec![0usize; d.max(labels.iter().copied().max().map_or(0, |m| m + 1))];
    for &l in labels {
        sizes[l] += 1;
    }
    let df = d as f64;
    let mut out = ln_gamma(df * alpha) - ln_gamma(df * alpha + df);
    let mut k = 0;
    for &n in sizes.iter().filter(|&&n| n > 0) {
        k += 1;
        out += ln_gamma(alpha + n as f64) - ln_gamma(alpha);
    }
    // number of labellings: d!/(d−k)!
    out + ln_gamma(df + 1.0) - ln_gamma((d - k) as f64 + 1.0)
}

/// Maps every raw combination to its label combination under `labels`.
pub fn label_map(combos: &MixedRadix, labels: &[Vec<usize>]) -> Vec<usize> {
    (0..combos.size())
        .map(|raw| {
            let coords = combos.coords(raw);
            combos.index(coords.iter().zip(labels).map(|(&l, lab)| lab[l]))
        })
        .collect()
}

/// Label combinations whose every coordinate is a label in use.
pub fn active_combos(combos: &MixedRadix, labels: &[Vec<usize>]) -> Vec<usize> {
    let used: Vec<Vec<bool>> = labels
        .iter()
        .zip(combos.dims())
        .map(|(lab, &d)| {
            let mut u = vec![false; d];
            for &l in lab {
                u[l] = true;
            }
            u
        })
        .collect();
    (0..combos.size())
        .filter(|&c| combos.coords(c).iter().zip(&used).all(|(&h, u)| u[h]))
        .collect()
}

/// Counts of fixed-allocated observations aggregated from raw combinations
/// to label combinations, `[label combo][context][outcome]`.
pub fn aggregate_fixed(layout: &Layout, fixed_raw: &[u32], map: &[usize]) -> Vec<u32> {
    let cell = layout.n_contexts * layout.n_outcomes;
    let mut agg = vec![0u32; layout.n_combos() * cell];
    for (raw, &lab) in map.iter().enumerate() {
        let src = &fixed_raw[raw * cell..(raw + 1) * cell];
        let dst = &mut agg[lab * cell..(lab + 1) * cell];
        for (d, s) in dst.iter_mut().zip(src) {
            *d += s;
        }
    }
    agg
}

/// Log marginal likelihood of the fixed-allocated counts with every fixed
/// probability vector integrated out against Dir(α₀ λ₀(·|c)).
pub fn log_marginal_fixed(
    layout: &Layout,
    fixed_raw: &[u32],
    labels: &[Vec<usize>],
    alpha0: f64,
    lambda0: &[f64],
) -> f64 {
    let map = label_map(&layout.combos, labels);
    let agg = aggregate_fixed(layout, fixed_raw, &map);
    let o = layout.n_outcomes;
    let conc: Vec<f64> = lambda0.iter().map(|&l| alpha0 * l).collect();
    let mut out = 0.0;
    for combo in 0..layout.n_combos() {
        for ctx in 0..layout.n_contexts {
            let off = layout.fixed_offset(combo, ctx);
            out += dirichlet_multinomial_ln(&agg[off..off + o], &conc[ctx * o..(ctx + 1) * o]);
        }
    }
    out
}

/// Log Metropolis-Hastings ratio of replacing the labels of covariate `j`
/// by `proposed`, with the fixed probability vectors and the cluster
/// probabilities collapsed. Single-level reassignment proposals are
/// symmetric, so no proposal term appears.
#[allow(clippy::too_many_arguments)]
pub fn cluster_move_log_ratio(
    layout: &Layout,
    fixed_raw: &[u32],
    labels: &[Vec<usize>],
    j: usize,
    proposed: &[usize],
    alpha0: f64,
    lambda0: &[f64],
    cluster_concentration: f64,
) -> f64 {
    let mut new_labels = labels.to_vec();
    new_labels[j] = proposed.to_vec();
    let lik_new = log_marginal_fixed(layout, fixed_raw, &new_labels, alpha0, lambda0);
    let lik_cur = log_marginal_fixed(layout, fixed_raw, labels, alpha0, lambda0);
    let pri_new = log_partition_prior(proposed, cluster_concentration);
    let pri_cur = log_partition_prior(&labels[j], cluster_concentration);
    (lik_new + pri_new) - (lik_cur + pri_cur)
}

/// Probability that an observation with outcome probabilities `lf` (fixed)
/// and `li` (individual) came from the fixed branch.
pub fn fixed_allocation_prob(pi0: f64, lf: f64, li: f64) -> Result<f64> {
    let a = pi0 * lf;
    let b = (1.0 - pi0) * li;
    let z = a + b;
    if !(z > 0.0) || !z.is_finite() {
        return Err(Error::Numerical(format!(
            "allocation normalizer is {z} (pi0={pi0}, fixed={lf}, indiv={li})"
        )));
    }
    Ok(a / z)
}

/// Posterior Dirichlet parameters `scale · base + counts`.
pub fn dirichlet_posterior(scale: f64, base: &[f64], counts: &[u32]) -> Vec<f64> {
    base.iter().zip(counts).map(|(&b, &n)| scale * b + n as f64).collect()
}

/// Sufficient statistics derived from the allocations.
#[derive(Debug, Clone, Default)]
pub struct Counts {
    /// Fixed-allocated, `[raw combo][context][outcome]`.
    pub fixed_raw: Vec<u32>,
    /// Individual-allocated, `[individual][context][outcome]`.
    pub indiv: Vec<u32>,
    /// Fixed-allocated totals per `[individual][context]`.
    pub n_fixed: Vec<u32>,
    /// Individual-allocated totals per `[individual][context]`.
    pub n_indiv: Vec<u32>,
}

impl Counts {
    pub fn zeros(layout: &Layout) -> Self {
        let cell = layout.n_contexts * layout.n_outcomes;
        Counts {
            fixed_raw: vec![0; layout.n_combos() * cell],
            indiv: vec![0; layout.n_individuals * cell],
            n_fixed: vec![0; layout.n_individuals * layout.n_contexts],
            n_indiv: vec![0; layout.n_individuals * layout.n_contexts],
        }
    }

    pub fn from_allocations(layout: &Layout, obs: &[Obs], outcomes: &[usize], alloc: &[bool]) -> Self {
        let mut c = Counts::zeros(layout);
        for ((o, &y), &fixed) in obs.iter().zip(outcomes).zip(alloc) {
            c.add(layout, o, y, fixed);
        }
        c
    }

    #[inline]
    fn add(&mut self, layout: &Layout, o: &Obs, y: usize, fixed: bool) {
        let (ind, ctx) = (o.individual as usize, o.context as usize);
        let w = layout.weight_index(ind, ctx);
        if fixed {
            self.fixed_raw[layout.fixed_offset(o.combo as usize, ctx) + y] += 1;
            self.n_fixed[w] += 1;
        } else {
            self.indiv[layout.indiv_offset(ind, ctx) + y] += 1;
            self.n_indiv[w] += 1;
        }
    }
}

/// Accepted/proposed tally of one Metropolis-Hastings family.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Acceptance {
    pub accepted: u64,
    pub proposed: u64,
    #[serde(skip)]
    window_accepted: u64,
    #[serde(skip)]
    window_proposed: u64,
}

impl Acceptance {
    pub fn record(&mut self, accepted: bool) {
        self.proposed += 1;
        self.window_proposed += 1;
        if accepted {
            self.accepted += 1;
            self.window_accepted += 1;
        }
    }

    pub fn rate(&self) -> f64 {
        if self.proposed == 0 {
            f64::NAN
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }

    /// Window acceptance rate since the last call; resets the window.
    fn take_window(&mut self) -> Option<f64> {
        if self.window_proposed == 0 {
            return None;
        }
        let r = self.window_accepted as f64 / self.window_proposed as f64;
        self.window_accepted = 0;
        self.window_proposed = 0;
        Some(r)
    }
}

/// Acceptance ledger of one hierarchy.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct HierarchyAcceptance {
    pub lambda0: Acceptance,
    pub clusters: Acceptance,
    pub alpha0: Acceptance,
    pub alpha_indiv: Acceptance,
}

/// Random-walk scales, adapted during burn-in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tuning {
    /// Dirichlet proposal concentration for λ₀, per context.
    pub lambda0_concentration: Vec<f64>,
    /// Standard deviation of the log-scale random walk on α₀.
    pub alpha0_step: f64,
    /// Standard deviation of the log-scale random walk on α⁽⁰⁾.
    pub alpha_indiv_step: f64,
}

impl Tuning {
    pub fn new(layout: &Layout) -> Self {
        Tuning {
            lambda0_concentration: vec![100.0 * layout.n_outcomes as f64; layout.n_contexts],
            alpha0_step: 0.5,
            alpha_indiv_step: 0.5,
        }
    }
}

fn adapt_step(step: &mut f64, rate: f64) {
    if rate < TARGET_ACCEPT_LOW {
        *step *= 0.7;
    } else if rate > TARGET_ACCEPT_HIGH {
        *step *= 1.4;
    }
    *step = step.clamp(1e-4, 10.0);
}

/// Sampler for one hierarchy over a fixed set of observations.
#[derive(Debug, Clone)]
pub struct HierarchySampler {
    pub layout: Layout,
    pub priors: Priors,
    pub obs: Vec<Obs>,
    pub tuning: Tuning,
    pub acceptance: HierarchyAcceptance,
    lambda0_windows: Vec<Acceptance>,
    sweeps: u64,
}

impl HierarchySampler {
    pub fn new(layout: Layout, priors: &HierarchyPriors, obs: Vec<Obs>) -> Self {
        let priors = Priors::resolve(priors, &layout);
        let tuning = Tuning::new(&layout);
        let lambda0_windows = vec![Acceptance::default(); layout.n_contexts];
        HierarchySampler {
            layout,
            priors,
            obs,
            tuning,
            acceptance: HierarchyAcceptance::default(),
            lambda0_windows,
            sweeps: 0,
        }
    }

    /// Initial state: every level in its own cluster, λ's at smoothed
    /// empirical frequencies, π₀ = ½, concentrations at prior means and
    /// random allocations.
    pub fn init_state(&self, outcomes: &[usize], rng: &mut ChainRng) -> HierarchyState {
        let l = &self.layout;
        let (c, o) = (l.n_contexts, l.n_outcomes);
        let all_fixed = vec![true; self.obs.len()];
        let by_combo = Counts::from_allocations(l, &self.obs, outcomes, &all_fixed).fixed_raw;
        let all_indiv = vec![false; self.obs.len()];
        let by_indiv = Counts::from_allocations(l, &self.obs, outcomes, &all_indiv).indiv;
        let smooth = |counts: &[u32]| -> Vec<f64> {
            let mut out = Vec::with_capacity(counts.len());
            for cell in counts.chunks(o) {
                let tot: f64 = cell.iter().map(|&n| n as f64 + 1.0).sum();
                out.extend(cell.iter().map(|&n| (n as f64 + 1.0) / tot));
            }
            out
        };
        let mut ctx_totals = vec![0u32; c * o];
        for cell in by_combo.chunks(c * o) {
            for (t, &n) in ctx_totals.iter_mut().zip(cell) {
                *t += n;
            }
        }
        let labels: Vec<Vec<usize>> = if l.fixed_effect {
            l.cov_cards().iter().map(|&d| (0..d).collect()).collect()
        } else {
            Vec::new()
        };
        let mu = if l.fixed_effect {
            l.cov_cards().iter().map(|&d| vec![1.0 / d as f64; d]).collect()
        } else {
            Vec::new()
        };
        let allocations = if l.both_effects() {
            (0..self.obs.len()).map(|_| dist::bernoulli(rng, 0.5)).collect()
        } else {
            vec![l.fixed_effect; self.obs.len()]
        };
        let (a0, b0) = self.priors.fixed_concentration;
        let (ai, bi) = self.priors.indiv_concentration;
        HierarchyState {
            params: HierarchyParams {
                lambda_fixed: if l.fixed_effect { smooth(&by_combo) } else { Vec::new() },
                lambda_indiv: if l.random_effect { smooth(&by_indiv) } else { Vec::new() },
                lambda0: smooth(&ctx_totals),
                pi0: if l.both_effects() {
                    vec![0.5; l.n_individuals * c]
                } else {
                    Vec::new()
                },
                labels,
                mu,
                alpha0: a0 / b0,
                alpha_indiv: ai / bi,
            },
            allocations,
        }
    }

    /// Outcome probabilities of observation `o` under `params`, written into
    /// `out`. `map` is the raw → label combination map of `params.labels`.
    pub fn outcome_probs(&self, params: &HierarchyParams, map: &[usize], o: &Obs, out: &mut [f64]) {
        let l = &self.layout;
        let (ind, ctx) = (o.individual as usize, o.context as usize);
        let n = l.n_outcomes;
        if l.both_effects() {
            let w = params.pi0[l.weight_index(ind, ctx)];
            let f = &params.lambda_fixed[l.fixed_offset(map[o.combo as usize], ctx)..][..n];
            let i = &params.lambda_indiv[l.indiv_offset(ind, ctx)..][..n];
            for ((x, &a), &b) in out.iter_mut().zip(f).zip(i) {
                *x = w * a + (1.0 - w) * b;
            }
        } else if l.fixed_effect {
            out.copy_from_slice(&params.lambda_fixed[l.fixed_offset(map[o.combo as usize], ctx)..][..n]);
        } else {
            out.copy_from_slice(&params.lambda_indiv[l.indiv_offset(ind, ctx)..][..n]);
        }
    }

    /// Draws every allocation indicator and returns the resulting counts.
    /// With a single effect the allocations are constant.
    pub fn sample_allocations(
        &self,
        state: &mut HierarchyState,
        outcomes: &[usize],
        rng: &mut ChainRng,
    ) -> Result<Counts> {
        let l = &self.layout;
        if l.both_effects() {
            let p = &state.params;
            let map = label_map(&l.combos, &p.labels);
            for ((o, &y), a) in self.obs.iter().zip(outcomes).zip(state.allocations.iter_mut()) {
                let (ind, ctx) = (o.individual as usize, o.context as usize);
                let lf = p.lambda_fixed[l.fixed_offset(map[o.combo as usize], ctx) + y];
                let li = p.lambda_indiv[l.indiv_offset(ind, ctx) + y];
                let pf = fixed_allocation_prob(p.pi0[l.weight_index(ind, ctx)], lf, li)?;
                *a = dist::bernoulli(rng, pf);
            }
        }
        Ok(Counts::from_allocations(l, &self.obs, outcomes, &state.allocations))
    }

    /// Conjugate draw of every fixed-effect vector (inactive label
    /// combinations are drawn from the prior).
    pub fn update_lambda_fixed(&self, params: &mut HierarchyParams, counts: &Counts, rng: &mut ChainRng) {
        let l = &self.layout;
        if !l.fixed_effect {
            return;
        }
        let map = label_map(&l.combos, &params.labels);
        let agg = aggregate_fixed(l, &counts.fixed_raw, &map);
        let o = l.n_outcomes;
        let mut conc = vec![0.0; o];
        for combo in 0..l.n_combos() {
            for ctx in 0..l.n_contexts {
                let off = l.fixed_offset(combo, ctx);
                let base = &params.lambda0[ctx * o..(ctx + 1) * o];
                for ((c, &b), &n) in conc.iter_mut().zip(base).zip(&agg[off..off + o]) {
                    *c = params.alpha0 * b + n as f64;
                }
                dist::dirichlet_into(rng, &conc, &mut params.lambda_fixed[off..off + o]);
            }
        }
    }

    /// Conjugate draw of every individual-effect vector.
    pub fn update_lambda_indiv(&self, params: &mut HierarchyParams, counts: &Counts, rng: &mut ChainRng) {
        let l = &self.layout;
        if !l.random_effect {
            return;
        }
        let o = l.n_outcomes;
        let mut conc = vec![0.0; o];
        for ind in 0..l.n_individuals {
            for ctx in 0..l.n_contexts {
                let off = l.indiv_offset(ind, ctx);
                let base = &params.lambda0[ctx * o..(ctx + 1) * o];
                for ((c, &b), &n) in conc.iter_mut().zip(base).zip(&counts.indiv[off..off + o]) {
                    *c = params.alpha_indiv * b + n as f64;
                }
                dist::dirichlet_into(rng, &conc, &mut params.lambda_indiv[off..off + o]);
            }
        }
    }

    /// Conjugate Beta draw of the fixed-branch weights.
    pub fn update_pi(&self, params: &mut HierarchyParams, counts: &Counts, rng: &mut ChainRng) {
        if !self.layout.both_effects() {
            return;
        }
        let (a0, a1) = self.priors.weight;
        for (w, (&nf, &ni)) in params
            .pi0
            .iter_mut()
            .zip(counts.n_fixed.iter().zip(&counts.n_indiv))
        {
            *w = dist::beta(rng, a0 + nf as f64, a1 + ni as f64);
        }
    }

    /// One Metropolis-Hastings reassignment per level of covariate `j`,
    /// followed by canonical relabelling and a draw of μ_j. Returns whether
    /// the partition changed.
    pub fn update_cluster_labels(
        &mut self,
        params: &mut HierarchyParams,
        counts: &Counts,
        j: usize,
        rng: &mut ChainRng,
    ) -> bool {
        let l = &self.layout;
        if !l.fixed_effect {
            return false;
        }
        let d = l.cov_cards()[j];
        let alpha_j = self.priors.cluster_concentration[j];
        let mut changed = false;
        if d >= 2 {
            let start = params.labels[j].clone();
            for level in 0..d {
                let cur = params.labels[j][level];
                let mut others: Vec<usize> = params.labels[j]
                    .iter()
                    .enumerate()
                    .filter(|&(w, _)| w != level)
                    .map(|(_, &lab)| lab)
                    .collect();
                others.sort_unstable();
                others.dedup();
                let fresh = if others.contains(&cur) {
                    (0..d).find(|x| !others.contains(x)).expect("fewer than d clusters")
                } else {
                    cur
                };
                let choice = rng.random_range(0..=others.len());
                let new_label = if choice == others.len() { fresh } else { others[choice] };
                if new_label == cur {
                    self.acceptance.clusters.record(true);
                    continue;
                }
                let mut proposed = params.labels[j].clone();
                proposed[level] = new_label;
                let log_ratio = cluster_move_log_ratio(
                    l,
                    &counts.fixed_raw,
                    &params.labels,
                    j,
                    &proposed,
                    params.alpha0,
                    &params.lambda0,
                    alpha_j,
                );
                let accept = log_ratio >= 0.0 || dist::open_unit(rng).ln() < log_ratio;
                self.acceptance.clusters.record(accept);
                if accept {
                    params.labels[j] = proposed;
                }
            }
            canonicalize(&mut params.labels[j]);
            changed = params.labels[j] != start;
        }
        let mut sizes = vec![0u32; d];
        for &lab in &params.labels[j] {
            sizes[lab] += 1;
        }
        let conc: Vec<f64> = sizes.iter().map(|&n| alpha_j + n as f64).collect();
        dist::dirichlet_into(rng, &conc, &mut params.mu[j]);
        changed
    }

    /// Sums of log-probabilities of the attached fixed and individual
    /// vectors for context `ctx`: (count, per-outcome sums) for each.
    fn attached_log_sums(&self, params: &HierarchyParams, ctx: usize) -> ((usize, Vec<f64>), (usize, Vec<f64>)) {
        let l = &self.layout;
        let o = l.n_outcomes;
        let mut fixed = (0usize, vec![0.0; o]);
        if l.fixed_effect {
            for combo in active_combos(&l.combos, &params.labels) {
                let off = l.fixed_offset(combo, ctx);
                fixed.0 += 1;
                for (s, &v) in fixed.1.iter_mut().zip(&params.lambda_fixed[off..off + o]) {
                    *s += v.ln();
                }
            }
        }
        let mut indiv = (0usize, vec![0.0; o]);
        if l.random_effect {
            for ind in 0..l.n_individuals {
                let off = l.indiv_offset(ind, ctx);
                indiv.0 += 1;
                for (s, &v) in indiv.1.iter_mut().zip(&params.lambda_indiv[off..off + o]) {
                    *s += v.ln();
                }
            }
        }
        (fixed, indiv)
    }

    /// Metropolis-Hastings update of λ₀(·|c) for every context, using a
    /// Dirichlet proposal centred on the current value.
    pub fn update_lambda0(&mut self, params: &mut HierarchyParams, rng: &mut ChainRng) {
        let l = &self.layout;
        let o = l.n_outcomes;
        if o < 2 {
            return;
        }
        for ctx in 0..l.n_contexts {
            let ((nf, sf), (ni, si)) = self.attached_log_sums(params, ctx);
            let cur = params.lambda0[ctx * o..(ctx + 1) * o].to_vec();
            let c = self.tuning.lambda0_concentration[ctx];
            let prop_conc: Vec<f64> = cur.iter().map(|&x| c * x).collect();
            let prop = dist::dirichlet(rng, &prop_conc);
            let accept = if prop.iter().any(|&x| !(x > 0.0)) {
                false
            } else {
                let log_ratio = lambda0_log_ratio(
                    &cur,
                    &prop,
                    &self.priors,
                    (params.alpha0, nf, &sf),
                    (params.alpha_indiv, ni, &si),
                    c,
                );
                log_ratio >= 0.0 || dist::open_unit(rng).ln() < log_ratio
            };
            self.acceptance.lambda0.record(accept);
            self.lambda0_windows[ctx].record(accept);
            if accept {
                params.lambda0[ctx * o..(ctx + 1) * o].copy_from_slice(&prop);
            }
        }
    }

    /// Log-scale random-walk updates of α₀ and α⁽⁰⁾.
    pub fn update_concentrations(&mut self, params: &mut HierarchyParams, rng: &mut ChainRng) {
        let l = &self.layout;
        let o = l.n_outcomes;
        if o < 2 {
            return;
        }
        let sums: Vec<_> = (0..l.n_contexts).map(|ctx| self.attached_log_sums(params, ctx)).collect();
        let lambda0 = params.lambda0.clone();
        let attached_fixed: Vec<(usize, &[f64], &[f64])> = sums
            .iter()
            .enumerate()
            .map(|(ctx, ((n, s), _))| (*n, &lambda0[ctx * o..(ctx + 1) * o], s.as_slice()))
            .collect();
        let attached_indiv: Vec<(usize, &[f64], &[f64])> = sums
            .iter()
            .enumerate()
            .map(|(ctx, (_, (n, s)))| (*n, &lambda0[ctx * o..(ctx + 1) * o], s.as_slice()))
            .collect();
        if l.fixed_effect {
            let (a, b) = self.priors.fixed_concentration;
            let accept = concentration_rw_step(
                &mut params.alpha0,
                self.tuning.alpha0_step,
                (a, b),
                &attached_fixed,
                rng,
            );
            self.acceptance.alpha0.record(accept);
        }
        if l.random_effect {
            let (a, b) = self.priors.indiv_concentration;
            let accept = concentration_rw_step(
                &mut params.alpha_indiv,
                self.tuning.alpha_indiv_step,
                (a, b),
                &attached_indiv,
                rng,
            );
            self.acceptance.alpha_indiv.record(accept);
        }
    }

    /// One full sweep in the fixed order: allocations, λ_fixed, λ_indiv, π₀,
    /// cluster labels (λ_fixed redrawn if any partition changed), λ₀,
    /// concentrations. Step sizes adapt while `adapt` is set.
    pub fn sweep(&mut self, state: &mut HierarchyState, outcomes: &[usize], rng: &mut ChainRng, adapt: bool) -> Result<()> {
        if self.layout.n_outcomes < 2 {
            return Ok(());
        }
        let counts = self.sample_allocations(state, outcomes, rng)?;
        let params = &mut state.params;
        self.update_lambda_fixed(params, &counts, rng);
        self.update_lambda_indiv(params, &counts, rng);
        self.update_pi(params, &counts, rng);
        if self.layout.fixed_effect {
            let mut changed = false;
            for j in 0..self.layout.n_covariates() {
                changed |= self.update_cluster_labels(params, &counts, j, rng);
            }
            if changed {
                self.update_lambda_fixed(params, &counts, rng);
            }
        }
        self.update_lambda0(params, rng);
        self.update_concentrations(params, rng);
        self.sweeps += 1;
        if adapt && self.sweeps % ADAPT_WINDOW == 0 {
            self.adapt();
        }
        Ok(())
    }

    fn adapt(&mut self) {
        for (ctx, w) in self.lambda0_windows.iter_mut().enumerate() {
            if let Some(rate) = w.take_window() {
                let c = &mut self.tuning.lambda0_concentration[ctx];
                // larger concentration = smaller moves
                if rate < TARGET_ACCEPT_LOW {
                    *c *= 1.5;
                } else if rate > TARGET_ACCEPT_HIGH {
                    *c /= 1.4;
                }
                *c = c.clamp(self.layout.n_outcomes as f64, 1e8);
            }
        }
        if let Some(r) = self.acceptance.alpha0.take_window() {
            adapt_step(&mut self.tuning.alpha0_step, r);
        }
        if let Some(r) = self.acceptance.alpha_indiv.take_window() {
            adapt_step(&mut self.tuning.alpha_indiv_step, r);
        }
        self.acceptance.lambda0.take_window();
        self.acceptance.clusters.take_window();
    }

    /// Checks the simplex, positivity and partition invariants.
    pub fn check_invariants(&self, params: &HierarchyParams) -> Result<()> {
        check_params(&self.layout, params)
    }
}

/// Log target of λ₀(·|c) up to a constant: its Dir(α₀₀ λ₀₀) prior plus the
/// Dirichlet densities of the attached vectors, given through their counts
/// and per-outcome log sums.
pub fn lambda0_log_target(
    lambda0: &[f64],
    priors: &Priors,
    fixed: (f64, usize, &[f64]),
    indiv: (f64, usize, &[f64]),
) -> f64 {
    let prior_conc: Vec<f64> = priors.top_base.iter().map(|&b| priors.top_concentration * b).collect();
    let mut out = crate::special::dirichlet_ln_pdf(lambda0, &prior_conc);
    for (alpha, n, sums) in [fixed, indiv] {
        if n > 0 {
            out += attached_dirichlet_ln(alpha, lambda0, n, sums);
        }
    }
    out
}

/// Σ over `n` attached vectors v of log Dir(v | α λ), given Σ log v per outcome.
pub fn attached_dirichlet_ln(alpha: f64, lambda: &[f64], n: usize, log_sums: &[f64]) -> f64 {
    let mut norm = ln_gamma(alpha);
    let mut kernel = 0.0;
    for (&lam, &s) in lambda.iter().zip(log_sums) {
        let a = alpha * lam;
        norm -= ln_gamma(a);
        kernel += (a - 1.0) * s;
    }
    n as f64 * norm + kernel
}

/// Full log Metropolis-Hastings ratio for moving λ₀ from `cur` to `prop`
/// under a Dir(c · current) proposal.
pub fn lambda0_log_ratio(
    cur: &[f64],
    prop: &[f64],
    priors: &Priors,
    fixed: (f64, usize, &[f64]),
    indiv: (f64, usize, &[f64]),
    c: f64,
) -> f64 {
    let target = lambda0_log_target(prop, priors, fixed, indiv) - lambda0_log_target(cur, priors, fixed, indiv);
    let conc_cur: Vec<f64> = cur.iter().map(|&x| c * x).collect();
    let conc_prop: Vec<f64> = prop.iter().map(|&x| c * x).collect();
    let q_back = crate::special::dirichlet_ln_pdf(cur, &conc_prop);
    let q_fwd = crate::special::dirichlet_ln_pdf(prop, &conc_cur);
    target + q_back - q_fwd
}

/// Log target of a concentration α up to a constant: Ga(a, b) prior plus the
/// Dirichlet densities of the attached vectors (count, base, log sums).
pub fn concentration_log_target(alpha: f64, prior: (f64, f64), attached: &[(usize, &[f64], &[f64])]) -> f64 {
    if !(alpha > 0.0) {
        return f64::NEG_INFINITY;
    }
    let (a, b) = prior;
    let mut out = (a - 1.0) * alpha.ln() - b * alpha;
    for &(n, base, sums) in attached {
        if n > 0 {
            out += attached_dirichlet_ln(alpha, base, n, sums);
        }
    }
    out
}

/// One random-walk step on log α. Returns whether the proposal was accepted.
pub fn concentration_rw_step(
    alpha: &mut f64,
    step: f64,
    prior: (f64, f64),
    attached: &[(usize, &[f64], &[f64])],
    rng: &mut ChainRng,
) -> bool {
    let prop = *alpha * (step * dist::standard_normal(rng)).exp();
    if prop == *alpha {
        return true;
    }
    let log_ratio = concentration_log_target(prop, prior, attached) - concentration_log_target(*alpha, prior, attached)
        + prop.ln()
        - alpha.ln();
    let accept = log_ratio >= 0.0 || dist::open_unit(rng).ln() < log_ratio;
    if accept {
        *alpha = prop;
    }
    accept
}

fn check_simplex(v: &[f64], n: usize, what: &str) -> Result<()> {
    for (i, cell) in v.chunks(n).enumerate() {
        let s: f64 = cell.iter().sum();
        if cell.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) || (s - 1.0).abs() > 1e-12 {
            return Err(Error::Numerical(format!("{what} vector {i} is off the simplex (sum {s})")));
        }
    }
    Ok(())
}

/// Simplex, positivity and partition invariants of a parameter snapshot.
pub fn check_params(layout: &Layout, p: &HierarchyParams) -> Result<()> {
    let o = layout.n_outcomes;
    let grid = layout.n_combos() * layout.n_contexts * o;
    let indiv = layout.n_individuals * layout.n_contexts * o;
    let expect = |ok: bool, m: &str| if ok { Ok(()) } else { Err(Error::Numerical(m.to_string())) };
    expect(
        p.lambda_fixed.len() == if layout.fixed_effect { grid } else { 0 },
        "fixed-effect grid has wrong size",
    )?;
    expect(
        p.lambda_indiv.len() == if layout.random_effect { indiv } else { 0 },
        "individual-effect grid has wrong size",
    )?;
    expect(p.lambda0.len() == layout.n_contexts * o, "base vectors have wrong size")?;
    check_simplex(&p.lambda_fixed, o, "fixed")?;
    check_simplex(&p.lambda_indiv, o, "individual")?;
    check_simplex(&p.lambda0, o, "base")?;
    if layout.both_effects() {
        expect(p.pi0.len() == layout.n_individuals * layout.n_contexts, "weights have wrong size")?;
    } else {
        expect(p.pi0.is_empty(), "weights present with a single effect")?;
    }
    expect(p.pi0.iter().all(|&w| (0.0..=1.0).contains(&w)), "weight outside [0, 1]")?;
    expect(p.alpha0 > 0.0 && p.alpha0.is_finite(), "fixed concentration not positive")?;
    expect(p.alpha_indiv > 0.0 && p.alpha_indiv.is_finite(), "individual concentration not positive")?;
    if layout.fixed_effect {
        expect(p.labels.len() == layout.n_covariates(), "missing cluster labels")?;
        for (lab, (&d, mu)) in p.labels.iter().zip(layout.cov_cards().iter().zip(&p.mu)) {
            expect(lab.len() == d, "label vector has wrong length")?;
            let mut canon = lab.clone();
            canonicalize(&mut canon);
            expect(&canon == lab, "cluster labels are not canonical")?;
            expect(mu.len() == d, "cluster probabilities have wrong length")?;
            check_simplex(mu, d, "cluster probability")?;
        }
    } else {
        expect(p.labels.is_empty(), "labels present without a fixed effect")?;
    }
    Ok(())
}
