//! Independent reference computations used by the integration tests.
#![allow(dead_code)]

use statrs::function::gamma::ln_gamma;

/// Adaptive Simpson integration of `f` over `[a, b]`.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    }
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    rec(f, a, b, fa, fm, fb, whole, tol, 30)
}

/// Moments `(mean, sd)` of a density on (0, ∞) known up to a constant via
/// its log. The mode is located on a log grid, the support is truncated
/// where the log density falls 60 below the peak, and the pieces are
/// integrated separately.
pub fn positive_density_moments(logf: &dyn Fn(f64) -> f64) -> (f64, f64) {
    let grid: Vec<f64> = (0..=24_000).map(|i| (-14.0 + i as f64 * 0.001).exp()).collect();
    let (mut mode, mut peak) = (grid[0], f64::NEG_INFINITY);
    for &x in &grid {
        let v = logf(x);
        if v > peak {
            peak = v;
            mode = x;
        }
    }
    let mut lo = mode;
    while lo > 1e-300 && logf(lo) > peak - 60.0 {
        lo *= 0.97;
    }
    let mut hi = mode;
    while logf(hi) > peak - 60.0 {
        hi *= 1.03;
    }
    let pieces = 200;
    let edges: Vec<f64> = (0..=pieces)
        .map(|i| lo * (hi / lo).powf(i as f64 / pieces as f64))
        .collect();
    let mut m = [0.0f64; 3];
    for w in edges.windows(2) {
        for (p, slot) in m.iter_mut().enumerate() {
            let f = |x: f64| (logf(x) - peak).exp() * x.powi(p as i32);
            *slot += adaptive_simpson(&f, w[0], w[1], 1e-12 * (w[1] - w[0]) * mode.max(1.0).powi(p as i32));
        }
    }
    let mean = m[1] / m[0];
    let var = m[2] / m[0] - mean * mean;
    (mean, var.sqrt())
}

/// Unnormalized log full conditional of a gamma kernel shape given the
/// rate, `n` durations with log-sum `sum_log` and a Ga(r, s) prior.
pub fn shape_conditional_log(alpha: f64, n: usize, sum_log: f64, rate: f64, prior: (f64, f64)) -> f64 {
    let nf = n as f64;
    (prior.0 - 1.0) * alpha.ln() - prior.1 * alpha + nf * alpha * rate.ln() + (alpha - 1.0) * sum_log
        - nf * ln_gamma(alpha)
}

/// Every set partition of `d` items as a restricted growth string.
pub fn set_partitions(d: usize) -> Vec<Vec<usize>> {
    fn rec(prefix: &mut Vec<usize>, d: usize, out: &mut Vec<Vec<usize>>) {
        if prefix.len() == d {
            out.push(prefix.clone());
            return;
        }
        let next = prefix.iter().copied().max().map_or(0, |m| m + 1);
        for l in 0..=next {
            prefix.push(l);
            rec(prefix, d, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::new(), d, &mut out);
    out
}

/// Rising factorial `x (x+1) … (x+n−1)`.
pub fn rising(x: f64, n: u32) -> f64 {
    (0..n).map(|m| x + m as f64).product()
}

/// Dirichlet-multinomial probability of an ordered sequence with the given
/// counts, as a ratio of rising factorials.
pub fn dm_sequence_prob(counts: &[u32], conc: &[f64]) -> f64 {
    let tot: u32 = counts.iter().sum();
    let a: f64 = conc.iter().sum();
    counts.iter().zip(conc).map(|(&n, &c)| rising(c, n)).product::<f64>() / rising(a, tot)
}

/// Prior probability of the partition with restricted growth string `rgs`
/// when each of `d` levels draws a label i.i.d. from μ ∼ Dir(α, …, α) over
/// `d` labels, found by summing over every labelling.
pub fn partition_prior_by_enumeration(rgs: &[usize], alpha: f64) -> f64 {
    let d = rgs.len();
    let conc = vec![alpha; d];
    let mut total = 0.0;
    let mut labels = vec![0usize; d];
    loop {
        if canonical(&labels) == rgs {
            let mut counts = vec![0u32; d];
            for &l in &labels {
                counts[l] += 1;
            }
            total += dm_sequence_prob(&counts, &conc);
        }
        let mut i = 0;
        loop {
            if i == d {
                return total;
            }
            labels[i] += 1;
            if labels[i] < d {
                break;
            }
            labels[i] = 0;
            i += 1;
        }
    }
}

pub fn canonical(labels: &[usize]) -> Vec<usize> {
    let mut map: Vec<Option<usize>> = vec![None; labels.iter().max().map_or(0, |m| m + 1)];
    let mut next = 0;
    labels
        .iter()
        .map(|&l| {
            *map[l].get_or_insert_with(|| {
                next += 1;
                next - 1
            })
        })
        .collect()
}

/// Marginal likelihood of fixed-effect counts `[level][context][outcome]`
/// of a single clustered covariate when levels sharing a label pool their
/// counts, each pooled row having a Dir(α₀ λ₀(·|c)) prior.
pub fn pooled_marginal(counts: &[Vec<Vec<u32>>], labels: &[usize], alpha0: f64, lambda0: &[Vec<f64>]) -> f64 {
    let k = labels.iter().max().map_or(0, |m| m + 1);
    let (n_ctx, n_out) = (lambda0.len(), lambda0[0].len());
    let mut prob = 1.0;
    for cluster in 0..k {
        for ctx in 0..n_ctx {
            let mut pooled = vec![0u32; n_out];
            for (lvl, &lab) in labels.iter().enumerate() {
                if lab == cluster {
                    for (p, &c) in pooled.iter_mut().zip(&counts[lvl][ctx]) {
                        *p += c;
                    }
                }
            }
            let conc: Vec<f64> = lambda0[ctx].iter().map(|&l| alpha0 * l).collect();
            prob *= dm_sequence_prob(&pooled, &conc);
        }
    }
    prob
}

/// Direct LPML: Σ_i −log( mean_m exp(−ℓ_{m,i}) ).
pub fn lpml_direct(ll: &[Vec<f64>]) -> f64 {
    let m = ll.len() as f64;
    (0..ll[0].len())
        .map(|i| -(ll.iter().map(|r| (-r[i]).exp()).sum::<f64>() / m).ln())
        .sum()
}

/// Direct WAIC with the n−1 variance.
pub fn waic_direct(ll: &[Vec<f64>]) -> f64 {
    let m = ll.len() as f64;
    let mut lppd = 0.0;
    let mut p = 0.0;
    for i in 0..ll[0].len() {
        lppd += (ll.iter().map(|r| r[i].exp()).sum::<f64>() / m).ln();
        let mean = ll.iter().map(|r| r[i]).sum::<f64>() / m;
        p += ll.iter().map(|r| (r[i] - mean).powi(2)).sum::<f64>() / (m - 1.0);
    }
    -2.0 * (lppd - p)
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
    }
}
