//! Special functions used by the samplers.

pub use statrs::function::gamma::{digamma, ln_gamma};

/// Trigamma function ψ'(x) for x > 0.
///
/// Shifts the argument above 12 with the recurrence ψ'(x) = ψ'(x+1) + 1/x²
/// and finishes with the asymptotic expansion.
pub fn trigamma(x: f64) -> f64 {
    if !(x > 0.0) {
        return f64::NAN;
    }
    let mut x = x;
    let mut acc = 0.0;
    while x < 12.0 {
        acc += 1.0 / (x * x);
        x += 1.0;
    }
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    // 1/x + 1/(2x²) + 1/(6x³) − 1/(30x⁵) + 1/(42x⁷) − 1/(30x⁹) + 5/(66x¹¹)
    let series = inv
        + 0.5 * inv2
        + inv * inv2
            * (1.0 / 6.0
                + inv2 * (-1.0 / 30.0 + inv2 * (1.0 / 42.0 + inv2 * (-1.0 / 30.0 + inv2 * 5.0 / 66.0))));
    acc + series
}

/// Numerically stable `log(Σ exp(xs))`. Returns −∞ for an empty or all −∞ input.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    let sum: f64 = xs.iter().map(|&x| (x - max).exp()).sum();
    max + sum.ln()
}

/// Numerically stable `log(mean(exp(xs)))`; exact for a constant input.
pub fn log_mean_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    let sum: f64 = xs.iter().map(|&x| (x - max).exp()).sum();
    max + (sum / xs.len() as f64).ln()
}

/// Log density of Ga(shape, rate) at `x`.
pub fn gamma_ln_pdf(x: f64, shape: f64, rate: f64) -> f64 {
    if x <= 0.0 {
        return f64::NEG_INFINITY;
    }
    shape * rate.ln() + (shape - 1.0) * x.ln() - rate * x - ln_gamma(shape)
}

/// Log density of Dir(conc) at the probability vector `p`.
pub fn dirichlet_ln_pdf(p: &[f64], conc: &[f64]) -> f64 {
    debug_assert_eq!(p.len(), conc.len());
    let total: f64 = conc.iter().sum();
    let mut out = ln_gamma(total);
    for (&pi, &ci) in p.iter().zip(conc) {
        if pi <= 0.0 {
            return f64::NEG_INFINITY;
        }
        out += (ci - 1.0) * pi.ln() - ln_gamma(ci);
    }
    out
}

/// Log of the Dirichlet-multinomial marginal likelihood of an ordered count
/// sequence: ∫ Π p_y^{n_y} Dir(p | conc) dp.
pub fn dirichlet_multinomial_ln(counts: &[u32], conc: &[f64]) -> f64 {
    let n: u32 = counts.iter().sum();
    if n == 0 {
        return 0.0;
    }
    let total: f64 = conc.iter().sum();
    let mut out = ln_gamma(total) - ln_gamma(total + n as f64);
    for (&c, &a) in counts.iter().zip(conc) {
        if c > 0 {
            out += ln_gamma(a + c as f64) - ln_gamma(a);
        }
    }
    out
}
