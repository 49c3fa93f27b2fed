//! Random variate generation shared by the samplers.
//!
//! Every sampler draws from a [`ChainRng`], a ChaCha20 generator whose seed and
//! stream number fully determine a chain's output.

use rand::Rng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use crate::special::log_sum_exp;

pub type ChainRng = ChaCha20Rng;

/// Smallest probability an entry of a sampled probability vector may take.
/// Keeps Dirichlet log densities finite when tiny concentrations underflow.
pub const PROB_FLOOR: f64 = 1e-300;

/// Seeded generator for chain `stream` of root seed `seed`.
pub fn chain_rng(seed: u64, stream: u64) -> ChainRng {
    use rand::SeedableRng;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Uniform draw on the open interval (0, 1).
pub fn open_unit<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            return u;
        }
    }
}

pub fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

/// Draw from Ga(shape, rate).
pub fn gamma<R: Rng + ?Sized>(rng: &mut R, shape: f64, rate: f64) -> f64 {
    debug_assert!(shape > 0.0 && rate > 0.0, "gamma({shape}, {rate})");
    Gamma::new(shape, 1.0 / rate)
        .expect("positive gamma parameters")
        .sample(rng)
}

/// log of a Ga(shape, 1) draw, accurate for shapes far below one where the
/// draw itself underflows.
pub fn ln_gamma_variate<R: Rng + ?Sized>(rng: &mut R, shape: f64) -> f64 {
    if shape >= 1.0 {
        return gamma(rng, shape, 1.0).ln();
    }
    // Ga(a) = Ga(a+1) · U^{1/a}
    let g = gamma(rng, shape + 1.0, 1.0);
    g.ln() + open_unit(rng).ln() / shape
}

/// Draw from Dir(conc) into `out`, floored at [`PROB_FLOOR`] and renormalised.
pub fn dirichlet_into<R: Rng + ?Sized>(rng: &mut R, conc: &[f64], out: &mut [f64]) {
    debug_assert_eq!(conc.len(), out.len());
    if conc.len() == 1 {
        out[0] = 1.0;
        return;
    }
    for (o, &a) in out.iter_mut().zip(conc) {
        *o = ln_gamma_variate(rng, a);
    }
    let lse = log_sum_exp(out);
    let mut sum = 0.0;
    for o in out.iter_mut() {
        *o = (*o - lse).exp().max(PROB_FLOOR);
        sum += *o;
    }
    for o in out.iter_mut() {
        *o /= sum;
    }
}

pub fn dirichlet<R: Rng + ?Sized>(rng: &mut R, conc: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; conc.len()];
    dirichlet_into(rng, conc, &mut out);
    out
}

/// Draw from Beta(a, b) through two log-gamma variates.
pub fn beta<R: Rng + ?Sized>(rng: &mut R, a: f64, b: f64) -> f64 {
    let x = ln_gamma_variate(rng, a);
    let y = ln_gamma_variate(rng, b);
    let m = x.max(y);
    let ex = (x - m).exp();
    let ey = (y - m).exp();
    ex / (ex + ey)
}

/// Draw an index with probability proportional to `exp(log_weights)`.
/// Returns `None` when every weight is zero or the weights are not finite.
pub fn categorical_from_log<R: Rng + ?Sized>(rng: &mut R, log_weights: &[f64]) -> Option<usize> {
    let max = log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return None;
    }
    let total: f64 = log_weights.iter().map(|&w| (w - max).exp()).sum();
    let mut u = rng.random::<f64>() * total;
    let mut last = 0;
    for (k, &w) in log_weights.iter().enumerate() {
        let p = (w - max).exp();
        if p > 0.0 {
            last = k;
            if u < p {
                return Some(k);
            }
            u -= p;
        }
    }
    Some(last)
}

/// Bernoulli draw with success probability `p`.
pub fn bernoulli<R: Rng + ?Sized>(rng: &mut R, p: f64) -> bool {
    rng.random::<f64>() < p
}
