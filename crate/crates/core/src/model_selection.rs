//! LPML and WAIC for gamma-mixture fits.

use serde::{Deserialize, Serialize};

use crate::engine::PosteriorSamples;
use crate::error::{Error, Result};
use crate::special::log_mean_exp;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectionScores {
    pub lpml: f64,
    pub waic: f64,
    pub lppd: f64,
    pub p_waic: f64,
}

fn check_shape(loglik: &[Vec<f64>]) -> Result<usize> {
    let n = loglik.first().map_or(0, Vec::len);
    if loglik.is_empty() || n == 0 {
        return Err(Error::Data("empty log-likelihood matrix".into()));
    }
    if loglik.iter().any(|r| r.len() != n) {
        return Err(Error::Data("ragged log-likelihood matrix".into()));
    }
    Ok(n)
}

/// Σ_i log CPO_i over a `[draw][record]` matrix.
pub fn lpml(loglik: &[Vec<f64>]) -> Result<f64> {
    let n = check_shape(loglik)?;
    let mut col = vec![0.0; loglik.len()];
    let mut out = 0.0;
    for i in 0..n {
        for (c, row) in col.iter_mut().zip(loglik) {
            *c = -row[i];
        }
        out -= log_mean_exp(&col);
    }
    Ok(out)
}

/// `(lppd, p_waic)` with the sample variance (n − 1 denominator).
pub fn waic_parts(loglik: &[Vec<f64>]) -> Result<(f64, f64)> {
    let n = check_shape(loglik)?;
    let m = loglik.len() as f64;
    let mut col = vec![0.0; loglik.len()];
    let (mut lppd, mut p) = (0.0, 0.0);
    for i in 0..n {
        for (c, row) in col.iter_mut().zip(loglik) {
            *c = row[i];
        }
        lppd += log_mean_exp(&col);
        if col.len() > 1 {
            // shifted by the first draw so constant columns give exactly 0
            let (s1, s2) = col.iter().fold((0.0, 0.0), |(a, b), &x| {
                let d = x - col[0];
                (a + d, b + d * d)
            });
            p += (s2 - s1 * s1 / m) / (m - 1.0);
        }
    }
    Ok((lppd, p))
}

/// −2 (lppd − p_waic); smaller is better.
pub fn waic(loglik: &[Vec<f64>]) -> Result<f64> {
    let (lppd, p) = waic_parts(loglik)?;
    Ok(-2.0 * (lppd - p))
}

/// Per-record running accumulators for both scores, fed one draw at a time.
#[derive(Debug, Clone)]
pub struct ScoreAccumulator {
    draws: usize,
    /// running max and scaled sum of exp(−ℓ)
    neg_max: Vec<f64>,
    neg_sum: Vec<f64>,
    pos_max: Vec<f64>,
    pos_sum: Vec<f64>,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

fn lse_push(max: &mut f64, sum: &mut f64, x: f64) {
    if x <= *max {
        *sum += (x - *max).exp();
    } else {
        *sum = *sum * (*max - x).exp() + 1.0;
        *max = x;
    }
}

impl ScoreAccumulator {
    pub fn new(records: usize) -> Self {
        ScoreAccumulator {
            draws: 0,
            neg_max: vec![f64::NEG_INFINITY; records],
            neg_sum: vec![0.0; records],
            pos_max: vec![f64::NEG_INFINITY; records],
            pos_sum: vec![0.0; records],
            mean: vec![0.0; records],
            m2: vec![0.0; records],
        }
    }

    pub fn push(&mut self, row: &[f64]) -> Result<()> {
        if row.len() != self.mean.len() {
            return Err(Error::Data("log-likelihood row has the wrong length".into()));
        }
        self.draws += 1;
        let k = self.draws as f64;
        for (i, &l) in row.iter().enumerate() {
            lse_push(&mut self.neg_max[i], &mut self.neg_sum[i], -l);
            lse_push(&mut self.pos_max[i], &mut self.pos_sum[i], l);
            let d = l - self.mean[i];
            self.mean[i] += d / k;
            self.m2[i] += d * (l - self.mean[i]);
        }
        Ok(())
    }

    pub fn finish(&self) -> Result<SelectionScores> {
        if self.draws == 0 || self.mean.is_empty() {
            return Err(Error::Data("empty log-likelihood matrix".into()));
        }
        let m = self.draws as f64;
        let mut lpml = 0.0;
        let mut lppd = 0.0;
        let mut p = 0.0;
        for i in 0..self.mean.len() {
            lpml -= self.neg_max[i] + (self.neg_sum[i] / m).ln();
            lppd += self.pos_max[i] + (self.pos_sum[i] / m).ln();
            if self.draws > 1 {
                p += self.m2[i] / (self.draws - 1) as f64;
            }
        }
        Ok(SelectionScores {
            lpml,
            waic: -2.0 * (lppd - p),
            lppd,
            p_waic: p,
        })
    }
}

/// Both scores of a fit, computed draw by draw without holding the full
/// matrix.
pub fn selection_scores(samples: &PosteriorSamples) -> Result<SelectionScores> {
    let model = samples.duration_model()?;
    let mut acc = ScoreAccumulator::new(model.tau.len());
    for d in &samples.dur_draws {
        acc.push(&model.record_loglik(d))?;
    }
    acc.finish()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_entry() {
        assert_eq!(lpml(&[vec![-2.0]]).unwrap(), -2.0);
    }

    #[test]
    fn two_draw_column() {
        let m = vec![vec![-1.0], vec![-3.0]];
        let (lppd, p) = waic_parts(&m).unwrap();
        let expect = (((-1f64).exp() + (-3f64).exp()) / 2.0).ln();
        assert!((lppd - expect).abs() < 1e-15);
        assert!((p - 2.0).abs() < 1e-15);
    }

    #[test]
    fn constant_matrix() {
        let m = vec![vec![-0.7; 4]; 6];
        let (lppd, p) = waic_parts(&m).unwrap();
        assert_eq!(p, 0.0);
        assert_eq!(waic(&m).unwrap(), -2.0 * lppd);
        assert!((lppd - 4.0 * -0.7).abs() < 1e-14);
    }

    #[test]
    fn constant_lpml_equals_lppd() {
        let m = vec![vec![-1.3, 0.2, -4.1]; 7];
        assert_eq!(lpml(&m).unwrap(), waic_parts(&m).unwrap().0);
    }

    #[test]
    fn empty_is_error() {
        assert!(lpml(&[]).is_err());
        assert!(waic(&[vec![]]).is_err());
    }
}
