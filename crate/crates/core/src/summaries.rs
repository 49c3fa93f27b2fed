//! Posterior summaries: global and local covariate tests, transition
//! probability tables and duration mixture tables.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::datamodel::MixedRadix;
use crate::engine::PosteriorSamples;
use crate::error::{Error, Result};
use crate::hierarchy::{num_clusters, HierarchyParams};
use crate::model_selection::{selection_scores, SelectionScores};
use crate::persist::fmt_real;
use crate::trans_sampler::posterior_transition_matrix;

pub const SUMMARY_FORMAT_VERSION: u32 = 1;
pub const DEFAULT_DELTA: f64 = 0.02;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryOptions {
    /// Local-test threshold on |Δλ|.
    pub delta: f64,
    /// Average duration mixture probabilities over all kept draws instead of
    /// using the last one.
    pub dur_mix_probs_posterior_average: bool,
    /// Include LPML and WAIC for gamma-mixture fits.
    pub model_selection: bool,
}

impl Default for SummaryOptions {
    fn default() -> Self {
        SummaryOptions {
            delta: DEFAULT_DELTA,
            dur_mix_probs_posterior_average: false,
            model_selection: true,
        }
    }
}

/// Posterior distribution of the number of clusters of one covariate;
/// `probs[k − 1] = P(k clusters)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalTest {
    pub covariate: String,
    pub probs: Vec<f64>,
}

/// A `[prev][cur]` matrix for one combination of covariate levels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CombinationMatrix {
    pub levels: Vec<String>,
    pub matrix: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndividualMatrix {
    pub individual: String,
    pub levels: Vec<String>,
    pub mean: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovariateLevel {
    pub covariate: String,
    pub level: String,
}

/// Local test between two levels of one covariate with the other covariates
/// fixed; matrices are `[prev][cur]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalTest {
    pub covariate: String,
    pub level_a: String,
    pub level_b: String,
    pub others: Vec<CovariateLevel>,
    pub mean_abs_diff: Vec<Vec<f64>>,
    pub null_prob: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelEstimate {
    pub component: usize,
    pub shape: f64,
    pub rate: f64,
}

/// Mixture probabilities per level of one duration covariate,
/// `probs[component][level]`; `None` for levels without records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixProbBlock {
    pub covariate: String,
    pub levels: Vec<String>,
    pub probs: Vec<Vec<Option<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSummary {
    pub format_version: u32,
    pub delta: f64,
    pub kept_iterations: usize,
    pub state_labels: Vec<String>,
    pub trans_covariates: Vec<String>,
    pub trans_global: Vec<GlobalTest>,
    pub dur_global: Option<Vec<GlobalTest>>,
    pub trans_probs_mean: Vec<CombinationMatrix>,
    pub trans_probs_sd: Vec<CombinationMatrix>,
    pub trans_probs_indiv_mean: Vec<IndividualMatrix>,
    pub trans_local: Vec<LocalTest>,
    pub dur_mix_params: Option<Vec<KernelEstimate>>,
    pub dur_mix_probs: Option<Vec<MixProbBlock>>,
    /// `"last_iteration"` or `"posterior_average"`.
    pub dur_mix_probs_kind: Option<String>,
    pub model_selection: Option<SelectionScores>,
}

/// Distribution of the number of clusters of covariate `j` over the draws.
pub fn global_test(draws: &[HierarchyParams], j: usize, levels: usize) -> Vec<f64> {
    let mut counts = vec![0usize; levels];
    for d in draws {
        counts[num_clusters(&d.labels[j]) - 1] += 1;
    }
    let n = draws.len().max(1) as f64;
    counts.iter().map(|&c| c as f64 / n).collect()
}

fn mean_sd(xs: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = xs.clone().count() as f64;
    let mean = xs.clone().sum::<f64>() / n;
    let sd = if n > 1.0 {
        (xs.map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    (mean, sd)
}

fn rows(flat: &[f64], d: usize) -> Vec<Vec<f64>> {
    flat.chunks(d).map(<[f64]>::to_vec).collect()
}

/// Posterior mean and sd (n − 1) of the exogenous transition matrix for every
/// combination of transition covariate levels, plus the per-individual mean
/// matrices for every combination an individual was observed under.
pub fn transition_posterior_summary(
    samples: &PosteriorSamples,
) -> Result<(Vec<CombinationMatrix>, Vec<CombinationMatrix>, Vec<IndividualMatrix>)> {
    let layout = samples.trans_layout();
    let covs = samples.trans_covariates();
    let data = &samples.data;
    let d = layout.n_outcomes;
    let level_names = |levels: &[usize]| -> Vec<String> {
        covs.iter().zip(levels).map(|(&j, &l)| data.covariate_labels[j][l].clone()).collect()
    };
    let mut means = Vec::new();
    let mut sds = Vec::new();
    for combo in 0..layout.n_combos() {
        let levels = layout.combos.coords(combo);
        let mats = samples
            .trans_draws
            .iter()
            .map(|p| posterior_transition_matrix(&layout, p, &levels, None))
            .collect::<Result<Vec<_>>>()?;
        let (mut m, mut s) = (vec![0.0; d * d], vec![0.0; d * d]);
        for c in 0..d * d {
            (m[c], s[c]) = mean_sd(mats.iter().map(|x| x[c]));
        }
        means.push(CombinationMatrix {
            levels: level_names(&levels),
            matrix: rows(&m, d),
        });
        sds.push(CombinationMatrix {
            levels: level_names(&levels),
            matrix: rows(&s, d),
        });
    }
    let mut pairs: Vec<(usize, usize)> = data
        .records
        .iter()
        .map(|r| (r.individual, layout.combos.index(covs.iter().map(|&j| r.covariates[j]))))
        .collect();
    pairs.sort_unstable();
    pairs.dedup();
    let mut indiv = Vec::with_capacity(pairs.len());
    for (i, combo) in pairs {
        let levels = layout.combos.coords(combo);
        let mut m = vec![0.0; d * d];
        for p in &samples.trans_draws {
            let x = posterior_transition_matrix(&layout, p, &levels, Some(i))?;
            for (a, b) in m.iter_mut().zip(x) {
                *a += b;
            }
        }
        let n = samples.trans_draws.len().max(1) as f64;
        m.iter_mut().for_each(|a| *a /= n);
        indiv.push(IndividualMatrix {
            individual: data.individual_ids[i].clone(),
            levels: level_names(&levels),
            mean: rows(&m, d),
        });
    }
    Ok((means, sds, indiv))
}

/// Local tests for transition covariate `j` (index into the model's
/// transition covariates): every unordered level pair under every observed
/// setting of the other covariates.
pub fn local_test(samples: &PosteriorSamples, j: usize, delta: f64) -> Result<Vec<LocalTest>> {
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(Error::Config(format!("delta must be positive, got {delta}")));
    }
    let layout = samples.trans_layout();
    if !layout.fixed_effect {
        return Ok(Vec::new());
    }
    let covs = samples.trans_covariates();
    if j >= covs.len() {
        return Err(Error::Selector(format!("no transition covariate {}", j + 1)));
    }
    let data = &samples.data;
    let d = layout.n_outcomes;
    let mut settings: Vec<Vec<usize>> = data
        .records
        .iter()
        .map(|r| {
            covs.iter()
                .enumerate()
                .filter(|&(w, _)| w != j)
                .map(|(_, &c)| r.covariates[c])
                .collect()
        })
        .collect();
    settings.sort_unstable();
    settings.dedup();
    let card = layout.cov_cards()[j];
    let n = samples.trans_draws.len().max(1) as f64;
    let mut out = Vec::new();
    for a in 0..card {
        for b in a + 1..card {
            for other in &settings {
                let with = |level: usize| -> Vec<usize> {
                    let mut v = other.clone();
                    v.insert(j, level);
                    v
                };
                let (la, lb) = (with(a), with(b));
                let mut sum = vec![0.0; d * d];
                let mut null = vec![0.0; d * d];
                for p in &samples.trans_draws {
                    let ha = layout.combos.index(la.iter().zip(&p.labels).map(|(&l, lab)| lab[l]));
                    let hb = layout.combos.index(lb.iter().zip(&p.labels).map(|(&l, lab)| lab[l]));
                    let fa = &p.lambda_fixed[layout.fixed_offset(ha, 0)..][..d * d];
                    let fb = &p.lambda_fixed[layout.fixed_offset(hb, 0)..][..d * d];
                    for c in 0..d * d {
                        let diff = (fa[c] - fb[c]).abs();
                        sum[c] += diff;
                        if diff <= delta {
                            null[c] += 1.0;
                        }
                    }
                }
                let others = covs
                    .iter()
                    .enumerate()
                    .filter(|&(w, _)| w != j)
                    .zip(other)
                    .map(|((_, &c), &l)| CovariateLevel {
                        covariate: data.covariate_names[c].clone(),
                        level: data.covariate_labels[c][l].clone(),
                    })
                    .collect();
                let cov = covs[j];
                out.push(LocalTest {
                    covariate: data.covariate_names[cov].clone(),
                    level_a: data.covariate_labels[cov][a].clone(),
                    level_b: data.covariate_labels[cov][b].clone(),
                    others,
                    mean_abs_diff: rows(&sum.iter().map(|s| s / n).collect::<Vec<_>>(), d),
                    null_prob: rows(&null.iter().map(|s| s / n).collect::<Vec<_>>(), d),
                });
            }
        }
    }
    Ok(out)
}

/// Kernel parameters of the last kept draw and the mixture probabilities per
/// level of every duration covariate: record-level probabilities averaged
/// over the records at that level, under the last kept draw (or averaged over
/// all draws).
pub fn duration_mixture_summary(
    samples: &PosteriorSamples,
    posterior_average: bool,
) -> Result<(Vec<KernelEstimate>, Vec<MixProbBlock>)> {
    let model = samples.duration_model()?;
    let last = samples
        .dur_draws
        .last()
        .ok_or_else(|| Error::Data("no kept duration draws".into()))?;
    let k = model.n_components();
    let params = (0..k)
        .map(|c| KernelEstimate {
            component: c + 1,
            shape: last.shapes[c],
            rate: last.rates[c],
        })
        .collect();
    let probs = if posterior_average {
        let mut acc = vec![0.0; model.tau.len() * k];
        for d in &samples.dur_draws {
            for (a, b) in acc.iter_mut().zip(model.record_mixture_probs(d)) {
                *a += b;
            }
        }
        let n = samples.dur_draws.len() as f64;
        acc.iter_mut().for_each(|a| *a /= n);
        acc
    } else {
        model.record_mixture_probs(last)
    };
    let names = samples.dur_covariate_names();
    let level_labels = samples.dur_covariate_levels();
    let layout = &model.hier.layout;
    let mut blocks = Vec::with_capacity(names.len());
    for (r, (name, labels)) in names.iter().zip(level_labels).enumerate() {
        let card = layout.cov_cards()[r];
        let mut sums = vec![0.0; card * k];
        let mut counts = vec![0usize; card];
        for (o, p) in model.hier.obs.iter().zip(probs.chunks(k)) {
            let level = layout.combos.coords(o.combo as usize)[r];
            counts[level] += 1;
            for c in 0..k {
                sums[level * k + c] += p[c];
            }
        }
        let table = (0..k)
            .map(|c| {
                (0..card)
                    .map(|l| (counts[l] > 0).then(|| sums[l * k + c] / counts[l] as f64))
                    .collect()
            })
            .collect();
        blocks.push(MixProbBlock {
            covariate: name.clone(),
            levels: labels,
            probs: table,
        });
    }
    Ok((params, blocks))
}

/// Builds the full summary of one fit.
pub fn summarize(samples: &PosteriorSamples, opts: &SummaryOptions) -> Result<FitSummary> {
    if !(opts.delta > 0.0) || !opts.delta.is_finite() {
        return Err(Error::Config(format!("delta must be positive, got {}", opts.delta)));
    }
    let layout = samples.trans_layout();
    let covs = samples.trans_covariates();
    let data = &samples.data;
    let trans_names: Vec<String> = covs.iter().map(|&j| data.covariate_names[j].clone()).collect();
    let trans_global = if layout.fixed_effect {
        trans_names
            .iter()
            .enumerate()
            .map(|(j, name)| GlobalTest {
                covariate: name.clone(),
                probs: global_test(&samples.trans_draws, j, layout.cov_cards()[j]),
            })
            .collect()
    } else {
        Vec::new()
    };
    let (trans_probs_mean, trans_probs_sd, trans_probs_indiv_mean) = transition_posterior_summary(samples)?;
    let mut trans_local = Vec::new();
    for j in 0..covs.len() {
        trans_local.extend(local_test(samples, j, opts.delta)?);
    }
    let (mut dur_global, mut dur_mix_params, mut dur_mix_probs, mut kind, mut scores) = (None, None, None, None, None);
    if let Some(dl) = samples.dur_layout() {
        if dl.fixed_effect {
            let mix: Vec<HierarchyParams> = samples.dur_draws.iter().map(|d| d.mixture.clone()).collect();
            dur_global = Some(
                samples
                    .dur_covariate_names()
                    .into_iter()
                    .enumerate()
                    .map(|(r, covariate)| GlobalTest {
                        covariate,
                        probs: global_test(&mix, r, dl.cov_cards()[r]),
                    })
                    .collect(),
            );
        }
        let (p, b) = duration_mixture_summary(samples, opts.dur_mix_probs_posterior_average)?;
        dur_mix_params = Some(p);
        dur_mix_probs = Some(b);
        kind = Some(
            if opts.dur_mix_probs_posterior_average {
                "posterior_average"
            } else {
                "last_iteration"
            }
            .to_string(),
        );
        if opts.model_selection {
            scores = Some(selection_scores(samples)?);
        }
    }
    Ok(FitSummary {
        format_version: SUMMARY_FORMAT_VERSION,
        delta: opts.delta,
        kept_iterations: samples.kept(),
        state_labels: data.state_labels.clone(),
        trans_covariates: trans_names,
        trans_global,
        dur_global,
        trans_probs_mean,
        trans_probs_sd,
        trans_probs_indiv_mean,
        trans_local,
        dur_mix_params,
        dur_mix_probs,
        dur_mix_probs_kind: kind,
        model_selection: scores,
    })
}

fn global_table(tests: &[GlobalTest]) -> Vec<Vec<String>> {
    let max = tests.iter().map(|t| t.probs.len()).max().unwrap_or(0);
    let mut out = vec![std::iter::once("cluster_data".to_string())
        .chain(tests.iter().map(|t| t.covariate.clone()))
        .collect()];
    for k in 0..max {
        let mut row = vec![(k + 1).to_string()];
        row.extend(tests.iter().map(|t| fmt_real(t.probs.get(k).copied().unwrap_or(0.0))));
        out.push(row);
    }
    out
}

fn write_rows(path: &Path, rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Artifact(format!("{}: {e}", path.display())))?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn matrix_rows(states: &[String], m: &[Vec<f64>]) -> Vec<Vec<String>> {
    let mut out = vec![std::iter::once("prev\\cur".to_string()).chain(states.iter().cloned()).collect()];
    for (s, row) in states.iter().zip(m) {
        out.push(std::iter::once(s.clone()).chain(row.iter().map(|&x| fmt_real(x))).collect());
    }
    out
}

fn slug(parts: &[String]) -> String {
    parts
        .iter()
        .map(|p| p.chars().map(|c| if c.is_ascii_alphanumeric() { c } else { '-' }).collect::<String>())
        .collect::<Vec<_>>()
        .join("_")
}

impl FitSummary {
    /// Writes `summary.json`, one delimited table per field and a
    /// `plot-data/` directory with one table per figure.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        let plots = dir.join("plot-data");
        std::fs::create_dir_all(&plots).map_err(|e| Error::io(&plots, e))?;
        let json = serde_json::to_string_pretty(self)? + "\n";
        let path = dir.join("summary.json");
        std::fs::write(&path, json).map_err(|e| Error::io(&path, e))?;

        let states = &self.state_labels;
        write_rows(&dir.join("trans_global.csv"), &global_table(&self.trans_global))?;
        write_rows(&plots.join("global_trans.csv"), &global_table(&self.trans_global))?;
        if let Some(g) = &self.dur_global {
            write_rows(&dir.join("dur_global.csv"), &global_table(g))?;
            write_rows(&plots.join("global_dur.csv"), &global_table(g))?;
        }

        let mut probs = vec![self
            .trans_covariates
            .iter()
            .cloned()
            .chain(["prev", "cur", "mean", "sd"].map(String::from))
            .collect::<Vec<_>>()];
        for (m, s) in self.trans_probs_mean.iter().zip(&self.trans_probs_sd) {
            for (a, (rm, rs)) in m.matrix.iter().zip(&s.matrix).enumerate() {
                for (b, (&x, &y)) in rm.iter().zip(rs).enumerate() {
                    let mut row = m.levels.clone();
                    row.extend([states[a].clone(), states[b].clone(), fmt_real(x), fmt_real(y)]);
                    probs.push(row);
                }
            }
            let tag = slug(&m.levels);
            write_rows(&plots.join(format!("heatmap_mean_{tag}.csv")), &matrix_rows(states, &m.matrix))?;
            write_rows(&plots.join(format!("heatmap_sd_{tag}.csv")), &matrix_rows(states, &s.matrix))?;
        }
        write_rows(&dir.join("trans_probs.csv"), &probs)?;

        let mut indiv = vec![std::iter::once("individual".to_string())
            .chain(self.trans_covariates.iter().cloned())
            .chain(["prev", "cur", "mean"].map(String::from))
            .collect::<Vec<_>>()];
        for m in &self.trans_probs_indiv_mean {
            for (a, r) in m.mean.iter().enumerate() {
                for (b, &x) in r.iter().enumerate() {
                    let mut row = vec![m.individual.clone()];
                    row.extend(m.levels.iter().cloned());
                    row.extend([states[a].clone(), states[b].clone(), fmt_real(x)]);
                    indiv.push(row);
                }
            }
        }
        write_rows(&dir.join("trans_probs_indiv.csv"), &indiv)?;

        let mut local = vec![["covariate", "level_a", "level_b", "others", "prev", "cur", "mean_abs_diff", "null_prob"]
            .map(String::from)
            .to_vec()];
        for t in &self.trans_local {
            let others: Vec<String> = t.others.iter().map(|o| format!("{}={}", o.covariate, o.level)).collect();
            for (a, (rd, rn)) in t.mean_abs_diff.iter().zip(&t.null_prob).enumerate() {
                for (b, (&x, &y)) in rd.iter().zip(rn).enumerate() {
                    local.push(vec![
                        t.covariate.clone(),
                        t.level_a.clone(),
                        t.level_b.clone(),
                        others.join(";"),
                        states[a].clone(),
                        states[b].clone(),
                        fmt_real(x),
                        fmt_real(y),
                    ]);
                }
            }
            let mut tag = vec![t.covariate.clone(), t.level_a.clone(), "vs".into(), t.level_b.clone()];
            tag.extend(others);
            let tag = slug(&tag);
            write_rows(&plots.join(format!("local_diff_{tag}.csv")), &matrix_rows(states, &t.mean_abs_diff))?;
            write_rows(&plots.join(format!("local_null_{tag}.csv")), &matrix_rows(states, &t.null_prob))?;
        }
        write_rows(&dir.join("trans_local.csv"), &local)?;

        if let Some(p) = &self.dur_mix_params {
            let mut rows = vec![["component", "shape", "rate"].map(String::from).to_vec()];
            rows.extend(p.iter().map(|k| vec![k.component.to_string(), fmt_real(k.shape), fmt_real(k.rate)]));
            write_rows(&dir.join("dur_mix_params.csv"), &rows)?;
        }
        if let Some(blocks) = &self.dur_mix_probs {
            let mut rows = vec![["covariate", "component", "level", "prob"].map(String::from).to_vec()];
            for b in blocks {
                for (c, r) in b.probs.iter().enumerate() {
                    for (l, x) in b.levels.iter().zip(r) {
                        rows.push(vec![
                            b.covariate.clone(),
                            (c + 1).to_string(),
                            l.clone(),
                            x.map_or_else(|| "NA".to_string(), fmt_real),
                        ]);
                    }
                }
            }
            write_rows(&dir.join("dur_mix_probs.csv"), &rows)?;
        }
        if let Some(s) = &self.model_selection {
            write_rows(
                &dir.join("model_selection.csv"),
                &[
                    vec!["lpml".into(), "waic".into(), "lppd".into(), "p_waic".into()],
                    vec![fmt_real(s.lpml), fmt_real(s.waic), fmt_real(s.lppd), fmt_real(s.p_waic)],
                ],
            )?;
        }
        Ok(())
    }

    /// Plain-text report of the main tables.
    pub fn report(&self) -> String {
        let mut s = String::new();
        let table = |s: &mut String, title: &str, tests: &[GlobalTest]| {
            let _ = writeln!(s, "{title}");
            for row in global_table(tests) {
                let cells: Vec<String> = row
                    .iter()
                    .map(|c| match c.parse::<f64>() {
                        Ok(x) if c.contains('.') || c.contains('e') => format!("{x:>12.4}"),
                        _ => format!("{c:>12}"),
                    })
                    .collect();
                let _ = writeln!(s, "{}", cells.join(""));
            }
            let _ = writeln!(s);
        };
        if !self.trans_global.is_empty() {
            table(&mut s, "Global tests, transitions (P(number of clusters)):", &self.trans_global);
        }
        if let Some(g) = &self.dur_global {
            table(&mut s, "Global tests, durations (P(number of clusters)):", g);
        }
        if let Some(p) = &self.dur_mix_params {
            let _ = writeln!(s, "Gamma kernels (last kept iteration):");
            for k in p {
                let _ = writeln!(s, "  Comp {:<3} shape {:>10.4}  rate {:>10.4}", k.component, k.shape, k.rate);
            }
            let _ = writeln!(s);
        }
        if let Some(blocks) = &self.dur_mix_probs {
            let _ = writeln!(s, "Mixture probabilities per covariate level:");
            for b in blocks {
                let _ = writeln!(s, "${}", b.covariate);
                let _ = writeln!(s, "{:>10}{}", "", b.levels.iter().map(|l| format!("{l:>10}")).collect::<String>());
                for (c, r) in b.probs.iter().enumerate() {
                    let cells: String = r
                        .iter()
                        .map(|x| x.map_or_else(|| format!("{:>10}", "NA"), |x| format!("{x:>10.2}")))
                        .collect();
                    let _ = writeln!(s, "{:>10}{cells}", format!("Comp {}", c + 1));
                }
            }
            let _ = writeln!(s);
        }
        if let Some(m) = &self.model_selection {
            let _ = writeln!(s, "LPML {:.4}   WAIC {:.4}", m.lpml, m.waic);
        }
        s
    }
}

/// Level combinations of the transition covariates in grid order, as
/// 0-based level vectors.
pub fn transition_combinations(samples: &PosteriorSamples) -> Vec<Vec<usize>> {
    let layout = samples.trans_layout();
    let grid: &MixedRadix = &layout.combos;
    (0..grid.size()).map(|c| grid.coords(c)).collect()
}
