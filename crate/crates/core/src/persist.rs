//! On-disk layout of a fit.
//!
//! ```text
//! <dir>/meta.json             format version, config, seed, dimensions, labels, acceptance
//! <dir>/timing.json           wall-clock per phase (not part of the reproducible artifacts)
//! <dir>/data.csv              the modelled dataset
//! <dir>/trans_<family>.csv    one row per kept iteration
//! <dir>/dur_<family>.csv      same, gamma-mixture fits only
//! <dir>/dur_kernels.csv
//! ```
//!
//! Reals are written in shortest round-trip form so reading a fit back gives
//! bit-identical draws.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::datamodel::{parse_dataset, ModelConfig, ParseOptions};
use crate::dur_sampler::DurationParams;
use crate::engine::{AcceptanceRate, PosteriorSamples, Timing};
use crate::error::{Error, Result};
use crate::hierarchy::{HierarchyParams, Layout};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitDims {
    pub num_states: usize,
    pub num_individuals: usize,
    pub num_records: usize,
    pub num_sequences: usize,
    pub covariate_cardinalities: Vec<usize>,
    pub trans_covariates: Vec<usize>,
    pub dur_covariates: Option<Vec<String>>,
    pub num_components: Option<usize>,
    pub kept_iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitLabels {
    pub individual_ids: Vec<String>,
    pub state_labels: Vec<String>,
    pub covariate_names: Vec<String>,
    pub covariate_labels: Vec<Vec<String>>,
    pub sequence_ids: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitMeta {
    pub format_version: u32,
    pub chain: usize,
    pub seed: u64,
    pub config: ModelConfig,
    pub has_durations: bool,
    pub dims: FitDims,
    pub labels: FitLabels,
    pub acceptance: BTreeMap<String, AcceptanceRate>,
}

fn meta_of(s: &PosteriorSamples) -> FitMeta {
    let d = &s.data;
    FitMeta {
        format_version: FORMAT_VERSION,
        chain: s.chain,
        seed: s.config.seed,
        config: s.config.clone(),
        has_durations: d.has_durations,
        dims: FitDims {
            num_states: d.num_states,
            num_individuals: d.num_individuals(),
            num_records: d.len(),
            num_sequences: d.num_sequences,
            covariate_cardinalities: d.covariate_cardinalities.clone(),
            trans_covariates: s.trans_covariates(),
            dur_covariates: s.has_duration_model().then(|| s.dur_covariate_names()),
            num_components: s.config.duration_mode.num_components(),
            kept_iterations: s.kept(),
        },
        labels: FitLabels {
            individual_ids: d.individual_ids.clone(),
            state_labels: d.state_labels.clone(),
            covariate_names: d.covariate_names.clone(),
            covariate_labels: d.covariate_labels.clone(),
            sequence_ids: d.sequence_ids.clone(),
        },
        acceptance: s.acceptance.clone(),
    }
}

fn cell_names(prefix: &str, dims: &[usize]) -> Vec<String> {
    let total: usize = dims.iter().product();
    (0..total)
        .map(|mut i| {
            let mut idx = vec![0; dims.len()];
            for (o, &d) in idx.iter_mut().zip(dims).rev() {
                *o = i % d + 1;
                i /= d;
            }
            let parts: Vec<String> = idx.iter().map(|x| x.to_string()).collect();
            format!("{prefix}[{}]", parts.join(","))
        })
        .collect()
}

/// Shortest round-trip text of a real; scientific form for very small or
/// large magnitudes.
pub fn fmt_real(x: f64) -> String {
    let a = x.abs();
    if a != 0.0 && !(1e-5..1e16).contains(&a) {
        format!("{x:e}")
    } else {
        format!("{x}")
    }
}

struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn new(header: Vec<String>) -> Self {
        Table { header, rows: Vec::new() }
    }

    fn push(&mut self, iteration: usize, values: impl IntoIterator<Item = f64>) {
        let mut row = vec![iteration.to_string()];
        row.extend(values.into_iter().map(fmt_real));
        self.rows.push(row);
    }

    fn write(&self, path: &Path) -> Result<()> {
        let f = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = csv::Writer::from_writer(BufWriter::new(f));
        let mut header = vec!["iteration".to_string()];
        header.extend(self.header.iter().cloned());
        w.write_record(&header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

fn read_table(path: &Path, width: usize) -> Result<Vec<Vec<f64>>> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::Artifact(format!("{}: {e}", path.display())))?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        if rec.len() != width + 1 {
            return Err(Error::Artifact(format!(
                "{}: expected {} columns, found {}",
                path.display(),
                width + 1,
                rec.len()
            )));
        }
        let row = rec
            .iter()
            .skip(1)
            .map(|v| v.parse::<f64>().map_err(|_| Error::Artifact(format!("{}: bad value '{v}'", path.display()))))
            .collect::<Result<Vec<f64>>>()?;
        out.push(row);
    }
    Ok(out)
}

fn hierarchy_tables(layout: &Layout, draws: &[&HierarchyParams], cov_names: &[String]) -> Vec<(&'static str, Table)> {
    let (c, o) = (layout.n_contexts, layout.n_outcomes);
    let fixed_dims = if layout.fixed_effect { vec![layout.n_combos(), c, o] } else { vec![0] };
    let indiv_dims = if layout.random_effect { vec![layout.n_individuals, c, o] } else { vec![0] };
    let pi_dims = if layout.both_effects() { vec![layout.n_individuals, c] } else { vec![0] };
    let mut tables = vec![
        ("lambda_fixed", Table::new(cell_names("lambda_fixed", &fixed_dims))),
        ("lambda_indiv", Table::new(cell_names("lambda_indiv", &indiv_dims))),
        ("lambda0", Table::new(cell_names("lambda0", &[c, o]))),
        ("pi0", Table::new(cell_names("pi0", &pi_dims))),
        ("labels", Table::new(Vec::new())),
        ("mu", Table::new(Vec::new())),
        ("concentrations", Table::new(vec!["alpha0".into(), "alpha_indiv".into()])),
    ];
    if layout.fixed_effect {
        for (name, &d) in cov_names.iter().zip(layout.cov_cards()) {
            for l in 1..=d {
                tables[4].1.header.push(format!("{name}[{l}]"));
                tables[5].1.header.push(format!("{name}[{l}]"));
            }
        }
    }
    for (m, p) in draws.iter().enumerate() {
        let it = m + 1;
        tables[0].1.push(it, p.lambda_fixed.iter().copied());
        tables[1].1.push(it, p.lambda_indiv.iter().copied());
        tables[2].1.push(it, p.lambda0.iter().copied());
        tables[3].1.push(it, p.pi0.iter().copied());
        tables[4].1.push(it, p.labels.iter().flatten().map(|&l| (l + 1) as f64));
        tables[5].1.push(it, p.mu.iter().flatten().copied());
        tables[6].1.push(it, [p.alpha0, p.alpha_indiv]);
    }
    tables
}

fn read_hierarchy(dir: &Path, prefix: &str, layout: &Layout, kept: usize) -> Result<Vec<HierarchyParams>> {
    let (c, o) = (layout.n_contexts, layout.n_outcomes);
    let width = |on: bool, n: usize| if on { n } else { 0 };
    let cards = layout.cov_cards();
    let label_width = width(layout.fixed_effect, cards.iter().sum());
    let read = |name: &str, w: usize| -> Result<Vec<Vec<f64>>> {
        let t = read_table(&dir.join(format!("{prefix}_{name}.csv")), w)?;
        if t.len() != kept {
            return Err(Error::Artifact(format!("{prefix}_{name}.csv has {} rows, expected {kept}", t.len())));
        }
        Ok(t)
    };
    let lf = read("lambda_fixed", width(layout.fixed_effect, layout.n_combos() * c * o))?;
    let li = read("lambda_indiv", width(layout.random_effect, layout.n_individuals * c * o))?;
    let l0 = read("lambda0", c * o)?;
    let pi = read("pi0", width(layout.both_effects(), layout.n_individuals * c))?;
    let labels = read("labels", label_width)?;
    let mu = read("mu", label_width)?;
    let conc = read("concentrations", 2)?;
    let split = |flat: &[f64], f: &dyn Fn(f64) -> Result<usize>| -> Result<Vec<Vec<usize>>> {
        let mut out = Vec::new();
        let mut at = 0;
        if layout.fixed_effect {
            for &d in cards {
                out.push(flat[at..at + d].iter().map(|&x| f(x)).collect::<Result<Vec<_>>>()?);
                at += d;
            }
        }
        Ok(out)
    };
    let to_label = |x: f64| -> Result<usize> {
        if x >= 1.0 && x.fract() == 0.0 {
            Ok(x as usize - 1)
        } else {
            Err(Error::Artifact(format!("bad cluster label {x}")))
        }
    };
    (0..kept)
        .map(|m| {
            let mut mu_split = Vec::new();
            let mut at = 0;
            if layout.fixed_effect {
                for &d in cards {
                    mu_split.push(mu[m][at..at + d].to_vec());
                    at += d;
                }
            }
            Ok(HierarchyParams {
                lambda_fixed: lf[m].clone(),
                lambda_indiv: li[m].clone(),
                lambda0: l0[m].clone(),
                pi0: pi[m].clone(),
                labels: split(&labels[m], &to_label)?,
                mu: mu_split,
                alpha0: conc[m][0],
                alpha_indiv: conc[m][1],
            })
        })
        .collect()
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    std::fs::write(path, s).map_err(|e| Error::io(path, e))
}

/// Writes a fit directory, creating it if needed.
pub fn write_fit(samples: &PosteriorSamples, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_json(&dir.join("meta.json"), &meta_of(samples))?;
    write_json(&dir.join("timing.json"), &samples.timing)?;
    let data_path = dir.join("data.csv");
    let f = File::create(&data_path).map_err(|e| Error::io(&data_path, e))?;
    samples.data.write_csv_with(BufWriter::new(f), true)?;

    let trans_names: Vec<String> = samples
        .trans_covariates()
        .iter()
        .map(|&j| samples.data.covariate_names[j].clone())
        .collect();
    let draws: Vec<&HierarchyParams> = samples.trans_draws.iter().collect();
    for (name, t) in hierarchy_tables(&samples.trans_layout(), &draws, &trans_names) {
        t.write(&dir.join(format!("trans_{name}.csv")))?;
    }
    if let Some(layout) = samples.dur_layout() {
        let draws: Vec<&HierarchyParams> = samples.dur_draws.iter().map(|d| &d.mixture).collect();
        for (name, t) in hierarchy_tables(&layout, &draws, &samples.dur_covariate_names()) {
            t.write(&dir.join(format!("dur_{name}.csv")))?;
        }
        let k = layout.n_outcomes;
        let mut header: Vec<String> = (1..=k).map(|c| format!("shape[{c}]")).collect();
        header.extend((1..=k).map(|c| format!("rate[{c}]")));
        let mut t = Table::new(header);
        for (m, d) in samples.dur_draws.iter().enumerate() {
            t.push(m + 1, d.shapes.iter().chain(&d.rates).copied());
        }
        t.write(&dir.join("dur_kernels.csv"))?;
    }
    Ok(())
}

pub fn read_meta(dir: impl AsRef<Path>) -> Result<FitMeta> {
    let path = dir.as_ref().join("meta.json");
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let meta: FitMeta = serde_json::from_str(&text)?;
    if meta.format_version != FORMAT_VERSION {
        return Err(Error::Artifact(format!(
            "format version {} is not supported (expected {FORMAT_VERSION})",
            meta.format_version
        )));
    }
    Ok(meta)
}

/// Reads a fit directory written by [`write_fit`].
pub fn read_fit(dir: impl AsRef<Path>) -> Result<PosteriorSamples> {
    let dir = dir.as_ref();
    let meta = read_meta(dir)?;
    let opts = ParseOptions {
        num_covariates: meta.labels.covariate_names.len(),
        state_labels: Some(meta.labels.state_labels.clone()),
        covariate_labels: Some(meta.labels.covariate_labels.clone()),
        require_durations: meta.has_durations,
    };
    let mut data = parse_dataset(dir.join("data.csv"), &opts)?;
    // restore the stored individual order and sequence naming
    let order: std::collections::HashMap<&str, usize> = meta
        .labels
        .individual_ids
        .iter()
        .enumerate()
        .map(|(i, s)| (s.as_str(), i))
        .collect();
    let remap: Vec<usize> = data
        .individual_ids
        .iter()
        .map(|id| order.get(id.as_str()).copied().ok_or_else(|| Error::Artifact(format!("unknown individual {id}"))))
        .collect::<Result<_>>()?;
    for r in &mut data.records {
        r.individual = remap[r.individual];
    }
    data.individual_ids = meta.labels.individual_ids.clone();
    data.sequence_ids = meta.labels.sequence_ids.clone();
    data.validate()?;
    if data.len() != meta.dims.num_records || data.num_sequences != meta.dims.num_sequences {
        return Err(Error::Artifact("data.csv does not match meta.json".into()));
    }

    let timing = std::fs::read_to_string(dir.join("timing.json"))
        .ok()
        .and_then(|t| serde_json::from_str::<Timing>(&t).ok())
        .unwrap_or_default();
    let mut samples = PosteriorSamples {
        config: meta.config.clone(),
        chain: meta.chain,
        data,
        trans_draws: Vec::new(),
        dur_draws: Vec::new(),
        acceptance: meta.acceptance.clone(),
        timing,
    };
    let kept = meta.dims.kept_iterations;
    samples.trans_draws = read_hierarchy(dir, "trans", &samples.trans_layout(), kept)?;
    if let Some(layout) = samples.dur_layout() {
        let mixtures = read_hierarchy(dir, "dur", &layout, kept)?;
        let k = layout.n_outcomes;
        let kernels = read_table(&dir.join("dur_kernels.csv"), 2 * k)?;
        if kernels.len() != kept {
            return Err(Error::Artifact("dur_kernels.csv has the wrong number of rows".into()));
        }
        samples.dur_draws = mixtures
            .into_iter()
            .zip(kernels)
            .map(|(mixture, row)| DurationParams {
                mixture,
                shapes: row[..k].to_vec(),
                rates: row[k..].to_vec(),
            })
            .collect();
    }
    Ok(samples)
}

/// Lists the files of a fit directory that must be identical between two
/// runs with the same inputs and seed (everything except `timing.json`).
pub fn reproducible_files(dir: impl AsRef<Path>) -> Result<Vec<std::path::PathBuf>> {
    let dir = dir.as_ref();
    let mut out: Vec<_> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.file_name().is_some_and(|n| n != "timing.json"))
        .collect();
    out.sort();
    Ok(out)
}
