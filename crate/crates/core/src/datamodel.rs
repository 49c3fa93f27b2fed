//! Dataset and configuration types, delimited-file ingestion, and duration
//! preprocessing.
//!
//! Files use 1-based integer codes for states and covariate levels. Inside the
//! crate every code is shifted to 0-based; labels are display metadata only.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAX_COVARIATES: usize = 5;

/// Label given to the synthetic state created by [`discretize_durations`].
pub const DURATION_STATE_LABEL: &str = "dur.state";

/// One observed transition `prev → cur` with its optional duration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionRecord {
    /// Sequence this record belongs to (0-based, in file order).
    pub sequence: usize,
    /// Dense individual index (0-based, order of first appearance).
    pub individual: usize,
    /// 0-based covariate levels, one per covariate.
    pub covariates: Vec<usize>,
    pub prev: usize,
    pub cur: usize,
    pub duration: Option<f64>,
}

/// Validated collection of transition records grouped into sequences.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceDataset {
    pub records: Vec<TransitionRecord>,
    pub num_sequences: usize,
    /// Raw id strings, indexed by dense individual index.
    pub individual_ids: Vec<String>,
    pub num_states: usize,
    pub covariate_cardinalities: Vec<usize>,
    pub covariate_names: Vec<String>,
    pub state_labels: Vec<String>,
    pub covariate_labels: Vec<Vec<String>>,
    pub has_durations: bool,
    /// Present when the source file carried an explicit sequence column.
    pub sequence_ids: Option<Vec<String>>,
}

impl SequenceDataset {
    pub fn num_individuals(&self) -> usize {
        self.individual_ids.len()
    }

    pub fn num_covariates(&self) -> usize {
        self.covariate_cardinalities.len()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Checks every structural invariant. Used after construction and by tests.
    pub fn validate(&self) -> Result<()> {
        let p = self.num_covariates();
        if !(1..=MAX_COVARIATES).contains(&p) {
            return Err(Error::Data(format!(
                "number of covariates must be between 1 and {MAX_COVARIATES}, got {p}"
            )));
        }
        if self.covariate_labels.len() != p || self.covariate_names.len() != p {
            return Err(Error::Data("covariate label metadata does not match covariate count".into()));
        }
        if self.state_labels.len() != self.num_states {
            return Err(Error::Data("state labels do not match number of states".into()));
        }
        let mut last: Option<&TransitionRecord> = None;
        for (row, r) in self.records.iter().enumerate() {
            if r.prev >= self.num_states || r.cur >= self.num_states {
                return Err(Error::validation(row + 1, "state", "state code out of range"));
            }
            if r.covariates.len() != p {
                return Err(Error::validation(row + 1, "covariates", "wrong number of covariates"));
            }
            for (j, (&l, &d)) in r.covariates.iter().zip(&self.covariate_cardinalities).enumerate() {
                if l >= d {
                    return Err(Error::validation(row + 1, &self.covariate_names[j], "level out of range"));
                }
            }
            if r.individual >= self.num_individuals() || r.sequence >= self.num_sequences {
                return Err(Error::validation(row + 1, "Id", "index out of range"));
            }
            match (self.has_durations, r.duration) {
                (true, Some(t)) if t.is_finite() && t > 0.0 => {}
                (true, _) => {
                    return Err(Error::validation(row + 1, "duration", "duration must be a positive finite real"))
                }
                (false, Some(_)) => {
                    return Err(Error::validation(row + 1, "duration", "unexpected duration"))
                }
                (false, None) => {}
            }
            if let Some(prev) = last {
                if prev.sequence == r.sequence && prev.cur != r.prev {
                    return Err(Error::validation(
                        row + 1,
                        "Previous State",
                        "previous state does not continue the sequence",
                    ));
                }
                if r.sequence < prev.sequence || r.sequence > prev.sequence + 1 {
                    return Err(Error::validation(row + 1, "sequence", "sequences must be contiguous"));
                }
            }
            last = Some(r);
        }
        Ok(())
    }

    /// True when the sequence boundaries cannot be recovered from row
    /// continuity and individual changes alone.
    pub fn needs_sequence_column(&self) -> bool {
        self.records.windows(2).any(|w| {
            let inferred_new = w[0].individual != w[1].individual || w[0].cur != w[1].prev;
            inferred_new != (w[0].sequence != w[1].sequence)
        })
    }

    /// Writes the dataset in the standard delimited format. A trailing
    /// `Sequence` column is added only when boundaries are ambiguous.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        self.write_csv_with(writer, self.needs_sequence_column())
    }

    /// Like [`write_csv`](Self::write_csv), with the `Sequence` column forced
    /// on or off.
    pub fn write_csv_with<W: Write>(&self, writer: W, with_seq: bool) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["Id".to_string()];
        header.extend(self.covariate_names.iter().cloned());
        header.push("Prev_State".into());
        header.push("Cur_State".into());
        if self.has_durations {
            header.push("Duration".into());
        }
        if with_seq {
            header.push("Sequence".into());
        }
        w.write_record(&header)?;
        for r in &self.records {
            let mut row = vec![self.individual_ids[r.individual].clone()];
            row.extend(r.covariates.iter().map(|l| (l + 1).to_string()));
            row.push((r.prev + 1).to_string());
            row.push((r.cur + 1).to_string());
            if let Some(t) = r.duration {
                row.push(format!("{t}"));
            }
            if with_seq {
                let id = match &self.sequence_ids {
                    Some(ids) => ids[r.sequence].clone(),
                    None => (r.sequence + 1).to_string(),
                };
                row.push(id);
            }
            w.write_record(&row)?;
        }
        w.flush().map_err(|e| Error::io("<csv writer>", e))?;
        Ok(())
    }

    pub fn write_csv_file(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(f))
    }
}

/// How duration times are handled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DurationMode {
    /// Model transitions only.
    #[default]
    Ignore,
    /// Replace each duration by ⌊τ/unit⌋ instances of an extra state.
    Discretize { unit: f64 },
    /// Mixture of gamma kernels. Both vectors have one entry per component and
    /// give the (shape, rate) of the gamma priors placed on that component's
    /// kernel shape and kernel rate.
    GammaMixture { shape_prior: Vec<f64>, rate_prior: Vec<f64> },
}

impl DurationMode {
    pub fn gamma(k: usize) -> Self {
        DurationMode::GammaMixture {
            shape_prior: vec![1.0; k],
            rate_prior: vec![1.0; k],
        }
    }

    pub fn num_components(&self) -> Option<usize> {
        match self {
            DurationMode::GammaMixture { shape_prior, .. } => Some(shape_prior.len()),
            _ => None,
        }
    }
}

/// How kernel shape parameters are updated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ShapeUpdate {
    /// Gamma approximation used as a Metropolis-Hastings proposal.
    #[default]
    Exact,
    /// Draw directly from the gamma approximation.
    Approximate,
}

/// Priors of one mixed-effect Dirichlet hierarchy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HierarchyPriors {
    /// Symmetric Dirichlet concentration of the cluster probabilities, per
    /// covariate. Empty means 1 for every covariate.
    #[serde(default)]
    pub cluster_concentration: Vec<f64>,
    /// Concentration of the top-level Dirichlet on the base vectors.
    pub top_concentration: f64,
    /// Mean of the top-level Dirichlet; `None` is uniform.
    #[serde(default)]
    pub top_base: Option<Vec<f64>>,
    /// Gamma (shape, rate) prior of the fixed-effect concentration.
    pub fixed_concentration_prior: (f64, f64),
    /// Gamma (shape, rate) prior of the individual-effect concentration.
    pub indiv_concentration_prior: (f64, f64),
    /// Beta prior of the fixed-effect mixing weight.
    pub weight_prior: (f64, f64),
}

impl Default for HierarchyPriors {
    fn default() -> Self {
        HierarchyPriors {
            cluster_concentration: Vec::new(),
            top_concentration: 1.0,
            top_base: None,
            fixed_concentration_prior: (1.0, 1.0),
            indiv_concentration_prior: (1.0, 1.0),
            weight_prior: (1.0, 1.0),
        }
    }
}

impl HierarchyPriors {
    pub fn cluster_concentration(&self, j: usize) -> f64 {
        self.cluster_concentration.get(j).copied().unwrap_or(1.0)
    }

    pub fn top_base(&self, dim: usize) -> Vec<f64> {
        match &self.top_base {
            Some(v) => v.clone(),
            None => vec![1.0 / dim as f64; dim],
        }
    }

    pub fn validate(&self, dim: usize, what: &str) -> Result<()> {
        let pos = |x: f64| x.is_finite() && x > 0.0;
        let bad = |m: &str| Err(Error::Config(format!("{what}: {m}")));
        if !self.cluster_concentration.iter().all(|&a| pos(a)) {
            return bad("cluster concentrations must be positive");
        }
        if !pos(self.top_concentration) {
            return bad("top-level concentration must be positive");
        }
        for (a, b) in [
            self.fixed_concentration_prior,
            self.indiv_concentration_prior,
            self.weight_prior,
        ] {
            if !pos(a) || !pos(b) {
                return bad("prior parameters must be positive");
            }
        }
        if let Some(base) = &self.top_base {
            if base.len() != dim {
                return bad(&format!("top-level base vector must have length {dim}"));
            }
            let s: f64 = base.iter().sum();
            if base.iter().any(|&x| !pos(x)) || (s - 1.0).abs() > 1e-9 {
                return bad("top-level base vector must lie on the simplex with positive entries");
            }
        }
        Ok(())
    }
}

/// All hyperparameters: one hierarchy for transitions, one for durations,
/// and optional explicit priors for the gamma kernels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct HyperParams {
    pub trans: HierarchyPriors,
    pub dur: HierarchyPriors,
    /// Per-component Ga(shape, rate) prior on kernel shapes. Defaults to the
    /// vectors given in [`DurationMode::GammaMixture`].
    #[serde(default)]
    pub kernel_shape_prior: Option<Vec<(f64, f64)>>,
    /// Per-component Ga(shape, rate) prior on kernel rates.
    #[serde(default)]
    pub kernel_rate_prior: Option<Vec<(f64, f64)>>,
}

/// Full fit configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub fixed_effect: bool,
    pub random_effect: bool,
    /// 0-based covariate indices used by the transition model; `None` = all.
    pub trans_cov_index: Option<Vec<usize>>,
    /// 0-based covariate indices used by the duration model; `None` = all.
    pub duration_cov_index: Option<Vec<usize>>,
    pub duration_mode: DurationMode,
    pub duration_incl_prev_state: bool,
    pub simsize: usize,
    /// `None` = `simsize / 2`.
    pub burnin: Option<usize>,
    pub thin: usize,
    pub seed: u64,
    pub hyper: HyperParams,
    pub shape_update: ShapeUpdate,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            fixed_effect: true,
            random_effect: true,
            trans_cov_index: None,
            duration_cov_index: None,
            duration_mode: DurationMode::Ignore,
            duration_incl_prev_state: true,
            simsize: 10_000,
            burnin: None,
            thin: 1,
            seed: 0,
            hyper: HyperParams::default(),
            shape_update: ShapeUpdate::Exact,
        }
    }
}

impl ModelConfig {
    pub fn burnin(&self) -> usize {
        self.burnin.unwrap_or(self.simsize / 2)
    }

    /// Number of stored iterations, ⌊(simsize − burnin)/thin⌋.
    pub fn kept_iterations(&self) -> usize {
        (self.simsize - self.burnin()) / self.thin
    }

    /// Whether iteration `t` (1-based) is stored.
    pub fn is_kept(&self, t: usize) -> bool {
        let b = self.burnin();
        t > b && (t - b) % self.thin == 0
    }

    pub fn trans_covariates(&self, p: usize) -> Vec<usize> {
        self.trans_cov_index.clone().unwrap_or_else(|| (0..p).collect())
    }

    pub fn duration_covariates(&self, p: usize) -> Vec<usize> {
        self.duration_cov_index.clone().unwrap_or_else(|| (0..p).collect())
    }

    /// Checks the configuration on its own and against a dataset with `p`
    /// covariates.
    pub fn validate(&self, p: usize) -> Result<()> {
        if !self.fixed_effect && !self.random_effect {
            return Err(Error::Config(
                "fixed and random effects cannot both be disabled".into(),
            ));
        }
        if self.simsize == 0 {
            return Err(Error::Config("simsize must be positive".into()));
        }
        if self.burnin() >= self.simsize {
            return Err(Error::Config(format!(
                "burnin ({}) must be smaller than simsize ({})",
                self.burnin(),
                self.simsize
            )));
        }
        if self.thin == 0 {
            return Err(Error::Config("thin must be at least 1".into()));
        }
        for (name, idx) in [
            ("trans_cov_index", &self.trans_cov_index),
            ("duration_cov_index", &self.duration_cov_index),
        ] {
            if let Some(idx) = idx {
                let mut seen = vec![false; p];
                for &j in idx {
                    if j >= p {
                        return Err(Error::Config(format!("{name}: covariate {} does not exist", j + 1)));
                    }
                    if std::mem::replace(&mut seen[j], true) {
                        return Err(Error::Config(format!("{name}: covariate {} repeated", j + 1)));
                    }
                }
            }
        }
        if self.fixed_effect && self.trans_covariates(p).is_empty() {
            return Err(Error::Config(
                "the fixed effect needs at least one transition covariate".into(),
            ));
        }
        match &self.duration_mode {
            DurationMode::Ignore => {}
            DurationMode::Discretize { unit } => {
                if !(unit.is_finite() && *unit > 0.0) {
                    return Err(Error::Config("discretization unit must be positive".into()));
                }
            }
            DurationMode::GammaMixture {
                shape_prior,
                rate_prior,
            } => {
                if shape_prior.len() != rate_prior.len() {
                    return Err(Error::Config(
                        "gamma mixture shape and rate vectors must have the same length".into(),
                    ));
                }
                if shape_prior.is_empty() {
                    return Err(Error::Config("gamma mixture needs at least one component".into()));
                }
                if shape_prior.iter().chain(rate_prior).any(|&x| !(x.is_finite() && x > 0.0)) {
                    return Err(Error::Config("gamma mixture priors must be positive".into()));
                }
                if self.fixed_effect
                    && self.duration_covariates(p).is_empty()
                    && !self.duration_incl_prev_state
                {
                    return Err(Error::Config(
                        "the duration fixed effect needs at least one covariate".into(),
                    ));
                }
                let k = shape_prior.len();
                for pri in [&self.hyper.kernel_shape_prior, &self.hyper.kernel_rate_prior]
                    .into_iter()
                    .flatten()
                {
                    if pri.len() != k || pri.iter().any(|&(a, b)| !(a > 0.0 && b > 0.0)) {
                        return Err(Error::Config(format!(
                            "kernel priors must have {k} positive entries"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Per-component (shape-prior, rate-prior) pairs of the gamma kernels.
    pub fn kernel_priors(&self) -> Option<(Vec<(f64, f64)>, Vec<(f64, f64)>)> {
        let DurationMode::GammaMixture {
            shape_prior,
            rate_prior,
        } = &self.duration_mode
        else {
            return None;
        };
        let default: Vec<(f64, f64)> = shape_prior.iter().copied().zip(rate_prior.iter().copied()).collect();
        Some((
            self.hyper.kernel_shape_prior.clone().unwrap_or_else(|| default.clone()),
            self.hyper.kernel_rate_prior.clone().unwrap_or(default),
        ))
    }
}

/// Options controlling [`parse_dataset`].
#[derive(Debug, Clone, Default)]
pub struct ParseOptions {
    pub num_covariates: usize,
    pub state_labels: Option<Vec<String>>,
    pub covariate_labels: Option<Vec<Vec<String>>>,
    /// Fail when the file has no duration column.
    pub require_durations: bool,
}

impl ParseOptions {
    pub fn new(num_covariates: usize) -> Self {
        ParseOptions {
            num_covariates,
            ..Default::default()
        }
    }

    /// Options implied by a model configuration.
    pub fn for_config(num_covariates: usize, config: &ModelConfig) -> Self {
        ParseOptions {
            num_covariates,
            require_durations: config.duration_mode != DurationMode::Ignore,
            ..Default::default()
        }
    }
}

/// Reads and validates a delimited dataset file.
pub fn parse_dataset(path: impl AsRef<Path>, opts: &ParseOptions) -> Result<SequenceDataset> {
    let path = path.as_ref();
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_dataset_from_reader(f, opts)
}

fn parse_code(raw: &str, row: usize, column: &str) -> Result<usize> {
    let v: f64 = raw
        .trim()
        .parse()
        .map_err(|_| Error::validation(row, column, format!("'{raw}' is not a number")))?;
    if !v.is_finite() || v.fract() != 0.0 {
        return Err(Error::validation(row, column, format!("'{raw}' is not an integer code")));
    }
    if v < 1.0 {
        return Err(Error::validation(row, column, format!("code {raw} must be a positive integer")));
    }
    Ok(v as usize - 1)
}

pub fn parse_dataset_from_reader<R: Read>(reader: R, opts: &ParseOptions) -> Result<SequenceDataset> {
    let p = opts.num_covariates;
    if !(1..=MAX_COVARIATES).contains(&p) {
        return Err(Error::Config(format!(
            "number of covariates must be between 1 and {MAX_COVARIATES}, got {p}"
        )));
    }
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .has_headers(true)
        .from_reader(reader);
    let headers: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let base = 1 + p + 2;
    let has_seq = headers.len() > base
        && headers
            .last()
            .is_some_and(|h| h.eq_ignore_ascii_case("sequence"));
    let extra = headers.len() as isize - base as isize - has_seq as isize;
    let has_durations = match extra {
        0 => false,
        1 => true,
        _ => {
            return Err(Error::Data(format!(
                "expected {base} or {} columns for {p} covariates, found {}",
                base + 1,
                headers.len()
            )))
        }
    };
    if opts.require_durations && !has_durations {
        return Err(Error::Data(
            "the configured duration handling requires a duration column".into(),
        ));
    }

    let mut records = Vec::new();
    let mut individual_index: HashMap<String, usize> = HashMap::new();
    let mut individual_ids = Vec::new();
    let mut sequence_ids: Vec<String> = Vec::new();
    let mut max_state = 0usize;
    let mut max_level = vec![0usize; p];
    let mut last: Option<(usize, usize, Option<String>)> = None;
    let mut num_sequences = 0usize;

    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec?;
        if rec.len() != headers.len() {
            return Err(Error::validation(row, "*", "wrong number of fields"));
        }
        let id = rec[0].to_string();
        let individual = *individual_index.entry(id.clone()).or_insert_with(|| {
            individual_ids.push(id.clone());
            individual_ids.len() - 1
        });
        let mut covariates = Vec::with_capacity(p);
        for j in 0..p {
            let l = parse_code(&rec[1 + j], row, &headers[1 + j])?;
            max_level[j] = max_level[j].max(l + 1);
            covariates.push(l);
        }
        let prev = parse_code(&rec[1 + p], row, &headers[1 + p])?;
        let cur = parse_code(&rec[2 + p], row, &headers[2 + p])?;
        max_state = max_state.max(prev + 1).max(cur + 1);
        let duration = if has_durations {
            let col = &headers[3 + p];
            let t: f64 = rec[3 + p]
                .parse()
                .map_err(|_| Error::validation(row, col, format!("'{}' is not a number", &rec[3 + p])))?;
            if !(t.is_finite() && t > 0.0) {
                return Err(Error::validation(row, col, format!("duration {t} must be positive and finite")));
            }
            Some(t)
        } else {
            None
        };
        let seq_label = has_seq.then(|| rec[rec.len() - 1].to_string());
        let new_sequence = match &last {
            None => true,
            Some((last_ind, last_cur, last_seq)) => match (&seq_label, last_seq) {
                (Some(s), Some(ls)) => s != ls,
                _ => *last_ind != individual || *last_cur != prev,
            },
        };
        if new_sequence {
            num_sequences += 1;
            if let Some(s) = &seq_label {
                sequence_ids.push(s.clone());
            }
        }
        last = Some((individual, cur, seq_label));
        records.push(TransitionRecord {
            sequence: num_sequences - 1,
            individual,
            covariates,
            prev,
            cur,
            duration,
        });
    }
    if records.is_empty() {
        return Err(Error::Data("dataset has no rows".into()));
    }

    let num_states = match &opts.state_labels {
        Some(labels) if labels.len() >= max_state => labels.len(),
        Some(labels) => {
            return Err(Error::Data(format!(
                "{} state labels given but state code {max_state} observed",
                labels.len()
            )))
        }
        None => max_state,
    };
    let state_labels = opts
        .state_labels
        .clone()
        .unwrap_or_else(|| (1..=num_states).map(|s| s.to_string()).collect());
    let mut covariate_cardinalities = max_level;
    let covariate_labels = match &opts.covariate_labels {
        Some(labels) => {
            if labels.len() != p {
                return Err(Error::Data(format!("{} covariate label lists given for {p} covariates", labels.len())));
            }
            for (j, l) in labels.iter().enumerate() {
                if l.len() < covariate_cardinalities[j] {
                    return Err(Error::Data(format!(
                        "covariate {} has {} labels but level {} observed",
                        headers[1 + j],
                        l.len(),
                        covariate_cardinalities[j]
                    )));
                }
                covariate_cardinalities[j] = l.len();
            }
            labels.clone()
        }
        None => covariate_cardinalities
            .iter()
            .map(|&d| (1..=d).map(|l| l.to_string()).collect())
            .collect(),
    };

    let ds = SequenceDataset {
        records,
        num_sequences,
        individual_ids,
        num_states,
        covariate_cardinalities,
        covariate_names: headers[1..=p].to_vec(),
        state_labels,
        covariate_labels,
        has_durations,
        sequence_ids: has_seq.then_some(sequence_ids),
    };
    ds.validate()?;
    Ok(ds)
}

/// Number of synthetic duration states inserted for duration `tau`.
pub fn duration_blocks(tau: f64, unit: f64) -> usize {
    (tau / unit).floor() as usize
}

/// Rewrites every transition `a → b` with duration τ as the chain
/// `a → D × ⌊τ/unit⌋ → b`, where `D` is a new last state.
pub fn discretize_durations(data: &SequenceDataset, unit: f64) -> Result<SequenceDataset> {
    if !(unit.is_finite() && unit > 0.0) {
        return Err(Error::Config("discretization unit must be positive".into()));
    }
    if !data.has_durations {
        return Err(Error::Data("dataset has no durations to discretize".into()));
    }
    let dur_state = data.num_states;
    let mut records = Vec::with_capacity(data.records.len());
    for r in &data.records {
        let blocks = duration_blocks(r.duration.expect("validated durations"), unit);
        let mut from = r.prev;
        for _ in 0..blocks {
            records.push(TransitionRecord {
                prev: from,
                cur: dur_state,
                duration: None,
                ..r.clone()
            });
            from = dur_state;
        }
        records.push(TransitionRecord {
            prev: from,
            cur: r.cur,
            duration: None,
            ..r.clone()
        });
    }
    let mut state_labels = data.state_labels.clone();
    state_labels.push(DURATION_STATE_LABEL.to_string());
    Ok(SequenceDataset {
        records,
        num_states: data.num_states + 1,
        state_labels,
        has_durations: false,
        ..data.clone()
    })
}

/// Mixed-radix indexer over combinations of covariate levels.
/// The first coordinate varies slowest.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MixedRadix {
    dims: Vec<usize>,
}

impl MixedRadix {
    pub fn new(dims: Vec<usize>) -> Self {
        MixedRadix { dims }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn size(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn index(&self, coords: impl IntoIterator<Item = usize>) -> usize {
        let mut idx = 0;
        for (c, &d) in coords.into_iter().zip(&self.dims) {
            debug_assert!(c < d);
            idx = idx * d + c;
        }
        idx
    }

    pub fn coords(&self, mut idx: usize) -> Vec<usize> {
        let mut out = vec![0; self.dims.len()];
        for (o, &d) in out.iter_mut().zip(&self.dims).rev() {
            *o = idx % d;
            idx /= d;
        }
        out
    }
}

/// Transition count tensors: by covariate-level combination and by individual.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransitionCounts {
    pub combos: MixedRadix,
    pub num_states: usize,
    pub num_individuals: usize,
    /// Indexed `[combo][prev][cur]`.
    pub by_combination: Vec<u32>,
    /// Indexed `[individual][prev][cur]`.
    pub by_individual: Vec<u32>,
}

impl TransitionCounts {
    pub fn combination(&self, combo: usize, prev: usize, cur: usize) -> u32 {
        let d = self.num_states;
        self.by_combination[(combo * d + prev) * d + cur]
    }

    pub fn individual(&self, ind: usize, prev: usize, cur: usize) -> u32 {
        let d = self.num_states;
        self.by_individual[(ind * d + prev) * d + cur]
    }

    pub fn total(&self) -> u64 {
        self.by_combination.iter().map(|&c| c as u64).sum()
    }
}

/// Sufficient statistics of the transition model for a covariate subset.
pub fn transition_counts(
    data: &SequenceDataset,
    cov_subset: &[usize],
    fixed_effect: bool,
) -> Result<TransitionCounts> {
    if cov_subset.is_empty() && fixed_effect {
        return Err(Error::Config(
            "an empty covariate subset is only allowed without the fixed effect".into(),
        ));
    }
    if let Some(&j) = cov_subset.iter().find(|&&j| j >= data.num_covariates()) {
        return Err(Error::Config(format!("covariate {} does not exist", j + 1)));
    }
    let combos = MixedRadix::new(cov_subset.iter().map(|&j| data.covariate_cardinalities[j]).collect());
    let d = data.num_states;
    let mut by_combination = vec![0u32; combos.size() * d * d];
    let mut by_individual = vec![0u32; data.num_individuals() * d * d];
    for r in &data.records {
        let c = combos.index(cov_subset.iter().map(|&j| r.covariates[j]));
        by_combination[(c * d + r.prev) * d + r.cur] += 1;
        by_individual[(r.individual * d + r.prev) * d + r.cur] += 1;
    }
    Ok(TransitionCounts {
        combos,
        num_states: d,
        num_individuals: data.num_individuals(),
        by_combination,
        by_individual,
    })
}
