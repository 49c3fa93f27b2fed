//! Synthetic data from a fully specified model, and two demo corpora.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::datamodel::{MixedRadix, SequenceDataset, TransitionRecord};
use crate::dist::{self, chain_rng, ChainRng};
use crate::error::{Error, Result};

/// True parameters of one mixed-effect hierarchy. Fixed vectors live on the
/// full label grid `[label combo][context][outcome]`; individual vectors are
/// `[individual][context][outcome]` and weights `[individual][context]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrueHierarchy {
    pub partitions: Vec<Vec<usize>>,
    pub lambda_fixed: Vec<f64>,
    pub lambda_indiv: Vec<f64>,
    pub pi0: Vec<f64>,
}

/// Duration mixture ground truth. `covariates` are 0-based dataset
/// covariates; the previous state is appended when `include_prev_state`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrueDurations {
    pub shapes: Vec<f64>,
    pub rates: Vec<f64>,
    pub covariates: Vec<usize>,
    pub include_prev_state: bool,
    pub mixture: TrueHierarchy,
}

/// Covariates and owner of one simulated sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceDesign {
    pub individual: usize,
    pub covariates: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerativeSpec {
    pub state_labels: Vec<String>,
    pub covariate_names: Vec<String>,
    pub covariate_labels: Vec<Vec<String>>,
    pub individual_ids: Vec<String>,
    pub sequences: Vec<SequenceDesign>,
    /// Inclusive range of transitions per sequence, drawn uniformly.
    pub length: (usize, usize),
    /// Transitions use every covariate.
    pub trans: TrueHierarchy,
    pub durations: Option<TrueDurations>,
    pub seed: u64,
}

impl GenerativeSpec {
    pub fn num_states(&self) -> usize {
        self.state_labels.len()
    }

    pub fn cardinalities(&self) -> Vec<usize> {
        self.covariate_labels.iter().map(Vec::len).collect()
    }

    fn dur_dims(&self, d: &TrueDurations) -> Vec<usize> {
        let cards = self.cardinalities();
        let mut dims: Vec<usize> = d.covariates.iter().map(|&j| cards[j]).collect();
        if d.include_prev_state {
            dims.push(self.num_states());
        }
        dims
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(format!("generative spec: {m}")));
        let d0 = self.num_states();
        let n_ind = self.individual_ids.len();
        if d0 < 2 {
            return bad("need at least two states".into());
        }
        if self.covariate_names.len() != self.covariate_labels.len() {
            return bad("covariate names and labels differ in length".into());
        }
        if self.length.0 == 0 || self.length.0 > self.length.1 {
            return bad("invalid sequence length range".into());
        }
        let cards = self.cardinalities();
        for s in &self.sequences {
            if s.individual >= n_ind || s.covariates.len() != cards.len() || s.covariates.iter().zip(&cards).any(|(&l, &c)| l >= c)
            {
                return bad("sequence design out of range".into());
            }
        }
        check_hierarchy(&self.trans, &cards, d0, d0, n_ind).or_else(|m| bad(format!("transitions: {m}")))?;
        if let Some(d) = &self.durations {
            let k = d.shapes.len();
            if k == 0 || d.rates.len() != k || d.shapes.iter().chain(&d.rates).any(|&x| !(x > 0.0)) {
                return bad("kernel parameters must be positive with one per component".into());
            }
            if d.covariates.iter().any(|&j| j >= cards.len()) {
                return bad("duration covariate out of range".into());
            }
            check_hierarchy(&d.mixture, &self.dur_dims(d), 1, k, n_ind).or_else(|m| bad(format!("durations: {m}")))?;
        }
        Ok(())
    }
}

fn check_hierarchy(h: &TrueHierarchy, dims: &[usize], ctx: usize, out: usize, n_ind: usize) -> std::result::Result<(), String> {
    if h.partitions.len() != dims.len() || h.partitions.iter().zip(dims).any(|(p, &d)| p.len() != d || p.iter().any(|&l| l >= d)) {
        return Err("partitions do not match the covariates".into());
    }
    let grid: usize = dims.iter().product();
    if h.lambda_fixed.len() != grid * ctx * out || h.lambda_indiv.len() != n_ind * ctx * out || h.pi0.len() != n_ind * ctx {
        return Err("probability fields have the wrong size".into());
    }
    for v in [&h.lambda_fixed, &h.lambda_indiv] {
        for cell in v.chunks(out) {
            let s: f64 = cell.iter().sum();
            if cell.iter().any(|&x| !(x >= 0.0)) || (s - 1.0).abs() > 1e-9 {
                return Err("probability vector off the simplex".into());
            }
        }
    }
    if h.pi0.iter().any(|&w| !(0.0..=1.0).contains(&w)) {
        return Err("weights outside [0, 1]".into());
    }
    Ok(())
}

/// Outcome probabilities for (individual, raw combo coordinates, context).
fn true_probs(h: &TrueHierarchy, grid: &MixedRadix, ind: usize, coords: &[usize], ctx: usize, n_ctx: usize, out: &mut [f64]) {
    let n = out.len();
    let label = grid.index(coords.iter().zip(&h.partitions).map(|(&l, p)| p[l]));
    let f = &h.lambda_fixed[(label * n_ctx + ctx) * n..][..n];
    let g = &h.lambda_indiv[(ind * n_ctx + ctx) * n..][..n];
    let w = h.pi0[ind * n_ctx + ctx];
    for ((x, &a), &b) in out.iter_mut().zip(f).zip(g) {
        *x = w * a + (1.0 - w) * b;
    }
}

fn draw_index(rng: &mut ChainRng, probs: &[f64]) -> usize {
    let u: f64 = rng.random::<f64>() * probs.iter().sum::<f64>();
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

/// Simulates every sequence of `spec`. Sequence `s` uses its own stream of
/// the generative seed, so the result does not depend on generation order.
pub fn simulate_dataset(spec: &GenerativeSpec) -> Result<SequenceDataset> {
    spec.validate()?;
    let d0 = spec.num_states();
    let cards = spec.cardinalities();
    let grid = MixedRadix::new(cards.clone());
    let dur_grid = spec.durations.as_ref().map(|d| MixedRadix::new(spec.dur_dims(d)));
    let mut records = Vec::new();
    let mut probs = vec![0.0; d0];
    for (s, design) in spec.sequences.iter().enumerate() {
        let mut rng = chain_rng(spec.seed, s as u64);
        let len = rng.random_range(spec.length.0..=spec.length.1);
        let mut prev = rng.random_range(0..d0);
        for _ in 0..len {
            true_probs(&spec.trans, &grid, design.individual, &design.covariates, prev, d0, &mut probs);
            let cur = draw_index(&mut rng, &probs);
            let duration = match (&spec.durations, &dur_grid) {
                (Some(d), Some(g)) => {
                    let mut coords: Vec<usize> = d.covariates.iter().map(|&j| design.covariates[j]).collect();
                    if d.include_prev_state {
                        coords.push(prev);
                    }
                    let mut w = vec![0.0; d.shapes.len()];
                    true_probs(&d.mixture, g, design.individual, &coords, 0, 1, &mut w);
                    let k = draw_index(&mut rng, &w);
                    let tau = dist::gamma(&mut rng, d.shapes[k], d.rates[k]);
                    Some(tau.max(f64::MIN_POSITIVE))
                }
                _ => None,
            };
            records.push(TransitionRecord {
                sequence: s,
                individual: design.individual,
                covariates: design.covariates.clone(),
                prev,
                cur,
                duration,
            });
            prev = cur;
        }
    }
    let ds = SequenceDataset {
        records,
        num_sequences: spec.sequences.len(),
        individual_ids: spec.individual_ids.clone(),
        num_states: d0,
        covariate_cardinalities: cards,
        covariate_names: spec.covariate_names.clone(),
        state_labels: spec.state_labels.clone(),
        covariate_labels: spec.covariate_labels.clone(),
        has_durations: spec.durations.is_some(),
        sequence_ids: Some((1..=spec.sequences.len()).map(|s| format!("S{s}")).collect()),
    };
    ds.validate()?;
    Ok(ds)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DemoKind {
    Foxp2Like,
    AsthmaLike,
}

impl DemoKind {
    pub fn name(self) -> &'static str {
        match self {
            DemoKind::Foxp2Like => "foxp2-like",
            DemoKind::AsthmaLike => "asthma-like",
        }
    }
}

impl std::str::FromStr for DemoKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "foxp2-like" | "foxp2" => Ok(DemoKind::Foxp2Like),
            "asthma-like" | "asthma" => Ok(DemoKind::AsthmaLike),
            _ => Err(Error::Config(format!("unknown demo corpus `{s}` (foxp2-like, asthma-like)"))),
        }
    }
}

fn labels(xs: &[&str]) -> Vec<String> {
    xs.iter().map(|s| s.to_string()).collect()
}

/// Individual vectors drawn around `center` with concentration `conc`, using
/// a stream reserved for the spec.
fn indiv_vectors(rng: &mut ChainRng, center: &[f64], n_ind: usize, n_ctx: usize, conc: f64) -> Vec<f64> {
    let out = center.len() / n_ctx;
    let mut v = Vec::with_capacity(n_ind * n_ctx * out);
    for _ in 0..n_ind {
        for c in 0..n_ctx {
            let base = &center[c * out..(c + 1) * out];
            let alpha: Vec<f64> = base.iter().map(|&b| conc * b).collect();
            v.extend(dist::dirichlet(rng, &alpha));
        }
    }
    v
}

/// Row `prev` of a "move by `shift`" transition matrix: mass `hi` on state
/// `(prev + shift) mod d`, the rest spread evenly.
fn shifted_row(d: usize, prev: usize, shift: usize, hi: f64) -> Vec<f64> {
    let lo = (1.0 - hi) / (d - 1) as f64;
    (0..d).map(|y| if y == (prev + shift) % d { hi } else { lo }).collect()
}

/// Builds the ground truth of a demo corpus. Planted structure:
///
/// * foxp2-like: 4 states (d, m, s, u); Genotype {F, W} per individual and
///   Context {U, L, A} per sequence. Transitions depend on Context only (three
///   clusters); duration mixture weights depend on Genotype only. Two kernels
///   Ga(8, 40) and Ga(3, 3). 10 individuals × 5 sequences of 90–110
///   transitions.
/// * asthma-like: 3 states; Severity, BMI and Sex binary per individual.
///   Transitions depend on Severity only; duration weights on the previous
///   state only. Two kernels Ga(2, 4) and Ga(6, 2). 120 individuals, one
///   sequence of 8–16 transitions each.
pub fn demo_spec(kind: DemoKind, seed: u64) -> GenerativeSpec {
    // parameter stream, separate from the per-sequence streams
    let mut prng = chain_rng(seed, u64::MAX);
    match kind {
        DemoKind::Foxp2Like => {
            let d0 = 4;
            let n_ind = 10;
            let trans_fixed: Vec<f64> = (0..2)
                .flat_map(|_| (0..3).flat_map(move |ctx| (0..d0).flat_map(move |p| shifted_row(d0, p, ctx, 0.7))))
                .collect();
            let trans_center: Vec<f64> = vec![0.25; d0 * d0];
            let dur_fixed: Vec<f64> = {
                // grid: Genotype(2) × Context(3) × Prev(4); label combos use
                // the same grid
                let mut v = Vec::new();
                for g in 0..2 {
                    for _ in 0..3 * d0 {
                        v.extend(if g == 0 { [0.8, 0.2] } else { [0.3, 0.7] });
                    }
                }
                v
            };
            let sequences = (0..n_ind)
                .flat_map(|i| (0..5).map(move |s| SequenceDesign { individual: i, covariates: vec![i % 2, s % 3] }))
                .collect();
            GenerativeSpec {
                state_labels: labels(&["d", "m", "s", "u"]),
                covariate_names: labels(&["Genotype", "Context"]),
                covariate_labels: vec![labels(&["F", "W"]), labels(&["U", "L", "A"])],
                individual_ids: (1..=n_ind).map(|i| format!("M{i:02}")).collect(),
                sequences,
                length: (90, 110),
                trans: TrueHierarchy {
                    partitions: vec![vec![0, 0], vec![0, 1, 2]],
                    lambda_fixed: trans_fixed,
                    lambda_indiv: indiv_vectors(&mut prng, &trans_center, n_ind, d0, 20.0),
                    pi0: vec![0.9; n_ind * d0],
                },
                durations: Some(TrueDurations {
                    shapes: vec![8.0, 3.0],
                    rates: vec![40.0, 3.0],
                    covariates: vec![0, 1],
                    include_prev_state: true,
                    mixture: TrueHierarchy {
                        partitions: vec![vec![0, 1], vec![0, 0, 0], vec![0, 0, 0, 0]],
                        lambda_fixed: dur_fixed,
                        lambda_indiv: indiv_vectors(&mut prng, &[0.5, 0.5], n_ind, 1, 20.0),
                        pi0: vec![0.9; n_ind],
                    },
                }),
                seed,
            }
        }
        DemoKind::AsthmaLike => {
            let d0 = 3;
            let n_ind = 120;
            // grid Severity × BMI × Sex, first coordinate slowest
            let trans_fixed: Vec<f64> = (0..8)
                .flat_map(|combo| {
                    let severe = combo / 4;
                    (0..d0).flat_map(move |p| shifted_row(d0, p, severe, 0.75))
                })
                .collect();
            let dur_fixed: Vec<f64> = (0..8 * d0)
                .flat_map(|cell| if cell % d0 == 0 { [0.8, 0.2] } else { [0.25, 0.75] })
                .collect();
            let mut design_rng = chain_rng(seed, u64::MAX - 1);
            let covs: Vec<Vec<usize>> = (0..n_ind)
                .map(|_| (0..3).map(|_| design_rng.random_range(0..2)).collect())
                .collect();
            let sequences = covs
                .iter()
                .enumerate()
                .map(|(i, c)| SequenceDesign {
                    individual: i,
                    covariates: c.clone(),
                })
                .collect();
            GenerativeSpec {
                state_labels: labels(&["1", "2", "3"]),
                covariate_names: labels(&["Severity", "BMI", "Sex"]),
                covariate_labels: vec![labels(&["1", "2"]), labels(&["1", "2"]), labels(&["1", "2"])],
                individual_ids: (1..=n_ind).map(|i| format!("P{i:03}")).collect(),
                sequences,
                length: (8, 16),
                trans: TrueHierarchy {
                    partitions: vec![vec![0, 1], vec![0, 0], vec![0, 0]],
                    lambda_fixed: trans_fixed,
                    lambda_indiv: indiv_vectors(&mut prng, &vec![1.0 / 3.0; d0 * d0], n_ind, d0, 20.0),
                    pi0: vec![0.9; n_ind * d0],
                },
                durations: Some(TrueDurations {
                    shapes: vec![2.0, 6.0],
                    rates: vec![4.0, 2.0],
                    covariates: vec![0, 1, 2],
                    include_prev_state: true,
                    mixture: TrueHierarchy {
                        partitions: vec![vec![0, 0], vec![0, 0], vec![0, 0], vec![0, 1, 1]],
                        lambda_fixed: dur_fixed,
                        lambda_indiv: indiv_vectors(&mut prng, &[0.5, 0.5], n_ind, 1, 20.0),
                        pi0: vec![0.9; n_ind],
                    },
                }),
                seed,
            }
        }
    }
}

/// Demo dataset with its ground truth.
pub fn make_demo_corpus(kind: DemoKind, seed: u64) -> Result<(SequenceDataset, GenerativeSpec)> {
    let spec = demo_spec(kind, seed);
    Ok((simulate_dataset(&spec)?, spec))
}

/// Writes `<stem>.csv` and the ground-truth sidecar `<stem>.truth.json`.
pub fn write_corpus(dir: &std::path::Path, stem: &str, data: &SequenceDataset, spec: &GenerativeSpec) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    data.write_csv_file(dir.join(format!("{stem}.csv")))?;
    let path = dir.join(format!("{stem}.truth.json"));
    let json = serde_json::to_string_pretty(spec)?;
    std::fs::write(&path, json).map_err(|e| Error::io(&path, e))
}
