//! Reads a dataset, tabulates transitions and discretizes durations.
//!
//! `cargo run --example ingest_discretize -- [data.csv num_cov] [unit]`

use bmrmm::datamodel::ParseOptions;
use bmrmm::simulate::{make_demo_corpus, DemoKind};
use bmrmm::{discretize_durations, parse_dataset, transition_counts};

fn main() -> bmrmm::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let data = match args.as_slice() {
        [path, p, ..] => parse_dataset(path, &ParseOptions::new(p.parse().expect("num_cov")))?,
        _ => make_demo_corpus(DemoKind::Foxp2Like, 1)?.0,
    };
    let unit: f64 = args.get(2).and_then(|u| u.parse().ok()).unwrap_or(0.2231);
    println!("{} records, {} states, covariates {:?}", data.len(), data.num_states, data.covariate_names);

    let all: Vec<usize> = (0..data.num_covariates()).collect();
    let counts = transition_counts(&data, &all, true)?;
    let d = data.num_states;
    println!("pooled transition counts (rows = previous state):");
    for prev in 0..d {
        let row: Vec<u32> = (0..d)
            .map(|cur| (0..counts.combos.size()).map(|c| counts.combination(c, prev, cur)).sum())
            .collect();
        println!("  {:>6} {:?}", data.state_labels[prev], row);
    }

    if data.has_durations {
        let disc = discretize_durations(&data, unit)?;
        println!(
            "discretized at unit {unit}: {} records, states {:?}",
            disc.len(),
            disc.state_labels
        );
    }
    Ok(())
}
