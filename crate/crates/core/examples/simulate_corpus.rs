//! Writes both demo corpora with their ground truth.
//!
//! `cargo run --example simulate_corpus -- [out_dir] [seed]`

use bmrmm::simulate::{make_demo_corpus, write_corpus, DemoKind};

fn main() -> bmrmm::Result<()> {
    let mut args = std::env::args().skip(1);
    let out = args.next().map_or_else(|| std::env::temp_dir().join("bmrmm-demo"), Into::into);
    let seed = args.next().and_then(|s| s.parse().ok()).unwrap_or(1);
    for kind in [DemoKind::Foxp2Like, DemoKind::AsthmaLike] {
        let (data, spec) = make_demo_corpus(kind, seed)?;
        let stem = kind.name();
        write_corpus(&out, stem, &data, &spec)?;
        println!(
            "{stem}: {} transitions, {} sequences, {} individuals, states {:?}, covariates {:?}",
            data.len(),
            data.num_sequences,
            data.num_individuals(),
            data.state_labels,
            data.covariate_names
        );
    }
    println!("written to {}", out.display());
    Ok(())
}
