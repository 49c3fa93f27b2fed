//! Fits the transition model alone and prints global tests and posterior
//! mean transition matrices.
//!
//! `cargo run --release --example transition_model`

use bmrmm::simulate::{make_demo_corpus, DemoKind};
use bmrmm::{fit, summarize, ModelConfig, SummaryOptions};

fn main() -> bmrmm::Result<()> {
    let (data, _) = make_demo_corpus(DemoKind::Foxp2Like, 1)?;
    let cfg = ModelConfig {
        simsize: 2000,
        seed: 42,
        ..Default::default()
    };
    let samples = fit(&data, &cfg)?;
    let summary = summarize(&samples, &SummaryOptions::default())?;
    for g in &summary.trans_global {
        println!("{:<10} P(1 cluster) = {:.3}", g.covariate, g.probs[0]);
    }
    for m in summary.trans_probs_mean.iter().take(2) {
        println!("posterior mean for {:?}:", m.levels);
        for (label, row) in summary.state_labels.iter().zip(&m.matrix) {
            let cells: Vec<String> = row.iter().map(|p| format!("{p:.3}")).collect();
            println!("  {label:>3} {}", cells.join(" "));
        }
    }
    Ok(())
}
