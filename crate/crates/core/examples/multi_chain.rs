//! Runs several chains in parallel, checks convergence of the Context
//! cluster count and stores each chain.
//!
//! `cargo run --release --example multi_chain -- [out_dir]`

use bmrmm::engine::potential_scale_reduction;
use bmrmm::hierarchy::num_clusters;
use bmrmm::persist::{read_fit, write_fit};
use bmrmm::simulate::{make_demo_corpus, DemoKind};
use bmrmm::{run_chains, ModelConfig};

fn main() -> bmrmm::Result<()> {
    let out: std::path::PathBuf = std::env::args().nth(1).map_or_else(|| std::env::temp_dir().join("bmrmm-chains"), Into::into);
    let (data, _) = make_demo_corpus(DemoKind::Foxp2Like, 1)?;
    let cfg = ModelConfig {
        simsize: 1000,
        seed: 2024,
        ..Default::default()
    };
    let chains = run_chains(&data, &cfg, 4)?;
    let series: Vec<Vec<f64>> = chains
        .iter()
        .map(|c| c.trans_draws.iter().map(|d| d.lambda0[0]).collect())
        .collect();
    match potential_scale_reduction(&series) {
        Some(r) => println!("R-hat of lambda0(1|1): {r:.3}"),
        None => println!("too few draws for R-hat"),
    }
    for c in &chains {
        let k = c.trans_draws.last().map_or(0, |d| num_clusters(&d.labels[1]));
        let dir = out.join(format!("chain_{}", c.chain + 1));
        write_fit(c, &dir)?;
        let back = read_fit(&dir)?;
        assert_eq!(back.trans_draws, c.trans_draws);
        println!("chain {}: {} draws, final Context clusters {k}, stored in {}", c.chain + 1, c.kept(), dir.display());
    }
    Ok(())
}
