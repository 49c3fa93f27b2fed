//! Compares gamma mixtures with different numbers of kernels by LPML and
//! WAIC.
//!
//! `cargo run --release --example model_selection`

use bmrmm::model_selection::selection_scores;
use bmrmm::simulate::{make_demo_corpus, DemoKind};
use bmrmm::{fit, DurationMode, ModelConfig};

fn main() -> bmrmm::Result<()> {
    let (data, _) = make_demo_corpus(DemoKind::AsthmaLike, 4)?;
    println!("{:>3} {:>12} {:>12}", "K", "LPML", "WAIC");
    for k in 1..=3 {
        let cfg = ModelConfig {
            duration_mode: DurationMode::gamma(k),
            simsize: 1500,
            seed: 5,
            ..Default::default()
        };
        let s = selection_scores(&fit(&data, &cfg)?)?;
        println!("{k:>3} {:>12.2} {:>12.2}", s.lpml, s.waic);
    }
    println!("larger LPML and smaller WAIC indicate a better fit");
    Ok(())
}
