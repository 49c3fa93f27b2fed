//! Models durations with a mixture of gamma kernels and prints the kernel
//! estimates and mixture probabilities per covariate level.
//!
//! `cargo run --release --example gamma_mixture`

use bmrmm::simulate::{make_demo_corpus, DemoKind};
use bmrmm::summaries::duration_mixture_summary;
use bmrmm::{fit, DurationMode, ModelConfig};

fn main() -> bmrmm::Result<()> {
    let (data, truth) = make_demo_corpus(DemoKind::Foxp2Like, 3)?;
    let cfg = ModelConfig {
        duration_mode: DurationMode::gamma(2),
        simsize: 2000,
        seed: 7,
        ..Default::default()
    };
    let samples = fit(&data, &cfg)?;
    if let Some(t) = &truth.durations {
        println!("true kernels: shapes {:?}, rates {:?}", t.shapes, t.rates);
    }
    let (kernels, blocks) = duration_mixture_summary(&samples, true)?;
    for k in &kernels {
        println!("component {}: shape {:.3}, rate {:.3}", k.component, k.shape, k.rate);
    }
    for b in &blocks {
        println!("{}:", b.covariate);
        for (c, row) in b.probs.iter().enumerate() {
            let cells: Vec<String> = row.iter().map(|p| p.map_or("NA".into(), |p| format!("{p:.2}"))).collect();
            println!("  comp {} {}", c + 1, cells.join(" "));
        }
    }
    Ok(())
}
