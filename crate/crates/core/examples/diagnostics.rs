//! Trace and autocorrelation of a transition probability and of a gamma
//! kernel, written as CSV and SVG.
//!
//! `cargo run --release --example diagnostics -- [out_dir]`

use bmrmm::diagnostics::{acf, trace, write_diagnostic, Selector};
use bmrmm::render::render_trace;
use bmrmm::simulate::{make_demo_corpus, DemoKind};
use bmrmm::{fit, DurationMode, ModelConfig};

fn main() -> bmrmm::Result<()> {
    let out: std::path::PathBuf = std::env::args().nth(1).map_or_else(|| std::env::temp_dir().join("bmrmm-diag"), Into::into);
    let (data, _) = make_demo_corpus(DemoKind::Foxp2Like, 2)?;
    let cfg = ModelConfig {
        duration_mode: DurationMode::gamma(2),
        simsize: 1000,
        seed: 3,
        ..Default::default()
    };
    let samples = fit(&data, &cfg)?;
    let selectors = [
        Selector::Transition {
            levels: vec![0, 1],
            prev: 0,
            cur: 1,
            individual: None,
        },
        Selector::KernelShape(1),
    ];
    for sel in &selectors {
        let series = trace(&samples, sel)?;
        let r = acf(&series, Some(10))?;
        println!(
            "{}: lag 1 {:.3}, lag 5 {:.3}, lag 10 {:.3}",
            sel.name(),
            r[1],
            r[5],
            r[10]
        );
        write_diagnostic(&out, &samples, sel, None)?;
        render_trace(out.join(format!("trace_{}.svg", sel.name())), &sel.name(), &series)?;
    }
    println!("tables and plots in {}", out.display());
    Ok(())
}
