//! Generate the default simulated dataset and write it as JSON lines.
//!
//! ```text
//! cargo run --release --example generate_dataset -- [out.jsonl] [seed]
//! ```

use std::path::PathBuf;

use clipguard::encoders::{quantize_and_residual, residual_features};
use clipguard::simulator::Split;
use clipguard::{build_dataset, Family, GeneratorConfig, Label};

fn main() -> clipguard::Result<()> {
    let mut args = std::env::args().skip(1);
    let out = PathBuf::from(args.next().unwrap_or_else(|| "dataset.jsonl".into()));
    let seed: u64 = args.next().map_or(0, |s| s.parse().expect("seed"));

    let data = build_dataset(&GeneratorConfig::default(), seed)?;
    data.write_jsonl(&out)?;
    println!("wrote {} clips to {}", data.clips.len(), out.display());

    for split in [Split::Train, Split::Test] {
        for family in Family::ALL {
            let count = |label| {
                data.split(split)
                    .filter(|c| c.family == family && c.label == label)
                    .count()
            };
            println!(
                "{split:?} {family:<5} real {:>3}  fake {:>3}",
                count(Label::Real),
                count(Label::Fake)
            );
        }
    }

    let manifold = data.manifold()?;
    let mean_residual = |label: Label| -> clipguard::Result<f64> {
        let clips: Vec<_> = data.clips.iter().filter(|c| c.label == label).collect();
        let mut sum = 0.0;
        for c in &clips {
            sum += residual_features(&quantize_and_residual(c, &manifold)?)[0];
        }
        Ok(sum / clips.len() as f64)
    };
    let (real, fake) = (mean_residual(Label::Real)?, mean_residual(Label::Fake)?);
    println!("mean residual magnitude: real {real:.3}, fake {fake:.3} (ratio {:.2})", real / fake);
    Ok(())
}
