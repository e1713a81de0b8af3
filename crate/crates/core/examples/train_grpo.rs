//! Train a detector with the default configuration and write the
//! checkpoint and per-step metrics.
//!
//! ```text
//! cargo run --release --example train_grpo -- [out-dir] [steps]
//! ```

use std::path::PathBuf;

use clipguard::grpo::metrics_path;
use clipguard::{build_dataset, train, GeneratorConfig, GrpoConfig};

fn main() -> clipguard::Result<()> {
    let mut args = std::env::args().skip(1);
    let dir = PathBuf::from(args.next().unwrap_or_else(|| ".".into()));
    let steps: u64 = args.next().map_or(300, |s| s.parse().expect("steps"));

    let data = build_dataset(&GeneratorConfig::default(), 0)?;
    let cfg = GrpoConfig {
        steps,
        ..Default::default()
    };
    let out = dir.join("checkpoint.json");
    let state = train(&cfg, &data, &out)?;

    println!("{:>5} {:>7} {:>6} {:>6} {:>6} {:>6} {:>8}", "step", "reward", "det", "tmp", "fmt", "len", "kl");
    for m in state.metrics_log.iter().step_by(25) {
        println!(
            "{:>5} {:>7.3} {:>6.3} {:>6.3} {:>6.3} {:>6.3} {:>8.5}",
            m.step, m.mean_total, m.mean_det, m.mean_tmp, m.mean_fmt, m.mean_len, m.mean_kl
        );
    }
    println!("checkpoint: {}", out.display());
    println!("metrics:    {}", metrics_path(&out).display());
    Ok(())
}
