//! Train the full model and the three ablations on one dataset and compare
//! held-out AUC.
//!
//! ```text
//! cargo run --release --example ablations -- [steps] [seed]
//! ```

use std::time::Instant;

use clipguard::eval::compare_reports;
use clipguard::grpo::TrainOutcome;
use clipguard::{build_dataset, evaluate_params, train_in_memory, FuseMode, GeneratorConfig, GrpoConfig, Protocol};

fn main() -> clipguard::Result<()> {
    let mut args = std::env::args().skip(1);
    let steps: u64 = args.next().map_or(300, |s| s.parse().expect("steps"));
    let seed: u64 = args.next().map_or(0, |s| s.parse().expect("seed"));
    let data = build_dataset(&GeneratorConfig::default(), seed)?;

    let variants = [
        ("full", FuseMode::Full, false),
        ("no_residual", FuseMode::NoResidual, false),
        ("reconstruction", FuseMode::Reconstruction, false),
        ("no_tcr", FuseMode::Full, true),
    ];
    let mut reports = Vec::new();
    for (name, mode, ablate_tcr) in variants {
        let cfg = GrpoConfig {
            steps,
            seed,
            mode,
            ablate_tcr,
            ..Default::default()
        };
        let start = Instant::now();
        let TrainOutcome { state, codebook, .. } = train_in_memory(&cfg, &data)?;
        let protocol = Protocol::Ablation(name.to_string());
        let (report, _) = evaluate_params(&state.params, &codebook, &data, &protocol, mode)?;
        let last = state.metrics_log.last().expect("at least one step");
        println!(
            "{name:<15} auc {:.4}  acc@0.5 {:.3}  final reward {:.3}  kl {:.4}  ({:.1?})",
            report.auc,
            report.accuracy_at_half,
            last.mean_total,
            last.mean_kl,
            start.elapsed()
        );
        reports.push(report);
    }
    for other in &reports[1..] {
        let d = compare_reports(&reports[0], other)?;
        println!("full - {:?}: {:+.4}", other.protocol, d.overall);
    }
    Ok(())
}
