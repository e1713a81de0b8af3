//! Train, then score the held-out split: overall and per-family AUC plus a
//! coarse ROC curve.
//!
//! ```text
//! cargo run --release --example evaluate_auc
//! ```

use clipguard::eval::roc_points;
use clipguard::{build_dataset, evaluate, train_in_memory, GeneratorConfig, GrpoConfig, Label, Protocol};

fn main() -> clipguard::Result<()> {
    let data = build_dataset(&GeneratorConfig::default(), 0)?;
    let untrained = train_in_memory(&GrpoConfig { steps: 0, ..Default::default() }, &data)?;
    let (before, _) = evaluate(&untrained.checkpoint, &data, &Protocol::InDomain, None)?;
    println!("untrained auc {:.4}", before.auc);

    let run = train_in_memory(&GrpoConfig::default(), &data)?;
    let (report, scored) = evaluate(&run.checkpoint, &data, &Protocol::InDomain, None)?;
    println!(
        "trained auc {:.4}  accuracy@0.5 {:.3}  ({} fake / {} real)",
        report.auc, report.accuracy_at_half, report.n_fake, report.n_real
    );
    for (family, auc) in &report.per_family_auc {
        println!("  {family:<5} {auc:.4}");
    }

    let pick = |label| scored.iter().filter(|s| s.label == label).map(|s| s.score).collect::<Vec<_>>();
    let roc = roc_points(&pick(Label::Fake), &pick(Label::Real));
    println!("roc (every 5th point):");
    for (fpr, tpr) in roc.iter().step_by(5) {
        println!("  fpr {fpr:.3}  tpr {tpr:.3}");
    }
    Ok(())
}
