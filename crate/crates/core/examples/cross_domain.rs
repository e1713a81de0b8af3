//! Cross-family generalization: train on pose fakes only and test on text
//! fakes, then train on an equal-size mix of all families.
//!
//! ```text
//! cargo run --release --example cross_domain
//! ```

use clipguard::{build_dataset, evaluate, train_in_memory, Family, GeneratorConfig, GrpoConfig, Label, Protocol};

fn main() -> clipguard::Result<()> {
    let data = build_dataset(&GeneratorConfig::default(), 0)?;
    let cfg = GrpoConfig::default();

    let pose_only = data.filter_families(&[Family::Pose]);
    let run = train_in_memory(&cfg, &pose_only)?;
    for target in Family::ALL {
        let protocol = Protocol::CrossDomain {
            train_families: vec![Family::Pose],
            test_families: vec![target],
        };
        let (report, _) = evaluate(&run.checkpoint, &data, &protocol, None)?;
        println!("pose -> {target:<5} auc {:.4}", report.auc);
    }

    // Same training-set size as one family, drawn evenly from all three.
    let per_family = pose_only.train().iter().filter(|c| c.label == Label::Fake).count();
    let mixed = data.subsample_train((per_family / 3).max(1));
    let run = train_in_memory(&cfg, &mixed)?;
    let (report, _) = evaluate(&run.checkpoint, &data, &Protocol::InDomain, None)?;
    for (family, auc) in &report.per_family_auc {
        println!("mixed -> {family:<5} auc {auc:.4}");
    }
    println!("mixed mean family auc {:.4}", report.mean_family_auc());
    Ok(())
}
