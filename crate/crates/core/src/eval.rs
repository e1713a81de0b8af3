//! AUC and evaluation protocols.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::encoders::{fuse, Codebook, FuseMode, Ordering};
use crate::error::{Error, Result};
use crate::policy::{detection_score, Checkpoint, PolicyParams};
use crate::simulator::{DatasetManifest, Family, Label, VideoClip};

/// Mann-Whitney AUC: the probability a fake outscores a real, ties half.
///
/// Rank-based, `O(n log n)`; identical to pairwise enumeration.
pub fn auc(scores_fake: &[f64], scores_real: &[f64]) -> Result<f64> {
    if scores_fake.is_empty() || scores_real.is_empty() {
        return Err(Error::InvalidInput("auc needs nonempty fake and real scores".into()));
    }
    if scores_fake.iter().chain(scores_real).any(|s| s.is_nan()) {
        return Err(Error::InvalidInput("NaN score".into()));
    }
    let mut real = scores_real.to_vec();
    real.sort_by(f64::total_cmp);
    // Count pairs in half-units so ties stay exact integers.
    let mut half_wins: u128 = 0;
    for &f in scores_fake {
        let below = real.partition_point(|&r| r < f);
        let not_above = real.partition_point(|&r| r <= f);
        half_wins += 2 * below as u128 + (not_above - below) as u128;
    }
    let pairs = 2 * scores_fake.len() as u128 * scores_real.len() as u128;
    Ok(half_wins as f64 / pairs as f64)
}

/// ROC points `(fpr, tpr)` from the strictest threshold down, starting at
/// (0, 0) and ending at (1, 1).
pub fn roc_points(scores_fake: &[f64], scores_real: &[f64]) -> Vec<(f64, f64)> {
    let mut all: Vec<(f64, bool)> = scores_fake
        .iter()
        .map(|&s| (s, true))
        .chain(scores_real.iter().map(|&s| (s, false)))
        .collect();
    all.sort_by(|a, b| b.0.total_cmp(&a.0));
    let (nf, nr) = (scores_fake.len().max(1) as f64, scores_real.len().max(1) as f64);
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut points = vec![(0.0, 0.0)];
    let mut i = 0;
    while i < all.len() {
        let s = all[i].0;
        while i < all.len() && all[i].0 == s {
            if all[i].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push((fp as f64 / nr, tp as f64 / nf));
    }
    points
}

pub fn roc_text(points: &[(f64, f64)]) -> String {
    let mut out = String::from("# fpr tpr\n");
    for (fpr, tpr) in points {
        let _ = writeln!(out, "{fpr} {tpr}");
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Protocol {
    InDomain,
    CrossDomain {
        train_families: Vec<Family>,
        test_families: Vec<Family>,
    },
    Ablation(String),
}

impl Protocol {
    fn test_families(&self, dataset: &DatasetManifest) -> Vec<Family> {
        match self {
            Protocol::CrossDomain { test_families, .. } => test_families.clone(),
            _ => dataset.config.families.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub auc: f64,
    pub accuracy_at_half: f64,
    pub per_family_auc: BTreeMap<Family, f64>,
    pub n_real: usize,
    pub n_fake: usize,
    pub protocol: Protocol,
    pub mode: FuseMode,
    /// Hash of the sorted test clip ids.
    pub split_fingerprint: String,
    pub checkpoint_id: String,
    pub config: serde_json::Value,
}

/// Per-clip detection scores on the test split.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredClip {
    pub clip_id: String,
    pub label: Label,
    pub family: Family,
    pub score: f64,
}

fn fnv1a(bytes: impl IntoIterator<Item = u8>) -> u64 {
    bytes.into_iter().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

fn fingerprint(ids: &mut [&str]) -> String {
    ids.sort_unstable();
    format!("{:016x}", fnv1a(ids.join("\n").into_bytes()))
}

/// Score ordered test episodes of the selected families.
pub fn score_test_clips(
    params: &PolicyParams,
    codebook: &Codebook,
    clips: &[&VideoClip],
    mode: FuseMode,
) -> Result<Vec<ScoredClip>> {
    clips
        .par_iter()
        .map(|c| {
            let ep = fuse(c, codebook, Ordering::Ordered, None, mode)?;
            Ok(ScoredClip {
                clip_id: c.id.clone(),
                label: c.label,
                family: c.family,
                score: detection_score(params, &ep)?,
            })
        })
        .collect()
}

/// Evaluate a policy on the test split under `protocol`.
///
/// Real test clips of every family are kept; fakes are restricted to the
/// protocol's test families. Per-family AUC pairs that family's fakes with
/// all retained real clips.
pub fn evaluate_params(
    params: &PolicyParams,
    codebook: &Codebook,
    dataset: &DatasetManifest,
    protocol: &Protocol,
    mode: FuseMode,
) -> Result<(EvalReport, Vec<ScoredClip>)> {
    let families = protocol.test_families(dataset);
    let clips: Vec<&VideoClip> = dataset
        .test()
        .into_iter()
        .filter(|c| c.label == Label::Real || families.contains(&c.family))
        .collect();
    let scored = score_test_clips(params, codebook, &clips, mode)?;
    let pick = |label: Label, family: Option<Family>| -> Vec<f64> {
        scored
            .iter()
            .filter(|s| s.label == label && family.is_none_or(|f| s.family == f))
            .map(|s| s.score)
            .collect()
    };
    let (fake, real) = (pick(Label::Fake, None), pick(Label::Real, None));
    if fake.is_empty() || real.is_empty() {
        return Err(Error::InvalidConfig(format!(
            "protocol {protocol:?} selects {} fake and {} real test clips",
            fake.len(),
            real.len()
        )));
    }
    let mut per_family_auc = BTreeMap::new();
    for &f in &families {
        let fam_fake = pick(Label::Fake, Some(f));
        if !fam_fake.is_empty() {
            per_family_auc.insert(f, auc(&fam_fake, &real)?);
        }
    }
    let correct = scored
        .iter()
        .filter(|s| (s.score > 0.5) == (s.label == Label::Fake))
        .count();
    let mut ids: Vec<&str> = scored.iter().map(|s| s.clip_id.as_str()).collect();
    let report = EvalReport {
        auc: auc(&fake, &real)?,
        accuracy_at_half: correct as f64 / scored.len() as f64,
        per_family_auc,
        n_real: real.len(),
        n_fake: fake.len(),
        protocol: protocol.clone(),
        mode,
        split_fingerprint: fingerprint(&mut ids),
        checkpoint_id: String::new(),
        config: serde_json::Value::Null,
    };
    Ok((report, scored))
}

/// Evaluate a checkpoint. The fusion mode is the one it was trained with
/// unless `mode` overrides it.
pub fn evaluate(
    checkpoint: &Checkpoint,
    dataset: &DatasetManifest,
    protocol: &Protocol,
    mode: Option<FuseMode>,
) -> Result<(EvalReport, Vec<ScoredClip>)> {
    let mode = match mode {
        Some(m) => m,
        None => checkpoint
            .config
            .pointer("/grpo/mode")
            .and_then(|m| serde_json::from_value(m.clone()).ok())
            .unwrap_or_default(),
    };
    let params = checkpoint.params()?;
    let codebook = checkpoint.codebook()?;
    let (mut report, scored) = evaluate_params(&params, &codebook, dataset, protocol, mode)?;
    report.checkpoint_id = format!("{:016x}", fnv1a(checkpoint.to_json().into_bytes()));
    report.config = checkpoint.config.clone();
    Ok((report, scored))
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json() + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::format(path, e))
    }

    /// Unweighted mean of the per-family AUCs.
    pub fn mean_family_auc(&self) -> f64 {
        self.per_family_auc.values().sum::<f64>() / self.per_family_auc.len().max(1) as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AucDelta {
    pub overall: f64,
    pub per_family: BTreeMap<Family, f64>,
}

/// `a - b` for the overall AUC and every family both reports contain.
pub fn compare_reports(a: &EvalReport, b: &EvalReport) -> Result<AucDelta> {
    if a.split_fingerprint != b.split_fingerprint {
        return Err(Error::InvalidInput(format!(
            "reports cover different test splits ({} vs {})",
            a.split_fingerprint, b.split_fingerprint
        )));
    }
    let per_family = a
        .per_family_auc
        .iter()
        .filter_map(|(f, x)| b.per_family_auc.get(f).map(|y| (*f, x - y)))
        .collect();
    Ok(AucDelta {
        overall: a.auc - b.auc,
        per_family,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute(fake: &[f64], real: &[f64]) -> f64 {
        let mut s = 0.0;
        for f in fake {
            for r in real {
                s += if f > r { 1.0 } else if f == r { 0.5 } else { 0.0 };
            }
        }
        s / (fake.len() * real.len()) as f64
    }

    #[test]
    fn auc_examples() {
        assert_eq!(auc(&[0.9, 0.8], &[0.1, 0.2]).unwrap(), 1.0);
        assert_eq!(auc(&[0.5], &[0.5]).unwrap(), 0.5);
        assert_eq!(auc(&[0.9, 0.4], &[0.6, 0.1]).unwrap(), 0.75);
        assert!(matches!(auc(&[], &[0.1]), Err(Error::InvalidInput(_))));
        let (f, r) = ([0.3, 0.3, 0.7, 0.1], [0.3, 0.2, 0.7]);
        assert_eq!(auc(&f, &r).unwrap(), brute(&f, &r));
    }

    #[test]
    fn roc_endpoints() {
        let pts = roc_points(&[0.9, 0.4], &[0.6, 0.1]);
        assert_eq!(pts.first(), Some(&(0.0, 0.0)));
        assert_eq!(pts.last(), Some(&(1.0, 1.0)));
        // Trapezoid area equals the AUC.
        let area: f64 = pts.windows(2).map(|w| (w[1].0 - w[0].0) * (w[1].1 + w[0].1) / 2.0).sum();
        assert!((area - 0.75).abs() < 1e-12);
    }

    #[test]
    fn untrained_policy_scores_half() {
        let ds = crate::simulator::build_dataset(
            &crate::simulator::GeneratorConfig {
                clips_per_family: 20,
                ..Default::default()
            },
            0,
        )
        .unwrap();
        let cb = ds.manifold().unwrap();
        let (report, scored) =
            evaluate_params(&PolicyParams::zeros(32), &cb, &ds, &Protocol::InDomain, FuseMode::Full).unwrap();
        assert!(scored.iter().all(|s| s.score == 0.5));
        assert_eq!(report.auc, 0.5);
        let delta = compare_reports(&report, &report).unwrap();
        assert_eq!(delta.overall, 0.0);
        assert!(delta.per_family.values().all(|&d| d == 0.0));

        let proto = Protocol::CrossDomain {
            train_families: vec![Family::Pose],
            test_families: vec![Family::Text],
        };
        let (cross, _) = evaluate_params(&PolicyParams::zeros(32), &cb, &ds, &proto, FuseMode::Full).unwrap();
        assert_eq!(cross.per_family_auc.keys().collect::<Vec<_>>(), vec![&Family::Text]);
        assert!(compare_reports(&report, &cross).is_err());

        let only_pose = ds.filter_families(&[Family::Pose]);
        let proto = Protocol::CrossDomain {
            train_families: vec![Family::Pose],
            test_families: vec![Family::Audio],
        };
        assert!(matches!(
            evaluate_params(&PolicyParams::zeros(32), &cb, &only_pose, &proto, FuseMode::Full),
            Err(Error::InvalidConfig(_))
        ));
    }
}
