//! Dual-encoder feature pipeline.
//!
//! The residual path quantizes every frame to its nearest codebook center
//! and summarizes `R = |X - X̂|`; the semantic path summarizes order-sensitive
//! temporal statistics of the raw frames. [`fuse`] concatenates both with a
//! constant prompt slot into the 15-dim episode vector the policy consumes.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{lag1_autocorr, ls_slope, norm, sq_dist, RngStream};
use crate::simulator::{Family, Label, VideoClip};

pub const SEMANTIC_DIM: usize = 8;
pub const RESIDUAL_DIM: usize = 6;
/// Semantic + residual + prompt constant.
pub const EPISODE_DIM: usize = SEMANTIC_DIM + RESIDUAL_DIM + 1;
/// Constant standing in for the embedded instruction prompt.
pub const PROMPT_CONSTANT: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CodebookSource {
    Manifold,
    Fitted,
}

/// K reference vectors of dimension D.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    centers: Vec<Vec<f64>>,
    trained_on: CodebookSource,
}

/// On-disk form: row-major centers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodebookRecord {
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(rename = "D")]
    pub d: usize,
    pub centers: Vec<f64>,
    pub trained_on: CodebookSource,
}

impl Codebook {
    pub fn new(centers: Vec<Vec<f64>>, trained_on: CodebookSource) -> Result<Self> {
        if centers.len() < 2 {
            return Err(Error::InvalidInput(format!(
                "codebook needs at least 2 centers, got {}",
                centers.len()
            )));
        }
        let d = centers[0].len();
        if d == 0 || centers.iter().any(|c| c.len() != d) {
            return Err(Error::InvalidInput("ragged or empty codebook centers".into()));
        }
        if centers.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("non-finite codebook center".into()));
        }
        Ok(Self {
            centers,
            trained_on,
        })
    }

    pub fn k(&self) -> usize {
        self.centers.len()
    }

    pub fn d(&self) -> usize {
        self.centers[0].len()
    }

    pub fn centers(&self) -> &[Vec<f64>] {
        &self.centers
    }

    pub fn trained_on(&self) -> CodebookSource {
        self.trained_on
    }

    /// Index of and squared distance to the nearest center. Ties go to the
    /// lowest index.
    pub fn nearest(&self, x: &[f64]) -> (usize, f64) {
        let mut best = (0, f64::INFINITY);
        for (i, c) in self.centers.iter().enumerate() {
            let d = sq_dist(x, c);
            if d < best.1 {
                best = (i, d);
            }
        }
        best
    }

    pub fn to_record(&self) -> CodebookRecord {
        CodebookRecord {
            k: self.k(),
            d: self.d(),
            centers: self.centers.iter().flatten().copied().collect(),
            trained_on: self.trained_on,
        }
    }

    pub fn from_record(rec: &CodebookRecord) -> Result<Self> {
        if rec.d == 0 || rec.centers.len() != rec.k * rec.d {
            return Err(Error::InvalidInput(format!(
                "codebook record has {} values for K={} D={}",
                rec.centers.len(),
                rec.k,
                rec.d
            )));
        }
        let centers = rec.centers.chunks(rec.d).map(<[f64]>::to_vec).collect();
        Self::new(centers, rec.trained_on)
    }
}

/// Within-cluster sum of squares of `points` under nearest-center assignment.
pub fn wcss(points: &[Vec<f64>], cb: &Codebook) -> f64 {
    points.iter().map(|p| cb.nearest(p).1).sum()
}

/// k-means with k-means++ seeding and exactly `iters` Lloyd iterations.
pub fn fit_codebook(
    points: &[Vec<f64>],
    k: usize,
    iters: usize,
    rng: &mut RngStream,
) -> Result<Codebook> {
    fit_codebook_traced(points, k, iters, rng).map(|(cb, _)| cb)
}

/// As [`fit_codebook`], also returning the WCSS after seeding and after
/// every Lloyd iteration (`iters + 1` entries).
pub fn fit_codebook_traced(
    points: &[Vec<f64>],
    k: usize,
    iters: usize,
    rng: &mut RngStream,
) -> Result<(Codebook, Vec<f64>)> {
    if k < 2 {
        return Err(Error::InvalidInput(format!("k must be at least 2, got {k}")));
    }
    let d = points.first().map_or(0, Vec::len);
    if d == 0 || points.iter().any(|p| p.len() != d) {
        return Err(Error::InvalidInput("points must be nonempty and share a dimension".into()));
    }
    let distinct: HashSet<Vec<u64>> = points
        .iter()
        .map(|p| p.iter().map(|x| x.to_bits()).collect())
        .collect();
    if distinct.len() < k {
        return Err(Error::InvalidInput(format!(
            "need at least {k} distinct points, got {}",
            distinct.len()
        )));
    }

    // k-means++ seeding.
    let n = points.len();
    let mut centers = vec![points[rng.below(n)].clone()];
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &centers[0])).collect();
    while centers.len() < k {
        let next = points[rng.categorical(&d2)].clone();
        for (dist, p) in d2.iter_mut().zip(points) {
            *dist = dist.min(sq_dist(p, &next));
        }
        centers.push(next);
    }

    let mut cb = Codebook::new(centers, CodebookSource::Fitted)?;
    let mut trace = vec![wcss(points, &cb)];
    for _ in 0..iters {
        let assigned: Vec<(usize, f64)> = points.iter().map(|p| cb.nearest(p)).collect();
        let mut sums = vec![vec![0.0; d]; k];
        let mut counts = vec![0usize; k];
        for (p, &(c, _)) in points.iter().zip(&assigned) {
            counts[c] += 1;
            for (s, x) in sums[c].iter_mut().zip(p) {
                *s += x;
            }
        }
        let mut far: Vec<f64> = assigned.iter().map(|a| a.1).collect();
        let mut centers = cb.centers.clone();
        for c in 0..k {
            if counts[c] > 0 {
                centers[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            }
        }
        for c in 0..k {
            if counts[c] == 0 {
                // Re-seed to the point farthest from its assigned center.
                let (idx, _) = far.iter().enumerate().fold((0, f64::NEG_INFINITY), |best, (i, &v)| {
                    if v > best.1 {
                        (i, v)
                    } else {
                        best
                    }
                });
                centers[c] = points[idx].clone();
                far[idx] = f64::NEG_INFINITY;
            }
        }
        cb = Codebook::new(centers, CodebookSource::Fitted)?;
        trace.push(wcss(points, &cb));
    }
    Ok((cb, trace))
}

fn check_dims(frames: &[Vec<f64>], cb: &Codebook) -> Result<()> {
    if let Some(bad) = frames.iter().find(|f| f.len() != cb.d()) {
        return Err(Error::InvalidInput(format!(
            "frame dimension {} does not match codebook dimension {}",
            bad.len(),
            cb.d()
        )));
    }
    Ok(())
}

/// Nearest-center reconstruction `X̂` of each frame.
pub fn reconstruct(frames: &[Vec<f64>], cb: &Codebook) -> Result<Vec<Vec<f64>>> {
    check_dims(frames, cb)?;
    Ok(frames
        .iter()
        .map(|f| cb.centers[cb.nearest(f).0].clone())
        .collect())
}

/// `R[t] = |x_t - x̂_t|` elementwise.
pub fn residual_frames(frames: &[Vec<f64>], cb: &Codebook) -> Result<Vec<Vec<f64>>> {
    let recon = reconstruct(frames, cb)?;
    Ok(frames
        .iter()
        .zip(&recon)
        .map(|(x, xh)| x.iter().zip(xh).map(|(a, b)| (a - b).abs()).collect())
        .collect())
}

pub fn quantize_and_residual(clip: &VideoClip, cb: &Codebook) -> Result<Vec<Vec<f64>>> {
    residual_frames(&clip.frames, cb)
}

fn pop_std(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    let m = xs.iter().sum::<f64>() / xs.len() as f64;
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / xs.len() as f64).sqrt()
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

fn diffs(frames: &[Vec<f64>]) -> Vec<Vec<f64>> {
    frames
        .windows(2)
        .map(|w| w[1].iter().zip(&w[0]).map(|(a, b)| a - b).collect())
        .collect()
}

/// Eight temporal statistics of the raw frame sequence, in this order:
/// mean frame norm/√D, std of frame norms, mean first-difference norm/√D,
/// std of first-difference norms, lag-1 autocorrelation of frame norms,
/// least-squares slope of frame norms, max |frame norm - mean|, and mean
/// second-difference norm/√D.
pub fn semantic_features(frames: &[Vec<f64>]) -> Result<[f64; SEMANTIC_DIM]> {
    if frames.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "semantic features need at least 2 frames, got {}",
            frames.len()
        )));
    }
    let sqrt_d = (frames[0].len() as f64).sqrt();
    let norms: Vec<f64> = frames.iter().map(|f| norm(f)).collect();
    let first = diffs(frames);
    let d1: Vec<f64> = first.iter().map(|f| norm(f)).collect();
    let d2: Vec<f64> = diffs(&first).iter().map(|f| norm(f)).collect();
    let m = mean(&norms);
    let max_dev = norms.iter().map(|n| (n - m).abs()).fold(0.0, f64::max);
    Ok([
        m / sqrt_d,
        pop_std(&norms),
        mean(&d1) / sqrt_d,
        pop_std(&d1),
        lag1_autocorr(&norms),
        ls_slope(&norms),
        max_dev,
        mean(&d2) / sqrt_d,
    ])
}

/// Six statistics of the residual row norms: mean/√D, max/√D, std, slope,
/// fraction of rows with norm/√D above 0.5, and lag-1 autocorrelation.
pub fn residual_features(residual: &[Vec<f64>]) -> [f64; RESIDUAL_DIM] {
    if residual.is_empty() {
        return [0.0; RESIDUAL_DIM];
    }
    let sqrt_d = (residual[0].len() as f64).sqrt();
    let norms: Vec<f64> = residual.iter().map(|r| norm(r)).collect();
    let above = norms.iter().filter(|&&n| n / sqrt_d > 0.5).count();
    [
        mean(&norms) / sqrt_d,
        norms.iter().cloned().fold(0.0, f64::max) / sqrt_d,
        pop_std(&norms),
        ls_slope(&norms),
        above as f64 / norms.len() as f64,
        lag1_autocorr(&norms),
    ]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ordering {
    Ordered,
    Shuffled,
}

/// Which residual-path input the episode carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FuseMode {
    /// Residual features of `R = |X - X̂|`.
    #[default]
    Full,
    /// Residual slots zeroed.
    NoResidual,
    /// Residual statistics computed on `X̂` instead of `R`.
    Reconstruction,
}

impl std::str::FromStr for FuseMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(FuseMode::Full),
            "no_residual" => Ok(FuseMode::NoResidual),
            "reconstruction" => Ok(FuseMode::Reconstruction),
            other => Err(Error::InvalidConfig(format!(
                "unknown mode {other:?} (expected full, no_residual or reconstruction)"
            ))),
        }
    }
}

impl FuseMode {
    pub fn as_str(self) -> &'static str {
        match self {
            FuseMode::Full => "full",
            FuseMode::NoResidual => "no_residual",
            FuseMode::Reconstruction => "reconstruction",
        }
    }
}

/// One clip's fused feature vector, the unit of rollout and evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Episode {
    pub clip_id: String,
    pub features: Vec<f64>,
    pub label: Label,
    pub family: Family,
    pub ordering: Ordering,
    pub shuffle_seed: Option<u64>,
}

/// Build the episode vector `[semantic(8) ‖ residual(6) ‖ 1.0]`.
///
/// In shuffled mode a single frame permutation is drawn from `shuffle_rng`
/// and applied before both encoders.
pub fn fuse(
    clip: &VideoClip,
    cb: &Codebook,
    ordering: Ordering,
    shuffle_rng: Option<&mut RngStream>,
    mode: FuseMode,
) -> Result<Episode> {
    let (frames, shuffle_seed) = match (ordering, shuffle_rng) {
        (Ordering::Ordered, _) => (clip.frames.clone(), None),
        (Ordering::Shuffled, Some(rng)) => {
            let seed = rng.seed();
            let perm = rng.permutation(clip.frames.len());
            (perm.iter().map(|&i| clip.frames[i].clone()).collect(), Some(seed))
        }
        (Ordering::Shuffled, None) => {
            return Err(Error::InvalidConfig(
                "shuffled fusion requires a shuffle rng".into(),
            ))
        }
    };
    let semantic = semantic_features(&frames)?;
    let residual = match mode {
        FuseMode::Full => residual_features(&residual_frames(&frames, cb)?),
        FuseMode::NoResidual => {
            check_dims(&frames, cb)?;
            [0.0; RESIDUAL_DIM]
        }
        FuseMode::Reconstruction => residual_features(&reconstruct(&frames, cb)?),
    };
    let mut features = Vec::with_capacity(EPISODE_DIM);
    features.extend_from_slice(&semantic);
    features.extend_from_slice(&residual);
    features.push(PROMPT_CONSTANT);
    if features.iter().any(|x| !x.is_finite()) {
        return Err(Error::NumericalFailure(format!(
            "non-finite episode features for clip {}",
            clip.id
        )));
    }
    Ok(Episode {
        clip_id: clip.id.clone(),
        features,
        label: clip.label,
        family: clip.family,
        ordering,
        shuffle_seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulator::Split;

    fn clip_from(frames: Vec<Vec<f64>>) -> VideoClip {
        VideoClip {
            id: "c".into(),
            frames,
            label: Label::Fake,
            family: Family::Pose,
            artifact_strength: 1.0,
            seed: 0,
            split: Split::Train,
        }
    }

    fn square() -> Vec<Vec<f64>> {
        vec![
            vec![0.0, 0.0],
            vec![1.0, 0.0],
            vec![0.0, 1.0],
            vec![1.0, 1.0],
        ]
    }

    #[test]
    fn fit_square_corners() {
        let pts = square();
        let cb = fit_codebook(&pts, 4, 5, &mut RngStream::new(0)).unwrap();
        let mut got: Vec<Vec<f64>> = cb.centers().to_vec();
        got.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut want = pts.clone();
        want.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(got, want);
    }

    #[test]
    fn fit_zero_iterations_returns_seeds() {
        let pts = square();
        let mut a = RngStream::new(4);
        let mut b = RngStream::new(4);
        let cb = fit_codebook(&pts, 2, 0, &mut a).unwrap();
        // Replay the seeding by hand.
        let first = pts[b.below(4)].clone();
        let d2: Vec<f64> = pts.iter().map(|p| sq_dist(p, &first)).collect();
        let second = pts[b.categorical(&d2)].clone();
        assert_eq!(cb.centers(), &[first, second]);
    }

    #[test]
    fn fit_two_blobs() {
        let mut rng = RngStream::new(0);
        let means = [vec![-3.0, 2.0, 0.0], vec![4.0, -1.0, 1.0]];
        let mut pts = Vec::new();
        for _ in 0..300 {
            for m in &means {
                pts.push(m.iter().map(|x| x + 0.2 * rng.normal()).collect::<Vec<_>>());
            }
        }
        let cb = fit_codebook(&pts, 2, 10, &mut RngStream::new(1)).unwrap();
        for m in &means {
            let (i, _) = cb.nearest(m);
            assert!(sq_dist(&cb.centers()[i], m).sqrt() < 0.1);
        }
    }

    #[test]
    fn fit_rejects_too_few_points() {
        let pts = vec![vec![1.0], vec![1.0], vec![2.0]];
        assert!(matches!(
            fit_codebook(&pts, 3, 1, &mut RngStream::new(0)),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn wcss_never_increases() {
        let mut rng = RngStream::new(9);
        let pts: Vec<Vec<f64>> = (0..200)
            .map(|_| (0..4).map(|_| rng.normal()).collect())
            .collect();
        let (_, trace) = fit_codebook_traced(&pts, 8, 12, &mut RngStream::new(2)).unwrap();
        assert_eq!(trace.len(), 13);
        for w in trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-9, "{trace:?}");
        }
    }

    #[test]
    fn residual_zero_on_center_and_tie_break() {
        let centers = vec![
            vec![0.0, 0.0],
            vec![5.0, 5.0],
            vec![2.0, 0.0],
            vec![9.0, 9.0],
            vec![-9.0, 9.0],
            vec![0.0, 2.0],
        ];
        let cb = Codebook::new(centers, CodebookSource::Manifold).unwrap();
        let clip = clip_from(vec![vec![5.0, 5.0]]);
        assert_eq!(quantize_and_residual(&clip, &cb).unwrap(), vec![vec![0.0, 0.0]]);
        // (2, 2) is equidistant from centers 2 and 5.
        let (idx, _) = cb.nearest(&[2.0, 2.0]);
        assert_eq!(idx, 2);
    }

    #[test]
    fn residual_dimension_mismatch() {
        let cb = Codebook::new(vec![vec![0.0; 3], vec![1.0; 3]], CodebookSource::Manifold).unwrap();
        let clip = clip_from(vec![vec![0.0; 2]]);
        assert!(matches!(
            quantize_and_residual(&clip, &cb),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn semantic_constant_clip() {
        let f = semantic_features(&vec![vec![0.3, -1.2, 2.0]; 7]).unwrap();
        for i in [1, 2, 3, 4, 5, 6, 7] {
            assert!(f[i].abs() < 1e-12, "component {} = {}", i + 1, f[i]);
        }
        assert!(f[0] > 0.0);
    }

    #[test]
    fn semantic_slope_of_norms() {
        let frames: Vec<Vec<f64>> = (1..=4).map(|n| vec![n as f64, 0.0]).collect();
        let f = semantic_features(&frames).unwrap();
        assert!((f[5] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn semantic_alternating_clip_maximizes_second_difference() {
        let a = vec![1.0, 0.0, 0.0, 0.0];
        let b = vec![0.0, 1.0, 0.0, 0.0];
        let alternating: Vec<Vec<f64>> = (0..10)
            .map(|t| if t % 2 == 0 { a.clone() } else { b.clone() })
            .collect();
        let ramp: Vec<Vec<f64>> = (0..10).map(|t| vec![t as f64 * 0.1, 0.0, 0.0, 0.0]).collect();
        let mut rng = RngStream::new(1);
        let noisy: Vec<Vec<f64>> = (0..10)
            .map(|_| (0..4).map(|_| rng.normal()).collect())
            .collect();
        let ratio = |fr: &[Vec<f64>]| {
            let f = semantic_features(fr).unwrap();
            f[7] / f[2]
        };
        let alt = ratio(&alternating);
        assert!((alt - 2.0).abs() < 1e-12);
        assert!(alt > ratio(&ramp));
        assert!(alt > ratio(&noisy));
    }

    #[test]
    fn semantic_needs_two_frames() {
        assert!(matches!(
            semantic_features(&[vec![1.0]]),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn residual_feature_examples() {
        assert_eq!(residual_features(&vec![vec![0.0; 16]; 10]), [0.0; 6]);
        let mut r = vec![vec![0.0; 16]; 10];
        r[3] = vec![1.0; 16];
        let f = residual_features(&r);
        assert!((f[4] - 0.1).abs() < 1e-15);
        assert!((f[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn fuse_constant_clip_on_center() {
        let center = vec![0.5, -0.25, 1.0];
        let cb = Codebook::new(vec![center.clone(), vec![4.0; 3]], CodebookSource::Manifold).unwrap();
        let clip = clip_from(vec![center.clone(); 6]);
        let ep = fuse(&clip, &cb, Ordering::Ordered, None, FuseMode::Full).unwrap();
        let sem = semantic_features(&clip.frames).unwrap();
        assert_eq!(&ep.features[..8], &sem);
        assert_eq!(&ep.features[8..14], &[0.0; 6]);
        assert_eq!(ep.features[14], 1.0);
        assert_eq!(ep.shuffle_seed, None);
    }

    #[test]
    fn fuse_shuffled_requires_rng() {
        let cb = Codebook::new(vec![vec![0.0], vec![1.0]], CodebookSource::Manifold).unwrap();
        let clip = clip_from(vec![vec![0.0], vec![1.0], vec![0.5]]);
        assert!(matches!(
            fuse(&clip, &cb, Ordering::Shuffled, None, FuseMode::Full),
            Err(Error::InvalidConfig(_))
        ));
        let a = fuse(&clip, &cb, Ordering::Shuffled, Some(&mut RngStream::new(3)), FuseMode::Full).unwrap();
        let b = fuse(&clip, &cb, Ordering::Shuffled, Some(&mut RngStream::new(3)), FuseMode::Full).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.shuffle_seed, Some(3));
    }

    #[test]
    fn fuse_modes() {
        let cb = Codebook::new(vec![vec![0.0, 0.0], vec![3.0, 3.0]], CodebookSource::Manifold).unwrap();
        let clip = clip_from(vec![vec![0.5, 0.1], vec![2.5, 3.2], vec![0.2, -0.3]]);
        let none = fuse(&clip, &cb, Ordering::Ordered, None, FuseMode::NoResidual).unwrap();
        assert_eq!(&none.features[8..14], &[0.0; 6]);
        let recon = fuse(&clip, &cb, Ordering::Ordered, None, FuseMode::Reconstruction).unwrap();
        let xh = reconstruct(&clip.frames, &cb).unwrap();
        assert_eq!(&recon.features[8..14], &residual_features(&xh));
        assert_eq!(&recon.features[..8], &none.features[..8]);
    }

    #[test]
    fn codebook_record_round_trip() {
        let cb = Codebook::new(vec![vec![0.1, 0.2], vec![0.3, 0.4], vec![-1.0, 2.5]], CodebookSource::Fitted).unwrap();
        assert_eq!(Codebook::from_record(&cb.to_record()).unwrap(), cb);
    }
}
