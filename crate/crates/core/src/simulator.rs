//! Parametric generator of labeled real/fake clips.
//!
//! Every clip is a `T x D` sequence of frame feature vectors. Fake clips sit
//! on a Gaussian codebook "manifold" (one center plus a small jitter) and
//! carry a family-specific temporal artifact; real clips follow a smooth
//! slow trajectory held off the manifold by a fixed offset. Quantization
//! residuals are therefore small for fakes and large for reals.

use std::f64::consts::PI;
use std::fmt;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::encoders::{Codebook, CodebookSource};
use crate::error::{Error, Result};
use crate::numerics::RngStream;

pub const DATASET_VERSION: &str = "clipguard-data-1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Real,
    Fake,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Pose,
    Audio,
    Text,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Test,
}

impl Label {
    pub fn as_str(self) -> &'static str {
        match self {
            Label::Real => "real",
            Label::Fake => "fake",
        }
    }
}

impl Family {
    pub const ALL: [Family; 3] = [Family::Pose, Family::Audio, Family::Text];

    pub fn as_str(self) -> &'static str {
        match self {
            Family::Pose => "pose",
            Family::Audio => "audio",
            Family::Text => "text",
        }
    }

    fn index(self) -> u64 {
        match self {
            Family::Pose => 0,
            Family::Audio => 1,
            Family::Text => 2,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pose" => Ok(Family::Pose),
            "audio" => Ok(Family::Audio),
            "text" => Ok(Family::Text),
            other => Err(Error::InvalidConfig(format!(
                "unknown family {other:?} (expected pose, audio or text)"
            ))),
        }
    }
}

/// Parse a comma-separated family list such as `pose,text`.
pub fn parse_families(s: &str) -> Result<Vec<Family>> {
    let mut out: Vec<Family> = s
        .split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(Family::from_str)
        .collect::<Result<_>>()?;
    out.sort();
    out.dedup();
    if out.is_empty() {
        return Err(Error::InvalidConfig("empty family list".into()));
    }
    Ok(out)
}

/// A labeled clip of frame feature vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct VideoClip {
    pub id: String,
    pub frames: Vec<Vec<f64>>,
    pub label: Label,
    pub family: Family,
    /// Zero for real clips.
    pub artifact_strength: f64,
    pub seed: u64,
    pub split: Split,
}

impl VideoClip {
    pub fn t(&self) -> usize {
        self.frames.len()
    }

    pub fn d(&self) -> usize {
        self.frames.first().map_or(0, Vec::len)
    }
}

/// All generation parameters. Echoed verbatim into the dataset header.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorConfig {
    /// Clips per family, split evenly between real and fake.
    pub clips_per_family: usize,
    pub families: Vec<Family>,
    /// Codebook size.
    pub k: usize,
    /// Frame dimension.
    pub d: usize,
    pub t_min: usize,
    pub t_max: usize,
    pub strength_min: f64,
    pub strength_max: f64,
    /// Per-coordinate jitter of fake frames around their center.
    pub fake_noise_std: f64,
    pub real_noise_std: f64,
    /// Norm of the fixed displacement of real clips off the manifold.
    pub real_offset_norm: f64,
    /// Amplitude of each of the two real-trajectory sinusoids.
    pub real_amplitude: f64,
    pub real_period_min: f64,
    pub real_period_max: f64,
    /// One clip in `test_divisor` (per family and label) is held out.
    pub test_divisor: usize,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            clips_per_family: 200,
            families: Family::ALL.to_vec(),
            k: 32,
            d: 16,
            t_min: 20,
            t_max: 40,
            strength_min: 0.5,
            strength_max: 1.5,
            fake_noise_std: 0.05,
            real_noise_std: 0.05,
            real_offset_norm: 1.5,
            real_amplitude: 1.5,
            real_period_min: 120.0,
            real_period_max: 200.0,
            test_divisor: 10,
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if !self.clips_per_family.is_multiple_of(2) {
            return bad(format!(
                "clips_per_family must be even for a 1:1 real:fake ratio, got {}",
                self.clips_per_family
            ));
        }
        if self.clips_per_family < 4 {
            return bad("clips_per_family must be at least 4".into());
        }
        if self.families.is_empty() {
            return bad("no families selected".into());
        }
        if self.k < 2 {
            return bad(format!("k must be at least 2, got {}", self.k));
        }
        if self.d < 4 {
            return bad(format!("d must be at least 4, got {}", self.d));
        }
        if self.t_min < 4 || self.t_max < self.t_min {
            return bad(format!("invalid frame range [{}, {}]", self.t_min, self.t_max));
        }
        if !(self.strength_min > 0.0 && self.strength_min <= self.strength_max) {
            return bad("invalid strength range".into());
        }
        if !(self.real_period_min >= 10.0 && self.real_period_max >= self.real_period_min) {
            return bad("real trajectory periods must be at least 10 frames".into());
        }
        if self.test_divisor < 2 {
            return bad("test_divisor must be at least 2".into());
        }
        for (name, v) in [
            ("fake_noise_std", self.fake_noise_std),
            ("real_noise_std", self.real_noise_std),
            ("real_offset_norm", self.real_offset_norm),
            ("real_amplitude", self.real_amplitude),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{name} must be finite and nonnegative"));
            }
        }
        Ok(())
    }
}

/// The generated-content manifold: `k` standard-Gaussian centers in `d` dims.
pub fn make_manifold(seed: u64, k: usize, d: usize) -> Result<Codebook> {
    if k < 2 {
        return Err(Error::InvalidConfig(format!("manifold needs k >= 2, got {k}")));
    }
    if d == 0 {
        return Err(Error::InvalidConfig("manifold needs d >= 1".into()));
    }
    let mut rng = RngStream::new(seed);
    let centers = (0..k)
        .map(|_| (0..d).map(|_| rng.normal()).collect())
        .collect();
    Codebook::new(centers, CodebookSource::Manifold)
}

/// Generate one clip. Strength is ignored (stored as 0) for real clips.
pub fn generate_clip(
    rng: &mut RngStream,
    label: Label,
    family: Family,
    manifold: &Codebook,
    strength: f64,
    cfg: &GeneratorConfig,
) -> Result<VideoClip> {
    let d = manifold.d();
    if d < 4 {
        return Err(Error::InvalidConfig("artifacts need at least 4 coordinates".into()));
    }
    if label == Label::Fake && !(cfg.strength_min..=cfg.strength_max).contains(&strength) {
        return Err(Error::InvalidConfig(format!(
            "fake strength {strength} outside [{}, {}]",
            cfg.strength_min, cfg.strength_max
        )));
    }
    let seed = rng.seed();
    let t_len = rng.int_inclusive(cfg.t_min, cfg.t_max);
    let center = manifold.centers()[rng.below(manifold.k())].clone();
    let mut frames = vec![center; t_len];

    let artifact_strength = match label {
        Label::Real => {
            let offset = rng.unit_vector(d);
            let dirs = [rng.unit_vector(d), rng.unit_vector(d)];
            let periods = [
                rng.uniform_range(cfg.real_period_min, cfg.real_period_max),
                rng.uniform_range(cfg.real_period_min, cfg.real_period_max),
            ];
            let phases = [rng.uniform_range(0.0, 2.0 * PI), rng.uniform_range(0.0, 2.0 * PI)];
            for (t, frame) in frames.iter_mut().enumerate() {
                let waves: Vec<f64> = (0..2)
                    .map(|k| cfg.real_amplitude * (2.0 * PI * t as f64 / periods[k] + phases[k]).sin())
                    .collect();
                for j in 0..d {
                    frame[j] += cfg.real_offset_norm * offset[j]
                        + waves[0] * dirs[0][j]
                        + waves[1] * dirs[1][j]
                        + cfg.real_noise_std * rng.normal();
                }
            }
            0.0
        }
        Label::Fake => {
            let coords: Vec<usize> = rng.permutation(d).into_iter().take(4).collect();
            match family {
                Family::Pose => {
                    // ++--++-- flicker: the sign flips every 2 frames.
                    let delta = 0.4 * strength;
                    let phase = rng.below(4);
                    let signs: Vec<f64> = coords
                        .iter()
                        .map(|_| if rng.uniform() < 0.5 { 1.0 } else { -1.0 })
                        .collect();
                    for (t, frame) in frames.iter_mut().enumerate() {
                        let s = if ((t + phase) / 2).is_multiple_of(2) { 1.0 } else { -1.0 };
                        for (&c, sign) in coords.iter().zip(&signs) {
                            frame[c] += s * sign * delta;
                        }
                    }
                }
                Family::Audio => {
                    let amp = 0.3 * strength;
                    let phase = rng.uniform_range(0.0, 2.0 * PI);
                    for (t, frame) in frames.iter_mut().enumerate() {
                        let v = amp * (2.0 * PI * t as f64 / 6.0 + phase).sin();
                        for &c in &coords {
                            frame[c] += v;
                        }
                    }
                }
                Family::Text => {
                    let drift = rng.unit_vector(d);
                    let jump_dir = rng.unit_vector(d);
                    let jump_at = rng.int_inclusive(1, t_len - 1);
                    for (t, frame) in frames.iter_mut().enumerate() {
                        let jump = if t >= jump_at { 0.8 * strength } else { 0.0 };
                        for j in 0..d {
                            frame[j] += 0.02 * strength * t as f64 * drift[j] + jump * jump_dir[j];
                        }
                    }
                }
            }
            for frame in frames.iter_mut() {
                for x in frame.iter_mut() {
                    *x += cfg.fake_noise_std * rng.normal();
                }
            }
            strength
        }
    };

    Ok(VideoClip {
        id: format!("{family}-{label}-{seed:016x}"),
        frames,
        label,
        family,
        artifact_strength,
        seed,
        split: Split::Train,
    })
}

/// A generated dataset: clips of both splits plus everything needed to
/// regenerate it.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    pub seed: u64,
    pub codebook_seed: u64,
    pub config: GeneratorConfig,
    pub clips: Vec<VideoClip>,
}

/// Build a class-balanced dataset with a 9:1 train/test split per family
/// and label. Deterministic in `seed`; clips are generated in parallel from
/// independent substreams.
pub fn build_dataset(config: &GeneratorConfig, seed: u64) -> Result<DatasetManifest> {
    config.validate()?;
    let manifold = make_manifold(seed, config.k, config.d)?;
    let root = RngStream::new(seed).split(1);
    let per_class = config.clips_per_family / 2;
    let n_test = (per_class / config.test_divisor).max(1);

    let mut jobs = Vec::new();
    for &family in &config.families {
        for label in [Label::Real, Label::Fake] {
            for j in 0..per_class {
                jobs.push((family, label, j));
            }
        }
    }
    let clips = jobs
        .par_iter()
        .map(|&(family, label, j)| {
            let label_id = match label {
                Label::Real => 0,
                Label::Fake => 1,
            };
            let clip_rng = root.split_path(&[family.index(), label_id, j as u64]);
            let strength = match label {
                Label::Real => 0.0,
                Label::Fake => clip_rng
                    .split(0)
                    .uniform_range(config.strength_min, config.strength_max),
            };
            let mut gen = clip_rng.split(1);
            let mut clip = generate_clip(&mut gen, label, family, &manifold, strength, config)?;
            clip.id = format!("{family}-{label}-{j:04}");
            clip.split = if j >= per_class - n_test {
                Split::Test
            } else {
                Split::Train
            };
            Ok(clip)
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(DatasetManifest {
        seed,
        codebook_seed: seed,
        config: config.clone(),
        clips,
    })
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct HeaderRecord {
    version: String,
    seed: u64,
    codebook_seed: u64,
    config: GeneratorConfig,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ClipRecord {
    id: String,
    split: Split,
    label: Label,
    family: Family,
    strength: f64,
    seed: u64,
    #[serde(rename = "T")]
    t: usize,
    #[serde(rename = "D")]
    d: usize,
    frames: Vec<f64>,
}

impl DatasetManifest {
    pub fn split(&self, split: Split) -> impl Iterator<Item = &VideoClip> {
        self.clips.iter().filter(move |c| c.split == split)
    }

    pub fn train(&self) -> Vec<&VideoClip> {
        self.split(Split::Train).collect()
    }

    pub fn test(&self) -> Vec<&VideoClip> {
        self.split(Split::Test).collect()
    }

    pub fn get(&self, id: &str) -> Option<&VideoClip> {
        self.clips.iter().find(|c| c.id == id)
    }

    /// The manifold codebook this dataset was generated against.
    pub fn manifold(&self) -> Result<Codebook> {
        make_manifold(self.codebook_seed, self.config.k, self.config.d)
    }

    /// Keep only clips of the given families.
    pub fn filter_families(&self, families: &[Family]) -> DatasetManifest {
        DatasetManifest {
            clips: self
                .clips
                .iter()
                .filter(|c| families.contains(&c.family))
                .cloned()
                .collect(),
            ..self.clone()
        }
    }

    /// Keep the first `n` training clips of each (family, label) pair; the
    /// test split is untouched.
    pub fn subsample_train(&self, n: usize) -> DatasetManifest {
        let mut seen = std::collections::HashMap::new();
        let clips = self
            .clips
            .iter()
            .filter(|c| {
                if c.split == Split::Test {
                    return true;
                }
                let count = seen.entry((c.family, c.label)).or_insert(0usize);
                *count += 1;
                *count <= n
            })
            .cloned()
            .collect();
        DatasetManifest {
            clips,
            ..self.clone()
        }
    }

    pub fn write_jsonl(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        self.write_to(&mut out).map_err(|e| Error::io(path, e))?;
        out.flush().map_err(|e| Error::io(path, e))
    }

    pub fn write_to<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        let header = HeaderRecord {
            version: DATASET_VERSION.to_string(),
            seed: self.seed,
            codebook_seed: self.codebook_seed,
            config: self.config.clone(),
        };
        serde_json::to_writer(&mut *out, &header)?;
        out.write_all(b"\n")?;
        for clip in &self.clips {
            let rec = ClipRecord {
                id: clip.id.clone(),
                split: clip.split,
                label: clip.label,
                family: clip.family,
                strength: clip.artifact_strength,
                seed: clip.seed,
                t: clip.t(),
                d: clip.d(),
                frames: clip.frames.iter().flatten().copied().collect(),
            };
            serde_json::to_writer(&mut *out, &rec)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn read_jsonl(path: &Path) -> Result<DatasetManifest> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut lines = BufReader::new(file).lines();
        let header_line = lines
            .next()
            .ok_or_else(|| Error::format(path, "empty dataset file"))?
            .map_err(|e| Error::io(path, e))?;
        let header: HeaderRecord =
            serde_json::from_str(&header_line).map_err(|e| Error::format(path, format!("header: {e}")))?;
        if header.version != DATASET_VERSION {
            return Err(Error::format(
                path,
                format!("unsupported version {:?}", header.version),
            ));
        }
        let mut clips = Vec::new();
        for (lineno, line) in lines.enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: ClipRecord = serde_json::from_str(&line)
                .map_err(|e| Error::format(path, format!("line {}: {e}", lineno + 2)))?;
            if rec.d == 0 || rec.frames.len() != rec.t * rec.d {
                return Err(Error::format(
                    path,
                    format!("clip {}: {} values for T={} D={}", rec.id, rec.frames.len(), rec.t, rec.d),
                ));
            }
            clips.push(VideoClip {
                id: rec.id,
                frames: rec.frames.chunks(rec.d).map(<[f64]>::to_vec).collect(),
                label: rec.label,
                family: rec.family,
                artifact_strength: rec.strength,
                seed: rec.seed,
                split: rec.split,
            });
        }
        Ok(DatasetManifest {
            seed: header.seed,
            codebook_seed: header.codebook_seed,
            config: header.config,
            clips,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::norm;

    fn small_config() -> GeneratorConfig {
        GeneratorConfig {
            clips_per_family: 20,
            ..Default::default()
        }
    }

    /// Mean Euclidean nearest-center distance per frame.
    fn mean_center_distance(clip: &VideoClip, cb: &Codebook) -> f64 {
        clip.frames.iter().map(|f| cb.nearest(f).1.sqrt()).sum::<f64>() / clip.t() as f64
    }

    fn mean_first_diff(clip: &VideoClip) -> f64 {
        let diffs: Vec<f64> = clip
            .frames
            .windows(2)
            .map(|w| norm(&w[1].iter().zip(&w[0]).map(|(a, b)| a - b).collect::<Vec<_>>()))
            .collect();
        diffs.iter().sum::<f64>() / diffs.len() as f64
    }

    #[test]
    fn manifold_is_deterministic() {
        let a = make_manifold(0, 32, 16).unwrap();
        assert_eq!(a.k(), 32);
        assert!(a.centers().iter().flatten().all(|x| x.is_finite()));
        assert_eq!(a, make_manifold(0, 32, 16).unwrap());
        let b = make_manifold(1, 32, 16).unwrap();
        let max_dist = a
            .centers()
            .iter()
            .zip(b.centers())
            .map(|(x, y)| crate::numerics::sq_dist(x, y).sqrt())
            .fold(0.0, f64::max);
        assert!(max_dist > 0.0);
        assert!(matches!(make_manifold(0, 1, 16), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn real_clip_sits_off_manifold() {
        let cfg = GeneratorConfig::default();
        let cb = make_manifold(0, 32, 16).unwrap();
        let clip = generate_clip(&mut RngStream::new(0), Label::Real, Family::Pose, &cb, 0.0, &cfg).unwrap();
        assert!((20..=40).contains(&clip.t()));
        assert_eq!(clip.d(), 16);
        assert_eq!(clip.artifact_strength, 0.0);
        assert!(mean_center_distance(&clip, &cb) > 1.0);
    }

    #[test]
    fn fake_clip_sits_near_manifold() {
        let cfg = GeneratorConfig::default();
        let cb = make_manifold(0, 32, 16).unwrap();
        let sqrt_d = 4.0;
        for family in Family::ALL {
            let clip = generate_clip(&mut RngStream::new(0), Label::Fake, family, &cb, 1.0, &cfg).unwrap();
            let rms = mean_center_distance(&clip, &cb) / sqrt_d;
            assert!(rms < 0.3, "{family}: {rms}");
        }
    }

    #[test]
    fn pose_flicker_dominates_real_motion() {
        let cfg = GeneratorConfig::default();
        let cb = make_manifold(0, 32, 16).unwrap();
        let fake = generate_clip(&mut RngStream::new(0), Label::Fake, Family::Pose, &cb, 1.0, &cfg).unwrap();
        let real = generate_clip(&mut RngStream::new(0), Label::Real, Family::Pose, &cb, 0.0, &cfg).unwrap();
        let (f, r) = (mean_first_diff(&fake), mean_first_diff(&real));
        assert!(f > 3.0 * r, "fake {f} real {r}");
    }

    #[test]
    fn dataset_counts_and_split() {
        let ds = build_dataset(&GeneratorConfig::default(), 0).unwrap();
        assert_eq!(ds.clips.len(), 600);
        let count = |split: Split, label: Label| {
            ds.split(split).filter(|c| c.label == label).count()
        };
        assert_eq!(count(Split::Train, Label::Real), 270);
        assert_eq!(count(Split::Train, Label::Fake), 270);
        assert_eq!(count(Split::Test, Label::Real), 30);
        assert_eq!(count(Split::Test, Label::Fake), 30);
        let train: std::collections::HashSet<_> = ds.split(Split::Train).map(|c| &c.id).collect();
        assert!(ds.split(Split::Test).all(|c| !train.contains(&c.id)));
    }

    #[test]
    fn dataset_is_deterministic() {
        let cfg = small_config();
        assert_eq!(build_dataset(&cfg, 3).unwrap(), build_dataset(&cfg, 3).unwrap());
        assert_ne!(build_dataset(&cfg, 3).unwrap(), build_dataset(&cfg, 4).unwrap());
    }

    #[test]
    fn family_filter() {
        let cfg = GeneratorConfig {
            families: vec![Family::Pose],
            ..small_config()
        };
        let ds = build_dataset(&cfg, 0).unwrap();
        assert_eq!(ds.clips.len(), 20);
        assert!(ds.clips.iter().all(|c| c.family == Family::Pose));
    }

    #[test]
    fn odd_counts_rejected() {
        let cfg = GeneratorConfig {
            clips_per_family: 21,
            ..Default::default()
        };
        assert!(matches!(build_dataset(&cfg, 0), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn family_parsing() {
        assert_eq!(parse_families("text, pose").unwrap(), vec![Family::Pose, Family::Text]);
        assert!(matches!("video".parse::<Family>(), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn jsonl_round_trip() {
        let ds = build_dataset(&small_config(), 5).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.jsonl");
        ds.write_jsonl(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 61);
        assert!(text.lines().next().unwrap().contains("\"version\":\"clipguard-data-1\""));
        assert_eq!(DatasetManifest::read_jsonl(&path).unwrap(), ds);
    }

    #[test]
    fn subsample_keeps_test_split() {
        let ds = build_dataset(&small_config(), 0).unwrap();
        let sub = ds.subsample_train(3);
        assert_eq!(sub.train().len(), 3 * 2 * 3);
        assert_eq!(sub.test().len(), ds.test().len());
    }
}
