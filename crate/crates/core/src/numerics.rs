//! Shared numerical primitives: the softmax family, descriptive statistics,
//! a central-difference gradient oracle, and seeded splittable randomness.
//!
//! All randomness flows through [`RngStream`], a ChaCha8 generator addressed
//! by a `(seed, stream_id)` pair. Children are derived from the parent's
//! identity with the SplitMix64 finalizer, so a child depends only on the
//! path of ids used to reach it and never on how many draws the parent has
//! already made.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 output finalizer.
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Serializable position of an [`RngStream`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngState {
    pub seed: u64,
    pub stream_id: u64,
    pub word_pos: u64,
}

/// A deterministic, splittable random stream.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    rng: ChaCha8Rng,
}

impl PartialEq for RngStream {
    fn eq(&self, other: &Self) -> bool {
        self.state() == other.state()
    }
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self::with_stream(seed, 0)
    }

    pub fn with_stream(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        Self {
            seed,
            stream_id,
            rng,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Derive child stream `child_id`. Pure in the parent's identity.
    pub fn split(&self, child_id: u64) -> RngStream {
        let parent = mix64(self.seed ^ mix64(self.stream_id.wrapping_add(GOLDEN_GAMMA)));
        let seed = mix64(
            parent
                .wrapping_add(child_id.wrapping_mul(GOLDEN_GAMMA))
                .wrapping_add(1),
        );
        RngStream::with_stream(seed, child_id)
    }

    /// Derive a child by following a path of ids from `self`.
    pub fn split_path(&self, path: &[u64]) -> RngStream {
        path.iter().fold(self.clone(), |s, &id| s.split(id))
    }

    pub fn state(&self) -> RngState {
        RngState {
            seed: self.seed,
            stream_id: self.stream_id,
            word_pos: u64::try_from(self.rng.get_word_pos()).unwrap_or(u64::MAX),
        }
    }

    pub fn from_state(state: RngState) -> Self {
        let mut s = Self::with_stream(state.seed, state.stream_id);
        s.rng.set_word_pos(u128::from(state.word_pos));
        s
    }

    /// Uniform in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    pub fn uniform_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    pub fn normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    /// Uniform integer in `[0, n)`.
    pub fn below(&mut self, n: usize) -> usize {
        assert!(n > 0, "below(0)");
        self.rng.random_range(0..n)
    }

    /// Uniform integer in `[lo, hi]`.
    pub fn int_inclusive(&mut self, lo: usize, hi: usize) -> usize {
        self.rng.random_range(lo..=hi)
    }

    /// A random unit vector of dimension `d`.
    pub fn unit_vector(&mut self, d: usize) -> Vec<f64> {
        loop {
            let v: Vec<f64> = (0..d).map(|_| self.normal()).collect();
            let n = norm(&v);
            if n > 1e-12 {
                return v.into_iter().map(|x| x / n).collect();
            }
        }
    }

    /// A uniformly random permutation of `0..n` (Fisher-Yates).
    pub fn permutation(&mut self, n: usize) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            let j = self.below(i + 1);
            idx.swap(i, j);
        }
        idx
    }

    /// Draw an index from an unnormalized nonnegative weight vector.
    pub fn categorical(&mut self, weights: &[f64]) -> usize {
        let total: f64 = weights.iter().sum();
        let target = self.uniform() * total;
        let mut acc = 0.0;
        for (i, w) in weights.iter().enumerate() {
            acc += w;
            if target < acc {
                return i;
            }
        }
        // Rounding can leave target == total; fall back to the last nonzero weight.
        weights.iter().rposition(|&w| w > 0.0).unwrap_or(0)
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

/// Derive a child stream; free-function form of [`RngStream::split`].
pub fn split_rng(parent: &RngStream, child_id: u64) -> RngStream {
    parent.split(child_id)
}

fn check_finite(xs: &[f64], what: &str) -> Result<()> {
    if xs.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("{what} contains non-finite values")))
    }
}

/// Numerically stable `log(softmax(logits / temperature))`.
pub fn log_softmax(logits: &[f64], temperature: f64) -> Result<Vec<f64>> {
    check_finite(logits, "logits")?;
    if !(temperature > 0.0 && temperature.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "temperature must be positive, got {temperature}"
        )));
    }
    if logits.is_empty() {
        return Err(Error::InvalidInput("empty logits".into()));
    }
    let scaled: Vec<f64> = logits.iter().map(|l| l / temperature).collect();
    let max = scaled.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    // Subtract the max before anything else so large logits keep full precision.
    let shifted: Vec<f64> = scaled.iter().map(|z| z - max).collect();
    let lse = shifted.iter().map(|z| z.exp()).sum::<f64>().ln();
    Ok(shifted.into_iter().map(|z| z - lse).collect())
}

pub fn softmax(logits: &[f64], temperature: f64) -> Result<Vec<f64>> {
    Ok(log_softmax(logits, temperature)?
        .into_iter()
        .map(f64::exp)
        .collect())
}

/// Population summary statistics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StatSummary {
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

pub fn stats(values: &[f64]) -> Result<StatSummary> {
    if values.is_empty() {
        return Err(Error::InvalidInput("stats of empty input".into()));
    }
    check_finite(values, "values")?;
    // Sum in sorted order so any permutation of the input gives identical bits.
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mean = sorted.iter().sum::<f64>() / n;
    let var = sorted.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let (min, max) = (sorted[0], sorted[sorted.len() - 1]);
    // Summation can push the mean a ulp outside [min, max] for constant input.
    let mean = mean.clamp(min, max);
    Ok(StatSummary {
        mean,
        std: var.sqrt(),
        min,
        max,
        count: values.len(),
    })
}

/// Max over coordinates of `|central difference - analytic| / (|analytic| + 1e-8)`.
pub fn grad_check<F, G>(f: F, g: G, point: &[f64], step: f64) -> Result<f64>
where
    F: Fn(&[f64]) -> f64,
    G: Fn(&[f64]) -> Vec<f64>,
{
    if !(step > 0.0) {
        return Err(Error::InvalidInput(format!("step must be positive, got {step}")));
    }
    let analytic = g(point);
    if analytic.len() != point.len() {
        return Err(Error::InvalidInput(format!(
            "gradient has {} entries for a {}-dim point",
            analytic.len(),
            point.len()
        )));
    }
    let mut x = point.to_vec();
    let mut worst = 0.0f64;
    for i in 0..x.len() {
        let orig = x[i];
        x[i] = orig + step;
        let fp = f(&x);
        x[i] = orig - step;
        let fm = f(&x);
        x[i] = orig;
        if !fp.is_finite() || !fm.is_finite() {
            return Err(Error::NumericalFailure(format!(
                "non-finite function value at coordinate {i}"
            )));
        }
        let numeric = (fp - fm) / (2.0 * step);
        let err = (numeric - analytic[i]).abs() / (analytic[i].abs() + 1e-8);
        worst = worst.max(err);
    }
    Ok(worst)
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Least-squares slope of `ys` against their index.
pub fn ls_slope(ys: &[f64]) -> f64 {
    let n = ys.len();
    if n < 2 {
        return 0.0;
    }
    let xm = (n - 1) as f64 / 2.0;
    let ym = ys.iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (i, y) in ys.iter().enumerate() {
        let dx = i as f64 - xm;
        sxy += dx * (y - ym);
        sxx += dx * dx;
    }
    sxy / sxx
}

/// Lag-1 autocorrelation; 0 when the variance is below 1e-12.
pub fn lag1_autocorr(ys: &[f64]) -> f64 {
    let n = ys.len();
    if n < 2 {
        return 0.0;
    }
    let m = ys.iter().sum::<f64>() / n as f64;
    let var: f64 = ys.iter().map(|y| (y - m).powi(2)).sum();
    if var / (n as f64) < 1e-12 {
        return 0.0;
    }
    let cov: f64 = ys.windows(2).map(|w| (w[0] - m) * (w[1] - m)).sum();
    cov / var
}
