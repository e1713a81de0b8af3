//! Autoregressive categorical policy over the structured-response vocabulary.
//!
//! Logits are linear in a context vector built from the episode features and
//! the response prefix: `logits = W · ctx + b`. Everything is exact and
//! differentiable in closed form.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::encoders::{Codebook, CodebookRecord, Episode, EPISODE_DIM};
use crate::error::{Error, Result};
use crate::numerics::{log_softmax, softmax, RngState, RngStream};
use crate::rewards::{parse_format, Parsed};

/// Token ids. Order is fixed and part of the checkpoint format.
pub mod tok {
    pub const T_OPEN: usize = 0;
    pub const T_CLOSE: usize = 1;
    pub const A_OPEN: usize = 2;
    pub const A_CLOSE: usize = 3;
    pub const REAL: usize = 4;
    pub const FAKE: usize = 5;
    pub const EOS: usize = 6;
    pub const C1: usize = 7;
    pub const C2: usize = 8;
    pub const C3: usize = 9;
    pub const C4: usize = 10;
    pub const C5: usize = 11;
    pub const C6: usize = 12;
    pub const C7: usize = 13;
    pub const C8: usize = 14;

    pub fn is_cue(t: usize) -> bool {
        (C1..=C8).contains(&t)
    }
}

pub const VOCAB: [&str; V] = [
    "T_OPEN", "T_CLOSE", "A_OPEN", "A_CLOSE", "REAL", "FAKE", "EOS", "C1", "C2", "C3", "C4", "C5",
    "C6", "C7", "C8",
];

/// Vocabulary size.
pub const V: usize = 15;
/// Context width: episode features, last-token one-hot, prefix counts, length.
pub const F: usize = EPISODE_DIM + 2 * V + 1;
pub const DEFAULT_MAX_LEN: usize = 32;
pub const CHECKPOINT_FORMAT: &str = "clipguard-ckpt-1";

const LAST_OFFSET: usize = EPISODE_DIM;
const COUNT_OFFSET: usize = EPISODE_DIM + V;
const LEN_OFFSET: usize = EPISODE_DIM + 2 * V;

/// Prefix teacher-forced by [`detection_score`].
pub const SCORE_PREFIX: [usize; 3] = [tok::T_OPEN, tok::T_CLOSE, tok::A_OPEN];

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyParams {
    /// `V x F`, row-major.
    pub w: Vec<f64>,
    pub b: Vec<f64>,
    /// Normalizer for the count and length context features.
    pub max_len: usize,
    pub version: u64,
}

impl PolicyParams {
    pub fn zeros(max_len: usize) -> Self {
        Self {
            w: vec![0.0; V * F],
            b: vec![0.0; V],
            max_len,
            version: 0,
        }
    }

    /// A policy that already writes well-formed responses but has no opinion
    /// on the answer: each grammar-legal next token gets logit `margin`, every
    /// other token 0, and REAL and FAKE are always tied.
    pub fn format_prior(margin: f64, max_len: usize) -> Self {
        use tok::*;
        let mut p = Self::zeros(max_len);
        p.b[T_OPEN] = margin;
        for last in 0..V {
            *p.w_mut(T_OPEN, LAST_OFFSET + last) = -margin;
        }
        let mut allow = |from: usize, to: usize| *p.w_mut(to, LAST_OFFSET + from) += margin;
        for from in std::iter::once(T_OPEN).chain(C1..=C8) {
            allow(from, T_CLOSE);
            for c in C1..=C8 {
                allow(from, c);
            }
        }
        allow(T_CLOSE, A_OPEN);
        allow(A_OPEN, REAL);
        allow(A_OPEN, FAKE);
        allow(REAL, A_CLOSE);
        allow(FAKE, A_CLOSE);
        allow(A_CLOSE, EOS);
        p
    }

    pub fn w_at(&self, row: usize, col: usize) -> f64 {
        self.w[row * F + col]
    }

    fn w_mut(&mut self, row: usize, col: usize) -> &mut f64 {
        &mut self.w[row * F + col]
    }

    pub fn validate(&self) -> Result<()> {
        if self.w.len() != V * F || self.b.len() != V {
            return Err(Error::InvalidInput(format!(
                "policy shape mismatch: |W|={} |b|={}, expected {} and {V}",
                self.w.len(),
                self.b.len(),
                V * F
            )));
        }
        if self.max_len < crate::rewards::MIN_LEN_BOUND {
            return Err(Error::InvalidConfig(format!("max_len {} below 7", self.max_len)));
        }
        if self.w.iter().chain(&self.b).any(|x| !x.is_finite()) {
            return Err(Error::NumericalFailure("non-finite policy parameter".into()));
        }
        Ok(())
    }

    /// All parameters as one vector: W row-major, then b.
    pub fn to_flat(&self) -> Vec<f64> {
        self.w.iter().chain(&self.b).copied().collect()
    }

    pub fn with_flat(&self, flat: &[f64]) -> Self {
        assert_eq!(flat.len(), V * F + V, "flat parameter length");
        Self {
            w: flat[..V * F].to_vec(),
            b: flat[V * F..].to_vec(),
            ..self.clone()
        }
    }

    /// `self += scale * grad`.
    pub fn add_scaled(&mut self, grad: &PolicyGrad, scale: f64) {
        for (p, g) in self.w.iter_mut().zip(&grad.w) {
            *p += scale * g;
        }
        for (p, g) in self.b.iter_mut().zip(&grad.b) {
            *p += scale * g;
        }
        self.version += 1;
    }
}

/// Gradient with the same layout as [`PolicyParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyGrad {
    pub w: Vec<f64>,
    pub b: Vec<f64>,
}

impl Default for PolicyGrad {
    fn default() -> Self {
        Self {
            w: vec![0.0; V * F],
            b: vec![0.0; V],
        }
    }
}

impl PolicyGrad {
    pub fn add(&mut self, other: &PolicyGrad) {
        for (a, b) in self.w.iter_mut().zip(&other.w) {
            *a += b;
        }
        for (a, b) in self.b.iter_mut().zip(&other.b) {
            *a += b;
        }
    }

    pub fn scale(&mut self, s: f64) {
        self.w.iter_mut().chain(self.b.iter_mut()).for_each(|x| *x *= s);
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.w.iter().chain(&self.b).copied().collect()
    }

    pub fn is_finite(&self) -> bool {
        self.w.iter().chain(&self.b).all(|x| x.is_finite())
    }

    /// Accumulate `weight * (onehot(token) - probs) ⊗ ctx`.
    fn accumulate(&mut self, ctx: &[f64], probs: &[f64], token: usize, weight: f64) {
        for v in 0..V {
            let coef = weight * (f64::from(u8::from(v == token)) - probs[v]);
            if coef == 0.0 {
                continue;
            }
            self.b[v] += coef;
            let row = &mut self.w[v * F..(v + 1) * F];
            for (g, c) in row.iter_mut().zip(ctx) {
                *g += coef * c;
            }
        }
    }
}

/// A sampled response with its temperature-1 log-probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Response {
    pub tokens: Vec<usize>,
    pub logprobs: Vec<f64>,
    pub parsed: Parsed,
}

impl Response {
    pub fn from_tokens(tokens: Vec<usize>, logprobs: Vec<f64>) -> Self {
        let parsed = parse_format(&tokens);
        Self {
            tokens,
            logprobs,
            parsed,
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn render(&self) -> String {
        self.tokens
            .iter()
            .map(|&t| VOCAB.get(t).copied().unwrap_or("?"))
            .collect::<Vec<_>>()
            .join(" ")
    }
}

/// `[features ‖ onehot(last) ‖ counts / max_len ‖ len / max_len]`.
pub fn context_features(features: &[f64], prefix: &[usize], max_len: usize) -> Vec<f64> {
    let mut ctx = vec![0.0; F];
    let n = features.len().min(EPISODE_DIM);
    ctx[..n].copy_from_slice(&features[..n]);
    let scale = 1.0 / max_len as f64;
    if let Some(&last) = prefix.last() {
        ctx[LAST_OFFSET + last] = 1.0;
    }
    for &t in prefix {
        ctx[COUNT_OFFSET + t] += scale;
    }
    ctx[LEN_OFFSET] = prefix.len() as f64 * scale;
    ctx
}

pub fn next_logits(params: &PolicyParams, ctx: &[f64]) -> Result<Vec<f64>> {
    let logits: Vec<f64> = (0..V)
        .map(|v| {
            let row = &params.w[v * F..(v + 1) * F];
            row.iter().zip(ctx).map(|(w, c)| w * c).sum::<f64>() + params.b[v]
        })
        .collect();
    if logits.iter().any(|x| !x.is_finite()) {
        return Err(Error::NumericalFailure(format!(
            "non-finite logits (context finite: {})",
            ctx.iter().all(|c| c.is_finite())
        )));
    }
    Ok(logits)
}

fn check_episode(episode: &Episode) -> Result<()> {
    if episode.features.len() != EPISODE_DIM {
        return Err(Error::InvalidInput(format!(
            "episode has {} features, expected {EPISODE_DIM}",
            episode.features.len()
        )));
    }
    Ok(())
}

/// Sample until EOS or `max_len` tokens at `temperature`; log-probabilities
/// are always recorded under the temperature-1 policy.
pub fn sample_response(
    params: &PolicyParams,
    episode: &Episode,
    rng: &mut RngStream,
    temperature: f64,
    max_len: usize,
) -> Result<Response> {
    check_episode(episode)?;
    if max_len < crate::rewards::MIN_LEN_BOUND {
        return Err(Error::InvalidInput(format!("max_len {max_len} below 7")));
    }
    let mut tokens = Vec::with_capacity(max_len);
    let mut logprobs = Vec::with_capacity(max_len);
    while tokens.len() < max_len {
        let ctx = context_features(&episode.features, &tokens, params.max_len);
        let logits = next_logits(params, &ctx)?;
        let probs = softmax(&logits, temperature)?;
        let t = rng.categorical(&probs);
        logprobs.push(log_softmax(&logits, 1.0)?[t]);
        tokens.push(t);
        if t == tok::EOS {
            break;
        }
    }
    Ok(Response::from_tokens(tokens, logprobs))
}

/// Argmax decoding; ties go to the lowest token id.
pub fn greedy_response(params: &PolicyParams, episode: &Episode, max_len: usize) -> Result<Response> {
    check_episode(episode)?;
    let mut tokens = Vec::with_capacity(max_len);
    let mut logprobs = Vec::with_capacity(max_len);
    while tokens.len() < max_len {
        let ctx = context_features(&episode.features, &tokens, params.max_len);
        let logits = next_logits(params, &ctx)?;
        let mut t = 0;
        for v in 1..V {
            if logits[v] > logits[t] {
                t = v;
            }
        }
        logprobs.push(log_softmax(&logits, 1.0)?[t]);
        tokens.push(t);
        if t == tok::EOS {
            break;
        }
    }
    Ok(Response::from_tokens(tokens, logprobs))
}

fn check_tokens(tokens: &[usize]) -> Result<()> {
    if tokens.is_empty() {
        return Err(Error::InvalidInput("empty token sequence".into()));
    }
    if let Some(&bad) = tokens.iter().find(|&&t| t >= V) {
        return Err(Error::InvalidInput(format!("unknown token id {bad}")));
    }
    Ok(())
}

/// Teacher-forced temperature-1 log-probability of each token.
pub fn sequence_logprob(params: &PolicyParams, episode: &Episode, tokens: &[usize]) -> Result<Vec<f64>> {
    check_episode(episode)?;
    check_tokens(tokens)?;
    (0..tokens.len())
        .map(|i| {
            let ctx = context_features(&episode.features, &tokens[..i], params.max_len);
            Ok(log_softmax(&next_logits(params, &ctx)?, 1.0)?[tokens[i]])
        })
        .collect()
}

/// Gradient of `Σ_t weights[t] · log π(tokens[t] | prefix)` in `(W, b)`.
pub fn logprob_grad(
    params: &PolicyParams,
    episode: &Episode,
    tokens: &[usize],
    weights: &[f64],
) -> Result<PolicyGrad> {
    let mut grad = PolicyGrad::default();
    accumulate_logprob_grad(&mut grad, params, episode, tokens, weights)?;
    Ok(grad)
}

pub(crate) fn accumulate_logprob_grad(
    grad: &mut PolicyGrad,
    params: &PolicyParams,
    episode: &Episode,
    tokens: &[usize],
    weights: &[f64],
) -> Result<()> {
    check_episode(episode)?;
    check_tokens(tokens)?;
    if weights.len() != tokens.len() {
        return Err(Error::InvalidInput(format!(
            "{} weights for {} tokens",
            weights.len(),
            tokens.len()
        )));
    }
    if weights.iter().any(|w| !w.is_finite()) {
        return Err(Error::InvalidInput("non-finite token weight".into()));
    }
    for (i, (&t, &w)) in tokens.iter().zip(weights).enumerate() {
        if w == 0.0 {
            continue;
        }
        let ctx = context_features(&episode.features, &tokens[..i], params.max_len);
        let probs = softmax(&next_logits(params, &ctx)?, 1.0)?;
        grad.accumulate(&ctx, &probs, t, w);
    }
    Ok(())
}

/// Probability of FAKE renormalized over {REAL, FAKE} after the forced
/// prefix `T_OPEN T_CLOSE A_OPEN`.
pub fn detection_score(params: &PolicyParams, episode: &Episode) -> Result<f64> {
    check_episode(episode)?;
    let ctx = context_features(&episode.features, &SCORE_PREFIX, params.max_len);
    let logits = next_logits(params, &ctx)?;
    Ok(1.0 / (1.0 + (logits[tok::REAL] - logits[tok::FAKE]).exp()))
}

/// Self-contained training snapshot: policy, codebook, config and RNG.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub format: String,
    pub vocab: Vec<String>,
    #[serde(rename = "F")]
    pub f: usize,
    #[serde(rename = "V")]
    pub v: usize,
    #[serde(rename = "W")]
    pub w: Vec<f64>,
    pub b: Vec<f64>,
    pub max_len: usize,
    pub version: u64,
    pub codebook: CodebookRecord,
    pub config: serde_json::Value,
    pub rng_state: RngState,
    pub step: u64,
}

impl Checkpoint {
    pub fn new(
        params: &PolicyParams,
        codebook: &Codebook,
        config: serde_json::Value,
        rng_state: RngState,
        step: u64,
    ) -> Self {
        Self {
            format: CHECKPOINT_FORMAT.to_string(),
            vocab: VOCAB.iter().map(|s| s.to_string()).collect(),
            f: F,
            v: V,
            w: params.w.clone(),
            b: params.b.clone(),
            max_len: params.max_len,
            version: params.version,
            codebook: codebook.to_record(),
            config,
            rng_state,
            step,
        }
    }

    pub fn params(&self) -> Result<PolicyParams> {
        let p = PolicyParams {
            w: self.w.clone(),
            b: self.b.clone(),
            max_len: self.max_len,
            version: self.version,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn codebook(&self) -> Result<Codebook> {
        Codebook::from_record(&self.codebook)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("checkpoint serializes")
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json() + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let ck: Checkpoint = serde_json::from_str(&text).map_err(|e| Error::format(path, e))?;
        if ck.format != CHECKPOINT_FORMAT {
            return Err(Error::format(path, format!("unsupported format {:?}", ck.format)));
        }
        if ck.f != F || ck.v != V || ck.vocab != VOCAB {
            return Err(Error::format(path, "vocabulary or context width mismatch"));
        }
        ck.params().map_err(|e| Error::format(path, e))?;
        ck.codebook().map_err(|e| Error::format(path, e))?;
        Ok(ck)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoders::Ordering;
    use crate::rewards::Answer;
    use crate::simulator::{Family, Label};
    use tok::*;

    fn episode(seed: u64) -> Episode {
        let mut rng = RngStream::new(seed);
        let mut features: Vec<f64> = (0..EPISODE_DIM - 1).map(|_| rng.normal()).collect();
        features.push(1.0);
        Episode {
            clip_id: "e".into(),
            features,
            label: Label::Fake,
            family: Family::Pose,
            ordering: Ordering::Ordered,
            shuffle_seed: None,
        }
    }

    fn random_params(seed: u64, scale: f64) -> PolicyParams {
        let mut rng = RngStream::new(seed);
        let mut p = PolicyParams::zeros(DEFAULT_MAX_LEN);
        p.w.iter_mut().chain(p.b.iter_mut()).for_each(|x| *x = scale * rng.normal());
        p
    }

    #[test]
    fn dimensions() {
        assert_eq!(V, 15);
        assert_eq!(F, 46);
        assert_eq!(VOCAB[C8], "C8");
    }

    #[test]
    fn context_layout() {
        let f = vec![0.5; EPISODE_DIM];
        let ctx = context_features(&f, &[], 32);
        assert!(ctx[EPISODE_DIM..].iter().all(|&x| x == 0.0));
        let ctx = context_features(&f, &[T_OPEN], 32);
        assert_eq!(ctx[LAST_OFFSET + T_OPEN], 1.0);
        assert_eq!(ctx[COUNT_OFFSET + T_OPEN], 1.0 / 32.0);
        assert_eq!(ctx[LEN_OFFSET], 1.0 / 32.0);
        assert_eq!(ctx, context_features(&f, &[T_OPEN], 32));
    }

    #[test]
    fn logits_basics() {
        let ctx = context_features(&episode(0).features, &[T_OPEN, C2], 32);
        let zero = next_logits(&PolicyParams::zeros(32), &ctx).unwrap();
        let p = softmax(&zero, 1.0).unwrap();
        assert!(p.iter().all(|&x| (x - 1.0 / 15.0).abs() < 1e-15));

        let mut p1 = random_params(1, 0.3);
        p1.b = vec![0.0; V];
        let mut p2 = p1.clone();
        p2.w.iter_mut().for_each(|x| *x *= 2.0);
        let (l1, l2) = (next_logits(&p1, &ctx).unwrap(), next_logits(&p2, &ctx).unwrap());
        for (a, b) in l1.iter().zip(&l2) {
            assert!((b / 2.0 - a).abs() < 1e-12);
        }

        let mut bad = p1.clone();
        bad.w[0] = f64::NAN;
        assert!(matches!(next_logits(&bad, &ctx), Err(Error::NumericalFailure(_))));
    }

    #[test]
    fn eos_bias_stops_immediately() {
        let mut p = PolicyParams::zeros(32);
        p.b[EOS] = 20.0;
        let ep = episode(0);
        let mut rng = RngStream::new(0);
        let hits = (0..1000)
            .filter(|_| sample_response(&p, &ep, &mut rng, 1.0, 32).unwrap().tokens == [EOS])
            .count();
        assert!(hits > 990);
    }

    #[test]
    fn sampling_is_deterministic_and_consistent() {
        let p = random_params(2, 0.2);
        let ep = episode(1);
        let a = sample_response(&p, &ep, &mut RngStream::new(5), 1.0, 32).unwrap();
        let b = sample_response(&p, &ep, &mut RngStream::new(5), 1.0, 32).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.tokens.len(), a.logprobs.len());
        assert!(a.logprobs.iter().all(|&l| l <= 0.0));
        let lp = sequence_logprob(&p, &ep, &a.tokens).unwrap();
        for (x, y) in lp.iter().zip(&a.logprobs) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn low_temperature_matches_greedy() {
        let p = random_params(3, 1.0);
        let ep = episode(2);
        let greedy = greedy_response(&p, &ep, 32).unwrap();
        let sampled = sample_response(&p, &ep, &mut RngStream::new(0), 1e-3, 32).unwrap();
        assert_eq!(greedy.tokens, sampled.tokens);
    }

    #[test]
    fn uniform_policy_token_frequencies() {
        let p = PolicyParams::zeros(8);
        let ep = episode(0);
        let mut rng = RngStream::new(0);
        let mut counts = [0usize; V];
        let mut total = 0;
        for _ in 0..50_000 {
            let r = sample_response(&p, &ep, &mut rng, 1.0, 8).unwrap();
            for &t in &r.tokens {
                counts[t] += 1;
                total += 1;
            }
        }
        for c in counts {
            let freq = c as f64 / total as f64;
            assert!((freq * 15.0 - 1.0).abs() < 0.02, "{freq}");
        }
    }

    #[test]
    fn sequence_logprob_cases() {
        let ep = episode(0);
        let lp = sequence_logprob(&PolicyParams::zeros(32), &ep, &[C3]).unwrap();
        assert!((lp[0] + 15f64.ln()).abs() < 1e-14);
        assert!(matches!(
            sequence_logprob(&PolicyParams::zeros(32), &ep, &[T_OPEN, 15]),
            Err(Error::InvalidInput(_))
        ));

        let p = random_params(4, 0.3);
        let tokens = [T_OPEN, C1, T_CLOSE, A_OPEN];
        let base: f64 = sequence_logprob(&p, &ep, &tokens).unwrap().iter().sum();
        let mut q = p.clone();
        q.b[C1] -= 0.5;
        let lower: f64 = sequence_logprob(&q, &ep, &tokens).unwrap().iter().sum();
        assert!(lower < base);
    }

    #[test]
    fn logprob_grad_closed_form_and_fd() {
        let ep = episode(0);
        let g = logprob_grad(&random_params(0, 0.3), &ep, &[T_OPEN, C2], &[0.0, 0.0]).unwrap();
        assert!(g.to_flat().iter().all(|&x| x == 0.0));

        let g = logprob_grad(&PolicyParams::zeros(32), &ep, &[FAKE], &[2.0]).unwrap();
        for v in 0..V {
            let expect = 2.0 * (f64::from(u8::from(v == FAKE)) - 1.0 / 15.0);
            assert!((g.b[v] - expect).abs() < 1e-14);
        }

        let p = random_params(7, 0.2);
        let tokens = [T_OPEN, C4, C1, T_CLOSE, A_OPEN, REAL];
        let weights = [0.3, -1.2, 0.7, 0.1, 2.0, -0.4];
        let f = |x: &[f64]| -> f64 {
            sequence_logprob(&p.with_flat(x), &ep, &tokens)
                .unwrap()
                .iter()
                .zip(&weights)
                .map(|(l, w)| l * w)
                .sum()
        };
        let g = |x: &[f64]| logprob_grad(&p.with_flat(x), &ep, &tokens, &weights).unwrap().to_flat();
        let err = crate::numerics::grad_check(f, g, &p.to_flat(), 1e-5).unwrap();
        assert!(err < 1e-5, "{err}");

        assert!(matches!(
            logprob_grad(&p, &ep, &tokens, &[1.0]),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn detection_score_cases() {
        let ep = episode(0);
        assert_eq!(detection_score(&PolicyParams::zeros(32), &ep).unwrap(), 0.5);
        assert_eq!(detection_score(&PolicyParams::format_prior(6.0, 32), &ep).unwrap(), 0.5);
        let mut p = PolicyParams::zeros(32);
        p.b[FAKE] = 10.0;
        assert!(detection_score(&p, &ep).unwrap() > 0.99);
    }

    #[test]
    fn format_prior_writes_valid_responses() {
        let p = PolicyParams::format_prior(6.0, 32);
        let ep = episode(0);
        let greedy = greedy_response(&p, &ep, 32).unwrap();
        assert_eq!(greedy.tokens[0], T_OPEN);
        let mut rng = RngStream::new(0);
        let valid = (0..200)
            .filter(|_| sample_response(&p, &ep, &mut rng, 1.0, 32).unwrap().parsed.answer != Answer::Malformed)
            .count();
        assert!(valid > 100, "{valid}");
    }

    #[test]
    fn checkpoint_round_trip_is_bit_exact() {
        let p = random_params(9, 1.0 / 3.0);
        let cb = crate::simulator::make_manifold(0, 4, 3).unwrap();
        let ck = Checkpoint::new(&p, &cb, serde_json::json!({"lr": 0.05}), RngStream::new(1).state(), 17);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ck.json");
        ck.save(&path).unwrap();
        let back = Checkpoint::load(&path).unwrap();
        assert_eq!(back, ck);
        let q = back.params().unwrap();
        assert!(p.w.iter().zip(&q.w).all(|(a, b)| a.to_bits() == b.to_bits()));
        assert_eq!(back.codebook().unwrap(), cb);
    }
}
