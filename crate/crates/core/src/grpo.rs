//! Group relative policy optimization.
//!
//! For each episode the old policy samples `N` responses on the ordered clip
//! and `N` on a frame-shuffled copy. Rewards of the ordered group are
//! normalized within the group into advantages, and the policy ascends the
//! clipped surrogate minus a per-token KL penalty against a reference
//! snapshot. Shuffled responses only feed the temporal reward.

use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::encoders::{fit_codebook, fuse, Codebook, CodebookSource, Episode, FuseMode, Ordering};
use crate::error::{Error, Result};
use crate::numerics::{stats, RngStream};
use crate::policy::{
    accumulate_logprob_grad, sample_response, sequence_logprob, Checkpoint, PolicyGrad, PolicyParams,
    Response, DEFAULT_MAX_LEN,
};
use crate::rewards::{
    combine, reward_accuracy, reward_format, reward_length, reward_temporal, RewardBreakdown, RewardConfig,
};
use crate::simulator::{DatasetManifest, Label, VideoClip};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RefRefresh {
    Never,
    EveryKSteps(u64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GrpoConfig {
    /// Responses per group (N).
    pub group_size: usize,
    pub epsilon: f64,
    pub beta: f64,
    pub inner_updates: usize,
    pub lr: f64,
    pub temperature: f64,
    pub ref_refresh: RefRefresh,
    pub steps: u64,
    pub seed: u64,
    /// Episodes per step.
    pub batch_size: usize,
    pub reward: RewardConfig,
    pub ablate_tcr: bool,
    pub mode: FuseMode,
    pub max_len: usize,
    /// Logit margin of the grammar prior the policy starts from.
    pub init_margin: f64,
    pub codebook: CodebookSource,
}

impl Default for GrpoConfig {
    fn default() -> Self {
        Self {
            group_size: 8,
            epsilon: 0.2,
            beta: 0.04,
            inner_updates: 1,
            lr: 0.05,
            temperature: 1.0,
            ref_refresh: RefRefresh::Never,
            steps: 300,
            seed: 0,
            batch_size: 4,
            reward: RewardConfig::default(),
            ablate_tcr: false,
            mode: FuseMode::Full,
            max_len: DEFAULT_MAX_LEN,
            init_margin: 6.0,
            codebook: CodebookSource::Manifold,
        }
    }
}

impl GrpoConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.group_size < 2 {
            return bad(format!("group_size must be at least 2, got {}", self.group_size));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return bad(format!("epsilon must lie in (0, 1), got {}", self.epsilon));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return bad(format!("beta must be finite and nonnegative, got {}", self.beta));
        }
        if self.inner_updates < 1 {
            return bad("inner_updates must be at least 1".into());
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return bad(format!("lr must be finite and nonnegative, got {}", self.lr));
        }
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return bad(format!("temperature must be positive, got {}", self.temperature));
        }
        if self.batch_size < 1 {
            return bad("batch_size must be at least 1".into());
        }
        if self.ref_refresh == RefRefresh::EveryKSteps(0) {
            return bad("ref_refresh every 0 steps".into());
        }
        if !self.init_margin.is_finite() {
            return bad("init_margin must be finite".into());
        }
        self.reward.validate(self.max_len)
    }

    pub fn initial_params(&self) -> PolicyParams {
        PolicyParams::format_prior(self.init_margin, self.max_len)
    }
}

/// One episode's sampled groups and everything the update needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupRollout {
    pub episode: Episode,
    pub shuffled_episode: Episode,
    pub responses: Vec<Response>,
    pub shuffled_responses: Vec<Response>,
    pub rewards: Vec<RewardBreakdown>,
    pub advantages: Vec<f64>,
    pub old_logprobs: Vec<Vec<f64>>,
    pub ref_logprobs: Vec<Vec<f64>>,
}

impl GroupRollout {
    /// Fraction of correct answers in the ordered and shuffled groups.
    pub fn accuracies(&self) -> (f64, f64) {
        let frac = |rs: &[Response]| {
            rs.iter().map(|r| reward_accuracy(r, self.episode.label)).sum::<f64>() / rs.len() as f64
        };
        (frac(&self.responses), frac(&self.shuffled_responses))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepMetrics {
    pub step: u64,
    pub mean_total: f64,
    pub mean_det: f64,
    pub mean_tmp: f64,
    pub mean_len: f64,
    pub mean_fmt: f64,
    pub mean_kl: f64,
    pub clip_fraction: f64,
    pub loss: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainState {
    pub params: PolicyParams,
    pub ref_params: PolicyParams,
    pub step: u64,
    /// Root stream; every step derives its randomness from `rng.split(step)`.
    pub rng: RngStream,
    pub metrics_log: Vec<StepMetrics>,
}

impl TrainState {
    pub fn new(params: PolicyParams, seed: u64) -> Self {
        Self {
            ref_params: params.clone(),
            params,
            step: 0,
            rng: RngStream::new(seed),
            metrics_log: Vec::new(),
        }
    }
}

/// `(r - mean) / std` with population std; all zeros for a degenerate group.
pub fn compute_advantages(totals: &[f64]) -> Result<Vec<f64>> {
    if totals.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "advantages need a group of at least 2, got {}",
            totals.len()
        )));
    }
    let s = stats(totals)?;
    if s.std < 1e-12 {
        return Ok(vec![0.0; totals.len()]);
    }
    Ok(totals.iter().map(|r| (r - s.mean) / s.std).collect())
}

/// Per-token `exp(ref - pol) - (ref - pol) - 1`.
pub fn kl_term(policy_lp: &[f64], ref_lp: &[f64]) -> Result<Vec<f64>> {
    if policy_lp.len() != ref_lp.len() {
        return Err(Error::InvalidInput(format!(
            "KL inputs misaligned: {} vs {}",
            policy_lp.len(),
            ref_lp.len()
        )));
    }
    Ok(policy_lp
        .iter()
        .zip(ref_lp)
        .map(|(p, r)| {
            let d = r - p;
            // exp_m1 keeps the estimator exactly zero at d = 0 and accurate near it.
            (d.exp_m1() - d).max(0.0)
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossAndGrad {
    /// `-J` for one group.
    pub loss: f64,
    /// Gradient of `loss`.
    pub grad: PolicyGrad,
    /// Mean per-token KL to the reference.
    pub mean_kl: f64,
    pub clipped_tokens: usize,
    pub total_tokens: usize,
}

/// Whether the clipped branch of `min(ρA, clip(ρ)A)` is strictly active.
pub fn clip_binds(ratio: f64, advantage: f64, epsilon: f64) -> bool {
    (advantage > 0.0 && ratio > 1.0 + epsilon) || (advantage < 0.0 && ratio < 1.0 - epsilon)
}

/// Loss and gradient for one group.
///
/// `J = (1/N) Σ_i (1/|o_i|) Σ_t [min(ρA, clip(ρ, 1-ε, 1+ε)A) - β KL_t]`.
/// Since `∂ρ/∂lp = ρ` and `∂KL/∂lp = 1 - exp(ref - lp)`, each token's
/// log-probability gradient is weighted by
/// `(ρA·[clip inactive] - β(1 - exp(ref - lp))) / (N|o_i|)`.
pub fn grpo_loss_and_grad(params: &PolicyParams, rollout: &GroupRollout, cfg: &GrpoConfig) -> Result<LossAndGrad> {
    let n = rollout.responses.len();
    if n == 0
        || rollout.advantages.len() != n
        || rollout.old_logprobs.len() != n
        || rollout.ref_logprobs.len() != n
    {
        return Err(Error::InvalidInput("rollout arrays do not match the group size".into()));
    }
    let mut j = 0.0;
    let mut kl_sum = 0.0;
    let mut clipped = 0;
    let mut total = 0;
    let mut grad = PolicyGrad::default();
    for (i, resp) in rollout.responses.iter().enumerate() {
        let len = resp.tokens.len();
        let (old, refl) = (&rollout.old_logprobs[i], &rollout.ref_logprobs[i]);
        if old.len() != len || refl.len() != len {
            return Err(Error::InvalidInput(format!("response {i}: logprob arrays misaligned")));
        }
        let lp = sequence_logprob(params, &rollout.episode, &resp.tokens)?;
        let kl = kl_term(&lp, refl)?;
        let a = rollout.advantages[i];
        let c = 1.0 / (n * len) as f64;
        let mut weights = Vec::with_capacity(len);
        for t in 0..len {
            let ratio = (lp[t] - old[t]).exp();
            let clipped_ratio = ratio.clamp(1.0 - cfg.epsilon, 1.0 + cfg.epsilon);
            let surrogate = (ratio * a).min(clipped_ratio * a);
            let binds = clip_binds(ratio, a, cfg.epsilon);
            clipped += usize::from(binds);
            j += c * (surrogate - cfg.beta * kl[t]);
            kl_sum += kl[t];
            let d_surr = if binds { 0.0 } else { ratio * a };
            let d_kl = 1.0 - (refl[t] - lp[t]).exp();
            // Descent direction for the loss -J.
            weights.push(-c * (d_surr - cfg.beta * d_kl));
        }
        total += len;
        if !weights.iter().all(|w| w.is_finite()) {
            return Err(Error::NumericalFailure(format!(
                "non-finite token weight in response {i} (advantage {a}, logprobs {lp:?})"
            )));
        }
        accumulate_logprob_grad(&mut grad, params, &rollout.episode, &resp.tokens, &weights)?;
    }
    if !j.is_finite() || !grad.is_finite() {
        return Err(Error::NumericalFailure(format!(
            "non-finite objective {j} for episode {}",
            rollout.episode.clip_id
        )));
    }
    Ok(LossAndGrad {
        loss: -j,
        grad,
        mean_kl: kl_sum / total as f64,
        clipped_tokens: clipped,
        total_tokens: total,
    })
}

/// Sample both groups for one clip and score them.
pub fn rollout_group(
    old: &PolicyParams,
    reference: &PolicyParams,
    episode: &Episode,
    clip: &VideoClip,
    codebook: &Codebook,
    rng: &RngStream,
    cfg: &GrpoConfig,
) -> Result<GroupRollout> {
    let n = cfg.group_size;
    let shuffled_episode = fuse(clip, codebook, Ordering::Shuffled, Some(&mut rng.split(0)), cfg.mode)?;
    let sample = |ep: &Episode, id: u64| {
        sample_response(old, ep, &mut rng.split(id), cfg.temperature, cfg.max_len)
    };
    let responses = (0..n).map(|i| sample(episode, 1 + i as u64)).collect::<Result<Vec<_>>>()?;
    let shuffled_responses = (0..n)
        .map(|i| sample(&shuffled_episode, 1 + (n + i) as u64))
        .collect::<Result<Vec<_>>>()?;

    let label = episode.label;
    let r_tmp = if cfg.ablate_tcr {
        vec![0.0; n]
    } else {
        reward_temporal(&responses, &shuffled_responses, label, &cfg.reward)?
    };
    let rewards: Vec<RewardBreakdown> = responses
        .iter()
        .zip(&r_tmp)
        .map(|(r, &tmp)| {
            combine(
                reward_accuracy(r, label),
                tmp,
                reward_length(r, &cfg.reward),
                reward_format(r),
                &cfg.reward,
            )
        })
        .collect();
    let totals: Vec<f64> = rewards.iter().map(|r| r.total).collect();
    let advantages = compute_advantages(&totals)?;
    let old_logprobs = responses.iter().map(|r| r.logprobs.clone()).collect();
    let ref_logprobs = if reference == old {
        responses.iter().map(|r| r.logprobs.clone()).collect()
    } else {
        responses
            .iter()
            .map(|r| sequence_logprob(reference, episode, &r.tokens))
            .collect::<Result<_>>()?
    };
    Ok(GroupRollout {
        episode: episode.clone(),
        shuffled_episode,
        responses,
        shuffled_responses,
        rewards,
        advantages,
        old_logprobs,
        ref_logprobs,
    })
}

/// One optimization step over a batch of clips with precomputed ordered
/// episodes. Returns the step's rollouts for inspection.
pub fn train_step(
    state: &mut TrainState,
    batch: &[(&VideoClip, &Episode)],
    codebook: &Codebook,
    cfg: &GrpoConfig,
) -> Result<Vec<GroupRollout>> {
    if batch.is_empty() {
        return Err(Error::InvalidInput("empty batch".into()));
    }
    let step_rng = state.rng.split(state.step);
    let old = state.params.clone();
    let rollouts = batch
        .par_iter()
        .enumerate()
        .map(|(e, (clip, episode))| {
            rollout_group(&old, &state.ref_params, episode, clip, codebook, &step_rng.split(e as u64), cfg)
        })
        .collect::<Result<Vec<_>>>()?;

    let scale = 1.0 / rollouts.len() as f64;
    let (mut first_loss, mut first_kl) = (0.0, 0.0);
    let (mut clipped, mut tokens) = (0usize, 0usize);
    for k in 0..cfg.inner_updates {
        let parts = rollouts
            .par_iter()
            .map(|r| grpo_loss_and_grad(&state.params, r, cfg))
            .collect::<Result<Vec<_>>>()?;
        let mut grad = PolicyGrad::default();
        let (mut loss, mut kl) = (0.0, 0.0);
        for p in &parts {
            grad.add(&p.grad);
            loss += p.loss;
            kl += p.mean_kl;
            clipped += p.clipped_tokens;
            tokens += p.total_tokens;
        }
        if k == 0 {
            first_loss = loss * scale;
            first_kl = kl * scale;
        }
        state.params.add_scaled(&grad, -cfg.lr * scale);
    }

    let all: Vec<&RewardBreakdown> = rollouts.iter().flat_map(|r| &r.rewards).collect();
    let mean = |f: fn(&RewardBreakdown) -> f64| all.iter().map(|r| f(r)).sum::<f64>() / all.len() as f64;
    let metrics = StepMetrics {
        step: state.step,
        mean_total: mean(|r| r.total),
        mean_det: mean(|r| r.r_det),
        mean_tmp: mean(|r| r.r_tmp),
        mean_len: mean(|r| r.r_len),
        mean_fmt: mean(|r| r.r_fmt),
        mean_kl: first_kl,
        clip_fraction: clipped as f64 / tokens.max(1) as f64,
        loss: first_loss,
    };
    state.metrics_log.push(metrics);
    state.step += 1;
    if let RefRefresh::EveryKSteps(k) = cfg.ref_refresh {
        if state.step.is_multiple_of(k) {
            state.ref_params = state.params.clone();
        }
    }
    Ok(rollouts)
}

/// Codebook used for training and evaluation under `cfg`.
pub fn training_codebook(dataset: &DatasetManifest, cfg: &GrpoConfig) -> Result<Codebook> {
    let manifold = dataset.manifold()?;
    match cfg.codebook {
        CodebookSource::Manifold => Ok(manifold),
        CodebookSource::Fitted => {
            let frames: Vec<Vec<f64>> = dataset
                .train()
                .into_iter()
                .filter(|c| c.label == Label::Fake)
                .flat_map(|c| c.frames.iter().cloned())
                .collect();
            fit_codebook(&frames, manifold.k(), 25, &mut RngStream::new(cfg.seed).split(2))
        }
    }
}

/// Episode order: concatenated epochs, each a fresh seeded permutation.
pub fn episode_schedule(n: usize, steps: u64, batch: usize, seed: u64) -> Vec<Vec<usize>> {
    let order_rng = RngStream::new(seed).split(3);
    let mut queue: Vec<usize> = Vec::new();
    let mut epoch = 0;
    let needed = steps as usize * batch;
    while queue.len() < needed {
        queue.extend(order_rng.split(epoch).permutation(n));
        epoch += 1;
    }
    queue.chunks(batch).take(steps as usize).map(<[usize]>::to_vec).collect()
}

pub fn metrics_path(checkpoint: &Path) -> PathBuf {
    checkpoint.with_extension("metrics.jsonl")
}

/// Everything a training run produces.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub state: TrainState,
    pub codebook: Codebook,
    pub checkpoint: Checkpoint,
}

/// Train without touching the filesystem.
pub fn train_in_memory(cfg: &GrpoConfig, dataset: &DatasetManifest) -> Result<TrainOutcome> {
    train_with(cfg, dataset, |_, _| {})
}

/// Train, calling `on_step` after every step with the state and rollouts.
pub fn train_with<F>(cfg: &GrpoConfig, dataset: &DatasetManifest, mut on_step: F) -> Result<TrainOutcome>
where
    F: FnMut(&TrainState, &[GroupRollout]),
{
    cfg.validate()?;
    let clips = dataset.train();
    if clips.is_empty() {
        return Err(Error::InvalidInput("dataset has no training clips".into()));
    }
    let codebook = training_codebook(dataset, cfg)?;
    let episodes = clips
        .par_iter()
        .map(|c| fuse(c, &codebook, Ordering::Ordered, None, cfg.mode))
        .collect::<Result<Vec<_>>>()?;
    let mut state = TrainState::new(cfg.initial_params(), cfg.seed);
    for idx in episode_schedule(clips.len(), cfg.steps, cfg.batch_size, cfg.seed) {
        let batch: Vec<(&VideoClip, &Episode)> = idx.iter().map(|&i| (clips[i], &episodes[i])).collect();
        let rollouts = train_step(&mut state, &batch, &codebook, cfg)?;
        on_step(&state, &rollouts);
    }
    let config = serde_json::json!({
        "grpo": cfg,
        "dataset_seed": dataset.seed,
        "generator": dataset.config,
    });
    let checkpoint = Checkpoint::new(&state.params, &codebook, config, state.rng.state(), state.step);
    Ok(TrainOutcome {
        state,
        codebook,
        checkpoint,
    })
}

pub fn write_metrics(path: &Path, metrics: &[StepMetrics]) -> Result<()> {
    let mut out = Vec::new();
    for m in metrics {
        serde_json::to_writer(&mut out, m).expect("metrics serialize");
        out.push(b'\n');
    }
    let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(&out).map_err(|e| Error::io(path, e))
}

/// Train and write the checkpoint to `out` and the metrics log next to it.
pub fn train(cfg: &GrpoConfig, dataset: &DatasetManifest, out: &Path) -> Result<TrainState> {
    let outcome = train_in_memory(cfg, dataset)?;
    outcome.checkpoint.save(out)?;
    write_metrics(&metrics_path(out), &outcome.state.metrics_log)?;
    Ok(outcome.state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::tok::*;
    use crate::simulator::{build_dataset, Family, GeneratorConfig};

    #[test]
    fn advantage_examples() {
        assert_eq!(compute_advantages(&[1.0, 0.0, 1.0, 0.0]).unwrap(), vec![1.0, -1.0, 1.0, -1.0]);
        assert_eq!(compute_advantages(&[2.4, 2.4, 2.4]).unwrap(), vec![0.0; 3]);
        let a = compute_advantages(&[2.4, 1.0, 0.0, 0.1]).unwrap();
        let s = stats(&a).unwrap();
        assert!(s.mean.abs() < 1e-9 && (s.std - 1.0).abs() < 1e-9);
        assert!(matches!(compute_advantages(&[1.0]), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn kl_examples() {
        assert_eq!(kl_term(&[-1.0, -2.0], &[-1.0, -2.0]).unwrap(), vec![0.0, 0.0]);
        let ln2 = std::f64::consts::LN_2;
        let k = kl_term(&[-1.0 - ln2], &[-1.0]).unwrap()[0];
        // e^{ln 2} - ln 2 - 1 = 1 - ln 2.
        assert!((k - (1.0 - ln2)).abs() < 1e-12);
        assert!(kl_term(&[0.0], &[]).is_err());
    }

    fn tiny_rollout(params: &PolicyParams) -> GroupRollout {
        let ep = Episode {
            clip_id: "x".into(),
            features: (0..15).map(|i| (i as f64 * 0.37).sin()).collect(),
            label: Label::Fake,
            family: Family::Pose,
            ordering: Ordering::Ordered,
            shuffle_seed: None,
        };
        let seqs = [
            vec![T_OPEN, C1, T_CLOSE, A_OPEN, FAKE, A_CLOSE, EOS],
            vec![T_OPEN, T_CLOSE, A_OPEN, REAL, A_CLOSE, EOS],
            vec![C2, C2, EOS],
        ];
        let responses: Vec<Response> = seqs
            .iter()
            .map(|s| Response::from_tokens(s.clone(), sequence_logprob(params, &ep, s).unwrap()))
            .collect();
        let lps: Vec<Vec<f64>> = responses.iter().map(|r| r.logprobs.clone()).collect();
        GroupRollout {
            shuffled_episode: ep.clone(),
            episode: ep,
            shuffled_responses: responses.clone(),
            rewards: vec![],
            advantages: vec![1.2, -0.3, -0.9],
            old_logprobs: lps.clone(),
            ref_logprobs: lps,
            responses,
        }
    }

    #[test]
    fn ratio_one_reduces_to_mean_advantage() {
        let p = PolicyParams::format_prior(2.0, 32);
        let r = tiny_rollout(&p);
        let out = grpo_loss_and_grad(&p, &r, &GrpoConfig::default()).unwrap();
        let expect = -(1.2 - 0.3 - 0.9) / 3.0;
        assert!((out.loss - expect).abs() < 1e-12);
        assert_eq!(out.mean_kl, 0.0);
        assert_eq!(out.clipped_tokens, 0);
    }

    #[test]
    fn zero_advantage_zero_gradient() {
        let p = PolicyParams::format_prior(2.0, 32);
        let mut r = tiny_rollout(&p);
        r.advantages = vec![0.0; 3];
        let out = grpo_loss_and_grad(&p, &r, &GrpoConfig::default()).unwrap();
        assert_eq!(out.loss, 0.0);
        assert!(out.grad.to_flat().iter().all(|&g| g == 0.0));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let base = PolicyParams::format_prior(1.0, 32);
        let mut rng = RngStream::new(11);
        let mut r = tiny_rollout(&base);
        for lps in r.old_logprobs.iter_mut().chain(r.ref_logprobs.iter_mut()) {
            lps.iter_mut().for_each(|l| *l += 0.3 * rng.normal());
        }
        let p = base.with_flat(&base.to_flat().iter().map(|x| x + 0.1 * rng.normal()).collect::<Vec<_>>());
        let cfg = GrpoConfig {
            beta: 0.5,
            ..Default::default()
        };
        let f = |x: &[f64]| grpo_loss_and_grad(&p.with_flat(x), &r, &cfg).unwrap().loss;
        let g = |x: &[f64]| grpo_loss_and_grad(&p.with_flat(x), &r, &cfg).unwrap().grad.to_flat();
        let err = crate::numerics::grad_check(f, g, &p.to_flat(), 1e-5).unwrap();
        assert!(err < 1e-4, "{err}");
    }

    #[test]
    fn schedule_covers_epochs() {
        let s = episode_schedule(10, 5, 4, 0);
        assert_eq!(s.len(), 5);
        let first: std::collections::HashSet<usize> = s.iter().flatten().take(10).copied().collect();
        assert_eq!(first.len(), 10);
        assert_eq!(s, episode_schedule(10, 5, 4, 0));
    }

    fn small_dataset() -> DatasetManifest {
        let cfg = GeneratorConfig {
            clips_per_family: 20,
            ..Default::default()
        };
        build_dataset(&cfg, 0).unwrap()
    }

    #[test]
    fn zero_lr_keeps_params_and_logs() {
        let cfg = GrpoConfig {
            lr: 0.0,
            steps: 3,
            ..Default::default()
        };
        let out = train_in_memory(&cfg, &small_dataset()).unwrap();
        let init = cfg.initial_params();
        assert_eq!(out.state.params.w, init.w);
        assert_eq!(out.state.params.b, init.b);
        assert_eq!(out.state.metrics_log.len(), 3);
    }

    #[test]
    fn zero_steps_is_initialization() {
        let cfg = GrpoConfig {
            steps: 0,
            ..Default::default()
        };
        let out = train_in_memory(&cfg, &small_dataset()).unwrap();
        assert_eq!(out.checkpoint.params().unwrap(), cfg.initial_params());
    }

    #[test]
    fn training_is_deterministic() {
        let cfg = GrpoConfig {
            steps: 4,
            ..Default::default()
        };
        let ds = small_dataset();
        let a = train_in_memory(&cfg, &ds).unwrap();
        let b = train_in_memory(&cfg, &ds).unwrap();
        assert_eq!(a.state, b.state);
        assert_eq!(a.checkpoint.to_json(), b.checkpoint.to_json());
    }

    #[test]
    fn invalid_config_rejected() {
        for cfg in [
            GrpoConfig {
                group_size: 1,
                ..Default::default()
            },
            GrpoConfig {
                epsilon: 1.0,
                ..Default::default()
            },
            GrpoConfig {
                beta: -0.1,
                ..Default::default()
            },
        ] {
            assert!(matches!(cfg.validate(), Err(Error::InvalidConfig(_))));
        }
    }
}
