//! Response grammar and the four outcome rewards.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::policy::{tok, Response};
use crate::simulator::Label;

/// Full-scale length bounds for LLM-token responses; kept for reference.
pub const FULL_SCALE_L_MIN: usize = 320;
pub const FULL_SCALE_L_MAX: usize = 512;

/// Lower bound on `max_len` and `l_min`. One more than the shortest valid
/// response, so a budget always leaves room for at least one cue.
pub const MIN_LEN_BOUND: usize = 7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RewardConfig {
    pub alpha: f64,
    pub mu: f64,
    pub lambda: f64,
    pub l_min: usize,
    pub l_max: usize,
    /// Weights of (detection, temporal, length, format).
    pub weights: [f64; 4],
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            alpha: 0.3,
            mu: 0.8,
            lambda: 0.1,
            l_min: 8,
            l_max: 24,
            weights: [1.0; 4],
        }
    }
}

impl RewardConfig {
    pub fn validate(&self, max_len: usize) -> Result<()> {
        if !(self.alpha >= 0.0 && self.lambda >= 0.0) {
            return Err(Error::InvalidConfig("alpha and lambda must be nonnegative".into()));
        }
        if !(self.mu > 0.0 && self.mu <= 1.0) {
            return Err(Error::InvalidConfig(format!("mu must lie in (0, 1], got {}", self.mu)));
        }
        if !(MIN_LEN_BOUND <= self.l_min && self.l_min <= self.l_max && self.l_max <= max_len) {
            return Err(Error::InvalidConfig(format!(
                "length bounds need 7 <= l_min <= l_max <= max_len, got {} / {} / {max_len}",
                self.l_min, self.l_max
            )));
        }
        if self.weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::InvalidConfig("reward weights must be finite and nonnegative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Answer {
    Real,
    Fake,
    Malformed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Parsed {
    /// Token index range of the cue tokens between the think tags.
    pub think_span: Option<(usize, usize)>,
    pub answer: Answer,
}

impl Parsed {
    pub fn is_valid(&self) -> bool {
        self.answer != Answer::Malformed
    }
}

/// Accept exactly `T_OPEN C* T_CLOSE A_OPEN (REAL|FAKE) A_CLOSE EOS`.
pub fn parse_format(tokens: &[usize]) -> Parsed {
    let malformed = Parsed {
        think_span: None,
        answer: Answer::Malformed,
    };
    if tokens.first() != Some(&tok::T_OPEN) {
        return malformed;
    }
    let cues_end = 1 + tokens[1..].iter().take_while(|&&t| tok::is_cue(t)).count();
    let tail = &tokens[cues_end..];
    let answer = match tail {
        [tok::T_CLOSE, tok::A_OPEN, a, tok::A_CLOSE, tok::EOS] => match *a {
            tok::REAL => Answer::Real,
            tok::FAKE => Answer::Fake,
            _ => return malformed,
        },
        _ => return malformed,
    };
    Parsed {
        think_span: Some((1, cues_end)),
        answer,
    }
}

pub fn reward_accuracy(response: &Response, label: Label) -> f64 {
    let correct = matches!(
        (response.parsed.answer, label),
        (Answer::Real, Label::Real) | (Answer::Fake, Label::Fake)
    );
    if correct {
        1.0
    } else {
        0.0
    }
}

pub fn reward_length(response: &Response, cfg: &RewardConfig) -> f64 {
    let len = response.tokens.len();
    if (cfg.l_min..=cfg.l_max).contains(&len) {
        cfg.lambda
    } else {
        0.0
    }
}

pub fn reward_format(response: &Response) -> f64 {
    if response.parsed.is_valid() {
        1.0
    } else {
        0.0
    }
}

/// Temporal compensation reward for the ordered group.
///
/// With `p` the fraction of correct answers in each group, every correct
/// ordered response earns `alpha` iff `p_norm > mu * p_shuffle`.
pub fn reward_temporal(
    ordered: &[Response],
    shuffled: &[Response],
    label: Label,
    cfg: &RewardConfig,
) -> Result<Vec<f64>> {
    if ordered.is_empty() || ordered.len() != shuffled.len() {
        return Err(Error::InvalidInput(format!(
            "temporal reward needs equal nonempty groups, got {} ordered and {} shuffled",
            ordered.len(),
            shuffled.len()
        )));
    }
    let correct: Vec<f64> = ordered.iter().map(|r| reward_accuracy(r, label)).collect();
    let p_norm = correct.iter().sum::<f64>() / ordered.len() as f64;
    let p_shuffle = shuffled.iter().map(|r| reward_accuracy(r, label)).sum::<f64>() / shuffled.len() as f64;
    Ok(temporal_from_fractions(&correct, p_norm, p_shuffle, cfg))
}

pub(crate) fn temporal_from_fractions(
    correct: &[f64],
    p_norm: f64,
    p_shuffle: f64,
    cfg: &RewardConfig,
) -> Vec<f64> {
    let granted = p_norm > cfg.mu * p_shuffle;
    correct
        .iter()
        .map(|&c| if granted && c == 1.0 { cfg.alpha } else { 0.0 })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub r_det: f64,
    pub r_tmp: f64,
    pub r_len: f64,
    pub r_fmt: f64,
    pub total: f64,
}

pub fn combine(r_det: f64, r_tmp: f64, r_len: f64, r_fmt: f64, cfg: &RewardConfig) -> RewardBreakdown {
    let w = cfg.weights;
    RewardBreakdown {
        r_det,
        r_tmp,
        r_len,
        r_fmt,
        total: w[0] * r_det + w[1] * r_tmp + w[2] * r_len + w[3] * r_fmt,
    }
}
