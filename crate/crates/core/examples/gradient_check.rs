//! Check the analytic GRPO gradient against central finite differences on
//! random small groups.
//!
//! ```text
//! cargo run --release --example gradient_check -- [instances]
//! ```

use clipguard::encoders::{Episode, Ordering, EPISODE_DIM};
use clipguard::grpo::{compute_advantages, grpo_loss_and_grad, GroupRollout};
use clipguard::numerics::grad_check;
use clipguard::policy::{sample_response, sequence_logprob};
use clipguard::{Family, GrpoConfig, Label, PolicyParams, RngStream};

fn random_rollout(rng: &mut RngStream, params: &PolicyParams) -> clipguard::Result<GroupRollout> {
    let mut features: Vec<f64> = (0..EPISODE_DIM - 1).map(|_| rng.normal()).collect();
    features.push(1.0);
    let episode = Episode {
        clip_id: "random".into(),
        features,
        label: Label::Fake,
        family: Family::Pose,
        ordering: Ordering::Ordered,
        shuffle_seed: None,
    };
    let responses = (0..4)
        .map(|i| sample_response(params, &episode, &mut rng.split(i), 1.0, 10))
        .collect::<clipguard::Result<Vec<_>>>()?;
    let totals: Vec<f64> = (0..4).map(|_| rng.uniform_range(0.0, 2.4)).collect();
    // Old and reference policies differ from the current one so that ratios,
    // clipping and the KL term are all exercised.
    let jitter = |lps: &[f64], rng: &mut RngStream| lps.iter().map(|l| l + 0.3 * rng.normal()).collect();
    let old_logprobs = responses.iter().map(|r| jitter(&r.logprobs, rng)).collect();
    let ref_logprobs = responses.iter().map(|r| jitter(&r.logprobs, rng)).collect();
    Ok(GroupRollout {
        shuffled_episode: episode.clone(),
        shuffled_responses: responses.clone(),
        rewards: Vec::new(),
        advantages: compute_advantages(&totals)?,
        old_logprobs,
        ref_logprobs,
        episode,
        responses,
    })
}

fn main() -> clipguard::Result<()> {
    let n: u64 = std::env::args().nth(1).map_or(50, |s| s.parse().expect("instances"));
    let cfg = GrpoConfig::default();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        let mut rng = RngStream::new(i);
        let base = PolicyParams::format_prior(2.0, 32);
        let flat: Vec<f64> = base.to_flat().iter().map(|x| x + 0.1 * rng.normal()).collect();
        let params = base.with_flat(&flat);
        let rollout = random_rollout(&mut rng, &params)?;
        // Recorded log-probabilities must match teacher forcing.
        for r in &rollout.responses {
            let lp = sequence_logprob(&params, &rollout.episode, &r.tokens)?;
            assert!(lp.iter().zip(&r.logprobs).all(|(a, b)| (a - b).abs() < 1e-12));
        }
        let loss = |x: &[f64]| grpo_loss_and_grad(&params.with_flat(x), &rollout, &cfg).map(|o| o.loss).unwrap_or(f64::NAN);
        let grad = |x: &[f64]| grpo_loss_and_grad(&params.with_flat(x), &rollout, &cfg).expect("gradient").grad.to_flat();
        let err = grad_check(loss, grad, &flat, 1e-5)?;
        worst = worst.max(err);
        if i < 5 {
            println!("instance {i}: max relative error {err:.2e}");
        }
    }
    println!("{n} instances, worst relative error {worst:.2e}");
    Ok(())
}
