//! Group-relative policy optimization for detecting synthetic human video.
//!
//! Clips are simulated as sequences of frame feature vectors. A dual encoder
//! turns each clip into a fused vector of temporal statistics and vector
//! quantization residual statistics, and a small autoregressive policy
//! learns to answer `REAL` or `FAKE` inside a think/answer response grammar.
//! Training uses clipped group-relative policy optimization with detection,
//! temporal compensation, length and format rewards.
//!
//! ```no_run
//! use clipguard::{build_dataset, evaluate_params, train_in_memory, GeneratorConfig, GrpoConfig, Protocol};
//!
//! let data = build_dataset(&GeneratorConfig::default(), 0)?;
//! let run = train_in_memory(&GrpoConfig::default(), &data)?;
//! let (report, _) = evaluate_params(&run.state.params, &run.codebook, &data, &Protocol::InDomain, Default::default())?;
//! println!("held-out AUC {:.3}", report.auc);
//! # Ok::<(), clipguard::Error>(())
//! ```

pub mod cli;
pub mod encoders;
pub mod error;
pub mod eval;
pub mod grpo;
pub mod numerics;
pub mod policy;
pub mod rewards;
pub mod simulator;

pub use encoders::{fit_codebook, fuse, Codebook, CodebookSource, Episode, FuseMode, Ordering};
pub use error::{Error, Result};
pub use eval::{auc, compare_reports, evaluate, evaluate_params, EvalReport, Protocol};
pub use grpo::{train, train_in_memory, train_step, GroupRollout, GrpoConfig, TrainState};
pub use numerics::RngStream;
pub use policy::{detection_score, Checkpoint, PolicyParams, Response};
pub use rewards::RewardConfig;
pub use simulator::{build_dataset, DatasetManifest, Family, GeneratorConfig, Label, VideoClip};
