//! Command-line front end: `gen-data`, `train`, `eval`, `inspect`.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

use crate::encoders::{fuse, residual_frames, CodebookSource, FuseMode, Ordering};
use crate::error::{Error, Result};
use crate::eval::{evaluate, roc_points, roc_text, Protocol};
use crate::grpo::{metrics_path, train_in_memory, write_metrics, GrpoConfig, training_codebook};
use crate::numerics::{norm, RngStream};
use crate::policy::Checkpoint;
use crate::simulator::{build_dataset, parse_families, DatasetManifest, Family, GeneratorConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_NUMERIC: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "clipguard", version, about = "Train and evaluate group-relative policy detectors on simulated clips")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a simulated dataset as JSON lines.
    GenData(GenDataArgs),
    /// Train a policy and write a checkpoint plus metrics log.
    Train(TrainArgs),
    /// Score the test split and write a JSON report.
    Eval(EvalArgs),
    /// Print per-frame residual statistics and fused features of one clip.
    Inspect(InspectArgs),
}

#[derive(Debug, Args)]
struct Overrides {
    /// JSON file with configuration keys; explicit flags win.
    #[arg(long = "config")]
    config: Option<PathBuf>,
    /// `key=value` override; nested keys use dots, e.g. `reward.alpha=0.2`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Debug, Args)]
struct GenDataArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    clips_per_family: Option<usize>,
    /// Comma-separated subset of pose,audio,text.
    #[arg(long)]
    families: Option<String>,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    steps: Option<u64>,
    #[arg(long)]
    group_size: Option<usize>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    inner_updates: Option<usize>,
    #[arg(long)]
    temperature: Option<f64>,
    /// full, no_residual or reconstruction.
    #[arg(long)]
    mode: Option<String>,
    /// Disable the temporal compensation reward.
    #[arg(long)]
    no_tcr: bool,
    /// Train only on these families.
    #[arg(long)]
    families: Option<String>,
    /// Keep at most this many training clips per family and label.
    #[arg(long)]
    train_per_class: Option<usize>,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// in_domain, cross_domain or ablation.
    #[arg(long, default_value = "in_domain")]
    protocol: String,
    #[arg(long)]
    train_families: Option<String>,
    #[arg(long)]
    test_families: Option<String>,
    /// Tag recorded for the ablation protocol; defaults to the mode.
    #[arg(long)]
    tag: Option<String>,
    /// Override the fusion mode recorded in the checkpoint.
    #[arg(long)]
    mode: Option<String>,
    /// Also write (fpr, tpr) points to this file.
    #[arg(long)]
    emit_roc: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct InspectArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    clip_id: String,
    /// `manifold`, `fitted`, or a checkpoint path.
    #[arg(long, default_value = "manifold")]
    codebook: String,
    /// Seed of the shuffled variant.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "full")]
    mode: String,
    /// Write the table here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Run the CLI and return the process exit code.
pub fn run<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let result = match cli.command {
        Command::GenData(a) => gen_data(a),
        Command::Train(a) => train_cmd(a),
        Command::Eval(a) => eval_cmd(a),
        Command::Inspect(a) => inspect_cmd(a),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::InvalidInput(_) | Error::InvalidConfig(_) => EXIT_CONFIG,
        Error::Io { .. } | Error::Format { .. } => EXIT_IO,
        Error::NumericalFailure(_) => EXIT_NUMERIC,
    }
}

/// Serialize `base`, merge the config file and `--set` pairs into it, and
/// deserialize back. Keys absent from `base` are rejected.
fn apply_overrides<T: Serialize + DeserializeOwned>(base: &T, ov: &Overrides) -> Result<T> {
    let mut value = serde_json::to_value(base).expect("config serializes");
    if let Some(path) = &ov.config {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let patch: Value = serde_json::from_str(&text).map_err(|e| Error::format(path, e))?;
        merge(&mut value, patch, "")?;
    }
    for pair in &ov.set {
        let (key, raw) = pair
            .split_once('=')
            .ok_or_else(|| Error::InvalidConfig(format!("override {pair:?} is not key=value")))?;
        let parsed = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
        let mut patch = parsed;
        for part in key.split('.').rev() {
            patch = Value::Object([(part.to_string(), patch)].into_iter().collect());
        }
        merge(&mut value, patch, "")?;
    }
    serde_json::from_value(value).map_err(|e| Error::InvalidConfig(e.to_string()))
}

fn merge(target: &mut Value, patch: Value, prefix: &str) -> Result<()> {
    match (target, patch) {
        (Value::Object(t), Value::Object(p)) => {
            for (k, v) in p {
                let path = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                let slot = t
                    .get_mut(&k)
                    .ok_or_else(|| Error::InvalidConfig(format!("unknown config key {path:?}")))?;
                merge(slot, v, &path)?;
            }
            Ok(())
        }
        (slot, v) => {
            *slot = v;
            Ok(())
        }
    }
}

fn gen_data(a: GenDataArgs) -> Result<()> {
    let mut cfg = apply_overrides(&GeneratorConfig::default(), &a.overrides)?;
    if let Some(n) = a.clips_per_family {
        cfg.clips_per_family = n;
    }
    if let Some(f) = &a.families {
        cfg.families = parse_families(f)?;
    }
    let ds = build_dataset(&cfg, a.seed)?;
    ds.write_jsonl(&a.out)?;
    eprintln!(
        "wrote {} clips ({} train / {} test) to {}",
        ds.clips.len(),
        ds.train().len(),
        ds.test().len(),
        a.out.display()
    );
    Ok(())
}

fn train_config(a: &TrainArgs) -> Result<GrpoConfig> {
    let mut cfg = apply_overrides(&GrpoConfig::default(), &a.overrides)?;
    if let Some(v) = a.seed {
        cfg.seed = v;
    }
    if let Some(v) = a.steps {
        cfg.steps = v;
    }
    if let Some(v) = a.group_size {
        cfg.group_size = v;
    }
    if let Some(v) = a.beta {
        cfg.beta = v;
    }
    if let Some(v) = a.epsilon {
        cfg.epsilon = v;
    }
    if let Some(v) = a.lr {
        cfg.lr = v;
    }
    if let Some(v) = a.batch_size {
        cfg.batch_size = v;
    }
    if let Some(v) = a.inner_updates {
        cfg.inner_updates = v;
    }
    if let Some(v) = a.temperature {
        cfg.temperature = v;
    }
    if let Some(m) = &a.mode {
        cfg.mode = m.parse()?;
    }
    if a.no_tcr {
        cfg.ablate_tcr = true;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Training subset selected by `--families` and `--train-per-class`.
pub fn training_subset(
    ds: &DatasetManifest,
    families: Option<&[Family]>,
    per_class: Option<usize>,
) -> DatasetManifest {
    let mut out = match families {
        Some(f) => ds.filter_families(f),
        None => ds.clone(),
    };
    if let Some(n) = per_class {
        out = out.subsample_train(n);
    }
    out
}

fn train_cmd(a: TrainArgs) -> Result<()> {
    let cfg = train_config(&a)?;
    let ds = DatasetManifest::read_jsonl(&a.data)?;
    let families = a.families.as_deref().map(parse_families).transpose()?;
    let subset = training_subset(&ds, families.as_deref(), a.train_per_class);
    let outcome = train_in_memory(&cfg, &subset)?;
    outcome.checkpoint.save(&a.out)?;
    let metrics = metrics_path(&a.out);
    write_metrics(&metrics, &outcome.state.metrics_log)?;
    if let Some(last) = outcome.state.metrics_log.last() {
        eprintln!(
            "step {}: mean reward {:.3}, accuracy {:.3}, kl {:.4}",
            last.step, last.mean_total, last.mean_det, last.mean_kl
        );
    }
    eprintln!("wrote {} and {}", a.out.display(), metrics.display());
    Ok(())
}

fn parse_protocol(a: &EvalArgs, mode: FuseMode) -> Result<Protocol> {
    match a.protocol.as_str() {
        "in_domain" => Ok(Protocol::InDomain),
        "cross_domain" => {
            let need = |v: &Option<String>, name: &str| {
                v.as_deref()
                    .ok_or_else(|| Error::InvalidConfig(format!("cross_domain needs --{name}")))
                    .and_then(parse_families)
            };
            Ok(Protocol::CrossDomain {
                train_families: need(&a.train_families, "train-families")?,
                test_families: need(&a.test_families, "test-families")?,
            })
        }
        "ablation" => Ok(Protocol::Ablation(
            a.tag.clone().unwrap_or_else(|| mode.as_str().to_string()),
        )),
        other => Err(Error::InvalidConfig(format!(
            "unknown protocol {other:?} (expected in_domain, cross_domain or ablation)"
        ))),
    }
}

fn eval_cmd(a: EvalArgs) -> Result<()> {
    let ck = Checkpoint::load(&a.checkpoint)?;
    let ds = DatasetManifest::read_jsonl(&a.data)?;
    let mode_override = a.mode.as_deref().map(str::parse::<FuseMode>).transpose()?;
    let trained_mode = ck
        .config
        .pointer("/grpo/mode")
        .and_then(|m| serde_json::from_value(m.clone()).ok())
        .unwrap_or_default();
    let protocol = parse_protocol(&a, mode_override.unwrap_or(trained_mode))?;
    let (report, scored) = evaluate(&ck, &ds, &protocol, mode_override)?;
    report.save(&a.out)?;
    if let Some(path) = &a.emit_roc {
        let pick = |fake: bool| -> Vec<f64> {
            scored
                .iter()
                .filter(|s| (s.label == crate::simulator::Label::Fake) == fake)
                .map(|s| s.score)
                .collect()
        };
        let text = roc_text(&roc_points(&pick(true), &pick(false)));
        std::fs::write(path, text).map_err(|e| Error::io(path, e))?;
    }
    eprintln!("auc {:.4} ({} fake / {} real)", report.auc, report.n_fake, report.n_real);
    Ok(())
}

/// The text table printed by `inspect`.
pub fn inspect_table(ds: &DatasetManifest, clip_id: &str, codebook: &str, seed: u64, mode: FuseMode) -> Result<String> {
    let clip = ds
        .get(clip_id)
        .ok_or_else(|| Error::InvalidInput(format!("no clip with id {clip_id:?}")))?;
    let cb = match codebook {
        "manifold" => ds.manifold()?,
        "fitted" => training_codebook(
            ds,
            &GrpoConfig {
                codebook: CodebookSource::Fitted,
                seed,
                ..Default::default()
            },
        )?,
        path => Checkpoint::load(Path::new(path))?.codebook()?,
    };
    let residual = residual_frames(&clip.frames, &cb)?;
    let mut out = String::new();
    let _ = writeln!(
        out,
        "clip {} label={} family={} strength={} T={} D={}",
        clip.id,
        clip.label,
        clip.family,
        clip.artifact_strength,
        clip.t(),
        clip.d()
    );
    let _ = writeln!(out, "{:>4} {:>10} {:>7} {:>10} {:>10}", "t", "norm", "center", "dist", "residual");
    for (t, (frame, r)) in clip.frames.iter().zip(&residual).enumerate() {
        let (idx, d2) = cb.nearest(frame);
        let _ = writeln!(
            out,
            "{t:>4} {:>10.5} {idx:>7} {:>10.5} {:>10.5}",
            norm(frame),
            d2.sqrt(),
            norm(r)
        );
    }
    let ordered = fuse(clip, &cb, Ordering::Ordered, None, mode)?;
    let shuffled = fuse(clip, &cb, Ordering::Shuffled, Some(&mut RngStream::new(seed)), mode)?;
    let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.6}")).collect::<Vec<_>>().join(" ");
    let _ = writeln!(out, "ordered  {}", fmt(&ordered.features));
    let _ = writeln!(out, "shuffled {}", fmt(&shuffled.features));
    Ok(out)
}

fn inspect_cmd(a: InspectArgs) -> Result<()> {
    let ds = DatasetManifest::read_jsonl(&a.data)?;
    let mode = a.mode.parse()?;
    let table = inspect_table(&ds, &a.clip_id, &a.codebook, a.seed, mode)?;
    match &a.out {
        Some(path) => std::fs::write(path, table).map_err(|e| Error::io(path, e)),
        None => {
            print!("{table}");
            Ok(())
        }
    }
}
