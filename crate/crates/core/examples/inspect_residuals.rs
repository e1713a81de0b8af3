//! Compare quantization residuals and fused features of a real and a fake
//! clip, ordered and shuffled.
//!
//! ```text
//! cargo run --release --example inspect_residuals -- [clip-id ...]
//! ```

use clipguard::cli::inspect_table;
use clipguard::{build_dataset, FuseMode, GeneratorConfig};

fn main() -> clipguard::Result<()> {
    let data = build_dataset(&GeneratorConfig::default(), 0)?;
    let mut ids: Vec<String> = std::env::args().skip(1).collect();
    if ids.is_empty() {
        ids = vec!["pose-real-0000".into(), "pose-fake-0000".into()];
    }
    for id in ids {
        print!("{}", inspect_table(&data, &id, "manifold", 0, FuseMode::Full)?);
        println!();
    }
    Ok(())
}
