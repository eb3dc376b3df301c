//! Builds the default dataset and writes it to a directory.
//!
//! cargo run --example generate_dataset -- [out_dir] [seed]

use std::path::PathBuf;

use islanding::signal::io::write_dataset;
use islanding::signal::{build_dataset, GridSpec};

fn main() -> islanding::Result<()> {
    let mut args = std::env::args().skip(1);
    let out = PathBuf::from(args.next().unwrap_or_else(|| "target/example-data".into()));
    let seed = args.next().and_then(|s| s.parse().ok()).unwrap_or(0);

    let spec = GridSpec::default();
    println!("{}", spec.describe());
    let ds = build_dataset(&spec, seed)?;
    for (name, idx) in [
        ("train", &ds.split.train),
        ("validation", &ds.split.validation),
        ("test", &ds.split.test),
    ] {
        let (pos, neg) = ds.class_counts(idx);
        println!(
            "{name:<10} {:>5} windows ({pos} islanding, {neg} non-islanding)",
            idx.len()
        );
    }
    write_dataset(&ds, &out)?;
    println!("wrote {}", out.display());
    Ok(())
}
