//! Trains a short WaveNet run, then writes ROC and precision-recall points
//! for the clean test split and a 10 dB copy.
//!
//! cargo run --release --example evaluate_curves -- [out_dir]

use std::fs;
use std::path::PathBuf;

use islanding::eval::{evaluate_variant, Variant};
use islanding::model::{train_classifier, ModelConfig, ModelFamily};
use islanding::signal::{build_dataset, GridSpec, Snr};
use islanding::train::TrainConfig;

fn main() -> islanding::Result<()> {
    let out = PathBuf::from(
        std::env::args()
            .nth(1)
            .unwrap_or_else(|| "target/example-curves".into()),
    );
    fs::create_dir_all(&out)?;

    let ds = build_dataset(&GridSpec::default(), 0)?;
    let train = TrainConfig {
        max_epochs: 20,
        ..TrainConfig::wavenet()
    };
    let ck = train_classifier(&ds, &ModelConfig::default_for(ModelFamily::Wavenet), &train)?;
    let variant = Variant::new("wavenet", ck.classifier()?, None);

    for (name, snr) in [("clean", Snr::Clean), ("10db", Snr::Db(10.0))] {
        let report = evaluate_variant(&variant, &ds, snr, 0)?;
        fs::write(out.join(format!("roc_{name}.csv")), report.roc_csv())?;
        fs::write(out.join(format!("pr_{name}.csv")), report.pr_csv())?;
        println!(
            "{name:<6} roc auc {:.4}  pr auc {:.4}  no-skill {:.4}  balanced accuracy {:.4}",
            report.roc.auc, report.pr.auc, report.pr.baseline, report.metrics.balanced_accuracy
        );
    }
    println!("wrote {}", out.display());
    Ok(())
}
