//! Trains the gated dilated-convolution classifier and reports test metrics.
//!
//! cargo run --release --example train_wavenet -- [max_epochs] [seed]

use islanding::eval::{evaluate_variant, Variant};
use islanding::model::train_classifier;
use islanding::model::ModelConfig;
use islanding::signal::{build_dataset, GridSpec, Snr};
use islanding::train::TrainConfig;
use islanding::wavenet::{param_count, receptive_field, WaveNetConfig};

fn main() -> islanding::Result<()> {
    let mut args = std::env::args().skip(1).map(|s| s.parse::<u64>().ok());
    let max_epochs = args.next().flatten().unwrap_or(30) as usize;
    let seed = args.next().flatten().unwrap_or(0);

    let config = WaveNetConfig::default();
    println!(
        "dilations {:?}, receptive field {}, {} parameters",
        config.dilations,
        receptive_field(&config),
        param_count(&config)
    );
    let ds = build_dataset(&GridSpec::default(), 0)?;
    let train = TrainConfig {
        seed,
        max_epochs,
        ..TrainConfig::wavenet()
    };
    let ck = train_classifier(&ds, &ModelConfig::Wavenet(config), &train)?;
    for e in &ck.history.epochs {
        println!(
            "epoch {:>3}  train {:.5}  validation {:.5}",
            e.epoch, e.train_loss, e.validation_loss
        );
    }
    println!("best epoch {}", ck.history.best_epoch);

    let variant = Variant::new("wavenet", ck.classifier()?, None);
    let report = evaluate_variant(&variant, &ds, Snr::Clean, 0)?;
    print!("{}", report.to_text());
    Ok(())
}
