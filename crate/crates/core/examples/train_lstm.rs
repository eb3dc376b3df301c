//! Trains the four-layer LSTM baseline and reports test metrics.
//!
//! cargo run --release --example train_lstm -- [max_epochs] [seed]

use islanding::eval::{evaluate_variant, Variant};
use islanding::lstm::{param_count, LstmConfig};
use islanding::model::train_classifier;
use islanding::model::ModelConfig;
use islanding::signal::{build_dataset, GridSpec, Snr};
use islanding::train::TrainConfig;

fn main() -> islanding::Result<()> {
    let mut args = std::env::args().skip(1).map(|s| s.parse::<u64>().ok());
    let max_epochs = args.next().flatten().unwrap_or(15) as usize;
    let seed = args.next().flatten().unwrap_or(0);

    let config = LstmConfig::default();
    println!(
        "hidden sizes {:?}, {} parameters",
        config.hidden_sizes,
        param_count(&config)
    );
    let ds = build_dataset(&GridSpec::default(), 0)?;
    let train = TrainConfig {
        seed,
        max_epochs,
        ..TrainConfig::lstm()
    };
    let ck = train_classifier(&ds, &ModelConfig::Lstm(config), &train)?;
    for e in &ck.history.epochs {
        println!(
            "epoch {:>3}  train {:.5}  validation {:.5}",
            e.epoch, e.train_loss, e.validation_loss
        );
    }
    println!("best epoch {}", ck.history.best_epoch);

    let variant = Variant::new("lstm", ck.classifier()?, None);
    let report = evaluate_variant(&variant, &ds, Snr::Clean, 0)?;
    print!("{}", report.to_text());
    Ok(())
}
