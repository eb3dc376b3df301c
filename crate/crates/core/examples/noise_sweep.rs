//! Balanced accuracy of WaveNet, LSTM and WaveNet behind the U-Net across
//! noise levels, with short training runs.
//!
//! cargo run --release --example noise_sweep -- [runs]

use islanding::eval::{run_seeds, snr_sweep, Variant, DEFAULT_SNRS};
use islanding::model::{train_classifier, train_denoiser, ModelConfig, ModelFamily, DENOISER_TRAIN_SNR_DB};
use islanding::signal::{build_dataset, GridSpec, Snr};
use islanding::train::TrainConfig;
use islanding::unet::UNetConfig;

fn main() -> islanding::Result<()> {
    let runs = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(3);
    let ds = build_dataset(&GridSpec::default(), 0)?;

    let mut variants = Vec::new();
    for (family, epochs) in [(ModelFamily::Wavenet, 30), (ModelFamily::Lstm, 10)] {
        let train = TrainConfig {
            max_epochs: epochs,
            ..family.default_train_config()
        };
        let ck = train_classifier(&ds, &ModelConfig::default_for(family), &train)?;
        variants.push(Variant::new(family.name(), ck.classifier()?, None));
    }
    let train = TrainConfig {
        max_epochs: 8,
        ..TrainConfig::unet()
    };
    let unet = train_denoiser(&ds, &UNetConfig::default(), DENOISER_TRAIN_SNR_DB, &train)?.denoiser()?;
    variants.push(Variant::new("wavenet+unet", variants[0].classifier.clone(), Some(unet)));

    let mut levels = vec![Snr::Clean];
    levels.extend(DEFAULT_SNRS.map(Snr::Db));
    let table = snr_sweep(&variants, &ds, &levels, &run_seeds(0, runs))?;
    print!("{}", table.to_csv());
    Ok(())
}
