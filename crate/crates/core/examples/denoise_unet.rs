//! Trains the U-Net denoiser at 15 dB and compares per-channel error before
//! and after denoising on the test split.
//!
//! cargo run --release --example denoise_unet -- [max_epochs] [seed]

use islanding::eval::noisy_test_split;
use islanding::model::{train_denoiser, DENOISER_TRAIN_SNR_DB};
use islanding::signal::{build_dataset, GridSpec, Snr, CHANNEL_NAMES, N_FEATURES};
use islanding::train::TrainConfig;
use islanding::unet::{param_count, UNetConfig};
use islanding::Tensor;

fn channel_mae(a: &Tensor, b: &Tensor) -> [f64; N_FEATURES] {
    let mut sums = [0.0; N_FEATURES];
    for (i, (x, y)) in a.data().iter().zip(b.data()).enumerate() {
        sums[i % N_FEATURES] += (x - y).abs();
    }
    sums.map(|s| s * N_FEATURES as f64 / a.len() as f64)
}

fn main() -> islanding::Result<()> {
    let mut args = std::env::args().skip(1).map(|s| s.parse::<u64>().ok());
    let max_epochs = args.next().flatten().unwrap_or(10) as usize;
    let seed = args.next().flatten().unwrap_or(0);

    let config = UNetConfig::default();
    println!("filters {:?}, {} parameters", config.filters, param_count(&config));
    let ds = build_dataset(&GridSpec::default(), 0)?;
    let train = TrainConfig {
        seed,
        max_epochs,
        ..TrainConfig::unet()
    };
    let ck = train_denoiser(&ds, &config, DENOISER_TRAIN_SNR_DB, &train)?;
    println!(
        "stopped at epoch {} (best {})",
        ck.history.stopping_epoch, ck.history.best_epoch
    );
    let unet = ck.denoiser()?;

    let clean = ds.tensor(&ds.split.test)?;
    let noisy = noisy_test_split(&ds, Snr::Db(DENOISER_TRAIN_SNR_DB), 1)?;
    let denoised = unet.denoise(&noisy)?;
    let before = channel_mae(&noisy, &clean);
    let after = channel_mae(&denoised, &clean);
    println!(
        "{:<10} {:>12} {:>12} {:>8}",
        "channel", "noisy mae", "denoised", "ratio"
    );
    for c in 0..N_FEATURES {
        println!(
            "{:<10} {:>12.6} {:>12.6} {:>8.3}",
            CHANNEL_NAMES[c],
            before[c],
            after[c],
            after[c] / before[c]
        );
    }
    Ok(())
}
