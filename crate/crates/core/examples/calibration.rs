//! Trains every model once on the default dataset and prints clean metrics,
//! denoiser MAE and a one-run noise sweep, with timings.
//!
//! cargo run --release --example calibration -- [seed] [max_epochs]

use std::time::Instant;

use islanding::eval::{evaluate_variant, snr_sweep, Variant};
use islanding::model::{train_classifier, train_denoiser, ModelConfig, ModelFamily, DENOISER_TRAIN_SNR_DB};
use islanding::seed::stream;
use islanding::signal::{build_dataset, inject_noise_batch, GridSpec, Snr};
use islanding::train::TrainConfig;
use islanding::unet::UNetConfig;

fn main() -> islanding::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let seed: u64 = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    let max_epochs: Option<usize> = args.get(2).and_then(|s| s.parse().ok());

    let t = Instant::now();
    let ds = build_dataset(&GridSpec::default(), 0)?;
    println!("dataset: {} windows in {:.1}s", ds.len(), t.elapsed().as_secs_f64());

    let mut variants = Vec::new();
    for family in [ModelFamily::Wavenet, ModelFamily::Lstm] {
        let mut cfg = TrainConfig {
            seed,
            ..family.default_train_config()
        };
        if let Some(e) = max_epochs {
            cfg.max_epochs = e;
        }
        let t = Instant::now();
        let ck = train_classifier(&ds, &ModelConfig::default_for(family), &cfg)?;
        let v = Variant::new(family.name(), ck.classifier()?, None);
        let r = evaluate_variant(&v, &ds, Snr::Clean, 0)?;
        println!(
            "{family}: {} epochs (best {}) in {:.1}s  ba {:.4}  f1 {:.4}  auc {:.4}",
            ck.history.stopping_epoch,
            ck.history.best_epoch,
            t.elapsed().as_secs_f64(),
            r.metrics.balanced_accuracy,
            r.metrics.f1,
            r.roc.auc
        );
        variants.push(v);
    }

    let mut cfg = TrainConfig {
        seed,
        ..TrainConfig::unet()
    };
    if let Some(e) = max_epochs {
        cfg.max_epochs = e;
    }
    let t = Instant::now();
    let ck = train_denoiser(&ds, &UNetConfig::default(), DENOISER_TRAIN_SNR_DB, &cfg)?;
    let unet = ck.denoiser()?;
    let test = &ds.split.test;
    let clean = ds.tensor(test)?;
    let noisy = inject_noise_batch(&clean, Snr::Db(DENOISER_TRAIN_SNR_DB), 99, stream::EVAL_NOISE, test)?;
    let denoised = unet.denoise(&noisy)?;
    let mae = |a: &islanding::Tensor| {
        a.data()
            .iter()
            .zip(clean.data())
            .map(|(x, y)| (x - y).abs())
            .sum::<f64>()
            / clean.len() as f64
    };
    println!(
        "unet: {} epochs in {:.1}s  mae noisy {:.5}  denoised {:.5}  ratio {:.3}",
        ck.history.stopping_epoch,
        t.elapsed().as_secs_f64(),
        mae(&noisy),
        mae(&denoised),
        mae(&denoised) / mae(&noisy)
    );

    let wavenet = variants[0].classifier.clone();
    variants.push(Variant::new("wavenet+unet", wavenet, Some(unet)));
    let levels: Vec<Snr> = [20.0, 15.0, 10.0, 5.0].map(Snr::Db).to_vec();
    let t = Instant::now();
    let table = snr_sweep(&variants, &ds, &levels, &[0, 1])?;
    print!("{}", table.to_csv());
    println!("sweep in {:.1}s", t.elapsed().as_secs_f64());
    Ok(())
}
