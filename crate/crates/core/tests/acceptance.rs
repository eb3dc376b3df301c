//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails. Trains every model on the default dataset, so expect a
//! few minutes.

use std::fs;
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::Instant;

use num_complex::Complex64;
use rand::Rng;

use islanding::eval::{
    confusion, metrics, noisy_test_split, pr_curve, run_seeds, snr_sweep, ConfusionCounts, Metrics, Variant, THRESHOLD,
};
use islanding::gradcheck::{gradcheck, GradTarget};
use islanding::lstm::{self, LstmConfig};
use islanding::model::{train_classifier, train_denoiser, Classifier, ModelConfig, ModelFamily, DENOISER_TRAIN_SNR_DB};
use islanding::params::FeatureScaler;
use islanding::seed::rng_for;
use islanding::signal::{build_dataset, fortescue, inverse_fortescue, Dataset, GridSpec, Snr};
use islanding::train::{binary_cross_entropy, TrainConfig};
use islanding::unet::{UNet, UNetConfig};
use islanding::wavenet::{receptive_field, WaveNetConfig};
use islanding::Tensor;

const SEEDS: usize = 5;

struct Outcome {
    id: usize,
    pass: bool,
    detail: String,
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn fmt(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.4}")).collect::<Vec<_>>().join(" ")
}

fn criterion_1() -> Outcome {
    let config = LstmConfig::default();
    let mut oracle = 0;
    let mut d_in = config.input_size;
    for &h in &config.hidden_sizes {
        // input, recurrent and bias terms for each of the four gates
        oracle += 4 * (d_in * h + h * h + h);
        d_in = h;
    }
    oracle += d_in + 1;
    let reported = lstm::param_count(&config);
    let built = lstm::Lstm::new(config, 0).map(|n| n.params.count()).unwrap_or(0);
    Outcome {
        id: 1,
        pass: reported == 178_849 && oracle == 178_849 && built == 178_849,
        detail: format!("lstm parameters: reported {reported}, initialised {built}, gate oracle {oracle}"),
    }
}

fn criterion_2() -> Outcome {
    let config = WaveNetConfig {
        kernel_size: 2,
        dilations: vec![1, 2, 4, 8],
        ..WaveNetConfig::default()
    };
    let rf = receptive_field(&config);
    Outcome {
        id: 2,
        pass: rf == 16,
        detail: format!("kernel 2, dilations 1,2,4,8: receptive field {rf}"),
    }
}

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let mut worst = (0.0, "none");
    let mut failed = None;
    for target in GradTarget::ALL {
        match gradcheck(target, 0) {
            Ok(err) if err > worst.0 => worst = (err, target.name()),
            Ok(_) => {}
            Err(e) => failed = Some(format!("{target}: {e}")),
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let detail = match &failed {
        Some(e) => e.clone(),
        None => format!(
            "{} targets, worst relative error {:.2e} ({}), {secs:.1} s",
            GradTarget::ALL.len(),
            worst.0,
            worst.1
        ),
    };
    Outcome {
        id: 3,
        pass: failed.is_none() && worst.0 < 1e-4 && secs < 60.0,
        detail,
    }
}

fn criterion_4() -> Outcome {
    let mut rng = rng_for(4, 0, 0);
    let third = 2.0 * std::f64::consts::PI / 3.0;
    let (mut unbalance, mut round_trip) = (0.0f64, 0.0f64);
    for _ in 0..10_000 {
        let mag = rng.random_range(0.01..10.0);
        let angle = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
        let s = fortescue(
            Complex64::from_polar(mag, angle),
            Complex64::from_polar(mag, angle - third),
            Complex64::from_polar(mag, angle + third),
        );
        unbalance = unbalance.max(s.negative.norm()).max(s.zero.norm());

        let mut phasor = || Complex64::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
        let (a, b, c) = (phasor(), phasor(), phasor());
        let (ra, rb, rc) = inverse_fortescue(&fortescue(a, b, c));
        round_trip = round_trip
            .max((ra - a).norm())
            .max((rb - b).norm())
            .max((rc - c).norm());
    }
    Outcome {
        id: 4,
        pass: unbalance < 1e-9 && round_trip < 1e-9,
        detail: format!("balanced max |V2|,|V0| {unbalance:.1e}; round-trip error {round_trip:.1e}"),
    }
}

fn clean_metrics(classifier: &Classifier, ds: &Dataset) -> islanding::Result<Metrics> {
    let x = ds.tensor(&ds.split.test)?;
    let scores = classifier.predict_batch(&x)?;
    Ok(metrics(&confusion(&scores, &ds.labels(&ds.split.test), THRESHOLD)?))
}

struct Trained {
    wavenet: Vec<Classifier>,
    lstm: Vec<Classifier>,
    wavenet_metrics: Vec<Metrics>,
    lstm_metrics: Vec<Metrics>,
    seconds: f64,
}

fn train_classifiers(ds: &Dataset) -> islanding::Result<Trained> {
    let start = Instant::now();
    let mut out = Trained {
        wavenet: vec![],
        lstm: vec![],
        wavenet_metrics: vec![],
        lstm_metrics: vec![],
        seconds: 0.0,
    };
    for seed in 0..SEEDS as u64 {
        for family in [ModelFamily::Wavenet, ModelFamily::Lstm] {
            let train = TrainConfig {
                seed,
                ..family.default_train_config()
            };
            let classifier = train_classifier(ds, &ModelConfig::default_for(family), &train)?.classifier()?;
            let m = clean_metrics(&classifier, ds)?;
            match family {
                ModelFamily::Wavenet => {
                    out.wavenet.push(classifier);
                    out.wavenet_metrics.push(m);
                }
                _ => {
                    out.lstm.push(classifier);
                    out.lstm_metrics.push(m);
                }
            }
        }
    }
    out.seconds = start.elapsed().as_secs_f64();
    Ok(out)
}

fn criterion_5(t: &Trained) -> Outcome {
    let wn_ba: Vec<f64> = t.wavenet_metrics.iter().map(|m| m.balanced_accuracy).collect();
    let wn_f1: Vec<f64> = t.wavenet_metrics.iter().map(|m| m.f1).collect();
    let lstm_f1: Vec<f64> = t.lstm_metrics.iter().map(|m| m.f1).collect();
    let (ba, f1_w, f1_l) = (mean(&wn_ba), mean(&wn_f1), mean(&lstm_f1));
    Outcome {
        id: 5,
        pass: ba >= 0.99 && f1_w >= f1_l - 0.005 && f1_w >= 0.97 && f1_l >= 0.97,
        detail: format!(
            "wavenet balanced accuracy {ba:.4} [{}], f1 {f1_w:.4}; lstm f1 {f1_l:.4} [{}]; {SEEDS} seeds in {:.0} s",
            fmt(&wn_ba),
            fmt(&lstm_f1),
            t.seconds
        ),
    }
}

fn mae(a: &Tensor, b: &Tensor) -> f64 {
    a.data().iter().zip(b.data()).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.len() as f64
}

fn criterion_7(unet: &UNet, ds: &Dataset, seconds: f64) -> islanding::Result<Outcome> {
    let clean = ds.tensor(&ds.split.test)?;
    let noisy = noisy_test_split(ds, Snr::Db(DENOISER_TRAIN_SNR_DB), 0)?;
    let denoised = unet.denoise(&noisy)?;
    let ratio = mae(&denoised, &clean) / mae(&noisy, &clean);
    // Same comparison in the standardised units the denoiser is trained in.
    let scaler = FeatureScaler::fit(&ds.tensor(&ds.split.train)?)?;
    let z = |x: &Tensor| scaler.transform(x);
    let ratio_std = mae(&z(&denoised)?, &z(&clean)?) / mae(&z(&noisy)?, &z(&clean)?);
    Ok(Outcome {
        id: 7,
        pass: ratio <= 0.7,
        detail: format!(
            "test split at {DENOISER_TRAIN_SNR_DB} dB: MAE ratio {ratio:.3} (standardised units {ratio_std:.3}), trained in {seconds:.0} s"
        ),
    })
}

fn criterion_6(variants: &[Variant], ds: &Dataset) -> islanding::Result<Outcome> {
    let start = Instant::now();
    let levels: Vec<Snr> = [20.0, 15.0, 10.0, 5.0].map(Snr::Db).to_vec();
    let table = snr_sweep(variants, ds, &levels, &run_seeds(0, SEEDS))?;
    let means = |label: &str| -> Vec<f64> {
        table
            .row(label)
            .map(|r| r.cells.iter().map(|c| c.summary.mean).collect())
            .unwrap_or_default()
    };
    let at_10 = table.column("10 dB").expect("10 dB column");
    let margin = means("wavenet+unet")[at_10] - means("wavenet")[at_10];
    let mut monotone = true;
    let mut rows = Vec::new();
    for v in variants {
        let m = means(&v.label);
        monotone &= m.windows(2).all(|w| w[1] <= w[0]);
        rows.push(format!("{} [{}]", v.label, fmt(&m)));
    }
    Ok(Outcome {
        id: 6,
        pass: margin >= 0.02 && monotone,
        detail: format!(
            "10 dB margin {margin:.4}; non-increasing 20..5 dB: {monotone}; {}; {:.0} s",
            rows.join(", "),
            start.elapsed().as_secs_f64()
        ),
    })
}

fn criterion_8() -> islanding::Result<Outcome> {
    let bce = binary_cross_entropy(0.5, 1.0);
    let bce_err = (bce - std::f64::consts::LN_2).abs();
    let ba = metrics(&ConfusionCounts {
        tp: 40,
        fn_: 10,
        tn: 30,
        fp: 20,
    })
    .balanced_accuracy;
    let labels: Vec<f64> = (0..616).map(|i| if i < 448 { 1.0 } else { 0.0 }).collect();
    let scores: Vec<f64> = (0..616).map(|i| ((i * 7919) % 616) as f64 / 616.0).collect();
    let baseline = pr_curve(&scores, &labels)?.baseline;
    let base_err = (baseline - 448.0 / 616.0).abs();
    Ok(Outcome {
        id: 8,
        pass: bce_err <= 1e-12 && ba == 0.7 && base_err <= 1e-12,
        detail: format!("bce(0.5,1) - ln 2 = {bce_err:.1e}; balanced accuracy {ba}; pr baseline error {base_err:.1e}"),
    })
}

fn cli(dir: &Path, args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_islanding"))
        .args(args)
        .current_dir(dir)
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!("{args:?}: {}", String::from_utf8_lossy(&out.stderr).trim()))
    }
}

/// Output files of one command, minus the manifest and the wall-time column.
fn snapshot(dir: &Path) -> Vec<(String, String)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .into_iter()
        .flatten()
        .flatten()
        .map(|e| e.path())
        .collect();
    files.sort();
    files
        .iter()
        .filter(|p| p.file_name().is_some_and(|n| n != "run.json"))
        .map(|p| {
            let name = p.file_name().unwrap_or_default().to_string_lossy().into_owned();
            let text = fs::read_to_string(p).unwrap_or_default();
            let text = if name == "history.csv" {
                text.lines()
                    .map(|l| l.rsplit_once(',').map_or(l, |s| s.0))
                    .collect::<Vec<_>>()
                    .join("\n")
            } else {
                text
            };
            (name, text)
        })
        .collect()
}

fn criterion_9() -> Outcome {
    let run = || -> Result<(usize, Vec<String>), String> {
        let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
        let root = tmp.path();
        let quick = "[wavenet]\nfilters = 8\n[lstm]\nhidden_sizes = [8]\n[unet]\nfilters = [4, 8]\n\
                     [train.wavenet]\nmax_epochs = 2\n[train.lstm]\nmax_epochs = 2\n[train.unet]\nmax_epochs = 2\n\
                     [sweep]\nruns = 2\n";
        fs::write(root.join("quick.toml"), quick).map_err(|e| e.to_string())?;
        for tag in ["a", "b"] {
            let d = |n: &str| format!("{tag}-{n}");
            let ck = |n: &str| format!("{tag}-{n}/checkpoint.json");
            cli(root, &["generate", "--seed", "3", "--out", &d("data")])?;
            for model in ["wavenet", "lstm", "unet"] {
                cli(
                    root,
                    &[
                        "train",
                        model,
                        "--data",
                        &d("data"),
                        "--seed",
                        "3",
                        "--config",
                        "quick.toml",
                        "--out",
                        &d(model),
                    ],
                )?;
            }
            let (wn, ls, un) = (ck("wavenet"), ck("lstm"), ck("unet"));
            cli(
                root,
                &[
                    "evaluate",
                    &wn,
                    "--data",
                    &d("data"),
                    "--denoiser",
                    &un,
                    "--snr",
                    "10",
                    "--runs",
                    "2",
                    "--seed",
                    "3",
                    "--out",
                    &d("evaluate"),
                ],
            )?;
            cli(
                root,
                &[
                    "sweep",
                    &wn,
                    &ls,
                    "--data",
                    &d("data"),
                    "--denoiser",
                    &un,
                    "--seed",
                    "3",
                    "--config",
                    "quick.toml",
                    "--out",
                    &d("sweep"),
                ],
            )?;
            cli(
                root,
                &[
                    "export-curves",
                    &ls,
                    "--data",
                    &d("data"),
                    "--snr",
                    "15",
                    "--seed",
                    "3",
                    "--out",
                    &d("export-curves"),
                ],
            )?;
        }
        let mut compared = 0;
        let mut differing = Vec::new();
        for cmd in ["data", "wavenet", "lstm", "unet", "evaluate", "sweep", "export-curves"] {
            let (a, b) = (
                snapshot(&root.join(format!("a-{cmd}"))),
                snapshot(&root.join(format!("b-{cmd}"))),
            );
            compared += a.len();
            if a.is_empty() || a != b {
                differing.push(cmd.to_string());
            }
        }
        Ok((compared, differing))
    };
    match run() {
        Ok((n, differing)) => Outcome {
            id: 9,
            pass: differing.is_empty(),
            detail: if differing.is_empty() {
                format!("two runs of every command: {n} output files byte-identical")
            } else {
                format!("outputs differ for {}", differing.join(", "))
            },
        },
        Err(e) => Outcome {
            id: 9,
            pass: false,
            detail: e,
        },
    }
}

fn criterion_10(variant: &Variant, ds: &Dataset) -> islanding::Result<Outcome> {
    let window = &ds.windows[ds.split.test[0]];
    let latency = variant.latency(window, 500)?.as_secs_f64() * 1e3;
    Ok(Outcome {
        id: 10,
        pass: latency < 10.0,
        detail: format!("denoise + classify, median of 500 single windows: {latency:.3} ms"),
    })
}

fn line(o: &Outcome) -> String {
    format!(
        "criterion {:>2}: {}  {}",
        o.id,
        if o.pass { "PASS" } else { "FAIL" },
        o.detail
    )
}

/// Progress while the long criteria run; the summary goes to stdout.
fn report(o: &Outcome) {
    eprintln!("{}", line(o));
}

fn failed(id: usize, e: impl std::fmt::Display) -> Outcome {
    Outcome {
        id,
        pass: false,
        detail: format!("error: {e}"),
    }
}

fn main() -> ExitCode {
    // libtest flags such as --quiet are passed through; filtering is not supported.
    let mut outcomes = Vec::new();
    for o in [criterion_1(), criterion_2(), criterion_3(), criterion_4()] {
        report(&o);
        outcomes.push(o);
    }

    let trained = build_dataset(&GridSpec::default(), 0).and_then(|ds| {
        let t = train_classifiers(&ds)?;
        Ok((ds, t))
    });
    match trained {
        Err(e) => {
            for id in [5, 6, 7, 10] {
                outcomes.push(failed(id, &e));
            }
        }
        Ok((ds, t)) => {
            outcomes.push(criterion_5(&t));
            report(outcomes.last().unwrap());

            let start = Instant::now();
            let unet = train_denoiser(&ds, &UNetConfig::default(), DENOISER_TRAIN_SNR_DB, &TrainConfig::unet())
                .and_then(|ck| ck.denoiser());
            let seconds = start.elapsed().as_secs_f64();
            match unet {
                Err(e) => {
                    for id in [6, 7, 10] {
                        outcomes.push(failed(id, &e));
                    }
                }
                Ok(unet) => {
                    let variants = vec![
                        Variant::new("wavenet", t.wavenet[0].clone(), None),
                        Variant::new("lstm", t.lstm[0].clone(), None),
                        Variant::new("wavenet+unet", t.wavenet[0].clone(), Some(unet.clone())),
                    ];
                    let results = [
                        criterion_6(&variants, &ds).unwrap_or_else(|e| failed(6, e)),
                        criterion_7(&unet, &ds, seconds).unwrap_or_else(|e| failed(7, e)),
                    ];
                    for o in results {
                        report(&o);
                        outcomes.push(o);
                    }
                    let o = criterion_10(&variants[2], &ds).unwrap_or_else(|e| failed(10, e));
                    outcomes.push(o);
                }
            }
        }
    }

    outcomes.push(criterion_8().unwrap_or_else(|e| failed(8, e)));
    outcomes.push(criterion_9());
    outcomes.sort_by_key(|o| o.id);

    for o in &outcomes {
        println!("{}", line(o));
    }
    let failures = outcomes.iter().filter(|o| !o.pass).count();
    println!("\n{} of {} criteria passed", outcomes.len() - failures, outcomes.len());
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
