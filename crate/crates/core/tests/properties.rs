use islanding::eval::{confusion, metrics, roc_curve};
use islanding::kernels::{conv1d_causal, maxpool1d, upsample1d};
use islanding::lstm::{init_params as lstm_params, lstm_cell_step, LstmConfig, LstmLayerParams};
use islanding::params::Params;
use islanding::signal::{fortescue, inject_noise, inverse_fortescue, FeatureWindow, Label, Snr, N_FEATURES};
use islanding::train::{binary_cross_entropy, OptimizerKind, OptimizerState};
use islanding::unet::{UNet, UNetConfig};
use islanding::Tensor;
use num_complex::Complex64;
use proptest::prelude::*;

fn values(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-5.0f64..5.0, n)
}

fn phasor() -> impl Strategy<Value = Complex64> {
    (-2.0f64..2.0, -2.0f64..2.0).prop_map(|(re, im)| Complex64::new(re, im))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pooling_undoes_upsampling((t, c, data) in (1usize..8, 1usize..4).prop_flat_map(|(t, c)| (Just(t), Just(c), values(t * c)))) {
        let x = Tensor::new(vec![t, c], data).unwrap();
        let back = maxpool1d(&upsample1d(&x, 2).unwrap(), 2).unwrap();
        prop_assert_eq!(back, x);
    }

    #[test]
    fn causal_conv_keeps_length_and_ignores_the_future(
        (t, k, d, data, kernel, at) in (2usize..12, 1usize..4, 1usize..4).prop_flat_map(|(t, k, d)| {
            (Just(t), Just(k), Just(d), values(t * 2), values(k * 2 * 3), 0..t)
        })
    ) {
        let x = Tensor::new(vec![t, 2], data).unwrap();
        let w = Tensor::new(vec![k, 2, 3], kernel).unwrap();
        let b = Tensor::vector(&[0.1, -0.2, 0.3]);
        let y = conv1d_causal(&x, &w, &b, d).unwrap();
        prop_assert_eq!(y.shape(), &[t, 3]);
        let mut x2 = x.clone();
        x2.data_mut()[at * 2] += 1.0;
        x2.data_mut()[at * 2 + 1] -= 3.0;
        let y2 = conv1d_causal(&x2, &w, &b, d).unwrap();
        prop_assert_eq!(&y.data()[..at * 3], &y2.data()[..at * 3]);
    }

    #[test]
    fn fortescue_is_linear_and_invertible(a in phasor(), b in phasor(), c in phasor(), s in phasor()) {
        let base = fortescue(a, b, c);
        let scaled = fortescue(s * a, s * b, s * c);
        prop_assert!((scaled.zero - s * base.zero).norm() < 1e-9);
        prop_assert!((scaled.positive - s * base.positive).norm() < 1e-9);
        prop_assert!((scaled.negative - s * base.negative).norm() < 1e-9);
        let (ra, rb, rc) = inverse_fortescue(&base);
        prop_assert!((ra - a).norm() < 1e-9 && (rb - b).norm() < 1e-9 && (rc - c).norm() < 1e-9);
    }

    #[test]
    fn balanced_sets_have_no_unbalance(mag in 0.01f64..10.0, angle in -3.2f64..3.2) {
        let third = 2.0 * std::f64::consts::PI / 3.0;
        let s = fortescue(
            Complex64::from_polar(mag, angle),
            Complex64::from_polar(mag, angle - third),
            Complex64::from_polar(mag, angle + third),
        );
        prop_assert!(s.negative.norm() < 1e-9 && s.zero.norm() < 1e-9);
    }

    #[test]
    fn lstm_hidden_state_stays_inside_unit_interval(scale in 0.1f64..50.0, x in values(3 * 4), seed in 0u64..100) {
        let config = LstmConfig { input_size: 4, hidden_sizes: vec![5] };
        let mut params = lstm_params(&config, seed).unwrap();
        for (_, p) in params.iter_mut() {
            *p = p.map(|v| v * scale + 0.3);
        }
        let layer = LstmLayerParams::from_params(&params, 0).unwrap();
        let mut h = Tensor::zeros(&[1, 5]);
        let mut c = Tensor::zeros(&[1, 5]);
        for step in x.chunks(4) {
            let xt = Tensor::new(vec![1, 4], step.iter().map(|v| v * scale).collect()).unwrap();
            (h, c) = lstm_cell_step(&xt, &h, &c, &layer).unwrap();
            prop_assert!(h.all_finite() && c.all_finite());
            prop_assert!(h.data().iter().all(|v| v.abs() < 1.0));
        }
    }

    #[test]
    fn unet_preserves_shape(t in 4usize..14, b in 1usize..3, seed in 0u64..10) {
        let net = UNet::new(UNetConfig { filters: [4, 8], ..UNetConfig::default() }, seed).unwrap();
        let x = Tensor::from_fn(&[b, t, N_FEATURES], |i| (i as f64 * 0.37).sin());
        let y = net.denoise(&x).unwrap();
        prop_assert_eq!(y.shape(), x.shape());
        prop_assert!(y.all_finite());
    }

    #[test]
    fn bce_is_finite_for_every_probability(q in 0.0f64..=1.0, positive in any::<bool>()) {
        let loss = binary_cross_entropy(q, if positive { 1.0 } else { 0.0 });
        prop_assert!(loss.is_finite() && loss >= 0.0);
    }

    #[test]
    fn optimizer_steps_stay_finite(
        g in prop::collection::vec(-1e6f64..1e6, 6),
        rmsprop in any::<bool>(),
        steps in 1usize..20,
    ) {
        let mut params = Params::new();
        params.insert("w", Tensor::new(vec![6], vec![0.5; 6]).unwrap());
        let mut grads = Params::new();
        grads.insert("w", Tensor::new(vec![6], g).unwrap());
        let kind = if rmsprop { OptimizerKind::Rmsprop } else { OptimizerKind::Adam };
        let mut opt = OptimizerState::new(kind, 1e-3, &params);
        for _ in 0..steps {
            opt.apply(&mut params, &grads).unwrap();
        }
        prop_assert!(params.all_finite());
    }

    #[test]
    fn noise_keeps_label_and_shape(data in values(10 * N_FEATURES), db in -5.0f64..40.0, seed in 0u64..1000, positive in any::<bool>()) {
        let label = if positive { Label::Islanding } else { Label::NonIslanding };
        let w = FeatureWindow::new(data, 10, label).unwrap();
        let noisy = inject_noise(&w, Snr::db(db).unwrap(), seed);
        prop_assert_eq!(noisy.label, label);
        prop_assert_eq!(noisy.steps(), 10);
        prop_assert!(noisy.values().iter().all(|v| v.is_finite()));
        prop_assert_eq!(inject_noise(&w, Snr::db(db).unwrap(), seed), noisy);
    }

    #[test]
    fn confusion_counts_cover_every_sample(scores in prop::collection::vec(0.0f64..1.0, 1..80), thr in 0.0f64..1.0) {
        let labels: Vec<f64> = scores.iter().enumerate().map(|(i, _)| (i % 3 == 0) as u8 as f64).collect();
        let c = confusion(&scores, &labels, thr).unwrap();
        prop_assert_eq!(c.tp + c.fp + c.tn + c.fn_, scores.len() as u64);
        let m = metrics(&c);
        for v in [m.accuracy, m.balanced_accuracy, m.precision, m.recall, m.specificity, m.f1] {
            prop_assert!((0.0..=1.0).contains(&v));
        }
    }

    #[test]
    fn roc_auc_ignores_monotone_rescaling(scores in prop::collection::vec(-3.0f64..3.0, 4..60)) {
        let labels: Vec<f64> = (0..scores.len()).map(|i| (i % 2) as f64).collect();
        let squashed: Vec<f64> = scores.iter().map(|s| 1.0 / (1.0 + (-2.0 * s).exp())).collect();
        let a = roc_curve(&scores, &labels).unwrap().auc;
        let b = roc_curve(&squashed, &labels).unwrap().auc;
        prop_assert!((a - b).abs() < 1e-12);
    }
}
