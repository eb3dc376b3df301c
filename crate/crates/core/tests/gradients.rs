use islanding::gradcheck::{gradcheck, GradTarget};

#[test]
fn every_layer_and_model_matches_finite_differences() {
    for seed in [0, 1, 7] {
        for target in GradTarget::ALL {
            let err = gradcheck(target, seed).unwrap();
            assert!(err < 1e-4, "{target} seed {seed}: max relative error {err:e}");
        }
    }
}
