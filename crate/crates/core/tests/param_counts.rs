//! Parameter counts against hand-computed layer arithmetic.

use islanding::lstm::{self, Lstm, LstmConfig};
use islanding::unet::{self, UNet, UNetConfig};
use islanding::wavenet::{self, receptive_field, WaveNet, WaveNetConfig};

/// Per gate: input weights, recurrent weights and a bias.
fn lstm_gate_oracle(sizes: &[usize], input: usize) -> usize {
    let mut total = 0;
    let mut d_in = input;
    for &h in sizes {
        let per_gate = d_in * h + h * h + h;
        total += 4 * per_gate;
        d_in = h;
    }
    total + d_in + 1
}

#[test]
fn lstm_reference_config_has_178849_parameters() {
    let config = LstmConfig::default();
    assert_eq!(config.hidden_sizes, [64, 128, 64, 32]);
    // 4(70*64+64) + 4(192*128+128) + 4(192*64+64) + 4(96*32+32) + 33
    let written_out = 18_176 + 98_816 + 49_408 + 12_416 + 33;
    assert_eq!(written_out, 178_849);
    assert_eq!(lstm_gate_oracle(&config.hidden_sizes, 6), 178_849);
    assert_eq!(lstm::param_count(&config), 178_849);
    assert_eq!(Lstm::new(config, 0).unwrap().params.count(), 178_849);
}

#[test]
fn lstm_count_matches_oracle_on_other_stacks() {
    for sizes in [vec![8], vec![3, 5], vec![16, 16, 16]] {
        let config = LstmConfig {
            input_size: 4,
            hidden_sizes: sizes.clone(),
        };
        let oracle = lstm_gate_oracle(&sizes, 4);
        assert_eq!(lstm::param_count(&config), oracle);
        assert_eq!(Lstm::new(config, 1).unwrap().params.count(), oracle);
    }
}

#[test]
fn wavenet_default_count() {
    let config = WaveNetConfig::default();
    // lift 6*32+32, per block two [2,32,32] convs and two 32x32 projections,
    // head 10*32+1
    let lift = 6 * 32 + 32;
    let block = 2 * (2 * 32 * 32 + 32) + 2 * (32 * 32 + 32);
    let head = 10 * 32 + 1;
    let oracle = lift + 5 * block + head;
    assert_eq!(oracle, 31_905);
    assert_eq!(wavenet::param_count(&config), oracle);
    assert_eq!(WaveNet::new(config, 0).unwrap().params.count(), oracle);
}

#[test]
fn wavenet_without_blocks_is_a_dense_head_on_the_input() {
    let config = WaveNetConfig {
        dilations: vec![],
        ..WaveNetConfig::default()
    };
    assert_eq!(wavenet::param_count(&config), 10 * 6 + 1);
    assert_eq!(WaveNet::new(config, 0).unwrap().params.count(), 61);
}

#[test]
fn doubling_filters_more_than_doubles_the_count() {
    let small = WaveNetConfig {
        filters: 16,
        ..WaveNetConfig::default()
    };
    let large = WaveNetConfig {
        filters: 32,
        ..WaveNetConfig::default()
    };
    assert!(wavenet::param_count(&large) > 2 * wavenet::param_count(&small));
}

#[test]
fn receptive_field_of_four_doubling_dilations_is_16() {
    let config = WaveNetConfig {
        dilations: vec![1, 2, 4, 8],
        ..WaveNetConfig::default()
    };
    assert_eq!(receptive_field(&config), 16);
    assert_eq!(WaveNet::new(config, 0).unwrap().receptive_field(), 16);
    assert_eq!(receptive_field(&WaveNetConfig::default()), 32);
}

#[test]
fn unet_default_count() {
    let conv = |i: usize, o: usize| 3 * i * o + o;
    let oracle = conv(6, 32)
        + conv(32, 32)
        + conv(32, 64)
        + conv(64, 64)
        + conv(128, 64)
        + conv(64, 64)
        + conv(96, 32)
        + conv(32, 32)
        + conv(32, 6);
    assert_eq!(oracle, 72_198);
    let config = UNetConfig::default();
    assert_eq!(unet::param_count(&config), oracle);
    assert_eq!(UNet::new(config, 0).unwrap().params.count(), oracle);
}
