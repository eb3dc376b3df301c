//! Simulates one islanding and one load-switching event and prints the
//! feature windows around the event.
//!
//! cargo run --example feature_extraction -- [seed]

use islanding::signal::{
    extract_features, fortescue, simulate_scenario, window_start, ScenarioConfig, ScenarioKind, CHANNEL_NAMES,
};
use std::f64::consts::PI;

use num_complex::Complex64;

fn main() -> islanding::Result<()> {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0);

    // Balanced phasors have no negative or zero sequence.
    let phase = |deg: f64| Complex64::from_polar(1.0, deg * PI / 180.0);
    let s = fortescue(phase(0.0), phase(-120.0), phase(120.0));
    println!(
        "balanced: |V1| {:.6} |V2| {:.1e} |V0| {:.1e}\n",
        s.positive.norm(),
        s.negative.norm(),
        s.zero.norm()
    );

    for kind in [ScenarioKind::Islanding, ScenarioKind::LoadSwitch] {
        let record = simulate_scenario(&ScenarioConfig::new(kind, seed))?;
        let windows = extract_features(&record)?;
        println!(
            "{kind}: {} samples, event at sample {}, {} windows",
            record.len(),
            record.event_index,
            windows.len()
        );
        println!("{:>6} {}", "start", CHANNEL_NAMES.map(|c| format!("{c:>10}")).join(""));
        for (k, w) in windows.iter().enumerate().take(6) {
            // Window means per channel.
            let means: Vec<String> = (0..CHANNEL_NAMES.len())
                .map(|c| format!("{:>10.4}", w.channel(c).sum::<f64>() / w.steps() as f64))
                .collect();
            println!("{:>6} {}", window_start(k), means.join(""));
        }
        println!();
    }
    Ok(())
}
