//! Finite-difference check of every layer and model backward pass.
//!
//! Usage: `cargo run --example gradient_check -- [seed]`

use islanding::gradcheck::{gradcheck, GradTarget};

fn main() -> islanding::Result<()> {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    for target in GradTarget::ALL {
        let err = gradcheck(target, seed)?;
        let verdict = if err < 1e-4 { "ok" } else { "FAIL" };
        println!("{:<12} max relative error {err:.3e}  {verdict}", target.name());
    }
    Ok(())
}
