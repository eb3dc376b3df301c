use std::f64::consts::PI;

use num_complex::Complex64;

/// Zero, positive and negative sequence phasors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SequenceComponents {
    pub zero: Complex64,
    pub positive: Complex64,
    pub negative: Complex64,
}

fn alpha() -> Complex64 {
    Complex64::from_polar(1.0, 2.0 * PI / 3.0)
}

/// Symmetrical-component decomposition of three phase phasors.
pub fn fortescue(a: Complex64, b: Complex64, c: Complex64) -> SequenceComponents {
    let al = alpha();
    let al2 = al * al;
    SequenceComponents {
        zero: (a + b + c) / 3.0,
        positive: (a + al * b + al2 * c) / 3.0,
        negative: (a + al2 * b + al * c) / 3.0,
    }
}

/// Rebuilds `(a, b, c)` from sequence components.
pub fn inverse_fortescue(s: &SequenceComponents) -> (Complex64, Complex64, Complex64) {
    let al = alpha();
    let al2 = al * al;
    (
        s.zero + s.positive + s.negative,
        s.zero + al2 * s.positive + al * s.negative,
        s.zero + al * s.positive + al2 * s.negative,
    )
}
