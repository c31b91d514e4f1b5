//! Symmetrical-component (sequence) transform.

use super::PhasorTriple;
use num_complex::Complex64;

/// a = exp(j*2*pi/3), the 120-degree rotation operator.
fn rot() -> Complex64 {
    Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI / 3.0)
}

/// Phase phasors (A,B,C) to sequence phasors (zero, positive, negative):
/// (X0,X1,X2) = (1/3) * [[1,1,1],[1,a,a^2],[1,a^2,a]] * [XA,XB,XC].
pub fn sequence_components(x: &PhasorTriple) -> PhasorTriple {
    let a = rot();
    let a2 = a * a;
    let [xa, xb, xc] = x.0;
    let third = Complex64::new(1.0 / 3.0, 0.0);
    PhasorTriple([
        third * (xa + xb + xc),
        third * (xa + a * xb + a2 * xc),
        third * (xa + a2 * xb + a * xc),
    ])
}

/// Inverse transform: sequence phasors back to phase phasors.
pub fn inverse_sequence(x: &PhasorTriple) -> PhasorTriple {
    let a = rot();
    let a2 = a * a;
    let [x0, x1, x2] = x.0;
    PhasorTriple([
        x0 + x1 + x2,
        x0 + a2 * x1 + a * x2,
        x0 + a * x1 + a2 * x2,
    ])
}
