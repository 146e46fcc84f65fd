//! Sign and normalization choices that the constructions depend on.
//!
//! Every report carries [`digest`] so a result can be matched to the
//! conventions it was produced under.

use serde_json::{json, Value};
use sha2::{Digest, Sha256};

/// Orientation of the extension relative to its null frame: `W1∧W2∧W3∧W4` is
/// positive. The Hodge star of the reduction follows it.
pub const ORIENTATION: f64 = 1.0;

/// `A ⊙ B = ½(A⊗B + B⊗A)`.
pub const SYMMETRIC_PRODUCT_WEIGHT: f64 = 0.5;

/// Pencil `P(λ) = P0 + λ P1`.
pub const PENCIL_SIGN: f64 = 1.0;

/// The reduced metric of the four-dimensional extension, rescaled by
/// `φ² = w_z/(w_x w_y)`, equals this constant times the closed-form
/// Hirota metric. Constant factors do not affect the Weyl structure.
pub const JONES_TOD_SCALE: f64 = -0.25;

/// `L_{R_X} P(λ) = HEISENBERG_LIE_SIGN · ε λ · P0`, with the bivector Lie
/// derivative `L_V(A∧B) = [V,A]∧B + A∧[V,B]`.
pub const HEISENBERG_LIE_SIGN: f64 = -1.0;

/// Hamiltonian vector field `X_f^β = Σ_α P^{βα} ∂_α f`.
pub const HAMILTONIAN_SIGN: f64 = 1.0;

/// Veronese parameter matching the Hirota Lax plane at `λ`: `μ = -1/λ`.
pub fn veronese_parameter(lambda: f64) -> f64 {
    -1.0 / lambda
}

/// Spectral parameter of the Nil (hyper-CR) Lax pair whose plane, pushed
/// through the Heisenberg coordinate change, is the Hirota plane at `lambda`.
pub fn hirota_to_nil_lambda(lambda: f64, a: f64, b: f64) -> f64 {
    (a - b) / (a * b * lambda + a)
}

pub fn nil_to_hirota_lambda(lambda: f64, a: f64, b: f64) -> f64 {
    ((a - b) / lambda - a) / (a * b)
}

pub fn as_json() -> Value {
    json!({
        "orientation": ORIENTATION,
        "orientation_frame": "W1^W2^W3^W4",
        "symmetric_product_weight": SYMMETRIC_PRODUCT_WEIGHT,
        "veronese_parameter": "mu = -1/lambda",
        "hirota_to_nil_lambda": "lambda_nil = (a-b)/(a*b*lambda + a)",
        "pencil": "P(lambda) = P0 + lambda*P1",
        "wedge": "A^B -> A(x)B - B(x)A",
        "jacobiator": "J^{abc} = sum_d P^{ad} d_d P^{bc} + cyclic(a,b,c)",
        "jones_tod_scale": JONES_TOD_SCALE,
        "heisenberg_lie_sign": HEISENBERG_LIE_SIGN,
        "hamiltonian": "X_f^b = sum_a P^{ba} d_a f",
        "twistor_normalization": "psi_{i+1}(0,0,T) = 0 for i >= 2",
    })
}

/// Hex SHA-256 of the canonical conventions JSON.
pub fn digest() -> String {
    let text = serde_json::to_string(&as_json()).expect("static json");
    hex::encode(Sha256::digest(text.as_bytes()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mobius_maps_are_inverse() {
        for (a, b) in [(1.0, 2.0), (0.5, 1.5), (2.0, -1.0)] {
            for l in [0.3, -0.7, 2.0] {
                let back = nil_to_hirota_lambda(hirota_to_nil_lambda(l, a, b), a, b);
                assert!((back - l).abs() < 1e-12);
            }
        }
        assert_eq!(veronese_parameter(2.0), -0.5);
    }

    #[test]
    fn digest_is_stable() {
        assert_eq!(digest(), digest());
        assert_eq!(digest().len(), 64);
    }
}
