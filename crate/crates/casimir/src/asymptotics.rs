//! Independent reference values for validation.
//!
//! Large-separation series for the normalized energy of sphere pairs, with
//! the series coefficients stored as exact integer fractions, plus the
//! exponential decay-bound curve used when checking the integrand tail.
//! These are deliberately separate from the boundary-element pipeline so the
//! two can be compared as independent routes.

use crate::Real;

/// `-b_n` of the equal-radius series as positive fractions `num/den`.
const EQUAL_NUM: [i64; 6] = [1, 1, 77, 25, 29_837, 6_491];
const EQUAL_DEN: [i64; 6] = [4, 4, 48, 16, 2_880, 1_152];

/// `-b~_n(eta)` of the unequal-radius series: numerator polynomials in
/// `eta = r2 / r1` (coefficients of `eta^0 .. eta^6`) over a denominator.
const UNEQUAL_NUM: [[i64; 7]; 6] = [
    [0, 1, 0, 0, 0, 0, 0],
    [0, 1, 1, 0, 0, 0, 0],
    [0, 34, 9, 34, 0, 0, 0],
    [0, 2, 23, 23, 2, 0, 0],
    [0, 8_352, 1_995, 38_980, 1_995, 8_352, 0],
    [0, -1_344, 5_478, 2_357, 2_357, 5_478, -1_344],
];
const UNEQUAL_DEN: [i64; 6] = [4, 8, 48, 32, 5_760, 2_304];

/// Exact cross-multiplied check that the unequal-radius coefficients reduce
/// to the equal-radius ones at `eta = 1`; used by tests and kept here so the
/// transcriptions stay next to their consistency proof.
pub fn coefficients_consistent_at_unit_ratio() -> Vec<bool> {
    (0..6)
        .map(|n| {
            let poly_sum: i128 = UNEQUAL_NUM[n].iter().map(|&c| c as i128).sum();
            poly_sum * EQUAL_DEN[n] as i128 == EQUAL_NUM[n] as i128 * UNEQUAL_DEN[n] as i128
        })
        .collect()
}

/// Terms of the equal-radius series for `-zeta/(hbar c)`; the full value is
/// their sum. Centre distance is `l = 2 r + z`.
pub fn equal_series_terms<T: Real>(r: T, z: T) -> Vec<T> {
    let l = T::c(2.0) * r + z;
    let ratio = r / l;
    let scale = T::one() / (T::pi() * l);
    (0..6)
        .map(|n| {
            let coeff = T::c(EQUAL_NUM[n] as f64) / T::c(EQUAL_DEN[n] as f64);
            scale * coeff * ratio.powi(n as i32 + 2)
        })
        .collect()
}

/// Large-separation normalized Casimir energy `-zeta/(hbar c)` of two
/// equal-radius spheres with surface gap `z`.
pub fn asymptotic_equal<T: Real>(r: T, z: T) -> T {
    equal_series_terms(r, z)
        .into_iter()
        .fold(T::zero(), |s, t| s + t)
}

/// Unequal-radius counterpart; `eta = r2 / r1`, centre distance
/// `l = r1 + r2 + z`.
pub fn asymptotic_unequal<T: Real>(r1: T, r2: T, z: T) -> T {
    let l = r1 + r2 + z;
    let eta = r2 / r1;
    let ratio = r1 / l;
    let scale = T::one() / (T::pi() * l);
    (0..6)
        .map(|n| {
            let mut poly = T::zero();
            for (p, &c) in UNEQUAL_NUM[n].iter().enumerate() {
                if c != 0 {
                    poly += T::c(c as f64) * eta.powi(p as i32);
                }
            }
            scale * poly / T::c(UNEQUAL_DEN[n] as f64) * ratio.powi(n as i32 + 2)
        })
        .fold(T::zero(), |s, t| s + t)
}

/// The exponential decay bound `C exp(-2 Z k)` for the integrand modulus.
pub fn decay_bound<T: Real>(c: T, z: T, k: T) -> T {
    c * (-T::c(2.0) * z * k).exp()
}
