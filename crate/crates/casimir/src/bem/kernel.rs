//! Single-layer kernel at imaginary wavenumbers.
//!
//! Along the positive imaginary axis the 3-D Helmholtz kernel becomes the
//! real, strictly positive, exponentially decaying `exp(-k r) / (4 pi r)`,
//! so the whole pipeline stays in real arithmetic. `k = 0` is the Laplace
//! kernel and needs no special handling.

use nalgebra::Point3;

use crate::{Error, Real, Result};

/// Wavenumber `i k` on the positive imaginary axis, stored by its modulus.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct ImagWavenumber<T: Real>(T);

impl<T: Real> ImagWavenumber<T> {
    pub fn new(k: T) -> Result<Self> {
        if !(k >= T::zero()) || !k.is_finite() {
            return Err(Error::Numerical(format!(
                "imaginary wavenumber modulus must be finite and nonnegative, got {}",
                k.f64()
            )));
        }
        Ok(Self(k))
    }

    pub fn modulus(self) -> T {
        self.0
    }
}

/// Kernel value as a function of the point distance `r > 0`.
#[inline(always)]
pub fn kernel_of_distance<T: Real>(k: T, r: T) -> T {
    let four_pi = T::c(4.0 * std::f64::consts::PI);
    (-k * r).exp() / (four_pi * r)
}

/// `exp(-k |x-y|) / (4 pi |x-y|)`, rejecting coincident points.
pub fn kernel<T: Real>(k: ImagWavenumber<T>, x: &Point3<T>, y: &Point3<T>) -> Result<T> {
    let r = (x - y).norm();
    if r == T::zero() {
        return Err(Error::SingularEval(
            "kernel evaluated at coincident points; singular quadrature must handle this pair"
                .into(),
        ));
    }
    Ok(kernel_of_distance(k.modulus(), r))
}
