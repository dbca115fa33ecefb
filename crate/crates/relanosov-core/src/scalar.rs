//! Scalar abstraction for the numeric pipeline.
//!
//! The toolkit runs identically over the reals and the complex numbers; the
//! only differences are conjugation in inner products and how entries are
//! flattened for I/O. Both are captured here so the rest of the crate can be
//! written once against [`Scalar`].

use nalgebra::{Complex, ComplexField};
use rand::Rng;
use rand_distr::StandardNormal;

/// Matrix scalar: `f64` or `Complex<f64>`, with `f64` real parts throughout.
pub trait Scalar: ComplexField<RealField = f64> + Copy + 'static {
    /// Human-readable field tag used by group files and reports.
    const FIELD_NAME: &'static str;

    fn from_re_im(re: f64, im: f64) -> Self;
    fn re(self) -> f64;
    fn im(self) -> f64;

    /// Standard Gaussian sample; complex scalars get independent N(0,1)
    /// real and imaginary parts.
    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self;
}

impl Scalar for f64 {
    const FIELD_NAME: &'static str = "real";

    fn from_re_im(re: f64, _im: f64) -> Self {
        re
    }

    fn re(self) -> f64 {
        self
    }

    fn im(self) -> f64 {
        0.0
    }

    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
        rng.sample(StandardNormal)
    }
}

impl Scalar for Complex<f64> {
    const FIELD_NAME: &'static str = "complex";

    fn from_re_im(re: f64, im: f64) -> Self {
        Complex::new(re, im)
    }

    fn re(self) -> f64 {
        self.re
    }

    fn im(self) -> f64 {
        self.im
    }

    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
        Complex::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    }
}
