//! Scalar special functions.
//!
//! With the `std` feature the inherent `f64` methods are used, otherwise the
//! `libm` implementations. `asinh` is implemented here for both so that it has
//! identical behaviour everywhere.

#[cfg(feature = "std")]
mod imp {
    #[inline]
    pub fn sqrt(x: f64) -> f64 {
        x.sqrt()
    }
    #[inline]
    pub fn exp(x: f64) -> f64 {
        x.exp()
    }
    #[inline]
    pub fn ln(x: f64) -> f64 {
        x.ln()
    }
    #[inline]
    pub fn ln_1p(x: f64) -> f64 {
        x.ln_1p()
    }
    #[inline]
    pub fn sinh(x: f64) -> f64 {
        x.sinh()
    }
    #[inline]
    pub fn cosh(x: f64) -> f64 {
        x.cosh()
    }
    #[inline]
    pub fn powf(x: f64, y: f64) -> f64 {
        x.powf(y)
    }
    #[inline]
    pub fn sin_cos(x: f64) -> (f64, f64) {
        x.sin_cos()
    }
}

#[cfg(not(feature = "std"))]
mod imp {
    #[inline]
    pub fn sqrt(x: f64) -> f64 {
        libm::sqrt(x)
    }
    #[inline]
    pub fn exp(x: f64) -> f64 {
        libm::exp(x)
    }
    #[inline]
    pub fn ln(x: f64) -> f64 {
        libm::log(x)
    }
    #[inline]
    pub fn ln_1p(x: f64) -> f64 {
        libm::log1p(x)
    }
    #[inline]
    pub fn sinh(x: f64) -> f64 {
        libm::sinh(x)
    }
    #[inline]
    pub fn cosh(x: f64) -> f64 {
        libm::cosh(x)
    }
    #[inline]
    pub fn powf(x: f64, y: f64) -> f64 {
        libm::pow(x, y)
    }
    #[inline]
    pub fn sin_cos(x: f64) -> (f64, f64) {
        libm::sincos(x)
    }
}

pub use imp::*;

/// Above this magnitude `asinh` switches to `ln 2 + ln|x|`.
const ASINH_LARGE: f64 = 1e8;

/// Inverse hyperbolic sine, stable for tiny and huge arguments.
pub fn asinh(x: f64) -> f64 {
    let a = x.abs();
    let r = if a > ASINH_LARGE {
        core::f64::consts::LN_2 + ln(a)
    } else {
        ln_1p(a + a * a / (1.0 + sqrt(1.0 + a * a)))
    };
    r.copysign(x)
}

/// `x^k` by repeated multiplication (exact for `k = 1`).
#[inline]
pub fn ipow(x: f64, k: u32) -> f64 {
    if k == 0 {
        return 1.0;
    }
    let mut acc = x;
    for _ in 1..k {
        acc *= x;
    }
    acc
}
