//! Thin wrappers over `libm` so the whole crate computes transcendentals the
//! same way everywhere (and stays `no_std`).

#[inline(always)]
pub(crate) fn exp(x: f64) -> f64 {
    libm::exp(x)
}

#[inline(always)]
pub(crate) fn ln(x: f64) -> f64 {
    libm::log(x)
}

#[inline(always)]
pub(crate) fn ln_1p(x: f64) -> f64 {
    libm::log1p(x)
}

#[inline(always)]
pub(crate) fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

#[inline(always)]
pub(crate) fn fabs(x: f64) -> f64 {
    libm::fabs(x)
}

#[inline(always)]
pub(crate) fn cos(x: f64) -> f64 {
    libm::cos(x)
}

/// Integer power by repeated squaring. Bit-stable, unlike `f64::powi` which
/// is allowed to differ between platforms.
pub(crate) fn powi(x: f64, n: u32) -> f64 {
    let mut base = x;
    let mut n = n;
    let mut acc = 1.0;
    while n > 0 {
        if n & 1 == 1 {
            acc *= base;
        }
        base *= base;
        n >>= 1;
    }
    acc
}
