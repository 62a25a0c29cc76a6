//! Thin wrappers over `libm` so that numerical code reads naturally.

/// Beyond this argument `tanh` and `sech` are saturated to double precision.
pub const SATURATION: f64 = 40.0;

#[inline]
pub fn exp(x: f64) -> f64 {
    libm::exp(x)
}

#[inline]
pub fn ln(x: f64) -> f64 {
    libm::log(x)
}

#[inline]
pub fn powf(x: f64, y: f64) -> f64 {
    libm::pow(x, y)
}

#[inline]
pub fn powi(x: f64, n: i32) -> f64 {
    libm::pow(x, n as f64)
}

#[inline]
pub fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

#[inline]
pub fn sin(x: f64) -> f64 {
    libm::sin(x)
}

#[inline]
pub fn cos(x: f64) -> f64 {
    libm::cos(x)
}

#[inline]
pub fn atanh(x: f64) -> f64 {
    libm::atanh(x)
}

/// `tanh`, clamped to `±1` for `|x| >= SATURATION`.
pub fn tanh(x: f64) -> f64 {
    if x >= SATURATION {
        1.0
    } else if x <= -SATURATION {
        -1.0
    } else {
        libm::tanh(x)
    }
}

/// `sech`, clamped to `0` for `|x| >= SATURATION`.
///
/// Evaluated as `2e^{-|x|} / (1 + e^{-2|x|})`, which cannot overflow.
pub fn sech(x: f64) -> f64 {
    let a = x.abs();
    if a >= SATURATION {
        return 0.0;
    }
    let e = libm::exp(-a);
    2.0 * e / (1.0 + e * e)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sech_tanh_identity() {
        for i in -100..=100 {
            let x = i as f64 * 0.37;
            let (s, t) = (sech(x), tanh(x));
            assert!((s * s + t * t - 1.0).abs() < 1e-15, "x = {x}");
        }
    }

    #[test]
    fn saturation() {
        assert_eq!(tanh(45.0), 1.0);
        assert_eq!(tanh(-45.0), -1.0);
        assert_eq!(sech(45.0), 0.0);
        assert!((sech(1.0) - 0.648_054_273_663_885_4).abs() < 1e-15);
    }
}
