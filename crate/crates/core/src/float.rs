//! f64 math shims: `std` intrinsics when available, `libm` otherwise.

#![allow(dead_code)]

macro_rules! shim1 {
    ($name:ident, $libm:ident) => {
        #[cfg(feature = "std")]
        #[inline(always)]
        pub(crate) fn $name(x: f64) -> f64 {
            x.$name()
        }
        #[cfg(not(feature = "std"))]
        #[inline(always)]
        pub(crate) fn $name(x: f64) -> f64 {
            libm::$libm(x)
        }
    };
}

shim1!(exp, exp);
shim1!(ln, log);
shim1!(sqrt, sqrt);
shim1!(tanh, tanh);
shim1!(sin, sin);
shim1!(cos, cos);
shim1!(floor, floor);
shim1!(round, round);

#[cfg(feature = "std")]
#[inline(always)]
pub(crate) fn powf(x: f64, y: f64) -> f64 {
    x.powf(y)
}

#[cfg(not(feature = "std"))]
#[inline(always)]
pub(crate) fn powf(x: f64, y: f64) -> f64 {
    libm::pow(x, y)
}
