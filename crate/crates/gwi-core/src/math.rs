//! Thin wrappers over libm so the crate builds without std.

pub fn pow(x: f64, y: f64) -> f64 {
    libm::pow(x, y)
}

pub fn exp(x: f64) -> f64 {
    libm::exp(x)
}

pub fn expm1(x: f64) -> f64 {
    libm::expm1(x)
}

pub fn ln(x: f64) -> f64 {
    libm::log(x)
}

pub fn ln_1p(x: f64) -> f64 {
    libm::log1p(x)
}

pub fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

pub fn floor(x: f64) -> f64 {
    libm::floor(x)
}

pub fn abs(x: f64) -> f64 {
    libm::fabs(x)
}
