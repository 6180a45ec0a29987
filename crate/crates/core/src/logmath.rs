//! Natural-log arithmetic with a finite "log of zero".

/// Stand-in for `ln(0)`. Finite so that sums never produce NaN.
pub const LOG_ZERO: f64 = -1.0e10;

/// Anything at or below this is treated as impossible.
pub const LOG_ZERO_THRESHOLD: f64 = -0.5e10;

#[inline]
pub fn is_log_zero(x: f64) -> bool {
    x <= LOG_ZERO_THRESHOLD
}

/// `ln(p)`, or [`LOG_ZERO`] when `p` is zero.
#[inline]
pub fn safe_ln(p: f64) -> f64 {
    if p > 0.0 {
        p.ln()
    } else {
        LOG_ZERO
    }
}

/// Saturating product in the log domain: impossible stays impossible.
#[inline]
pub fn log_mul(a: f64, b: f64) -> f64 {
    if is_log_zero(a) || is_log_zero(b) {
        LOG_ZERO
    } else {
        a + b
    }
}
