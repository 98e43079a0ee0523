use crate::error::{Error, Result};

/// Observed order from values at spacings `h`, `2h`, `4h`:
/// `log2(|v2 - v3| / |v1 - v2|)`.
///
/// Fails when `|v1 - v2|` is within a hundred ulps of `|v1|`, where the
/// ratio would be dominated by round-off.
pub fn richardson_order(v1: f64, v2: f64, v3: f64) -> Result<f64> {
    let fine = (v1 - v2).abs();
    let scale = v1.abs().max(f64::MIN_POSITIVE);
    if fine <= 1e2 * f64::EPSILON * scale {
        return Err(Error::InconclusiveOrder {
            difference: fine,
            scale,
        });
    }
    Ok(((v2 - v3).abs() / fine).log2())
}
