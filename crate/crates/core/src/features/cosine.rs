use crate::error::{Error, Result};

/// `1 - a·b / (|a||b|)`. Two zero vectors are at distance 0, a zero and a
/// non-zero vector at distance 1.
pub fn cosine_intensity_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch(a.len(), b.len()));
    }
    if a.is_empty() {
        return Err(Error::EmptyVector);
    }
    let (mut dot, mut na, mut nb) = (0.0, 0.0, 0.0);
    for (&x, &y) in a.iter().zip(b) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    match (na == 0.0, nb == 0.0) {
        (true, true) => Ok(0.0),
        (true, false) | (false, true) => Ok(1.0),
        _ => Ok((1.0 - dot / (na.sqrt() * nb.sqrt())).max(0.0)),
    }
}
