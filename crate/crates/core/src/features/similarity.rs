use super::{FeatureError, Fingerprint};

fn overlap(a: &Fingerprint, b: &Fingerprint) -> Result<u32, FeatureError> {
    if a.len() != b.len() {
        return Err(FeatureError::LengthMismatch(a.len(), b.len()));
    }
    Ok(a.words().iter().zip(b.words()).map(|(x, y)| (x & y).count_ones()).sum())
}

/// `2|a∧b| / (|a|+|b|)`, 1 when both are empty.
pub fn dice_similarity(a: &Fingerprint, b: &Fingerprint) -> Result<f64, FeatureError> {
    let both = overlap(a, b)?;
    let total = a.count_ones() + b.count_ones();
    if total == 0 {
        return Ok(1.0);
    }
    Ok(2.0 * both as f64 / total as f64)
}

/// `|a∧b| / |a∨b|`, 1 when both are empty.
pub fn tanimoto_similarity(a: &Fingerprint, b: &Fingerprint) -> Result<f64, FeatureError> {
    let both = overlap(a, b)?;
    let union = a.count_ones() + b.count_ones() - both;
    if union == 0 {
        return Ok(1.0);
    }
    Ok(both as f64 / union as f64)
}
