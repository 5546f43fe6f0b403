use super::error::{NnError, Result};

/// Mean squared error.
pub fn mse(pred: &[f64], target: &[f64]) -> Result<f64> {
    if pred.is_empty() || target.is_empty() {
        return Err(NnError::Usage("mse of an empty vector".into()));
    }
    if pred.len() != target.len() {
        return Err(NnError::Usage(format!(
            "mse length mismatch: {} predictions, {} targets",
            pred.len(),
            target.len()
        )));
    }
    let sum: f64 = pred.iter().zip(target).map(|(p, t)| (p - t) * (p - t)).sum();
    Ok(sum / pred.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_is_zero() {
        assert_eq!(mse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
    }

    #[test]
    fn by_hand() {
        assert_eq!(mse(&[1.0, 3.0], &[0.0, 2.0]).unwrap(), 1.0);
    }

    #[test]
    fn symmetric() {
        let a = [0.3, -1.2, 4.0];
        let b = [1.0, 0.5, -2.0];
        assert_eq!(mse(&a, &b).unwrap(), mse(&b, &a).unwrap());
    }

    #[test]
    fn empty_is_usage_error() {
        assert!(matches!(mse(&[], &[]), Err(NnError::Usage(_))));
    }
}
