//! Regression metrics reported in label units.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub mse: f64,
    pub mae: f64,
    /// Squared Pearson correlation between predictions and targets.
    pub r_squared: f64,
    pub count: usize,
}

fn check_pair(pred: &[f64], target: &[f64], min: usize, what: &str) -> Result<()> {
    if pred.len() != target.len() {
        return Err(Error::Shape(format!(
            "{what}: {} predictions vs {} targets",
            pred.len(),
            target.len()
        )));
    }
    if pred.len() < min {
        return Err(Error::InvalidArgument(format!(
            "{what} needs at least {min} values, got {}",
            pred.len()
        )));
    }
    Ok(())
}

pub fn mse(pred: &[f64], target: &[f64]) -> Result<f64> {
    check_pair(pred, target, 1, "mse")?;
    Ok(pred
        .iter()
        .zip(target)
        .map(|(p, t)| (p - t) * (p - t))
        .sum::<f64>()
        / pred.len() as f64)
}

pub fn mae(pred: &[f64], target: &[f64]) -> Result<f64> {
    check_pair(pred, target, 1, "mae")?;
    Ok(pred
        .iter()
        .zip(target)
        .map(|(p, t)| (p - t).abs())
        .sum::<f64>()
        / pred.len() as f64)
}

/// Square of the Pearson correlation coefficient.
///
/// This is not the coefficient of determination: it ignores scale and sign,
/// so `r²(a·pred + b, target) == r²(pred, target)` for any `a ≠ 0`. Returns 0
/// when either side has zero variance.
pub fn r_squared(pred: &[f64], target: &[f64]) -> Result<f64> {
    check_pair(pred, target, 2, "r_squared")?;
    let n = pred.len() as f64;
    let mp = pred.iter().sum::<f64>() / n;
    let mt = target.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (&p, &t) in pred.iter().zip(target) {
        sxy += (p - mp) * (t - mt);
        sxx += (p - mp) * (p - mp);
        syy += (t - mt) * (t - mt);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Ok(0.0);
    }
    Ok(((sxy * sxy) / (sxx * syy)).min(1.0))
}

impl Metrics {
    /// All metrics at once; needs at least two values.
    pub fn compute(pred: &[f64], target: &[f64]) -> Result<Self> {
        Ok(Self {
            mse: mse(pred, target)?,
            mae: mae(pred, target)?,
            r_squared: r_squared(pred, target)?,
            count: pred.len(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn r_squared_examples() {
        assert_eq!(r_squared(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(), 1.0);
        assert!((r_squared(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(
            r_squared(&[1.0, -1.0, 1.0, -1.0], &[1.0, 1.0, -1.0, -1.0]).unwrap(),
            0.0
        );
        assert_eq!(r_squared(&[2.0, 2.0, 2.0], &[1.0, 5.0, 3.0]).unwrap(), 0.0);
        assert!(r_squared(&[1.0], &[1.0]).is_err());
    }

    #[test]
    fn mae_examples() {
        assert_eq!(mae(&[1.0, 3.0], &[0.0, 0.0]).unwrap(), 2.0);
        assert_eq!(mae(&[4.0, 5.0], &[4.0, 5.0]).unwrap(), 0.0);
        assert!(mae(&[1.0], &[1.0, 2.0]).is_err());
    }

    proptest! {
        #[test]
        fn mae_is_symmetric(a in proptest::collection::vec(-100.0f64..100.0, 1..20), shift in -5.0f64..5.0) {
            let b: Vec<f64> = a.iter().enumerate().map(|(i, v)| v * 0.5 + shift + i as f64).collect();
            prop_assert_eq!(mae(&a, &b).unwrap(), mae(&b, &a).unwrap());
        }

        #[test]
        fn r_squared_is_affine_invariant(
            pred in proptest::collection::vec(-10.0f64..10.0, 3..30),
            slope in prop_oneof![-5.0f64..-0.1, 0.1f64..5.0],
            offset in -50.0f64..50.0,
        ) {
            let target: Vec<f64> = pred.iter().enumerate().map(|(i, p)| p.sin() + (i as f64).cos()).collect();
            let scaled: Vec<f64> = pred.iter().map(|p| slope * p + offset).collect();
            let a = r_squared(&pred, &target).unwrap();
            let b = r_squared(&scaled, &target).unwrap();
            prop_assert!((a - b).abs() < 1e-10, "{} vs {}", a, b);
        }
    }
}
