use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Min-max bounds of one column; pass-through columns keep their raw value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureScale {
    pub min: f64,
    pub max: f64,
    pub normalized: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub scales: Vec<FeatureScale>,
}

impl Normalizer {
    pub fn new(scales: Vec<FeatureScale>) -> Result<Self> {
        let n = Normalizer { scales };
        n.validate()?;
        Ok(n)
    }

    pub fn validate(&self) -> Result<()> {
        for (i, s) in self.scales.iter().enumerate() {
            if !s.min.is_finite() || !s.max.is_finite() {
                return Err(Error::invalid(format!("feature {i} has non-finite bounds")));
            }
            if s.normalized && !(s.max > s.min) {
                return Err(Error::invalid(format!(
                    "feature {i}: x_max ({}) must exceed x_min ({})",
                    s.max, s.min
                )));
            }
        }
        Ok(())
    }

    /// Record per-column bounds of `rows`; `mask[i]` selects which columns are scaled.
    pub fn fit(rows: &[Vec<f64>], mask: &[bool]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::invalid("cannot fit a normalizer on zero rows"));
        }
        let mut scales: Vec<FeatureScale> = mask
            .iter()
            .map(|&normalized| FeatureScale {
                min: f64::INFINITY,
                max: f64::NEG_INFINITY,
                normalized,
            })
            .collect();
        for row in rows {
            if row.len() != mask.len() {
                return Err(Error::Dimension {
                    expected: mask.len(),
                    got: row.len(),
                });
            }
            for (s, &v) in scales.iter_mut().zip(row) {
                s.min = s.min.min(v);
                s.max = s.max.max(v);
            }
        }
        Self::new(scales)
    }

    pub fn dim(&self) -> usize {
        self.scales.len()
    }

    pub fn normalize(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check(x)?;
        Ok(x.iter()
            .zip(&self.scales)
            .map(|(&v, s)| if s.normalized { (v - s.min) / (s.max - s.min) } else { v })
            .collect())
    }

    pub fn denormalize(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check(x)?;
        Ok(x.iter()
            .zip(&self.scales)
            .map(|(&v, s)| if s.normalized { s.min + v * (s.max - s.min) } else { v })
            .collect())
    }

    fn check(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::Dimension {
                expected: self.dim(),
                got: x.len(),
            });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn norm() -> Normalizer {
        Normalizer::new(vec![
            FeatureScale { min: 2.0, max: 6.0, normalized: true },
            FeatureScale { min: 0.0, max: 0.0, normalized: false },
            FeatureScale { min: -10.0, max: 50.0, normalized: true },
        ])
        .unwrap()
    }

    #[test]
    fn bounds_map_to_unit_interval() {
        let n = norm();
        assert_eq!(n.normalize(&[2.0, 0.7, -10.0]).unwrap(), vec![0.0, 0.7, 0.0]);
        assert_eq!(n.normalize(&[6.0, 0.7, 50.0]).unwrap(), vec![1.0, 0.7, 1.0]);
        assert_eq!(n.normalize(&[4.0, 0.7, 20.0]).unwrap(), vec![0.5, 0.7, 0.5]);
        // extrapolation is allowed
        assert!(n.normalize(&[8.0, 0.0, 0.0]).unwrap()[0] > 1.0);
    }

    #[test]
    fn degenerate_range_rejected() {
        let bad = Normalizer::new(vec![FeatureScale { min: 1.0, max: 1.0, normalized: true }]);
        assert!(bad.is_err());
        assert!(Normalizer::fit(&[vec![1.0, 2.0], vec![1.0, 3.0]], &[true, true]).is_err());
        assert!(Normalizer::fit(&[vec![1.0, 2.0], vec![1.0, 3.0]], &[false, true]).is_ok());
    }

    #[test]
    fn fit_records_extremes() {
        let n = Normalizer::fit(&[vec![1.0, 5.0], vec![3.0, -5.0], vec![2.0, 0.0]], &[true, true])
            .unwrap();
        assert_eq!((n.scales[0].min, n.scales[0].max), (1.0, 3.0));
        assert_eq!((n.scales[1].min, n.scales[1].max), (-5.0, 5.0));
        assert!(n.normalize(&[1.0]).is_err());
    }

    proptest! {
        #[test]
        fn roundtrip_identity(a in -1e3..1e3f64, b in -1.0..1.0f64, c in -50.0..100.0f64) {
            let n = norm();
            let x = [a, b, c];
            let back = n.denormalize(&n.normalize(&x).unwrap()).unwrap();
            for (u, v) in x.iter().zip(&back) {
                prop_assert!((u - v).abs() <= 1e-12 * u.abs().max(1.0));
            }
        }
    }
}
