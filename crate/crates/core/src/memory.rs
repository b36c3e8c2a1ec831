//! Momentum memory bank: one unit-norm feature per dataset sample.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::numcore::{l2_normalize, normalize_row, FeatureMatrix};

/// Momentum used when none is configured.
pub const DEFAULT_GAMMA: f64 = 0.2;

/// Row `i` always holds the feature of dataset sample `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct MemoryBank {
    features: FeatureMatrix,
    gamma: f64,
}

impl MemoryBank {
    /// Normalizes `features` into a fresh bank. Rows already flagged unit-norm
    /// are copied as they are.
    pub fn init(features: &FeatureMatrix, gamma: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&gamma) {
            return Err(Error::GammaOutOfRange(gamma));
        }
        let features = if features.is_unit_norm() {
            features.clone()
        } else {
            l2_normalize(features)?
        };
        Ok(MemoryBank { features, gamma })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn len(&self) -> usize {
        self.features.n()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dim(&self) -> usize {
        self.features.d()
    }

    /// Borrowed view of the current rows.
    pub fn features(&self) -> &FeatureMatrix {
        &self.features
    }

    /// Independent copy of the current rows.
    pub fn snapshot(&self) -> FeatureMatrix {
        self.features.clone()
    }

    /// Blends `γ·batch + (1−γ)·memory` into each listed row and renormalizes.
    ///
    /// Validation happens before any row is touched, so a failed call leaves the
    /// bank unchanged.
    pub fn update(&mut self, indices: &[usize], batch: &FeatureMatrix) -> Result<()> {
        if batch.n() != indices.len() {
            return Err(Error::LengthMismatch {
                expected: indices.len(),
                got: batch.n(),
            });
        }
        if batch.d() != self.dim() {
            return Err(Error::DimMismatch {
                expected: self.dim(),
                got: batch.d(),
            });
        }
        let mut seen = BTreeSet::new();
        for &i in indices {
            if i >= self.len() {
                return Err(Error::IndexOutOfRange {
                    index: i,
                    len: self.len(),
                });
            }
            if !seen.insert(i) {
                return Err(Error::DuplicateIndex(i));
            }
        }

        // γ=0 must be a bitwise no-op; skip the renormalization rounding.
        if self.gamma == 0.0 {
            return Ok(());
        }
        let g = self.gamma;
        let mut blended = vec![0.0; self.dim()];
        for (b, &i) in indices.iter().enumerate() {
            let old = self.features.row(i);
            for ((dst, &x), &m) in blended.iter_mut().zip(batch.row(b)).zip(old) {
                *dst = g * x + (1.0 - g) * m;
            }
            // Antipodal blends cannot be renormalized; keep the old row.
            if normalize_row(&mut blended).is_ok() {
                self.features.row_mut_unchecked(i).copy_from_slice(&blended);
            }
        }
        Ok(())
    }
}
