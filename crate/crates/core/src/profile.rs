//! Time-indexed log of running-profile vectors paired with metered power.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::schema::FeatureSchema;

/// Append-only log of (time, feature vector, power) records with a fixed
/// timestep. This is both the training corpus and the closed-loop trace
/// format.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileLog {
    schema: FeatureSchema,
    times_s: Vec<u64>,
    features: Vec<f64>,
    power_w: Vec<f64>,
}

impl ProfileLog {
    pub fn new(schema: FeatureSchema) -> Self {
        ProfileLog {
            schema,
            times_s: Vec::new(),
            features: Vec::new(),
            power_w: Vec::new(),
        }
    }

    pub fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    pub fn len(&self) -> usize {
        self.times_s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times_s.is_empty()
    }

    /// Push one record; enforces width and the strictly-increasing,
    /// fixed-step timestamp invariant.
    pub fn push(&mut self, time_s: u64, features: &[f64], power_w: f64) -> Result<()> {
        if features.len() != self.schema.len() {
            return Err(Error::DimMismatch {
                what: "profile record",
                expected: self.schema.len(),
                got: features.len(),
            });
        }
        if !(features.iter().all(|v| v.is_finite()) && power_w.is_finite()) {
            return Err(Error::NonFinite("profile record"));
        }
        let n = self.times_s.len();
        if n >= 1 {
            let last = self.times_s[n - 1];
            if time_s <= last {
                return Err(Error::InvalidConfig(alloc::format!(
                    "timestamps must increase strictly: {time_s} after {last}"
                )));
            }
            if n >= 2 {
                let step = last - self.times_s[n - 2];
                if time_s - last != step {
                    return Err(Error::InvalidConfig(alloc::format!(
                        "timestep changed from {step} to {}",
                        time_s - last
                    )));
                }
            }
        }
        self.times_s.push(time_s);
        self.features.extend_from_slice(features);
        self.power_w.push(power_w);
        Ok(())
    }

    pub fn time(&self, row: usize) -> u64 {
        self.times_s[row]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        let w = self.schema.len();
        &self.features[row * w..(row + 1) * w]
    }

    pub fn power(&self, row: usize) -> f64 {
        self.power_w[row]
    }

    pub fn powers(&self) -> &[f64] {
        &self.power_w
    }

    /// Timestep in seconds; None until two records exist.
    pub fn dt_s(&self) -> Option<u64> {
        (self.times_s.len() >= 2).then(|| self.times_s[1] - self.times_s[0])
    }

    /// Copy rows [start, end) into a matrix.
    pub fn rows_mat(&self, start: usize, end: usize) -> Mat {
        let w = self.schema.len();
        let mut m = Mat::zeros(end - start, w);
        for (i, r) in (start..end).enumerate() {
            m.row_mut(i).copy_from_slice(self.row(r));
        }
        m
    }
}
