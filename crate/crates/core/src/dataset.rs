//! Supervised dataset preparation: min-max normalization, sliding windows
//! over the profile log, and seeded train/test splits.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::profile::ProfileLog;
use crate::rng::SplitMix64;
use crate::schema::Bounds;

/// Per-feature and per-target affine maps into [0, 1]:
/// `scaled = (raw − shift) / scale`. Constant columns get scale 1 so they map
/// to 0 and round-trip exactly.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Scaler {
    pub shift: Vec<f64>,
    pub scale: Vec<f64>,
    pub power_shift: f64,
    pub power_scale: f64,
}

impl Scaler {
    pub fn n_features(&self) -> usize {
        self.shift.len()
    }

    #[inline]
    pub fn apply_feature(&self, idx: usize, raw: f64) -> f64 {
        (raw - self.shift[idx]) / self.scale[idx]
    }

    #[inline]
    pub fn invert_feature(&self, idx: usize, scaled: f64) -> f64 {
        scaled * self.scale[idx] + self.shift[idx]
    }

    #[inline]
    pub fn apply_power(&self, raw: f64) -> f64 {
        (raw - self.power_shift) / self.power_scale
    }

    #[inline]
    pub fn invert_power(&self, scaled: f64) -> f64 {
        scaled * self.power_scale + self.power_shift
    }

    pub fn apply_row(&self, raw: &[f64], out: &mut [f64]) {
        for (i, (&r, o)) in raw.iter().zip(out.iter_mut()).enumerate() {
            *o = (r - self.shift[i]) / self.scale[i];
        }
    }

    /// Map physical-unit bounds on feature `idx` into scaled units.
    pub fn scale_bounds(&self, idx: usize, b: Bounds) -> Bounds {
        Bounds {
            lower: self.apply_feature(idx, b.lower),
            upper: self.apply_feature(idx, b.upper),
        }
    }
}

/// Fit a min-max scaler over every feature column and the power target.
pub fn fit_scaler(log: &ProfileLog) -> Result<Scaler> {
    if log.is_empty() {
        return Err(Error::EmptyInput("profile log"));
    }
    let width = log.schema().len();
    let mut min = vec![f64::INFINITY; width];
    let mut max = vec![f64::NEG_INFINITY; width];
    let mut p_min = f64::INFINITY;
    let mut p_max = f64::NEG_INFINITY;
    for r in 0..log.len() {
        for (i, &v) in log.row(r).iter().enumerate() {
            min[i] = min[i].min(v);
            max[i] = max[i].max(v);
        }
        p_min = p_min.min(log.power(r));
        p_max = p_max.max(log.power(r));
    }
    let mut shift = Vec::with_capacity(width);
    let mut scale = Vec::with_capacity(width);
    for i in 0..width {
        let range = max[i] - min[i];
        if range > 0.0 {
            shift.push(min[i]);
            scale.push(range);
        } else {
            shift.push(min[i]);
            scale.push(1.0);
        }
    }
    let p_range = p_max - p_min;
    Ok(Scaler {
        shift,
        scale,
        power_shift: p_min,
        power_scale: if p_range > 0.0 { p_range } else { 1.0 },
    })
}

/// One supervised sample: a (T+1) × n window of scaled feature rows and the
/// scaled power at the final row.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceSample {
    pub inputs: Mat,
    pub target: f64,
    pub origin_index: usize,
}

/// Slide a length-(T+1) window over the log. Sample k covers rows k..=k+T
/// and is labeled with the power at row k+T; exactly `len − T` samples.
pub fn make_windows(log: &ProfileLog, horizon: usize, scaler: &Scaler) -> Result<Vec<SequenceSample>> {
    let needed = horizon + 1;
    if log.len() < needed {
        return Err(Error::LengthMismatch {
            what: "profile log for windowing",
            expected: needed,
            got: log.len(),
        });
    }
    let width = log.schema().len();
    let count = log.len() - horizon;
    let mut samples = Vec::with_capacity(count);
    for k in 0..count {
        let mut inputs = Mat::zeros(needed, width);
        for r in 0..needed {
            scaler.apply_row(log.row(k + r), inputs.row_mut(r));
        }
        samples.push(SequenceSample {
            inputs,
            target: scaler.apply_power(log.power(k + horizon)),
            origin_index: k,
        });
    }
    Ok(samples)
}

/// Seeded shuffle split into (train, test). `test_fraction` of the samples
/// (rounded) go to the test side; both sides must end up non-empty.
pub fn split(
    samples: Vec<SequenceSample>,
    test_fraction: f64,
    seed: u64,
) -> Result<(Vec<SequenceSample>, Vec<SequenceSample>)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::InvalidConfig(alloc::format!(
            "test_fraction {test_fraction} must lie in (0, 1)"
        )));
    }
    let n = samples.len();
    let n_test = crate::float::round(n as f64 * test_fraction) as usize;
    if n_test == 0 || n_test >= n {
        return Err(Error::InvalidConfig(alloc::format!(
            "split of {n} samples at fraction {test_fraction} leaves an empty side"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    SplitMix64::from_seed_stream(seed, 0x53504c49).shuffle(&mut order);

    let mut test_flags = vec![false; n];
    for &i in order.iter().take(n_test) {
        test_flags[i] = true;
    }
    let mut train = Vec::with_capacity(n - n_test);
    let mut test = Vec::with_capacity(n_test);
    for (sample, is_test) in samples.into_iter().zip(test_flags) {
        if is_test {
            test.push(sample);
        } else {
            train.push(sample);
        }
    }
    Ok((train, test))
}
