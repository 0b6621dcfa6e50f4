//! Per-recording features: pressure saturation ratio, mean pressure and the
//! unit-step discrete speed of the pen coordinates.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hwdata::{DeviceProfile, PenStatus, Recording};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FeatureError {
    #[error("pressure series is empty")]
    EmptySeries,
    #[error("saturation level must be positive")]
    ZeroSatLevel,
    #[error("first difference needs at least 2 points, got {0}")]
    TooShort(usize),
    #[error("pressure level {level} outside [0, {max_level}]")]
    LevelOutOfRange { level: u32, max_level: u32 },
}

/// Fraction of samples whose pressure is at or above `sat_level`.
pub fn saturation_ratio(pressure: &[u32], sat_level: u32) -> Result<f64, FeatureError> {
    if pressure.is_empty() {
        return Err(FeatureError::EmptySeries);
    }
    if sat_level == 0 {
        return Err(FeatureError::ZeroSatLevel);
    }
    let saturated = pressure.iter().filter(|&&p| p >= sat_level).count();
    Ok(saturated as f64 / pressure.len() as f64)
}

/// Arithmetic mean of the pressure series. The sum is accumulated exactly in
/// integers, so the only rounding is the final division.
pub fn mean_pressure(pressure: &[u32]) -> Result<f64, FeatureError> {
    if pressure.is_empty() {
        return Err(FeatureError::EmptySeries);
    }
    let total: u64 = pressure.iter().map(|&p| u64::from(p)).sum();
    Ok(total as f64 / pressure.len() as f64)
}

/// `out[i] = f[i + 1] - f[i]`, i.e. the derivative with a step of one sample.
pub fn first_difference(f: &[f64]) -> Result<Vec<f64>, FeatureError> {
    if f.len() < 2 {
        return Err(FeatureError::TooShort(f.len()));
    }
    Ok(f.windows(2).map(|w| w[1] - w[0]).collect())
}

/// Converts a pressure level to Newton/mm².
///
/// The tablet only documents the saturation point, so the map is assumed
/// linear through (0, 0) and (`max_level`, `force_at_max`).
pub fn level_to_force(level: u32, device: &DeviceProfile) -> Result<f64, FeatureError> {
    if level > device.max_level {
        return Err(FeatureError::LevelOutOfRange {
            level,
            max_level: device.max_level,
        });
    }
    Ok(f64::from(level) / f64::from(device.max_level) * device.force_at_max)
}

/// Which samples contribute to the pressure features.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum PressureScope {
    /// Every sample, pen-up included.
    #[default]
    All,
    PenDown,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FeatureOptions {
    /// Defaults to the device `max_level`.
    pub sat_level: Option<u32>,
    pub scope: PressureScope,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub saturation_ratio: f64,
    pub mean_pressure: f64,
    pub n_samples: usize,
    pub speed_x: Vec<f64>,
    pub speed_y: Vec<f64>,
}

/// min/max/mean of `|v|` over a speed series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpeedSummary {
    pub len: usize,
    pub min_abs: Option<f64>,
    pub max_abs: Option<f64>,
    pub mean_abs: Option<f64>,
}

impl SpeedSummary {
    pub fn of(series: &[f64]) -> Self {
        if series.is_empty() {
            return Self {
                len: 0,
                min_abs: None,
                max_abs: None,
                mean_abs: None,
            };
        }
        let abs = series.iter().map(|v| v.abs());
        let min = abs.clone().fold(f64::INFINITY, f64::min);
        let max = abs.clone().fold(0.0, f64::max);
        let mean = abs.sum::<f64>() / series.len() as f64;
        Self {
            len: series.len(),
            min_abs: Some(min),
            max_abs: Some(max),
            mean_abs: Some(mean),
        }
    }
}

fn scoped_pressures(recording: &Recording, scope: PressureScope) -> Vec<u32> {
    recording
        .samples()
        .iter()
        .filter(|s| scope == PressureScope::All || s.pen_status == PenStatus::Down)
        .map(|s| s.pressure)
        .collect()
}

pub fn recording_saturation(
    recording: &Recording,
    options: &FeatureOptions,
) -> Result<f64, FeatureError> {
    let sat_level = options.sat_level.unwrap_or(recording.device().max_level);
    saturation_ratio(&scoped_pressures(recording, options.scope), sat_level)
}

pub fn recording_mean_pressure(
    recording: &Recording,
    options: &FeatureOptions,
) -> Result<f64, FeatureError> {
    mean_pressure(&scoped_pressures(recording, options.scope))
}

/// Full feature bundle with default options.
pub fn extract_features(recording: &Recording) -> Result<FeatureVector, FeatureError> {
    extract_features_with(recording, &FeatureOptions::default())
}

/// A single-sample recording yields empty speed series.
pub fn extract_features_with(
    recording: &Recording,
    options: &FeatureOptions,
) -> Result<FeatureVector, FeatureError> {
    let samples = recording.samples();
    let (speed_x, speed_y) = if samples.len() < 2 {
        (Vec::new(), Vec::new())
    } else {
        let xs: Vec<f64> = samples.iter().map(|s| s.x as f64).collect();
        let ys: Vec<f64> = samples.iter().map(|s| s.y as f64).collect();
        (first_difference(&xs)?, first_difference(&ys)?)
    };
    Ok(FeatureVector {
        saturation_ratio: recording_saturation(recording, options)?,
        mean_pressure: recording_mean_pressure(recording, options)?,
        n_samples: samples.len(),
        speed_x,
        speed_y,
    })
}
