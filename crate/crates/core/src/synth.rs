//! Seeded synthetic datasets with the shape of a fatigue study: subjects ×
//! 5 sessions × 9 tasks, with extra pressure saturation injected into chosen
//! tasks during the fatigue sessions.
//!
//! # Random stream
//!
//! Every recording has its own stream so that results do not depend on
//! generation order or on how many subjects are requested:
//!
//! 1. `id = subject << 16 | session << 8 | task`
//! 2. `key = mix64(mix64(seed) ^ id * 0x9E3779B97F4A7C15)` where `mix64` is
//!    the SplitMix64 finaliser (`z ^= z >> 30; z *= 0xBF58476D1CE4E5B9;
//!    z ^= z >> 27; z *= 0x94D049BB133111EB; z ^= z >> 31`)
//! 3. the stream is xoshiro256** whose state is filled from `key` with
//!    SplitMix64 (`Xoshiro256StarStar::seed_from_u64`).
//!
//! Uniforms are `(next_u64 >> 11) * 2^-53`. Gaussians use Box-Muller on two
//! uniforms, `sqrt(-2 ln(1 - u1)) * cos(2 pi u2)`, one value per pair.
//!
//! Per sample, in order: one uniform decides saturation (`u < p_sat` emits
//! `max_level`); otherwise a Gaussian gives the pressure
//! `clamp(round(600 + 150 z), 1, max_level - 1)`; then two Gaussians add
//! noise (sd 2 units) to the x and y trajectory.

use std::collections::BTreeSet;
use std::f64::consts::PI;

use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256StarStar;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hwdata::{
    Dataset, DatasetError, DeviceProfile, PenStatus, Recording, RecordingError, RecordingKey,
    Sample, MAX_SUBJECT, SESSIONS, TASKS,
};

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

pub const PRESSURE_MEAN: f64 = 600.0;
pub const PRESSURE_SD: f64 = 150.0;
pub const POSITION_NOISE_SD: f64 = 2.0;
pub const SAMPLE_PERIOD_MS: i64 = 10;

const CENTER: f64 = 5000.0;
const SCALE: f64 = 2000.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_subjects: u32,
    pub samples_per_recording: usize,
    /// Probability that a sample saturates at rest, indexed by task - 1.
    pub base_saturation: [f64; TASKS as usize],
    /// Applied to `base_saturation` in fatigue sessions for high-variation
    /// tasks, indexed by task - 1.
    pub fatigue_multiplier: [f64; TASKS as usize],
    pub fatigue_sessions: BTreeSet<u8>,
    pub high_variation_tasks: BTreeSet<u8>,
    pub seed: u64,
    pub device: DeviceProfile,
}

impl Default for SynthConfig {
    fn default() -> Self {
        let high_variation_tasks: BTreeSet<u8> = [1, 2, 3, 5].into();
        let mut fatigue_multiplier = [1.0; TASKS as usize];
        for &task in &high_variation_tasks {
            fatigue_multiplier[usize::from(task - 1)] = 5.0;
        }
        Self {
            n_subjects: 21,
            samples_per_recording: 2000,
            base_saturation: [0.05; TASKS as usize],
            fatigue_multiplier,
            fatigue_sessions: [4, 5].into(),
            high_variation_tasks,
            seed: 0,
            device: DeviceProfile::default(),
        }
    }
}

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("n_subjects must be in 1..={MAX_SUBJECT}, got {0}")]
    SubjectCount(u32),
    #[error("samples_per_recording must be positive")]
    NoSamples,
    #[error("task {task}: base saturation {value} outside [0, 1)")]
    BaseSaturation { task: u8, value: f64 },
    #[error("task {task}: fatigue multiplier {value} must be >= 1")]
    Multiplier { task: u8, value: f64 },
    #[error("task {task}: base saturation x multiplier = {product} exceeds 1")]
    SaturationProduct { task: u8, product: f64 },
    #[error("fatigue session {0} outside 1..={SESSIONS}")]
    FatigueSession(u8),
    #[error("high-variation task {0} outside 1..={TASKS}")]
    HighVariationTask(u8),
    #[error("device max_level must be at least 2 to leave room below saturation")]
    DeviceRange,
    #[error("subject {subject} outside 1..={n_subjects}")]
    SubjectOutOfRange { subject: u32, n_subjects: u32 },
    #[error(transparent)]
    Recording(#[from] RecordingError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        if self.n_subjects == 0 || self.n_subjects > MAX_SUBJECT {
            return Err(SynthError::SubjectCount(self.n_subjects));
        }
        if self.samples_per_recording == 0 {
            return Err(SynthError::NoSamples);
        }
        if self.device.max_level < 2 {
            return Err(SynthError::DeviceRange);
        }
        for task in 1..=TASKS {
            let i = usize::from(task - 1);
            let base = self.base_saturation[i];
            let mult = self.fatigue_multiplier[i];
            if !(0.0..1.0).contains(&base) {
                return Err(SynthError::BaseSaturation { task, value: base });
            }
            if !(mult >= 1.0 && mult.is_finite()) {
                return Err(SynthError::Multiplier { task, value: mult });
            }
            if base * mult > 1.0 {
                return Err(SynthError::SaturationProduct {
                    task,
                    product: base * mult,
                });
            }
        }
        if let Some(&s) = self
            .fatigue_sessions
            .iter()
            .find(|s| !(1..=SESSIONS).contains(s))
        {
            return Err(SynthError::FatigueSession(s));
        }
        if let Some(&t) = self
            .high_variation_tasks
            .iter()
            .find(|t| !(1..=TASKS).contains(t))
        {
            return Err(SynthError::HighVariationTask(t));
        }
        Ok(())
    }

    /// Probability that a sample of this (session, task) cell saturates.
    pub fn saturation_probability(&self, session: u8, task: u8) -> f64 {
        let i = usize::from(task - 1);
        let fatigued =
            self.fatigue_sessions.contains(&session) && self.high_variation_tasks.contains(&task);
        let mult = if fatigued {
            self.fatigue_multiplier[i]
        } else {
            1.0
        };
        (self.base_saturation[i] * mult).min(1.0)
    }
}

fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Substream key for one recording.
pub fn substream_key(seed: u64, key: RecordingKey) -> u64 {
    let id = (u64::from(key.subject) << 16) | (u64::from(key.session) << 8) | u64::from(key.task);
    mix64(mix64(seed) ^ id.wrapping_mul(GOLDEN_GAMMA))
}

struct Stream(Xoshiro256StarStar);

impl Stream {
    fn new(key: u64) -> Self {
        Self(Xoshiro256StarStar::seed_from_u64(key))
    }

    fn uniform(&mut self) -> f64 {
        (self.0.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    fn gaussian(&mut self) -> f64 {
        let u1 = self.uniform();
        let u2 = self.uniform();
        (-2.0 * (1.0 - u1).ln()).sqrt() * (2.0 * PI * u2).cos()
    }
}

/// Point along a polyline at fraction `t` of its vertex sequence.
fn polyline(vertices: &[(f64, f64)], t: f64) -> (f64, f64) {
    let segments = (vertices.len() - 1) as f64;
    let pos = (t * segments).min(segments);
    let i = (pos.floor() as usize).min(vertices.len() - 2);
    let frac = pos - i as f64;
    let (x0, y0) = vertices[i];
    let (x1, y1) = vertices[i + 1];
    (x0 + (x1 - x0) * frac, y0 + (y1 - y0) * frac)
}

/// Noise-free pen position for `task` at progress `t` in [0, 1], in units of
/// the drawing scale around the origin.
fn trajectory(task: u8, t: f64) -> (f64, f64) {
    match task {
        // pentagon copy
        1 => {
            let v: Vec<(f64, f64)> = (0..=5)
                .map(|k| {
                    let a = PI / 2.0 + 2.0 * PI * f64::from(k) / 5.0;
                    (a.cos(), a.sin())
                })
                .collect();
            polyline(&v, t)
        }
        // house copy
        2 => polyline(
            &[
                (-0.8, -0.8),
                (0.8, -0.8),
                (0.8, 0.3),
                (0.0, 1.0),
                (-0.8, 0.3),
                (-0.8, -0.8),
                (0.8, 0.3),
                (-0.8, 0.3),
                (0.8, -0.8),
            ],
            t,
        ),
        // Archimedes spiral, five turns
        3 => {
            let theta = 10.0 * PI * t;
            let r = t;
            (r * theta.cos(), r * theta.sin())
        }
        // signature
        4 | 8 => {
            let w = 2.0 * PI * t;
            (
                -1.0 + 2.0 * t + 0.15 * (7.0 * w).sin(),
                0.4 * (5.0 * w).sin() * (w / 2.0).sin(),
            )
        }
        // concentric loops
        5 => {
            let theta = 2.0 * PI * 12.0 * t;
            let r = 0.8 + 0.05 * (3.0 * theta / 12.0).sin();
            (r * theta.cos(), r * theta.sin())
        }
        // capital letters: zig-zag strokes along a line
        6 => {
            let phase = (t * 24.0).fract();
            let y = if phase < 0.5 {
                phase * 2.0
            } else {
                2.0 - phase * 2.0
            };
            (-1.0 + 2.0 * t, 0.3 * y - 0.15)
        }
        // cursive sentence: prolate loops along a line
        7 => {
            let theta = 2.0 * PI * 30.0 * t;
            (-1.0 + 2.0 * t - 0.03 * theta.sin(), 0.12 * theta.cos())
        }
        // spring drawing: coil
        _ => {
            let theta = 2.0 * PI * 15.0 * t;
            (-1.0 + 2.0 * t + 0.1 * theta.cos(), 0.4 * theta.sin())
        }
    }
}

/// Deterministic recording for one (subject, session, task) cell.
pub fn generate_recording(
    config: &SynthConfig,
    subject: u32,
    session: u8,
    task: u8,
) -> Result<Recording, SynthError> {
    config.validate()?;
    if subject == 0 || subject > config.n_subjects {
        return Err(SynthError::SubjectOutOfRange {
            subject,
            n_subjects: config.n_subjects,
        });
    }
    let key = RecordingKey::new(subject, session, task)?;
    Ok(build_recording(config, key)?)
}

fn build_recording(config: &SynthConfig, key: RecordingKey) -> Result<Recording, RecordingError> {
    let max_level = config.device.max_level;
    let p_sat = config.saturation_probability(key.session, key.task);
    let n = config.samples_per_recording;
    let mut rng = Stream::new(substream_key(config.seed, key));

    let samples = (0..n)
        .map(|i| {
            let pressure = if rng.uniform() < p_sat {
                max_level
            } else {
                let raw = (PRESSURE_MEAN + PRESSURE_SD * rng.gaussian()).round();
                raw.clamp(1.0, f64::from(max_level - 1)) as u32
            };
            let t = if n > 1 {
                i as f64 / (n - 1) as f64
            } else {
                0.0
            };
            let (u, v) = trajectory(key.task, t);
            let x = CENTER + SCALE * u + POSITION_NOISE_SD * rng.gaussian();
            let y = CENTER + SCALE * v + POSITION_NOISE_SD * rng.gaussian();
            let w = 2.0 * PI * t;
            Sample {
                x: x.round() as i64,
                y: y.round() as i64,
                timestamp: i as i64 * SAMPLE_PERIOD_MS,
                pen_status: PenStatus::Down,
                azimuth: 450 + (20.0 * w.sin()).round() as i64,
                altitude: 600 + (10.0 * w.cos()).round() as i64,
                pressure,
            }
        })
        .collect();
    Recording::new(key, samples, config.device)
}

/// `n_subjects × 5 × 9` recordings.
pub fn generate_dataset(config: &SynthConfig) -> Result<Dataset, SynthError> {
    config.validate()?;
    let keys: Vec<RecordingKey> = (1..=config.n_subjects)
        .flat_map(|subject| {
            (1..=SESSIONS).flat_map(move |session| {
                (1..=TASKS).map(move |task| RecordingKey {
                    subject,
                    session,
                    task,
                })
            })
        })
        .collect();
    let recordings: Vec<Recording> = keys
        .into_par_iter()
        .map(|key| build_recording(config, key))
        .collect::<Result<_, _>>()?;
    let mut dataset = Dataset::new();
    for recording in recordings {
        dataset.insert(recording)?;
    }
    Ok(dataset)
}
