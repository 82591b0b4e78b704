//! Synthetic capture generation. Each activity class gets a per-sensor
//! motion profile (a base level, a cadence sinusoid, Gaussian jitter) so
//! pipelines can be exercised end to end without recorded data.
//!
//! Every record draws its noise from a sub-seed mixed from the master seed
//! and the record id, so record 17 has the same samples whether it is
//! generated alone or as part of a batch.

use std::f64::consts::TAU;
use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::sensor_model::{
    AdlLabel, Capture, Record, Sample, SensorKind, SensorWindow, MIN_WINDOW_SAMPLES,
    NOMINAL_PERIOD_MS,
};

/// Signal shape for one sensor of one activity class. Each axis carries
/// `base + amplitude * sin(tau * freq_hz * t)` plus independent Gaussian
/// noise; the sinusoid is shared across axes, the noise is not.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorProfile {
    pub base: f64,
    pub freq_hz: f64,
    pub amplitude: f64,
    pub noise_std: f64,
}

impl SensorProfile {
    fn validate(&self, context: &str) -> Result<(), SynthError> {
        let fields = [self.base, self.freq_hz, self.amplitude, self.noise_std];
        if fields.iter().any(|v| !v.is_finite()) {
            return Err(SynthError::InvalidConfig(format!("{}: non-finite profile field", context)));
        }
        if self.freq_hz < 0.0 {
            return Err(SynthError::InvalidConfig(format!("{}: negative frequency", context)));
        }
        if self.noise_std < 0.0 {
            return Err(SynthError::InvalidConfig(format!("{}: negative noise std", context)));
        }
        Ok(())
    }
}

/// Profiles for the three sensors of one class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassProfile {
    pub acc: SensorProfile,
    pub mag: SensorProfile,
    pub gyro: SensorProfile,
}

impl ClassProfile {
    pub fn sensor(&self, kind: SensorKind) -> &SensorProfile {
        match kind {
            SensorKind::Accelerometer => &self.acc,
            SensorKind::Magnetometer => &self.mag,
            SensorKind::Gyroscope => &self.gyro,
        }
    }
}

/// One profile per activity class, keyed by label token in JSON.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassProfiles {
    pub running: ClassProfile,
    pub walking: ClassProfile,
    pub upstairs: ClassProfile,
    pub downstairs: ClassProfile,
    pub standing: ClassProfile,
}

impl ClassProfiles {
    pub fn for_label(&self, label: AdlLabel) -> &ClassProfile {
        match label {
            AdlLabel::Running => &self.running,
            AdlLabel::Walking => &self.walking,
            AdlLabel::GoingUpstairs => &self.upstairs,
            AdlLabel::GoingDownstairs => &self.downstairs,
            AdlLabel::Standing => &self.standing,
        }
    }

    pub fn from_json(text: &str) -> Result<ClassProfiles, SynthError> {
        let profiles: ClassProfiles =
            serde_json::from_str(text).map_err(|e| SynthError::MalformedProfiles(e.to_string()))?;
        profiles.validate()?;
        Ok(profiles)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("profiles serialize")
    }

    fn validate(&self) -> Result<(), SynthError> {
        for label in AdlLabel::ALL {
            let class = self.for_label(label);
            for kind in SensorKind::ALL {
                class
                    .sensor(kind)
                    .validate(&format!("{} {}", label.token(), kind.token()))?;
            }
        }
        Ok(())
    }
}

/// Walking-speed cadences: accelerometer sinusoids at 3.0, 1.8, 1.4 and
/// 1.6 Hz for running, walking, stairs up and stairs down; standing is
/// flat. Magnetometer and gyroscope share the cadence with their own
/// base levels and swing amplitudes.
pub fn default_profiles() -> ClassProfiles {
    let class = |freq: f64, acc_amp: f64, acc_noise: f64, mag_amp: f64, gyro: (f64, f64, f64)| {
        ClassProfile {
            acc: SensorProfile { base: 9.81, freq_hz: freq, amplitude: acc_amp, noise_std: acc_noise },
            mag: SensorProfile { base: 45.0, freq_hz: freq, amplitude: mag_amp, noise_std: 0.4 },
            gyro: SensorProfile { base: gyro.0, freq_hz: freq, amplitude: gyro.1, noise_std: gyro.2 },
        }
    };
    ClassProfiles {
        running: class(3.0, 6.0, 0.4, 4.0, (1.5, 2.5, 0.2)),
        walking: class(1.8, 3.0, 0.3, 2.5, (0.8, 1.2, 0.15)),
        upstairs: class(1.4, 2.2, 0.3, 2.0, (0.7, 1.0, 0.15)),
        downstairs: class(1.6, 2.6, 0.35, 2.2, (0.75, 1.1, 0.15)),
        standing: class(0.0, 0.0, 0.1, 0.2, (0.05, 0.0, 0.05)),
    }
}

/// Generation parameters. Defaults produce five-second windows at the
/// nominal 10 ms period.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub per_class: usize,
    pub samples_per_window: usize,
    pub period_ms: f64,
    pub seed: u64,
    pub profiles: ClassProfiles,
}

impl SynthConfig {
    pub const DEFAULT_SAMPLES: usize = 500;

    pub fn new(per_class: usize, seed: u64) -> SynthConfig {
        SynthConfig {
            per_class,
            samples_per_window: SynthConfig::DEFAULT_SAMPLES,
            period_ms: NOMINAL_PERIOD_MS,
            seed,
            profiles: default_profiles(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SynthError {
    InvalidConfig(String),
    MalformedProfiles(String),
}

impl fmt::Display for SynthError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SynthError::InvalidConfig(reason) => write!(f, "invalid synth config: {}", reason),
            SynthError::MalformedProfiles(reason) => {
                write!(f, "malformed profiles file: {}", reason)
            }
        }
    }
}

impl std::error::Error for SynthError {}

// splitmix64 finalizer; decorrelates nearby record ids.
fn mix_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn generate_window(
    sensor: SensorKind,
    label: AdlLabel,
    profile: &SensorProfile,
    cfg: &SynthConfig,
    rng_seed: u64,
) -> SensorWindow {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    // noise_std is validated non-negative, so this cannot fail.
    let noise = Normal::new(0.0, profile.noise_std).expect("valid noise std");
    let samples = (0..cfg.samples_per_window)
        .map(|i| {
            let t_ms = i as f64 * cfg.period_ms;
            let t_s = t_ms / 1000.0;
            let wave = profile.base + profile.amplitude * (TAU * profile.freq_hz * t_s).sin();
            Sample {
                t_ms,
                x: wave + noise.sample(&mut rng),
                y: wave + noise.sample(&mut rng),
                z: wave + noise.sample(&mut rng),
            }
        })
        .collect();
    let mut window = SensorWindow::new(sensor, label, samples);
    window.nominal_period_ms = cfg.period_ms;
    window
}

/// Generates `5 * per_class` single-record captures. Record ids run
/// class-major: all running records first, then walking, and so on. Each
/// record carries all three sensors.
pub fn generate_captures(cfg: &SynthConfig) -> Result<Vec<Capture>, SynthError> {
    if cfg.samples_per_window < MIN_WINDOW_SAMPLES {
        return Err(SynthError::InvalidConfig(format!(
            "samples_per_window {} is below the minimum {}",
            cfg.samples_per_window, MIN_WINDOW_SAMPLES
        )));
    }
    if !(cfg.period_ms.is_finite() && cfg.period_ms > 0.0) {
        return Err(SynthError::InvalidConfig(format!("period {} ms", cfg.period_ms)));
    }
    cfg.profiles.validate()?;

    let mut captures = Vec::with_capacity(AdlLabel::COUNT * cfg.per_class);
    for (class_idx, label) in AdlLabel::ALL.iter().enumerate() {
        let class = cfg.profiles.for_label(*label);
        for k in 0..cfg.per_class {
            let id = (class_idx * cfg.per_class + k) as u64;
            let record_seed = mix_seed(cfg.seed, id);
            let windows = SensorKind::ALL
                .iter()
                .enumerate()
                .map(|(s, &sensor)| {
                    generate_window(
                        sensor,
                        *label,
                        class.sensor(sensor),
                        cfg,
                        mix_seed(record_seed, s as u64),
                    )
                })
                .collect();
            captures.push(Capture {
                records: vec![Record { id, label: *label, windows }],
            });
        }
    }
    Ok(captures)
}
