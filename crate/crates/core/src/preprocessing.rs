//! Signal conditioning between raw windows and feature extraction: magnitude
//! collapse of tri-axial samples and a first-order exponential low-pass
//! filter that knocks down sensor jitter before peak detection.

use std::fmt;

use crate::sensor_model::SensorWindow;

/// Smoothing factor for [`low_pass_filter`]. Alpha 1 passes the signal
/// through unchanged; smaller values smooth harder.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterConfig {
    pub alpha: f64,
}

impl FilterConfig {
    pub const DEFAULT_ALPHA: f64 = 0.25;

    /// Alpha must lie in (0, 1].
    pub fn new(alpha: f64) -> Result<FilterConfig, PreprocessError> {
        if alpha.is_finite() && alpha > 0.0 && alpha <= 1.0 {
            Ok(FilterConfig { alpha })
        } else {
            Err(PreprocessError::InvalidAlpha(alpha))
        }
    }
}

impl Default for FilterConfig {
    fn default() -> FilterConfig {
        FilterConfig { alpha: FilterConfig::DEFAULT_ALPHA }
    }
}

/// A scalar time series with its sampling period, produced by collapsing a
/// tri-axial window or by filtering another series.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarSeries {
    pub values: Vec<f64>,
    pub period_ms: f64,
}

impl ScalarSeries {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PreprocessError {
    EmptySeries,
    InvalidAlpha(f64),
}

impl fmt::Display for PreprocessError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PreprocessError::EmptySeries => write!(f, "series has no samples"),
            PreprocessError::InvalidAlpha(a) => {
                write!(f, "filter alpha {} outside (0, 1]", a)
            }
        }
    }
}

impl std::error::Error for PreprocessError {}

/// Euclidean norm of each sample, `sqrt(x^2 + y^2 + z^2)`.
///
/// The magnitude is invariant to device orientation, which is what makes
/// pocket-worn phone data usable without pose calibration.
pub fn magnitude(window: &SensorWindow) -> ScalarSeries {
    ScalarSeries {
        values: window
            .samples
            .iter()
            .map(|s| (s.x * s.x + s.y * s.y + s.z * s.z).sqrt())
            .collect(),
        period_ms: window.nominal_period_ms,
    }
}

/// First-order exponential smoothing:
///
/// ```text
/// y[0] = x[0]
/// y[i] = y[i-1] + alpha * (x[i] - y[i-1])
/// ```
///
/// Output length equals input length; with alpha 1 the output equals the
/// input exactly.
pub fn low_pass_filter(
    series: &ScalarSeries,
    cfg: FilterConfig,
) -> Result<ScalarSeries, PreprocessError> {
    // Reject configs built by hand with a bad alpha.
    let cfg = FilterConfig::new(cfg.alpha)?;
    if series.values.is_empty() {
        return Err(PreprocessError::EmptySeries);
    }
    let mut out = Vec::with_capacity(series.values.len());
    let mut y = series.values[0];
    out.push(y);
    for &x in &series.values[1..] {
        y += cfg.alpha * (x - y);
        out.push(y);
    }
    Ok(ScalarSeries { values: out, period_ms: series.period_ms })
}
