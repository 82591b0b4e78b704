//! Feature extraction: peak detection on filtered magnitude series, the
//! fixed 15-feature block computed per sensor, and the tabular datasets
//! built from captures under a fusion config and a column-mask variant.

use std::fmt;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};

use crate::preprocessing::{low_pass_filter, magnitude, FilterConfig, PreprocessError, ScalarSeries};
use crate::sensor_model::{AdlLabel, Capture, SensorKind, SensorWindow, WindowViolation};

/// Width of the per-sensor feature block.
pub const FEATURES_PER_SENSOR: usize = 15;

/// Per-sensor feature names, in block order. `d1..d5` are the five greatest
/// gaps between consecutive peaks, in seconds, descending, zero-padded when
/// fewer than six peaks exist. The `peak_*` statistics run over peak
/// amplitudes, the `raw_*` statistics over the whole filtered series.
pub const FEATURE_NAMES: [&str; FEATURES_PER_SENSOR] = [
    "d1",
    "d2",
    "d3",
    "d4",
    "d5",
    "peak_mean",
    "peak_std",
    "peak_var",
    "peak_median",
    "raw_std",
    "raw_mean",
    "raw_max",
    "raw_min",
    "raw_var",
    "raw_median",
];

#[derive(Debug, Clone, PartialEq)]
pub enum FeatureError {
    /// Peak detection needs at least three samples.
    SeriesTooShort { len: usize },
    InvalidWindow {
        record_id: Option<u64>,
        sensor: SensorKind,
        violations: Vec<WindowViolation>,
    },
    MissingSensor { record_id: u64, sensor: SensorKind },
    MalformedCsv { line: usize, reason: String },
    Preprocess(PreprocessError),
}

impl fmt::Display for FeatureError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FeatureError::SeriesTooShort { len } => {
                write!(f, "series of {} samples is too short for peak detection", len)
            }
            FeatureError::InvalidWindow { record_id, sensor, violations } => {
                match record_id {
                    Some(id) => write!(f, "record {}: invalid {} window:", id, sensor)?,
                    None => write!(f, "invalid {} window:", sensor)?,
                }
                for v in violations {
                    write!(f, " {};", v)?;
                }
                Ok(())
            }
            FeatureError::MissingSensor { record_id, sensor } => {
                write!(f, "record {} has no {} window", record_id, sensor)
            }
            FeatureError::MalformedCsv { line, reason } => {
                write!(f, "csv line {}: {}", line, reason)
            }
            FeatureError::Preprocess(e) => write!(f, "{}", e),
        }
    }
}

impl std::error::Error for FeatureError {}

impl From<PreprocessError> for FeatureError {
    fn from(e: PreprocessError) -> FeatureError {
        FeatureError::Preprocess(e)
    }
}

/// Indices of strict interior local maxima of a series, plus the sampling
/// period needed to turn index gaps into seconds.
#[derive(Debug, Clone, PartialEq)]
pub struct PeakSet {
    pub indices: Vec<usize>,
    pub period_ms: f64,
}

impl PeakSet {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// Finds strict interior local maxima: index `i` with
/// `x[i-1] < x[i] > x[i+1]`. Endpoints and plateau points never qualify.
pub fn detect_peaks(series: &ScalarSeries) -> Result<PeakSet, FeatureError> {
    let v = &series.values;
    if v.len() < 3 {
        return Err(FeatureError::SeriesTooShort { len: v.len() });
    }
    let mut indices = Vec::new();
    for i in 1..v.len() - 1 {
        if v[i - 1] < v[i] && v[i] > v[i + 1] {
            indices.push(i);
        }
    }
    Ok(PeakSet { indices, period_ms: series.period_ms })
}

/// The `k` greatest gaps between consecutive peaks, in seconds, sorted
/// descending and zero-padded to exactly `k` entries.
pub fn top_peak_distances(peaks: &PeakSet, k: usize) -> Vec<f64> {
    let seconds_per_sample = peaks.period_ms / 1000.0;
    let mut gaps: Vec<f64> = peaks
        .indices
        .windows(2)
        .map(|pair| (pair[1] - pair[0]) as f64 * seconds_per_sample)
        .collect();
    gaps.sort_by(|a, b| b.total_cmp(a));
    gaps.truncate(k);
    gaps.resize(k, 0.0);
    gaps
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Population variance (divides by n, not n-1).
fn pop_var(values: &[f64]) -> f64 {
    let m = mean(values);
    values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / values.len() as f64
}

fn median(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    }
}

/// The 15 features computed from one sensor's filtered magnitude series,
/// in [`FEATURE_NAMES`] order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureBlock {
    values: [f64; FEATURES_PER_SENSOR],
}

impl FeatureBlock {
    /// Computes the block directly from an already-filtered series. A window
    /// with no peaks yields zeros for all five distances and all four peak
    /// statistics.
    pub fn from_filtered_series(series: &ScalarSeries) -> Result<FeatureBlock, FeatureError> {
        let peaks = detect_peaks(series)?;
        let d = top_peak_distances(&peaks, 5);
        let amplitudes: Vec<f64> = peaks.indices.iter().map(|&i| series.values[i]).collect();

        let (peak_mean, peak_std, peak_var, peak_median) = if amplitudes.is_empty() {
            (0.0, 0.0, 0.0, 0.0)
        } else {
            let var = pop_var(&amplitudes);
            (mean(&amplitudes), var.sqrt(), var, median(&amplitudes))
        };

        let raw = &series.values;
        let raw_var = pop_var(raw);
        let raw_max = raw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let raw_min = raw.iter().cloned().fold(f64::INFINITY, f64::min);

        Ok(FeatureBlock {
            values: [
                d[0],
                d[1],
                d[2],
                d[3],
                d[4],
                peak_mean,
                peak_std,
                peak_var,
                peak_median,
                raw_var.sqrt(),
                mean(raw),
                raw_max,
                raw_min,
                raw_var,
                median(raw),
            ],
        })
    }

    pub fn values(&self) -> &[f64; FEATURES_PER_SENSOR] {
        &self.values
    }
}

/// Full pipeline for one window: validate, collapse to magnitude, low-pass
/// filter, then compute the feature block on the filtered series.
pub fn extract_features(
    window: &SensorWindow,
    cfg: FilterConfig,
) -> Result<FeatureBlock, FeatureError> {
    let violations = window.validate();
    if !violations.is_empty() {
        return Err(FeatureError::InvalidWindow {
            record_id: None,
            sensor: window.sensor,
            violations,
        });
    }
    let filtered = low_pass_filter(&magnitude(window), cfg)?;
    FeatureBlock::from_filtered_series(&filtered)
}

/// Which per-sensor columns a dataset keeps. The masks are strictly nested:
/// every variant's columns are a subset of the previous one's.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DatasetVariant {
    /// All 15 features.
    D1,
    /// Peak statistics and raw statistics (drops the distances).
    D2,
    /// Raw statistics only.
    D3,
    /// Raw std, mean, variance, median.
    D4,
    /// Raw std and mean.
    D5,
}

impl DatasetVariant {
    pub const ALL: [DatasetVariant; 5] = [
        DatasetVariant::D1,
        DatasetVariant::D2,
        DatasetVariant::D3,
        DatasetVariant::D4,
        DatasetVariant::D5,
    ];

    pub fn number(self) -> u8 {
        match self {
            DatasetVariant::D1 => 1,
            DatasetVariant::D2 => 2,
            DatasetVariant::D3 => 3,
            DatasetVariant::D4 => 4,
            DatasetVariant::D5 => 5,
        }
    }

    pub fn from_number(n: u8) -> Option<DatasetVariant> {
        match n {
            1 => Some(DatasetVariant::D1),
            2 => Some(DatasetVariant::D2),
            3 => Some(DatasetVariant::D3),
            4 => Some(DatasetVariant::D4),
            5 => Some(DatasetVariant::D5),
            _ => None,
        }
    }

    /// Indices into the per-sensor block that this variant keeps.
    pub fn column_indices(self) -> &'static [usize] {
        match self {
            DatasetVariant::D1 => &[0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14],
            DatasetVariant::D2 => &[5, 6, 7, 8, 9, 10, 11, 12, 13, 14],
            DatasetVariant::D3 => &[9, 10, 11, 12, 13, 14],
            DatasetVariant::D4 => &[9, 10, 13, 14],
            DatasetVariant::D5 => &[9, 10],
        }
    }
}

impl fmt::Display for DatasetVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.number())
    }
}

impl Serialize for DatasetVariant {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u8(self.number())
    }
}

impl<'de> Deserialize<'de> for DatasetVariant {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<DatasetVariant, D::Error> {
        let n = u8::deserialize(d)?;
        DatasetVariant::from_number(n)
            .ok_or_else(|| D::Error::custom(format!("dataset variant {} outside 1..=5", n)))
    }
}

/// Which sensors feed the feature table, in fixed acc, mag, gyro order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FusionConfig {
    AccOnly,
    AccMag,
    AccMagGyro,
}

impl FusionConfig {
    pub const ALL: [FusionConfig; 3] =
        [FusionConfig::AccOnly, FusionConfig::AccMag, FusionConfig::AccMagGyro];

    pub fn sensors(self) -> &'static [SensorKind] {
        match self {
            FusionConfig::AccOnly => &[SensorKind::Accelerometer],
            FusionConfig::AccMag => &[SensorKind::Accelerometer, SensorKind::Magnetometer],
            FusionConfig::AccMagGyro => &[
                SensorKind::Accelerometer,
                SensorKind::Magnetometer,
                SensorKind::Gyroscope,
            ],
        }
    }

    pub fn token(self) -> &'static str {
        match self {
            FusionConfig::AccOnly => "acc",
            FusionConfig::AccMag => "acc+mag",
            FusionConfig::AccMagGyro => "acc+mag+gyro",
        }
    }

    pub fn from_token(token: &str) -> Option<FusionConfig> {
        FusionConfig::ALL.iter().copied().find(|f| f.token() == token)
    }
}

impl fmt::Display for FusionConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl Serialize for FusionConfig {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.token())
    }
}

impl<'de> Deserialize<'de> for FusionConfig {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<FusionConfig, D::Error> {
        let token = String::deserialize(d)?;
        FusionConfig::from_token(&token)
            .ok_or_else(|| D::Error::custom(format!("unknown fusion config {:?}", token)))
    }
}

/// Column names for a fusion + variant pair: the kept per-sensor feature
/// names prefixed with the sensor token, sensor-major.
pub fn schema_for(fusion: FusionConfig, variant: DatasetVariant) -> Vec<String> {
    let mut schema = Vec::new();
    for sensor in fusion.sensors() {
        for &col in variant.column_indices() {
            schema.push(format!("{}_{}", sensor.token(), FEATURE_NAMES[col]));
        }
    }
    schema
}

/// One labeled feature vector.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRow {
    pub features: Vec<f64>,
    pub label: AdlLabel,
}

/// A labeled feature table with its column schema. Row order follows the
/// captures the table was built from.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureDataset {
    pub schema: Vec<String>,
    pub rows: Vec<FeatureRow>,
}

impl FeatureDataset {
    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.schema.len()
    }

    pub fn class_counts(&self) -> [usize; AdlLabel::COUNT] {
        let mut counts = [0usize; AdlLabel::COUNT];
        for row in &self.rows {
            counts[row.label.code()] += 1;
        }
        counts
    }

    /// SHA-256 over the schema, the raw bits of every feature value, and the
    /// label codes. Two datasets fingerprint equal iff they are bit-identical.
    pub fn fingerprint(&self) -> String {
        let mut hasher = Sha256::new();
        for name in &self.schema {
            hasher.update(name.as_bytes());
            hasher.update(b"\n");
        }
        hasher.update([0xff]);
        for row in &self.rows {
            for &v in &row.features {
                hasher.update(v.to_bits().to_le_bytes());
            }
            hasher.update([row.label.code() as u8]);
        }
        let digest = hasher.finalize();
        let mut hex = String::with_capacity(64);
        for byte in digest {
            hex.push_str(&format!("{:02x}", byte));
        }
        hex
    }

    /// CSV with a header row; floats use 17 significant digits so values
    /// survive a round trip bit-exactly, labels use their lowercase tokens.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for (i, name) in self.schema.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            out.push_str(name);
        }
        if !self.schema.is_empty() {
            out.push(',');
        }
        out.push_str("label\n");
        for row in &self.rows {
            for &v in &row.features {
                out.push_str(&format!("{:.16e},", v));
            }
            out.push_str(row.label.token());
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<FeatureDataset, FeatureError> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or(FeatureError::MalformedCsv {
            line: 1,
            reason: "missing header row".to_string(),
        })?;
        let mut columns: Vec<&str> = header.split(',').collect();
        match columns.pop() {
            Some("label") => {}
            _ => {
                return Err(FeatureError::MalformedCsv {
                    line: 1,
                    reason: "last header column must be \"label\"".to_string(),
                })
            }
        }
        let schema: Vec<String> = columns.iter().map(|c| c.to_string()).collect();

        let mut rows = Vec::new();
        for (idx, raw) in lines {
            let line = idx + 1;
            if raw.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = raw.split(',').collect();
            if fields.len() != schema.len() + 1 {
                return Err(FeatureError::MalformedCsv {
                    line,
                    reason: format!(
                        "expected {} fields, got {}",
                        schema.len() + 1,
                        fields.len()
                    ),
                });
            }
            let mut features = Vec::with_capacity(schema.len());
            for field in &fields[..schema.len()] {
                let v = field.parse::<f64>().map_err(|_| FeatureError::MalformedCsv {
                    line,
                    reason: format!("{:?} is not a number", field),
                })?;
                if !v.is_finite() {
                    return Err(FeatureError::MalformedCsv {
                        line,
                        reason: format!("{:?} is not finite", field),
                    });
                }
                features.push(v);
            }
            let label_token = fields[schema.len()];
            let label = AdlLabel::from_token(label_token).ok_or(FeatureError::MalformedCsv {
                line,
                reason: format!("unknown label {:?}", label_token),
            })?;
            rows.push(FeatureRow { features, label });
        }
        Ok(FeatureDataset { schema, rows })
    }
}

/// Builds the labeled feature table for a set of captures. Rows keep capture
/// and record order. Every record must carry every sensor the fusion config
/// asks for.
pub fn build_dataset(
    captures: &[Capture],
    fusion: FusionConfig,
    variant: DatasetVariant,
    cfg: FilterConfig,
) -> Result<FeatureDataset, FeatureError> {
    let schema = schema_for(fusion, variant);
    let mut rows = Vec::new();
    for capture in captures {
        for record in &capture.records {
            let mut features = Vec::with_capacity(schema.len());
            for &sensor in fusion.sensors() {
                let window = record.window(sensor).ok_or(FeatureError::MissingSensor {
                    record_id: record.id,
                    sensor,
                })?;
                let block = extract_features(window, cfg).map_err(|e| match e {
                    FeatureError::InvalidWindow { sensor, violations, .. } => {
                        FeatureError::InvalidWindow {
                            record_id: Some(record.id),
                            sensor,
                            violations,
                        }
                    }
                    other => other,
                })?;
                for &col in variant.column_indices() {
                    features.push(block.values()[col]);
                }
            }
            rows.push(FeatureRow { features, label: record.label });
        }
    }
    Ok(FeatureDataset { schema, rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sensor_model::{Record, Sample};

    fn series(values: &[f64]) -> ScalarSeries {
        ScalarSeries { values: values.to_vec(), period_ms: 10.0 }
    }

    #[test]
    fn finds_strict_interior_maxima() {
        let peaks = detect_peaks(&series(&[0.0, 1.0, 0.0, 2.0, 0.0])).unwrap();
        assert_eq!(peaks.indices, vec![1, 3]);
    }

    #[test]
    fn plateaus_and_endpoints_are_not_peaks() {
        assert!(detect_peaks(&series(&[0.0, 1.0, 1.0, 0.0])).unwrap().is_empty());
        assert!(detect_peaks(&series(&[5.0, 1.0, 0.0, 9.0])).unwrap().is_empty());
        assert!(detect_peaks(&series(&[1.0, 1.0, 1.0])).unwrap().is_empty());
        assert_eq!(
            detect_peaks(&series(&[2.0, 1.0])),
            Err(FeatureError::SeriesTooShort { len: 2 })
        );
    }

    #[test]
    fn distances_sorted_descending_and_padded() {
        let peaks = PeakSet { indices: vec![1, 3, 10], period_ms: 10.0 };
        assert_eq!(top_peak_distances(&peaks, 5), vec![0.07, 0.02, 0.0, 0.0, 0.0]);

        // More gaps than slots: keep the five greatest.
        let peaks = PeakSet { indices: vec![0, 1, 3, 6, 10, 15, 21], period_ms: 10.0 };
        assert_eq!(
            top_peak_distances(&peaks, 5),
            vec![0.06, 0.05, 0.04, 0.03, 0.02]
        );

        let none = PeakSet { indices: vec![], period_ms: 10.0 };
        assert_eq!(top_peak_distances(&none, 5), vec![0.0; 5]);
        let one = PeakSet { indices: vec![7], period_ms: 10.0 };
        assert_eq!(top_peak_distances(&one, 5), vec![0.0; 5]);
    }

    #[test]
    fn block_matches_hand_computed_values() {
        // Peaks at indices 1 and 3 with amplitudes 3 and 5.
        let block = FeatureBlock::from_filtered_series(&series(&[1.0, 3.0, 1.0, 5.0, 1.0])).unwrap();
        let v = block.values();
        assert_eq!(v[0], 0.02); // d1: two samples at 10 ms
        assert_eq!(&v[1..5], &[0.0, 0.0, 0.0, 0.0]);
        assert_eq!(v[5], 4.0); // peak mean
        assert_eq!(v[6], 1.0); // peak std
        assert_eq!(v[7], 1.0); // peak var
        assert_eq!(v[8], 4.0); // peak median
        assert!((v[9] - 1.6).abs() < 1e-12); // raw std
        assert!((v[10] - 2.2).abs() < 1e-12); // raw mean
        assert_eq!(v[11], 5.0); // raw max
        assert_eq!(v[12], 1.0); // raw min
        assert!((v[13] - 2.56).abs() < 1e-12); // raw var
        assert_eq!(v[14], 1.0); // raw median
    }

    #[test]
    fn peakless_series_zeroes_peak_features() {
        let block = FeatureBlock::from_filtered_series(&series(&[2.0; 40])).unwrap();
        let v = block.values();
        assert_eq!(&v[0..9], &[0.0; 9]);
        assert_eq!(v[9], 0.0); // raw std of a constant
        assert_eq!(v[10], 2.0);
        assert_eq!(v[11], 2.0);
        assert_eq!(v[12], 2.0);
        assert_eq!(v[14], 2.0);
    }

    #[test]
    fn even_length_median_averages_middle_pair() {
        let block = FeatureBlock::from_filtered_series(&series(&[4.0, 1.0, 3.0, 2.0])).unwrap();
        assert_eq!(block.values()[14], 2.5);
    }

    #[test]
    fn variant_masks_are_strictly_nested() {
        for pair in DatasetVariant::ALL.windows(2) {
            let outer = pair[0].column_indices();
            let inner = pair[1].column_indices();
            assert!(inner.len() < outer.len());
            for col in inner {
                assert!(outer.contains(col), "{:?} not in {:?}", col, outer);
            }
        }
        assert_eq!(DatasetVariant::D1.column_indices().len(), 15);
        assert_eq!(DatasetVariant::D4.column_indices(), &[9, 10, 13, 14]);
        assert_eq!(DatasetVariant::D5.column_indices(), &[9, 10]);
    }

    #[test]
    fn schema_counts_match_fusion_and_variant() {
        assert_eq!(schema_for(FusionConfig::AccOnly, DatasetVariant::D1).len(), 15);
        assert_eq!(schema_for(FusionConfig::AccMag, DatasetVariant::D1).len(), 30);
        assert_eq!(schema_for(FusionConfig::AccMagGyro, DatasetVariant::D1).len(), 45);
        assert_eq!(schema_for(FusionConfig::AccMagGyro, DatasetVariant::D5).len(), 6);
        let schema = schema_for(FusionConfig::AccMag, DatasetVariant::D5);
        assert_eq!(schema, vec!["acc_raw_std", "acc_raw_mean", "mag_raw_std", "mag_raw_mean"]);
    }

    fn test_record(id: u64, label: AdlLabel) -> Record {
        let windows = SensorKind::ALL
            .iter()
            .map(|&sensor| {
                let samples = (0..30)
                    .map(|i| Sample {
                        t_ms: i as f64 * 10.0,
                        x: (i as f64 * 0.7).sin() * (id as f64 + 1.0),
                        y: (i as f64 * 0.3).cos(),
                        z: 9.8,
                    })
                    .collect();
                SensorWindow::new(sensor, label, samples)
            })
            .collect();
        Record { id, label, windows }
    }

    fn test_capture() -> Capture {
        Capture {
            records: vec![
                test_record(0, AdlLabel::Running),
                test_record(1, AdlLabel::Walking),
                test_record(2, AdlLabel::Standing),
            ],
        }
    }

    #[test]
    fn dataset_geometry_follows_config() {
        let captures = [test_capture()];
        let cfg = FilterConfig::default();
        for (fusion, variant, cols) in [
            (FusionConfig::AccOnly, DatasetVariant::D1, 15),
            (FusionConfig::AccMag, DatasetVariant::D1, 30),
            (FusionConfig::AccMagGyro, DatasetVariant::D1, 45),
            (FusionConfig::AccMagGyro, DatasetVariant::D5, 6),
        ] {
            let ds = build_dataset(&captures, fusion, variant, cfg).unwrap();
            assert_eq!(ds.n_rows(), 3);
            assert_eq!(ds.n_cols(), cols);
            for row in &ds.rows {
                assert_eq!(row.features.len(), cols);
            }
        }
    }

    #[test]
    fn narrower_variants_select_matching_columns() {
        let captures = [test_capture()];
        let cfg = FilterConfig::default();
        let d1 = build_dataset(&captures, FusionConfig::AccMagGyro, DatasetVariant::D1, cfg).unwrap();
        for variant in [DatasetVariant::D2, DatasetVariant::D3, DatasetVariant::D4, DatasetVariant::D5] {
            let narrow =
                build_dataset(&captures, FusionConfig::AccMagGyro, variant, cfg).unwrap();
            for (row_n, row_1) in narrow.rows.iter().zip(&d1.rows) {
                let mut picked = Vec::new();
                for sensor_idx in 0..3 {
                    for &col in variant.column_indices() {
                        picked.push(row_1.features[sensor_idx * 15 + col]);
                    }
                }
                assert_eq!(row_n.features, picked);
            }
        }
    }

    #[test]
    fn missing_sensor_is_reported() {
        let mut capture = test_capture();
        capture.records[1].windows.retain(|w| w.sensor != SensorKind::Gyroscope);
        let err = build_dataset(
            &[capture],
            FusionConfig::AccMagGyro,
            DatasetVariant::D1,
            FilterConfig::default(),
        )
        .unwrap_err();
        assert_eq!(
            err,
            FeatureError::MissingSensor { record_id: 1, sensor: SensorKind::Gyroscope }
        );
    }

    #[test]
    fn invalid_window_is_reported_with_record_id() {
        let mut capture = test_capture();
        capture.records[2].windows[0].samples.truncate(4);
        let err = build_dataset(
            &[capture],
            FusionConfig::AccOnly,
            DatasetVariant::D1,
            FilterConfig::default(),
        )
        .unwrap_err();
        match err {
            FeatureError::InvalidWindow { record_id: Some(2), sensor, violations } => {
                assert_eq!(sensor, SensorKind::Accelerometer);
                assert_eq!(violations, vec![WindowViolation::TooFewSamples(4)]);
            }
            other => panic!("unexpected error {:?}", other),
        }
    }

    #[test]
    fn csv_round_trip_is_bit_exact() {
        let ds = build_dataset(
            &[test_capture()],
            FusionConfig::AccMagGyro,
            DatasetVariant::D1,
            FilterConfig::default(),
        )
        .unwrap();
        let parsed = FeatureDataset::from_csv(&ds.to_csv()).unwrap();
        assert_eq!(parsed.schema, ds.schema);
        assert_eq!(parsed.rows.len(), ds.rows.len());
        for (a, b) in parsed.rows.iter().zip(&ds.rows) {
            assert_eq!(a.label, b.label);
            for (x, y) in a.features.iter().zip(&b.features) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
        assert_eq!(parsed.fingerprint(), ds.fingerprint());
    }

    #[test]
    fn csv_rejects_malformed_rows() {
        assert!(matches!(
            FeatureDataset::from_csv("a,b\n1.0,walking\n"),
            Err(FeatureError::MalformedCsv { line: 1, .. })
        ));
        assert!(matches!(
            FeatureDataset::from_csv("a,label\n1.0,2.0,walking\n"),
            Err(FeatureError::MalformedCsv { line: 2, .. })
        ));
        assert!(matches!(
            FeatureDataset::from_csv("a,label\noops,walking\n"),
            Err(FeatureError::MalformedCsv { line: 2, .. })
        ));
        assert!(matches!(
            FeatureDataset::from_csv("a,label\n1.0,jogging\n"),
            Err(FeatureError::MalformedCsv { line: 2, .. })
        ));
        assert!(matches!(
            FeatureDataset::from_csv("a,label\ninf,walking\n"),
            Err(FeatureError::MalformedCsv { line: 2, .. })
        ));
    }

    #[test]
    fn fingerprint_tracks_content() {
        let ds = build_dataset(
            &[test_capture()],
            FusionConfig::AccOnly,
            DatasetVariant::D3,
            FilterConfig::default(),
        )
        .unwrap();
        let fp = ds.fingerprint();
        assert_eq!(fp.len(), 64);
        assert_eq!(fp, ds.clone().fingerprint());

        let mut tweaked = ds.clone();
        tweaked.rows[0].features[0] += 1e-9;
        assert_ne!(tweaked.fingerprint(), fp);

        let mut relabeled = ds;
        relabeled.rows[0].label = AdlLabel::Standing;
        assert_ne!(relabeled.fingerprint(), fp);
    }

    #[test]
    fn variant_serde_uses_numbers() {
        let json = serde_json::to_string(&DatasetVariant::D3).unwrap();
        assert_eq!(json, "3");
        let back: DatasetVariant = serde_json::from_str("3").unwrap();
        assert_eq!(back, DatasetVariant::D3);
        assert!(serde_json::from_str::<DatasetVariant>("9").is_err());

        let json = serde_json::to_string(&FusionConfig::AccMagGyro).unwrap();
        assert_eq!(json, "\"acc+mag+gyro\"");
        let back: FusionConfig = serde_json::from_str("\"acc\"").unwrap();
        assert_eq!(back, FusionConfig::AccOnly);
    }
}
