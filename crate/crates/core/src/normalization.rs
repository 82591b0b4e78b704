//! Column-wise dataset normalization. Statistics are fitted on training
//! rows only and carried as a value so the same transform can be replayed
//! on test rows and at inference time; the fingerprint of the fitting
//! split is stored to catch stats reused against the wrong data.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::features::{FeatureDataset, FeatureRow};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NormalizerKind {
    /// `(x - min) / (max - min)`, mapping the fitted range onto [0, 1].
    #[serde(rename = "minmax")]
    MinMax,
    /// `(x - mean) / std` with the population standard deviation.
    #[serde(rename = "zscore")]
    ZScore,
}

impl NormalizerKind {
    pub fn token(self) -> &'static str {
        match self {
            NormalizerKind::MinMax => "minmax",
            NormalizerKind::ZScore => "zscore",
        }
    }

    pub fn from_token(token: &str) -> Option<NormalizerKind> {
        match token {
            "minmax" => Some(NormalizerKind::MinMax),
            "zscore" => Some(NormalizerKind::ZScore),
            _ => None,
        }
    }
}

impl fmt::Display for NormalizerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

/// Fitted per-column statistics. `params[i]` is `(min, max)` for min-max
/// and `(mean, std)` for z-score, aligned with `schema`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizerStats {
    pub kind: NormalizerKind,
    pub schema: Vec<String>,
    pub params: Vec<(f64, f64)>,
    /// Fingerprint of the dataset the stats were fitted on.
    pub fingerprint: String,
}

#[derive(Debug, Clone, PartialEq)]
pub enum NormalizeError {
    EmptyDataset,
    /// Row length or dataset schema does not match the fitted stats.
    SchemaMismatch { detail: String },
    Malformed(String),
}

impl fmt::Display for NormalizeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NormalizeError::EmptyDataset => write!(f, "cannot fit normalizer on an empty dataset"),
            NormalizeError::SchemaMismatch { detail } => write!(f, "schema mismatch: {}", detail),
            NormalizeError::Malformed(reason) => write!(f, "malformed normalizer stats: {}", reason),
        }
    }
}

impl std::error::Error for NormalizeError {}

/// Fits per-column statistics on `ds`, which should be the training split
/// only; leaking test rows into the fit skews every downstream accuracy.
pub fn fit(ds: &FeatureDataset, kind: NormalizerKind) -> Result<NormalizerStats, NormalizeError> {
    if ds.rows.is_empty() {
        return Err(NormalizeError::EmptyDataset);
    }
    let n_cols = ds.n_cols();
    let n_rows = ds.rows.len() as f64;
    let mut params = Vec::with_capacity(n_cols);
    for col in 0..n_cols {
        let column = ds.rows.iter().map(|r| r.features[col]);
        match kind {
            NormalizerKind::MinMax => {
                let min = column.clone().fold(f64::INFINITY, f64::min);
                let max = column.fold(f64::NEG_INFINITY, f64::max);
                params.push((min, max));
            }
            NormalizerKind::ZScore => {
                let mean = column.clone().sum::<f64>() / n_rows;
                let var = column.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n_rows;
                params.push((mean, var.sqrt()));
            }
        }
    }
    Ok(NormalizerStats {
        kind,
        schema: ds.schema.clone(),
        params,
        fingerprint: ds.fingerprint(),
    })
}

impl NormalizerStats {
    /// Applies the fitted transform to one feature vector. Degenerate
    /// columns (zero range or zero spread) map to 0.0.
    pub fn apply_row(&self, features: &[f64]) -> Result<Vec<f64>, NormalizeError> {
        if features.len() != self.params.len() {
            return Err(NormalizeError::SchemaMismatch {
                detail: format!(
                    "row has {} features, stats cover {}",
                    features.len(),
                    self.params.len()
                ),
            });
        }
        let out = features
            .iter()
            .zip(&self.params)
            .map(|(&x, &(a, b))| match self.kind {
                NormalizerKind::MinMax => {
                    let range = b - a;
                    if range == 0.0 {
                        0.0
                    } else {
                        (x - a) / range
                    }
                }
                NormalizerKind::ZScore => {
                    if b == 0.0 {
                        0.0
                    } else {
                        (x - a) / b
                    }
                }
            })
            .collect();
        Ok(out)
    }

    /// Applies the transform to a whole dataset, requiring an exact schema
    /// match with the fitting data.
    pub fn apply_dataset(&self, ds: &FeatureDataset) -> Result<FeatureDataset, NormalizeError> {
        if ds.schema != self.schema {
            return Err(NormalizeError::SchemaMismatch {
                detail: format!(
                    "dataset schema {:?}... does not match fitted schema {:?}...",
                    ds.schema.first(),
                    self.schema.first()
                ),
            });
        }
        let rows = ds
            .rows
            .iter()
            .map(|row| {
                Ok(FeatureRow {
                    features: self.apply_row(&row.features)?,
                    label: row.label,
                })
            })
            .collect::<Result<Vec<_>, NormalizeError>>()?;
        Ok(FeatureDataset { schema: ds.schema.clone(), rows })
    }

    pub fn to_json(&self) -> String {
        // Serialization of this plain struct cannot fail.
        serde_json::to_string_pretty(self).expect("normalizer stats serialize")
    }

    pub fn from_json(text: &str) -> Result<NormalizerStats, NormalizeError> {
        let stats: NormalizerStats =
            serde_json::from_str(text).map_err(|e| NormalizeError::Malformed(e.to_string()))?;
        if stats.params.len() != stats.schema.len() {
            return Err(NormalizeError::Malformed(format!(
                "{} params for {} schema columns",
                stats.params.len(),
                stats.schema.len()
            )));
        }
        for &(a, b) in &stats.params {
            if !a.is_finite() || !b.is_finite() {
                return Err(NormalizeError::Malformed("non-finite parameter".to_string()));
            }
        }
        Ok(stats)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sensor_model::AdlLabel;

    fn dataset(columns: &[&[f64]]) -> FeatureDataset {
        let n_rows = columns[0].len();
        let schema: Vec<String> = (0..columns.len()).map(|i| format!("c{}", i)).collect();
        let rows = (0..n_rows)
            .map(|r| FeatureRow {
                features: columns.iter().map(|c| c[r]).collect(),
                label: AdlLabel::from_code(r % 5).unwrap(),
            })
            .collect();
        FeatureDataset { schema, rows }
    }

    #[test]
    fn minmax_maps_fitted_range_onto_unit_interval() {
        let ds = dataset(&[&[1.0, 2.0, 3.0]]);
        let stats = fit(&ds, NormalizerKind::MinMax).unwrap();
        assert_eq!(stats.params, vec![(1.0, 3.0)]);
        let out = stats.apply_dataset(&ds).unwrap();
        let col: Vec<f64> = out.rows.iter().map(|r| r.features[0]).collect();
        assert_eq!(col, vec![0.0, 0.5, 1.0]);
    }

    #[test]
    fn zscore_centers_and_scales() {
        let ds = dataset(&[&[1.0, 2.0, 3.0]]);
        let stats = fit(&ds, NormalizerKind::ZScore).unwrap();
        let (mean, std) = stats.params[0];
        assert_eq!(mean, 2.0);
        assert!((std - (2.0f64 / 3.0).sqrt()).abs() < 1e-15);
        let out = stats.apply_dataset(&ds).unwrap();
        let col: Vec<f64> = out.rows.iter().map(|r| r.features[0]).collect();
        assert!((col[0] + (3.0f64 / 2.0).sqrt()).abs() < 1e-15);
        assert_eq!(col[1], 0.0);
        assert!((col[2] - (3.0f64 / 2.0).sqrt()).abs() < 1e-15);

        // Transformed column has mean 0 and population std 1.
        let m: f64 = col.iter().sum::<f64>() / 3.0;
        let v: f64 = col.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / 3.0;
        assert!(m.abs() < 1e-15);
        assert!((v - 1.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_columns_map_to_zero() {
        let ds = dataset(&[&[7.0, 7.0, 7.0], &[1.0, 5.0, 9.0]]);
        for kind in [NormalizerKind::MinMax, NormalizerKind::ZScore] {
            let stats = fit(&ds, kind).unwrap();
            let out = stats.apply_dataset(&ds).unwrap();
            for row in &out.rows {
                assert_eq!(row.features[0], 0.0);
            }
        }
    }

    #[test]
    fn fit_rejects_empty_dataset() {
        let empty = FeatureDataset { schema: vec!["c0".to_string()], rows: vec![] };
        assert_eq!(fit(&empty, NormalizerKind::MinMax), Err(NormalizeError::EmptyDataset));
    }

    #[test]
    fn fingerprint_records_the_fitting_split() {
        let train = dataset(&[&[1.0, 2.0], &[0.0, 4.0]]);
        let test = dataset(&[&[5.0, 6.0], &[1.0, 2.0]]);
        let stats = fit(&train, NormalizerKind::MinMax).unwrap();
        assert_eq!(stats.fingerprint, train.fingerprint());
        assert_ne!(stats.fingerprint, test.fingerprint());

        // Test rows outside the fitted range land outside [0, 1]; that is
        // expected and must not be clamped away.
        let out = stats.apply_dataset(&test).unwrap();
        assert!(out.rows[0].features[0] > 1.0);
    }

    #[test]
    fn schema_and_length_mismatches_are_rejected() {
        let ds = dataset(&[&[1.0, 2.0]]);
        let stats = fit(&ds, NormalizerKind::MinMax).unwrap();
        assert!(matches!(
            stats.apply_row(&[1.0, 2.0]),
            Err(NormalizeError::SchemaMismatch { .. })
        ));
        let mut other = ds.clone();
        other.schema[0] = "renamed".to_string();
        assert!(matches!(
            stats.apply_dataset(&other),
            Err(NormalizeError::SchemaMismatch { .. })
        ));
    }

    #[test]
    fn json_round_trip_preserves_stats() {
        let ds = dataset(&[&[1.5, -2.25, 0.125], &[10.0, 20.0, 30.0]]);
        for kind in [NormalizerKind::MinMax, NormalizerKind::ZScore] {
            let stats = fit(&ds, kind).unwrap();
            let back = NormalizerStats::from_json(&stats.to_json()).unwrap();
            assert_eq!(back, stats);
        }
    }

    #[test]
    fn from_json_validates_shape() {
        assert!(matches!(
            NormalizerStats::from_json("{"),
            Err(NormalizeError::Malformed(_))
        ));
        let bad = r#"{"kind":"minmax","schema":["a","b"],"params":[[0.0,1.0]],"fingerprint":""}"#;
        assert!(matches!(
            NormalizerStats::from_json(bad),
            Err(NormalizeError::Malformed(_))
        ));
        let good = r#"{"kind":"zscore","schema":["a"],"params":[[0.0,1.0]],"fingerprint":"x"}"#;
        assert!(NormalizerStats::from_json(good).is_ok());
    }
}
