//! Domain types for raw motion-sensor captures and the plain-text capture
//! format used to move labeled recordings between tools.
//!
//! A capture groups records; a record is one labeled activity slot holding up
//! to three sensor windows (accelerometer, magnetometer, gyroscope), each a
//! run of timestamped tri-axial samples.

use std::fmt;

/// Minimum sample count for a window to be considered usable downstream.
pub const MIN_WINDOW_SAMPLES: usize = 16;

/// Nominal sampling period for phone motion sensors, in milliseconds.
pub const NOMINAL_PERIOD_MS: f64 = 10.0;

/// The three sensor streams a record can carry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SensorKind {
    Accelerometer,
    Magnetometer,
    Gyroscope,
}

impl SensorKind {
    pub const ALL: [SensorKind; 3] = [
        SensorKind::Accelerometer,
        SensorKind::Magnetometer,
        SensorKind::Gyroscope,
    ];

    /// Short token used in capture files and CLI flags.
    pub fn token(self) -> &'static str {
        match self {
            SensorKind::Accelerometer => "acc",
            SensorKind::Magnetometer => "mag",
            SensorKind::Gyroscope => "gyro",
        }
    }

    pub fn from_token(token: &str) -> Option<SensorKind> {
        match token {
            "acc" => Some(SensorKind::Accelerometer),
            "mag" => Some(SensorKind::Magnetometer),
            "gyro" => Some(SensorKind::Gyroscope),
            _ => None,
        }
    }
}

impl fmt::Display for SensorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

/// Activity classes, with stable codes 0 through 4.
///
/// The codes double as row/column indices of confusion matrices and as the
/// index of the matching output unit of a classifier network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AdlLabel {
    Running,
    Walking,
    GoingUpstairs,
    GoingDownstairs,
    Standing,
}

impl AdlLabel {
    pub const ALL: [AdlLabel; 5] = [
        AdlLabel::Running,
        AdlLabel::Walking,
        AdlLabel::GoingUpstairs,
        AdlLabel::GoingDownstairs,
        AdlLabel::Standing,
    ];

    pub const COUNT: usize = 5;

    pub fn code(self) -> usize {
        match self {
            AdlLabel::Running => 0,
            AdlLabel::Walking => 1,
            AdlLabel::GoingUpstairs => 2,
            AdlLabel::GoingDownstairs => 3,
            AdlLabel::Standing => 4,
        }
    }

    pub fn from_code(code: usize) -> Option<AdlLabel> {
        AdlLabel::ALL.get(code).copied()
    }

    /// Lowercase token used in capture files and dataset label columns.
    pub fn token(self) -> &'static str {
        match self {
            AdlLabel::Running => "running",
            AdlLabel::Walking => "walking",
            AdlLabel::GoingUpstairs => "upstairs",
            AdlLabel::GoingDownstairs => "downstairs",
            AdlLabel::Standing => "standing",
        }
    }

    pub fn from_token(token: &str) -> Option<AdlLabel> {
        AdlLabel::ALL.iter().copied().find(|l| l.token() == token)
    }
}

impl fmt::Display for AdlLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

/// One timestamped tri-axial sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    /// Milliseconds since the start of the window.
    pub t_ms: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Sample {
    pub fn is_finite(&self) -> bool {
        self.t_ms.is_finite() && self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

/// A run of samples from one sensor inside one activity slot.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorWindow {
    pub sensor: SensorKind,
    pub label: AdlLabel,
    pub samples: Vec<Sample>,
    /// Expected spacing between samples; the capture format does not store
    /// it, so parsed windows get [`NOMINAL_PERIOD_MS`].
    pub nominal_period_ms: f64,
}

impl SensorWindow {
    pub fn new(sensor: SensorKind, label: AdlLabel, samples: Vec<Sample>) -> SensorWindow {
        SensorWindow {
            sensor,
            label,
            samples,
            nominal_period_ms: NOMINAL_PERIOD_MS,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Checks the window against the invariants downstream stages assume:
    /// at least [`MIN_WINDOW_SAMPLES`] samples, strictly increasing
    /// timestamps, and finite values throughout. Returns every violation
    /// found, not just the first.
    pub fn validate(&self) -> Vec<WindowViolation> {
        let mut violations = Vec::new();
        if self.samples.len() < MIN_WINDOW_SAMPLES {
            violations.push(WindowViolation::TooFewSamples(self.samples.len()));
        }
        for (i, s) in self.samples.iter().enumerate() {
            if !s.is_finite() {
                violations.push(WindowViolation::NonFiniteSample { index: i });
            }
        }
        for (i, pair) in self.samples.windows(2).enumerate() {
            // Written so a NaN timestamp also counts as non-monotonic.
            if pair[1].t_ms.partial_cmp(&pair[0].t_ms) != Some(std::cmp::Ordering::Greater) {
                violations.push(WindowViolation::NonMonotonicTimestamp { index: i + 1 });
            }
        }
        violations
    }
}

/// A single violation reported by [`SensorWindow::validate`].
#[derive(Debug, Clone, PartialEq)]
pub enum WindowViolation {
    TooFewSamples(usize),
    NonMonotonicTimestamp { index: usize },
    NonFiniteSample { index: usize },
}

impl fmt::Display for WindowViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WindowViolation::TooFewSamples(n) => {
                write!(f, "sample count {} is below the minimum {}", n, MIN_WINDOW_SAMPLES)
            }
            WindowViolation::NonMonotonicTimestamp { index } => {
                write!(f, "timestamp at sample {} does not increase", index)
            }
            WindowViolation::NonFiniteSample { index } => {
                write!(f, "non-finite value at sample {}", index)
            }
        }
    }
}

/// One labeled activity slot: a record id plus the sensor windows recorded
/// during it. Windows keep file order; each sensor appears at most once.
#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub id: u64,
    pub label: AdlLabel,
    pub windows: Vec<SensorWindow>,
}

impl Record {
    pub fn window(&self, sensor: SensorKind) -> Option<&SensorWindow> {
        self.windows.iter().find(|w| w.sensor == sensor)
    }
}

/// A set of records, typically one recording session or one generated batch.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Capture {
    pub records: Vec<Record>,
}

impl Capture {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

/// Parse failure for the capture text format. Line numbers are 1-based.
#[derive(Debug, Clone, PartialEq)]
pub enum CaptureParseError {
    MalformedLine { line: usize, reason: String },
    UnknownLabel { line: usize, token: String },
    UnknownSensor { line: usize, token: String },
    NonMonotonicTimestamp { line: usize },
    EmptyWindow { line: usize },
}

impl CaptureParseError {
    pub fn line(&self) -> usize {
        match self {
            CaptureParseError::MalformedLine { line, .. }
            | CaptureParseError::UnknownLabel { line, .. }
            | CaptureParseError::UnknownSensor { line, .. }
            | CaptureParseError::NonMonotonicTimestamp { line }
            | CaptureParseError::EmptyWindow { line } => *line,
        }
    }
}

impl fmt::Display for CaptureParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CaptureParseError::MalformedLine { line, reason } => {
                write!(f, "line {}: {}", line, reason)
            }
            CaptureParseError::UnknownLabel { line, token } => {
                write!(f, "line {}: unknown activity label {:?}", line, token)
            }
            CaptureParseError::UnknownSensor { line, token } => {
                write!(f, "line {}: unknown sensor {:?}", line, token)
            }
            CaptureParseError::NonMonotonicTimestamp { line } => {
                write!(f, "line {}: timestamp does not increase", line)
            }
            CaptureParseError::EmptyWindow { line } => {
                write!(f, "line {}: sensor block has no samples", line)
            }
        }
    }
}

impl std::error::Error for CaptureParseError {}

struct Parser {
    capture: Capture,
    record: Option<PendingRecord>,
}

struct PendingRecord {
    header_line: usize,
    id: u64,
    label: AdlLabel,
    windows: Vec<SensorWindow>,
    open: Option<PendingWindow>,
}

struct PendingWindow {
    header_line: usize,
    sensor: SensorKind,
    samples: Vec<Sample>,
}

impl Parser {
    fn close_window(&mut self) -> Result<(), CaptureParseError> {
        let record = match self.record.as_mut() {
            Some(r) => r,
            None => return Ok(()),
        };
        if let Some(open) = record.open.take() {
            if open.samples.is_empty() {
                return Err(CaptureParseError::EmptyWindow { line: open.header_line });
            }
            record
                .windows
                .push(SensorWindow::new(open.sensor, record.label, open.samples));
        }
        Ok(())
    }

    fn close_record(&mut self) -> Result<(), CaptureParseError> {
        self.close_window()?;
        if let Some(record) = self.record.take() {
            if record.windows.is_empty() {
                return Err(CaptureParseError::MalformedLine {
                    line: record.header_line,
                    reason: "record has no sensor blocks".to_string(),
                });
            }
            self.capture.records.push(Record {
                id: record.id,
                label: record.label,
                windows: record.windows,
            });
        }
        Ok(())
    }
}

/// Parses the capture text format.
///
/// ```text
/// #record 17 walking
/// #sensor acc
/// 0,0.12,-0.98,9.77
/// 10,0.15,-0.97,9.80
/// ```
///
/// Blank lines and `//` comment lines are ignored anywhere. A `#record`
/// header starts a new record (id plus label token); each `#sensor` block
/// under it holds comma-separated `t_ms,x,y,z` rows with strictly
/// increasing timestamps and finite values.
pub fn parse_capture(text: &str) -> Result<Capture, CaptureParseError> {
    let mut p = Parser {
        capture: Capture::default(),
        record: None,
    };

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with("//") {
            continue;
        }

        if let Some(rest) = trimmed.strip_prefix("#record") {
            p.close_record()?;
            let mut parts = rest.split_whitespace();
            let id_token = parts.next().ok_or_else(|| CaptureParseError::MalformedLine {
                line,
                reason: "record header needs an id and a label".to_string(),
            })?;
            let label_token = parts.next().ok_or_else(|| CaptureParseError::MalformedLine {
                line,
                reason: "record header needs a label".to_string(),
            })?;
            if parts.next().is_some() {
                return Err(CaptureParseError::MalformedLine {
                    line,
                    reason: "record header has trailing fields".to_string(),
                });
            }
            let id = id_token.parse::<u64>().map_err(|_| CaptureParseError::MalformedLine {
                line,
                reason: format!("record id {:?} is not a non-negative integer", id_token),
            })?;
            let label = AdlLabel::from_token(label_token).ok_or(CaptureParseError::UnknownLabel {
                line,
                token: label_token.to_string(),
            })?;
            p.record = Some(PendingRecord {
                header_line: line,
                id,
                label,
                windows: Vec::new(),
                open: None,
            });
        } else if let Some(rest) = trimmed.strip_prefix("#sensor") {
            let token = rest.trim();
            let sensor = SensorKind::from_token(token).ok_or(CaptureParseError::UnknownSensor {
                line,
                token: token.to_string(),
            })?;
            p.close_window()?;
            let record = p.record.as_mut().ok_or_else(|| CaptureParseError::MalformedLine {
                line,
                reason: "sensor block outside of a record".to_string(),
            })?;
            if record.windows.iter().any(|w| w.sensor == sensor) {
                return Err(CaptureParseError::MalformedLine {
                    line,
                    reason: format!("duplicate sensor block {:?}", sensor.token()),
                });
            }
            record.open = Some(PendingWindow {
                header_line: line,
                sensor,
                samples: Vec::new(),
            });
        } else if trimmed.starts_with('#') {
            return Err(CaptureParseError::MalformedLine {
                line,
                reason: format!("unknown directive {:?}", trimmed.split_whitespace().next().unwrap_or("#")),
            });
        } else {
            let open = p
                .record
                .as_mut()
                .and_then(|r| r.open.as_mut())
                .ok_or_else(|| CaptureParseError::MalformedLine {
                    line,
                    reason: "sample row outside of a sensor block".to_string(),
                })?;
            let fields: Vec<&str> = trimmed.split(',').map(str::trim).collect();
            if fields.len() != 4 {
                return Err(CaptureParseError::MalformedLine {
                    line,
                    reason: format!("expected 4 comma-separated fields, got {}", fields.len()),
                });
            }
            let mut values = [0.0f64; 4];
            for (slot, field) in values.iter_mut().zip(&fields) {
                let v = field.parse::<f64>().map_err(|_| CaptureParseError::MalformedLine {
                    line,
                    reason: format!("{:?} is not a number", field),
                })?;
                if !v.is_finite() {
                    return Err(CaptureParseError::MalformedLine {
                        line,
                        reason: format!("{:?} is not finite", field),
                    });
                }
                *slot = v;
            }
            let sample = Sample {
                t_ms: values[0],
                x: values[1],
                y: values[2],
                z: values[3],
            };
            if let Some(last) = open.samples.last() {
                if sample.t_ms.partial_cmp(&last.t_ms) != Some(std::cmp::Ordering::Greater) {
                    return Err(CaptureParseError::NonMonotonicTimestamp { line });
                }
            }
            open.samples.push(sample);
        }
    }

    p.close_record()?;
    Ok(p.capture)
}

/// Renders a capture in the same text format [`parse_capture`] reads.
/// Floats use the shortest representation that round-trips, so
/// parse(render(c)) reproduces `c` exactly for nominal-period captures.
pub fn render_capture(capture: &Capture) -> String {
    let mut out = String::new();
    for record in &capture.records {
        out.push_str("#record ");
        out.push_str(&record.id.to_string());
        out.push(' ');
        out.push_str(record.label.token());
        out.push('\n');
        for window in &record.windows {
            out.push_str("#sensor ");
            out.push_str(window.sensor.token());
            out.push('\n');
            for s in &window.samples {
                out.push_str(&format!("{},{},{},{}\n", s.t_ms, s.x, s.y, s.z));
            }
        }
    }
    out
}
