//! Handwriting data model and ingestion.
//!
//! Recordings are stored as plain-text SVC files: the first line holds the
//! sample count `N`, followed by exactly `N` lines of seven whitespace
//! separated integers
//!
//! ```text
//! x y timestamp pen_status azimuth altitude pressure
//! ```
//!
//! with `pen_status` 0 (up) or 1 (down). A dataset is a directory tree
//! `root/subject<NN>/session<S>/task<T>.svc` with `NN` in `01..=99`, `S` in
//! `1..=5` and `T` in `1..=9`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Number of acquisition sessions per subject.
pub const SESSIONS: u8 = 5;
/// Number of handwriting tasks per session.
pub const TASKS: u8 = 9;
/// Largest subject id representable by the two-digit directory layout.
pub const MAX_SUBJECT: u32 = 99;

const COLUMNS: usize = 7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PenStatus {
    Up,
    Down,
}

impl PenStatus {
    pub fn code(self) -> u8 {
        match self {
            PenStatus::Up => 0,
            PenStatus::Down => 1,
        }
    }

    pub fn from_code(code: i64) -> Option<Self> {
        match code {
            0 => Some(PenStatus::Up),
            1 => Some(PenStatus::Down),
            _ => None,
        }
    }
}

/// One digitizer event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sample {
    pub x: i64,
    pub y: i64,
    /// Milliseconds.
    pub timestamp: i64,
    pub pen_status: PenStatus,
    pub azimuth: i64,
    pub altitude: i64,
    pub pressure: u32,
}

/// Tablet pressure characteristics.
///
/// `force_at_max` is the force in Newton/mm² that corresponds to a reading of
/// `max_level`. The Wacom tablet used for the fatigue recordings saturates at
/// level 1023, which is roughly 45 N/mm².
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeviceProfile {
    pub max_level: u32,
    pub force_at_max: f64,
}

impl DeviceProfile {
    pub fn new(max_level: u32, force_at_max: f64) -> Result<Self, DeviceError> {
        if max_level == 0 {
            return Err(DeviceError::ZeroMaxLevel);
        }
        if !(force_at_max.is_finite() && force_at_max > 0.0) {
            return Err(DeviceError::InvalidForce(force_at_max));
        }
        Ok(Self {
            max_level,
            force_at_max,
        })
    }
}

impl Default for DeviceProfile {
    fn default() -> Self {
        Self {
            max_level: 1023,
            force_at_max: 45.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DeviceError {
    #[error("device max_level must be positive")]
    ZeroMaxLevel,
    #[error("device force_at_max must be a positive finite number, got {0}")]
    InvalidForce(f64),
}

/// Identity of a recording within a dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RecordingKey {
    pub subject: u32,
    pub session: u8,
    pub task: u8,
}

impl RecordingKey {
    pub fn new(subject: u32, session: u8, task: u8) -> Result<Self, RecordingError> {
        if subject == 0 || subject > MAX_SUBJECT {
            return Err(RecordingError::SubjectOutOfRange(subject));
        }
        if !(1..=SESSIONS).contains(&session) {
            return Err(RecordingError::SessionOutOfRange(session));
        }
        if !(1..=TASKS).contains(&task) {
            return Err(RecordingError::TaskOutOfRange(task));
        }
        Ok(Self {
            subject,
            session,
            task,
        })
    }

    /// Path of this recording relative to a dataset root.
    pub fn relative_path(&self) -> PathBuf {
        PathBuf::from(format!("subject{:02}", self.subject))
            .join(format!("session{}", self.session))
            .join(format!("task{}.svc", self.task))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RecordingError {
    #[error("subject id {0} outside 1..={MAX_SUBJECT}")]
    SubjectOutOfRange(u32),
    #[error("session id {0} outside 1..={SESSIONS}")]
    SessionOutOfRange(u8),
    #[error("task id {0} outside 1..={TASKS}")]
    TaskOutOfRange(u8),
    #[error("recording has no samples")]
    Empty,
    #[error("timestamp decreases at sample {index}")]
    TimestampDecreasing { index: usize },
    #[error("sample {index} has pressure {pressure} above max level {max_level}")]
    PressureOutOfRange {
        index: usize,
        pressure: u32,
        max_level: u32,
    },
}

/// Ordered samples for one (subject, session, task) triple.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recording {
    key: RecordingKey,
    samples: Vec<Sample>,
    device: DeviceProfile,
}

impl Recording {
    pub fn new(
        key: RecordingKey,
        samples: Vec<Sample>,
        device: DeviceProfile,
    ) -> Result<Self, RecordingError> {
        if samples.is_empty() {
            return Err(RecordingError::Empty);
        }
        for (index, pair) in samples.windows(2).enumerate() {
            if pair[1].timestamp < pair[0].timestamp {
                return Err(RecordingError::TimestampDecreasing { index: index + 1 });
            }
        }
        if let Some((index, s)) = samples
            .iter()
            .enumerate()
            .find(|(_, s)| s.pressure > device.max_level)
        {
            return Err(RecordingError::PressureOutOfRange {
                index,
                pressure: s.pressure,
                max_level: device.max_level,
            });
        }
        Ok(Self {
            key,
            samples,
            device,
        })
    }

    pub fn key(&self) -> RecordingKey {
        self.key
    }

    pub fn subject_id(&self) -> u32 {
        self.key.subject
    }

    pub fn session_id(&self) -> u8 {
        self.key.session
    }

    pub fn task_id(&self) -> u8 {
        self.key.task
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn device(&self) -> &DeviceProfile {
        &self.device
    }

    pub fn pressures(&self) -> Vec<u32> {
        self.samples.iter().map(|s| s.pressure).collect()
    }

    pub fn to_svc(&self) -> String {
        serialize_svc(&self.samples)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SvcErrorKind {
    #[error("missing sample count header")]
    MissingHeader,
    #[error("invalid sample count header {0:?}")]
    InvalidHeader(String),
    #[error("header declares {declared} samples but {found} sample lines follow")]
    CountMismatch { declared: usize, found: usize },
    #[error("expected {COLUMNS} columns, found {0}")]
    TooFewColumns(usize),
    #[error("expected {COLUMNS} columns, found {0}")]
    TooManyColumns(usize),
    #[error("column {column} is not an integer: {token:?}")]
    NotAnInteger { column: usize, token: String },
    #[error("pen status must be 0 or 1, got {0}")]
    InvalidPenStatus(i64),
    #[error("pressure {pressure} outside [0, {max_level}]")]
    PressureOutOfRange { pressure: i64, max_level: u32 },
    #[error("timestamp {timestamp} is earlier than the previous sample")]
    TimestampDecreasing { timestamp: i64 },
    #[error("file declares zero samples")]
    Empty,
}

/// A parse failure together with the 1-based line it occurred on.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {kind}")]
pub struct SvcError {
    pub line: usize,
    pub kind: SvcErrorKind,
}

impl SvcError {
    fn at(line: usize, kind: SvcErrorKind) -> Self {
        Self { line, kind }
    }
}

/// Parses the sample payload of one SVC file.
///
/// Blank lines are ignored. On any error no samples are returned.
pub fn parse_svc(text: &str, device: &DeviceProfile) -> Result<Vec<Sample>, SvcError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());

    let (header_line, header) = lines
        .next()
        .ok_or(SvcError::at(1, SvcErrorKind::MissingHeader))?;
    let declared: usize = header
        .parse()
        .map_err(|_| SvcError::at(header_line, SvcErrorKind::InvalidHeader(header.to_owned())))?;

    let body: Vec<(usize, &str)> = lines.collect();
    if body.len() != declared {
        return Err(SvcError::at(
            header_line,
            SvcErrorKind::CountMismatch {
                declared,
                found: body.len(),
            },
        ));
    }
    if declared == 0 {
        return Err(SvcError::at(header_line, SvcErrorKind::Empty));
    }

    let mut samples = Vec::with_capacity(declared);
    let mut previous_ts = i64::MIN;
    for (line, content) in body {
        let sample = parse_sample_line(content, device).map_err(|kind| SvcError::at(line, kind))?;
        if sample.timestamp < previous_ts {
            return Err(SvcError::at(
                line,
                SvcErrorKind::TimestampDecreasing {
                    timestamp: sample.timestamp,
                },
            ));
        }
        previous_ts = sample.timestamp;
        samples.push(sample);
    }
    Ok(samples)
}

fn parse_sample_line(content: &str, device: &DeviceProfile) -> Result<Sample, SvcErrorKind> {
    let tokens: Vec<&str> = content.split_whitespace().collect();
    if tokens.len() < COLUMNS {
        return Err(SvcErrorKind::TooFewColumns(tokens.len()));
    }
    if tokens.len() > COLUMNS {
        return Err(SvcErrorKind::TooManyColumns(tokens.len()));
    }
    let mut values = [0i64; COLUMNS];
    for (column, (slot, token)) in values.iter_mut().zip(&tokens).enumerate() {
        *slot = token.parse().map_err(|_| SvcErrorKind::NotAnInteger {
            column: column + 1,
            token: (*token).to_owned(),
        })?;
    }
    let [x, y, timestamp, status, azimuth, altitude, pressure] = values;
    let pen_status = PenStatus::from_code(status).ok_or(SvcErrorKind::InvalidPenStatus(status))?;
    if pressure < 0 || pressure > i64::from(device.max_level) {
        return Err(SvcErrorKind::PressureOutOfRange {
            pressure,
            max_level: device.max_level,
        });
    }
    Ok(Sample {
        x,
        y,
        timestamp,
        pen_status,
        azimuth,
        altitude,
        pressure: pressure as u32,
    })
}

/// Canonical SVC text: count header, one space-separated line per sample,
/// every line terminated by `\n`.
pub fn serialize_svc(samples: &[Sample]) -> String {
    let mut out = String::with_capacity(16 + samples.len() * 32);
    let _ = writeln!(out, "{}", samples.len());
    for s in samples {
        let _ = writeln!(
            out,
            "{} {} {} {} {} {} {}",
            s.x,
            s.y,
            s.timestamp,
            s.pen_status.code(),
            s.azimuth,
            s.altitude,
            s.pressure
        );
    }
    out
}

/// Recordings indexed by (subject, session, task).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    recordings: BTreeMap<RecordingKey, Recording>,
}

impl Dataset {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, recording: Recording) -> Result<(), DatasetError> {
        let key = recording.key();
        if self.recordings.contains_key(&key) {
            return Err(DatasetError::DuplicateKey(key));
        }
        self.recordings.insert(key, recording);
        Ok(())
    }

    pub fn get(&self, key: &RecordingKey) -> Option<&Recording> {
        self.recordings.get(key)
    }

    pub fn len(&self) -> usize {
        self.recordings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.recordings.is_empty()
    }

    /// Recordings in (subject, session, task) order.
    pub fn recordings(&self) -> impl Iterator<Item = &Recording> {
        self.recordings.values()
    }

    pub fn keys(&self) -> impl Iterator<Item = &RecordingKey> {
        self.recordings.keys()
    }

    /// Writes every recording under `root` using the dataset layout.
    pub fn write_to(&self, root: &Path) -> Result<(), DatasetError> {
        for recording in self.recordings.values() {
            let path = root.join(recording.key().relative_path());
            if let Some(parent) = path.parent() {
                fs::create_dir_all(parent).map_err(|source| DatasetError::Io {
                    path: parent.to_path_buf(),
                    source,
                })?;
            }
            fs::write(&path, recording.to_svc())
                .map_err(|source| DatasetError::Io { path, source })?;
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: {source}", path.display())]
    Parse {
        path: PathBuf,
        #[source]
        source: SvcError,
    },
    #[error("{}: {source}", path.display())]
    Invalid {
        path: PathBuf,
        #[source]
        source: RecordingError,
    },
    #[error("duplicate recording for subject {}, session {}, task {}", .0.subject, .0.session, .0.task)]
    DuplicateKey(RecordingKey),
}

fn parse_prefixed<T: std::str::FromStr>(
    name: &str,
    prefix: &str,
    digits: Option<usize>,
) -> Option<T> {
    let rest = name.strip_prefix(prefix)?;
    if rest.is_empty() || !rest.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    if digits.is_some_and(|d| rest.len() != d) {
        return None;
    }
    rest.parse().ok()
}

fn sorted_entries(dir: &Path) -> Result<Vec<(String, PathBuf)>, DatasetError> {
    let io_err = |source| DatasetError::Io {
        path: dir.to_path_buf(),
        source,
    };
    let mut entries = Vec::new();
    for entry in fs::read_dir(dir).map_err(io_err)? {
        let entry = entry.map_err(io_err)?;
        if let Some(name) = entry.file_name().to_str() {
            entries.push((name.to_owned(), entry.path()));
        }
    }
    entries.sort();
    Ok(entries)
}

fn discover(root: &Path) -> Result<Vec<(RecordingKey, PathBuf)>, DatasetError> {
    let mut found = Vec::new();
    for (name, subject_dir) in sorted_entries(root)? {
        let Some(subject) = parse_prefixed::<u32>(&name, "subject", Some(2)) else {
            continue;
        };
        if !subject_dir.is_dir() {
            continue;
        }
        for (name, session_dir) in sorted_entries(&subject_dir)? {
            let Some(session) = parse_prefixed::<u8>(&name, "session", Some(1)) else {
                continue;
            };
            if !session_dir.is_dir() {
                continue;
            }
            for (name, file) in sorted_entries(&session_dir)? {
                let Some(task) = name
                    .strip_suffix(".svc")
                    .and_then(|stem| parse_prefixed::<u8>(stem, "task", Some(1)))
                else {
                    continue;
                };
                if !file.is_file() {
                    continue;
                }
                if let Ok(key) = RecordingKey::new(subject, session, task) {
                    found.push((key, file));
                }
            }
        }
    }
    Ok(found)
}

/// Loads every recording found under `root`.
///
/// Entries that do not match the layout are ignored and missing cells are
/// simply absent. Files are parsed in parallel; the first failure in
/// (subject, session, task) order is reported.
pub fn load_dataset(root: &Path, device: &DeviceProfile) -> Result<Dataset, DatasetError> {
    let files = discover(root)?;
    let parsed: Vec<Result<Recording, DatasetError>> = files
        .into_par_iter()
        .map(|(key, path)| {
            let text = fs::read_to_string(&path).map_err(|source| DatasetError::Io {
                path: path.clone(),
                source,
            })?;
            let samples = parse_svc(&text, device).map_err(|source| DatasetError::Parse {
                path: path.clone(),
                source,
            })?;
            Recording::new(key, samples, *device)
                .map_err(|source| DatasetError::Invalid { path, source })
        })
        .collect();

    let mut dataset = Dataset::new();
    for recording in parsed {
        dataset.insert(recording?)?;
    }
    Ok(dataset)
}
