//! Cross-subject aggregation and the CSV / JSON output tables.
//!
//! Renderers only format numbers already stored in a [`SummaryGrid`] or in
//! test results; they never aggregate on their own. CSV cells that have no
//! value are empty, the JSON equivalent is `null`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::features::{
    recording_mean_pressure, recording_saturation, FeatureError, FeatureOptions,
};
use crate::hwdata::{Dataset, Recording, SESSIONS, TASKS};
use crate::stats::{pair_label, Method, SessionValues, TestResult, SESSION_PAIRS};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureSelector {
    SaturationRatio,
    MeanPressure,
}

impl FeatureSelector {
    pub fn evaluate(
        self,
        recording: &Recording,
        options: &FeatureOptions,
    ) -> Result<f64, FeatureError> {
        match self {
            FeatureSelector::SaturationRatio => recording_saturation(recording, options),
            FeatureSelector::MeanPressure => recording_mean_pressure(recording, options),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            FeatureSelector::SaturationRatio => "saturation_ratio",
            FeatureSelector::MeanPressure => "mean_pressure",
        }
    }
}

/// Per-subject values of one feature for one (task, session) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionTaskSummary {
    pub task_id: u8,
    pub session_id: u8,
    /// Ordered by subject id.
    pub values: Vec<f64>,
    /// `None` when the cell is empty.
    pub mean: Option<f64>,
    /// Sample standard deviation (n - 1 denominator); `None` when n < 2.
    pub std: Option<f64>,
    pub n: usize,
}

impl SessionTaskSummary {
    pub fn from_values(task_id: u8, session_id: u8, values: Vec<f64>) -> Self {
        let n = values.len();
        let mean = (n > 0).then(|| values.iter().sum::<f64>() / n as f64);
        let std = match mean {
            Some(m) if n >= 2 => {
                let ss: f64 = values.iter().map(|v| (v - m) * (v - m)).sum();
                Some((ss / (n - 1) as f64).sqrt())
            }
            _ => None,
        };
        Self {
            task_id,
            session_id,
            values,
            mean,
            std,
            n,
        }
    }
}

/// 9 tasks × 5 sessions of summaries, task-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryGrid {
    pub feature: FeatureSelector,
    cells: Vec<SessionTaskSummary>,
}

fn cell_index(task: u8, session: u8) -> usize {
    assert!((1..=TASKS).contains(&task) && (1..=SESSIONS).contains(&session));
    usize::from(task - 1) * usize::from(SESSIONS) + usize::from(session - 1)
}

impl SummaryGrid {
    pub fn get(&self, task: u8, session: u8) -> &SessionTaskSummary {
        &self.cells[cell_index(task, session)]
    }

    pub fn cells(&self) -> &[SessionTaskSummary] {
        &self.cells
    }

    /// Input for [`crate::stats::pairwise_session_tests`]; empty cells are left out.
    pub fn session_values(&self) -> SessionValues {
        self.cells
            .iter()
            .filter(|c| c.n > 0)
            .map(|c| ((c.task_id, c.session_id), c.values.clone()))
            .collect()
    }
}

pub fn aggregate(dataset: &Dataset, feature: FeatureSelector) -> Result<SummaryGrid, FeatureError> {
    aggregate_with(dataset, feature, &FeatureOptions::default())
}

/// Collects `feature` for every recording into its (task, session) cell.
/// Cells without recordings get `n = 0`.
pub fn aggregate_with(
    dataset: &Dataset,
    feature: FeatureSelector,
    options: &FeatureOptions,
) -> Result<SummaryGrid, FeatureError> {
    let recordings: Vec<&Recording> = dataset.recordings().collect();
    let evaluated: Vec<(u8, u8, f64)> = recordings
        .par_iter()
        .map(|r| Ok((r.task_id(), r.session_id(), feature.evaluate(r, options)?)))
        .collect::<Result<_, FeatureError>>()?;

    let mut buckets: Vec<Vec<f64>> = vec![Vec::new(); usize::from(TASKS) * usize::from(SESSIONS)];
    // Dataset iteration is subject-major, so each bucket ends up ordered by subject.
    for (task, session, value) in evaluated {
        buckets[cell_index(task, session)].push(value);
    }
    let mut buckets = buckets.into_iter();
    let mut cells = Vec::with_capacity(buckets.len());
    for task in 1..=TASKS {
        for session in 1..=SESSIONS {
            let values = buckets.next().unwrap_or_default();
            cells.push(SessionTaskSummary::from_values(task, session, values));
        }
    }
    Ok(SummaryGrid { feature, cells })
}

fn csv_writer() -> csv::Writer<Vec<u8>> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new())
}

fn finish_csv(writer: csv::Writer<Vec<u8>>) -> String {
    let bytes = writer.into_inner().expect("in-memory csv writer");
    String::from_utf8(bytes).expect("csv output is utf-8")
}

fn opt_cell(value: Option<f64>, format: impl Fn(f64) -> String) -> String {
    value.map(format).unwrap_or_default()
}

fn full_precision(v: f64) -> String {
    format!("{v}")
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    schema_version: u32,
    #[serde(flatten)]
    payload: Payload<'a, T>,
}

#[derive(Serialize)]
#[serde(rename_all = "snake_case")]
enum Payload<'a, T: Serialize> {
    Table1(&'a T),
    Table2(&'a T),
    FigureData(&'a T),
}

fn to_json_text<T: Serialize>(payload: Payload<'_, T>) -> String {
    let mut text = serde_json::to_string_pretty(&Envelope {
        schema_version: SCHEMA_VERSION,
        payload,
    })
    .expect("report types serialize");
    text.push('\n');
    text
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table1Row {
    pub session: u8,
    /// Indexed by task - 1.
    pub std: Vec<Option<f64>>,
}

/// Cross-subject standard deviation of the per-recording feature, one row
/// per session and one column per task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table1 {
    pub feature: FeatureSelector,
    pub rows: Vec<Table1Row>,
}

/// Intended for a grid aggregated with [`FeatureSelector::MeanPressure`].
pub fn render_table1(grid: &SummaryGrid) -> Table1 {
    let rows = (1..=SESSIONS)
        .map(|session| Table1Row {
            session,
            std: (1..=TASKS)
                .map(|task| grid.get(task, session).std)
                .collect(),
        })
        .collect();
    Table1 {
        feature: grid.feature,
        rows,
    }
}

impl Table1 {
    /// Values rounded to integers.
    pub fn to_csv(&self) -> String {
        let mut w = csv_writer();
        let mut header = vec!["session".to_owned()];
        header.extend((1..=TASKS).map(|t| format!("T{t}")));
        w.write_record(&header).expect("in-memory write");
        for row in &self.rows {
            let mut record = vec![row.session.to_string()];
            record.extend(
                row.std
                    .iter()
                    .map(|&v| opt_cell(v, |x| format!("{}", x.round() as i64))),
            );
            w.write_record(&record).expect("in-memory write");
        }
        finish_csv(w)
    }

    pub fn to_json(&self) -> String {
        to_json_text(Payload::Table1(self))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table2Cell {
    pub pair: String,
    pub p_value: f64,
    pub significant: bool,
    pub rank_sum: f64,
    pub method: Method,
    pub n_a: usize,
    pub n_b: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table2Row {
    pub task: u8,
    /// One entry per pair in [`SESSION_PAIRS`] order.
    pub cells: Vec<Option<Table2Cell>>,
}

impl Table2Row {
    pub fn significant_pairs(&self) -> Vec<&str> {
        self.cells
            .iter()
            .flatten()
            .filter(|c| c.significant)
            .map(|c| c.pair.as_str())
            .collect()
    }
}

/// Pairwise session p-values, 9 task rows × 10 pair columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table2 {
    pub alpha: f64,
    pub pairs: Vec<String>,
    pub rows: Vec<Table2Row>,
}

/// Cells with `p < alpha` are flagged significant.
pub fn render_table2(results: &[TestResult], alpha: f64) -> Table2 {
    let rows = (1..=TASKS)
        .map(|task| Table2Row {
            task,
            cells: SESSION_PAIRS
                .iter()
                .map(|&(sa, sb)| {
                    results
                        .iter()
                        .find(|r| r.task_id == task && r.session_a == sa && r.session_b == sb)
                        .map(|r| Table2Cell {
                            pair: pair_label(sa, sb),
                            p_value: r.p_value,
                            significant: r.p_value < alpha,
                            rank_sum: r.rank_sum,
                            method: r.method,
                            n_a: r.n_a,
                            n_b: r.n_b,
                        })
                })
                .collect(),
        })
        .collect();
    Table2 {
        alpha,
        pairs: SESSION_PAIRS
            .iter()
            .map(|&(a, b)| pair_label(a, b))
            .collect(),
        rows,
    }
}

impl Table2 {
    /// p-values to three decimals; the trailing `significant` column lists
    /// the flagged pairs separated by `;`.
    pub fn to_csv(&self) -> String {
        let mut w = csv_writer();
        let mut header = vec!["task".to_owned()];
        header.extend(self.pairs.iter().cloned());
        header.push("significant".to_owned());
        w.write_record(&header).expect("in-memory write");
        for row in &self.rows {
            let mut record = vec![row.task.to_string()];
            record.extend(
                row.cells
                    .iter()
                    .map(|c| opt_cell(c.as_ref().map(|c| c.p_value), |p| format!("{p:.3}"))),
            );
            record.push(row.significant_pairs().join(";"));
            w.write_record(&record).expect("in-memory write");
        }
        finish_csv(w)
    }

    pub fn to_json(&self) -> String {
        to_json_text(Payload::Table2(self))
    }

    pub fn row(&self, task: u8) -> Option<&Table2Row> {
        self.rows.iter().find(|r| r.task == task)
    }

    pub fn cell(&self, task: u8, session_a: u8, session_b: u8) -> Option<&Table2Cell> {
        let col = SESSION_PAIRS
            .iter()
            .position(|&p| p == (session_a, session_b))?;
        self.row(task)?.cells.get(col)?.as_ref()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FigureRow {
    pub task: u8,
    pub session: u8,
    pub mean: Option<f64>,
    pub std: Option<f64>,
    pub n: usize,
    /// Cell mean divided by the session 1 mean of the same task.
    pub ratio_vs_s1: Option<f64>,
}

/// Long-form plot data, 45 rows in task-major order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FigureData {
    pub feature: FeatureSelector,
    pub rows: Vec<FigureRow>,
}

pub fn render_fig_data(grid: &SummaryGrid) -> FigureData {
    let rows = grid
        .cells()
        .iter()
        .map(|c| {
            let baseline = grid.get(c.task_id, 1).mean;
            let ratio_vs_s1 = match (c.mean, baseline) {
                (Some(m), Some(b)) if b != 0.0 => Some(m / b),
                _ => None,
            };
            FigureRow {
                task: c.task_id,
                session: c.session_id,
                mean: c.mean,
                std: c.std,
                n: c.n,
                ratio_vs_s1,
            }
        })
        .collect();
    FigureData {
        feature: grid.feature,
        rows,
    }
}

impl FigureData {
    /// Full-precision values.
    pub fn to_csv(&self) -> String {
        let mut w = csv_writer();
        w.write_record(["task", "session", "mean", "std", "n", "ratio_vs_s1"])
            .expect("in-memory write");
        for r in &self.rows {
            w.write_record([
                r.task.to_string(),
                r.session.to_string(),
                opt_cell(r.mean, full_precision),
                opt_cell(r.std, full_precision),
                r.n.to_string(),
                opt_cell(r.ratio_vs_s1, full_precision),
            ])
            .expect("in-memory write");
        }
        finish_csv(w)
    }

    pub fn to_json(&self) -> String {
        to_json_text(Payload::FigureData(self))
    }
}
