//! Pen-pressure saturation analysis for online handwriting.
//!
//! The pipeline parses tablet recordings ([`hwdata`]), computes per-recording
//! features ([`features`]), aggregates them per task and session and renders
//! the output tables ([`report`]), and compares sessions with the Wilcoxon
//! rank-sum test ([`stats`]). [`synth`] generates seeded datasets with the
//! same layout, and [`cli`] wires everything into the `hwfatigue` binary.

pub mod cli;
pub mod features;
pub mod hwdata;
pub mod report;
pub mod stats;
pub mod synth;

pub use features::{extract_features, FeatureVector};
pub use hwdata::{load_dataset, parse_svc, Dataset, DeviceProfile, Recording, Sample};
pub use report::{aggregate, FeatureSelector, SessionTaskSummary};
pub use stats::{ranksum, TestResult};
