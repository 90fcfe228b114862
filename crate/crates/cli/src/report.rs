//! Report documents written by every subcommand.

use cgmatch::analysis::{BenchPoint, FlopsReport, MacCounting};
use cgmatch::Method;
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

/// Wrapper shared by all commands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope<T> {
    pub schema_version: u32,
    pub tool_version: String,
    pub command: String,
    pub result: T,
}

impl<T> Envelope<T> {
    pub fn new(command: &str, result: T) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            result,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputKind {
    Embeddings,
    Similarity,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputSummary {
    pub kind: InputKind,
    pub n: usize,
    pub dim: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub method: Method,
    pub input: InputSummary,
    pub n: usize,
    pub r: usize,
    pub seed: u64,
    pub protected: Vec<usize>,
    pub pairs: Vec<(usize, usize)>,
    pub stacks: Vec<Vec<usize>>,
    pub objective: f64,
    pub degenerate_fallbacks: usize,
    /// Only filled when timing was requested, so reports stay reproducible.
    pub timing_us: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpectReport {
    pub n: usize,
    pub layers: usize,
    pub r: usize,
    pub complete_graph: f64,
    pub bipartite: f64,
    pub difference: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateReport {
    pub n: usize,
    pub layers: usize,
    pub r: usize,
    pub method: String,
    pub trials: u64,
    pub seed: u64,
    pub estimate: f64,
    pub closed_form: f64,
    pub abs_error: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScheduleReport {
    pub n0: usize,
    pub layers: usize,
    pub r_per_layer: Vec<usize>,
    pub final_tokens: usize,
    pub effective_r_per_layer: Vec<usize>,
    pub effective_final_tokens: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlopsSummary {
    pub mac_counting: MacCounting,
    pub total_gflops: f64,
    pub baseline_gflops: f64,
    pub reduction_fraction: f64,
    pub detail: FlopsReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub dim: usize,
    pub reps: usize,
    pub seed: u64,
    pub points: Vec<BenchPoint>,
    pub loglog_slope_best: Option<f64>,
    pub loglog_slope_median: Option<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn run_report_round_trips() {
        let report = Envelope::new(
            "match",
            RunReport {
                method: Method::CompleteGraph,
                input: InputSummary {
                    kind: InputKind::Similarity,
                    n: 4,
                    dim: 4,
                },
                n: 4,
                r: 2,
                seed: 0,
                protected: vec![],
                pairs: vec![(0, 2), (1, 3)],
                stacks: vec![vec![0, 2], vec![1, 3]],
                objective: 0.1 + 0.2,
                degenerate_fallbacks: 0,
                timing_us: None,
            },
        );
        let text = serde_json::to_string_pretty(&report).unwrap();
        let back: Envelope<RunReport> = serde_json::from_str(&text).unwrap();
        assert_eq!(back, report);
        assert!(text.contains("\"method\": \"cgsm\""));
    }
}
