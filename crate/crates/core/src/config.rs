//! The harness configuration file. Every section and key is optional;
//! missing values take their defaults.

use serde::{Deserialize, Serialize};

use crate::analysis::CohesionConfig;
use crate::correctness::CorrectnessConfig;
use crate::dataset::expand::ExpansionConfig;
use crate::metrics::{EvalConfig, StageBounds};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsSection {
    /// `[numerator, denominator]` pairs.
    pub stages: StageBounds,
    pub histogram_bin_width: f64,
    pub bimodality_low: f64,
    pub bimodality_high: f64,
}

impl Default for MetricsSection {
    fn default() -> Self {
        let e = EvalConfig::default();
        MetricsSection {
            stages: e.stages,
            histogram_bin_width: e.histogram_bin_width,
            bimodality_low: e.bimodality_low,
            bimodality_high: e.bimodality_high,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnalysisSection {
    #[serde(flatten)]
    pub cohesion: CohesionConfig,
    pub challenging_k: usize,
}

impl Default for AnalysisSection {
    fn default() -> Self {
        AnalysisSection { cohesion: CohesionConfig::default(), challenging_k: 10 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineSection {
    #[serde(flatten)]
    pub expansion: ExpansionConfig,
    /// Rejection rates of the mock generator's two verification checks.
    pub mock_reject_low_high: f64,
    pub mock_reject_action_low: f64,
    /// Attempts per generator call, including the first.
    pub retries: u32,
    pub retry_base_ms: u64,
    pub timeout_s: u64,
}

impl Default for PipelineSection {
    fn default() -> Self {
        PipelineSection {
            expansion: ExpansionConfig::default(),
            mock_reject_low_high: 0.0,
            mock_reject_action_low: 0.0,
            retries: 3,
            retry_base_ms: 500,
            timeout_s: 60,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HarnessSection {
    pub stdio_concurrency: usize,
    pub http_concurrency: usize,
    pub timeout_s: u64,
    pub handshake_timeout_s: u64,
}

impl Default for HarnessSection {
    fn default() -> Self {
        HarnessSection { stdio_concurrency: 1, http_concurrency: 8, timeout_s: 120, handshake_timeout_s: 30 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub seed: Option<u64>,
    pub correctness: CorrectnessConfig,
    pub metrics: MetricsSection,
    pub analysis: AnalysisSection,
    pub pipeline: PipelineSection,
    pub harness: HarnessSection,
}

impl Config {
    pub fn eval_config(&self) -> EvalConfig {
        EvalConfig {
            correctness: self.correctness.clone(),
            stages: self.metrics.stages.clone(),
            cohesion: self.analysis.cohesion.clone(),
            histogram_bin_width: self.metrics.histogram_bin_width,
            bimodality_low: self.metrics.bimodality_low,
            bimodality_high: self.metrics.bimodality_high,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_round_trip_and_partial_sections() {
        let c = Config::default();
        let text = serde_json::to_string(&c).unwrap();
        assert_eq!(serde_json::from_str::<Config>(&text).unwrap(), c);
        let partial: Config = serde_json::from_str(r#"{"correctness":{"radius":0.2},"analysis":{"high_cut":0.9}}"#).unwrap();
        assert_eq!(partial.correctness.radius, 0.2);
        assert_eq!(partial.analysis.cohesion.high_cut, 0.9);
        assert_eq!(partial.analysis.challenging_k, 10);
        assert!(serde_json::from_str::<Config>(r#"{"metric":{}}"#).is_err());
    }
}
