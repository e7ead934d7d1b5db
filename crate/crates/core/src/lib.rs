//! State-level evaluation of GUI agents.
//!
//! An agent is scored per screen state: every state carries several
//! instructions, the share an agent gets right is its EM for that state, and
//! states fall into four stages by that share. The crate covers the whole
//! path from raw episodes to reports:
//!
//! - [`dataset`]: ingestion, instruction generation, filtering, task
//!   classification, the JSONL dataset format and trajectory trees;
//! - [`grammar`] and [`correctness`]: reading agent answers and judging them;
//! - [`metrics`] and [`analysis`]: EM, success rate, stages and error cohesion;
//! - [`harness`]: talking to agents over stdio or HTTP;
//! - [`report`]: tables and CSV files.

pub mod analysis;
pub mod config;
pub mod correctness;
pub mod dataset;
pub mod exec;
pub mod grammar;
pub mod harness;
pub mod metrics;
pub mod model;
pub mod rational;
pub mod report;

pub use analysis::{action_similarity, challenging_states, cohesion, CohesionConfig, CohesionReport, Diagnosis};
pub use config::Config;
pub use correctness::{judge, judge_instruction, token_f1, CorrectnessConfig, F1Direction};
pub use dataset::{Dataset, GeneratorClient, MockBackend, MockClient};
pub use grammar::{parse_action, parse_action_in, serialize_action, CoordinateSpace, GrammarError};
pub use harness::{run_batch, Adapter, AdapterError, BatchOptions, HarnessError, PredictionCache, ReplayAdapter};
pub use metrics::{aggregate, classify_stage, em_all, em_state, success_rate, EvalConfig, EvaluationSummary, MetricsError, StageBounds};
pub use model::{
    Action, ActionKind, BBox, Dimension, GoldTarget, Instruction, Point, Prediction, PredictionOutcome, ScrollDirection, Stage,
    StateGroup, StateResult, TrajectoryTree, UiState, Verdict, VerdictReason, Widget,
};
pub use rational::Rational;
pub use report::ReportBundle;
