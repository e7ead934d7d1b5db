//! Ingestion, expansion, filtering, classification and storage of
//! evaluation datasets.

pub mod a11y;
pub mod backend;
pub mod expand;
pub mod filter;
pub mod format;
pub mod generator;
pub mod ingest;
pub mod mock;
pub mod prompts;
pub mod tree;

pub use a11y::{annotate_state, AccessibilityTree, TreeAdapter};
pub use expand::{expand_dataset, expand_mwam, expand_uwiu, ExpansionConfig};
pub use filter::{classify_tasks, filter_dataset, quality_filter};
pub use format::{Dataset, Episode, EpisodeStep, FormatError, PredictionRecord};
pub use generator::{GeneratorClient, PromptClient, APP_CATEGORIES};
pub use mock::{MockBackend, MockClient};
pub use tree::{build_trajectory_tree, merge_states, MergeKey};
