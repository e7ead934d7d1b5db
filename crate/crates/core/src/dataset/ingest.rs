//! Raw episodes (accessibility trees plus gold actions) into annotated states.
//!
//! Input is JSONL, one episode per line:
//!
//! ```json
//! {"episode_id": "e1", "goal": "turn on wifi",
//!  "coordinate_space": {"space": "pixels", "width": 1080, "height": 2400},
//!  "steps": [{"screenshot_ref": "e1/0.png", "accessibility_tree": {...},
//!             "action": {"action_type": "click", "ui": 3}, "low_level": "open settings"}]}
//! ```
//!
//! `coordinate_space` applies to `x`/`y` in actions and defaults to
//! normalized. Actions may instead name a widget with `ui`, resolved
//! against that step's annotated screen.

use serde::Deserialize;
use serde_json::{Map, Value};
use thiserror::Error;

use super::a11y::{annotate_state, A11yError, TreeAdapter};
use super::format::{Dataset, Episode, EpisodeStep};
use crate::grammar::{action_from_record, CoordinateSpace, GrammarError, RawActionRecord};
use crate::model::state_id_for;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("line {line}: {message}")]
    BadRecord { line: usize, message: String },
    #[error("episode {episode_id} step {step}: {source}")]
    Tree { episode_id: String, step: usize, source: A11yError },
    #[error("episode {episode_id} step {step}: {source}")]
    Action { episode_id: String, step: usize, source: GrammarError },
    #[error("episode {0} appears twice")]
    DuplicateEpisode(String),
}

#[derive(Debug, Clone, Deserialize)]
pub struct RawEpisode {
    pub episode_id: String,
    pub goal: String,
    #[serde(default)]
    pub coordinate_space: CoordinateSpace,
    pub steps: Vec<RawStep>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct RawStep {
    pub screenshot_ref: String,
    pub accessibility_tree: Value,
    pub action: Map<String, Value>,
    #[serde(default)]
    pub low_level: Option<String>,
    #[serde(default)]
    pub raw_tree_ref: Option<String>,
}

pub fn parse_raw_episodes(text: &str) -> Result<Vec<RawEpisode>, IngestError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| IngestError::BadRecord { line: i + 1, message: e.to_string() }))
        .collect()
}

/// Annotates every step and links the episodes to the resulting states.
pub fn ingest(episodes: &[RawEpisode], adapter: &dyn TreeAdapter) -> Result<Dataset, IngestError> {
    let mut ds = Dataset::default();
    let mut seen = std::collections::HashSet::new();
    for ep in episodes {
        if !seen.insert(ep.episode_id.as_str()) {
            return Err(IngestError::DuplicateEpisode(ep.episode_id.clone()));
        }
        let mut steps = Vec::with_capacity(ep.steps.len());
        for (t, step) in ep.steps.iter().enumerate() {
            let tree_err = |source| IngestError::Tree { episode_id: ep.episode_id.clone(), step: t, source };
            let action_err = |source| IngestError::Action { episode_id: ep.episode_id.clone(), step: t, source };
            let tree = adapter.to_canonical(&step.accessibility_tree).map_err(tree_err)?;
            let state_id = state_id_for(&ep.episode_id, t as u32);
            let mut state = annotate_state(&tree, &state_id, &step.screenshot_ref).map_err(tree_err)?;
            state.raw_tree_ref = step.raw_tree_ref.clone();
            state.episode_id = Some(ep.episode_id.clone());
            state.step_index = Some(t as u32);
            let record = RawActionRecord::from_json(&step.action).map_err(action_err)?;
            let action = action_from_record(&record, Some(&state), ep.coordinate_space).map_err(action_err)?;
            steps.push(EpisodeStep { state_id, action, low_level: step.low_level.clone() });
            ds.states.push(state);
        }
        ds.episodes.push(Episode { episode_id: ep.episode_id.clone(), goal: ep.goal.clone(), steps });
    }
    ds.canonicalize();
    Ok(ds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::a11y::CanonicalAdapter;
    use crate::model::{Action, Point};

    const EPISODE: &str = r#"{"episode_id":"e1","goal":"open wifi","coordinate_space":{"space":"pixels","width":100,"height":200},"steps":[
        {"screenshot_ref":"e1/0.png","accessibility_tree":{"screen":{"width":100,"height":200},"root":{"bounds":[0,0,100,200],"children":[
            {"bounds":[0,0,50,100],"clickable":true,"text":"Wi-Fi"},{"bounds":[50,100,100,200],"clickable":true}]}},
         "action":{"action_type":"click","ui":2},"low_level":"tap wifi"},
        {"screenshot_ref":"e1/1.png","accessibility_tree":{"screen":{"width":100,"height":200},"root":{"bounds":[0,0,100,200],"clickable":true}},
         "action":{"action_type":"click","x":25,"y":50}}]}"#;

    #[test]
    fn ingests_and_resolves_actions() {
        let raw = parse_raw_episodes(&EPISODE.replace('\n', "")).unwrap();
        let ds = ingest(&raw, &CanonicalAdapter).unwrap();
        assert_eq!(ds.states.len(), 2);
        let ep = &ds.episodes[0];
        assert_eq!(ep.steps[0].state_id, state_id_for("e1", 0));
        assert_eq!(ep.steps[0].action, Action::Click { target: Point::new(0.75, 0.75).unwrap() });
        assert_eq!(ep.steps[1].action, Action::Click { target: Point::new(0.25, 0.25).unwrap() });
        let s0 = ds.state(&ep.steps[0].state_id).unwrap();
        assert_eq!(s0.widgets.len(), 2);
        assert_eq!(s0.step_index, Some(0));
        Dataset::from_jsonl(&ds.to_jsonl()).unwrap();
    }

    #[test]
    fn unresolvable_widget_is_reported() {
        let text = EPISODE.replace('\n', "").replace("\"ui\":2", "\"ui\":7");
        let raw = parse_raw_episodes(&text).unwrap();
        assert!(matches!(ingest(&raw, &CanonicalAdapter), Err(IngestError::Action { step: 0, .. })));
    }
}
