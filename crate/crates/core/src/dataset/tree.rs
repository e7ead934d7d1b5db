//! Trajectory trees: states as nodes, `(instruction, action)` edges.
//!
//! States are only merged across episodes when a [`MergeKey`] says two
//! screens are the same; without one every step is its own node and the
//! tree is a forest of chains.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::str::FromStr;

use sha2::{Digest, Sha256};
use thiserror::Error;

use super::format::Dataset;
use crate::grammar::serialize_action;
use crate::model::{TrajectoryTree, TreeEdge, UiState};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TreeError {
    #[error("merge key `{key}` joins {a} and {b}, whose widget sets differ")]
    InconsistentMerge { key: String, a: String, b: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MergeKey {
    /// Same screenshot reference.
    ScreenshotRef,
    /// Same widget boxes, in the same order.
    Layout,
}

impl MergeKey {
    pub fn key(self, state: &UiState) -> String {
        match self {
            MergeKey::ScreenshotRef => state.screenshot_ref.clone(),
            MergeKey::Layout => {
                let boxes: Vec<[f64; 4]> = state.widgets.iter().map(|w| w.bbox.into()).collect();
                let text = serde_json::to_string(&boxes).expect("boxes serialize");
                hex::encode(&Sha256::digest(text.as_bytes())[..8])
            }
        }
    }
}

impl FromStr for MergeKey {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "screenshot" | "screenshot_ref" => Ok(MergeKey::ScreenshotRef),
            "layout" => Ok(MergeKey::Layout),
            other => Err(format!("unknown merge key `{other}` (expected screenshot or layout)")),
        }
    }
}

/// Collapses states with equal keys into the one with the smallest id and
/// rewrites every reference. Applying it to its own output changes nothing.
pub fn merge_states(ds: &Dataset, key: impl Fn(&UiState) -> String) -> Result<Dataset, TreeError> {
    let mut classes: BTreeMap<String, Vec<&UiState>> = BTreeMap::new();
    for s in &ds.states {
        classes.entry(key(s)).or_default().push(s);
    }
    let mut canon: HashMap<&str, &str> = HashMap::new();
    for (k, members) in &classes {
        let rep = members.iter().min_by(|a, b| a.state_id.cmp(&b.state_id)).expect("non-empty class");
        for m in members {
            if m.widgets != rep.widgets {
                return Err(TreeError::InconsistentMerge { key: k.clone(), a: rep.state_id.clone(), b: m.state_id.clone() });
            }
            canon.insert(&m.state_id, &rep.state_id);
        }
    }
    let map = |id: &str| canon.get(id).map_or_else(|| id.to_string(), |c| c.to_string());

    let mut out = ds.clone();
    out.states.retain(|s| canon.get(s.state_id.as_str()) == Some(&s.state_id.as_str()));
    for ep in &mut out.episodes {
        for step in &mut ep.steps {
            step.state_id = map(&step.state_id);
        }
    }
    out.instructions = out
        .instructions
        .into_iter()
        .map(|i| {
            let (state, next) = (map(i.state_id()), i.next_state_id().map(map));
            i.rebind(state, next)
        })
        .collect();
    out.canonicalize();
    Ok(out)
}

/// Edge id for the step `t` of an episode.
pub fn step_instruction_id(episode_id: &str, t: usize) -> String {
    format!("{episode_id}#{t}")
}

/// Builds the tree from episode transitions and from instructions that
/// record a successor state. Duplicate edges are kept once; edges are sorted.
pub fn build_trajectory_tree(ds: &Dataset, merge: Option<MergeKey>) -> Result<TrajectoryTree, TreeError> {
    let merged;
    let ds = match merge {
        Some(k) => {
            merged = merge_states(ds, |s| k.key(s))?;
            &merged
        }
        None => ds,
    };
    let nodes: BTreeSet<String> = ds.states.iter().map(|s| s.state_id.clone()).collect();
    let mut edges: BTreeMap<(String, String, String, String), TreeEdge> = BTreeMap::new();
    let mut add = |e: TreeEdge| {
        if nodes.contains(&e.from) && nodes.contains(&e.to) {
            edges.entry((e.from.clone(), e.instruction_id.clone(), serialize_action(&e.action), e.to.clone())).or_insert(e);
        }
    };
    for ep in &ds.episodes {
        for (t, pair) in ep.steps.windows(2).enumerate() {
            add(TreeEdge {
                from: pair[0].state_id.clone(),
                instruction_id: step_instruction_id(&ep.episode_id, t),
                action: pair[0].action.clone(),
                to: pair[1].state_id.clone(),
            });
        }
    }
    for ins in &ds.instructions {
        if let Some(next) = ins.next_state_id() {
            add(TreeEdge {
                from: ins.state_id().to_string(),
                instruction_id: ins.instruction_id().to_string(),
                action: ins.gold_action(),
                to: next.to_string(),
            });
        }
    }
    Ok(TrajectoryTree { nodes, edges: edges.into_values().collect() })
}
