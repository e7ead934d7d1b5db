//! Accessibility trees and widget annotation.
//!
//! The canonical tree is nested nodes with pixel bounds `[left, top, right,
//! bottom]` plus the screen size. Other dumps are converted through a
//! [`TreeAdapter`]; [`FlatNodeListAdapter`] covers the common flat
//! pre-order node list.

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::model::{BBox, UiState, Widget};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum A11yError {
    #[error("malformed accessibility tree: {0}")]
    MalformedTree(String),
    #[error("no clickable and visible widgets with non-zero area")]
    NoInteractableWidgets,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Screen {
    pub width: u32,
    pub height: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct A11yNode {
    /// Pixel bounds `[left, top, right, bottom]`.
    pub bounds: [f64; 4],
    #[serde(default)]
    pub clickable: bool,
    #[serde(default = "default_true")]
    pub visible: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub content_description: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub children: Vec<A11yNode>,
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccessibilityTree {
    pub screen: Screen,
    pub root: A11yNode,
}

impl AccessibilityTree {
    /// Nodes in document (pre-)order.
    pub fn preorder(&self) -> Vec<&A11yNode> {
        let mut out = Vec::new();
        let mut stack = vec![&self.root];
        while let Some(node) = stack.pop() {
            out.push(node);
            stack.extend(node.children.iter().rev());
        }
        out
    }
}

/// Converts a source-specific tree dump into the canonical tree.
pub trait TreeAdapter: Send + Sync {
    fn name(&self) -> &'static str;
    fn to_canonical(&self, raw: &Value) -> Result<AccessibilityTree, A11yError>;
}

pub struct CanonicalAdapter;

impl TreeAdapter for CanonicalAdapter {
    fn name(&self) -> &'static str {
        "canonical"
    }

    fn to_canonical(&self, raw: &Value) -> Result<AccessibilityTree, A11yError> {
        serde_json::from_value(raw.clone()).map_err(|e| A11yError::MalformedTree(e.to_string()))
    }
}

/// Flat pre-order node lists as dumped by Android accessibility services:
///
/// ```json
/// {"screen": {"width": 1080, "height": 2400},
///  "nodes": [{"bounds_in_screen": {"left": 0, "top": 0, "right": 1080, "bottom": 2400},
///             "is_clickable": false, "is_visible_to_user": true, "text": null,
///             "content_description": null}]}
/// ```
///
/// Hierarchy is irrelevant for annotation, so the nodes become children of a
/// synthetic full-screen root.
pub struct FlatNodeListAdapter;

#[derive(Deserialize)]
struct FlatDump {
    screen: Screen,
    nodes: Vec<FlatNode>,
}

#[derive(Deserialize)]
struct FlatNode {
    bounds_in_screen: FlatBounds,
    #[serde(default)]
    is_clickable: bool,
    #[serde(default = "default_true")]
    is_visible_to_user: bool,
    #[serde(default)]
    text: Option<String>,
    #[serde(default)]
    content_description: Option<String>,
}

#[derive(Deserialize)]
struct FlatBounds {
    left: f64,
    top: f64,
    right: f64,
    bottom: f64,
}

impl TreeAdapter for FlatNodeListAdapter {
    fn name(&self) -> &'static str {
        "flat"
    }

    fn to_canonical(&self, raw: &Value) -> Result<AccessibilityTree, A11yError> {
        let dump: FlatDump = serde_json::from_value(raw.clone()).map_err(|e| A11yError::MalformedTree(e.to_string()))?;
        let children = dump
            .nodes
            .into_iter()
            .map(|n| A11yNode {
                bounds: [n.bounds_in_screen.left, n.bounds_in_screen.top, n.bounds_in_screen.right, n.bounds_in_screen.bottom],
                clickable: n.is_clickable,
                visible: n.is_visible_to_user,
                text: n.text,
                content_description: n.content_description,
                children: Vec::new(),
            })
            .collect();
        let (w, h) = (f64::from(dump.screen.width), f64::from(dump.screen.height));
        Ok(AccessibilityTree {
            screen: dump.screen,
            root: A11yNode {
                bounds: [0.0, 0.0, w, h],
                clickable: false,
                visible: true,
                text: None,
                content_description: None,
                children,
            },
        })
    }
}

pub fn adapter_by_name(name: &str) -> Option<&'static dyn TreeAdapter> {
    match name {
        "canonical" => Some(&CanonicalAdapter),
        "flat" => Some(&FlatNodeListAdapter),
        _ => None,
    }
}

fn label(node: &A11yNode) -> Option<String> {
    [&node.text, &node.content_description]
        .into_iter()
        .flatten()
        .map(|s| s.trim())
        .find(|s| !s.is_empty())
        .map(str::to_string)
}

/// Numbers the clickable and visible nodes 1..n in document order.
///
/// Bounds are clamped to the screen and normalized per axis. Nodes whose
/// clamped box has zero area are dropped with a warning and do not consume
/// an index.
pub fn annotate_state(tree: &AccessibilityTree, state_id: &str, screenshot_ref: &str) -> Result<UiState, A11yError> {
    let Screen { width, height } = tree.screen;
    if width == 0 || height == 0 {
        return Err(A11yError::MalformedTree(format!("screen size {width}x{height}")));
    }
    let (w, h) = (f64::from(width), f64::from(height));
    let mut widgets = Vec::new();
    for node in tree.preorder() {
        if !(node.clickable && node.visible) {
            continue;
        }
        let [l, t, r, b] = node.bounds;
        if ![l, t, r, b].iter().all(|v| v.is_finite()) {
            return Err(A11yError::MalformedTree(format!("non-finite bounds {:?}", node.bounds)));
        }
        let (l, r) = (l.clamp(0.0, w), r.clamp(0.0, w));
        let (t, b) = (t.clamp(0.0, h), b.clamp(0.0, h));
        if r <= l || b <= t {
            log::warn!("state {state_id}: dropping widget with degenerate bounds {:?}", node.bounds);
            continue;
        }
        let bbox = BBox::new(l / w, t / h, r / w, b / h).map_err(|e| A11yError::MalformedTree(e.to_string()))?;
        widgets.push(Widget {
            index: widgets.len() as u32 + 1,
            bbox,
            clickable: true,
            visible: true,
            text_label: label(node),
        });
    }
    if widgets.is_empty() {
        return Err(A11yError::NoInteractableWidgets);
    }
    Ok(UiState {
        state_id: state_id.to_string(),
        screenshot_ref: screenshot_ref.to_string(),
        widgets,
        raw_tree_ref: None,
        app_category: None,
        episode_id: None,
        step_index: None,
    })
}
