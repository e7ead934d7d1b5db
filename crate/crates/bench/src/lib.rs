//! Deterministic inputs for the benchmarks in `benches/`.

use stateval_core::dataset::format::PredictionRecord;
use stateval_core::{
    serialize_action, Action, ActionKind, BBox, Dimension, GoldTarget, Instruction, Point, ScrollDirection, StateGroup, UiState,
    Widget,
};

/// `states` screens with `m` instructions each and one prediction per
/// instruction, roughly two thirds of them correct.
pub fn workload(states: usize, m: usize, dim: Dimension) -> (Vec<StateGroup>, Vec<PredictionRecord>) {
    let mut groups = Vec::with_capacity(states);
    let mut records = Vec::with_capacity(states * m);
    for s in 0..states {
        let id = format!("s{s}");
        let widgets: Vec<Widget> = (0..4u32)
            .map(|i| {
                let y = f64::from(i) * 0.25;
                Widget { index: i + 1, bbox: BBox::new(0.1, y, 0.9, y + 0.2).unwrap(), clickable: true, visible: true, text_label: None }
            })
            .collect();
        let mut instructions = Vec::with_capacity(m);
        for k in 0..m {
            let iid = format!("{id}-{k}");
            let w = &widgets[(s + k) % widgets.len()];
            let (gold, kind, answer) = match k % 3 {
                0 | 1 => {
                    let c = w.bbox.center();
                    let gold = match dim {
                        Dimension::Mwam => GoldTarget::WidgetBox { bbox: w.bbox },
                        Dimension::Uwiu => GoldTarget::ReferencePoint { point: c },
                    };
                    let x = if (s + k) % 3 == 0 { 0.97 } else { c.x() };
                    (gold, ActionKind::Click, Action::Click { target: Point::new(x, c.y()).unwrap() })
                }
                _ => {
                    let gold = Action::Scroll { direction: ScrollDirection::Down };
                    let answer = Action::Scroll { direction: if s % 4 == 0 { ScrollDirection::Up } else { ScrollDirection::Down } };
                    (GoldTarget::ExactAction { action: gold }, ActionKind::Scroll, answer)
                }
            };
            records.push(PredictionRecord {
                instruction_id: iid.clone(),
                agent_id: "bench".into(),
                raw: Some(serialize_action(&answer)),
                error: None,
            });
            instructions.push(Instruction::new(iid, "go", id.clone(), dim, gold, kind).unwrap());
        }
        let state = UiState {
            state_id: id,
            screenshot_ref: format!("s{s}.png"),
            widgets,
            raw_tree_ref: None,
            app_category: None,
            episode_id: None,
            step_index: None,
        };
        groups.push(StateGroup { state, dimension: dim, instructions });
    }
    (groups, records)
}

/// Agent outputs of the usual shapes: bare records, records wrapped in
/// prose, single-quoted records and outright junk.
pub fn raw_outputs() -> Vec<String> {
    vec![
        r#"{"action_type":"click","x":0.25,"y":0.5}"#.into(),
        r#"Thought: open settings first. Action: {"action_type": "click", "ui": "2"}"#.into(),
        "{'action_type': 'scroll', 'direction': 'down'}".into(),
        r#"{"action_type":"type","text":"running shoes size 42"}"#.into(),
        "I would probably tap the blue button near the top.".into(),
    ]
}
