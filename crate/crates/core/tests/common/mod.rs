#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use stateval_core::dataset::a11y::CanonicalAdapter;
use stateval_core::dataset::format::{Dataset, PredictionRecord};
use stateval_core::dataset::ingest::{ingest, parse_raw_episodes};
use stateval_core::{
    serialize_action, Action, ActionKind, BBox, Dimension, GoldTarget, Instruction, Point, ScrollDirection, StateGroup, UiState,
    Widget,
};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A fraction over u128 kept in lowest terms. Independent of the crate's
/// rational type so it can serve as an oracle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Frac {
    pub n: u128,
    pub d: u128,
}

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

impl Frac {
    pub fn new(n: u128, d: u128) -> Frac {
        assert!(d != 0);
        let g = gcd(n, d).max(1);
        Frac { n: n / g, d: d / g }
    }

    pub fn add(self, o: Frac) -> Frac {
        Frac::new(self.n * o.d + o.n * self.d, self.d * o.d)
    }

    pub fn div_int(self, k: u128) -> Frac {
        Frac::new(self.n, self.d * k)
    }

    /// Compares with a crate rational through its printed numerator and denominator.
    pub fn equals(self, r: &stateval_core::Rational) -> bool {
        r.numer().to_string() == self.n.to_string() && r.denom().to_string() == self.d.to_string()
    }
}

fn widget(index: u32, bbox: BBox) -> Widget {
    Widget { index, bbox, clickable: true, visible: true, text_label: Some(format!("Item {index}")) }
}

/// A screen of `n` stacked widgets occupying the left 60% of the width.
pub fn stacked_state(id: &str, n: u32) -> UiState {
    let h = 1.0 / f64::from(n);
    UiState {
        state_id: id.into(),
        screenshot_ref: format!("{id}.png"),
        widgets: (1..=n)
            .map(|i| widget(i, BBox::new(0.05, f64::from(i - 1) * h, 0.6, f64::from(i) * h).unwrap()))
            .collect(),
        raw_tree_ref: None,
        app_category: None,
        episode_id: None,
        step_index: None,
    }
}

/// One generated instruction with a prediction whose correctness is known
/// by construction.
pub struct Case {
    pub instruction: Instruction,
    pub raw: Option<String>,
    pub correct: bool,
}

const WORDS: [&str; 8] = ["alpha", "bravo", "charlie", "delta", "echo", "foxtrot", "golf", "hotel"];

fn other_direction(d: ScrollDirection) -> ScrollDirection {
    match d {
        ScrollDirection::Up => ScrollDirection::Down,
        ScrollDirection::Down => ScrollDirection::Left,
        ScrollDirection::Left => ScrollDirection::Right,
        ScrollDirection::Right => ScrollDirection::Up,
    }
}

fn pick<T: Copy>(r: &mut ChaCha8Rng, items: &[T]) -> T {
    items[r.random_range(0..items.len())]
}

/// Builds an instruction on `state` plus a prediction that is right or
/// wrong as `correct` says. Wrong answers vary: wrong type, wrong place,
/// wrong argument, unparseable or missing.
pub fn case(r: &mut ChaCha8Rng, state: &UiState, dim: Dimension, id: String, correct: bool) -> Case {
    let pointer = r.random_bool(0.6);
    let (gold, kind, right, wrong_same_kind): (GoldTarget, ActionKind, Action, Option<Action>) = if pointer {
        let kind = pick(r, &[ActionKind::Click, ActionKind::LongPress]);
        let w = &state.widgets[r.random_range(0..state.widgets.len())];
        let c = w.bbox.center();
        let right = Action::pointer(kind, c).unwrap();
        // everything with x > 0.8 is outside every box and more than 0.2 from every center
        let far = Action::pointer(kind, Point::new(r.random_range(0.81..1.0), c.y()).unwrap()).unwrap();
        let gold = match dim {
            Dimension::Mwam => GoldTarget::WidgetBox { bbox: w.bbox },
            Dimension::Uwiu => GoldTarget::ReferencePoint { point: c },
        };
        (gold, kind, right, Some(far))
    } else {
        let (action, wrong) = match r.random_range(0..6) {
            0 => {
                let d = pick(r, &ScrollDirection::ALL);
                (Action::Scroll { direction: d }, Some(Action::Scroll { direction: other_direction(d) }))
            }
            1 => {
                let a = r.random_range(0..4);
                let text = format!("{} {}", WORDS[a], WORDS[a + 1]);
                let wrong = format!("{} {}", WORDS[a + 3], WORDS[(a + 4) % 8]);
                (Action::TypeText { text }, Some(Action::TypeText { text: wrong }))
            }
            2 => (Action::OpenApp { app_name: "Clock".into() }, Some(Action::OpenApp { app_name: "Maps".into() })),
            3 => (Action::NavigateBack, None),
            4 => (Action::NavigateHome, None),
            _ => (Action::Wait, None),
        };
        (GoldTarget::ExactAction { action: action.clone() }, action.kind(), action, wrong)
    };
    let instruction = Instruction::new(id, "do the thing", state.state_id.clone(), dim, gold, kind).unwrap();
    let raw = if correct {
        Some(if r.random_bool(0.5) { serialize_action(&right) } else { format!("Sure. Action: {} done", serialize_action(&right)) })
    } else {
        match r.random_range(0..4) {
            0 => wrong_same_kind.map(|a| serialize_action(&a)).or_else(|| Some(serialize_action(&flip_type(&right)))),
            1 => Some(serialize_action(&flip_type(&right))),
            2 => Some("I am not sure what to do here.".into()),
            _ => None,
        }
    };
    Case { instruction, raw, correct }
}

fn flip_type(a: &Action) -> Action {
    match a {
        Action::Wait => Action::NavigateHome,
        _ => Action::Wait,
    }
}

pub struct EvalSet {
    pub groups: Vec<StateGroup>,
    pub records: Vec<PredictionRecord>,
    /// Correctness bits per state, in group order.
    pub truth: Vec<Vec<bool>>,
}

/// A random evaluation set: up to `max_states` states with 1..=`max_m`
/// instructions each, for one dimension.
pub fn eval_set(seed: u64, dim: Dimension, max_states: usize, max_m: usize) -> EvalSet {
    let mut r = rng(seed);
    let n_states = r.random_range(1..=max_states);
    let mut out = EvalSet { groups: vec![], records: vec![], truth: vec![] };
    for s in 0..n_states {
        let state = stacked_state(&format!("st{s:03}"), r.random_range(1..=8));
        let m = r.random_range(1..=max_m);
        let p = r.random::<f64>();
        let mut instructions = vec![];
        let mut bits = vec![];
        for k in 0..m {
            let correct = r.random_bool(p);
            let c = case(&mut r, &state, dim, format!("st{s:03}-{k}"), correct);
            out.records.push(PredictionRecord {
                instruction_id: c.instruction.instruction_id().to_string(),
                agent_id: "synthetic".into(),
                raw: c.raw,
                error: None,
            });
            bits.push(c.correct);
            instructions.push(c.instruction);
        }
        out.truth.push(bits);
        out.groups.push(StateGroup { state, dimension: dim, instructions });
    }
    out
}

fn node(bounds: [u32; 4], text: &str) -> serde_json::Value {
    json!({"bounds": bounds, "clickable": true, "text": text})
}

/// Raw episodes over a small app: every episode starts on the shared home
/// screen, and screens are identified by their screenshot.
pub fn synthetic_episodes(seed: u64, n_episodes: usize) -> String {
    let mut r = rng(seed);
    let screens: Vec<(String, serde_json::Value)> = (0..6)
        .map(|s| {
            let n = 2 + s % 3;
            let kids: Vec<_> = (0..n)
                .map(|i| node([40, 200 + 300 * i as u32, 1040, 450 + 300 * i as u32], &format!("Screen {s} item {i}")))
                .collect();
            let tree = json!({"screen": {"width": 1080, "height": 2400},
                "root": {"bounds": [0, 0, 1080, 2400], "clickable": false, "children": kids}});
            (format!("screens/{s}.png"), tree)
        })
        .collect();
    let goals = ["buy running shoes", "check the weather", "send a message to alice", "turn on wifi"];
    let mut lines = String::new();
    for e in 0..n_episodes {
        let len = r.random_range(2..=4);
        let mut steps = vec![];
        for t in 0..len {
            let s = if t == 0 { 0 } else { r.random_range(1..screens.len()) };
            let action = if t + 1 == len {
                json!({"action_type": "status", "goal_status": "successful"})
            } else if r.random_bool(0.7) {
                json!({"action_type": "click", "ui": 1 + r.random_range(0..2)})
            } else {
                json!({"action_type": "scroll", "direction": pick(&mut r, &["up", "down"])})
            };
            steps.push(json!({"screenshot_ref": screens[s].0, "accessibility_tree": screens[s].1, "action": action}));
        }
        let ep = json!({"episode_id": format!("ep{e}"), "goal": goals[e % goals.len()], "steps": steps});
        lines.push_str(&ep.to_string());
        lines.push('\n');
    }
    lines
}

pub fn synthetic_dataset(seed: u64, n_episodes: usize) -> Dataset {
    ingest(&parse_raw_episodes(&synthetic_episodes(seed, n_episodes)).unwrap(), &CanonicalAdapter).unwrap()
}
