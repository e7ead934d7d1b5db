//! Human- and machine-readable renderings of evaluation summaries.
//!
//! Everything here is a pure function of the summaries passed in: no metric
//! is recomputed, and rendering the same input twice gives identical bytes.
//! Percentages use two decimals and per-state EM six, rounded half-even.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::analysis::challenging_states;
use crate::grammar::serialize_action;
use crate::metrics::EvaluationSummary;
use crate::model::Stage;

pub const REPORT_FORMAT_VERSION: u32 = 1;

pub const TABLE_COLUMNS: [&str; 6] = ["LS", "IS", "PS", "ES", "EM", "SR"];

/// The six table cells in column order: stage percentages, then EM and SR
/// as percentages.
pub fn table_cells(summary: &EvaluationSummary) -> Vec<String> {
    let mut cells: Vec<String> = Stage::ALL.iter().map(|s| summary.stage_fraction(*s).to_percent(2)).collect();
    cells.push(summary.em_all.to_percent(2));
    cells.push(summary.sr.to_percent(2));
    cells
}

/// The four stage percentages separated by single spaces.
pub fn stage_row(summary: &EvaluationSummary) -> String {
    table_cells(summary)[..4].join(" ")
}

fn label(summary: &EvaluationSummary) -> String {
    match &summary.agent_id {
        Some(a) => format!("{a} / {}", summary.dimension),
        None => summary.dimension.to_string(),
    }
}

fn md_row(out: &mut String, cells: impl IntoIterator<Item = String>) {
    out.push('|');
    for c in cells {
        let _ = write!(out, " {} |", c.replace('|', "\\|"));
    }
    out.push('\n');
}

fn md_header(out: &mut String, cols: &[&str]) {
    md_row(out, cols.iter().map(|c| c.to_string()));
    md_row(out, cols.iter().map(|_| "---".to_string()));
}

/// The stage-distribution table: one row per summary.
pub fn render_tables(summaries: &[EvaluationSummary]) -> String {
    let mut out = String::new();
    let mut cols = vec!["run"];
    cols.extend(TABLE_COLUMNS);
    cols.extend(["states", "instructions"]);
    md_header(&mut out, &cols);
    for s in summaries {
        let mut cells = vec![label(s)];
        cells.extend(table_cells(s));
        cells.extend([s.n_states.to_string(), s.n_instructions.to_string()]);
        md_row(&mut out, cells);
    }
    out
}

/// Stage distribution per task category for one summary.
pub fn render_task_table(summary: &EvaluationSummary) -> String {
    let mut out = String::new();
    let mut cols = vec!["task"];
    cols.extend(TABLE_COLUMNS);
    cols.push("states");
    md_header(&mut out, &cols);
    for (task, sub) in &summary.per_task {
        let mut cells = vec![task.clone()];
        cells.extend(table_cells(sub));
        cells.push(sub.n_states.to_string());
        md_row(&mut out, cells);
    }
    out
}

pub fn render_challenging(summary: &EvaluationSummary, k: usize) -> String {
    let mut out = String::new();
    md_header(&mut out, &["state", "EM", "m", "stage", "task", "cohesion", "diagnosis", "modal error"]);
    for c in challenging_states(&summary.state_results, k) {
        let (cohesion, diagnosis, modal) = match &c.cohesion {
            Some(r) => (
                format!("{:.4}", r.cohesion),
                serde_json::to_value(r.diagnosis).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default(),
                r.modal_action.as_ref().map(serialize_action).unwrap_or_default(),
            ),
            None => Default::default(),
        };
        md_row(
            &mut out,
            [
                c.state_id,
                c.em_state.to_fixed(6),
                c.m.to_string(),
                c.stage.abbrev().to_string(),
                c.app_category.unwrap_or_default(),
                cohesion,
                diagnosis,
                modal,
            ],
        );
    }
    out
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn csv_line(out: &mut String, fields: &[String]) {
    let line: Vec<String> = fields.iter().map(|f| csv_field(f)).collect();
    out.push_str(&line.join(","));
    out.push('\n');
}

fn agent(summary: &EvaluationSummary) -> String {
    summary.agent_id.clone().unwrap_or_default()
}

pub fn per_state_csv(summaries: &[EvaluationSummary]) -> String {
    let mut out = String::from("agent_id,dimension,state_id,task,m,correct,em_state,stage,cohesion,diagnosis\n");
    for s in summaries {
        for r in &s.state_results {
            let (cohesion, diagnosis) = match &r.cohesion {
                Some(c) => (
                    format!("{:.6}", c.cohesion),
                    serde_json::to_value(c.diagnosis).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default(),
                ),
                None => Default::default(),
            };
            csv_line(
                &mut out,
                &[
                    agent(s),
                    r.dimension.as_str().to_string(),
                    r.state_id.clone(),
                    r.app_category.clone().unwrap_or_default(),
                    r.m().to_string(),
                    r.n_correct().to_string(),
                    r.em_state.to_fixed(6),
                    r.stage.abbrev().to_string(),
                    cohesion,
                    diagnosis,
                ],
            );
        }
    }
    out
}

pub fn histogram_csv(summaries: &[EvaluationSummary]) -> String {
    let mut out = String::from("agent_id,dimension,lower,upper,count\n");
    for s in summaries {
        for b in &s.histogram {
            csv_line(
                &mut out,
                &[agent(s), s.dimension.as_str().to_string(), b.lower.to_fixed(2), b.upper.to_fixed(2), b.count.to_string()],
            );
        }
    }
    out
}

pub fn render_markdown(summaries: &[EvaluationSummary], challenging_k: usize) -> String {
    let mut out = format!("# Evaluation report\n\nreport format {REPORT_FORMAT_VERSION}\n\n## Stage distribution (% of states)\n\n");
    out.push_str(&render_tables(summaries));
    for s in summaries {
        let _ = write!(out, "\n## {}\n\n", label(s));
        let b = &s.bimodality;
        let _ = writeln!(
            out,
            "EM extremes: {}% of states below the low cut, {}% above the high cut, {}% in between.",
            b.frac_low.to_percent(2),
            b.frac_high.to_percent(2),
            b.frac_mid.to_percent(2)
        );
        if !s.excluded_states.is_empty() {
            let _ = writeln!(out, "\nExcluded (no instructions): {}", s.excluded_states.join(", "));
        }
        if !s.per_task.is_empty() {
            out.push_str("\n### By task\n\n");
            out.push_str(&render_task_table(s));
        }
        if challenging_k > 0 {
            let _ = write!(out, "\n### Challenging states (lowest {challenging_k})\n\n");
            out.push_str(&render_challenging(s, challenging_k));
        }
    }
    out
}

/// All report files derived from a set of summaries, by file name.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReportBundle {
    pub files: BTreeMap<String, String>,
}

impl ReportBundle {
    pub fn new(summaries: &[EvaluationSummary], challenging_k: usize) -> Self {
        let mut files = BTreeMap::new();
        let json = match summaries {
            [one] => serde_json::to_string_pretty(one),
            many => serde_json::to_string_pretty(many),
        }
        .expect("summaries serialize");
        files.insert("summary.json".to_string(), json + "\n");
        files.insert("report.md".to_string(), render_markdown(summaries, challenging_k));
        files.insert("per_state.csv".to_string(), per_state_csv(summaries));
        files.insert("histogram.csv".to_string(), histogram_csv(summaries));
        ReportBundle { files }
    }

    pub fn write(&self, dir: &Path) -> std::io::Result<()> {
        fs::create_dir_all(dir)?;
        for (name, body) in &self.files {
            fs::write(dir.join(name), body)?;
        }
        Ok(())
    }
}

/// Reads a `summary.json` written by [`ReportBundle`]: one summary or a list.
pub fn parse_summaries(text: &str) -> Result<Vec<EvaluationSummary>, serde_json::Error> {
    match serde_json::from_str::<EvaluationSummary>(text) {
        Ok(one) => Ok(vec![one]),
        Err(_) => serde_json::from_str(text),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{summarize, EvalConfig};
    use crate::model::{Dimension, StateResult, Verdict, VerdictReason};
    use crate::rational::Rational;

    fn result(id: &str, correct: usize, m: usize, task: &str) -> StateResult {
        let verdicts: Vec<Verdict> = (0..m)
            .map(|i| Verdict::new(format!("{id}-{i}"), if i < correct { VerdictReason::Matched } else { VerdictReason::WrongType }))
            .collect();
        let em = Rational::ratio(correct, m);
        let stage = crate::metrics::classify_stage(&em, &Default::default()).unwrap();
        StateResult {
            state_id: id.into(),
            dimension: Dimension::Mwam,
            verdicts,
            em_state: em,
            stage,
            app_category: Some(task.into()),
            cohesion: None,
        }
    }

    fn summary() -> EvaluationSummary {
        let cfg = EvalConfig::default();
        let results = vec![result("a", 1, 1, "Shopping"), result("b", 0, 9, "Shopping"), result("c", 2, 3, "Travel")];
        let mut s = summarize(Dimension::Mwam, results.clone(), &cfg).unwrap();
        s.per_task.insert("Shopping".into(), summarize(Dimension::Mwam, results[..2].to_vec(), &cfg).unwrap());
        s
    }

    #[test]
    fn stage_row_all_expert() {
        let cfg = EvalConfig::default();
        let s = summarize(Dimension::Uwiu, vec![result("a", 1, 1, "x")], &cfg).unwrap();
        assert_eq!(stage_row(&s), "0.00 0.00 0.00 100.00");
        assert_eq!(table_cells(&s)[4..], ["100.00".to_string(), "100.00".to_string()]);
    }

    #[test]
    fn markdown_shape() {
        let s = summary();
        let text = render_tables(std::slice::from_ref(&s));
        assert_eq!(
            text,
            "| run | LS | IS | PS | ES | EM | SR | states | instructions |\n\
             | --- | --- | --- | --- | --- | --- | --- | --- | --- |\n\
             | MWAM | 33.33 | 0.00 | 33.33 | 33.33 | 55.56 | 23.08 | 3 | 13 |\n"
        );
        let md = render_markdown(std::slice::from_ref(&s), 2);
        assert!(md.contains("| b | 0.000000 | 9 | LS |"));
        assert!(md.contains("| Shopping | 50.00 | 0.00 | 0.00 | 50.00 |"));
    }

    #[test]
    fn csv_and_round_trip() {
        let s = summary();
        let csv = per_state_csv(std::slice::from_ref(&s));
        assert_eq!(csv.lines().nth(3), Some(",mwam,c,Travel,3,2,0.666667,PS,,"));
        let bundle = ReportBundle::new(std::slice::from_ref(&s), 5);
        let back = parse_summaries(&bundle.files["summary.json"]).unwrap();
        assert_eq!(back, vec![s]);
        assert_eq!(ReportBundle::new(&back, 5), bundle);
        assert_eq!(csv_field("a,\"b\""), "\"a,\"\"b\"\"\"");
    }
}
