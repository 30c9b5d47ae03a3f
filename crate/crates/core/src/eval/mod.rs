//! Answer verification, world-model fidelity and stratified reports.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cot::dataset::{load_manifest, read_records, Record};
use crate::cot::{build_cot, decode, CotError, RasterImage, StateView, WmFormat};
use crate::envs::{Answer, CountMode, TaskInstance, World};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("unknown instance ids: {}", .0.join(", "))]
    UnknownIds(Vec<String>),
    #[error("line {line}: {message}")]
    Schema { line: usize, message: String },
    #[error(transparent)]
    Cot(#[from] CotError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, EvalError>;

/// One intermediate state offered by a model: a verbal matrix or a path to
/// an image it rendered.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Intermediate {
    pub step: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Prediction {
    pub instance_id: String,
    pub raw_text: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub intermediate: Vec<Intermediate>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FidelityMode {
    Exact,
    ShapeOnly,
}

/// The text after the last `answer:` line, or `None` without one.
fn answer_line(text: &str) -> Option<&str> {
    text.lines().rev().find_map(|l| {
        let lower = l.to_ascii_lowercase();
        lower.find("answer:").map(|i| l[i + "answer:".len()..].trim())
    })
}

fn integers(s: &str) -> Vec<i64> {
    let mut out = Vec::new();
    let b = s.as_bytes();
    let mut i = 0;
    while i < b.len() {
        if b[i].is_ascii_digit() {
            let neg = i > 0 && b[i - 1] == b'-' && (i < 2 || !b[i - 2].is_ascii_alphanumeric());
            let start = i;
            while i < b.len() && b[i].is_ascii_digit() {
                i += 1;
            }
            if let Ok(v) = s[start..i].parse::<i64>() {
                out.push(if neg { -v } else { v });
            }
        } else {
            i += 1;
        }
    }
    out
}

/// Standalone letters, e.g. `B`, `(b)`, `C.`, upper-cased.
fn letters(s: &str) -> Vec<String> {
    s.split(|c: char| !c.is_ascii_alphanumeric())
        .filter(|t| t.len() == 1 && t.chars().all(|c| c.is_ascii_alphabetic()))
        .map(|t| t.to_ascii_uppercase())
        .collect()
}

/// Extracts an answer of the same kind as `expected` from a model output.
/// A terminal `answer:` line is preferred; otherwise the last integer (or
/// letter) anywhere in the text is used.
pub fn extract_answer(raw: &str, expected: &Answer, mode: Option<CountMode>) -> Option<Answer> {
    let line = answer_line(raw);
    match expected {
        Answer::Integer(_) => match line {
            Some(l) => integers(l).first().copied(),
            None => integers(raw).last().copied(),
        }
        .map(Answer::Integer),
        Answer::Choice(_) => match line {
            Some(l) => letters(l).into_iter().next(),
            None => letters(raw).pop(),
        }
        .map(Answer::Choice),
        Answer::IntegerSet(_) => match mode.unwrap_or(CountMode::Possible) {
            CountMode::Possible => match line {
                Some(l) => integers(l).first().copied(),
                None => integers(raw).last().copied(),
            }
            .map(|v| Answer::IntegerSet(BTreeSet::from([v]))),
            CountMode::AllPossible => {
                let vals = integers(line?);
                (!vals.is_empty()).then(|| Answer::IntegerSet(vals.into_iter().collect()))
            }
        },
    }
}

fn count_mode(world: &World) -> Option<CountMode> {
    match world {
        World::Cube3View(p) => Some(p.mode),
        _ => None,
    }
}

/// Whether an extracted answer is correct for `rec`; parse failures are
/// simply wrong.
pub fn answer_correct(rec: &Record, extracted: Option<&Answer>) -> bool {
    let Some(got) = extracted else { return false };
    match (&rec.answer, got) {
        (Answer::Integer(a), Answer::Integer(b)) => a == b,
        (Answer::Choice(a), Answer::Choice(b)) => a.eq_ignore_ascii_case(b),
        (Answer::IntegerSet(truth), Answer::IntegerSet(p)) => match count_mode(&rec.world).unwrap_or(CountMode::Possible) {
            CountMode::Possible => p.len() == 1 && p.iter().all(|v| truth.contains(v)),
            CountMode::AllPossible => truth == p,
        },
        _ => false,
    }
}

pub fn verify_answer(rec: &Record, pred: &Prediction) -> Result<bool> {
    if rec.id != pred.instance_id {
        return Err(EvalError::Domain(format!(
            "prediction for '{}' checked against instance '{}'",
            pred.instance_id, rec.id
        )));
    }
    let extracted = extract_answer(&pred.raw_text, &rec.answer, count_mode(&rec.world));
    Ok(answer_correct(rec, extracted.as_ref()))
}

fn tokens(row: &str) -> Vec<String> {
    if row.chars().any(char::is_whitespace) {
        row.split_whitespace().map(str::to_string).collect()
    } else {
        row.chars().map(|c| c.to_string()).collect()
    }
}

fn occupied(tok: &str) -> bool {
    tok != "." && tok != "0"
}

/// Compares two state matrices. Exact: same tokens everywhere. Shape only:
/// same dimensions and the same occupied cells, whatever their colors.
pub fn score_fidelity(predicted: &[String], truth: &[String], mode: FidelityMode) -> bool {
    if predicted.len() != truth.len() {
        return false;
    }
    predicted.iter().zip(truth).all(|(p, t)| {
        let (p, t) = (tokens(p), tokens(t));
        p.len() == t.len()
            && match mode {
                FidelityMode::Exact => p == t,
                FidelityMode::ShapeOnly => p.iter().zip(&t).all(|(a, b)| occupied(a) == occupied(b)),
            }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepScore {
    pub step: usize,
    pub exact: bool,
    pub shape_only: bool,
    /// The offered image could not be decoded (or the step does not exist).
    pub undecodable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FidelityScore {
    pub per_step: Vec<StepScore>,
    pub exact: f64,
    pub shape_only: f64,
}

impl FidelityScore {
    pub fn from_steps(per_step: Vec<StepScore>) -> Option<Self> {
        if per_step.is_empty() {
            return None;
        }
        let n = per_step.len() as f64;
        Some(FidelityScore {
            exact: per_step.iter().filter(|s| s.exact).count() as f64 / n,
            shape_only: per_step.iter().filter(|s| s.shape_only).count() as f64 / n,
            per_step,
        })
    }
}

pub fn instance_of(rec: &Record) -> TaskInstance {
    TaskInstance {
        id: rec.id.clone(),
        task: rec.task,
        split: rec.split,
        params: rec.params.clone(),
        question: rec.question.clone(),
        answer: rec.answer.clone(),
        seed: rec.seed,
        input_images: vec![],
        world: rec.world.clone(),
    }
}

/// Ground-truth intermediate states: the states a visual trace shows, in
/// order.
pub fn ground_truth_states(rec: &Record) -> Result<Vec<StateView>> {
    Ok(build_cot(&instance_of(rec), WmFormat::Visual)?.images)
}

/// `<matrix>` blocks in order of appearance.
pub fn matrices_in(text: &str) -> Vec<Vec<String>> {
    let mut out = Vec::new();
    let mut cur: Option<Vec<String>> = None;
    for line in text.lines() {
        let t = line.trim();
        if t == "<matrix>" {
            cur = Some(Vec::new());
        } else if t == "</matrix>" {
            out.extend(cur.take());
        } else if let Some(rows) = cur.as_mut() {
            rows.push(t.to_string());
        }
    }
    out
}

/// Fidelity of the intermediate states of one prediction. Without explicit
/// intermediates, `<matrix>` blocks in the output are taken as steps 0, 1, ...
pub fn prediction_fidelity(rec: &Record, pred: &Prediction, root: &Path) -> Result<Option<FidelityScore>> {
    let offered: Vec<Intermediate> = if pred.intermediate.is_empty() {
        matrices_in(&pred.raw_text)
            .into_iter()
            .enumerate()
            .map(|(step, m)| Intermediate {
                step,
                matrix: Some(m),
                image: None,
            })
            .collect()
    } else {
        pred.intermediate.clone()
    };
    if offered.is_empty() {
        return Ok(None);
    }
    let truth = ground_truth_states(rec)?;
    let steps = offered
        .iter()
        .map(|im| {
            let miss = StepScore {
                step: im.step,
                exact: false,
                shape_only: false,
                undecodable: true,
            };
            let Some(t) = truth.get(im.step) else { return miss };
            let predicted = match (&im.matrix, &im.image) {
                (Some(m), None) => m.clone(),
                (None, Some(path)) => {
                    let p = root.join(path);
                    let decoded = fs::read(&p)
                        .map_err(CotError::from)
                        .and_then(|b| RasterImage::from_png(&b))
                        .and_then(|img| decode(&img));
                    match decoded {
                        Ok(s) if s.task() == t.task() => s.to_matrix(),
                        _ => return miss,
                    }
                }
                _ => return miss,
            };
            let gt = t.to_matrix();
            StepScore {
                step: im.step,
                exact: score_fidelity(&predicted, &gt, FidelityMode::Exact),
                shape_only: score_fidelity(&predicted, &gt, FidelityMode::ShapeOnly),
                undecodable: false,
            }
        })
        .collect();
    Ok(FidelityScore::from_steps(steps))
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Bucket {
    pub count: usize,
    pub correct: usize,
    pub accuracy: Option<f64>,
}

impl Bucket {
    fn add(&mut self, ok: bool) {
        self.count += 1;
        self.correct += ok as usize;
        self.accuracy = Some(self.correct as f64 / self.count as f64);
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FidelitySummary {
    pub steps: usize,
    pub exact: Option<f64>,
    pub shape_only: Option<f64>,
    pub undecodable: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub overall: Bucket,
    pub parse_failures: usize,
    pub parse_failure_rate: Option<f64>,
    pub per_task: BTreeMap<String, Bucket>,
    /// Keyed by `<task>/<stratum>`.
    pub per_stratum: BTreeMap<String, Bucket>,
    pub fidelity: FidelitySummary,
}

struct Scored {
    task: String,
    stratum: String,
    correct: bool,
    parsed: bool,
    fidelity: Option<FidelityScore>,
}

/// Scores `predictions` against `records` (any format; ids are shared
/// across formats).
pub fn build_report(records: &[Record], predictions: &[Prediction], root: &Path) -> Result<EvalReport> {
    let by_id: HashMap<&str, &Record> = records.iter().map(|r| (r.id.as_str(), r)).collect();
    let mut unknown: Vec<String> = predictions
        .iter()
        .filter(|p| !by_id.contains_key(p.instance_id.as_str()))
        .map(|p| p.instance_id.clone())
        .collect();
    if !unknown.is_empty() {
        unknown.sort();
        unknown.dedup();
        return Err(EvalError::UnknownIds(unknown));
    }
    let scored: Vec<Scored> = predictions
        .par_iter()
        .map(|p| {
            let rec = by_id[p.instance_id.as_str()];
            let extracted = extract_answer(&p.raw_text, &rec.answer, count_mode(&rec.world));
            Ok(Scored {
                task: rec.task.to_string(),
                stratum: rec.params.stratum(),
                correct: answer_correct(rec, extracted.as_ref()),
                parsed: extracted.is_some(),
                fidelity: prediction_fidelity(rec, p, root)?,
            })
        })
        .collect::<Result<_>>()?;
    let mut r = EvalReport::default();
    let (mut exact, mut shape) = (0usize, 0usize);
    for s in &scored {
        r.overall.add(s.correct);
        r.per_task.entry(s.task.clone()).or_default().add(s.correct);
        r.per_stratum.entry(format!("{}/{}", s.task, s.stratum)).or_default().add(s.correct);
        r.parse_failures += !s.parsed as usize;
        for st in s.fidelity.iter().flat_map(|f| &f.per_step) {
            r.fidelity.steps += 1;
            exact += st.exact as usize;
            shape += st.shape_only as usize;
            r.fidelity.undecodable += st.undecodable as usize;
        }
    }
    if r.overall.count > 0 {
        r.parse_failure_rate = Some(r.parse_failures as f64 / r.overall.count as f64);
    }
    if r.fidelity.steps > 0 {
        r.fidelity.exact = Some(exact as f64 / r.fidelity.steps as f64);
        r.fidelity.shape_only = Some(shape as f64 / r.fidelity.steps as f64);
    }
    Ok(r)
}

fn fmt_acc(a: Option<f64>) -> String {
    a.map_or("-".into(), |v| format!("{v:.3}"))
}

impl EvalReport {
    pub fn table(&self) -> String {
        let mut out = format!("{:<48} {:>7} {:>8} {:>9}\n", "group", "n", "correct", "accuracy");
        let mut row = |name: &str, b: &Bucket| {
            out += &format!("{name:<48} {:>7} {:>8} {:>9}\n", b.count, b.correct, fmt_acc(b.accuracy));
        };
        row("all", &self.overall);
        for (task, b) in &self.per_task {
            row(task, b);
            let prefix = format!("{task}/");
            for (k, b) in self.per_stratum.range(prefix.clone()..) {
                let Some(stratum) = k.strip_prefix(&prefix) else { break };
                row(&format!("  {stratum}"), b);
            }
        }
        out += &format!(
            "parse failures: {} ({})\n",
            self.parse_failures,
            fmt_acc(self.parse_failure_rate)
        );
        out += &format!(
            "fidelity: {} steps, exact {}, shape-only {}, undecodable {}\n",
            self.fidelity.steps,
            fmt_acc(self.fidelity.exact),
            fmt_acc(self.fidelity.shape_only),
            self.fidelity.undecodable
        );
        out
    }
}

/// Reads predictions; a line that does not parse is a schema error naming
/// the (1-based) line.
pub fn read_predictions(path: &Path) -> Result<Vec<Prediction>> {
    let f = BufReader::new(fs::File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in f.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let p: Prediction = serde_json::from_str(&line).map_err(|e| EvalError::Schema {
            line: i + 1,
            message: e.to_string(),
        })?;
        for im in &p.intermediate {
            if im.matrix.is_some() == im.image.is_some() {
                return Err(EvalError::Schema {
                    line: i + 1,
                    message: format!("intermediate step {} needs exactly one of matrix or image", im.step),
                });
            }
        }
        out.push(p);
    }
    Ok(out)
}

/// Every record listed by the manifest under `root`, one per instance id.
pub fn load_instances(root: &Path) -> Result<Vec<Record>> {
    let manifest = load_manifest(root)?
        .ok_or_else(|| EvalError::Domain(format!("no manifest.json under {}", root.display())))?;
    let mut seen = BTreeMap::new();
    for e in manifest.entries.values() {
        for r in read_records(&root.join(&e.path))? {
            seen.entry(r.id.clone()).or_insert(r);
        }
    }
    Ok(seen.into_values().collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn extraction_prefers_the_answer_line() {
        let int = Answer::Integer(0);
        assert_eq!(extract_answer("3 steps then 4\nAnswer: 7", &int, None), Some(Answer::Integer(7)));
        assert_eq!(extract_answer("it moves 3 then 12", &int, None), Some(Answer::Integer(12)));
        assert_eq!(extract_answer("answer: -4", &int, None), Some(Answer::Integer(-4)));
        assert_eq!(extract_answer("no idea", &int, None), None);
        let ch = Answer::Choice("A".into());
        assert_eq!(extract_answer("I think (c).\nFinal answer: (b)", &ch, None), Some(Answer::Choice("B".into())));
        assert_eq!(extract_answer("so C", &ch, None), Some(Answer::Choice("C".into())));
        let set = Answer::IntegerSet(BTreeSet::new());
        assert_eq!(
            extract_answer("Answer: 3, 5, 4", &set, Some(CountMode::AllPossible)),
            Some(Answer::IntegerSet(BTreeSet::from([3, 4, 5])))
        );
    }

    #[test]
    fn shape_only_ignores_colors_but_not_cells() {
        let a = vec!["R.B".to_string(), "XRR".to_string()];
        let recolored = vec!["B.R".to_string(), "RBB".to_string()];
        assert!(score_fidelity(&a, &a, FidelityMode::Exact));
        assert!(!score_fidelity(&a, &recolored, FidelityMode::Exact));
        assert!(score_fidelity(&a, &recolored, FidelityMode::ShapeOnly));
        let moved = vec!["RB.".to_string(), "XRR".to_string()];
        assert!(!score_fidelity(&a, &moved, FidelityMode::ShapeOnly));
    }

    #[test]
    fn matrix_blocks_are_found_in_order() {
        let t = "x\n<matrix>\n1 0\n0 1\n</matrix>\ny\n<matrix>\nab\n</matrix>\n";
        assert_eq!(matrices_in(t), vec![vec!["1 0".to_string(), "0 1".into()], vec!["ab".to_string()]]);
    }
}
