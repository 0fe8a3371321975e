//! Token accuracy, chunk and segmentation precision/recall/F, and
//! word-level tags voted from character tags.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use num_rational::Rational64;
use rayon::prelude::*;

use crate::corpus::{Corpus, Layer, Sentence};
use crate::error::{Error, Result};
use crate::spans::{decode_bio, decode_segmentation, Span};

fn ratio(n: usize, d: usize) -> Rational64 {
    Rational64::new(n as i64, d as i64)
}

pub fn to_f64(r: Rational64) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// Fraction of tokens whose current tag equals the gold tag.
pub fn accuracy(corpus: &Corpus, task: &str) -> Result<Rational64> {
    let stream = corpus.schema().index_of(task)?;
    if !corpus.schema().is_task(stream) {
        return Err(Error::UnknownStream(task.to_owned()));
    }
    if !corpus.is_initialized(stream) {
        return Err(Error::Uninitialized(task.to_owned()));
    }
    let total = corpus.token_count();
    if total == 0 {
        return Err(Error::EmptyCorpus);
    }
    let correct: usize = corpus
        .sentences()
        .iter()
        .map(|s| s.current(stream).iter().zip(s.gold(stream)).filter(|(c, g)| c == g).count())
        .sum();
    Ok(ratio(correct, total))
}

/// Counts and derived scores for span matching.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Prf {
    pub found: usize,
    pub correct: usize,
    pub truth: usize,
    pub beta: Rational64,
}

impl Prf {
    pub fn from_counts(found: usize, correct: usize, truth: usize, beta: Rational64) -> Result<Prf> {
        if beta <= Rational64::from_integer(0) {
            return Err(Error::InvalidArgument(format!("beta must be positive, got {beta}")));
        }
        if correct > found.min(truth) {
            return Err(Error::InvalidArgument(format!(
                "correct {correct} exceeds found {found} or true {truth}"
            )));
        }
        Ok(Prf {
            found,
            correct,
            truth,
            beta,
        })
    }

    fn both_empty(&self) -> bool {
        self.found == 0 && self.truth == 0
    }

    pub fn precision(&self) -> Rational64 {
        match (self.both_empty(), self.found) {
            (true, _) => Rational64::from_integer(1),
            (false, 0) => Rational64::from_integer(0),
            _ => ratio(self.correct, self.found),
        }
    }

    pub fn recall(&self) -> Rational64 {
        match (self.both_empty(), self.truth) {
            (true, _) => Rational64::from_integer(1),
            (false, 0) => Rational64::from_integer(0),
            _ => ratio(self.correct, self.truth),
        }
    }

    /// `(1 + b^2) P R / (b^2 P + R)`, which reduces to
    /// `(1 + b^2) correct / (b^2 true + found)`.
    pub fn f(&self) -> Rational64 {
        if self.both_empty() {
            return Rational64::from_integer(1);
        }
        if self.correct == 0 {
            return Rational64::from_integer(0);
        }
        let b2 = self.beta * self.beta;
        let one = Rational64::from_integer(1);
        (one + b2) * Rational64::from_integer(self.correct as i64)
            / (b2 * Rational64::from_integer(self.truth as i64)
                + Rational64::from_integer(self.found as i64))
    }

    /// Micro-average: counts are summed.
    pub fn merge(&self, other: &Prf) -> Prf {
        Prf {
            found: self.found + other.found,
            correct: self.correct + other.correct,
            truth: self.truth + other.truth,
            beta: self.beta,
        }
    }
}

/// Exact `(start, end, label)` matching of predicted against gold spans.
pub fn chunk_prf(predicted: &[Span], gold: &[Span], beta: Rational64) -> Result<Prf> {
    let mut gold_sorted: Vec<&Span> = gold.iter().collect();
    gold_sorted.sort();
    gold_sorted.dedup();
    let mut pred_sorted: Vec<&Span> = predicted.iter().collect();
    pred_sorted.sort();
    pred_sorted.dedup();
    let correct = pred_sorted
        .iter()
        .filter(|s| gold_sorted.binary_search(s).is_ok())
        .count();
    Prf::from_counts(pred_sorted.len(), correct, gold_sorted.len(), beta)
}

/// Word-span F between two `B`/`I` tag sequences.
pub fn segmentation_prf<S: AsRef<str>>(predicted: &[S], gold: &[S]) -> Result<Prf> {
    if predicted.len() != gold.len() {
        return Err(Error::Misaligned(format!(
            "{} predicted tags against {} gold tags",
            predicted.len(),
            gold.len()
        )));
    }
    chunk_prf(
        &decode_segmentation(predicted)?,
        &decode_segmentation(gold)?,
        Rational64::from_integer(1),
    )
}

/// Most frequent tag in `span`, ties going to the tag seen first.
pub fn word_pos_majority<'a, S: AsRef<str>>(tags: &'a [S], span: &Span) -> Result<&'a str> {
    if span.start > span.end || span.end >= tags.len() {
        return Err(Error::InvalidSpans(format!(
            "span {}..={} outside length {}",
            span.start,
            span.end,
            tags.len()
        )));
    }
    let window = &tags[span.start..=span.end];
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for t in window {
        *counts.entry(t.as_ref()).or_default() += 1;
    }
    let top = counts.values().copied().max().unwrap_or(0);
    Ok(window
        .iter()
        .map(AsRef::as_ref)
        .find(|t| counts[t] == top)
        .expect("span is non-empty"))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TaskKind {
    /// Token accuracy only.
    Token,
    /// B-X/I-X/O chunk tags: accuracy and chunk PRF.
    Chunk,
    /// B/I segmentation tags: accuracy and word PRF.
    Segmentation,
}

/// What to report for each task.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct EvalSpec {
    pub tasks: Vec<(String, TaskKind)>,
    /// `(segmentation task, tag task)`: also report word-level accuracy of
    /// the tag task by character majority over gold words.
    pub word_tags: Option<(String, String)>,
    pub beta: Option<Rational64>,
}

fn looks_like(values: &mut dyn Iterator<Item = &str>) -> TaskKind {
    let mut seg = true;
    let mut chunk = true;
    let mut any = false;
    for v in values {
        any = true;
        seg &= matches!(v, "B" | "I");
        chunk &= v == "O"
            || v.strip_prefix("B-").or_else(|| v.strip_prefix("I-")).is_some_and(|l| !l.is_empty());
        if !seg && !chunk {
            return TaskKind::Token;
        }
    }
    match (any, seg, chunk) {
        (false, _, _) => TaskKind::Token,
        (_, true, _) => TaskKind::Segmentation,
        (_, _, true) => TaskKind::Chunk,
        _ => TaskKind::Token,
    }
}

impl EvalSpec {
    /// Guesses task kinds from the gold tags: all `B`/`I` is segmentation,
    /// all `O`/`B-X`/`I-X` is chunking, anything else is token-level.
    pub fn infer(corpus: &Corpus) -> EvalSpec {
        let schema = corpus.schema();
        let tasks: Vec<(String, TaskKind)> = schema
            .tasks()
            .into_iter()
            .map(|t| {
                let mut values = corpus.sentences().iter().flat_map(|s| {
                    s.gold(t).iter().map(|&v| corpus.symbols().resolve(v))
                });
                (schema.name(t).to_owned(), looks_like(&mut values))
            })
            .collect();
        let seg = tasks.iter().find(|(_, k)| *k == TaskKind::Segmentation);
        let tag = tasks.iter().find(|(_, k)| *k == TaskKind::Token);
        let word_tags = match (seg, tag) {
            (Some((s, _)), Some((t, _))) => Some((s.clone(), t.clone())),
            _ => None,
        };
        EvalSpec {
            tasks,
            word_tags,
            beta: None,
        }
    }
}

/// One metric value.
#[derive(Clone, Debug, PartialEq)]
pub struct Metric {
    pub task: String,
    pub metric: &'static str,
    pub value: Rational64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Report {
    pub metrics: Vec<Metric>,
}

impl Report {
    pub fn get(&self, task: &str, metric: &str) -> Option<Rational64> {
        self.metrics
            .iter()
            .find(|m| m.task == task && m.metric == metric)
            .map(|m| m.value)
    }

    /// `task<TAB>metric<TAB>value` lines, 4 decimals.
    pub fn machine_lines(&self) -> String {
        let mut out = String::new();
        for m in &self.metrics {
            let _ = writeln!(out, "{}\t{}\t{:.4}", m.task, m.metric, to_f64(m.value));
        }
        out
    }

    /// Aligned table, one row per task, percentages.
    pub fn table(&self) -> String {
        let columns = ["accuracy", "precision", "recall", "f", "word_accuracy"];
        let mut tasks: Vec<&str> = Vec::new();
        for m in &self.metrics {
            if !tasks.contains(&m.task.as_str()) {
                tasks.push(&m.task);
            }
        }
        let width = tasks.iter().map(|t| t.len()).max().unwrap_or(4).max(4);
        let mut out = format!("{:width$}", "task");
        for c in columns {
            let _ = write!(out, "  {c:>13}");
        }
        out.push('\n');
        for task in tasks {
            let _ = write!(out, "{task:width$}");
            for c in columns {
                match self.get(task, c) {
                    Some(v) => {
                        let _ = write!(out, "  {:>13.2}", to_f64(v) * 100.0);
                    }
                    None => {
                        let _ = write!(out, "  {:>13}", "-");
                    }
                }
            }
            out.push('\n');
        }
        out
    }
}

fn tag_strings<'a>(corpus: &'a Corpus, sentence: &Sentence, stream: usize, layer: Layer) -> Vec<&'a str> {
    sentence
        .layer(stream, layer)
        .iter()
        .map(|&v| corpus.symbols().resolve(v))
        .collect()
}

fn task_prf(corpus: &Corpus, stream: usize, kind: TaskKind, beta: Rational64) -> Result<Prf> {
    let per_sentence: Vec<Prf> = corpus
        .sentences()
        .par_iter()
        .map(|s| {
            let predicted = tag_strings(corpus, s, stream, Layer::Current);
            let gold = tag_strings(corpus, s, stream, Layer::Gold);
            match kind {
                TaskKind::Segmentation => {
                    let prf = segmentation_prf(&predicted, &gold)?;
                    Ok(Prf { beta, ..prf })
                }
                _ => chunk_prf(&decode_bio(&predicted)?, &decode_bio(&gold)?, beta),
            }
        })
        .collect::<Result<_>>()?;
    let empty = Prf::from_counts(0, 0, 0, beta)?;
    Ok(per_sentence.iter().fold(empty, |acc, p| acc.merge(p)))
}

fn word_accuracy(corpus: &Corpus, seg: usize, tag: usize) -> Result<Rational64> {
    let (mut correct, mut total) = (0usize, 0usize);
    for s in corpus.sentences() {
        let words = decode_segmentation(&tag_strings(corpus, s, seg, Layer::Gold))?;
        let predicted = tag_strings(corpus, s, tag, Layer::Current);
        let gold = tag_strings(corpus, s, tag, Layer::Gold);
        for word in &words {
            total += 1;
            correct += usize::from(word_pos_majority(&predicted, word)? == word_pos_majority(&gold, word)?);
        }
    }
    if total == 0 {
        return Err(Error::EmptyCorpus);
    }
    Ok(ratio(correct, total))
}

/// Computes the metrics named by `spec` over a corpus whose current layer
/// holds predictions. Span metrics are micro-averaged over sentences.
pub fn evaluate(corpus: &Corpus, spec: &EvalSpec) -> Result<Report> {
    let beta = spec.beta.unwrap_or_else(|| Rational64::from_integer(1));
    let schema = corpus.schema();
    let mut report = Report::default();
    for (task, kind) in &spec.tasks {
        let stream = schema.index_of(task)?;
        let value = accuracy(corpus, task)?;
        report.metrics.push(Metric {
            task: task.clone(),
            metric: "accuracy",
            value,
        });
        if *kind == TaskKind::Token {
            continue;
        }
        let prf = task_prf(corpus, stream, *kind, beta)?;
        for (metric, value) in [
            ("precision", prf.precision()),
            ("recall", prf.recall()),
            ("f", prf.f()),
        ] {
            report.metrics.push(Metric {
                task: task.clone(),
                metric,
                value,
            });
        }
    }
    if let Some((seg, tag)) = &spec.word_tags {
        let value = word_accuracy(corpus, schema.index_of(seg)?, schema.index_of(tag)?)?;
        report.metrics.push(Metric {
            task: tag.clone(),
            metric: "word_accuracy",
            value,
        });
    }
    Ok(report)
}
