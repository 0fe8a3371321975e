//! Greedy rule induction with the multi-task objective.
//!
//! The score of a rule is the weighted sum, over every token and every task,
//! of the change in per-task correctness the rule causes:
//!
//! ```text
//! f(r) = sum over tokens s, tasks i of  w_i * (correct_i(r(s)) - correct_i(s))
//! ```
//!
//! A rule only rewrites its target stream, so all other task terms are zero
//! for that rule; the sum is what puts rules targeting different tasks into
//! one comparable pool. Weights are rationals; internally every score is an
//! integer in units of `1 / lcm(weight denominators)`, so comparisons and
//! the error bookkeeping are exact.
//!
//! Two scorers produce the same selections: [`ScorerKind::Naive`]
//! regenerates candidates from the error positions and recounts them over
//! the whole corpus every iteration, [`ScorerKind::Indexed`] keeps per-context
//! counts for every template and only revisits tokens near the positions a
//! rule changed.

mod indexed;
mod naive;

use std::fmt::Write as _;

use num_rational::Rational64;
use rayon::prelude::*;

use crate::corpus::{Corpus, Schema, Sym};
use crate::engine::{build_lexicon, initialize, matching_changes, Changes, InitKeys, Model, Phase};
use crate::error::{Error, Result};
use crate::templates::{CompiledRule, CompiledTemplate, ContextKey, Rule, Template};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Mode {
    Joint,
    /// Train one task at a time in the given order; earlier tasks' outputs
    /// become read-only features for later phases.
    Sequential(Vec<String>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScorerKind {
    Naive,
    Indexed,
}

#[derive(Clone, Debug)]
pub struct TrainConfig {
    pub templates: Vec<Template>,
    pub min_score: Rational64,
    pub max_rules: Option<usize>,
    pub mode: Mode,
    pub scorer: ScorerKind,
    /// Conditioning keys for the initial-state generator; defaults to
    /// [`InitKeys::default_for`].
    pub init_keys: Option<InitKeys>,
    pub workers: usize,
    /// Check the indexed scorer against the naive one every iteration.
    pub cross_check: bool,
}

impl TrainConfig {
    pub fn new(templates: Vec<Template>) -> TrainConfig {
        TrainConfig {
            templates,
            min_score: Rational64::from_integer(1),
            max_rules: None,
            mode: Mode::Joint,
            scorer: ScorerKind::Indexed,
            init_keys: None,
            workers: 1,
            cross_check: std::env::var("MTBL_LOG").is_ok_and(|v| v.eq_ignore_ascii_case("debug")),
        }
    }
}

/// Task weights scaled to integers by a common denominator.
#[derive(Clone, Debug)]
pub(crate) struct Weights {
    per_stream: Vec<i64>,
    unit: i64,
}

impl Weights {
    pub fn new(schema: &Schema) -> Weights {
        let unit = schema
            .tasks()
            .iter()
            .filter_map(|&t| schema.weight(t))
            .fold(1i64, |acc, w| lcm(acc, *w.denom()));
        let per_stream = (0..schema.len())
            .map(|s| {
                schema
                    .weight(s)
                    .map_or(0, |w| (w * Rational64::from_integer(unit)).to_integer())
            })
            .collect();
        Weights { per_stream, unit }
    }

    pub fn of(&self, stream: usize) -> i64 {
        self.per_stream[stream]
    }

    pub fn to_rational(&self, scaled: i64) -> Rational64 {
        Rational64::new(scaled, self.unit)
    }

    /// Smallest scaled score that is >= `score`.
    pub fn threshold(&self, score: Rational64) -> i64 {
        (score * Rational64::from_integer(self.unit)).ceil().to_integer()
    }
}

fn lcm(a: i64, b: i64) -> i64 {
    let (mut x, mut y) = (a, b);
    while y != 0 {
        (x, y) = (y, x % y);
    }
    a / x * b
}

/// A candidate rule in scorer-internal form.
#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) struct Candidate {
    pub template: usize,
    pub key: ContextKey,
    pub value: Sym,
}

/// Template prepared for one training run.
pub(crate) struct Prepared {
    pub template: Template,
    pub compiled: CompiledTemplate,
    pub weight: i64,
    /// For each stream: offsets this template reads from it.
    pub reads: Vec<Vec<i32>>,
}

impl Prepared {
    fn new(template: &Template, schema: &Schema, weights: &Weights) -> Result<Prepared> {
        let compiled = CompiledTemplate::new(template, schema)?;
        let mut reads = vec![Vec::new(); schema.len()];
        for slot in &compiled.slots {
            for o in slot.lo..=slot.hi {
                if !reads[slot.stream].contains(&o) {
                    reads[slot.stream].push(o);
                }
            }
        }
        Ok(Prepared {
            template: template.clone(),
            weight: weights.of(compiled.target),
            compiled,
            reads,
        })
    }

    /// Positions whose context or correctness for this template can change
    /// when `stream` changes at position `p` of a sentence of length `len`.
    pub fn footprint(&self, stream: usize, p: usize, len: usize, out: &mut Vec<usize>) {
        for &o in &self.reads[stream] {
            let q = p as isize - o as isize;
            if q >= 0 && (q as usize) < len {
                out.push(q as usize);
            }
        }
        if self.compiled.target == stream {
            out.push(p);
        }
    }
}

/// Per-context counts: a rule `(context, v)` scores
/// `weight * (good[v] - (correct_total - correct_by[v]))`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub(crate) struct ContextCounts {
    pub correct_total: u32,
    pub correct_by: smallvec::SmallVec<[(Sym, u32); 2]>,
    pub good_by: smallvec::SmallVec<[(Sym, u32); 2]>,
}

pub(crate) fn bump(list: &mut smallvec::SmallVec<[(Sym, u32); 2]>, sym: Sym, delta: i32) {
    if let Some(i) = list.iter().position(|&(s, _)| s == sym) {
        let n = list[i].1 as i64 + delta as i64;
        debug_assert!(n >= 0);
        if n == 0 {
            list.swap_remove(i);
        } else {
            list[i].1 = n as u32;
        }
    } else {
        debug_assert!(delta > 0);
        list.push((sym, delta as u32));
    }
}

impl ContextCounts {
    pub fn score(&self, weight: i64, value: Sym) -> i64 {
        let good = self
            .good_by
            .iter()
            .find(|&&(s, _)| s == value)
            .map_or(0, |&(_, n)| n as i64);
        let kept = self
            .correct_by
            .iter()
            .find(|&&(s, _)| s == value)
            .map_or(0, |&(_, n)| n as i64);
        weight * (good - (self.correct_total as i64 - kept))
    }

    pub fn is_empty(&self) -> bool {
        self.correct_total == 0 && self.good_by.is_empty()
    }

    /// Records one token's contribution: an error whose gold tag is `gold`,
    /// or a correct token currently tagged `current`.
    pub fn record(&mut self, current: Sym, gold: Sym, delta: i32) {
        if current == gold {
            self.correct_total = (self.correct_total as i64 + delta as i64) as u32;
            bump(&mut self.correct_by, current, delta);
        } else {
            bump(&mut self.good_by, gold, delta);
        }
    }
}

/// Picks the best of `(score, candidate)` pairs already filtered to the
/// maximum score: smallest rule serialization wins.
pub(crate) fn break_ties(
    tied: Vec<Candidate>,
    prepared: &[Prepared],
    corpus: &Corpus,
) -> Option<(Rule, String)> {
    tied.into_iter()
        .map(|c| {
            let p = &prepared[c.template];
            let rule = p.compiled.rule(&p.template, &c.key, c.value, corpus.symbols());
            let text = rule.to_string();
            (rule, text)
        })
        .min_by(|a, b| a.1.cmp(&b.1))
}

pub(crate) trait Scorer {
    /// Highest-scoring candidate with scaled score >= `min`, ties broken by
    /// serialization.
    fn best(&mut self, corpus: &Corpus, min: i64) -> Result<Option<(Rule, i64)>>;

    /// Applies `rule` to `corpus` and brings internal state up to date.
    fn apply(&mut self, corpus: &mut Corpus, rule: &CompiledRule) -> Changes;

    /// Checks maintained state against a rebuild from `corpus`.
    fn audit(&self, _corpus: &Corpus) -> std::result::Result<(), String> {
        Ok(())
    }
}

fn make_scorer(kind: ScorerKind, prepared: Vec<Prepared>, corpus: &Corpus) -> Box<dyn Scorer + Send> {
    match kind {
        ScorerKind::Naive => Box::new(naive::NaiveScorer::new(prepared)),
        ScorerKind::Indexed => Box::new(indexed::ScoreBoard::new(prepared, corpus)),
    }
}

/// Literal rule score: fires the rule on every token of a copy of the
/// current state and sums the weighted change in correctness.
pub fn score_rule_naive(rule: &Rule, corpus: &Corpus) -> Result<Rational64> {
    let schema = corpus.schema();
    let weights = Weights::new(schema);
    let Some(compiled) = CompiledRule::lookup(rule, schema, corpus.symbols())? else {
        return Ok(Rational64::from_integer(0));
    };
    let target = compiled.target;
    let new_value = if compiled.new_value == Sym::UNSET {
        None
    } else {
        Some(compiled.new_value)
    };
    let mut scaled = 0i64;
    for sentence in corpus.sentences() {
        let gold = sentence.gold(target);
        let current = sentence.current(target);
        for p in 0..sentence.len() {
            if !compiled.matches(sentence, p) {
                continue;
            }
            let before = i64::from(current[p] == gold[p]);
            let after = i64::from(new_value == Some(gold[p]));
            scaled += weights.of(target) * (after - before);
        }
    }
    Ok(weights.to_rational(scaled))
}

/// Weighted error of the current state: sum of task weights over every
/// wrong task tag.
pub fn weighted_error(corpus: &Corpus) -> Rational64 {
    let weights = Weights::new(corpus.schema());
    let mut scaled = 0i64;
    for task in corpus.schema().tasks() {
        let wrong: usize = corpus
            .sentences()
            .iter()
            .map(|s| {
                s.current(task)
                    .iter()
                    .zip(s.gold(task))
                    .filter(|(c, g)| c != g)
                    .count()
            })
            .sum();
        scaled += weights.of(task) * wrong as i64;
    }
    weights.to_rational(scaled)
}

fn prepare(templates: &[Template], corpus: &Corpus) -> Result<Vec<Prepared>> {
    let weights = Weights::new(corpus.schema());
    templates
        .iter()
        .map(|t| Prepared::new(t, corpus.schema(), &weights))
        .collect()
}

/// The best rule for the current state of `corpus` under the naive scorer,
/// or `None` when nothing reaches `config.min_score`.
pub fn best_rule(corpus: &Corpus, config: &TrainConfig) -> Result<Option<(Rule, Rational64)>> {
    for task in corpus.schema().tasks() {
        if !corpus.is_initialized(task) {
            return Err(Error::Uninitialized(corpus.schema().name(task).to_owned()));
        }
    }
    let weights = Weights::new(corpus.schema());
    let mut scorer = naive::NaiveScorer::new(prepare(&config.templates, corpus)?);
    Ok(scorer
        .best(corpus, weights.threshold(config.min_score).max(1))?
        .map(|(rule, s)| (rule, weights.to_rational(s))))
}

/// One learned rule and the training state right after it.
#[derive(Clone, Debug, PartialEq)]
pub struct Iteration {
    pub rule: Rule,
    pub score: Rational64,
    pub changed: usize,
    /// Per-task training accuracy after applying the rule, schema order.
    pub accuracy: Vec<(String, f64)>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopReason {
    NoRuleAboveThreshold,
    MaxRules,
}

#[derive(Clone, Debug)]
pub struct Training {
    pub model: Model,
    pub iterations: Vec<Iteration>,
    pub stop: StopReason,
}

impl Training {
    /// Tab-separated log: iteration, rule, score, then `task:accuracy` for
    /// every task.
    pub fn log_text(&self) -> String {
        let mut out = String::new();
        for (i, it) in self.iterations.iter().enumerate() {
            let _ = write!(out, "{}\t{}\t{}", i + 1, it.rule, it.score);
            for (task, acc) in &it.accuracy {
                let _ = write!(out, "\t{task}:{acc:.6}");
            }
            out.push('\n');
        }
        if self.stop == StopReason::MaxRules {
            out.push_str("# stopped: max_rules reached\n");
        }
        out
    }
}

struct Accuracy {
    tasks: Vec<usize>,
    correct: Vec<usize>,
    total: usize,
}

impl Accuracy {
    fn new(corpus: &Corpus) -> Accuracy {
        let tasks = corpus.schema().tasks();
        let correct = tasks
            .iter()
            .map(|&t| {
                corpus
                    .sentences()
                    .iter()
                    .map(|s| s.current(t).iter().zip(s.gold(t)).filter(|(c, g)| c == g).count())
                    .sum()
            })
            .collect();
        Accuracy {
            tasks,
            correct,
            total: corpus.token_count(),
        }
    }

    fn update(&mut self, corpus: &Corpus, target: usize, new_value: Sym, changes: &Changes) {
        let slot = self.tasks.iter().position(|&t| t == target).expect("target is a task");
        for (s, positions) in changes {
            let gold = corpus.sentences()[*s].gold(target);
            for &(p, old) in positions {
                if old == gold[p] {
                    self.correct[slot] -= 1;
                }
                if new_value == gold[p] {
                    self.correct[slot] += 1;
                }
            }
        }
    }

    fn snapshot(&self, schema: &Schema) -> Vec<(String, f64)> {
        self.tasks
            .iter()
            .zip(&self.correct)
            .map(|(&t, &c)| {
                let acc = if self.total == 0 { 1.0 } else { c as f64 / self.total as f64 };
                (schema.name(t).to_owned(), acc)
            })
            .collect()
    }
}

struct Loop<'a> {
    config: &'a TrainConfig,
    weights: Weights,
    accuracy: Accuracy,
    rules: Vec<Rule>,
    iterations: Vec<Iteration>,
}

impl Loop<'_> {
    fn limit_reached(&self) -> bool {
        self.config.max_rules.is_some_and(|m| self.rules.len() >= m)
    }

    /// Learns rules with `prepared` until no candidate clears the threshold.
    fn run(&mut self, corpus: &mut Corpus, prepared: Vec<Prepared>) -> Result<StopReason> {
        let min = self.weights.threshold(self.config.min_score).max(1);
        let cross = self.config.cross_check && self.config.scorer == ScorerKind::Indexed;
        let reference = if cross {
            Some(prepare(
                &prepared.iter().map(|p| p.template.clone()).collect::<Vec<_>>(),
                corpus,
            )?)
        } else {
            None
        };
        let mut scorer = make_scorer(self.config.scorer, prepared, corpus);
        let mut oracle = reference.map(naive::NaiveScorer::new);
        loop {
            if self.limit_reached() {
                return Ok(StopReason::MaxRules);
            }
            let picked = scorer.best(corpus, min)?;
            if let Some(oracle) = oracle.as_mut() {
                let expected = oracle.best(corpus, min)?;
                if expected != picked {
                    return Err(Error::Internal(format!(
                        "indexed scorer picked {picked:?}, naive scorer {expected:?}"
                    )));
                }
            }
            let Some((rule, scaled)) = picked else {
                return Ok(StopReason::NoRuleAboveThreshold);
            };
            let schema = corpus.schema().clone();
            let compiled = CompiledRule::intern(&rule, &schema, corpus.symbols_mut())?;
            let changes = scorer.apply(corpus, &compiled);
            if cross {
                scorer.audit(corpus).map_err(Error::Internal)?;
            }
            self.accuracy
                .update(corpus, compiled.target, compiled.new_value, &changes);
            let changed = changes.iter().map(|(_, c)| c.len()).sum();
            self.iterations.push(Iteration {
                rule: rule.clone(),
                score: self.weights.to_rational(scaled),
                changed,
                accuracy: self.accuracy.snapshot(&schema),
            });
            self.rules.push(rule);
        }
    }
}

fn check_templates(templates: &[Template], schema: &Schema) -> Result<()> {
    if templates.is_empty() {
        return Err(Error::Config("no templates".into()));
    }
    for t in templates {
        CompiledTemplate::new(t, schema)?;
    }
    Ok(())
}

fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(f))
}

/// Trains according to `config.mode`.
pub fn train(training: &Corpus, config: &TrainConfig) -> Result<Training> {
    match &config.mode {
        Mode::Joint => train_joint(training, config),
        Mode::Sequential(_) => train_sequential(training, config),
    }
}

fn start(training: &Corpus, config: &TrainConfig) -> Result<(Corpus, Model)> {
    if training.token_count() == 0 {
        return Err(Error::EmptyCorpus);
    }
    check_templates(&config.templates, training.schema())?;
    if config.min_score <= Rational64::from_integer(0) {
        return Err(Error::Config("min_score must be positive".into()));
    }
    let keys = config
        .init_keys
        .clone()
        .unwrap_or_else(|| InitKeys::default_for(training.schema()));
    let lexicon = build_lexicon(training, &keys)?;
    let mut corpus = training.clone();
    corpus.clear_current();
    initialize(&mut corpus, &lexicon)?;
    let model = Model {
        schema: training.schema().clone(),
        lexicon,
        rules: Vec::new(),
        phases: Vec::new(),
    };
    Ok((corpus, model))
}

/// Learns one rule list over all tasks at once.
pub fn train_joint(training: &Corpus, config: &TrainConfig) -> Result<Training> {
    let (mut corpus, mut model) = start(training, config)?;
    let mut state = Loop {
        config,
        weights: Weights::new(corpus.schema()),
        accuracy: Accuracy::new(&corpus),
        rules: Vec::new(),
        iterations: Vec::new(),
    };
    let prepared = prepare(&config.templates, &corpus)?;
    let stop = with_workers(config.workers, || state.run(&mut corpus, prepared))??;
    model.rules = state.rules;
    Ok(Training {
        model,
        iterations: state.iterations,
        stop,
    })
}

/// Learns tasks one after another in the configured order. Phase `k` only
/// sees templates that target task `k` and read static streams or tasks
/// earlier in the order; earlier tasks' tags are never rewritten again.
pub fn train_sequential(training: &Corpus, config: &TrainConfig) -> Result<Training> {
    let schema = training.schema();
    let order: Vec<String> = match &config.mode {
        Mode::Sequential(order) => order.clone(),
        Mode::Joint => schema.tasks().iter().map(|&t| schema.name(t).to_owned()).collect(),
    };
    let mut expected: Vec<&str> = schema.tasks().iter().map(|&t| schema.name(t)).collect();
    let mut given: Vec<&str> = order.iter().map(String::as_str).collect();
    expected.sort_unstable();
    given.sort_unstable();
    if expected != given {
        return Err(Error::Config(
            "sequential task order must be a permutation of the schema's tasks".into(),
        ));
    }
    let (mut corpus, mut model) = start(training, config)?;
    let mut state = Loop {
        config,
        weights: Weights::new(corpus.schema()),
        accuracy: Accuracy::new(&corpus),
        rules: Vec::new(),
        iterations: Vec::new(),
    };
    let mut phases = Vec::new();
    let mut stop = StopReason::NoRuleAboveThreshold;
    for (k, task) in order.iter().enumerate() {
        let hidden: Vec<&str> = order[k + 1..].iter().map(String::as_str).collect();
        let templates: Vec<Template> = config
            .templates
            .iter()
            .filter(|t| {
                t.target() == task
                    && t.slots().iter().all(|s| !hidden.contains(&s.stream.as_str()))
            })
            .cloned()
            .collect();
        if order.len() > 1 {
            phases.push(Phase {
                task: task.clone(),
                start: state.rules.len(),
            });
        }
        if templates.is_empty() {
            continue;
        }
        let prepared = prepare(&templates, &corpus)?;
        stop = with_workers(config.workers, || state.run(&mut corpus, prepared))??;
        if stop == StopReason::MaxRules {
            break;
        }
    }
    model.rules = state.rules;
    model.phases = phases;
    Ok(Training {
        model,
        iterations: state.iterations,
        stop,
    })
}

/// Snapshot matches of `rule` without touching the corpus.
pub(crate) fn pending_changes(rule: &CompiledRule, corpus: &Corpus) -> Changes {
    corpus
        .sentences()
        .par_iter()
        .enumerate()
        .filter_map(|(i, s)| {
            let c = matching_changes(rule, s);
            (!c.is_empty()).then_some((i, c))
        })
        .collect()
}

#[cfg(test)]
mod tests;
