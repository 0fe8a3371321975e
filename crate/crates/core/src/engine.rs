//! Initial-state generation and rule application.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use num_rational::Rational64;

use crate::corpus::{Corpus, Schema, Sentence, Sym};
use crate::error::{Error, Result};
use crate::templates::{escape, split_unescaped, unescape, CompiledRule, Rule};

/// Which stream each task's initial tag is conditioned on.
///
/// A key stream is either static (the surface) or another task, in which
/// case that task is initialized first and its initial tag is the key.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InitKeys {
    pairs: Vec<(String, String)>,
}

impl InitKeys {
    /// First task keyed on the first static stream, every other task keyed
    /// on the first task's initial tag.
    pub fn default_for(schema: &Schema) -> InitKeys {
        let tasks = schema.tasks();
        let surface = schema.name(schema.features()[0]).to_owned();
        let first = schema.name(tasks[0]).to_owned();
        let pairs = tasks
            .iter()
            .enumerate()
            .map(|(i, &t)| {
                let key = if i == 0 { surface.clone() } else { first.clone() };
                (schema.name(t).to_owned(), key)
            })
            .collect();
        InitKeys { pairs }
    }

    pub fn new(pairs: Vec<(String, String)>) -> InitKeys {
        InitKeys { pairs }
    }

    pub fn key_of(&self, task: &str) -> Option<&str> {
        self.pairs
            .iter()
            .find(|(t, _)| t == task)
            .map(|(_, k)| k.as_str())
    }

    /// Tasks ordered so that every task-valued key precedes its dependents.
    pub fn ordered(&self, schema: &Schema) -> Result<Vec<(usize, usize)>> {
        let mut pending = Vec::new();
        for task in schema.tasks() {
            let name = schema.name(task);
            let key = self
                .key_of(name)
                .ok_or_else(|| Error::Config(format!("no conditioning key for task `{name}`")))?;
            let key = schema
                .index(key)
                .ok_or_else(|| Error::Config(format!("unknown conditioning stream `{key}`")))?;
            if key == task {
                return Err(Error::Config(format!("task `{name}` keyed on itself")));
            }
            pending.push((task, key));
        }
        for (task, _) in &self.pairs {
            let idx = schema.index_of(task)?;
            if !schema.is_task(idx) {
                return Err(Error::Config(format!("`{task}` is not a task stream")));
            }
        }
        let mut order: Vec<(usize, usize)> = Vec::new();
        while !pending.is_empty() {
            let ready = pending.iter().position(|&(_, key)| {
                !schema.is_task(key) || order.iter().any(|&(t, _)| t == key)
            });
            match ready {
                Some(i) => order.push(pending.remove(i)),
                None => return Err(Error::Config("cyclic conditioning keys".into())),
            }
        }
        Ok(order)
    }
}

/// Tag counts for one task, by conditioning key.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TaskLexicon {
    pub task: String,
    pub key: String,
    pub counts: BTreeMap<String, BTreeMap<String, u64>>,
}

/// Most frequent tag; ties go to the lexicographically smallest tag.
pub fn argmax_tag(counts: &BTreeMap<String, u64>) -> Option<&str> {
    let mut best: Option<(&str, u64)> = None;
    for (tag, &n) in counts {
        if best.is_none_or(|(_, m)| n > m) {
            best = Some((tag, n));
        }
    }
    best.map(|(t, _)| t)
}

impl TaskLexicon {
    /// Counts over all keys; the fallback for unknown keys.
    pub fn global(&self) -> BTreeMap<String, u64> {
        let mut global = BTreeMap::new();
        for tags in self.counts.values() {
            for (tag, n) in tags {
                *global.entry(tag.clone()).or_insert(0) += n;
            }
        }
        global
    }

    pub fn tag_for(&self, key: &str) -> Option<&str> {
        self.counts.get(key).and_then(argmax_tag)
    }
}

/// Most-frequent-tag initial state generator.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Lexicon {
    tasks: Vec<TaskLexicon>,
}

impl Lexicon {
    /// Task lexicons in initialization order.
    pub fn tasks(&self) -> &[TaskLexicon] {
        &self.tasks
    }

    pub fn task(&self, name: &str) -> Option<&TaskLexicon> {
        self.tasks.iter().find(|t| t.task == name)
    }

    pub fn keys(&self) -> InitKeys {
        InitKeys::new(
            self.tasks
                .iter()
                .map(|t| (t.task.clone(), t.key.clone()))
                .collect(),
        )
    }
}

/// Counts gold tags per conditioning key. For a task keyed on another
/// task, the key is that task's initial tag, so training sees the same
/// keys the generator will produce at test time.
pub fn build_lexicon(training: &Corpus, keys: &InitKeys) -> Result<Lexicon> {
    if training.token_count() == 0 {
        return Err(Error::EmptyCorpus);
    }
    let schema = training.schema();
    let order = keys.ordered(schema)?;
    let mut scratch = training.clone();
    scratch.clear_current();
    let mut lexicon = Lexicon { tasks: Vec::new() };
    for &(task, key) in &order {
        let mut counts: BTreeMap<String, BTreeMap<String, u64>> = BTreeMap::new();
        let symbols = scratch.symbols();
        for sentence in scratch.sentences() {
            let keys = sentence.current(key);
            for (k, g) in keys.iter().zip(sentence.gold(task)) {
                *counts
                    .entry(symbols.resolve(*k).to_owned())
                    .or_default()
                    .entry(symbols.resolve(*g).to_owned())
                    .or_insert(0) += 1;
            }
        }
        let entry = TaskLexicon {
            task: schema.name(task).to_owned(),
            key: schema.name(key).to_owned(),
            counts,
        };
        initialize_task(&mut scratch, &entry, task, key);
        lexicon.tasks.push(entry);
    }
    Ok(lexicon)
}

fn initialize_task(corpus: &mut Corpus, lexicon: &TaskLexicon, task: usize, key: usize) -> usize {
    let global = lexicon.global();
    let fallback = argmax_tag(&global).map(|t| corpus.symbols_mut().intern(t));
    let mut table: HashMap<Sym, Sym> = HashMap::new();
    for (k, tags) in &lexicon.counts {
        let Some(key_sym) = corpus.symbols().get(k) else {
            continue;
        };
        if let Some(tag) = argmax_tag(tags) {
            let tag_sym = corpus.symbols_mut().intern(tag);
            table.insert(key_sym, tag_sym);
        }
    }
    let Some(fallback) = fallback else {
        return 0;
    };
    let mut changes = 0;
    for sentence in corpus.sentences_mut() {
        for p in 0..sentence.len() {
            let k = sentence.values[key][p];
            let tag = table.get(&k).copied().unwrap_or(fallback);
            if sentence.values[task][p] != tag {
                sentence.values[task][p] = tag;
                changes += 1;
            }
        }
    }
    changes
}

/// Assigns every task's current tags from the lexicon. Returns the number
/// of tags that changed; running it twice changes nothing the second time.
pub fn initialize(corpus: &mut Corpus, lexicon: &Lexicon) -> Result<usize> {
    let schema = corpus.schema().clone();
    let mut changes = 0;
    for entry in &lexicon.tasks {
        let task = schema.index_of(&entry.task)?;
        let key = schema.index_of(&entry.key)?;
        if !schema.is_task(task) {
            return Err(Error::SchemaMismatch(format!(
                "`{}` is not a task stream",
                entry.task
            )));
        }
        changes += initialize_task(corpus, entry, task, key);
    }
    Ok(changes)
}

/// Snapshot application to one sentence: matches are computed against the
/// state before the rule, then all matched positions are rewritten.
/// Returns the positions whose value actually changed, with the old value.
pub(crate) fn apply_to_sentence(rule: &CompiledRule, sentence: &mut Sentence) -> Vec<(usize, Sym)> {
    let matched = matching_changes(rule, sentence);
    for &(p, _) in &matched {
        sentence.set_current(rule.target, p, rule.new_value);
    }
    matched
}

/// Positions where `rule` fires and would change the current value.
pub(crate) fn matching_changes(rule: &CompiledRule, sentence: &Sentence) -> Vec<(usize, Sym)> {
    let current = sentence.current(rule.target);
    (0..sentence.len())
        .filter(|&p| current[p] != rule.new_value && rule.matches(sentence, p))
        .map(|p| (p, current[p]))
        .collect()
}

/// Changed positions per sentence index, with old values.
pub(crate) type Changes = Vec<(usize, Vec<(usize, Sym)>)>;

pub(crate) fn apply_compiled(rule: &CompiledRule, corpus: &mut Corpus) -> Changes {
    corpus
        .sentences_mut()
        .iter_mut()
        .enumerate()
        .filter_map(|(i, s)| {
            let changed = apply_to_sentence(rule, s);
            (!changed.is_empty()).then_some((i, changed))
        })
        .collect()
}

/// Applies one rule with snapshot semantics; returns the number of tokens
/// whose target tag changed.
pub fn apply_rule(rule: &Rule, corpus: &mut Corpus) -> Result<usize> {
    let schema = corpus.schema().clone();
    let compiled = CompiledRule::intern(rule, &schema, corpus.symbols_mut())?;
    if !corpus.is_initialized(compiled.target) {
        return Err(Error::Uninitialized(rule.target.clone()));
    }
    Ok(apply_compiled(&compiled, corpus)
        .iter()
        .map(|(_, c)| c.len())
        .sum())
}

/// Start of a training phase in a sequentially trained model.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Phase {
    pub task: String,
    pub start: usize,
}

/// The trained artifact.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Model {
    pub schema: Schema,
    pub lexicon: Lexicon,
    pub rules: Vec<Rule>,
    pub phases: Vec<Phase>,
}

fn same_layout(a: &Schema, b: &Schema) -> bool {
    a.len() == b.len()
        && a.streams()
            .iter()
            .zip(b.streams())
            .all(|(x, y)| x.name == y.name && x.task == y.task)
}

/// Initializes `corpus`, then applies every rule in learned order. Returns
/// the per-rule change counts.
pub fn apply_model(model: &Model, corpus: &mut Corpus) -> Result<Vec<usize>> {
    if !same_layout(&model.schema, corpus.schema()) {
        return Err(Error::SchemaMismatch(
            "corpus streams differ from the model's".into(),
        ));
    }
    initialize(corpus, &model.lexicon)?;
    let schema = corpus.schema().clone();
    let mut counts = Vec::with_capacity(model.rules.len());
    for rule in &model.rules {
        let compiled = CompiledRule::intern(rule, &schema, corpus.symbols_mut())?;
        counts.push(
            apply_compiled(&compiled, corpus)
                .iter()
                .map(|(_, c)| c.len())
                .sum(),
        );
    }
    Ok(counts)
}

impl Model {
    /// Text form: `## SCHEMA`, `## LEXICON` and `## RULES` sections.
    pub fn to_text(&self) -> String {
        let mut out = String::from("## SCHEMA\n");
        let names: Vec<&str> = self
            .schema
            .streams()
            .iter()
            .map(|d| d.name.as_str())
            .collect();
        let _ = writeln!(out, "streams {}", names.join(" "));
        let tasks = self.schema.tasks();
        let task_names: Vec<&str> = tasks.iter().map(|&t| self.schema.name(t)).collect();
        let _ = writeln!(out, "tasks {}", task_names.join(" "));
        let weights: Vec<String> = tasks
            .iter()
            .map(|&t| format!("{}={}", self.schema.name(t), self.schema.weight(t).unwrap_or_default()))
            .collect();
        let _ = writeln!(out, "weights {}", weights.join(" "));
        let keys: Vec<String> = self
            .lexicon
            .tasks
            .iter()
            .map(|t| format!("{}={}", t.task, t.key))
            .collect();
        let _ = writeln!(out, "init {}", keys.join(" "));
        out.push_str("## LEXICON\n");
        for entry in &self.lexicon.tasks {
            for (key, tags) in &entry.counts {
                for (tag, n) in tags {
                    let _ = writeln!(out, "{} {} {} {n}", entry.task, escape(key), escape(tag));
                }
            }
        }
        out.push_str("## RULES\n");
        for (i, rule) in self.rules.iter().enumerate() {
            for phase in self.phases.iter().filter(|p| p.start == i) {
                let _ = writeln!(out, "# phase {}", phase.task);
            }
            let _ = writeln!(out, "{rule}");
        }
        for phase in self.phases.iter().filter(|p| p.start >= self.rules.len()) {
            let _ = writeln!(out, "# phase {}", phase.task);
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Model> {
        let bad = |line: usize, m: String| Error::Model(format!("line {line}: {m}"));
        let mut section = "";
        let mut streams: Vec<String> = Vec::new();
        let mut tasks: Vec<String> = Vec::new();
        let mut weights: Vec<(String, Rational64)> = Vec::new();
        let mut keys: Vec<(String, String)> = Vec::new();
        let mut counts: BTreeMap<String, BTreeMap<String, BTreeMap<String, u64>>> = BTreeMap::new();
        let mut rules = Vec::new();
        let mut phases = Vec::new();
        let mut seen = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let n = i + 1;
            if let Some(name) = line.strip_prefix("## ") {
                section = match name.trim() {
                    "SCHEMA" => "SCHEMA",
                    "LEXICON" => "LEXICON",
                    "RULES" => "RULES",
                    other => return Err(bad(n, format!("unknown section `{other}`"))),
                };
                seen.push(section);
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            match section {
                "SCHEMA" => {
                    let mut words = line.split_whitespace();
                    let head = words.next().unwrap_or("");
                    let rest: Vec<&str> = words.collect();
                    let pairs = || -> Result<Vec<(String, String)>> {
                        rest.iter()
                            .map(|w| {
                                w.split_once('=')
                                    .map(|(a, b)| (a.to_owned(), b.to_owned()))
                                    .ok_or_else(|| bad(n, format!("expected NAME=VALUE, got `{w}`")))
                            })
                            .collect()
                    };
                    match head {
                        "streams" => streams = rest.iter().map(|s| (*s).to_owned()).collect(),
                        "tasks" => tasks = rest.iter().map(|s| (*s).to_owned()).collect(),
                        "weights" => {
                            for (task, w) in pairs()? {
                                let w = parse_weight(&w).map_err(|e| bad(n, e.to_string()))?;
                                weights.push((task, w));
                            }
                        }
                        "init" => keys = pairs()?,
                        other => return Err(bad(n, format!("unknown schema entry `{other}`"))),
                    }
                }
                "LEXICON" => {
                    let fields = split_unescaped(line);
                    if fields.len() != 4 {
                        return Err(bad(n, "expected `task key tag count`".into()));
                    }
                    let count: u64 = fields[3]
                        .parse()
                        .map_err(|_| bad(n, format!("bad count `{}`", fields[3])))?;
                    if count == 0 {
                        return Err(bad(n, "zero count".into()));
                    }
                    counts
                        .entry(fields[0].to_owned())
                        .or_default()
                        .entry(unescape(fields[1])?)
                        .or_default()
                        .insert(unescape(fields[2])?, count);
                }
                "RULES" => {
                    if let Some(task) = line.strip_prefix("# phase ") {
                        phases.push(Phase {
                            task: task.trim().to_owned(),
                            start: rules.len(),
                        });
                    } else if !line.starts_with('#') {
                        rules.push(Rule::parse(line).map_err(|e| bad(n, e.to_string()))?);
                    }
                }
                _ => return Err(bad(n, "content before the SCHEMA section".into())),
            }
        }
        if seen != ["SCHEMA", "LEXICON", "RULES"] {
            return Err(Error::Model(
                "expected sections SCHEMA, LEXICON, RULES in that order".into(),
            ));
        }
        let stream_refs: Vec<&str> = streams.iter().map(String::as_str).collect();
        let task_refs: Vec<&str> = tasks.iter().map(String::as_str).collect();
        let mut schema = Schema::new(&stream_refs, &task_refs)?;
        for (task, w) in weights {
            schema = schema.with_weight(&task, w)?;
        }
        let init = InitKeys::new(keys);
        let order = init.ordered(&schema)?;
        let lexicon = Lexicon {
            tasks: order
                .iter()
                .map(|&(t, k)| TaskLexicon {
                    task: schema.name(t).to_owned(),
                    key: schema.name(k).to_owned(),
                    counts: counts.remove(schema.name(t)).unwrap_or_default(),
                })
                .collect(),
        };
        if let Some(task) = counts.keys().next() {
            return Err(Error::Model(format!("lexicon entry for unknown task `{task}`")));
        }
        for rule in &rules {
            for c in &rule.conditions {
                schema.index_of(&c.stream)?;
            }
            let t = schema.index_of(&rule.target)?;
            if !schema.is_task(t) {
                return Err(Error::Model(format!("rule `{rule}` rewrites a static stream")));
            }
        }
        Ok(Model {
            schema,
            lexicon,
            rules,
            phases,
        })
    }
}

/// Parses a non-negative weight written as an integer, a fraction `a/b`,
/// or a decimal `1.25`.
pub fn parse_weight(text: &str) -> Result<Rational64> {
    let bad = || Error::Config(format!("bad weight `{text}`"));
    let value = if let Some((int, frac)) = text.split_once('.') {
        if frac.is_empty() || frac.len() > 12 || !frac.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        let whole: i64 = if int.is_empty() { 0 } else { int.parse().map_err(|_| bad())? };
        let denom = 10i64.pow(frac.len() as u32);
        let numer: i64 = frac.parse().map_err(|_| bad())?;
        Rational64::new(whole * denom + numer, denom)
    } else {
        text.parse::<Rational64>().map_err(|_| bad())?
    };
    if value < Rational64::from_integer(0) {
        return Err(bad());
    }
    Ok(value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{read_column_str, write_column_corpus, Layer};

    fn wpc() -> Schema {
        Schema::new(&["word", "pos", "chunk"], &["pos", "chunk"]).unwrap()
    }

    fn repeat(line: &str, n: usize) -> String {
        (0..n).map(|_| format!("{line}\n\n")).collect()
    }

    #[test]
    fn argmax_with_lexicographic_ties() {
        let mut c = BTreeMap::new();
        c.insert("NN".to_string(), 5);
        c.insert("VB".to_string(), 3);
        assert_eq!(argmax_tag(&c), Some("NN"));
        let mut c = BTreeMap::new();
        c.insert("NN".to_string(), 2);
        c.insert("JJ".to_string(), 2);
        assert_eq!(argmax_tag(&c), Some("JJ"));
    }

    #[test]
    fn lexicon_counts_and_dependent_keys() {
        let text = repeat("run NN B-NP", 5) + &repeat("run VB B-VP", 3);
        let corpus = read_column_str(&text, &wpc()).unwrap();
        let lex = build_lexicon(&corpus, &InitKeys::default_for(&wpc())).unwrap();
        let pos = lex.task("pos").unwrap();
        assert_eq!(pos.counts["run"]["NN"], 5);
        assert_eq!(pos.counts["run"]["VB"], 3);
        assert_eq!(pos.tag_for("run"), Some("NN"));
        // chunk is keyed on the initial pos tag, which is NN for all 8 tokens
        let chunk = lex.task("chunk").unwrap();
        assert_eq!(chunk.key, "pos");
        assert_eq!(chunk.counts["NN"]["B-NP"], 5);
        assert_eq!(chunk.counts["NN"]["B-VP"], 3);
    }

    #[test]
    fn dependent_argmax_from_counts() {
        let text = repeat("A NNP I-NP", 10) + &repeat("B NNP B-NP", 7);
        let corpus = read_column_str(&text, &wpc()).unwrap();
        let lex = build_lexicon(&corpus, &InitKeys::default_for(&wpc())).unwrap();
        assert_eq!(lex.task("chunk").unwrap().tag_for("NNP"), Some("I-NP"));
    }

    #[test]
    fn initialize_known_unknown_and_idempotent() {
        let train = read_column_str(
            &(repeat("the DT B-NP", 3) + &repeat("dog NN I-NP", 4)),
            &wpc(),
        )
        .unwrap();
        let lex = build_lexicon(&train, &InitKeys::default_for(&wpc())).unwrap();
        let mut test = read_column_str("the DT B-NP\ncat NN I-NP\n", &wpc()).unwrap();
        assert_eq!(initialize(&mut test, &lex).unwrap(), 4);
        let out = write_column_corpus(&test, Layer::Current).unwrap();
        // unknown `cat` gets the global most frequent pos (NN), chunk from NN
        assert_eq!(out, "the DT B-NP\ncat NN I-NP\n\n");
        assert_eq!(initialize(&mut test, &lex).unwrap(), 0);
    }

    #[test]
    fn empty_training_corpus_is_an_error() {
        let corpus = read_column_str("", &wpc()).unwrap();
        assert!(matches!(
            build_lexicon(&corpus, &InitKeys::default_for(&wpc())),
            Err(Error::EmptyCorpus)
        ));
    }

    fn with_current(text: &str, stream: usize, tags: &[&str]) -> Corpus {
        let mut corpus = read_column_str(text, &wpc()).unwrap();
        corpus.copy_gold_to_current();
        let syms: Vec<Sym> = tags.iter().map(|t| corpus.symbols_mut().intern(t)).collect();
        corpus.sentences_mut()[0].values[stream] = syms;
        corpus
    }

    #[test]
    fn apply_rule_changes_target_only() {
        let mut corpus = with_current("he PRP B-NP\nwas VBD B-VP\ncited VBN I-VP\n", 1, &["PRP", "VBD", "VBD"]);
        let before_chunk = corpus.sentences()[0].current(2).to_vec();
        let rule = Rule::parse("pos[0]=VBD chunk[0]=I-VP => pos=VBN").unwrap();
        assert_eq!(apply_rule(&rule, &mut corpus).unwrap(), 1);
        assert_eq!(corpus.value(0, 1, 2, Layer::Current), "VBN");
        assert_eq!(corpus.value(0, 1, 1, Layer::Current), "VBD");
        assert_eq!(corpus.sentences()[0].current(2), &before_chunk[..]);
        let nowhere = Rule::parse("pos[0]=XX => pos=VBN").unwrap();
        assert_eq!(apply_rule(&nowhere, &mut corpus).unwrap(), 0);
    }

    #[test]
    fn snapshot_semantics_do_not_cascade() {
        let mut corpus = with_current("a A O\nb B O\nc B O\n", 1, &["A", "B", "B"]);
        let rule = Rule::parse("pos[-1]=A => pos=A").unwrap();
        assert_eq!(apply_rule(&rule, &mut corpus).unwrap(), 1);
        let tags: Vec<&str> = (0..3).map(|p| corpus.value(0, 1, p, Layer::Current)).collect();
        assert_eq!(tags, ["A", "A", "B"]);
    }

    #[test]
    fn apply_rule_unknown_stream() {
        let mut corpus = with_current("a A O\n", 1, &["A"]);
        let rule = Rule::parse("tag[0]=A => pos=B").unwrap();
        assert!(matches!(apply_rule(&rule, &mut corpus), Err(Error::UnknownStream(_))));
    }

    fn model(rules: &[&str]) -> Model {
        let train = read_column_str(
            "he PRP B-NP\nwalked VBD B-VP\n\nhe PRP B-NP\nhas VBZ B-VP\nwalked VBN I-VP\n\nshe PRP B-NP\nwalked VBD B-VP\n",
            &wpc(),
        )
        .unwrap();
        Model {
            schema: wpc(),
            lexicon: build_lexicon(&train, &InitKeys::default_for(&wpc())).unwrap(),
            rules: rules.iter().map(|r| Rule::parse(r).unwrap()).collect(),
            phases: Vec::new(),
        }
    }

    #[test]
    fn apply_model_empty_rules_is_initial_state() {
        let m = model(&[]);
        let mut a = read_column_str("he PRP B-NP\nhas VBZ B-VP\nwalked VBN I-VP\n", &wpc()).unwrap();
        let mut b = a.clone();
        assert!(apply_model(&m, &mut a).unwrap().is_empty());
        initialize(&mut b, &m.lexicon).unwrap();
        assert_eq!(a.layer_strings(Layer::Current), b.layer_strings(Layer::Current));
    }

    #[test]
    fn apply_model_chains_rules_in_order() {
        // rule 2 conditions on the chunk tag rule 1 writes
        let m = model(&[
            "chunk[0]=B-VP pos[-1]=VBZ => chunk=I-VP",
            "pos[0]=VBD chunk[0]=I-VP => pos=VBN",
        ]);
        let mut c = read_column_str("he PRP B-NP\nhas VBZ B-VP\nwalked VBN I-VP\n", &wpc()).unwrap();
        assert_eq!(apply_model(&m, &mut c).unwrap(), vec![1, 1]);
        assert_eq!(c.value(0, 1, 2, Layer::Current), "VBN");
        let mut d = read_column_str("he PRP B-NP\nhas VBZ B-VP\nwalked VBN I-VP\n", &wpc()).unwrap();
        apply_model(&m, &mut d).unwrap();
        assert_eq!(c.layer_strings(Layer::Current), d.layer_strings(Layer::Current));
        // reversed order: the POS rule sees no I-VP yet
        let r = model(&[
            "pos[0]=VBD chunk[0]=I-VP => pos=VBN",
            "chunk[0]=B-VP pos[-1]=VBZ => chunk=I-VP",
        ]);
        let mut e = read_column_str("he PRP B-NP\nhas VBZ B-VP\nwalked VBN I-VP\n", &wpc()).unwrap();
        assert_eq!(apply_model(&r, &mut e).unwrap(), vec![0, 1]);
    }

    #[test]
    fn apply_model_schema_mismatch() {
        let m = model(&[]);
        let schema = Schema::new(&["word", "pos"], &["pos"]).unwrap();
        let mut c = read_column_str("a DT\n", &schema).unwrap();
        assert!(matches!(apply_model(&m, &mut c), Err(Error::SchemaMismatch(_))));
    }

    #[test]
    fn model_text_round_trip() {
        let mut m = model(&["pos[0]=VBD chunk[0]=I-VP => pos=VBN", "chunk[-1..-1]=B\\ X => chunk=O"]);
        m.phases = vec![Phase { task: "pos".into(), start: 0 }, Phase { task: "chunk".into(), start: 1 }];
        m.schema = m.schema.clone().with_weight("chunk", Rational64::new(3, 2)).unwrap();
        let text = m.to_text();
        assert!(text.starts_with("## SCHEMA\nstreams word pos chunk\ntasks pos chunk\nweights pos=1 chunk=3/2\ninit pos=word chunk=pos\n## LEXICON\n"));
        let back = Model::from_text(&text).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.to_text(), text);
        assert!(Model::from_text("## RULES\n").is_err());
    }

    #[test]
    fn empty_last_phase_survives() {
        let mut m = model(&["pos[0]=VBD chunk[0]=I-VP => pos=VBN"]);
        m.phases = vec![Phase { task: "pos".into(), start: 0 }, Phase { task: "chunk".into(), start: 1 }];
        let text = m.to_text();
        assert!(text.ends_with("pos=VBN\n# phase chunk\n"));
        assert_eq!(Model::from_text(&text).unwrap(), m);
    }

    #[test]
    fn weights_parse() {
        assert_eq!(parse_weight("2").unwrap(), Rational64::from_integer(2));
        assert_eq!(parse_weight("3/2").unwrap(), Rational64::new(3, 2));
        assert_eq!(parse_weight("1.25").unwrap(), Rational64::new(5, 4));
        assert!(parse_weight("-1").is_err());
        assert!(parse_weight("x").is_err());
    }
}
