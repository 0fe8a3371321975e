use num_rational::Rational64;

use super::*;
use crate::corpus::{read_column_str, Schema};
use crate::engine::apply_rule;
use crate::synth::{random_corpus, RandomConfig};
use crate::templates::{default_templates, ground_candidates, DEFAULT_OFFSET_BOUND};

fn word_pos() -> Schema {
    Schema::new(&["word", "pos"], &["pos"]).unwrap()
}

fn can_fixture() -> Corpus {
    let mut text = String::new();
    for _ in 0..5 {
        text.push_str("we PRP\ncan MD\ngo VB\n\n");
    }
    for _ in 0..4 {
        text.push_str("the DT\ncan NN\nrusts VBZ\n\n");
    }
    read_column_str(&text, &word_pos()).unwrap()
}

fn config(schema: &Schema) -> TrainConfig {
    let mut c = TrainConfig::new(default_templates(schema, DEFAULT_OFFSET_BOUND));
    c.cross_check = false;
    c
}

fn random(seed: u64, sentences: usize) -> Corpus {
    random_corpus(&RandomConfig {
        sentences,
        vocab: 30,
        tags: [4, 3],
        noise: 0.05,
        seed,
    })
    .unwrap()
}

/// Initialized copy of `corpus` as the trainer sees it before any rule.
fn initial_state(corpus: &Corpus) -> Corpus {
    let keys = InitKeys::default_for(corpus.schema());
    let lexicon = build_lexicon(corpus, &keys).unwrap();
    let mut state = corpus.clone();
    initialize(&mut state, &lexicon).unwrap();
    state
}

/// Every grounded candidate of every template with its literal score.
fn brute_force(corpus: &Corpus, templates: &[Template]) -> Vec<(Rational64, String)> {
    let mut all = Vec::new();
    for t in templates {
        for rule in ground_candidates(t, corpus).unwrap() {
            all.push((score_rule_naive(&rule, corpus).unwrap(), rule.to_string()));
        }
    }
    all
}

#[test]
fn one_rule_fixes_all_errors() {
    let corpus = can_fixture();
    let cfg = config(corpus.schema());
    let state = initial_state(&corpus);
    assert_eq!(weighted_error(&state), Rational64::from_integer(4));
    let best = brute_force(&state, &cfg.templates)
        .into_iter()
        .map(|(s, _)| s)
        .max()
        .unwrap();
    assert_eq!(best, Rational64::from_integer(4));

    let training = train(&corpus, &cfg).unwrap();
    assert_eq!(training.model.rules.len(), 1);
    assert_eq!(training.iterations[0].score, Rational64::from_integer(4));
    assert_eq!(training.iterations[0].accuracy, vec![("pos".to_owned(), 1.0)]);
    assert_eq!(training.stop, StopReason::NoRuleAboveThreshold);
}

#[test]
fn perfect_start_learns_nothing() {
    let corpus = read_column_str("we PRP\ncan MD\n\nwe PRP\n", &word_pos()).unwrap();
    let training = train(&corpus, &config(corpus.schema())).unwrap();
    assert!(training.model.rules.is_empty());
    assert!(training.log_text().is_empty());
}

#[test]
fn threshold_above_best_score_learns_nothing() {
    let corpus = can_fixture();
    let mut cfg = config(corpus.schema());
    cfg.min_score = Rational64::from_integer(5);
    assert!(train(&corpus, &cfg).unwrap().model.rules.is_empty());
    cfg.min_score = Rational64::from_integer(4);
    assert_eq!(train(&corpus, &cfg).unwrap().model.rules.len(), 1);
}

#[test]
fn empty_inputs_rejected() {
    let corpus = Corpus::new(word_pos());
    assert!(matches!(train(&corpus, &config(&word_pos())), Err(Error::EmptyCorpus)));
    let corpus = can_fixture();
    let mut cfg = config(corpus.schema());
    cfg.templates.clear();
    assert!(matches!(train(&corpus, &cfg), Err(Error::Config(_))));
}

#[test]
fn best_rule_agrees_with_brute_force() {
    for seed in 0..4 {
        let corpus = initial_state(&random(seed, 12));
        let cfg = config(corpus.schema());
        let mut all = brute_force(&corpus, &cfg.templates);
        let top = all.iter().map(|(s, _)| *s).max().unwrap();
        all.retain(|(s, _)| *s == top);
        let expected = all.into_iter().map(|(_, r)| r).min().unwrap();
        let (rule, score) = best_rule(&corpus, &cfg).unwrap().unwrap();
        assert_eq!(score, top);
        assert_eq!(rule.to_string(), expected);
    }
}

#[test]
fn best_rule_requires_initialized_corpus() {
    let corpus = can_fixture();
    assert!(matches!(
        best_rule(&corpus, &config(corpus.schema())),
        Err(Error::Uninitialized(_))
    ));
}

#[test]
fn scorers_agree_and_index_stays_consistent() {
    for seed in 0..3 {
        let corpus = random(seed, 25);
        let mut cfg = config(corpus.schema());
        cfg.scorer = ScorerKind::Naive;
        let naive = train(&corpus, &cfg).unwrap();
        cfg.scorer = ScorerKind::Indexed;
        cfg.cross_check = true;
        let indexed = train(&corpus, &cfg).unwrap();
        assert!(!naive.iterations.is_empty());
        assert_eq!(naive.iterations, indexed.iterations);
        assert_eq!(naive.model.to_text(), indexed.model.to_text());
    }
}

#[test]
fn error_drops_by_rule_score() {
    let corpus = random(9, 30);
    let training = train(&corpus, &config(corpus.schema())).unwrap();
    let mut state = initial_state(&corpus);
    for it in &training.iterations {
        let before = weighted_error(&state);
        assert_eq!(score_rule_naive(&it.rule, &state).unwrap(), it.score);
        apply_rule(&it.rule, &mut state).unwrap();
        assert_eq!(before - weighted_error(&state), it.score);
        assert!(it.score >= Rational64::from_integer(1));
    }
}

#[test]
fn fractional_weights_are_exact() {
    let corpus = random(4, 20);
    let schema = corpus
        .schema()
        .clone()
        .with_weight("t1", Rational64::new(3, 2))
        .unwrap()
        .with_weight("t2", Rational64::new(1, 3))
        .unwrap();
    let corpus = read_column_str(
        &crate::corpus::write_column_corpus(&corpus, crate::corpus::Layer::Gold).unwrap(),
        &schema,
    )
    .unwrap();
    let mut cfg = config(&schema);
    cfg.min_score = Rational64::new(1, 3);
    let training = train(&corpus, &cfg).unwrap();
    let mut state = initial_state(&corpus);
    let mut fractional = false;
    for it in &training.iterations {
        let before = weighted_error(&state);
        apply_rule(&it.rule, &mut state).unwrap();
        assert_eq!(before - weighted_error(&state), it.score);
        fractional |= !it.score.is_integer();
    }
    assert!(fractional);
    cfg.scorer = ScorerKind::Naive;
    assert_eq!(train(&corpus, &cfg).unwrap().iterations, training.iterations);
}

#[test]
fn single_task_weight_scaling_keeps_rules() {
    let corpus = random(5, 30);
    let text = crate::corpus::write_column_corpus(&corpus, crate::corpus::Layer::Gold).unwrap();
    let single = Schema::new(&["word", "t1", "t2"], &["t1"]).unwrap();
    let base = read_column_str(&text, &single).unwrap();
    let scaled_schema = single.clone().with_weight("t1", Rational64::new(7, 3)).unwrap();
    let scaled = read_column_str(&text, &scaled_schema).unwrap();
    let rules = |c: &Corpus| train(c, &config(c.schema())).unwrap().model.rules;
    assert_eq!(rules(&base), rules(&scaled));
}

#[test]
fn worker_count_does_not_change_output() {
    let corpus = random(2, 40);
    let mut cfg = config(corpus.schema());
    let one = train(&corpus, &cfg).unwrap();
    cfg.workers = 4;
    let four = train(&corpus, &cfg).unwrap();
    assert_eq!(one.model.to_text(), four.model.to_text());
    assert_eq!(one.log_text(), four.log_text());
}

#[test]
fn max_rules_stops_early_and_is_logged() {
    let corpus = random(3, 30);
    let mut cfg = config(corpus.schema());
    cfg.max_rules = Some(2);
    let training = train(&corpus, &cfg).unwrap();
    assert_eq!(training.model.rules.len(), 2);
    assert_eq!(training.stop, StopReason::MaxRules);
    assert!(training.log_text().ends_with("# stopped: max_rules reached\n"));
}

#[test]
fn log_line_shape() {
    let training = train(&can_fixture(), &config(&word_pos())).unwrap();
    let line = training.log_text();
    let fields: Vec<&str> = line.trim_end().split('\t').collect();
    assert_eq!(fields.len(), 4);
    assert_eq!(fields[0], "1");
    assert_eq!(fields[2], "4");
    assert_eq!(fields[3], "pos:1.000000");
}

#[test]
fn sequential_single_task_matches_joint() {
    let corpus = random(6, 30);
    let text = crate::corpus::write_column_corpus(&corpus, crate::corpus::Layer::Gold).unwrap();
    let single = Schema::new(&["word", "t1", "t2"], &["t1"]).unwrap();
    let corpus = read_column_str(&text, &single).unwrap();
    let mut cfg = config(&single);
    let joint = train(&corpus, &cfg).unwrap();
    cfg.mode = Mode::Sequential(vec!["t1".into()]);
    let seq = train(&corpus, &cfg).unwrap();
    assert_eq!(joint.model.to_text(), seq.model.to_text());
}

#[test]
fn sequential_phases_respect_order() {
    let corpus = random(7, 40);
    let mut cfg = config(corpus.schema());
    cfg.mode = Mode::Sequential(vec!["t2".into(), "t1".into()]);
    let training = train(&corpus, &cfg).unwrap();
    let phases = &training.model.phases;
    assert_eq!(phases.len(), 2);
    assert_eq!((phases[0].task.as_str(), phases[0].start), ("t2", 0));
    assert_eq!(phases[1].task, "t1");
    let split = phases[1].start;
    for rule in &training.model.rules[..split] {
        assert_eq!(rule.target, "t2");
        assert!(rule.conditions.iter().all(|c| c.stream != "t1"));
    }
    for rule in &training.model.rules[split..] {
        assert_eq!(rule.target, "t1");
    }
    assert!(training.model.to_text().contains("# phase t2\n"));

    cfg.mode = Mode::Sequential(vec!["t1".into()]);
    assert!(matches!(train(&corpus, &cfg), Err(Error::Config(_))));
}

#[test]
fn independent_tasks_learn_same_rules_jointly_or_sequentially() {
    // t2 copies a property of the word alone; no template crosses tasks
    let schema = Schema::new(&["word", "t1", "t2"], &["t1", "t2"]).unwrap();
    let base = random(8, 40);
    let mut text = String::new();
    for (s, sentence) in base.sentences().iter().enumerate() {
        for p in 0..sentence.len() {
            let w = base.value(s, 0, p, crate::corpus::Layer::Gold);
            let t1 = base.value(s, 1, p, crate::corpus::Layer::Gold);
            let t2 = base.value(s, 2, p, crate::corpus::Layer::Gold);
            text.push_str(&format!("{w} {t1} {t2}\n"));
        }
        text.push('\n');
    }
    let corpus = read_column_str(&text, &schema).unwrap();
    let templates: Vec<Template> = default_templates(&schema, DEFAULT_OFFSET_BOUND)
        .into_iter()
        .filter(|t| {
            t.slots()
                .iter()
                .all(|s| s.stream == "word" || s.stream == t.target())
        })
        .collect();
    let mut cfg = TrainConfig::new(templates);
    cfg.cross_check = false;
    cfg.init_keys = Some(InitKeys::new(vec![
        ("t1".into(), "word".into()),
        ("t2".into(), "word".into()),
    ]));
    let mut joint: Vec<String> = train(&corpus, &cfg)
        .unwrap()
        .model
        .rules
        .iter()
        .map(Rule::to_string)
        .collect();
    cfg.mode = Mode::Sequential(vec!["t1".into(), "t2".into()]);
    let mut seq: Vec<String> = train(&corpus, &cfg)
        .unwrap()
        .model
        .rules
        .iter()
        .map(Rule::to_string)
        .collect();
    assert!(!joint.is_empty());
    joint.sort();
    seq.sort();
    assert_eq!(joint, seq);
}

#[test]
fn scaled_threshold_rounds_up() {
    let schema = word_pos().with_weight("pos", Rational64::new(1, 2)).unwrap();
    let weights = Weights::new(&schema);
    assert_eq!(weights.unit, 2);
    assert_eq!(weights.threshold(Rational64::new(3, 4)), 2);
    assert_eq!(weights.to_rational(3), Rational64::new(3, 2));
    assert_eq!(lcm(4, 6), 12);
}
