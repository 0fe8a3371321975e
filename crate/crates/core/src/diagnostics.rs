//! Train/test drift of per-word tag distributions, and accuracy broken
//! down by that drift.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use num_rational::Rational64;

use crate::corpus::{check_aligned, Corpus, Layer};
use crate::error::{Error, Result};
use crate::eval::{chunk_prf, to_f64};
use crate::spans::decode_bio;

/// Add-λ constant used by [`build_conditionals`].
pub const SMOOTHING: f64 = 0.5;

/// `P(tag | key)` for one conditioning word.
#[derive(Clone, Debug, PartialEq)]
pub struct ConditionalDist {
    pub key: String,
    pub probs: BTreeMap<String, f64>,
}

impl ConditionalDist {
    /// Add-`lambda` estimate from raw counts over `alphabet`.
    pub fn smoothed(
        key: &str,
        counts: Option<&BTreeMap<String, u64>>,
        alphabet: &BTreeSet<String>,
        lambda: f64,
    ) -> ConditionalDist {
        let count = |tag: &String| counts.and_then(|c| c.get(tag)).copied().unwrap_or(0) as f64;
        let total: f64 = alphabet.iter().map(count).sum::<f64>() + lambda * alphabet.len() as f64;
        let probs = alphabet
            .iter()
            .map(|tag| (tag.clone(), (count(tag) + lambda) / total))
            .collect();
        ConditionalDist {
            key: key.to_owned(),
            probs,
        }
    }
}

/// `sum_c p(c) ln(p(c) / q(c))`, in nats. Terms with `p(c) = 0` vanish; a
/// zero in `q` where `p` is positive is an error.
///
/// Summed as `sum_c [p ln(p/q) - p + q]`, which equals the plain sum for
/// normalized inputs but has non-negative terms, so rounding cannot push
/// the total below zero.
pub fn kl_divergence(p: &ConditionalDist, q: &ConditionalDist) -> Result<f64> {
    let mut total = 0.0;
    for (tag, &pc) in &p.probs {
        let qc = q.probs.get(tag).copied().unwrap_or(0.0);
        if pc == 0.0 {
            total += qc;
            continue;
        }
        if qc <= 0.0 {
            return Err(Error::ZeroReference(tag.clone()));
        }
        total += (pc * (pc / qc).ln() - pc + qc).max(0.0);
    }
    for (tag, &qc) in &q.probs {
        if !p.probs.contains_key(tag) {
            total += qc;
        }
    }
    Ok(total)
}

/// Raw `(word, tag)` counts of `task` in `layer`, keyed on the first
/// static stream.
pub fn tag_counts(
    corpus: &Corpus,
    task: &str,
    layer: Layer,
) -> Result<BTreeMap<String, BTreeMap<String, u64>>> {
    let schema = corpus.schema();
    let stream = schema.index_of(task)?;
    let key = schema.features()[0];
    if layer == Layer::Current && !corpus.is_initialized(stream) {
        return Err(Error::Uninitialized(task.to_owned()));
    }
    let mut counts: BTreeMap<String, BTreeMap<String, u64>> = BTreeMap::new();
    for sentence in corpus.sentences() {
        for (&w, &t) in sentence.gold(key).iter().zip(sentence.layer(stream, layer)) {
            *counts
                .entry(corpus.symbols().resolve(w).to_owned())
                .or_default()
                .entry(corpus.symbols().resolve(t).to_owned())
                .or_default() += 1;
        }
    }
    Ok(counts)
}

/// Smoothed conditionals for every word in `counts` over `alphabet`.
pub fn build_conditionals(
    counts: &BTreeMap<String, BTreeMap<String, u64>>,
    alphabet: &BTreeSet<String>,
) -> BTreeMap<String, ConditionalDist> {
    counts
        .iter()
        .map(|(w, c)| (w.clone(), ConditionalDist::smoothed(w, Some(c), alphabet, SMOOTHING)))
        .collect()
}

/// One divergence class.
#[derive(Clone, Debug, PartialEq)]
pub struct Bucket {
    pub min: f64,
    pub max: f64,
    pub tokens: usize,
    /// Token accuracy per system.
    pub accuracy: Vec<Rational64>,
    /// Chunk F per system over chunks lying entirely inside the bucket;
    /// `None` for tasks that are not chunk-tagged.
    pub chunk_f: Vec<Option<Rational64>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DivergenceReport {
    pub task: String,
    pub systems: Vec<String>,
    /// Divergence of every test word, by word.
    pub words: BTreeMap<String, f64>,
    pub buckets: Vec<Bucket>,
}

impl DivergenceReport {
    pub fn table(&self) -> String {
        let mut out = format!("# task {}; KL divergence in nats (test || train)\n", self.task);
        out.push_str("bucket\tdivergence\ttokens");
        for s in &self.systems {
            let _ = write!(out, "\tacc:{s}");
        }
        for s in &self.systems {
            let _ = write!(out, "\tchunk_f:{s}");
        }
        out.push('\n');
        for (i, b) in self.buckets.iter().enumerate() {
            let _ = write!(out, "{}\t{:.4}-{:.4}\t{}", i + 1, b.min, b.max, b.tokens);
            for a in &b.accuracy {
                let _ = write!(out, "\t{:.4}", to_f64(*a));
            }
            for f in &b.chunk_f {
                match f {
                    Some(f) => {
                        let _ = write!(out, "\t{:.4}", to_f64(*f));
                    }
                    None => out.push_str("\t-"),
                }
            }
            out.push('\n');
        }
        out
    }
}

fn is_chunk_tagged(corpus: &Corpus, stream: usize) -> bool {
    corpus.sentences().iter().all(|s| {
        s.gold(stream).iter().all(|&v| {
            let t = corpus.symbols().resolve(v);
            t == "O" || t.starts_with("B-") || t.starts_with("I-")
        })
    })
}

/// Splits test tokens into `buckets` classes of equal token mass by the
/// divergence of their word, then scores each system on each class.
///
/// `train` and `test` supply the distributions from `layer` (the current
/// layer holds initial-state tags when the caller initialized them);
/// `systems` are test copies whose current layer holds system output.
pub fn divergence_report(
    train: &Corpus,
    test: &Corpus,
    task: &str,
    layer: Layer,
    systems: &[(&str, &Corpus)],
    buckets: usize,
) -> Result<DivergenceReport> {
    if buckets == 0 {
        return Err(Error::InvalidArgument("bucket count must be positive".into()));
    }
    if train.schema().streams() != test.schema().streams() {
        return Err(Error::SchemaMismatch("train and test declare different streams".into()));
    }
    let stream = test.schema().index_of(task)?;
    for (_, output) in systems {
        check_aligned(test, output)?;
        if !output.is_initialized(stream) {
            return Err(Error::Uninitialized(task.to_owned()));
        }
    }
    let train_counts = tag_counts(train, task, layer)?;
    let test_counts = tag_counts(test, task, layer)?;
    let alphabet: BTreeSet<String> = train_counts
        .values()
        .chain(test_counts.values())
        .flat_map(|c| c.keys().cloned())
        .collect();
    let train_dists = build_conditionals(&train_counts, &alphabet);
    let test_dists = build_conditionals(&test_counts, &alphabet);
    let mut words = BTreeMap::new();
    for (w, p) in &test_dists {
        let q = train_dists
            .get(w)
            .cloned()
            .unwrap_or_else(|| ConditionalDist::smoothed(w, None, &alphabet, SMOOTHING));
        words.insert(w.clone(), kl_divergence(p, &q)?);
    }

    // (divergence, word, sentence, position), total order
    let key = test.schema().features()[0];
    let mut tokens: Vec<(f64, &str, usize, usize)> = Vec::with_capacity(test.token_count());
    for (s, sentence) in test.sentences().iter().enumerate() {
        for (p, &w) in sentence.gold(key).iter().enumerate() {
            let word = test.symbols().resolve(w);
            tokens.push((words[word], word, s, p));
        }
    }
    tokens.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(b.1)).then((a.2, a.3).cmp(&(b.2, b.3))));

    let n = tokens.len();
    let mut member: Vec<Vec<usize>> = test.sentences().iter().map(|s| vec![0; s.len()]).collect();
    let mut ranges = Vec::with_capacity(buckets);
    for b in 0..buckets {
        let (lo, hi) = (b * n / buckets, (b + 1) * n / buckets);
        for &(_, _, s, p) in &tokens[lo..hi] {
            member[s][p] = b;
        }
        ranges.push((lo, hi));
    }

    let chunked = is_chunk_tagged(test, stream);
    let mut result = Vec::with_capacity(buckets);
    for (b, &(lo, hi)) in ranges.iter().enumerate() {
        let slice = &tokens[lo..hi];
        let mut bucket = Bucket {
            min: slice.first().map_or(0.0, |t| t.0),
            max: slice.last().map_or(0.0, |t| t.0),
            tokens: slice.len(),
            accuracy: Vec::new(),
            chunk_f: Vec::new(),
        };
        for (_, output) in systems {
            let correct = slice
                .iter()
                .filter(|&&(_, _, s, p)| {
                    let sentence = &output.sentences()[s];
                    output.symbols().resolve(sentence.current(stream)[p])
                        == test.symbols().resolve(test.sentences()[s].gold(stream)[p])
                })
                .count();
            bucket.accuracy.push(if slice.is_empty() {
                Rational64::from_integer(1)
            } else {
                Rational64::new(correct as i64, slice.len() as i64)
            });
            bucket.chunk_f.push(if chunked {
                Some(bucket_chunk_f(test, output, stream, &member, b)?)
            } else {
                None
            });
        }
        result.push(bucket);
    }
    Ok(DivergenceReport {
        task: task.to_owned(),
        systems: systems.iter().map(|(n, _)| (*n).to_owned()).collect(),
        words,
        buckets: result,
    })
}

fn bucket_chunk_f(
    test: &Corpus,
    output: &Corpus,
    stream: usize,
    member: &[Vec<usize>],
    bucket: usize,
) -> Result<Rational64> {
    let one = Rational64::from_integer(1);
    let mut total = crate::eval::Prf::from_counts(0, 0, 0, one)?;
    for (s, sentence) in test.sentences().iter().enumerate() {
        let strings = |c: &Corpus, layer| -> Vec<String> {
            c.sentences()[s]
                .layer(stream, layer)
                .iter()
                .map(|&v| c.symbols().resolve(v).to_owned())
                .collect()
        };
        let inside = |span: &crate::spans::Span| (span.start..=span.end).all(|p| member[s][p] == bucket);
        let mut gold = decode_bio(&strings(test, Layer::Gold))?;
        let mut predicted = decode_bio(&strings(output, Layer::Current))?;
        gold.retain(inside);
        predicted.retain(inside);
        debug_assert!(sentence.len() == member[s].len());
        total = total.merge(&chunk_prf(&predicted, &gold, one)?);
    }
    Ok(total.f())
}
