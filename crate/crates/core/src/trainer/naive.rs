//! Recount-everything scorer.

use std::collections::HashMap;

use rayon::prelude::*;

use super::{break_ties, Candidate, ContextCounts, Prepared, Scorer};
use crate::corpus::Corpus;
use crate::engine::{apply_compiled, Changes};
use crate::error::Result;
use crate::templates::{CompiledRule, ContextKey, Rule};

pub(crate) struct NaiveScorer {
    prepared: Vec<Prepared>,
}

impl NaiveScorer {
    pub fn new(prepared: Vec<Prepared>) -> NaiveScorer {
        NaiveScorer { prepared }
    }

    /// Counts for every context seen at an error position of `template`.
    fn count(&self, template: usize, corpus: &Corpus) -> HashMap<ContextKey, ContextCounts> {
        let compiled = &self.prepared[template].compiled;
        let t = compiled.target;
        let mut table: HashMap<ContextKey, ContextCounts> = HashMap::new();
        for sentence in corpus.sentences() {
            let (current, gold) = (sentence.current(t), sentence.gold(t));
            for p in 0..sentence.len() {
                if current[p] != gold[p] {
                    compiled.for_each_context(sentence, p, |key| {
                        table.entry(key.into()).or_default().record(current[p], gold[p], 1);
                    });
                }
            }
        }
        for sentence in corpus.sentences() {
            let (current, gold) = (sentence.current(t), sentence.gold(t));
            for p in 0..sentence.len() {
                if current[p] == gold[p] {
                    compiled.for_each_context(sentence, p, |key| {
                        if let Some(counts) = table.get_mut(key) {
                            counts.record(current[p], gold[p], 1);
                        }
                    });
                }
            }
        }
        table
    }

    /// Best score of one template and every candidate reaching it.
    fn template_best(&self, template: usize, corpus: &Corpus, min: i64) -> Option<(i64, Vec<Candidate>)> {
        let weight = self.prepared[template].weight;
        let mut best: Option<(i64, Vec<Candidate>)> = None;
        for (key, counts) in self.count(template, corpus) {
            for &(value, _) in &counts.good_by {
                let score = counts.score(weight, value);
                if score < min {
                    continue;
                }
                let candidate = Candidate {
                    template,
                    key: key.clone(),
                    value,
                };
                match &mut best {
                    Some((s, tied)) if *s == score => tied.push(candidate),
                    Some((s, _)) if *s > score => {}
                    _ => best = Some((score, vec![candidate])),
                }
            }
        }
        best
    }
}

impl Scorer for NaiveScorer {
    fn best(&mut self, corpus: &Corpus, min: i64) -> Result<Option<(Rule, i64)>> {
        let per_template: Vec<(i64, Vec<Candidate>)> = (0..self.prepared.len())
            .into_par_iter()
            .filter_map(|t| self.template_best(t, corpus, min))
            .collect();
        let Some(top) = per_template.iter().map(|(s, _)| *s).max() else {
            return Ok(None);
        };
        let tied: Vec<Candidate> = per_template
            .into_iter()
            .filter(|(s, _)| *s == top)
            .flat_map(|(_, c)| c)
            .collect();
        Ok(break_ties(tied, &self.prepared, corpus).map(|(rule, _)| (rule, top)))
    }

    fn apply(&mut self, corpus: &mut Corpus, rule: &CompiledRule) -> Changes {
        apply_compiled(rule, corpus)
    }
}
