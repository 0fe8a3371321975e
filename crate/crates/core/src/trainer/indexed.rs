//! Incrementally maintained per-template context counts.

use std::cmp::Reverse;
use std::collections::{BTreeSet, HashMap};

use rayon::prelude::*;
use smallvec::SmallVec;

use super::{break_ties, pending_changes, Candidate, ContextCounts, Prepared, Scorer};
use crate::corpus::{Corpus, Sentence, Sym};
use crate::engine::Changes;
use crate::error::Result;
use crate::templates::{CompiledRule, ContextKey, Rule};

/// Order-independent form of a context's counts: total correct, then
/// sorted `correct_by` and `good_by`.
type NormalizedCounts = (u32, Vec<(Sym, u32)>, Vec<(Sym, u32)>);

#[derive(Default)]
struct Board {
    ids: HashMap<ContextKey, u32>,
    keys: Vec<ContextKey>,
    stats: Vec<ContextCounts>,
    /// Entries currently in `ranked` for each context.
    listed: Vec<SmallVec<[(i64, Sym); 2]>>,
    ranked: BTreeSet<(Reverse<i64>, u32, Sym)>,
    dirty: Vec<u32>,
    is_dirty: Vec<bool>,
    /// Positions touched by the pending update, per sentence.
    touched: Vec<(usize, Vec<usize>)>,
}

impl Board {
    fn id(&mut self, key: &[Sym]) -> u32 {
        if let Some(&id) = self.ids.get(key) {
            return id;
        }
        let id = self.keys.len() as u32;
        self.ids.insert(key.into(), id);
        self.keys.push(key.into());
        self.stats.push(ContextCounts::default());
        self.listed.push(SmallVec::new());
        self.is_dirty.push(false);
        id
    }

    fn contribute(&mut self, prepared: &Prepared, sentence: &Sentence, p: usize, delta: i32) {
        let t = prepared.compiled.target;
        let (current, gold) = (sentence.current(t)[p], sentence.gold(t)[p]);
        prepared.compiled.for_each_context(sentence, p, |key| {
            let id = self.id(key);
            self.stats[id as usize].record(current, gold, delta);
            if !self.is_dirty[id as usize] {
                self.is_dirty[id as usize] = true;
                self.dirty.push(id);
            }
        });
    }

    fn refresh(&mut self, weight: i64) {
        for id in std::mem::take(&mut self.dirty) {
            let i = id as usize;
            self.is_dirty[i] = false;
            for (score, v) in self.listed[i].drain(..) {
                self.ranked.remove(&(Reverse(score), id, v));
            }
            let counts = &self.stats[i];
            for &(v, _) in &counts.good_by {
                let score = counts.score(weight, v);
                if score > 0 {
                    self.listed[i].push((score, v));
                    self.ranked.insert((Reverse(score), id, v));
                }
            }
        }
    }

    fn build(prepared: &Prepared, corpus: &Corpus) -> Board {
        let mut board = Board::default();
        for sentence in corpus.sentences() {
            for p in 0..sentence.len() {
                board.contribute(prepared, sentence, p, 1);
            }
        }
        board.refresh(prepared.weight);
        board
    }

    fn top(&self) -> Option<i64> {
        self.ranked.first().map(|(Reverse(s), _, _)| *s)
    }

    fn retract(&mut self, prepared: &Prepared, corpus: &Corpus, stream: usize, changes: &Changes) {
        let mut touched = Vec::with_capacity(changes.len());
        for (s, positions) in changes {
            let sentence = &corpus.sentences()[*s];
            let mut qs = Vec::new();
            for &(p, _) in positions {
                prepared.footprint(stream, p, sentence.len(), &mut qs);
            }
            qs.sort_unstable();
            qs.dedup();
            for &q in &qs {
                self.contribute(prepared, sentence, q, -1);
            }
            touched.push((*s, qs));
        }
        self.touched = touched;
    }

    fn restore(&mut self, prepared: &Prepared, corpus: &Corpus) {
        for (s, qs) in std::mem::take(&mut self.touched) {
            let sentence = &corpus.sentences()[s];
            for q in qs {
                self.contribute(prepared, sentence, q, 1);
            }
        }
        self.refresh(prepared.weight);
    }

    /// Non-empty contexts with order-independent counts.
    fn normalized(&self) -> HashMap<ContextKey, NormalizedCounts> {
        self.keys
            .iter()
            .zip(&self.stats)
            .filter(|(_, c)| !c.is_empty())
            .map(|(k, c)| {
                let mut correct = c.correct_by.to_vec();
                let mut good = c.good_by.to_vec();
                correct.sort_unstable();
                good.sort_unstable();
                (k.clone(), (c.correct_total, correct, good))
            })
            .collect()
    }
}

/// One count table per template, updated around each applied rule by
/// retracting and re-adding only the tokens whose context or correctness
/// the rule can have changed.
pub(crate) struct ScoreBoard {
    prepared: Vec<Prepared>,
    boards: Vec<Board>,
}

impl ScoreBoard {
    pub fn new(prepared: Vec<Prepared>, corpus: &Corpus) -> ScoreBoard {
        let boards = prepared.par_iter().map(|p| Board::build(p, corpus)).collect();
        ScoreBoard { prepared, boards }
    }
}

impl Scorer for ScoreBoard {
    fn audit(&self, corpus: &Corpus) -> std::result::Result<(), String> {
        for (i, (prepared, board)) in self.prepared.iter().zip(&self.boards).enumerate() {
            let fresh = Board::build(prepared, corpus);
            if fresh.normalized() != board.normalized() {
                return Err(format!("counts of template {} drifted", prepared.template));
            }
            let ranked = |b: &Board| -> BTreeSet<(i64, ContextKey, Sym)> {
                b.ranked
                    .iter()
                    .map(|(Reverse(s), id, v)| (*s, b.keys[*id as usize].clone(), *v))
                    .collect()
            };
            if ranked(&fresh) != ranked(board) {
                return Err(format!("ranking of template {i} drifted"));
            }
        }
        Ok(())
    }

    fn best(&mut self, corpus: &Corpus, min: i64) -> Result<Option<(Rule, i64)>> {
        let Some(top) = self.boards.iter().filter_map(Board::top).max() else {
            return Ok(None);
        };
        if top < min {
            return Ok(None);
        }
        let mut tied = Vec::new();
        for (template, board) in self.boards.iter().enumerate() {
            for &(Reverse(score), id, value) in &board.ranked {
                if score != top {
                    break;
                }
                tied.push(Candidate {
                    template,
                    key: board.keys[id as usize].clone(),
                    value,
                });
            }
        }
        Ok(break_ties(tied, &self.prepared, corpus).map(|(rule, _)| (rule, top)))
    }

    fn apply(&mut self, corpus: &mut Corpus, rule: &CompiledRule) -> Changes {
        let changes = pending_changes(rule, corpus);
        {
            let snapshot: &Corpus = corpus;
            self.boards
                .par_iter_mut()
                .zip(&self.prepared)
                .for_each(|(board, prepared)| board.retract(prepared, snapshot, rule.target, &changes));
        }
        let sentences = corpus.sentences_mut();
        for (s, positions) in &changes {
            for &(p, _) in positions {
                sentences[*s].set_current(rule.target, p, rule.new_value);
            }
        }
        let snapshot: &Corpus = corpus;
        self.boards
            .par_iter_mut()
            .zip(&self.prepared)
            .for_each(|(board, prepared)| board.restore(prepared, snapshot));
        changes
    }
}
