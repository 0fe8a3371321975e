//! Seeded synthetic corpora.
//!
//! [`synth_corpus`] builds a two-task corpus (`word a b`) whose tags are
//! cross-dependent. A sentence is a sequence of units drawn independently:
//!
//! | unit      | prob | tokens |
//! |-----------|------|--------|
//! | filler    | 0.50 | `f`    |
//! | `Y Z`     | 0.15 | 2      |
//! | `X Y Z`   | 0.20 | 3      |
//! | `W X Y Z` | 0.15 | 4      |
//!
//! * filler words have a fixed `a` tag in `F1..F3` and `b = O`;
//! * Z words have a fixed `a` in `{P, Q}` (half of the Z vocabulary each)
//!   and `b = K`;
//! * Y words have `a = Y` and a fixed group bit `g` (half the Y vocabulary
//!   each); `b = G1` if (`a` of the next Z is `P`) xor `g`, else `G2`;
//! * X words have `a = T1` if the `b` of the next Y is `G1`, else `T2`,
//!   and `b = O`;
//! * W words have `a = V` and `b = H1` if the `a` of the next X is `T1`,
//!   else `H2`.
//!
//! So task `a` of X is undetermined by the words (both values equally
//! likely for every X word) but fixed by the `b` tag of its right
//! neighbour, and task `b` of Y and W is fixed by `a` tags of neighbours.
//! An expected 2 tokens per unit, 0.35 of them X, gives X a token mass of
//! 0.175: a learner that never sees `b` cannot beat `1 - 0.175 * 0.5` on
//! task `a` without noise.
//!
//! Noise replaces each gold tag independently, with probability `noise`,
//! by a different tag of the same task drawn uniformly.
//!
//! [`random_corpus`] builds loosely structured two-task corpora of
//! arbitrary size, used for scorer equivalence tests.

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{Corpus, Schema};
use crate::error::{Error, Result};

pub const SYNTH_STREAMS: [&str; 3] = ["word", "a", "b"];
pub const SYNTH_TASKS: [&str; 2] = ["a", "b"];

const A_TAGS: [&str; 9] = ["F1", "F2", "F3", "P", "Q", "Y", "T1", "T2", "V"];
const B_TAGS: [&str; 6] = ["O", "K", "G1", "G2", "H1", "H2"];

const FILLERS: usize = 30;
const ZS: usize = 10;
const YS: usize = 10;
const XS: usize = 8;
const WS: usize = 6;

/// Expected fraction of X tokens.
pub const X_MASS: f64 = 0.35 / 2.0;

/// Best task-`a` accuracy reachable without access to task `b`, noise 0.
pub fn a_only_ceiling() -> f64 {
    1.0 - X_MASS * 0.5
}

#[derive(Clone, Debug)]
pub struct SynthConfig {
    pub sentences: usize,
    pub noise: f64,
    pub seed: u64,
    /// Units per sentence, inclusive range.
    pub units: (usize, usize),
}

impl SynthConfig {
    pub fn new(sentences: usize, noise: f64, seed: u64) -> SynthConfig {
        SynthConfig {
            sentences,
            noise,
            seed,
            units: (3, 7),
        }
    }
}

/// Generated corpus before and after noise; gold layers only.
#[derive(Clone, Debug)]
pub struct Synth {
    pub clean: Corpus,
    pub noisy: Corpus,
}

pub fn synth_schema() -> Schema {
    Schema::new(&SYNTH_STREAMS, &SYNTH_TASKS).expect("valid schema")
}

type Row = [String; 3];

fn push_unit(rng: &mut ChaCha8Rng, rows: &mut Vec<Row>) {
    let word = |kind: char, i: usize| format!("{kind}{i}");
    let roll: f64 = rng.random();
    if roll < 0.5 {
        let f = rng.random_range(0..FILLERS);
        rows.push([word('f', f), A_TAGS[f % 3].to_owned(), "O".to_owned()]);
        return;
    }
    let z = rng.random_range(0..ZS);
    let z_is_p = z % 2 == 0;
    let y = rng.random_range(0..YS);
    let g = y % 2 == 1;
    let y_g1 = z_is_p != g;
    let mut unit = vec![
        [word('y', y), "Y".to_owned(), if y_g1 { "G1" } else { "G2" }.to_owned()],
        [word('z', z), if z_is_p { "P" } else { "Q" }.to_owned(), "K".to_owned()],
    ];
    if roll >= 0.65 {
        let x = rng.random_range(0..XS);
        unit.insert(0, [word('x', x), if y_g1 { "T1" } else { "T2" }.to_owned(), "O".to_owned()]);
        if roll >= 0.85 {
            let w = rng.random_range(0..WS);
            unit.insert(0, [word('w', w), "V".to_owned(), if y_g1 { "H1" } else { "H2" }.to_owned()]);
        }
    }
    rows.extend(unit);
}

fn corrupt(rng: &mut ChaCha8Rng, tag: &str, alphabet: &[&str]) -> String {
    let others: Vec<&str> = alphabet.iter().copied().filter(|t| *t != tag).collect();
    others[rng.random_range(0..others.len())].to_owned()
}

/// Generates the cross-dependent corpus described in the module docs.
pub fn synth_corpus(config: &SynthConfig) -> Result<Synth> {
    if config.sentences == 0 {
        return Err(Error::InvalidArgument("sentence count must be positive".into()));
    }
    if !(0.0..=1.0).contains(&config.noise) {
        return Err(Error::InvalidArgument(format!("noise {} outside [0, 1]", config.noise)));
    }
    let (lo, hi) = config.units;
    if lo == 0 || hi < lo {
        return Err(Error::InvalidArgument("units per sentence must be a non-empty positive range".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let schema = synth_schema();
    let mut clean = Corpus::new(schema.clone());
    let mut noisy = Corpus::new(schema);
    for _ in 0..config.sentences {
        let mut rows: Vec<Row> = Vec::new();
        for _ in 0..rng.random_range(lo..=hi) {
            push_unit(&mut rng, &mut rows);
        }
        let mut corrupted = rows.clone();
        for row in &mut corrupted {
            if rng.random_bool(config.noise) {
                row[1] = corrupt(&mut rng, &row[1], &A_TAGS);
            }
            if rng.random_bool(config.noise) {
                row[2] = corrupt(&mut rng, &row[2], &B_TAGS);
            }
        }
        let to_vecs = |rows: &[Row]| -> Vec<Vec<String>> { rows.iter().map(|r| r.to_vec()).collect() };
        clean.push_sentence(&to_vecs(&rows))?;
        noisy.push_sentence(&to_vecs(&corrupted))?;
    }
    Ok(Synth { clean, noisy })
}

/// Parameters of [`random_corpus`].
#[derive(Clone, Debug)]
pub struct RandomConfig {
    pub sentences: usize,
    pub vocab: usize,
    pub tags: [usize; 2],
    pub noise: f64,
    pub seed: u64,
}

/// Two-task corpus (`word t1 t2`) with some learnable structure: each word
/// has a main `t1` tag and, for about a third of the vocabulary, a second
/// tag used after an odd-numbered `t1` tag; `t2` is a function of the
/// current and previous `t1` tags. Every gold tag is then replaced by a
/// random one with probability `noise`.
pub fn random_corpus(config: &RandomConfig) -> Result<Corpus> {
    let [k1, k2] = config.tags;
    if config.sentences == 0 || config.vocab == 0 || k1 == 0 || k2 == 0 {
        return Err(Error::InvalidArgument("random corpus sizes must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let main: Vec<usize> = (0..config.vocab).map(|_| rng.random_range(0..k1)).collect();
    let second: Vec<Option<usize>> = (0..config.vocab)
        .map(|_| rng.random_bool(1.0 / 3.0).then(|| rng.random_range(0..k1)))
        .collect();
    let mut corpus = Corpus::new(Schema::new(&["word", "t1", "t2"], &["t1", "t2"])?);
    for _ in 0..config.sentences {
        let len = rng.random_range(4..=15);
        let mut rows = Vec::with_capacity(len);
        let mut prev: Option<usize> = None;
        for _ in 0..len {
            let w = rng.random_range(0..config.vocab);
            let mut t1 = match (second[w], prev) {
                (Some(alt), Some(p)) if p % 2 == 1 => alt,
                _ => main[w],
            };
            let mut t2 = (t1 + prev.map_or(0, |p| p + 1)) % k2;
            prev = Some(t1);
            if rng.random_bool(config.noise) {
                t1 = rng.random_range(0..k1);
            }
            if rng.random_bool(config.noise) {
                t2 = rng.random_range(0..k2);
            }
            rows.push(vec![format!("w{w}"), format!("T{t1}"), format!("C{t2}")]);
        }
        corpus.push_sentence(&rows)?;
    }
    Ok(corpus)
}
