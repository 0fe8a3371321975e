//! Multi-stream annotated corpora and the whitespace-separated column format.
//!
//! Every token carries one value per declared stream. Static streams (the
//! word or character surface, fixed features) hold a single value; task
//! streams hold a gold value read from the file and a current value that
//! only the initial-state generator and rule application may write.

use std::collections::HashMap;
use std::fmt::Write as _;

use num_rational::Rational64;

use crate::error::{Error, Result};

/// Value seen by rule conditions that look past either end of a sentence.
pub const OUT_OF_BOUNDS: &str = "_OOB_";

/// Interned stream value.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Sym(pub(crate) u32);

impl Sym {
    /// The reserved boundary value, always interned first.
    pub const OOB: Sym = Sym(0);
    /// Marker for a current task tag that has not been assigned yet.
    pub const UNSET: Sym = Sym(u32::MAX);

    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// String interner shared by all streams of a corpus.
#[derive(Clone, Debug)]
pub struct Symbols {
    names: Vec<String>,
    ids: HashMap<String, Sym>,
}

impl Default for Symbols {
    fn default() -> Self {
        let mut symbols = Symbols {
            names: Vec::new(),
            ids: HashMap::new(),
        };
        symbols.intern(OUT_OF_BOUNDS);
        symbols
    }
}

impl Symbols {
    pub fn intern(&mut self, value: &str) -> Sym {
        if let Some(&sym) = self.ids.get(value) {
            return sym;
        }
        let sym = Sym(self.names.len() as u32);
        self.names.push(value.to_owned());
        self.ids.insert(value.to_owned(), sym);
        sym
    }

    pub fn get(&self, value: &str) -> Option<Sym> {
        self.ids.get(value).copied()
    }

    /// Panics on [`Sym::UNSET`].
    pub fn resolve(&self, sym: Sym) -> &str {
        &self.names[sym.index()]
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StreamDecl {
    pub name: String,
    pub task: bool,
}

/// Stream layout of a corpus: names, which streams are tasks, task weights.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Schema {
    streams: Vec<StreamDecl>,
    weights: Vec<Option<Rational64>>,
}

pub(crate) fn validate_stream_name(name: &str) -> Result<()> {
    if name.is_empty() {
        return Err(Error::Schema("empty stream name".into()));
    }
    if name.starts_with('#')
        || name
            .chars()
            .any(|c| c.is_whitespace() || matches!(c, '[' | ']' | '=' | ',' | '>'))
    {
        return Err(Error::Schema(format!("illegal stream name `{name}`")));
    }
    Ok(())
}

impl Schema {
    /// Builds a schema from stream names in column order; `tasks` names the
    /// predicted streams, all of which start with weight 1.
    pub fn new(streams: &[&str], tasks: &[&str]) -> Result<Schema> {
        for (i, name) in streams.iter().enumerate() {
            validate_stream_name(name)?;
            if streams[..i].contains(name) {
                return Err(Error::Schema(format!("duplicate stream `{name}`")));
            }
        }
        for task in tasks {
            if !streams.contains(task) {
                return Err(Error::Schema(format!("task `{task}` is not a stream")));
            }
        }
        let decls: Vec<StreamDecl> = streams
            .iter()
            .map(|name| StreamDecl {
                name: (*name).to_owned(),
                task: tasks.contains(name),
            })
            .collect();
        if !decls.iter().any(|d| d.task) {
            return Err(Error::Schema("no task stream declared".into()));
        }
        if decls.iter().all(|d| d.task) {
            return Err(Error::Schema("no static feature stream declared".into()));
        }
        let weights = decls
            .iter()
            .map(|d| d.task.then(|| Rational64::from_integer(1)))
            .collect();
        Ok(Schema {
            streams: decls,
            weights,
        })
    }

    pub fn with_weight(mut self, task: &str, weight: Rational64) -> Result<Schema> {
        let idx = self.index_of(task)?;
        if !self.streams[idx].task {
            return Err(Error::Schema(format!("`{task}` is not a task stream")));
        }
        if weight < Rational64::from_integer(0) {
            return Err(Error::Schema(format!("negative weight for `{task}`")));
        }
        self.weights[idx] = Some(weight);
        Ok(self)
    }

    pub fn streams(&self) -> &[StreamDecl] {
        &self.streams
    }

    pub fn len(&self) -> usize {
        self.streams.len()
    }

    pub fn is_empty(&self) -> bool {
        self.streams.is_empty()
    }

    pub fn name(&self, idx: usize) -> &str {
        &self.streams[idx].name
    }

    pub fn index(&self, name: &str) -> Option<usize> {
        self.streams.iter().position(|d| d.name == name)
    }

    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.index(name)
            .ok_or_else(|| Error::UnknownStream(name.to_owned()))
    }

    pub fn is_task(&self, idx: usize) -> bool {
        self.streams[idx].task
    }

    /// Indices of task streams in declaration order.
    pub fn tasks(&self) -> Vec<usize> {
        (0..self.streams.len()).filter(|&i| self.is_task(i)).collect()
    }

    /// Indices of static streams in declaration order.
    pub fn features(&self) -> Vec<usize> {
        (0..self.streams.len())
            .filter(|&i| !self.is_task(i))
            .collect()
    }

    /// Weight of a task stream; `None` for static streams.
    pub fn weight(&self, idx: usize) -> Option<Rational64> {
        self.weights[idx]
    }
}

/// Which tag layer of a task stream to read or write.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Layer {
    Gold,
    Current,
}

/// One sentence, stored column-wise: `values[stream][position]`.
///
/// For static streams `values` and `gold` hold the same data. For task
/// streams `values` is the current tag, [`Sym::UNSET`] until initialized.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Sentence {
    pub(crate) values: Vec<Vec<Sym>>,
    pub(crate) gold: Vec<Vec<Sym>>,
}

impl Sentence {
    pub fn len(&self) -> usize {
        self.values.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Current values of a stream.
    pub fn current(&self, stream: usize) -> &[Sym] {
        &self.values[stream]
    }

    pub fn gold(&self, stream: usize) -> &[Sym] {
        &self.gold[stream]
    }

    pub fn layer(&self, stream: usize, layer: Layer) -> &[Sym] {
        match layer {
            Layer::Gold => &self.gold[stream],
            Layer::Current => &self.values[stream],
        }
    }

    /// Current value at a possibly out-of-range position.
    #[inline]
    pub fn at(&self, stream: usize, position: isize) -> Sym {
        let column = &self.values[stream];
        if position < 0 || position as usize >= column.len() {
            Sym::OOB
        } else {
            column[position as usize]
        }
    }

    pub(crate) fn set_current(&mut self, stream: usize, position: usize, value: Sym) {
        self.values[stream][position] = value;
    }
}

#[derive(Clone, Debug)]
pub struct Corpus {
    schema: Schema,
    symbols: Symbols,
    sentences: Vec<Sentence>,
}

impl Corpus {
    pub fn new(schema: Schema) -> Corpus {
        Corpus {
            schema,
            symbols: Symbols::default(),
            sentences: Vec::new(),
        }
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn symbols(&self) -> &Symbols {
        &self.symbols
    }

    pub(crate) fn symbols_mut(&mut self) -> &mut Symbols {
        &mut self.symbols
    }

    pub fn sentences(&self) -> &[Sentence] {
        &self.sentences
    }

    pub(crate) fn sentences_mut(&mut self) -> &mut [Sentence] {
        &mut self.sentences
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    pub fn token_count(&self) -> usize {
        self.sentences.iter().map(Sentence::len).sum()
    }

    /// Appends a sentence given as rows of per-stream gold values.
    /// Task streams start uninitialized.
    pub fn push_sentence<S: AsRef<str>>(&mut self, rows: &[Vec<S>]) -> Result<()> {
        self.push_rows(rows, 0)
    }

    fn push_rows<S: AsRef<str>>(&mut self, rows: &[Vec<S>], first_line: usize) -> Result<()> {
        if rows.is_empty() {
            return Ok(());
        }
        let width = self.schema.len();
        let mut gold = vec![Vec::with_capacity(rows.len()); width];
        for (i, row) in rows.iter().enumerate() {
            let line = first_line + i;
            if row.len() != width {
                return Err(Error::corpus(
                    line,
                    format!("expected {width} columns, found {}", row.len()),
                ));
            }
            for (stream, value) in row.iter().enumerate() {
                let value = value.as_ref();
                if value.is_empty() {
                    return Err(Error::corpus(line, "empty value"));
                }
                if value == OUT_OF_BOUNDS {
                    return Err(Error::corpus(
                        line,
                        format!("reserved value `{OUT_OF_BOUNDS}` in input"),
                    ));
                }
                gold[stream].push(self.symbols.intern(value));
            }
        }
        let values = gold
            .iter()
            .enumerate()
            .map(|(stream, column)| {
                if self.schema.is_task(stream) {
                    vec![Sym::UNSET; column.len()]
                } else {
                    column.clone()
                }
            })
            .collect();
        self.sentences.push(Sentence { values, gold });
        Ok(())
    }

    /// String form of one value.
    pub fn value(&self, sentence: usize, stream: usize, position: usize, layer: Layer) -> &str {
        let sym = self.sentences[sentence].layer(stream, layer)[position];
        if sym == Sym::UNSET {
            ""
        } else {
            self.symbols.resolve(sym)
        }
    }

    pub fn is_initialized(&self, stream: usize) -> bool {
        self.sentences
            .iter()
            .all(|s| s.values[stream].iter().all(|&v| v != Sym::UNSET))
    }

    /// Resets every task stream's current tags to the uninitialized state.
    pub fn clear_current(&mut self) {
        for stream in self.schema.tasks() {
            for sentence in &mut self.sentences {
                sentence.values[stream].fill(Sym::UNSET);
            }
        }
    }

    /// Copies gold into current for every task stream. Only meant for tests
    /// and for evaluating an existing annotation against itself.
    pub fn copy_gold_to_current(&mut self) {
        for stream in self.schema.tasks() {
            for sentence in &mut self.sentences {
                sentence.values[stream] = sentence.gold[stream].clone();
            }
        }
    }

    /// Sets the current layer of `self` from the gold layer of `other`, which
    /// must hold the same tokens (same static values) and the same schema.
    pub fn set_current_from_gold_of(&mut self, other: &Corpus) -> Result<()> {
        check_aligned(self, other)?;
        for stream in self.schema.tasks() {
            for (mine, theirs) in self.sentences.iter_mut().zip(&other.sentences) {
                for (slot, &sym) in mine.values[stream].iter_mut().zip(&theirs.gold[stream]) {
                    *slot = self.symbols.intern(other.symbols.resolve(sym));
                }
            }
        }
        Ok(())
    }

    /// Rows of string values for one layer (testing and comparison helper).
    pub fn layer_strings(&self, layer: Layer) -> Vec<Vec<Vec<String>>> {
        self.sentences
            .iter()
            .enumerate()
            .map(|(si, s)| {
                (0..s.len())
                    .map(|p| {
                        (0..self.schema.len())
                            .map(|stream| self.value(si, stream, p, layer).to_owned())
                            .collect()
                    })
                    .collect()
            })
            .collect()
    }
}

/// Checks that two corpora have identical schemas, sentence lengths and
/// static stream values.
pub fn check_aligned(a: &Corpus, b: &Corpus) -> Result<()> {
    if a.schema.streams != b.schema.streams {
        return Err(Error::SchemaMismatch(
            "corpora declare different streams".into(),
        ));
    }
    if a.len() != b.len() {
        return Err(Error::Misaligned(format!(
            "{} vs {} sentences",
            a.len(),
            b.len()
        )));
    }
    for (i, (sa, sb)) in a.sentences.iter().zip(&b.sentences).enumerate() {
        if sa.len() != sb.len() {
            return Err(Error::Misaligned(format!(
                "sentence {} has {} vs {} tokens",
                i + 1,
                sa.len(),
                sb.len()
            )));
        }
        for stream in a.schema.features() {
            for (p, (&x, &y)) in sa.gold[stream].iter().zip(&sb.gold[stream]).enumerate() {
                if a.symbols.resolve(x) != b.symbols.resolve(y) {
                    return Err(Error::Misaligned(format!(
                        "sentence {}, token {}: `{}` vs `{}`",
                        i + 1,
                        p + 1,
                        a.symbols.resolve(x),
                        b.symbols.resolve(y)
                    )));
                }
            }
        }
    }
    Ok(())
}

/// Reads a column corpus from raw bytes.
pub fn read_column_corpus(source: &[u8], schema: &Schema) -> Result<Corpus> {
    let text = std::str::from_utf8(source).map_err(|_| Error::NotUtf8)?;
    read_column_str(text, schema)
}

pub fn read_column_str(text: &str, schema: &Schema) -> Result<Corpus> {
    let mut corpus = Corpus::new(schema.clone());
    let mut rows: Vec<Vec<&str>> = Vec::new();
    let mut first_line = 1;
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let columns: Vec<&str> = line
            .split([' ', '\t', '\r'])
            .filter(|c| !c.is_empty())
            .collect();
        if columns.is_empty() {
            corpus.push_rows(&rows, first_line)?;
            rows.clear();
            continue;
        }
        if rows.is_empty() {
            first_line = line_no;
        }
        if columns.len() != schema.len() {
            return Err(Error::corpus(
                line_no,
                format!(
                    "expected {} columns, found {}",
                    schema.len(),
                    columns.len()
                ),
            ));
        }
        rows.push(columns);
    }
    corpus.push_rows(&rows, first_line)?;
    Ok(corpus)
}

/// Writes one layer in column format: single-space separators, a blank line
/// after every sentence. Static streams are written as-is in both layers.
pub fn write_column_corpus(corpus: &Corpus, layer: Layer) -> Result<String> {
    if layer == Layer::Current {
        for stream in corpus.schema.tasks() {
            if !corpus.is_initialized(stream) {
                return Err(Error::Uninitialized(corpus.schema.name(stream).to_owned()));
            }
        }
    }
    let mut out = String::new();
    for (si, sentence) in corpus.sentences.iter().enumerate() {
        for p in 0..sentence.len() {
            for stream in 0..corpus.schema.len() {
                if stream > 0 {
                    out.push(' ');
                }
                out.push_str(corpus.value(si, stream, p, layer));
            }
            out.push('\n');
        }
        out.push('\n');
    }
    Ok(out)
}

/// Splits a word-level `(word, pos)` corpus into one token per character,
/// adding a `seg` task with `B` on each word's first character and `I`
/// elsewhere. Character means Unicode scalar value.
pub fn explode_to_characters(corpus: &Corpus) -> Result<Corpus> {
    let schema = corpus.schema();
    let word = schema.index_of("word")?;
    let pos = schema.index_of("pos")?;
    if schema.len() != 2 || schema.is_task(word) || !schema.is_task(pos) {
        return Err(Error::Schema(
            "character explosion expects streams (word, pos) with pos as the task".into(),
        ));
    }
    let mut out = Corpus::new(Schema::new(&["char", "seg", "pos"], &["seg", "pos"])?.with_weight(
        "pos",
        schema.weight(pos).unwrap_or_else(|| Rational64::from_integer(1)),
    )?);
    for (si, sentence) in corpus.sentences.iter().enumerate() {
        let mut rows: Vec<Vec<String>> = Vec::new();
        for p in 0..sentence.len() {
            let surface = corpus.value(si, word, p, Layer::Gold);
            let tag = corpus.value(si, pos, p, Layer::Gold);
            for (k, ch) in surface.chars().enumerate() {
                let seg = if k == 0 { "B" } else { "I" };
                rows.push(vec![ch.to_string(), seg.to_owned(), tag.to_owned()]);
            }
        }
        out.push_sentence(&rows)?;
    }
    Ok(out)
}

/// Renders rows of values the same way [`write_column_corpus`] does.
pub fn format_rows(rows: &[Vec<String>]) -> String {
    let mut out = String::new();
    for row in rows {
        let _ = writeln!(out, "{}", row.join(" "));
    }
    out
}
