//! Rule templates, grounded rules, and their text forms.
//!
//! Template lines look like `pos[0],chunk[0] => pos` or `pos[-3..-1] => pos`;
//! a rule prints as `pos[0]=VBD chunk[0]=I-VP => pos=VBN`. A bracketed single
//! offset is an equality test at that offset; a bracketed range matches when
//! the value occurs anywhere in the range.

use std::fmt;

use smallvec::SmallVec;

use crate::corpus::{Corpus, Schema, Sentence, Sym, Symbols};
use crate::error::{Error, Result};

/// Default bound on |offset|: three tokens to either side.
pub const DEFAULT_OFFSET_BOUND: i32 = 3;

/// Where a predicate looks, relative to the token being changed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Offset {
    /// Equality at exactly this offset.
    At(i32),
    /// Any offset in the inclusive range; never straddles 0.
    Window(i32, i32),
}

impl Offset {
    pub fn range(self) -> (i32, i32) {
        match self {
            Offset::At(o) => (o, o),
            Offset::Window(lo, hi) => (lo, hi),
        }
    }

    pub fn is_window(self) -> bool {
        matches!(self, Offset::Window(..))
    }

    fn max_abs(self) -> i32 {
        let (lo, hi) = self.range();
        lo.abs().max(hi.abs())
    }
}

impl fmt::Display for Offset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Offset::At(o) => write!(f, "[{o}]"),
            Offset::Window(lo, hi) => write!(f, "[{lo}..{hi}]"),
        }
    }
}

/// Ungrounded predicate slot of a template.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Slot {
    pub stream: String,
    pub offset: Offset,
}

impl Slot {
    pub fn at(stream: &str, offset: i32) -> Slot {
        Slot {
            stream: stream.to_owned(),
            offset: Offset::At(offset),
        }
    }

    pub fn window(stream: &str, lo: i32, hi: i32) -> Slot {
        Slot {
            stream: stream.to_owned(),
            offset: Offset::Window(lo, hi),
        }
    }
}

/// Rule shape: a conjunction of slots and the task stream it rewrites.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Template {
    slots: Vec<Slot>,
    target: String,
}

impl Template {
    /// Builds a template; `include_target_value` adds an equality slot on
    /// the target at offset 0 in front when one is not already present.
    pub fn new(mut slots: Vec<Slot>, target: &str, include_target_value: bool) -> Result<Template> {
        let own = Slot::at(target, 0);
        if include_target_value && !slots.contains(&own) {
            slots.insert(0, own);
        }
        let template = Template {
            slots,
            target: target.to_owned(),
        };
        template.check_shape(0)?;
        Ok(template)
    }

    pub fn slots(&self) -> &[Slot] {
        &self.slots
    }

    pub fn target(&self) -> &str {
        &self.target
    }

    /// Whether the target's own current value at offset 0 is a condition.
    pub fn include_target_value(&self) -> bool {
        self.slots.contains(&Slot::at(&self.target, 0))
    }

    /// Largest |offset| any slot reads.
    pub fn reach(&self) -> i32 {
        self.slots.iter().map(|s| s.offset.max_abs()).max().unwrap_or(0)
    }

    fn check_shape(&self, column: usize) -> Result<()> {
        let fail = |message: String| Err(Error::Template { column, message });
        if self.slots.is_empty() {
            return fail("template has no conditions".into());
        }
        if self.slots.iter().filter(|s| s.offset.is_window()).count() > 1 {
            return fail("at most one window predicate per template".into());
        }
        for (i, slot) in self.slots.iter().enumerate() {
            if let Offset::Window(lo, hi) = slot.offset {
                if lo > hi || (lo <= 0 && hi >= 0) {
                    return fail(format!(
                        "window {lo}..{hi} must be non-empty and on one side of 0"
                    ));
                }
            }
            if self.slots[..i].contains(slot) {
                return fail(format!("duplicate slot {}{}", slot.stream, slot.offset));
            }
        }
        Ok(())
    }

    /// Checks streams against a schema and offsets against a bound.
    pub fn validate(&self, schema: &Schema, bound: i32) -> Result<()> {
        let target = schema.index(&self.target).ok_or_else(|| Error::Template {
            column: 0,
            message: format!("unknown stream `{}`", self.target),
        })?;
        if !schema.is_task(target) {
            return Err(Error::Template {
                column: 0,
                message: format!("target `{}` is not a task stream", self.target),
            });
        }
        for slot in &self.slots {
            if schema.index(&slot.stream).is_none() {
                return Err(Error::Template {
                    column: 0,
                    message: format!("unknown stream `{}`", slot.stream),
                });
            }
            if slot.offset.max_abs() > bound {
                return Err(Error::Template {
                    column: 0,
                    message: format!(
                        "offset {} of `{}` exceeds the bound {bound}",
                        slot.offset, slot.stream
                    ),
                });
            }
        }
        Ok(())
    }

    /// Syntactic parse; no schema checks.
    pub fn parse(text: &str) -> Result<Template> {
        let mut lexer = Lexer::new(text);
        let mut slots = Vec::new();
        loop {
            let column = lexer.column();
            let stream = lexer.name()?;
            let offset = lexer.offset()?;
            slots.push(Slot { stream, offset });
            lexer.skip_ws();
            if lexer.eat(",") {
                continue;
            }
            if lexer.eat("=>") {
                break;
            }
            return Err(lexer.error(format!(
                "expected `,` or `=>` after condition starting at column {column}"
            )));
        }
        let target = lexer.name()?;
        lexer.skip_ws();
        if !lexer.at_end() {
            return Err(lexer.error("trailing input".into()));
        }
        let template = Template { slots, target };
        template.check_shape(1)?;
        Ok(template)
    }
}

impl fmt::Display for Template {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, slot) in self.slots.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{}{}", slot.stream, slot.offset)?;
        }
        write!(f, " => {}", self.target)
    }
}

/// Parses one template line and validates it against a schema.
pub fn parse_template(text: &str, schema: &Schema, bound: i32) -> Result<Template> {
    let template = Template::parse(text)?;
    template.validate(schema, bound)?;
    Ok(template)
}

/// Parses a template file: one template per line, `#` starts a comment.
pub fn parse_template_file(text: &str, schema: &Schema, bound: i32) -> Result<Vec<Template>> {
    let mut templates = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let template = parse_template(line, schema, bound).map_err(|e| match e {
            Error::Template { column, message } => Error::Template {
                column,
                message: format!("line {}: {message}", i + 1),
            },
            other => other,
        })?;
        templates.push(template);
    }
    Ok(templates)
}

struct Lexer<'a> {
    text: &'a str,
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn new(text: &'a str) -> Self {
        Lexer { text, pos: 0 }
    }

    fn column(&self) -> usize {
        self.text[..self.pos].chars().count() + 1
    }

    fn error(&self, message: String) -> Error {
        Error::Template {
            column: self.column(),
            message,
        }
    }

    fn rest(&self) -> &'a str {
        &self.text[self.pos..]
    }

    fn at_end(&self) -> bool {
        self.pos >= self.text.len()
    }

    fn skip_ws(&mut self) {
        let rest = self.rest();
        self.pos += rest.len() - rest.trim_start().len();
    }

    fn eat(&mut self, token: &str) -> bool {
        self.skip_ws();
        if self.rest().starts_with(token) {
            self.pos += token.len();
            true
        } else {
            false
        }
    }

    fn name(&mut self) -> Result<String> {
        self.skip_ws();
        let rest = self.rest();
        let len = rest
            .find(|c: char| c.is_whitespace() || matches!(c, '[' | ']' | '=' | ',' | '>'))
            .unwrap_or(rest.len());
        if len == 0 {
            return Err(self.error("expected a stream name".into()));
        }
        self.pos += len;
        Ok(rest[..len].to_owned())
    }

    fn int(&mut self) -> Result<i32> {
        self.skip_ws();
        let rest = self.rest();
        let sign = usize::from(rest.starts_with(['-', '+']));
        let digits = rest[sign..]
            .find(|c: char| !c.is_ascii_digit())
            .unwrap_or(rest.len() - sign);
        if digits == 0 {
            return Err(self.error("expected an integer offset".into()));
        }
        let value = rest[..sign + digits]
            .parse::<i32>()
            .map_err(|e| self.error(format!("bad offset: {e}")))?;
        self.pos += sign + digits;
        Ok(value)
    }

    fn offset(&mut self) -> Result<Offset> {
        if !self.eat("[") {
            return Err(self.error("expected `[`".into()));
        }
        let lo = self.int()?;
        let offset = if self.eat("..") {
            Offset::Window(lo, self.int()?)
        } else {
            Offset::At(lo)
        };
        if !self.eat("]") {
            return Err(self.error("expected `]`".into()));
        }
        Ok(offset)
    }
}

/// Escapes a value for rule and model text: backslash before space, `=`,
/// `,` and backslash.
pub fn escape(value: &str) -> String {
    let mut out = String::with_capacity(value.len());
    for c in value.chars() {
        if matches!(c, ' ' | '=' | ',' | '\\') {
            out.push('\\');
        }
        out.push(c);
    }
    out
}

pub fn unescape(text: &str) -> Result<String> {
    let mut out = String::with_capacity(text.len());
    let mut chars = text.chars();
    while let Some(c) = chars.next() {
        if c == '\\' {
            out.push(
                chars
                    .next()
                    .ok_or_else(|| Error::RuleSyntax(format!("dangling escape in `{text}`")))?,
            );
        } else {
            out.push(c);
        }
    }
    Ok(out)
}

/// Splits on spaces not preceded by a backslash escape.
pub(crate) fn split_unescaped(text: &str) -> Vec<&str> {
    let mut parts = Vec::new();
    let mut start = 0;
    let mut escaped = false;
    for (i, c) in text.char_indices() {
        if escaped {
            escaped = false;
        } else if c == '\\' {
            escaped = true;
        } else if c == ' ' {
            if i > start {
                parts.push(&text[start..i]);
            }
            start = i + 1;
        }
    }
    if start < text.len() {
        parts.push(&text[start..]);
    }
    parts
}

/// A grounded predicate.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Condition {
    pub stream: String,
    pub offset: Offset,
    pub value: String,
}

/// A learned transformation: when every condition holds at a token, set
/// the target stream there to `new_value`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Rule {
    pub conditions: Vec<Condition>,
    pub target: String,
    pub new_value: String,
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, c) in self.conditions.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{}{}={}", c.stream, c.offset, escape(&c.value))?;
        }
        write!(f, " => {}={}", self.target, escape(&self.new_value))
    }
}

impl Rule {
    pub fn parse(text: &str) -> Result<Rule> {
        let bad = |m: &str| Error::RuleSyntax(format!("{m} in `{text}`"));
        let tokens = split_unescaped(text.trim_end_matches(['\n', '\r']));
        let arrow = tokens
            .iter()
            .position(|t| *t == "=>")
            .ok_or_else(|| bad("missing `=>`"))?;
        if arrow == 0 || arrow + 2 != tokens.len() {
            return Err(bad("expected conditions, `=>` and one action"));
        }
        let mut conditions = Vec::with_capacity(arrow);
        for token in &tokens[..arrow] {
            let open = token.find('[').ok_or_else(|| bad("missing `[`"))?;
            let close = token.find(']').ok_or_else(|| bad("missing `]`"))?;
            let stream = &token[..open];
            crate::corpus::validate_stream_name(stream).map_err(|_| bad("bad stream name"))?;
            let offset = Lexer::new(&token[open..=close])
                .offset()
                .map_err(|_| bad("bad offset"))?;
            let value = token[close + 1..]
                .strip_prefix('=')
                .ok_or_else(|| bad("missing `=` after offset"))?;
            if value.is_empty() {
                return Err(bad("empty condition value"));
            }
            conditions.push(Condition {
                stream: stream.to_owned(),
                offset,
                value: unescape(value)?,
            });
        }
        let action = tokens[arrow + 1];
        let (target, value) = action
            .split_once('=')
            .ok_or_else(|| bad("action must be STREAM=VALUE"))?;
        crate::corpus::validate_stream_name(target).map_err(|_| bad("bad target stream"))?;
        if value.is_empty() {
            return Err(bad("empty new value"));
        }
        let rule = Rule {
            conditions,
            target: target.to_owned(),
            new_value: unescape(value)?,
        };
        if rule.conditions.iter().any(|c| {
            c.stream == rule.target && c.offset == Offset::At(0) && c.value == rule.new_value
        }) {
            return Err(bad("new value equals the target's own condition"));
        }
        Ok(rule)
    }

    /// Whether the rule fires at `position` of sentence `sentence`.
    pub fn matches(&self, corpus: &Corpus, sentence: usize, position: usize) -> bool {
        match CompiledRule::lookup(self, corpus.schema(), corpus.symbols()) {
            Ok(Some(rule)) => rule.matches(&corpus.sentences()[sentence], position),
            _ => false,
        }
    }
}

/// Condition over stream indices and interned values.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) struct CompiledCondition {
    pub stream: usize,
    pub lo: i32,
    pub hi: i32,
    pub value: Sym,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) struct CompiledRule {
    pub conditions: Vec<CompiledCondition>,
    pub target: usize,
    pub new_value: Sym,
}

impl CompiledRule {
    /// Compiles against a symbol table, interning unseen values.
    pub fn intern(rule: &Rule, schema: &Schema, symbols: &mut Symbols) -> Result<CompiledRule> {
        let mut conditions = Vec::with_capacity(rule.conditions.len());
        for c in &rule.conditions {
            let (lo, hi) = c.offset.range();
            conditions.push(CompiledCondition {
                stream: schema.index_of(&c.stream)?,
                lo,
                hi,
                value: symbols.intern(&c.value),
            });
        }
        let target = schema.index_of(&rule.target)?;
        if !schema.is_task(target) {
            return Err(Error::SchemaMismatch(format!(
                "rule target `{}` is not a task",
                rule.target
            )));
        }
        Ok(CompiledRule {
            conditions,
            target,
            new_value: symbols.intern(&rule.new_value),
        })
    }

    /// Read-only compile; `None` when a condition value is absent from the
    /// symbol table, so the rule cannot fire anywhere.
    pub fn lookup(rule: &Rule, schema: &Schema, symbols: &Symbols) -> Result<Option<CompiledRule>> {
        let mut conditions = Vec::with_capacity(rule.conditions.len());
        for c in &rule.conditions {
            let (lo, hi) = c.offset.range();
            let stream = schema.index_of(&c.stream)?;
            let Some(value) = symbols.get(&c.value) else {
                return Ok(None);
            };
            conditions.push(CompiledCondition {
                stream,
                lo,
                hi,
                value,
            });
        }
        let target = schema.index_of(&rule.target)?;
        Ok(Some(CompiledRule {
            conditions,
            target,
            new_value: symbols.get(&rule.new_value).unwrap_or(Sym::UNSET),
        }))
    }

    #[inline]
    pub fn matches(&self, sentence: &Sentence, position: usize) -> bool {
        let p = position as isize;
        self.conditions.iter().all(|c| {
            (c.lo..=c.hi).any(|o| sentence.at(c.stream, p + o as isize) == c.value)
        })
    }
}

/// Slot values identifying a grounded context of one template.
pub(crate) type ContextKey = SmallVec<[Sym; 4]>;

#[derive(Clone, Debug)]
pub(crate) struct CompiledSlot {
    pub stream: usize,
    pub lo: i32,
    pub hi: i32,
}

/// Template over stream indices, used by grounding and the scorers.
#[derive(Clone, Debug)]
pub(crate) struct CompiledTemplate {
    pub slots: Vec<CompiledSlot>,
    pub window: Option<usize>,
    pub target: usize,
}

impl CompiledTemplate {
    pub fn new(template: &Template, schema: &Schema) -> Result<CompiledTemplate> {
        let mut slots = Vec::with_capacity(template.slots.len());
        let mut window = None;
        for (i, slot) in template.slots.iter().enumerate() {
            let (lo, hi) = slot.offset.range();
            if slot.offset.is_window() {
                window = Some(i);
            }
            slots.push(CompiledSlot {
                stream: schema.index_of(&slot.stream)?,
                lo,
                hi,
            });
        }
        let target = schema.index_of(&template.target)?;
        if !schema.is_task(target) {
            return Err(Error::Template {
                column: 0,
                message: format!("target `{}` is not a task stream", template.target),
            });
        }
        Ok(CompiledTemplate {
            slots,
            window,
            target,
        })
    }

    /// Calls `f` once per distinct context of this template at `position`:
    /// equality slots read their single value, the window slot (if any)
    /// contributes each distinct value found in its range.
    #[inline]
    pub fn for_each_context(&self, sentence: &Sentence, position: usize, mut f: impl FnMut(&[Sym])) {
        let p = position as isize;
        let mut key: ContextKey = self
            .slots
            .iter()
            .map(|s| sentence.at(s.stream, p + s.lo as isize))
            .collect();
        match self.window {
            None => f(&key),
            Some(w) => {
                let slot = &self.slots[w];
                let mut seen: SmallVec<[Sym; 8]> = SmallVec::new();
                for o in slot.lo..=slot.hi {
                    let v = sentence.at(slot.stream, p + o as isize);
                    if !seen.contains(&v) {
                        seen.push(v);
                        key[w] = v;
                        f(&key);
                    }
                }
            }
        }
    }

    /// Turns a context and a new value back into a rule.
    pub fn rule(
        &self,
        template: &Template,
        key: &[Sym],
        new_value: Sym,
        symbols: &Symbols,
    ) -> Rule {
        let conditions = template
            .slots
            .iter()
            .zip(key)
            .map(|(slot, &v)| Condition {
                stream: slot.stream.clone(),
                offset: slot.offset,
                value: symbols.resolve(v).to_owned(),
            })
            .collect();
        Rule {
            conditions,
            target: template.target.clone(),
            new_value: symbols.resolve(new_value).to_owned(),
        }
    }
}

/// Instantiates `template` at every position whose current target tag is
/// wrong, proposing the gold tag. Sorted by serialization, no duplicates.
pub fn ground_candidates(template: &Template, corpus: &Corpus) -> Result<Vec<Rule>> {
    let compiled = CompiledTemplate::new(template, corpus.schema())?;
    let target = compiled.target;
    if !corpus.is_initialized(target) {
        return Err(Error::Uninitialized(template.target.clone()));
    }
    let mut rules: Vec<(String, Rule)> = Vec::new();
    for sentence in corpus.sentences() {
        let (current, gold) = (sentence.current(target), sentence.gold(target));
        for p in 0..sentence.len() {
            if current[p] == gold[p] {
                continue;
            }
            compiled.for_each_context(sentence, p, |key| {
                let rule = compiled.rule(template, key, gold[p], corpus.symbols());
                rules.push((rule.to_string(), rule));
            });
        }
    }
    rules.sort_by(|a, b| a.0.cmp(&b.0));
    rules.dedup_by(|a, b| a.0 == b.0);
    Ok(rules.into_iter().map(|(_, r)| r).collect())
}

/// The built-in template inventory, per task stream `t`:
///
/// * `t[0]` alone;
/// * `t[0]` plus one equality slot on any stream at any offset within the bound;
/// * `t[0]` plus two equality slots, both within offset ±1;
/// * `t[0]` plus one window slot on any stream: `[-bound..-1]`, `[-2..-1]`,
///   `[1..2]`, `[1..bound]`.
///
/// Slots referencing other task streams are included, which is what lets
/// one task condition on another's current tags.
pub fn default_templates(schema: &Schema, bound: i32) -> Vec<Template> {
    let mut templates = Vec::new();
    let streams: Vec<&str> = schema.streams().iter().map(|d| d.name.as_str()).collect();
    let mut windows = vec![(-bound, -1), (1, bound)];
    if bound > 2 {
        windows.insert(1, (-2, -1));
        windows.insert(2, (1, 2));
    }
    for task in schema.tasks() {
        let target = schema.name(task);
        let push = |templates: &mut Vec<Template>, extra: Vec<Slot>| {
            if let Ok(t) = Template::new(extra, target, true) {
                templates.push(t);
            }
        };
        push(&mut templates, Vec::new());
        let mut near = Vec::new();
        for stream in &streams {
            for o in -bound..=bound {
                if *stream == target && o == 0 {
                    continue;
                }
                push(&mut templates, vec![Slot::at(stream, o)]);
                if o.abs() <= 1 {
                    near.push(Slot::at(stream, o));
                }
            }
        }
        for i in 0..near.len() {
            for j in i + 1..near.len() {
                push(&mut templates, vec![near[i].clone(), near[j].clone()]);
            }
        }
        for stream in &streams {
            for &(lo, hi) in &windows {
                push(&mut templates, vec![Slot::window(stream, lo, hi)]);
            }
        }
    }
    templates
}
