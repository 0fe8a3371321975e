//! C ABI over the `mtbl` library.
//!
//! Corpora and models are opaque handles owned by the caller and released
//! with their `_free` function. Every fallible call returns an
//! [`MtblStatus`]; on failure [`mtbl_last_error`] describes the error for
//! the calling thread. Strings handed out by the library are released with
//! [`mtbl_string_free`]. The header is `include/mtbl.h`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use mtbl::corpus::{read_column_str, write_column_corpus, Corpus, Layer, Schema};
use mtbl::engine::{apply_model, Model};
use mtbl::eval::{evaluate, EvalSpec};
use mtbl::templates::{default_templates, parse_template_file, DEFAULT_OFFSET_BOUND};
use mtbl::trainer::{train, Mode, ScorerKind, TrainConfig};
use mtbl::Error;
use num_rational::Rational64;

/// Result of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MtblStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullArgument = 1,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 2,
    /// Bad options, templates, schema or missing file.
    Config = 3,
    /// Corpus or model contents that do not fit the schema.
    Data = 4,
    /// Internal consistency failure, including a caught panic.
    Internal = 5,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MtblLayer {
    Gold = 0,
    Current = 1,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MtblMode {
    Joint = 0,
    /// One task at a time, in schema order.
    Sequential = 1,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MtblScorer {
    Indexed = 0,
    Naive = 1,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MtblTrainOptions {
    pub min_score_numer: i64,
    pub min_score_denom: i64,
    /// 0 means no limit.
    pub max_rules: usize,
    pub mode: MtblMode,
    pub scorer: MtblScorer,
    pub workers: usize,
}

/// Opaque corpus handle.
pub struct MtblCorpus {
    inner: Corpus,
}

/// Opaque model handle.
pub struct MtblModel {
    inner: Model,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let message = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(message));
}

struct Failure(MtblStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Failure {
        let status = match e {
            Error::Internal(_) => MtblStatus::Internal,
            ref e if e.is_config() => MtblStatus::Config,
            _ => MtblStatus::Data,
        };
        Failure(status, e.to_string())
    }
}

type Outcome = std::result::Result<(), Failure>;

fn guard(body: impl FnOnce() -> Outcome) -> MtblStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => MtblStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_error(message);
            status
        }
        Err(_) => {
            set_error("panic inside mtbl".into());
            MtblStatus::Internal
        }
    }
}

/// Borrows a C string; `what` names the argument in error messages.
unsafe fn text<'a>(p: *const c_char, what: &str) -> std::result::Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure(MtblStatus::NullArgument, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(MtblStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

unsafe fn optional_text<'a>(p: *const c_char, what: &str) -> std::result::Result<Option<&'a str>, Failure> {
    if p.is_null() {
        Ok(None)
    } else {
        text(p, what).map(Some)
    }
}

fn null(what: &str) -> Failure {
    Failure(MtblStatus::NullArgument, format!("{what} is null"))
}

unsafe fn out_ptr<'a, T>(p: *mut T, what: &str) -> std::result::Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(what))
}

fn to_c_string(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " ")).unwrap_or_default().into_raw()
}

fn read_file(path: &str) -> std::result::Result<String, Failure> {
    std::fs::read_to_string(path)
        .map_err(|source| Error::MissingFile { path: path.into(), source }.into())
}

fn schema(streams: &str, tasks: Option<&str>) -> mtbl::Result<Schema> {
    let names: Vec<&str> = streams.split(',').map(str::trim).collect();
    let tasks: Vec<&str> = match tasks {
        Some(t) => t.split(',').map(str::trim).collect(),
        None => names.iter().skip(1).copied().collect(),
    };
    Schema::new(&names, &tasks)
}

/// Message of the last failed call on this thread, or null. Valid until
/// the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn mtbl_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Releases a string returned by the library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn mtbl_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses column-format text. `streams` and `tasks` are comma-separated
/// names; a null `tasks` makes every stream but the first a task.
///
/// # Safety
/// String arguments must be null or NUL-terminated; `out` must be valid
/// for writes.
#[no_mangle]
pub unsafe extern "C" fn mtbl_corpus_parse(
    text_in: *const c_char,
    streams: *const c_char,
    tasks: *const c_char,
    out: *mut *mut MtblCorpus,
) -> MtblStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let schema = schema(text(streams, "streams")?, optional_text(tasks, "tasks")?)?;
        let corpus = read_column_str(text(text_in, "text")?, &schema)?;
        *out = Box::into_raw(Box::new(MtblCorpus { inner: corpus }));
        Ok(())
    })
}

/// [`mtbl_corpus_parse`] on the contents of a file.
///
/// # Safety
/// As for [`mtbl_corpus_parse`].
#[no_mangle]
pub unsafe extern "C" fn mtbl_corpus_load(
    path: *const c_char,
    streams: *const c_char,
    tasks: *const c_char,
    out: *mut *mut MtblCorpus,
) -> MtblStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let schema = schema(text(streams, "streams")?, optional_text(tasks, "tasks")?)?;
        let corpus = read_column_str(&read_file(text(path, "path")?)?, &schema)?;
        *out = Box::into_raw(Box::new(MtblCorpus { inner: corpus }));
        Ok(())
    })
}

/// Number of sentences, or 0 for a null handle.
///
/// # Safety
/// `corpus` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mtbl_corpus_sentences(corpus: *const MtblCorpus) -> usize {
    corpus.as_ref().map_or(0, |c| c.inner.len())
}

/// Writes one layer in column format into a new string.
///
/// # Safety
/// `corpus` must be a live handle; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn mtbl_corpus_write(
    corpus: *const MtblCorpus,
    layer: MtblLayer,
    out: *mut *mut c_char,
) -> MtblStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let corpus = corpus.as_ref().ok_or_else(|| null("corpus"))?;
        let layer = match layer {
            MtblLayer::Gold => Layer::Gold,
            MtblLayer::Current => Layer::Current,
        };
        *out = to_c_string(write_column_corpus(&corpus.inner, layer)?);
        Ok(())
    })
}

/// # Safety
/// `corpus` must be null or a live handle, not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn mtbl_corpus_free(corpus: *mut MtblCorpus) {
    if !corpus.is_null() {
        drop(Box::from_raw(corpus));
    }
}

/// Joint training, min score 1, no rule limit, indexed scorer, one worker.
#[no_mangle]
pub extern "C" fn mtbl_train_options_default() -> MtblTrainOptions {
    MtblTrainOptions {
        min_score_numer: 1,
        min_score_denom: 1,
        max_rules: 0,
        mode: MtblMode::Joint,
        scorer: MtblScorer::Indexed,
        workers: 1,
    }
}

/// Learns a model from the gold layer of `corpus`. `templates` is template
/// file text, or null for the default set; `options` may be null for the
/// defaults. When `log_out` is not null it receives the training log.
///
/// # Safety
/// Handles must be live, strings null or NUL-terminated, and `model_out`
/// (and `log_out` when not null) valid for writes.
#[no_mangle]
pub unsafe extern "C" fn mtbl_train(
    corpus: *const MtblCorpus,
    templates: *const c_char,
    options: *const MtblTrainOptions,
    model_out: *mut *mut MtblModel,
    log_out: *mut *mut c_char,
) -> MtblStatus {
    guard(|| {
        let model_out = out_ptr(model_out, "model_out")?;
        let corpus = &corpus.as_ref().ok_or_else(|| null("corpus"))?.inner;
        let options = options.as_ref().copied().unwrap_or_else(|| mtbl_train_options_default());
        let schema = corpus.schema();
        let templates = match optional_text(templates, "templates")? {
            Some(t) => parse_template_file(t, schema, DEFAULT_OFFSET_BOUND)?,
            None => default_templates(schema, DEFAULT_OFFSET_BOUND),
        };
        if options.min_score_denom <= 0 {
            return Err(Error::Config("min_score_denom must be positive".into()).into());
        }
        let mut config = TrainConfig::new(templates);
        config.min_score = Rational64::new(options.min_score_numer, options.min_score_denom);
        config.max_rules = (options.max_rules > 0).then_some(options.max_rules);
        config.workers = options.workers.max(1);
        config.scorer = match options.scorer {
            MtblScorer::Indexed => ScorerKind::Indexed,
            MtblScorer::Naive => ScorerKind::Naive,
        };
        config.mode = match options.mode {
            MtblMode::Joint => Mode::Joint,
            MtblMode::Sequential => Mode::Sequential(
                schema.tasks().iter().map(|&t| schema.name(t).to_owned()).collect(),
            ),
        };
        let training = train(corpus, &config)?;
        if !log_out.is_null() {
            *log_out = to_c_string(training.log_text());
        }
        *model_out = Box::into_raw(Box::new(MtblModel { inner: training.model }));
        Ok(())
    })
}

/// Parses model text.
///
/// # Safety
/// `text_in` must be NUL-terminated; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn mtbl_model_parse(text_in: *const c_char, out: *mut *mut MtblModel) -> MtblStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let model = Model::from_text(text(text_in, "text")?)?;
        *out = Box::into_raw(Box::new(MtblModel { inner: model }));
        Ok(())
    })
}

/// # Safety
/// `path` must be NUL-terminated; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn mtbl_model_load(path: *const c_char, out: *mut *mut MtblModel) -> MtblStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let model = Model::from_text(&read_file(text(path, "path")?)?)?;
        *out = Box::into_raw(Box::new(MtblModel { inner: model }));
        Ok(())
    })
}

/// # Safety
/// `model` must be a live handle; `path` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn mtbl_model_save(model: *const MtblModel, path: *const c_char) -> MtblStatus {
    guard(|| {
        let model = model.as_ref().ok_or_else(|| null("model"))?;
        let path = text(path, "path")?;
        std::fs::write(path, model.inner.to_text())
            .map_err(|e| Failure(MtblStatus::Config, format!("cannot write {path}: {e}")))
    })
}

/// Model text into a new string.
///
/// # Safety
/// `model` must be a live handle; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn mtbl_model_to_text(model: *const MtblModel, out: *mut *mut c_char) -> MtblStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let model = model.as_ref().ok_or_else(|| null("model"))?;
        *out = to_c_string(model.inner.to_text());
        Ok(())
    })
}

/// Number of learned rules, or 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mtbl_model_rule_count(model: *const MtblModel) -> usize {
    model.as_ref().map_or(0, |m| m.inner.rules.len())
}

/// # Safety
/// `model` must be null or a live handle, not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn mtbl_model_free(model: *mut MtblModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Initializes the current layer of `corpus` and applies every rule.
///
/// # Safety
/// Both handles must be live.
#[no_mangle]
pub unsafe extern "C" fn mtbl_apply(model: *const MtblModel, corpus: *mut MtblCorpus) -> MtblStatus {
    guard(|| {
        let model = model.as_ref().ok_or_else(|| null("model"))?;
        let corpus = corpus.as_mut().ok_or_else(|| null("corpus"))?;
        apply_model(&model.inner, &mut corpus.inner)?;
        Ok(())
    })
}

/// Scores the current layer against gold; writes `task<TAB>metric<TAB>value`
/// lines into a new string.
///
/// # Safety
/// `corpus` must be a live handle; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn mtbl_eval(corpus: *const MtblCorpus, out: *mut *mut c_char) -> MtblStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let corpus = &corpus.as_ref().ok_or_else(|| null("corpus"))?.inner;
        let report = evaluate(corpus, &EvalSpec::infer(corpus))?;
        *out = to_c_string(report.machine_lines());
        Ok(())
    })
}
