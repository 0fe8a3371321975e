use std::ffi::{c_char, CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use mtbl_ffi::*;

fn core_fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures").join(name)
}

fn c(s: &str) -> CString {
    CString::new(s).unwrap()
}

/// Takes ownership of a library string.
unsafe fn take(s: *mut c_char) -> String {
    assert!(!s.is_null());
    let out = CStr::from_ptr(s).to_str().unwrap().to_owned();
    mtbl_string_free(s);
    out
}

fn last_error() -> String {
    let p = mtbl_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn load(name: &str) -> *mut MtblCorpus {
    let path = c(core_fixture(name).to_str().unwrap());
    let mut corpus = ptr::null_mut();
    let status = unsafe { mtbl_corpus_load(path.as_ptr(), c("word,pos,chunk").as_ptr(), ptr::null(), &mut corpus) };
    assert_eq!(status, MtblStatus::Ok);
    corpus
}

#[test]
fn train_apply_eval_match_the_golden_files() {
    let train = load("train20.txt");
    assert_eq!(unsafe { mtbl_corpus_sentences(train) }, 20);
    let mut options = mtbl_train_options_default();
    options.scorer = MtblScorer::Naive;
    let mut model = ptr::null_mut();
    let mut log = ptr::null_mut();
    assert_eq!(unsafe { mtbl_train(train, ptr::null(), &options, &mut model, &mut log) }, MtblStatus::Ok);
    let log = unsafe { take(log) };
    assert_eq!(log, std::fs::read_to_string(core_fixture("train20.log")).unwrap());
    let mut text = ptr::null_mut();
    assert_eq!(unsafe { mtbl_model_to_text(model, &mut text) }, MtblStatus::Ok);
    let text = unsafe { take(text) };
    assert_eq!(text, std::fs::read_to_string(core_fixture("train20.model")).unwrap());
    assert_eq!(unsafe { mtbl_model_rule_count(model) }, 12);

    let test = load("test5.txt");
    assert_eq!(unsafe { mtbl_apply(model, test) }, MtblStatus::Ok);
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { mtbl_corpus_write(test, MtblLayer::Current, &mut out) }, MtblStatus::Ok);
    assert_eq!(unsafe { take(out) }, std::fs::read_to_string(core_fixture("test5.pred")).unwrap());
    let mut lines = ptr::null_mut();
    assert_eq!(unsafe { mtbl_eval(test, &mut lines) }, MtblStatus::Ok);
    let lines = unsafe { take(lines) };
    assert!(lines.contains("pos\taccuracy\t0.9375\n"), "{lines}");

    unsafe {
        mtbl_model_free(model);
        mtbl_corpus_free(train);
        mtbl_corpus_free(test);
    }
}

#[test]
fn model_save_load_and_parse() {
    let dir = tempfile::tempdir().unwrap();
    let path = c(dir.path().join("m.model").to_str().unwrap());
    let golden = std::fs::read_to_string(core_fixture("train20.model")).unwrap();
    let mut model = ptr::null_mut();
    assert_eq!(unsafe { mtbl_model_parse(c(&golden).as_ptr(), &mut model) }, MtblStatus::Ok);
    assert_eq!(unsafe { mtbl_model_save(model, path.as_ptr()) }, MtblStatus::Ok);
    let mut again = ptr::null_mut();
    assert_eq!(unsafe { mtbl_model_load(path.as_ptr(), &mut again) }, MtblStatus::Ok);
    let mut text = ptr::null_mut();
    assert_eq!(unsafe { mtbl_model_to_text(again, &mut text) }, MtblStatus::Ok);
    assert_eq!(unsafe { take(text) }, golden);
    unsafe {
        mtbl_model_free(model);
        mtbl_model_free(again);
    }
}

#[test]
fn errors_map_to_status_codes() {
    let mut corpus = ptr::null_mut();
    let streams = c("word,pos");
    unsafe {
        assert_eq!(mtbl_corpus_parse(ptr::null(), streams.as_ptr(), ptr::null(), &mut corpus), MtblStatus::NullArgument);
        assert!(last_error().contains("text"));
        assert_eq!(mtbl_corpus_parse(c("a DT\n").as_ptr(), streams.as_ptr(), ptr::null(), ptr::null_mut()), MtblStatus::NullArgument);
        let bad = [0xffu8, 0];
        assert_eq!(
            mtbl_corpus_parse(bad.as_ptr().cast(), streams.as_ptr(), ptr::null(), &mut corpus),
            MtblStatus::InvalidUtf8
        );
        assert_eq!(mtbl_corpus_parse(c("a DT x\n").as_ptr(), streams.as_ptr(), ptr::null(), &mut corpus), MtblStatus::Data);
        assert!(last_error().contains("line 1"));
        assert_eq!(mtbl_corpus_parse(c("a DT\n").as_ptr(), c("word,word").as_ptr(), ptr::null(), &mut corpus), MtblStatus::Config);
        let mut model = ptr::null_mut();
        assert_eq!(mtbl_model_load(c("/nonexistent/m").as_ptr(), &mut model), MtblStatus::Config);
        assert!(last_error().contains("/nonexistent/m"));
        assert_eq!(mtbl_model_parse(c("## RULES\n").as_ptr(), &mut model), MtblStatus::Data);
        assert!(model.is_null());

        assert_eq!(mtbl_corpus_parse(c("a DT\n\nb NN\n").as_ptr(), streams.as_ptr(), ptr::null(), &mut corpus), MtblStatus::Ok);
        let mut out = ptr::null_mut();
        assert_eq!(mtbl_corpus_write(corpus, MtblLayer::Current, &mut out), MtblStatus::Data);
        assert!(out.is_null());
        assert_eq!(mtbl_train(corpus, c("bogus").as_ptr(), ptr::null(), &mut model, ptr::null_mut()), MtblStatus::Config);
        let mut options = mtbl_train_options_default();
        options.min_score_denom = 0;
        assert_eq!(mtbl_train(corpus, ptr::null(), &options, &mut model, ptr::null_mut()), MtblStatus::Config);
        assert_eq!(mtbl_train(ptr::null(), ptr::null(), ptr::null(), &mut model, ptr::null_mut()), MtblStatus::NullArgument);
        assert_eq!(mtbl_corpus_sentences(ptr::null()), 0);
        assert_eq!(mtbl_model_rule_count(ptr::null()), 0);
        mtbl_corpus_free(corpus);
        mtbl_corpus_free(ptr::null_mut());
        mtbl_model_free(ptr::null_mut());
        mtbl_string_free(ptr::null_mut());
    }
}

#[test]
fn sequential_options_record_phases() {
    let train = load("train20.txt");
    let mut options = mtbl_train_options_default();
    options.mode = MtblMode::Sequential;
    options.max_rules = 3;
    options.workers = 2;
    let mut model = ptr::null_mut();
    assert_eq!(unsafe { mtbl_train(train, ptr::null(), &options, &mut model, ptr::null_mut()) }, MtblStatus::Ok);
    let mut text = ptr::null_mut();
    assert_eq!(unsafe { mtbl_model_to_text(model, &mut text) }, MtblStatus::Ok);
    let text = unsafe { take(text) };
    assert!(text.contains("# phase pos\n"), "{text}");
    assert!(unsafe { mtbl_model_rule_count(model) } <= 3);
    unsafe {
        mtbl_model_free(model);
        mtbl_corpus_free(train);
    }
}

fn compiler() -> Option<&'static str> {
    ["cc", "gcc", "clang"]
        .into_iter()
        .find(|cc| Command::new(cc).arg("--version").output().is_ok_and(|o| o.status.success()))
}

#[test]
fn header_compiles_as_c_and_cpp() {
    let Some(cc) = compiler() else {
        eprintln!("no C compiler found; header check skipped");
        return;
    };
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/mtbl.h");
    for lang in ["c", "c++"] {
        let out = Command::new(cc)
            .args(["-fsyntax-only", "-Wall", "-Werror", "-x", lang])
            .arg(&header)
            .output()
            .unwrap();
        assert!(out.status.success(), "{lang}: {}", String::from_utf8_lossy(&out.stderr));
    }
}

#[test]
fn c_program_links_the_static_library() {
    let Some(cc) = compiler() else {
        eprintln!("no C compiler found; link check skipped");
        return;
    };
    let exe = std::env::current_exe().unwrap();
    let target = exe.parent().and_then(Path::parent).unwrap();
    let lib = target.join("libmtbl_ffi.a");
    assert!(lib.exists(), "{} not built", lib.display());
    let dir = tempfile::tempdir().unwrap();
    let bin = dir.path().join("smoke");
    let root = Path::new(env!("CARGO_MANIFEST_DIR"));
    let out = Command::new(cc)
        .arg(root.join("tests/smoke.c"))
        .arg("-I")
        .arg(root.join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let run = Command::new(&bin).output().unwrap();
    let stdout = String::from_utf8_lossy(&run.stdout);
    assert!(run.status.success(), "{stdout}{}", String::from_utf8_lossy(&run.stderr));
    assert!(stdout.contains("pos\taccuracy\t1.0000\n"), "{stdout}");
    assert!(stdout.contains("error cannot read /nonexistent/model"), "{stdout}");
}
