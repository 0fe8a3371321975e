//! Multi-task transformation-based learning.
//!
//! A corpus carries several aligned tag streams per token. Some are static
//! features (the words), others are tasks with a gold and a current layer.
//! Training starts from a lexicon-based guess for every task and greedily
//! learns an ordered list of rewrite rules; a rule targets one task but may
//! condition on the current tags of any other, and is chosen by the summed
//! weighted improvement over all tasks.
//!
//! ```
//! use mtbl::corpus::{read_column_str, Schema};
//! use mtbl::templates::{default_templates, DEFAULT_OFFSET_BOUND};
//! use mtbl::trainer::{train, TrainConfig};
//!
//! let schema = Schema::new(&["word", "pos"], &["pos"]).unwrap();
//! let corpus = read_column_str("the DT\nrun NN\n\nthey PRP\nrun VBP\n", &schema).unwrap();
//! let templates = default_templates(&schema, DEFAULT_OFFSET_BOUND);
//! let training = train(&corpus, &TrainConfig::new(templates)).unwrap();
//! assert_eq!(training.model.rules.len(), 1);
//! ```

pub mod cli;
pub mod config;
pub mod corpus;
pub mod diagnostics;
pub mod engine;
pub mod error;
pub mod eval;
pub mod spans;
pub mod synth;
pub mod templates;
pub mod trainer;

pub use error::{Error, Result};
