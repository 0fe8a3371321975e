#ifndef MTBL_H
#define MTBL_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call.
 */
typedef enum MtblStatus {
  MTBL_STATUS_OK = 0,
  /**
   * A required pointer argument was null.
   */
  MTBL_STATUS_NULL_ARGUMENT = 1,
  /**
   * A string argument was not valid UTF-8.
   */
  MTBL_STATUS_INVALID_UTF8 = 2,
  /**
   * Bad options, templates, schema or missing file.
   */
  MTBL_STATUS_CONFIG = 3,
  /**
   * Corpus or model contents that do not fit the schema.
   */
  MTBL_STATUS_DATA = 4,
  /**
   * Internal consistency failure, including a caught panic.
   */
  MTBL_STATUS_INTERNAL = 5,
} MtblStatus;

typedef enum MtblLayer {
  MTBL_LAYER_GOLD = 0,
  MTBL_LAYER_CURRENT = 1,
} MtblLayer;

typedef enum MtblMode {
  MTBL_MODE_JOINT = 0,
  /**
   * One task at a time, in schema order.
   */
  MTBL_MODE_SEQUENTIAL = 1,
} MtblMode;

typedef enum MtblScorer {
  MTBL_SCORER_INDEXED = 0,
  MTBL_SCORER_NAIVE = 1,
} MtblScorer;

/**
 * Opaque corpus handle.
 */
typedef struct MtblCorpus MtblCorpus;

/**
 * Opaque model handle.
 */
typedef struct MtblModel MtblModel;

typedef struct MtblTrainOptions {
  int64_t min_score_numer;
  int64_t min_score_denom;
  /**
   * 0 means no limit.
   */
  size_t max_rules;
  enum MtblMode mode;
  enum MtblScorer scorer;
  size_t workers;
} MtblTrainOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. Valid until
 * the next failing call on the same thread.
 */
const char *mtbl_last_error(void);

/**
 * Releases a string returned by the library. Null is ignored.
 *
 * # Safety
 * `s` must come from this library and not have been freed.
 */
void mtbl_string_free(char *s);

/**
 * Parses column-format text. `streams` and `tasks` are comma-separated
 * names; a null `tasks` makes every stream but the first a task.
 *
 * # Safety
 * String arguments must be null or NUL-terminated; `out` must be valid
 * for writes.
 */
enum MtblStatus mtbl_corpus_parse(const char *text_in,
                                  const char *streams,
                                  const char *tasks,
                                  struct MtblCorpus **out);

/**
 * [`mtbl_corpus_parse`] on the contents of a file.
 *
 * # Safety
 * As for [`mtbl_corpus_parse`].
 */
enum MtblStatus mtbl_corpus_load(const char *path,
                                 const char *streams,
                                 const char *tasks,
                                 struct MtblCorpus **out);

/**
 * Number of sentences, or 0 for a null handle.
 *
 * # Safety
 * `corpus` must be null or a live handle.
 */
size_t mtbl_corpus_sentences(const struct MtblCorpus *corpus);

/**
 * Writes one layer in column format into a new string.
 *
 * # Safety
 * `corpus` must be a live handle; `out` must be valid for writes.
 */
enum MtblStatus mtbl_corpus_write(const struct MtblCorpus *corpus,
                                  enum MtblLayer layer,
                                  char **out);

/**
 * # Safety
 * `corpus` must be null or a live handle, not used afterwards.
 */
void mtbl_corpus_free(struct MtblCorpus *corpus);

/**
 * Joint training, min score 1, no rule limit, indexed scorer, one worker.
 */
struct MtblTrainOptions mtbl_train_options_default(void);

/**
 * Learns a model from the gold layer of `corpus`. `templates` is template
 * file text, or null for the default set; `options` may be null for the
 * defaults. When `log_out` is not null it receives the training log.
 *
 * # Safety
 * Handles must be live, strings null or NUL-terminated, and `model_out`
 * (and `log_out` when not null) valid for writes.
 */
enum MtblStatus mtbl_train(const struct MtblCorpus *corpus,
                           const char *templates,
                           const struct MtblTrainOptions *options,
                           struct MtblModel **model_out,
                           char **log_out);

/**
 * Parses model text.
 *
 * # Safety
 * `text_in` must be NUL-terminated; `out` must be valid for writes.
 */
enum MtblStatus mtbl_model_parse(const char *text_in, struct MtblModel **out);

/**
 * # Safety
 * `path` must be NUL-terminated; `out` must be valid for writes.
 */
enum MtblStatus mtbl_model_load(const char *path, struct MtblModel **out);

/**
 * # Safety
 * `model` must be a live handle; `path` must be NUL-terminated.
 */
enum MtblStatus mtbl_model_save(const struct MtblModel *model, const char *path);

/**
 * Model text into a new string.
 *
 * # Safety
 * `model` must be a live handle; `out` must be valid for writes.
 */
enum MtblStatus mtbl_model_to_text(const struct MtblModel *model, char **out);

/**
 * Number of learned rules, or 0 for a null handle.
 *
 * # Safety
 * `model` must be null or a live handle.
 */
size_t mtbl_model_rule_count(const struct MtblModel *model);

/**
 * # Safety
 * `model` must be null or a live handle, not used afterwards.
 */
void mtbl_model_free(struct MtblModel *model);

/**
 * Initializes the current layer of `corpus` and applies every rule.
 *
 * # Safety
 * Both handles must be live.
 */
enum MtblStatus mtbl_apply(const struct MtblModel *model, struct MtblCorpus *corpus);

/**
 * Scores the current layer against gold; writes `task<TAB>metric<TAB>value`
 * lines into a new string.
 *
 * # Safety
 * `corpus` must be a live handle; `out` must be valid for writes.
 */
enum MtblStatus mtbl_eval(const struct MtblCorpus *corpus, char **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MTBL_H */
