#include <stdio.h>
#include <string.h>

#include "mtbl.h"

static const char *TRAIN =
    "the DT B-NP\ncan NN I-NP\nrusts VBZ B-VP\n\n"
    "we PRP B-NP\ncan MD B-VP\ngo VB I-VP\n\n"
    "we PRP B-NP\ncan MD B-VP\ngo VB I-VP\n\n";

int main(void) {
    MtblCorpus *corpus = NULL;
    MtblModel *model = NULL;
    char *log = NULL;
    char *lines = NULL;
    if (mtbl_corpus_parse(TRAIN, "word,pos,chunk", NULL, &corpus) != MTBL_STATUS_OK) {
        fprintf(stderr, "parse: %s\n", mtbl_last_error());
        return 1;
    }
    MtblTrainOptions options = mtbl_train_options_default();
    if (mtbl_train(corpus, NULL, &options, &model, &log) != MTBL_STATUS_OK) {
        fprintf(stderr, "train: %s\n", mtbl_last_error());
        return 1;
    }
    if (mtbl_apply(model, corpus) != MTBL_STATUS_OK || mtbl_eval(corpus, &lines) != MTBL_STATUS_OK) {
        fprintf(stderr, "apply/eval: %s\n", mtbl_last_error());
        return 1;
    }
    printf("rules %zu\n%s", mtbl_model_rule_count(model), lines);
    if (mtbl_model_load("/nonexistent/model", &model) != MTBL_STATUS_CONFIG) {
        return 1;
    }
    printf("error %s\n", mtbl_last_error());
    mtbl_string_free(lines);
    mtbl_string_free(log);
    mtbl_model_free(model);
    mtbl_corpus_free(corpus);
    return 0;
}
