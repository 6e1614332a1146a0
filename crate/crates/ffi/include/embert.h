#ifndef EMBERT_H
#define EMBERT_H

#include <stddef.h>
#include <stdint.h>

typedef enum EmbertCategory {
  EMBERT_CATEGORY_NO_ENTITY = 0,
  EMBERT_CATEGORY_ONE_TOKEN = 1,
  EMBERT_CATEGORY_MULTI_NO_CONT = 2,
  EMBERT_CATEGORY_ONE_CONT = 3,
  EMBERT_CATEGORY_MULTI_CONT = 4,
} EmbertCategory;

typedef enum EmbertStatus {
  EMBERT_STATUS_OK = 0,
  EMBERT_STATUS_NULL_ARGUMENT = 1,
  EMBERT_STATUS_INVALID_UTF8 = 2,
  EMBERT_STATUS_IO = 3,
  EMBERT_STATUS_PARSE = 4,
  EMBERT_STATUS_INVALID_ARGUMENT = 5,
  EMBERT_STATUS_NOT_FOUND = 6,
  EMBERT_STATUS_NUMERIC = 7,
  EMBERT_STATUS_PANIC = 8,
} EmbertStatus;

// Ranked `(doc_id, score)` list.
typedef struct EmbertHits EmbertHits;

// BM25 index.
typedef struct EmbertIndex EmbertIndex;

// Encoder weights used without entity tokens.
typedef struct EmbertModel EmbertModel;

// List of strings.
typedef struct EmbertStrings EmbertStrings;

// Word-piece vocabulary.
typedef struct EmbertVocab EmbertVocab;

typedef struct EmbertTTest {
  double t;
  double df;
  double p;
} EmbertTTest;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null. Valid until the
// next call into this library on the same thread.
const char *embert_last_error(void);

// Library version as a static string.
const char *embert_version(void);

// # Safety
// `path` must be a valid C string and `out` a valid pointer.
enum EmbertStatus embert_vocab_load(const char *path, struct EmbertVocab **out);

// # Safety
// `vocab` must come from [`embert_vocab_load`] and not be used afterwards.
void embert_vocab_free(struct EmbertVocab *vocab);

// Word pieces of `text`, continuation pieces prefixed with `##`.
//
// # Safety
// Pointers must be valid; `out` receives a handle freed with
// [`embert_strings_free`].
enum EmbertStatus embert_vocab_tokenize(const struct EmbertVocab *vocab,
                                        const char *text,
                                        struct EmbertStrings **out);

// Tokenization category of one entity mention.
//
// # Safety
// Pointers must be valid.
enum EmbertStatus embert_vocab_categorize(const struct EmbertVocab *vocab,
                                          const char *mention,
                                          enum EmbertCategory *out);

// # Safety
// `strings` must be a live handle.
uintptr_t embert_strings_len(const struct EmbertStrings *strings);

// Entry `i`, or null when out of range. Owned by the handle.
//
// # Safety
// `strings` must be a live handle.
const char *embert_strings_get(const struct EmbertStrings *strings, uintptr_t i);

// # Safety
// `strings` must be a handle from this library, not used afterwards.
void embert_strings_free(struct EmbertStrings *strings);

// Build an index over `n` documents.
//
// # Safety
// `doc_ids` and `texts` must each point to `n` valid C strings.
enum EmbertStatus embert_index_build(const char *const *doc_ids,
                                     const char *const *texts,
                                     uintptr_t n,
                                     struct EmbertIndex **out);

// # Safety
// Pointers must be valid.
enum EmbertStatus embert_index_load(const char *path, struct EmbertIndex **out);

// # Safety
// Pointers must be valid.
enum EmbertStatus embert_index_save(const struct EmbertIndex *index, const char *path);

// # Safety
// `index` must be a live handle.
uintptr_t embert_index_num_docs(const struct EmbertIndex *index);

// # Safety
// `index` must come from this library and not be used afterwards.
void embert_index_free(struct EmbertIndex *index);

// Top `k` documents for `query` under BM25 (k1 = 0.9, b = 0.4).
//
// # Safety
// Pointers must be valid; `out` receives a handle freed with
// [`embert_hits_free`].
enum EmbertStatus embert_index_search(const struct EmbertIndex *index,
                                      const char *query,
                                      uintptr_t k,
                                      struct EmbertHits **out);

// # Safety
// `hits` must be a live handle.
uintptr_t embert_hits_len(const struct EmbertHits *hits);

// Document id at rank `i` (0-based), or null when out of range.
//
// # Safety
// `hits` must be a live handle.
const char *embert_hits_doc_id(const struct EmbertHits *hits, uintptr_t i);

// Score at rank `i`, NaN when out of range.
//
// # Safety
// `hits` must be a live handle.
double embert_hits_score(const struct EmbertHits *hits, uintptr_t i);

// # Safety
// `hits` must come from this library and not be used afterwards.
void embert_hits_free(struct EmbertHits *hits);

// # Safety
// Pointers must be valid.
enum EmbertStatus embert_model_load(const char *path, struct EmbertModel **out);

// # Safety
// `model` must come from this library and not be used afterwards.
void embert_model_free(struct EmbertModel *model);

// Relevance probability of `doc` for `query`, without entity tokens.
//
// # Safety
// Pointers must be valid.
enum EmbertStatus embert_model_score(const struct EmbertModel *model,
                                     const struct EmbertVocab *vocab,
                                     const char *query,
                                     const char *doc,
                                     double *out);

// NDCG@k of a ranking against graded judgments. Unjudged documents count
// as grade 0.
//
// # Safety
// `ranking` must hold `n` C strings; `judged` and `grades` `m` entries.
enum EmbertStatus embert_ndcg(const char *const *ranking,
                              uintptr_t n,
                              const char *const *judged,
                              const uint8_t *grades,
                              uintptr_t m,
                              uintptr_t k,
                              double *out);

// Two-tailed paired t-test over `n` paired observations.
//
// # Safety
// `a` and `b` must hold `n` values each.
enum EmbertStatus embert_paired_ttest(const double *a,
                                      const double *b,
                                      uintptr_t n,
                                      struct EmbertTTest *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* EMBERT_H */
