/* evirex C API: evidence-guided document-level relation extraction.
 *
 * All functions return EVX_OK (0) on success or a nonzero error code;
 * evx_last_error() describes the most recent failure on the calling thread.
 * Objects returned through out-parameters are owned by the caller and must
 * be released with the matching *_free function. Strings returned through
 * char** out-parameters are released with evx_string_free.
 */
#ifndef EVIREX_H
#define EVIREX_H

#ifdef __cplusplus
extern "C" {
#endif

enum evx_status {
    EVX_OK = 0,
    EVX_ERR_IO = 1,
    EVX_ERR_PARSE = 2,
    EVX_ERR_VALIDATION = 3,
    EVX_ERR_CONFIG = 4,
    EVX_ERR_DIMENSION = 5,
    EVX_ERR_CONTRACT = 6,
    EVX_ERR_STATE = 7,
    EVX_ERR_UNKNOWN = 8
};

typedef struct evx_corpus evx_corpus;           /* documents + relation schema */
typedef struct evx_model evx_model;             /* checkpoint: weights, vocab, config */
typedef struct evx_store evx_store;             /* silver evidence store */
typedef struct evx_predictions evx_predictions; /* extracted triples + evidence */

const char* evx_version(void);
const char* evx_last_error(void);
void evx_string_free(char* s);

/* Per-stage default configuration as `key = value` text. Concatenate with
 * file contents and flag overrides (later lines win) and pass the result to
 * the stage functions below. Stages: gen-data, train-teacher, train-student,
 * finetune, predict, distill, fuse, eval, inspect-attn. */
int evx_default_config(const char* stage, char** out_text);

/* Reads one numeric key out of effective config text (fallback when the key
 * is absent). Unknown keys are an error. */
int evx_config_get_double(const char* config_text, const char* key, double fallback,
                          double* out);

/* Generates the synthetic corpus triple (train/dev/distant), the relation
 * schema file and per-artifact manifests into out_dir. */
int evx_gen_data(const char* config_text, const char* out_dir);

int evx_corpus_open(const char* corpus_path, const char* schema_path, evx_corpus** out);
int evx_corpus_save(const evx_corpus* corpus, const char* path);
int evx_corpus_doc_count(const evx_corpus* corpus, unsigned long long* out);
void evx_corpus_free(evx_corpus* corpus);

int evx_model_load(const char* path, evx_model** out);
int evx_model_save(const evx_model* model, const char* path);
int evx_model_param_count(const evx_model* model, unsigned long long* out);
void evx_model_free(evx_model* model);

int evx_store_load(const char* path, evx_store** out);
int evx_store_save(const evx_store* store, const char* path);
void evx_store_free(evx_store* store);

/* Loading validates `<path>.manifest.json` (when present) against the schema:
 * a schema-hash mismatch is an error. */
int evx_predictions_load(const char* path, const char* schema_path, evx_predictions** out);
int evx_predictions_save(const evx_predictions* preds, const char* path);
int evx_predictions_count(const evx_predictions* preds, unsigned long long* out);
void evx_predictions_free(evx_predictions* preds);

/* Training covers the teacher, student and finetune stages; er_supervision,
 * re_loss, epochs etc. come from the config text. `dev` enables per-epoch
 * evaluation and best-dev selection, `init` continues from a checkpoint and
 * `silver` backs er_supervision=silver. out_log_json receives the per-epoch
 * loss components when non-NULL. */
int evx_train(const char* config_text, const evx_corpus* train, const evx_corpus* dev,
              const evx_model* init, const evx_store* silver, evx_model** out_model,
              char** out_log_json);

int evx_distill(const evx_model* teacher, const evx_corpus* distant, evx_store** out);

int evx_predict(const evx_model* model, const evx_corpus* corpus, double evi_threshold,
                evx_predictions** out);

/* Tunes the blending threshold tau on dev and filters the predictions (which
 * must refer to dev documents). */
int evx_fuse(const evx_model* model, const evx_predictions* preds, const evx_corpus* dev,
             evx_predictions** out_fused, double* out_tau);

int evx_eval(const evx_predictions* preds, const evx_corpus* gold, const evx_corpus* train,
             char** out_report_json, char** out_report_text);

int evx_inspect_attn(const evx_model* model, const evx_corpus* corpus, const char* doc_id,
                     int subject, int object, char** out_text);

/* Writes `<artifact_path>.manifest.json` recording the stage, effective
 * config (echo + hash), seed, input hashes and the artifact hash. */
int evx_write_manifest(const char* artifact_path, const char* stage, const char* config_text,
                       const char* const* input_paths, unsigned n_inputs,
                       const char* schema_path, const char* extra_json);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* EVIREX_H */
