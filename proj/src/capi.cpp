#include "evirex/evirex.h"

#include <cstring>
#include <filesystem>
#include <memory>
#include <sstream>
#include <string>

#include <json.hpp>

#include "evirex/config.hpp"
#include "evirex/error.hpp"
#include "evirex/pipeline.hpp"

using namespace evirex;

struct evx_corpus {
    Corpus corpus;
    RelationSchema schema;
    std::string schema_hash;
};

struct evx_model {
    Model model;
};

struct evx_store {
    SilverEvidenceStore store;
};

struct evx_predictions {
    std::vector<Prediction> preds;
    RelationSchema schema;
    std::string schema_hash;
};

namespace {

thread_local std::string g_last_error;

int code_for(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::io: return EVX_ERR_IO;
    case ErrorKind::parse: return EVX_ERR_PARSE;
    case ErrorKind::validation: return EVX_ERR_VALIDATION;
    case ErrorKind::config: return EVX_ERR_CONFIG;
    case ErrorKind::dimension: return EVX_ERR_DIMENSION;
    case ErrorKind::contract: return EVX_ERR_CONTRACT;
    case ErrorKind::state: return EVX_ERR_STATE;
    }
    return EVX_ERR_UNKNOWN;
}

template <typename Fn>
int guarded(Fn&& fn) {
    try {
        fn();
        return EVX_OK;
    } catch (const Error& e) {
        g_last_error = e.what();
        return code_for(e.kind());
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return EVX_ERR_UNKNOWN;
    } catch (...) {
        g_last_error = "unknown error";
        return EVX_ERR_UNKNOWN;
    }
}

char* dup_string(const std::string& s) {
    char* out = new char[s.size() + 1];
    std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

template <typename T>
void require(const T* p, const char* what) {
    if (!p) raise(ErrorKind::contract, std::string("null ") + what);
}

} // namespace

extern "C" {

const char* evx_version(void) { return "0.1.0"; }

const char* evx_last_error(void) { return g_last_error.c_str(); }

void evx_string_free(char* s) { delete[] s; }

int evx_default_config(const char* stage, char** out_text) {
    return guarded([&] {
        require(stage, "stage");
        require(out_text, "out_text");
        *out_text = dup_string(default_config_text(stage));
    });
}

int evx_config_get_double(const char* config_text, const char* key, double fallback,
                          double* out) {
    return guarded([&] {
        require(config_text, "config_text");
        require(key, "key");
        require(out, "out");
        *out = RunConfig::parse(config_text).get_double(key, fallback);
    });
}

int evx_gen_data(const char* config_text, const char* out_dir) {
    return guarded([&] {
        require(config_text, "config_text");
        require(out_dir, "out_dir");
        const RunConfig cfg = RunConfig::parse(config_text);
        const SynthConfig synth = cfg.synth_config();
        const std::uint64_t seed = cfg.get_u64("seed", 1);
        SynthResult result = generate_synthetic(synth, seed);

        namespace fs = std::filesystem;
        fs::create_directories(out_dir);
        const std::string base = std::string(out_dir) + "/";
        const std::string schema_path = base + "schema.txt";
        write_file(schema_path, result.schema.serialize());
        const std::string schema_hash = to_hex(result.schema.hash());

        auto emit = [&](const Corpus& c, const std::string& name) {
            const std::string path = base + name + ".json";
            write_file(path, serialize_docred(c, result.schema));
            write_manifest(path, "gen-data", cfg, {}, schema_hash);
        };
        emit(result.train, "train");
        emit(result.dev, "dev");
        emit(result.distant, "distant");
        write_manifest(schema_path, "gen-data", cfg, {}, schema_hash);
    });
}

int evx_corpus_open(const char* corpus_path, const char* schema_path, evx_corpus** out) {
    return guarded([&] {
        require(corpus_path, "corpus_path");
        require(schema_path, "schema_path");
        require(out, "out");
        auto handle = std::make_unique<evx_corpus>();
        handle->schema = RelationSchema::parse(read_file(schema_path));
        handle->schema_hash = to_hex(handle->schema.hash());
        handle->corpus = parse_docred(read_file(corpus_path), handle->schema);
        *out = handle.release();
    });
}

int evx_corpus_save(const evx_corpus* corpus, const char* path) {
    return guarded([&] {
        require(corpus, "corpus");
        require(path, "path");
        write_file(path, serialize_docred(corpus->corpus, corpus->schema));
    });
}

int evx_corpus_doc_count(const evx_corpus* corpus, unsigned long long* out) {
    return guarded([&] {
        require(corpus, "corpus");
        require(out, "out");
        *out = corpus->corpus.docs.size();
    });
}

void evx_corpus_free(evx_corpus* corpus) { delete corpus; }

int evx_model_load(const char* path, evx_model** out) {
    return guarded([&] {
        require(path, "path");
        require(out, "out");
        auto handle = std::make_unique<evx_model>();
        handle->model = load_model(path);
        *out = handle.release();
    });
}

int evx_model_save(const evx_model* model, const char* path) {
    return guarded([&] {
        require(model, "model");
        require(path, "path");
        save_model(model->model, path);
    });
}

int evx_model_param_count(const evx_model* model, unsigned long long* out) {
    return guarded([&] {
        require(model, "model");
        require(out, "out");
        *out = model->model.parameter_count();
    });
}

void evx_model_free(evx_model* model) { delete model; }

int evx_store_load(const char* path, evx_store** out) {
    return guarded([&] {
        require(path, "path");
        require(out, "out");
        auto handle = std::make_unique<evx_store>();
        handle->store = SilverEvidenceStore::load(path);
        *out = handle.release();
    });
}

int evx_store_save(const evx_store* store, const char* path) {
    return guarded([&] {
        require(store, "store");
        require(path, "path");
        store->store.save(path);
    });
}

void evx_store_free(evx_store* store) { delete store; }

int evx_predictions_load(const char* path, const char* schema_path, evx_predictions** out) {
    return guarded([&] {
        require(path, "path");
        require(schema_path, "schema_path");
        require(out, "out");
        auto handle = std::make_unique<evx_predictions>();
        handle->schema = RelationSchema::parse(read_file(schema_path));
        handle->schema_hash = to_hex(handle->schema.hash());
        handle->preds = parse_predictions(read_file(path), handle->schema);

        const std::string manifest_path = std::string(path) + ".manifest.json";
        if (std::filesystem::exists(manifest_path)) {
            const auto j = nlohmann::json::parse(read_file(manifest_path));
            if (j.contains("schema_hash") &&
                j["schema_hash"].get<std::string>() != handle->schema_hash)
                raise(ErrorKind::state,
                      "predictions were produced against a different relation schema");
        }
        *out = handle.release();
    });
}

int evx_predictions_save(const evx_predictions* preds, const char* path) {
    return guarded([&] {
        require(preds, "preds");
        require(path, "path");
        write_file(path, serialize_predictions(preds->preds, preds->schema));
    });
}

int evx_predictions_count(const evx_predictions* preds, unsigned long long* out) {
    return guarded([&] {
        require(preds, "preds");
        require(out, "out");
        *out = preds->preds.size();
    });
}

void evx_predictions_free(evx_predictions* preds) { delete preds; }

int evx_train(const char* config_text, const evx_corpus* train_corpus, const evx_corpus* dev,
              const evx_model* init, const evx_store* silver, evx_model** out_model,
              char** out_log_json) {
    return guarded([&] {
        require(config_text, "config_text");
        require(train_corpus, "train corpus");
        require(out_model, "out_model");
        if (dev && dev->schema_hash != train_corpus->schema_hash)
            raise(ErrorKind::state, "train and dev corpora use different schemas");

        const RunConfig cfg = RunConfig::parse(config_text);
        const TrainConfig tcfg = cfg.train_config();
        const ModelConfig mcfg = cfg.model_config(train_corpus->schema);

        std::ostringstream log_sink;
        TrainResult result = train(train_corpus->corpus, dev ? &dev->corpus : nullptr,
                                   train_corpus->schema, mcfg, tcfg,
                                   init ? &init->model : nullptr,
                                   silver ? &silver->store : nullptr, &log_sink);
        result.model.config_hash = cfg.hash_hex();

        if (out_log_json) {
            nlohmann::json j = nlohmann::json::array();
            for (const EpochLog& e : result.log) {
                nlohmann::json je = {{"epoch", e.epoch},
                                     {"loss_re", e.loss_re},
                                     {"loss_er", e.loss_er},
                                     {"loss_total", e.loss_total}};
                if (e.dev_re_f1 >= 0.0) {
                    je["dev_re_f1"] = e.dev_re_f1;
                    je["dev_evi_f1"] = e.dev_evi_f1;
                }
                j.push_back(std::move(je));
            }
            nlohmann::json root = {{"epochs", std::move(j)},
                                   {"skipped_docs", result.skipped_docs},
                                   {"selected_epoch", result.selected_epoch},
                                   {"lines", log_sink.str()}};
            *out_log_json = dup_string(root.dump());
        }
        auto handle = std::make_unique<evx_model>();
        handle->model = std::move(result.model);
        *out_model = handle.release();
    });
}

int evx_distill(const evx_model* teacher, const evx_corpus* distant, evx_store** out) {
    return guarded([&] {
        require(teacher, "teacher");
        require(distant, "distant corpus");
        require(out, "out");
        auto handle = std::make_unique<evx_store>();
        handle->store = distill(teacher->model, distant->corpus);
        *out = handle.release();
    });
}

int evx_predict(const evx_model* model, const evx_corpus* corpus, double evi_threshold,
                evx_predictions** out) {
    return guarded([&] {
        require(model, "model");
        require(corpus, "corpus");
        require(out, "out");
        if (model->model.schema_hash != corpus->schema_hash)
            raise(ErrorKind::state, "model was trained against a different relation schema");
        auto handle = std::make_unique<evx_predictions>();
        handle->schema = corpus->schema;
        handle->schema_hash = corpus->schema_hash;
        handle->preds = predict(model->model, corpus->corpus, evi_threshold);
        *out = handle.release();
    });
}

int evx_fuse(const evx_model* model, const evx_predictions* preds, const evx_corpus* dev,
             evx_predictions** out_fused, double* out_tau) {
    return guarded([&] {
        require(model, "model");
        require(preds, "preds");
        require(dev, "dev corpus");
        require(out_fused, "out_fused");
        if (preds->schema_hash != dev->schema_hash)
            raise(ErrorKind::state, "predictions and dev corpus use different schemas");
        FuseResult result = fuse(model->model, preds->preds, dev->corpus);
        if (out_tau) *out_tau = result.config.tau;
        auto handle = std::make_unique<evx_predictions>();
        handle->schema = preds->schema;
        handle->schema_hash = preds->schema_hash;
        handle->preds = std::move(result.fused);
        *out_fused = handle.release();
    });
}

int evx_eval(const evx_predictions* preds, const evx_corpus* gold, const evx_corpus* train,
             char** out_report_json, char** out_report_text) {
    return guarded([&] {
        require(preds, "preds");
        require(gold, "gold corpus");
        if (preds->schema_hash != gold->schema_hash)
            raise(ErrorKind::state, "predictions and gold corpus use different schemas");
        EvalReport rep = evaluate(preds->preds, gold->corpus, train ? &train->corpus : nullptr);
        if (out_report_json) *out_report_json = dup_string(rep.to_json());
        if (out_report_text) *out_report_text = dup_string(rep.to_text());
    });
}

int evx_inspect_attn(const evx_model* model, const evx_corpus* corpus, const char* doc_id,
                     int subject, int object, char** out_text) {
    return guarded([&] {
        require(model, "model");
        require(corpus, "corpus");
        require(doc_id, "doc_id");
        require(out_text, "out_text");
        *out_text =
            dup_string(inspect_attention(model->model, corpus->corpus, doc_id, subject, object));
    });
}

int evx_write_manifest(const char* artifact_path, const char* stage, const char* config_text,
                       const char* const* input_paths, unsigned n_inputs,
                       const char* schema_path, const char* extra_json) {
    return guarded([&] {
        require(artifact_path, "artifact_path");
        require(stage, "stage");
        require(config_text, "config_text");
        const RunConfig cfg = RunConfig::parse(config_text);
        std::vector<std::string> inputs;
        for (unsigned i = 0; i < n_inputs; ++i) inputs.emplace_back(input_paths[i]);
        std::string schema_hash;
        if (schema_path)
            schema_hash = to_hex(RelationSchema::parse(read_file(schema_path)).hash());
        write_manifest(artifact_path, stage, cfg, inputs, schema_hash,
                       extra_json ? extra_json : "");
    });
}

} // extern "C"
