#pragma once

#include <string>
#include <vector>

#include "evirex/encoder.hpp"
#include "evirex/error.hpp"
#include "evirex/rexmodel.hpp"

namespace evirex {

struct ModelConfig {
    EncoderConfig encoder;
    ClassifierConfig classifier;

    void validate() const {
        encoder.validate();
        classifier.validate();
        if (encoder.dim != classifier.dim)
            raise(ErrorKind::config, "encoder and classifier dims differ");
    }
};

// Everything a pipeline stage needs to run the network: weights plus the
// vocabulary and schema fingerprint the weights were trained against.
struct Model {
    ModelConfig cfg;
    Vocabulary vocab;
    num::ParamSet params;
    std::string schema_hash;  // hex
    std::string config_hash;  // hex, the run config that produced the checkpoint

    static Model fresh(const ModelConfig& cfg, const Vocabulary& vocab,
                       const std::string& schema_hash, std::uint64_t seed);
    std::size_t parameter_count() const;
};

// JSON checkpoint container: version tag, configs, vocabulary and
// name -> {shape, values} parameter map. Doubles round-trip exactly.
std::string serialize_model(const Model& model);
Model deserialize_model(const std::string& json_text);
void save_model(const Model& model, const std::string& path);
Model load_model(const std::string& path);

struct PairGraph {
    std::size_t subject = 0;
    std::size_t object = 0;
    num::Var q;      // 1 x |T|
    num::Var p;      // 1 x n_sentences
    num::Var scores; // 1 x (R+1), built only when requested
};

struct DocGraph {
    EncoderOutput enc;
    std::vector<PairGraph> pairs; // every ordered pair, (s, o) lexicographic
};

// Shared forward pass for training, prediction and distillation. Entity
// embeddings/importances are computed once per entity and reused by pairs.
DocGraph build_doc_graph(num::Tape& tape, const num::ParamLeaves& leaves,
                         const TokenizedDocument& tok, const ModelConfig& cfg,
                         bool with_scores = true);

} // namespace evirex
