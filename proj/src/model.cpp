#include "evirex/model.hpp"

#include <json.hpp>

#include "evirex/error.hpp"
#include "evirex/evidence.hpp"

namespace evirex {

using nlohmann::json;
using num::Tensor;
using num::Var;

namespace {
constexpr int kCheckpointVersion = 1;
}

Model Model::fresh(const ModelConfig& cfg, const Vocabulary& vocab,
                   const std::string& schema_hash, std::uint64_t seed) {
    cfg.validate();
    if (vocab.size() > cfg.encoder.vocab_size)
        raise(ErrorKind::config, "vocabulary larger than encoder vocab size");
    Model m;
    m.cfg = cfg;
    m.cfg.encoder.vocab_size = vocab.size();
    m.vocab = vocab;
    m.schema_hash = schema_hash;
    Rng rng(seed);
    init_encoder_params(m.params, m.cfg.encoder, rng);
    init_classifier_params(m.params, m.cfg.classifier, rng);
    return m;
}

std::size_t Model::parameter_count() const {
    return encoder_parameter_count(cfg.encoder) + classifier_parameter_count(cfg.classifier);
}

std::string serialize_model(const Model& model) {
    json j;
    j["format_version"] = kCheckpointVersion;
    j["kind"] = "checkpoint";
    j["schema_hash"] = model.schema_hash;
    j["config_hash"] = model.config_hash;
    j["encoder"] = {{"vocab_size", model.cfg.encoder.vocab_size},
                    {"dim", model.cfg.encoder.dim},
                    {"layers", model.cfg.encoder.layers},
                    {"heads", model.cfg.encoder.heads},
                    {"ffn_dim", model.cfg.encoder.ffn_dim},
                    {"max_len", model.cfg.encoder.max_len},
                    {"average_last_k", model.cfg.encoder.average_last_k}};
    j["classifier"] = {{"dim", model.cfg.classifier.dim},
                       {"num_real_relations", model.cfg.classifier.num_real_relations},
                       {"groups", model.cfg.classifier.groups}};
    j["vocab"] = model.vocab.words();
    json params = json::object();
    for (const auto& e : model.params) {
        params[e.name] = {{"shape", e.value.shape},
                          {"trainable", e.trainable},
                          {"values", e.value.v}};
    }
    j["params"] = std::move(params);
    return j.dump();
}

Model deserialize_model(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::parse_error& e) {
        raise(ErrorKind::parse, std::string("checkpoint malformed: ") + e.what());
    }
    if (j.value("format_version", -1) != kCheckpointVersion)
        raise(ErrorKind::parse, "checkpoint: unsupported format version");

    Model m;
    m.schema_hash = j.value("schema_hash", "");
    m.config_hash = j.value("config_hash", "");
    const auto& je = j.at("encoder");
    m.cfg.encoder.vocab_size = je.at("vocab_size").get<std::size_t>();
    m.cfg.encoder.dim = je.at("dim").get<std::size_t>();
    m.cfg.encoder.layers = je.at("layers").get<std::size_t>();
    m.cfg.encoder.heads = je.at("heads").get<std::size_t>();
    m.cfg.encoder.ffn_dim = je.at("ffn_dim").get<std::size_t>();
    m.cfg.encoder.max_len = je.at("max_len").get<std::size_t>();
    m.cfg.encoder.average_last_k = je.at("average_last_k").get<std::size_t>();
    const auto& jc = j.at("classifier");
    m.cfg.classifier.dim = jc.at("dim").get<std::size_t>();
    m.cfg.classifier.num_real_relations = jc.at("num_real_relations").get<std::size_t>();
    m.cfg.classifier.groups = jc.at("groups").get<std::size_t>();
    m.cfg.validate();
    m.vocab = Vocabulary::from_words(j.at("vocab").get<std::vector<std::string>>());

    for (const auto& [name, jp] : j.at("params").items()) {
        auto shape = jp.at("shape").get<std::vector<std::size_t>>();
        if (shape.size() != 2) raise(ErrorKind::parse, "checkpoint: tensors must be rank 2");
        Tensor t(shape[0], shape[1]);
        t.v = jp.at("values").get<std::vector<double>>();
        if (t.v.size() != shape[0] * shape[1])
            raise(ErrorKind::parse, "checkpoint: value count mismatch for " + name);
        m.params.add(name, std::move(t), jp.value("trainable", true));
    }
    return m;
}

void save_model(const Model& model, const std::string& path) {
    write_file(path, serialize_model(model));
}

Model load_model(const std::string& path) { return deserialize_model(read_file(path)); }

DocGraph build_doc_graph(num::Tape& tape, const num::ParamLeaves& leaves,
                         const TokenizedDocument& tok, const ModelConfig& cfg,
                         bool with_scores) {
    DocGraph g;
    g.enc = encode(tape, leaves, tok, cfg.encoder);

    const std::size_t n_entities = tok.mention_start_marker_pos.size();
    std::vector<Var> h(n_entities), a(n_entities);
    for (std::size_t e = 0; e < n_entities; ++e) {
        h[e] = entity_embedding(tape, g.enc, tok, e);
        a[e] = entity_token_importance(tape, g.enc, tok, e);
    }

    for (std::size_t s = 0; s < n_entities; ++s) {
        for (std::size_t o = 0; o < n_entities; ++o) {
            if (s == o) continue;
            PairGraph pair;
            pair.subject = s;
            pair.object = o;
            PairContext ctx = pair_token_distribution(tape, a[s], a[o]);
            pair.q = ctx.q;
            pair.p = sentence_importance(tape, pair.q, tok);
            if (with_scores) {
                Var c = local_context(tape, g.enc, pair.q);
                pair.scores = relation_scores(tape, leaves, h[s], h[o], c, cfg.classifier);
            }
            g.pairs.push_back(pair);
        }
    }
    return g;
}

} // namespace evirex
