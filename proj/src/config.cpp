#include "evirex/config.hpp"

#include <algorithm>
#include <cstdlib>

#include <json.hpp>

#include "evirex/error.hpp"

namespace evirex {

using nlohmann::json;

namespace {

const std::vector<std::string> kKnownKeys = {
    // run
    "seed", "lambda", "evi_threshold", "er_supervision", "re_loss", "select",
    // optimization
    "epochs", "lr_encoder", "lr_classifier", "batch_size", "grad_clip", "warmup_fraction",
    "weight_decay",
    // model
    "dim", "layers", "heads", "ffn_dim", "max_len", "avg_last_k", "k_groups", "vocab_size",
    // synthetic data
    "num_relations", "train_docs", "dev_docs", "distant_docs", "sentences_per_doc",
    "tokens_per_sentence", "entities_per_doc", "facts_per_doc", "entity_pool",
    "two_sentence_evidence",
    // fusion
    "tau",
};

bool known(const std::string& key) {
    return std::find(kKnownKeys.begin(), kKnownKeys.end(), key) != kKnownKeys.end();
}

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t");
    return s.substr(a, b - a + 1);
}

} // namespace

const std::vector<std::string>& RunConfig::known_keys() { return kKnownKeys; }

RunConfig RunConfig::parse(const std::string& text) {
    RunConfig cfg;
    std::size_t line_no = 0;
    for (const std::string& raw : split_lines(text)) {
        ++line_no;
        const std::string line = trim(raw);
        if (line.empty() || line[0] == '#') continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            raise(ErrorKind::config,
                  "config line " + std::to_string(line_no) + ": expected key = value");
        cfg.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return cfg;
}

void RunConfig::set(const std::string& key, const std::string& value) {
    if (!known(key)) raise(ErrorKind::config, "unknown config key: " + key);
    values_[key] = value;
}

std::string RunConfig::get_string(const std::string& key, const std::string& fallback) const {
    if (!known(key)) raise(ErrorKind::config, "unknown config key: " + key);
    auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
}

double RunConfig::get_double(const std::string& key, double fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) {
        if (!known(key)) raise(ErrorKind::config, "unknown config key: " + key);
        return fallback;
    }
    char* end = nullptr;
    const double v = std::strtod(it->second.c_str(), &end);
    if (end == it->second.c_str() || *end != '\0')
        raise(ErrorKind::config, "config key " + key + ": not a number: " + it->second);
    return v;
}

std::uint64_t RunConfig::get_u64(const std::string& key, std::uint64_t fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) {
        if (!known(key)) raise(ErrorKind::config, "unknown config key: " + key);
        return fallback;
    }
    char* end = nullptr;
    const unsigned long long v = std::strtoull(it->second.c_str(), &end, 10);
    if (end == it->second.c_str() || *end != '\0')
        raise(ErrorKind::config, "config key " + key + ": not an integer: " + it->second);
    return v;
}

std::size_t RunConfig::get_size(const std::string& key, std::size_t fallback) const {
    return static_cast<std::size_t>(get_u64(key, fallback));
}

std::string RunConfig::serialize_text() const {
    std::string out;
    for (const auto& [k, v] : values_) out += k + " = " + v + "\n";
    return out;
}

std::string RunConfig::canonical_json() const {
    json j = json::object();
    for (const auto& [k, v] : values_) j[k] = v;
    return j.dump();
}

std::string RunConfig::hash_hex() const { return to_hex(fnv1a64(canonical_json())); }

TrainConfig RunConfig::train_config() const {
    TrainConfig t;
    t.epochs = get_size("epochs", t.epochs);
    t.lr_encoder = get_double("lr_encoder", t.lr_encoder);
    t.lr_classifier = get_double("lr_classifier", t.lr_classifier);
    t.lambda = get_double("lambda", t.lambda);
    t.batch_size = get_size("batch_size", t.batch_size);
    t.grad_clip = get_double("grad_clip", t.grad_clip);
    t.warmup_fraction = get_double("warmup_fraction", t.warmup_fraction);
    t.weight_decay = get_double("weight_decay", t.weight_decay);
    t.seed = get_u64("seed", t.seed);
    t.re_loss = re_loss_from_string(get_string("re_loss", to_string(t.re_loss)));
    t.er_supervision =
        er_supervision_from_string(get_string("er_supervision", to_string(t.er_supervision)));
    const std::string select = get_string("select", t.select_best_dev ? "best-dev" : "final");
    if (select == "best-dev")
        t.select_best_dev = true;
    else if (select == "final")
        t.select_best_dev = false;
    else
        raise(ErrorKind::config, "select must be 'best-dev' or 'final'");
    t.evi_threshold = get_double("evi_threshold", t.evi_threshold);
    t.validate();
    return t;
}

ModelConfig RunConfig::model_config(const RelationSchema& schema) const {
    ModelConfig m;
    m.encoder.vocab_size = get_size("vocab_size", 200);
    m.encoder.dim = get_size("dim", 32);
    m.encoder.layers = get_size("layers", 2);
    m.encoder.heads = get_size("heads", 4);
    m.encoder.ffn_dim = get_size("ffn_dim", 64);
    m.encoder.max_len = get_size("max_len", 160);
    m.encoder.average_last_k = get_size("avg_last_k", 3);
    m.classifier.dim = m.encoder.dim;
    m.classifier.groups = get_size("k_groups", 4);
    m.classifier.num_real_relations = schema.num_real();
    m.validate();
    return m;
}

SynthConfig RunConfig::synth_config() const {
    SynthConfig s;
    s.vocab_size = get_size("vocab_size", s.vocab_size);
    s.num_relations = get_size("num_relations", s.num_relations);
    s.train_docs = get_size("train_docs", s.train_docs);
    s.dev_docs = get_size("dev_docs", s.dev_docs);
    s.distant_docs = get_size("distant_docs", s.distant_docs);
    s.sentences_per_doc = get_size("sentences_per_doc", s.sentences_per_doc);
    s.tokens_per_sentence = get_size("tokens_per_sentence", s.tokens_per_sentence);
    s.entities_per_doc = get_size("entities_per_doc", s.entities_per_doc);
    s.facts_per_doc = get_size("facts_per_doc", s.facts_per_doc);
    s.entity_pool = get_size("entity_pool", s.entity_pool);
    s.two_sentence_evidence = get_double("two_sentence_evidence", s.two_sentence_evidence);
    return s;
}

std::string default_config_text(const std::string& stage) {
    std::string model =
        "dim = 32\nlayers = 2\nheads = 4\nffn_dim = 64\nmax_len = 160\navg_last_k = 3\n"
        "k_groups = 4\nvocab_size = 200\n";
    std::string common = "seed = 1\nlambda = 0.1\nevi_threshold = 0.2\n";
    if (stage == "gen-data") {
        return common +
               "num_relations = 5\ntrain_docs = 200\ndev_docs = 50\ndistant_docs = 200\n"
               "sentences_per_doc = 6\ntokens_per_sentence = 8\nentities_per_doc = 4\n"
               "facts_per_doc = 3\nentity_pool = 40\ntwo_sentence_evidence = 0.25\n"
               "vocab_size = 200\n";
    }
    if (stage == "train-teacher") {
        return common + model +
               "epochs = 30\nlr_encoder = 3e-3\nlr_classifier = 6e-3\nbatch_size = 4\n"
               "grad_clip = 1.0\nwarmup_fraction = 0.06\nweight_decay = 0.0\n"
               "re_loss = atl\ner_supervision = gold\nselect = best-dev\n";
    }
    if (stage == "train-student") {
        return common + model +
               "epochs = 2\nlr_encoder = 2e-3\nlr_classifier = 6e-3\nbatch_size = 4\n"
               "grad_clip = 5.0\nwarmup_fraction = 0.06\nweight_decay = 0.0\n"
               "re_loss = bce\ner_supervision = silver\nselect = final\n";
    }
    if (stage == "finetune") {
        return common + model +
               "epochs = 10\nlr_encoder = 6e-5\nlr_classifier = 2e-4\nbatch_size = 4\n"
               "grad_clip = 2.0\nwarmup_fraction = 0.06\nweight_decay = 0.0\n"
               "re_loss = atl\ner_supervision = gold\nselect = best-dev\n";
    }
    if (stage == "predict" || stage == "distill" || stage == "eval" || stage == "fuse" ||
        stage == "inspect-attn") {
        return common;
    }
    raise(ErrorKind::config, "unknown stage: " + stage);
}

void write_manifest(const std::string& artifact_path, const std::string& stage,
                    const RunConfig& cfg, const std::vector<std::string>& input_paths,
                    const std::string& schema_hash_hex, const std::string& extra_json) {
    json j;
    j["stage"] = stage;
    j["seed"] = cfg.get_u64("seed", 1);
    j["config"] = json::parse(cfg.canonical_json());
    j["config_hash"] = cfg.hash_hex();
    if (!schema_hash_hex.empty()) j["schema_hash"] = schema_hash_hex;
    json inputs = json::object();
    for (const std::string& p : input_paths) inputs[p] = to_hex(hash_file(p));
    j["inputs"] = std::move(inputs);
    j["output"] = {{"path", artifact_path}, {"hash", to_hex(hash_file(artifact_path))}};
    if (!extra_json.empty()) j["extra"] = json::parse(extra_json);
    write_file(artifact_path + ".manifest.json", j.dump(1));
}

} // namespace evirex
