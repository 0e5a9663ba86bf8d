#pragma once

#include <map>
#include <string>
#include <vector>

#include "evirex/corpus.hpp"
#include "evirex/model.hpp"
#include "evirex/pipeline.hpp"

namespace evirex {

// Flat key=value run configuration. Parsing rejects unknown keys; later
// assignments override earlier ones, so stage defaults, a config file and
// command-line flags can be concatenated in that order.
class RunConfig {
public:
    static RunConfig parse(const std::string& text);
    static const std::vector<std::string>& known_keys();

    void set(const std::string& key, const std::string& value);
    bool has(const std::string& key) const { return values_.count(key) > 0; }

    std::string get_string(const std::string& key, const std::string& fallback) const;
    double get_double(const std::string& key, double fallback) const;
    std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
    std::size_t get_size(const std::string& key, std::size_t fallback) const;

    std::string serialize_text() const;  // canonical key = value form, sorted
    std::string canonical_json() const;  // sorted-key JSON object
    std::string hash_hex() const;

    TrainConfig train_config() const;
    ModelConfig model_config(const RelationSchema& schema) const;
    SynthConfig synth_config() const;

private:
    std::map<std::string, std::string> values_;
};

// Per-stage default configuration, concatenable with user overrides.
std::string default_config_text(const std::string& stage);

// Writes `<artifact_path>.manifest.json`: stage name, effective config and
// its hash, seed, input/output file hashes, optional schema hash and extras.
void write_manifest(const std::string& artifact_path, const std::string& stage,
                    const RunConfig& cfg, const std::vector<std::string>& input_paths,
                    const std::string& schema_hash_hex = "",
                    const std::string& extra_json = "");

} // namespace evirex
