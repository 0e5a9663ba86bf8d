#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "evirex/util.hpp"

namespace evirex {

// Relation inventory. Id 0 is reserved for "no relation"; real relations are
// 1..num_real(). The classifier-only threshold class gets the id after the
// last real relation and never appears in data.
class RelationSchema {
public:
    static RelationSchema from_names(std::vector<std::string> names_with_epsilon);
    static RelationSchema parse(const std::string& text);

    std::string serialize() const; // one name per line, line 0 = no-relation
    std::uint64_t hash() const { return fnv1a64(serialize()); }

    std::size_t num_real() const { return names_.size() - 1; }
    int epsilon_id() const { return 0; }
    int th_id() const { return static_cast<int>(names_.size()); }

    const std::string& name(int id) const;
    int id_of(const std::string& name) const; // raises on unknown relation

private:
    std::vector<std::string> names_; // index 0 = epsilon
};

struct Mention {
    int sent_id = 0;
    int start = 0; // token offset within sentence
    int end = 0;   // exclusive
    std::string surface;
};

struct Entity {
    std::vector<Mention> mentions;
    std::string type_tag;
};

struct RelationInstance {
    int head = 0; // entity index
    int tail = 0;
    int relation = 0; // schema id, never epsilon
    std::set<int> evidence;
};

struct Document {
    std::string doc_id;
    std::vector<std::vector<std::string>> sentences;
    std::vector<Entity> entities;
    std::vector<RelationInstance> labels;

    // Raises a validation error naming this doc when any invariant fails.
    void validate(const RelationSchema& schema) const;
};

struct Corpus {
    std::vector<Document> docs;
};

// DocRED-shaped JSON: array of {title, sents, vertexSet, labels}. Documents
// without a `labels` field parse with empty label lists (distant data).
Corpus parse_docred(const std::string& json_text, const RelationSchema& schema);
std::string serialize_docred(const Corpus& corpus, const RelationSchema& schema);

// Word-level vocabulary with reserved control tokens.
class Vocabulary {
public:
    static constexpr int kUnk = 0;
    static constexpr int kMarker = 1; // the `*` wrapped around entity mentions
    static constexpr int kBos = 2;
    static constexpr int kEos = 3;
    static constexpr int kReserved = 4;

    // Most frequent words first (capped at max_size - reserved), ties broken
    // lexicographically so the result is independent of document order.
    static Vocabulary build(const Corpus& corpus, std::size_t max_size);
    static Vocabulary build(const std::vector<const Corpus*>& corpora, std::size_t max_size);

    static Vocabulary from_words(std::vector<std::string> words);

    int id(const std::string& word) const; // kUnk when out of vocabulary
    const std::string& word(int id) const;
    std::size_t size() const { return words_.size() + kReserved; }
    const std::vector<std::string>& words() const { return words_; }

private:
    std::vector<std::string> words_; // non-reserved words, id = index + kReserved
    std::map<std::string, int> index_;
};

struct TokenizedDocument {
    std::vector<int> ids;
    // Inclusive token range per sentence, covering that sentence's marker
    // tokens; BOS/EOS sit outside every span.
    std::vector<std::pair<int, int>> sentence_spans;
    // Positions of the opening `*` for each mention, grouped per entity.
    std::vector<std::vector<int>> mention_start_marker_pos;
    std::vector<int> marker_positions; // every marker token, sorted
    std::optional<int> bos_pos;
    std::optional<int> eos_pos;

    std::size_t token_count() const { return ids.size(); }
};

TokenizedDocument tokenize_with_markers(const Document& doc, const Vocabulary& vocab,
                                        bool add_bos_eos = true);

// Inverse of tokenize_with_markers up to vocabulary coverage: exact when no
// token mapped to UNK.
std::vector<std::vector<std::string>> reconstruct_sentences(const TokenizedDocument& tok,
                                                            const Vocabulary& vocab);

struct SynthConfig {
    std::size_t vocab_size = 200;   // total including reserved + entity/keyword tokens
    std::size_t num_relations = 5;  // real relations
    std::size_t train_docs = 200;
    std::size_t dev_docs = 50;
    std::size_t distant_docs = 200;
    std::size_t sentences_per_doc = 6;
    std::size_t tokens_per_sentence = 8;
    std::size_t entities_per_doc = 4;
    std::size_t facts_per_doc = 3;
    std::size_t entity_pool = 40;      // shared surface-name pool across documents
    double two_sentence_evidence = 0.25; // probability a fact gets two evidence sentences
};

struct SynthResult {
    Corpus train;
    Corpus dev;
    Corpus distant; // labels kept, evidence sets emptied
    RelationSchema schema;
};

SynthResult generate_synthetic(const SynthConfig& cfg, std::uint64_t seed);

} // namespace evirex
