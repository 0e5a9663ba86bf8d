#pragma once

#include <optional>
#include <vector>

#include "evirex/corpus.hpp"
#include "evirex/params.hpp"

namespace evirex {

constexpr double kEpsLog = 1e-12; // floor inside KL logs; importances can hit exact zero

// p_i = sum of q over sentence i's token span (marker tokens included,
// BOS/EOS excluded). Not renormalized: the BOS/EOS mass simply never reaches
// any sentence.
num::Var sentence_importance(num::Tape& tape, num::Var q, const TokenizedDocument& tok);

// Eq.-style marginal over the pair's relations: nullopt (abstain) when the
// pair has no relation or every evidence set is empty.
std::optional<std::vector<double>>
gold_evidence_distribution(const std::vector<const RelationInstance*>& pair_labels,
                           std::size_t n_sentences);

// KL(target || predicted) with log flooring; target is a constant.
num::Var kl_to_target(num::Tape& tape, const std::vector<double>& target, num::Var predicted);

inline num::Var er_loss_gold(num::Tape& tape, const std::vector<double>& v, num::Var p) {
    return kl_to_target(tape, v, p);
}
inline num::Var er_loss_silver(num::Tape& tape, const std::vector<double>& stored_q, num::Var q) {
    return kl_to_target(tape, stored_q, q);
}

num::Var combine_losses(num::Tape& tape, num::Var re_loss, num::Var er_loss, double lambda);

// Teacher-predicted token-level evidence distributions, keyed per document by
// ordered entity pair. Persisted at 16-bit float precision and renormalized
// on load.
class SilverEvidenceStore {
public:
    struct PairKey {
        int subject = 0;
        int object = 0;
        bool operator<(const PairKey& o) const {
            return subject != o.subject ? subject < o.subject : object < o.object;
        }
    };

    void put(const std::string& doc_id, int subject, int object, std::vector<double> q);
    void mark_skipped(const std::string& doc_id) { skipped_.push_back(doc_id); }

    bool has_doc(const std::string& doc_id) const { return docs_.count(doc_id) > 0; }
    bool was_skipped(const std::string& doc_id) const;
    // Raises a store-consistency error when the stored length does not match
    // expected_tokens.
    const std::vector<double>& get(const std::string& doc_id, int subject, int object,
                                   std::size_t expected_tokens) const;
    std::size_t pair_count(const std::string& doc_id) const;
    std::size_t doc_count() const { return docs_.size(); }
    const std::vector<std::string>& skipped_docs() const { return skipped_; }

    // Binary container: header with format version and precision tag, then
    // records in document insertion order, pairs in (s, o) order.
    std::string serialize() const;
    static SilverEvidenceStore deserialize(const std::string& bytes);

    void save(const std::string& path) const;
    static SilverEvidenceStore load(const std::string& path);

private:
    struct DocRecord {
        std::map<PairKey, std::vector<double>> pairs;
        std::size_t token_count = 0;
    };
    std::map<std::string, DocRecord> docs_;
    std::vector<std::string> doc_order_;
    std::vector<std::string> skipped_;
};

} // namespace evirex
