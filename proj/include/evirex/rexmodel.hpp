#pragma once

#include <set>
#include <vector>

#include "evirex/corpus.hpp"
#include "evirex/encoder.hpp"
#include "evirex/params.hpp"

namespace evirex {

struct ClassifierConfig {
    std::size_t dim = 32;
    std::size_t num_real_relations = 5;
    std::size_t groups = 4; // blocks of the grouped bilinear form

    std::size_t score_width() const { return num_real_relations + 1; } // TH at index 0
    void validate() const;
};

// Score-vector layout: index 0 is the threshold class TH, index r (1-based)
// is the real relation with schema id r. No-relation has no score row.
constexpr std::size_t kThIndex = 0;

// Per-pair attention-derived quantities (Hadamard of the two entities' token
// importance, normalized to a distribution).
struct PairContext {
    num::Var a_subject;
    num::Var a_object;
    num::Var q;
};

constexpr double kEpsDiv = 1e-30;
// Below this pre-normalization mass q degenerates to uniform (disjoint
// attention supports); post-softmax attention never triggers it in practice.
constexpr double kDegenerateMass = 1e-20;

void init_classifier_params(num::ParamSet& params, const ClassifierConfig& cfg, Rng& rng);
std::size_t classifier_parameter_count(const ClassifierConfig& cfg);

// logsumexp pooling over the H rows at the entity's opening markers.
num::Var entity_embedding(num::Tape& tape, const EncoderOutput& out,
                          const TokenizedDocument& tok, std::size_t entity);

// Mean of the A rows at the entity's opening markers.
num::Var entity_token_importance(num::Tape& tape, const EncoderOutput& out,
                                 const TokenizedDocument& tok, std::size_t entity);

// q from two precomputed entity importance rows (lets a document graph share
// per-entity work across its pairs).
PairContext pair_token_distribution(num::Tape& tape, num::Var a_subject, num::Var a_object,
                                    double eps_div = kEpsDiv);

PairContext token_importance(num::Tape& tape, const EncoderOutput& out,
                             const TokenizedDocument& tok, std::size_t subject,
                             std::size_t object, double eps_div = kEpsDiv);

num::Var local_context(num::Tape& tape, const EncoderOutput& out, num::Var q);

num::Var relation_scores(num::Tape& tape, const num::ParamLeaves& leaves, num::Var h_subject,
                         num::Var h_object, num::Var context, const ClassifierConfig& cfg);

// Adaptive thresholding loss in negative log-likelihood form: positive
// classes compete with TH, TH competes with the negatives.
num::Var atl_loss(num::Tape& tape, num::Var scores, const std::set<int>& positive_relations,
                  const ClassifierConfig& cfg);

// Multi-label binary cross-entropy over the real relation scores (sum of
// per-class terms).
num::Var bce_loss(num::Tape& tape, num::Var scores, const std::set<int>& positive_relations,
                  const ClassifierConfig& cfg);

} // namespace evirex
