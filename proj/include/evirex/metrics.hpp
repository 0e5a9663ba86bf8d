#pragma once

#include <tuple>

#include "evirex/corpus.hpp"
#include "evirex/prediction.hpp"

namespace evirex {

struct PRF {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

struct EvalReport {
    PRF re;
    double ign_f1 = 0.0;
    PRF evi;
    std::size_t re_gold = 0, re_pred = 0, re_matched = 0;
    std::size_t evi_gold = 0, evi_pred = 0, evi_matched = 0;

    std::string to_json() const;
    std::string to_text() const; // aligned plain-text table
};

// Micro scores over exact (doc, s, o, r) matches; duplicate predictions are
// deduplicated first. Zero denominators score 0.
PRF re_f1(const std::vector<Prediction>& preds, const Corpus& gold);

// RE micro F1 after removing, from predictions and gold alike, every triple
// whose fact key (head surface-name set, r, tail surface-name set) overlaps a
// training-set fact on both sides.
double ign_f1(const std::vector<Prediction>& preds, const Corpus& gold_eval, const Corpus& train);

// Micro scores over (doc, s, o, r, sentence) tuples.
PRF evi_f1(const std::vector<Prediction>& preds, const Corpus& gold);

EvalReport evaluate(const std::vector<Prediction>& preds, const Corpus& gold,
                    const Corpus* train = nullptr);

} // namespace evirex
