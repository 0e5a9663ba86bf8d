#pragma once

#include <set>
#include <string>
#include <vector>

#include "evirex/corpus.hpp"

namespace evirex {

// One extracted triple with its score margin over the threshold class and
// the (relation-agnostic) evidence sentence set.
struct Prediction {
    std::string doc_id;
    int subject = 0;
    int object = 0;
    int relation = 0; // schema id
    double score = 0.0; // y_r - y_TH on the full document
    std::set<int> evidence;
};

// DocRED submission shape plus score/evidence extensions:
// [{title, h_idx, t_idx, r, score, evidence: [...]}, ...]
std::string serialize_predictions(const std::vector<Prediction>& preds,
                                  const RelationSchema& schema);
std::vector<Prediction> parse_predictions(const std::string& json_text,
                                          const RelationSchema& schema);

} // namespace evirex
