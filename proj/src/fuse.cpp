#include <algorithm>
#include <cmath>
#include <map>

#include "evirex/error.hpp"
#include "evirex/pipeline.hpp"

namespace evirex {

using num::Tape;

namespace {

// Pseudo-document: the triple's evidence sentences in original order,
// entities re-indexed, mentions outside the evidence dropped.
struct PseudoDoc {
    Document doc;
    std::map<int, int> entity_remap; // original index -> pseudo index
};

PseudoDoc build_pseudo(const Document& src, const std::set<int>& evidence) {
    PseudoDoc out;
    out.doc.doc_id = src.doc_id;
    std::map<int, int> sent_remap;
    for (int s : evidence) {
        sent_remap[s] = static_cast<int>(out.doc.sentences.size());
        out.doc.sentences.push_back(src.sentences[static_cast<std::size_t>(s)]);
    }
    for (int e = 0; e < static_cast<int>(src.entities.size()); ++e) {
        Entity kept;
        kept.type_tag = src.entities[static_cast<std::size_t>(e)].type_tag;
        for (const Mention& m : src.entities[static_cast<std::size_t>(e)].mentions) {
            auto it = sent_remap.find(m.sent_id);
            if (it == sent_remap.end()) continue;
            Mention moved = m;
            moved.sent_id = it->second;
            kept.mentions.push_back(moved);
        }
        if (!kept.mentions.empty()) {
            out.entity_remap[e] = static_cast<int>(out.doc.entities.size());
            out.doc.entities.push_back(std::move(kept));
        }
    }
    return out;
}

} // namespace

double fusion_bce(const std::vector<std::pair<double, bool>>& scored, double tau) {
    if (scored.empty()) return 0.0;
    double loss = 0.0;
    for (const auto& [fused, is_gold] : scored) {
        double prob = 1.0 / (1.0 + std::exp(-(fused - tau)));
        prob = std::min(1.0 - 1e-12, std::max(1e-12, prob));
        loss += is_gold ? -std::log(prob) : -std::log(1.0 - prob);
    }
    return loss / static_cast<double>(scored.size());
}

FuseResult fuse(const Model& model, const std::vector<Prediction>& predictions,
                const Corpus& dev_corpus) {
    std::map<std::string, const Document*> by_id;
    for (const Document& d : dev_corpus.docs) by_id[d.doc_id] = &d;

    std::set<std::tuple<std::string, int, int, int>> gold;
    for (const Document& d : dev_corpus.docs)
        for (const RelationInstance& r : d.labels)
            gold.insert({d.doc_id, r.head, r.tail, r.relation});

    // margins of every pseudo-document pair, cached per (doc, evidence set)
    std::map<std::pair<std::string, std::set<int>>,
             std::map<std::pair<int, int>, std::vector<double>>>
        pseudo_cache;
    std::map<std::pair<std::string, std::set<int>>, std::map<int, int>> remap_cache;

    auto pseudo_margins = [&](const Prediction& pred)
        -> const std::map<std::pair<int, int>, std::vector<double>>* {
        const std::pair<std::string, std::set<int>> key{pred.doc_id, pred.evidence};
        auto it = pseudo_cache.find(key);
        if (it != pseudo_cache.end()) return &it->second;

        const Document* src = by_id.count(pred.doc_id) ? by_id.at(pred.doc_id) : nullptr;
        if (!src)
            raise(ErrorKind::state, "prediction references unknown doc " + pred.doc_id);
        PseudoDoc pseudo = build_pseudo(*src, pred.evidence);
        remap_cache[key] = pseudo.entity_remap;
        auto& slot = pseudo_cache[key];
        if (pseudo.doc.entities.size() >= 2 &&
            !pseudo.doc.sentences.empty()) {
            TokenizedDocument tok = tokenize_with_markers(pseudo.doc, model.vocab);
            if (tok.token_count() <= model.cfg.encoder.max_len) {
                Tape tape;
                num::ParamLeaves leaves = make_leaves(tape, model.params);
                DocGraph graph = build_doc_graph(tape, leaves, tok, model.cfg, true);
                for (const PairGraph& pair : graph.pairs) {
                    const num::Tensor& y = tape.value(pair.scores);
                    std::vector<double> margins(y.cols());
                    for (std::size_t r = 0; r < y.cols(); ++r)
                        margins[r] = y.v[r] - y.v[kThIndex];
                    slot[{static_cast<int>(pair.subject), static_cast<int>(pair.object)}] =
                        std::move(margins);
                }
            }
        }
        return &slot;
    };

    std::vector<std::pair<double, bool>> scored; // fused score, is-gold
    std::vector<double> fused_scores(predictions.size());
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        const Prediction& pred = predictions[i];
        double fused = pred.score;
        const auto* margins = pseudo_margins(pred);
        const auto& remap = remap_cache.at({pred.doc_id, pred.evidence});
        auto s_it = remap.find(pred.subject);
        auto o_it = remap.find(pred.object);
        // a triple whose subject or object lost every mention keeps only its
        // full-document score
        if (s_it != remap.end() && o_it != remap.end()) {
            auto m_it = margins->find({s_it->second, o_it->second});
            if (m_it != margins->end())
                fused += m_it->second[static_cast<std::size_t>(pred.relation)];
        }
        fused_scores[i] = fused;
        scored.emplace_back(fused,
                            gold.count({pred.doc_id, pred.subject, pred.object, pred.relation}) > 0);
    }

    FuseResult out;
    out.scored = scored;
    if (scored.empty()) {
        out.config.tau = 0.0;
        return out;
    }

    double lo = scored[0].first, hi = scored[0].first;
    for (const auto& [f, g] : scored) {
        lo = std::min(lo, f);
        hi = std::max(hi, f);
    }
    double best_tau = lo, best_bce = fusion_bce(scored, lo);
    for (int i = 1; i <= 200; ++i) {
        const double tau = lo + (hi - lo) * static_cast<double>(i) / 200.0;
        const double bce = fusion_bce(scored, tau);
        if (bce < best_bce) {
            best_bce = bce;
            best_tau = tau;
        }
    }
    out.config.tau = best_tau;
    out.bce_at_tau = best_bce;
    out.bce_at_neg_inf = fusion_bce(scored, -1e18);
    out.bce_at_pos_inf = fusion_bce(scored, 1e18);
    for (std::size_t i = 0; i < predictions.size(); ++i)
        if (fused_scores[i] > best_tau) {
            Prediction kept = predictions[i];
            kept.score = fused_scores[i];
            out.fused.push_back(std::move(kept));
        }
    return out;
}

SelfTrainingResult run_self_training(const Corpus& human_train, const Corpus& human_dev,
                                     const Corpus& distant, const RelationSchema& schema,
                                     const ModelConfig& mcfg, const TrainConfig& cfg_teacher,
                                     const TrainConfig& cfg_student,
                                     const TrainConfig& cfg_finetune,
                                     std::ostream* log_stream) {
    SelfTrainingResult out;
    TrainResult teacher =
        train(human_train, &human_dev, schema, mcfg, cfg_teacher, nullptr, nullptr, log_stream);
    out.teacher_log = teacher.log;

    Model student_in;
    if (distant.docs.empty()) {
        // degenerate pipeline: nothing to distill, finetune a fresh student
        student_in = Model::fresh(mcfg, teacher.model.vocab, teacher.model.schema_hash,
                                  cfg_student.seed);
    } else {
        out.store = distill(teacher.model, distant);
        TrainResult student = train(distant, &human_dev, schema, mcfg, cfg_student, nullptr,
                                    cfg_student.er_supervision == ErSupervision::silver
                                        ? &out.store
                                        : nullptr,
                                    log_stream);
        out.student_log = student.log;
        student_in = std::move(student.model);
    }

    TrainResult final_student = train(human_train, &human_dev, schema, mcfg, cfg_finetune,
                                      &student_in, nullptr, log_stream);
    out.finetune_log = final_student.log;
    out.teacher = std::move(teacher.model);
    out.student = std::move(final_student.model);
    return out;
}

} // namespace evirex
