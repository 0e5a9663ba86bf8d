#include "evirex/rexmodel.hpp"

#include <cmath>

#include "evirex/error.hpp"

namespace evirex {

using num::Tensor;
using num::Var;

void ClassifierConfig::validate() const {
    if (dim == 0 || num_real_relations == 0)
        raise(ErrorKind::config, "classifier dim and relation count must be positive");
    if (groups == 0 || dim % groups != 0)
        raise(ErrorKind::config, "classifier group count must divide dim");
}

void init_classifier_params(num::ParamSet& params, const ClassifierConfig& cfg, Rng& rng) {
    cfg.validate();
    const std::size_t d = cfg.dim;
    const std::size_t bk = d / cfg.groups;
    const double proj_std = 1.0 / std::sqrt(static_cast<double>(2 * d));
    params.add("classifier.w_subject", Tensor::randn(d, 2 * d, rng, proj_std));
    params.add("classifier.b_subject", Tensor(1, d, 0.0));
    params.add("classifier.w_object", Tensor::randn(d, 2 * d, rng, proj_std));
    params.add("classifier.b_object", Tensor(1, d, 0.0));
    params.add("classifier.bilinear",
               Tensor::randn(cfg.score_width(), d * bk, rng,
                             1.0 / std::sqrt(static_cast<double>(d * bk))));
    params.add("classifier.bias", Tensor(1, cfg.score_width(), 0.0));
}

std::size_t classifier_parameter_count(const ClassifierConfig& cfg) {
    cfg.validate();
    const std::size_t d = cfg.dim;
    return 2 * (d * 2 * d + d) + cfg.score_width() * (d * d / cfg.groups) + cfg.score_width();
}

num::Var entity_embedding(num::Tape& tape, const EncoderOutput& out,
                          const TokenizedDocument& tok, std::size_t entity) {
    if (entity >= tok.mention_start_marker_pos.size())
        raise(ErrorKind::validation, "entity index out of range");
    const auto& markers = tok.mention_start_marker_pos[entity];
    if (markers.empty())
        raise(ErrorKind::validation, "entity has no mention markers");
    std::vector<std::size_t> rows(markers.begin(), markers.end());
    return tape.logsumexp_rows(tape.gather_rows(out.H, rows));
}

num::Var entity_token_importance(num::Tape& tape, const EncoderOutput& out,
                                 const TokenizedDocument& tok, std::size_t entity) {
    if (entity >= tok.mention_start_marker_pos.size())
        raise(ErrorKind::validation, "entity index out of range");
    const auto& markers = tok.mention_start_marker_pos[entity];
    if (markers.empty()) raise(ErrorKind::validation, "entity has no mention markers");
    std::vector<std::size_t> rows(markers.begin(), markers.end());
    return tape.mean_over_rows(tape.gather_rows(out.A, rows));
}

PairContext pair_token_distribution(num::Tape& tape, num::Var a_subject, num::Var a_object,
                                    double eps_div) {
    PairContext ctx;
    ctx.a_subject = a_subject;
    ctx.a_object = a_object;

    Var raw = tape.mul(ctx.a_subject, ctx.a_object);
    const Tensor ones(1, tape.value(raw).cols(), 1.0);
    Var q0 = tape.masked_row_normalize(raw, ones, eps_div);
    if (tape.value(q0).sum() < kDegenerateMass) {
        const std::size_t n = tape.value(raw).cols();
        ctx.q = tape.constant(Tensor(1, n, 1.0 / static_cast<double>(n)));
    } else {
        ctx.q = tape.masked_row_normalize(q0, ones, 0.0);
    }
    return ctx;
}

PairContext token_importance(num::Tape& tape, const EncoderOutput& out,
                             const TokenizedDocument& tok, std::size_t subject,
                             std::size_t object, double eps_div) {
    return pair_token_distribution(tape, entity_token_importance(tape, out, tok, subject),
                                   entity_token_importance(tape, out, tok, object), eps_div);
}

num::Var local_context(num::Tape& tape, const EncoderOutput& out, num::Var q) {
    return tape.matmul(q, out.H);
}

num::Var relation_scores(num::Tape& tape, const num::ParamLeaves& leaves, num::Var h_subject,
                         num::Var h_object, num::Var context, const ClassifierConfig& cfg) {
    std::vector<Var> subj_parts{h_subject, context};
    std::vector<Var> obj_parts{h_object, context};
    Var z_s = tape.tanh_(tape.add(
        tape.matmul(tape.concat_cols(subj_parts), leaves["classifier.w_subject"], false, true),
        leaves["classifier.b_subject"]));
    Var z_o = tape.tanh_(tape.add(
        tape.matmul(tape.concat_cols(obj_parts), leaves["classifier.w_object"], false, true),
        leaves["classifier.b_object"]));
    Var features = tape.blocked_outer(z_s, z_o, cfg.groups);
    return tape.add(tape.matmul(features, leaves["classifier.bilinear"], false, true),
                    leaves["classifier.bias"]);
}

num::Var atl_loss(num::Tape& tape, num::Var scores, const std::set<int>& positive_relations,
                  const ClassifierConfig& cfg) {
    const std::size_t width = cfg.score_width();
    if (tape.value(scores).cols() != width)
        raise(ErrorKind::dimension, "atl_loss: score width mismatch");
    for (int r : positive_relations)
        if (r < 1 || static_cast<std::size_t>(r) >= width)
            raise(ErrorKind::contract, "atl_loss: positive set must hold real relation ids");

    std::vector<std::size_t> negatives{kThIndex};
    for (std::size_t r = 1; r < width; ++r)
        if (!positive_relations.count(static_cast<int>(r))) negatives.push_back(r);

    // -log softmax(y_TH) over negatives + TH
    Var neg_term =
        tape.sub(tape.logsumexp_rows(tape.transpose_(tape.gather_cols(scores, negatives))),
                 tape.gather_cols(scores, {kThIndex}));
    Var loss = neg_term;

    if (!positive_relations.empty()) {
        std::vector<std::size_t> pos_with_th{kThIndex};
        std::vector<std::size_t> pos;
        for (int r : positive_relations) {
            pos_with_th.push_back(static_cast<std::size_t>(r));
            pos.push_back(static_cast<std::size_t>(r));
        }
        Var lse = tape.logsumexp_rows(tape.transpose_(tape.gather_cols(scores, pos_with_th)));
        Var pos_term = tape.sub(tape.scale(lse, static_cast<double>(pos.size())),
                                tape.reduce_sum(tape.gather_cols(scores, pos)));
        loss = tape.add(pos_term, neg_term);
    }
    return loss;
}

num::Var bce_loss(num::Tape& tape, num::Var scores, const std::set<int>& positive_relations,
                  const ClassifierConfig& cfg) {
    const std::size_t width = cfg.score_width();
    if (tape.value(scores).cols() != width)
        raise(ErrorKind::dimension, "bce_loss: score width mismatch");
    std::vector<std::size_t> real;
    for (std::size_t r = 1; r < width; ++r) real.push_back(r);
    Tensor targets(1, real.size(), 0.0);
    for (int r : positive_relations) {
        if (r < 1 || static_cast<std::size_t>(r) >= width)
            raise(ErrorKind::contract, "bce_loss: positive set must hold real relation ids");
        targets.v[static_cast<std::size_t>(r - 1)] = 1.0;
    }
    return tape.bce_logits_sum(tape.gather_cols(scores, real), targets);
}

} // namespace evirex
