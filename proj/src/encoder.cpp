#include "evirex/encoder.hpp"

#include <cmath>

#include "evirex/error.hpp"

namespace evirex {

using num::Tensor;
using num::Var;

namespace {

constexpr double kLnEps = 1e-5;

std::string pname(std::size_t layer, const char* what) {
    return "encoder.block" + std::to_string(layer) + "." + what;
}

} // namespace

void EncoderConfig::validate() const {
    if (dim == 0 || heads == 0 || layers == 0)
        raise(ErrorKind::config, "encoder dims/heads/layers must be positive");
    if (dim % heads != 0)
        raise(ErrorKind::config, "encoder dim must be divisible by head count");
    if (average_last_k == 0)
        raise(ErrorKind::config, "average_last_k must be positive");
}

void init_encoder_params(num::ParamSet& params, const EncoderConfig& cfg, Rng& rng) {
    cfg.validate();
    const double embed_std = 0.02;
    const double proj_std = 1.0 / std::sqrt(static_cast<double>(cfg.dim));
    params.add("encoder.tok_embed", Tensor::randn(cfg.vocab_size, cfg.dim, rng, embed_std));
    params.add("encoder.pos_embed", Tensor::randn(cfg.max_len, cfg.dim, rng, embed_std));
    for (std::size_t l = 0; l < cfg.layers; ++l) {
        params.add(pname(l, "ln1.gain"), Tensor(1, cfg.dim, 1.0));
        params.add(pname(l, "ln1.bias"), Tensor(1, cfg.dim, 0.0));
        params.add(pname(l, "wq"), Tensor::randn(cfg.dim, cfg.dim, rng, proj_std));
        params.add(pname(l, "bq"), Tensor(1, cfg.dim, 0.0));
        // no key bias: softmax scores are invariant to a constant key shift
        params.add(pname(l, "wk"), Tensor::randn(cfg.dim, cfg.dim, rng, proj_std));
        params.add(pname(l, "wv"), Tensor::randn(cfg.dim, cfg.dim, rng, proj_std));
        params.add(pname(l, "bv"), Tensor(1, cfg.dim, 0.0));
        params.add(pname(l, "wo"), Tensor::randn(cfg.dim, cfg.dim, rng, proj_std));
        params.add(pname(l, "bo"), Tensor(1, cfg.dim, 0.0));
        params.add(pname(l, "ln2.gain"), Tensor(1, cfg.dim, 1.0));
        params.add(pname(l, "ln2.bias"), Tensor(1, cfg.dim, 0.0));
        params.add(pname(l, "ff.w1"), Tensor::randn(cfg.dim, cfg.ffn_dim, rng, proj_std));
        params.add(pname(l, "ff.b1"), Tensor(1, cfg.ffn_dim, 0.0));
        params.add(pname(l, "ff.w2"),
                   Tensor::randn(cfg.ffn_dim, cfg.dim, rng,
                                 1.0 / std::sqrt(static_cast<double>(cfg.ffn_dim))));
        params.add(pname(l, "ff.b2"), Tensor(1, cfg.dim, 0.0));
    }
}

std::size_t encoder_parameter_count(const EncoderConfig& cfg) {
    cfg.validate();
    const std::size_t d = cfg.dim, f = cfg.ffn_dim;
    const std::size_t embeddings = cfg.vocab_size * d + cfg.max_len * d;
    const std::size_t per_layer = /* two layer norms */ 4 * d +
                                  /* q,k,v,o projections (no key bias) */ 4 * d * d + 3 * d +
                                  /* feed-forward */ d * f + f + f * d + d;
    return embeddings + cfg.layers * per_layer;
}

EncoderOutput encode(num::Tape& tape, const num::ParamLeaves& leaves,
                     const TokenizedDocument& tok, const EncoderConfig& cfg) {
    cfg.validate();
    const std::size_t n = tok.token_count();
    if (n == 0) raise(ErrorKind::validation, "encode: empty document");
    if (n > cfg.max_len)
        raise(ErrorKind::validation, "document length " + std::to_string(n) +
                                         " exceeds encoder max length " +
                                         std::to_string(cfg.max_len));

    std::vector<std::size_t> ids(n), positions(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (tok.ids[i] < 0 || static_cast<std::size_t>(tok.ids[i]) >= cfg.vocab_size)
            raise(ErrorKind::validation, "token id outside encoder vocabulary");
        ids[i] = static_cast<std::size_t>(tok.ids[i]);
        positions[i] = i;
    }

    Var x = tape.add(tape.gather_rows(leaves["encoder.tok_embed"], ids),
                     tape.gather_rows(leaves["encoder.pos_embed"], positions));

    const std::size_t head_dim = cfg.dim / cfg.heads;
    const double att_scale = 1.0 / std::sqrt(static_cast<double>(head_dim));
    const std::size_t last_k = cfg.effective_last_k();

    std::vector<Var> kept_hidden;
    std::vector<Var> kept_attention;

    for (std::size_t l = 0; l < cfg.layers; ++l) {
        Var ln1 = tape.layer_norm(x, leaves[pname(l, "ln1.gain")], leaves[pname(l, "ln1.bias")],
                                  kLnEps);
        Var q = tape.add(tape.matmul(ln1, leaves[pname(l, "wq")]), leaves[pname(l, "bq")]);
        Var k = tape.matmul(ln1, leaves[pname(l, "wk")]);
        Var v = tape.add(tape.matmul(ln1, leaves[pname(l, "wv")]), leaves[pname(l, "bv")]);

        std::vector<Var> head_outputs;
        for (std::size_t h = 0; h < cfg.heads; ++h) {
            Var qh = tape.slice_cols(q, h * head_dim, head_dim);
            Var kh = tape.slice_cols(k, h * head_dim, head_dim);
            Var vh = tape.slice_cols(v, h * head_dim, head_dim);
            Var att = tape.row_softmax(tape.scale(tape.matmul(qh, kh, false, true), att_scale));
            if (l + last_k >= cfg.layers) kept_attention.push_back(att);
            head_outputs.push_back(tape.matmul(att, vh));
        }
        Var att_out = tape.add(tape.matmul(tape.concat_cols(head_outputs), leaves[pname(l, "wo")]),
                               leaves[pname(l, "bo")]);
        x = tape.add(x, att_out);

        Var ln2 = tape.layer_norm(x, leaves[pname(l, "ln2.gain")], leaves[pname(l, "ln2.bias")],
                                  kLnEps);
        Var ff = tape.add(
            tape.matmul(tape.gelu(tape.add(tape.matmul(ln2, leaves[pname(l, "ff.w1")]),
                                           leaves[pname(l, "ff.b1")])),
                        leaves[pname(l, "ff.w2")]),
            leaves[pname(l, "ff.b2")]);
        x = tape.add(x, ff);
        if (l + last_k >= cfg.layers) kept_hidden.push_back(x);
    }

    auto average = [&tape](const std::vector<Var>& vars) {
        Var acc = vars[0];
        for (std::size_t i = 1; i < vars.size(); ++i) acc = tape.add(acc, vars[i]);
        return tape.scale(acc, 1.0 / static_cast<double>(vars.size()));
    };
    return EncoderOutput{average(kept_hidden), average(kept_attention)};
}

} // namespace evirex
