#pragma once

#include <cstdint>
#include <string>

#include "evirex/corpus.hpp"
#include "evirex/params.hpp"

namespace evirex {

struct EncoderConfig {
    std::size_t vocab_size = 200;
    std::size_t dim = 32;
    std::size_t layers = 2;
    std::size_t heads = 4;
    std::size_t ffn_dim = 64;
    std::size_t max_len = 160;
    std::size_t average_last_k = 3; // clamped to layers

    std::size_t effective_last_k() const { return average_last_k < layers ? average_last_k : layers; }
    void validate() const;
};

// Token embeddings H (|T| x d) and the head/layer-averaged attention matrix
// A (|T| x |T|); built on the caller's tape so losses can reach back through
// both, A included.
struct EncoderOutput {
    num::Var H;
    num::Var A;
};

// Pre-norm transformer blocks, learned absolute positions, GELU feed-forward.
// Parameter names live under "encoder.".
void init_encoder_params(num::ParamSet& params, const EncoderConfig& cfg, Rng& rng);

std::size_t encoder_parameter_count(const EncoderConfig& cfg);

EncoderOutput encode(num::Tape& tape, const num::ParamLeaves& leaves,
                     const TokenizedDocument& tok, const EncoderConfig& cfg);

} // namespace evirex
