#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "evirex/tensor.hpp"

namespace evirex::num {

class Tape;

// Lightweight handle into a tape. Valid only for the lifetime of its tape.
struct Var {
    Tape* tape = nullptr;
    std::uint32_t id = 0;

    bool valid() const { return tape != nullptr; }
};

// Reverse-mode autodiff over a flat tape. Forward values are computed
// eagerly at node creation; backward() runs the recorded adjoint functions
// in reverse order. One tape per loss evaluation, discarded afterwards.
class Tape {
public:
    Var leaf(Tensor value, bool requires_grad);
    Var constant(Tensor value) { return leaf(std::move(value), false); }

    // elementwise
    Var add(Var a, Var b);      // same shape, or b a 1xN bias row broadcast over rows
    Var sub(Var a, Var b);      // same shape
    Var mul(Var a, Var b);      // Hadamard, same shape
    Var scale(Var a, double s);
    Var tanh_(Var a);
    Var sigmoid_(Var a);
    Var gelu(Var a);
    Var log_floor(Var a, double eps); // log(max(a, eps)); zero gradient below the floor

    // structure
    Var transpose_(Var a);
    Var matmul(Var a, Var b, bool trans_a = false, bool trans_b = false);
    Var concat_cols(std::span<const Var> parts);
    Var slice_cols(Var a, std::size_t start, std::size_t len);
    Var gather_rows(Var a, std::vector<std::size_t> idx);
    Var gather_cols(Var a, std::vector<std::size_t> idx);
    Var mean_over_rows(Var a); // MxN -> 1xN

    // rows
    Var row_softmax(Var a);
    Var logsumexp_rows(Var a); // MxN -> 1xN, collapsing rows (max-shift stabilized)
    Var masked_row_normalize(Var a, const Tensor& mask, double eps);
    Var layer_norm(Var a, Var gain, Var bias, double eps);

    // reductions & losses
    Var reduce_sum(Var a);  // -> 1x1
    Var reduce_mean(Var a); // -> 1x1
    Var blocked_outer(Var zs, Var zo, std::size_t groups); // grouped bilinear feature row
    Var bce_logits_sum(Var logits, const Tensor& targets); // sum of per-class BCE terms

    const Tensor& value(Var v) const;
    const Tensor& grad(Var v); // lazily zero-initialized

    // Accumulates d loss / d node for every node reachable from `loss`,
    // which must be scalar (1x1).
    void backward(Var loss);

    std::size_t size() const { return nodes_.size(); }

private:
    struct Node {
        Tensor val;
        Tensor grad;
        bool requires_grad = false;
        std::function<void(Tape&, const Node&)> backprop; // null for leaves
    };

    std::vector<Node> nodes_;

    Var push(Tensor val, bool requires_grad, std::function<void(Tape&, const Node&)> backprop);
    Node& node(Var v) { return nodes_[v.id]; }
    const Node& node(Var v) const { return nodes_[v.id]; }
    Tensor& grad_buf(std::uint32_t id);

    friend struct TapeAccess;
};

} // namespace evirex::num
