#pragma once

#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "evirex/autodiff.hpp"
#include "evirex/tensor.hpp"

namespace evirex::num {

// Named tensors with trainable flags. Iteration order is insertion order,
// which is fixed by construction and therefore deterministic.
class ParamSet {
public:
    struct Entry {
        std::string name;
        Tensor value;
        bool trainable = true;
    };

    void add(std::string name, Tensor value, bool trainable = true);
    bool has(const std::string& name) const { return index_.count(name) > 0; }
    Tensor& at(const std::string& name);
    const Tensor& at(const std::string& name) const;

    std::size_t size() const { return entries_.size(); }
    const Entry& entry(std::size_t i) const { return entries_[i]; }
    Entry& entry(std::size_t i) { return entries_[i]; }

    std::size_t trainable_value_count() const;

    auto begin() const { return entries_.begin(); }
    auto end() const { return entries_.end(); }

private:
    std::vector<Entry> entries_;
    std::map<std::string, std::size_t> index_;
};

// Tape leaves for every parameter, addressable by name.
struct ParamLeaves {
    const ParamSet* params = nullptr;
    std::vector<Var> vars; // aligned with ParamSet order

    Var operator[](const std::string& name) const;
};

ParamLeaves make_leaves(Tape& tape, const ParamSet& params);

// Per-parameter gradient accumulator aligned with a ParamSet.
class GradAccum {
public:
    explicit GradAccum(const ParamSet& params);
    void accumulate(Tape& tape, const ParamLeaves& leaves);
    void scale(double s);
    double global_norm() const;
    const Tensor& grad(std::size_t param_index) const { return grads_[param_index]; }
    Tensor& grad(std::size_t param_index) { return grads_[param_index]; }
    void reset();

private:
    std::vector<Tensor> grads_;
};

struct AdamWConfig {
    double lr_encoder = 1e-3;
    double lr_classifier = 2e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;
    double clip_norm = 1.0;   // <= 0 disables clipping
    std::size_t warmup_steps = 0;
    std::string encoder_prefix = "encoder.";
};

// AdamW with decoupled weight decay, per-group learning rates and linear
// warmup. Gradient clipping happens on the global norm before the update.
class AdamW {
public:
    AdamW(const ParamSet& params, AdamWConfig cfg);
    void step(ParamSet& params, GradAccum& grads);
    std::size_t steps_taken() const { return step_; }

private:
    AdamWConfig cfg_;
    std::size_t step_ = 0;
    std::vector<Tensor> m_;
    std::vector<Tensor> v_;
    std::vector<bool> is_encoder_;
};

using LossBuilder = std::function<Var(Tape&, const ParamLeaves&)>;

// Reverse-mode gradients of a scalar loss for every trainable parameter.
std::vector<std::pair<std::string, Tensor>> gradient_of(const LossBuilder& builder,
                                                        const ParamSet& params);

// Central-difference estimate of d loss / d params[param_index].value[value_index].
double numeric_gradient(const LossBuilder& builder, ParamSet& params, std::size_t param_index,
                        std::size_t value_index, double eps);

// Compares analytic gradients against central differences on a random
// subsample of coordinates (at least min(coords_per_tensor, numel) per
// tensor). Returns the max relative error with denominator max(|a|,|b|,1e-8).
double finite_difference_check(const LossBuilder& builder, ParamSet& params, double eps, Rng& rng,
                               std::size_t coords_per_tensor = 32);

} // namespace evirex::num
