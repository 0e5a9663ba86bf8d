#include "evirex/params.hpp"

#include <algorithm>
#include <cmath>

#include "evirex/error.hpp"

namespace evirex::num {

void ParamSet::add(std::string name, Tensor value, bool trainable) {
    if (index_.count(name)) raise(ErrorKind::config, "duplicate parameter name: " + name);
    index_[name] = entries_.size();
    entries_.push_back(Entry{std::move(name), std::move(value), trainable});
}

Tensor& ParamSet::at(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) raise(ErrorKind::config, "unknown parameter: " + name);
    return entries_[it->second].value;
}

const Tensor& ParamSet::at(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) raise(ErrorKind::config, "unknown parameter: " + name);
    return entries_[it->second].value;
}

std::size_t ParamSet::trainable_value_count() const {
    std::size_t n = 0;
    for (const auto& e : entries_)
        if (e.trainable) n += e.value.numel();
    return n;
}

Var ParamLeaves::operator[](const std::string& name) const {
    for (std::size_t i = 0; i < params->size(); ++i)
        if (params->entry(i).name == name) return vars[i];
    raise(ErrorKind::config, "unknown parameter leaf: " + name);
}

ParamLeaves make_leaves(Tape& tape, const ParamSet& params) {
    ParamLeaves leaves;
    leaves.params = &params;
    leaves.vars.reserve(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
        const auto& e = params.entry(i);
        leaves.vars.push_back(tape.leaf(e.value, e.trainable));
    }
    return leaves;
}

GradAccum::GradAccum(const ParamSet& params) {
    grads_.reserve(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
        const Tensor& v = params.entry(i).value;
        grads_.emplace_back(v.rows(), v.cols());
    }
}

void GradAccum::accumulate(Tape& tape, const ParamLeaves& leaves) {
    for (std::size_t i = 0; i < grads_.size(); ++i) {
        if (!leaves.params->entry(i).trainable) continue;
        const Tensor& g = tape.grad(leaves.vars[i]);
        for (std::size_t j = 0; j < g.v.size(); ++j) grads_[i].v[j] += g.v[j];
    }
}

void GradAccum::scale(double s) {
    for (auto& g : grads_)
        for (auto& x : g.v) x *= s;
}

double GradAccum::global_norm() const {
    double sq = 0.0;
    for (const auto& g : grads_)
        for (double x : g.v) sq += x * x;
    return std::sqrt(sq);
}

void GradAccum::reset() {
    for (auto& g : grads_) std::fill(g.v.begin(), g.v.end(), 0.0);
}

AdamW::AdamW(const ParamSet& params, AdamWConfig cfg) : cfg_(std::move(cfg)) {
    for (std::size_t i = 0; i < params.size(); ++i) {
        const auto& e = params.entry(i);
        m_.emplace_back(e.value.rows(), e.value.cols());
        v_.emplace_back(e.value.rows(), e.value.cols());
        is_encoder_.push_back(e.name.rfind(cfg_.encoder_prefix, 0) == 0);
    }
}

void AdamW::step(ParamSet& params, GradAccum& grads) {
    ++step_;
    if (cfg_.clip_norm > 0.0) {
        double norm = grads.global_norm();
        if (norm > cfg_.clip_norm) grads.scale(cfg_.clip_norm / norm);
    }
    double warm = 1.0;
    if (cfg_.warmup_steps > 0)
        warm = std::min(1.0, static_cast<double>(step_) / static_cast<double>(cfg_.warmup_steps));
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));

    for (std::size_t i = 0; i < params.size(); ++i) {
        auto& e = params.entry(i);
        if (!e.trainable) continue;
        const double lr = warm * (is_encoder_[i] ? cfg_.lr_encoder : cfg_.lr_classifier);
        Tensor& g = grads.grad(i);
        for (std::size_t j = 0; j < e.value.v.size(); ++j) {
            double& m = m_[i].v[j];
            double& v = v_[i].v[j];
            m = cfg_.beta1 * m + (1.0 - cfg_.beta1) * g.v[j];
            v = cfg_.beta2 * v + (1.0 - cfg_.beta2) * g.v[j] * g.v[j];
            const double mhat = m / bc1;
            const double vhat = v / bc2;
            e.value.v[j] -= lr * (mhat / (std::sqrt(vhat) + cfg_.eps) + cfg_.weight_decay * e.value.v[j]);
        }
    }
}

std::vector<std::pair<std::string, Tensor>> gradient_of(const LossBuilder& builder,
                                                        const ParamSet& params) {
    Tape tape;
    ParamLeaves leaves = make_leaves(tape, params);
    Var loss = builder(tape, leaves);
    tape.backward(loss);
    std::vector<std::pair<std::string, Tensor>> out;
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (!params.entry(i).trainable) continue;
        out.emplace_back(params.entry(i).name, tape.grad(leaves.vars[i]));
    }
    return out;
}

double numeric_gradient(const LossBuilder& builder, ParamSet& params, std::size_t param_index,
                        std::size_t value_index, double eps) {
    double& x = params.entry(param_index).value.v[value_index];
    const double saved = x;
    auto eval = [&]() {
        Tape tape;
        ParamLeaves leaves = make_leaves(tape, params);
        return tape.value(builder(tape, leaves)).v[0];
    };
    x = saved + eps;
    const double up = eval();
    x = saved - eps;
    const double down = eval();
    x = saved;
    return (up - down) / (2.0 * eps);
}

double finite_difference_check(const LossBuilder& builder, ParamSet& params, double eps, Rng& rng,
                               std::size_t coords_per_tensor) {
    Tape tape;
    ParamLeaves leaves = make_leaves(tape, params);
    Var loss = builder(tape, leaves);
    tape.backward(loss);

    double max_rel = 0.0;
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (!params.entry(i).trainable) continue;
        const Tensor analytic = tape.grad(leaves.vars[i]);
        const std::size_t n = analytic.numel();
        std::vector<std::size_t> coords(n);
        for (std::size_t j = 0; j < n; ++j) coords[j] = j;
        if (n > coords_per_tensor) {
            std::shuffle(coords.begin(), coords.end(), rng);
            coords.resize(coords_per_tensor);
        }
        for (std::size_t j : coords) {
            const double fd = numeric_gradient(builder, params, i, j, eps);
            const double a = analytic.v[j];
            const double denom = std::max({std::abs(a), std::abs(fd), 1e-8});
            max_rel = std::max(max_rel, std::abs(a - fd) / denom);
        }
    }
    return max_rel;
}

} // namespace evirex::num
