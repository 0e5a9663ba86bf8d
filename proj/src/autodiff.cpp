#include "evirex/autodiff.hpp"

#include <cmath>
#include <string>

#include "evirex/error.hpp"

namespace evirex::num {

namespace {

constexpr double kInvSqrt2 = 0.7071067811865475244;
constexpr double kInvSqrt2Pi = 0.3989422804014326779;

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (!a.same_shape(b))
        raise(ErrorKind::dimension, std::string(op) + ": shape mismatch");
}

} // namespace

Var Tape::push(Tensor val, bool requires_grad, std::function<void(Tape&, const Node&)> backprop) {
    Node n;
    n.val = std::move(val);
    n.requires_grad = requires_grad;
    n.backprop = std::move(backprop);
    nodes_.push_back(std::move(n));
    return Var{this, static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Tensor& Tape::grad_buf(std::uint32_t id) {
    Node& n = nodes_[id];
    if (n.grad.v.empty()) {
        n.grad.shape = n.val.shape;
        n.grad.v.assign(n.val.v.size(), 0.0);
    }
    return n.grad;
}

const Tensor& Tape::value(Var v) const { return node(v).val; }

const Tensor& Tape::grad(Var v) {
    return grad_buf(v.id);
}

Var Tape::leaf(Tensor value, bool requires_grad) {
    return push(std::move(value), requires_grad, nullptr);
}

Var Tape::add(Var a, Var b) {
    const Tensor& ta = value(a);
    const Tensor& tb = value(b);
    const bool broadcast = !ta.same_shape(tb);
    if (broadcast && !(tb.rows() == 1 && tb.cols() == ta.cols()))
        raise(ErrorKind::dimension, "add: shape mismatch");

    Tensor out = ta;
    if (broadcast) {
        for (std::size_t r = 0; r < out.rows(); ++r)
            for (std::size_t c = 0; c < out.cols(); ++c) out.at(r, c) += tb.at(0, c);
    } else {
        for (std::size_t i = 0; i < out.v.size(); ++i) out.v[i] += tb.v[i];
    }
    bool rg = node(a).requires_grad || node(b).requires_grad;
    auto ai = a.id, bi = b.id;
    return push(std::move(out), rg, [ai, bi, broadcast](Tape& t, const Node& self) {
        const Tensor& g = self.grad;
        if (t.nodes_[ai].requires_grad) {
            Tensor& ga = t.grad_buf(ai);
            for (std::size_t i = 0; i < g.v.size(); ++i) ga.v[i] += g.v[i];
        }
        if (t.nodes_[bi].requires_grad) {
            Tensor& gb = t.grad_buf(bi);
            if (broadcast) {
                for (std::size_t r = 0; r < g.rows(); ++r)
                    for (std::size_t c = 0; c < g.cols(); ++c) gb.at(0, c) += g.at(r, c);
            } else {
                for (std::size_t i = 0; i < g.v.size(); ++i) gb.v[i] += g.v[i];
            }
        }
    });
}

Var Tape::sub(Var a, Var b) {
    check_same_shape(value(a), value(b), "sub");
    Tensor out = value(a);
    for (std::size_t i = 0; i < out.v.size(); ++i) out.v[i] -= value(b).v[i];
    bool rg = node(a).requires_grad || node(b).requires_grad;
    auto ai = a.id, bi = b.id;
    return push(std::move(out), rg, [ai, bi](Tape& t, const Node& self) {
        const Tensor& g = self.grad;
        if (t.nodes_[ai].requires_grad) {
            Tensor& ga = t.grad_buf(ai);
            for (std::size_t i = 0; i < g.v.size(); ++i) ga.v[i] += g.v[i];
        }
        if (t.nodes_[bi].requires_grad) {
            Tensor& gb = t.grad_buf(bi);
            for (std::size_t i = 0; i < g.v.size(); ++i) gb.v[i] -= g.v[i];
        }
    });
}

Var Tape::mul(Var a, Var b) {
    check_same_shape(value(a), value(b), "mul");
    Tensor out = value(a);
    for (std::size_t i = 0; i < out.v.size(); ++i) out.v[i] *= value(b).v[i];
    bool rg = node(a).requires_grad || node(b).requires_grad;
    auto ai = a.id, bi = b.id;
    return push(std::move(out), rg, [ai, bi](Tape& t, const Node& self) {
        const Tensor& g = self.grad;
        if (t.nodes_[ai].requires_grad) {
            Tensor& ga = t.grad_buf(ai);
            const Tensor& vb = t.nodes_[bi].val;
            for (std::size_t i = 0; i < g.v.size(); ++i) ga.v[i] += g.v[i] * vb.v[i];
        }
        if (t.nodes_[bi].requires_grad) {
            Tensor& gb = t.grad_buf(bi);
            const Tensor& va = t.nodes_[ai].val;
            for (std::size_t i = 0; i < g.v.size(); ++i) gb.v[i] += g.v[i] * va.v[i];
        }
    });
}

Var Tape::scale(Var a, double s) {
    Tensor out = value(a);
    for (auto& x : out.v) x *= s;
    auto ai = a.id;
    return push(std::move(out), node(a).requires_grad, [ai, s](Tape& t, const Node& self) {
        if (!t.nodes_[ai].requires_grad) return;
        Tensor& ga = t.grad_buf(ai);
        for (std::size_t i = 0; i < self.grad.v.size(); ++i) ga.v[i] += s * self.grad.v[i];
    });
}

Var Tape::tanh_(Var a) {
    Tensor out = value(a);
    for (auto& x : out.v) x = std::tanh(x);
    auto ai = a.id;
    return push(std::move(out), node(a).requires_grad, [ai](Tape& t, const Node& self) {
        if (!t.nodes_[ai].requires_grad) return;
        Tensor& ga = t.grad_buf(ai);
        for (std::size_t i = 0; i < self.grad.v.size(); ++i) {
            double y = self.val.v[i];
            ga.v[i] += self.grad.v[i] * (1.0 - y * y);
        }
    });
}

Var Tape::sigmoid_(Var a) {
    Tensor out = value(a);
    for (auto& x : out.v) x = 1.0 / (1.0 + std::exp(-x));
    auto ai = a.id;
    return push(std::move(out), node(a).requires_grad, [ai](Tape& t, const Node& self) {
        if (!t.nodes_[ai].requires_grad) return;
        Tensor& ga = t.grad_buf(ai);
        for (std::size_t i = 0; i < self.grad.v.size(); ++i) {
            double y = self.val.v[i];
            ga.v[i] += self.grad.v[i] * y * (1.0 - y);
        }
    });
}

Var Tape::gelu(Var a) {
    Tensor out = value(a);
    for (auto& x : out.v) x = x * 0.5 * (1.0 + std::erf(x * kInvSqrt2));
    auto ai = a.id;
    return push(std::move(out), node(a).requires_grad, [ai](Tape& t, const Node& self) {
        if (!t.nodes_[ai].requires_grad) return;
        Tensor& ga = t.grad_buf(ai);
        const Tensor& x = t.nodes_[ai].val;
        for (std::size_t i = 0; i < self.grad.v.size(); ++i) {
            double xi = x.v[i];
            double cdf = 0.5 * (1.0 + std::erf(xi * kInvSqrt2));
            double pdf = kInvSqrt2Pi * std::exp(-0.5 * xi * xi);
            ga.v[i] += self.grad.v[i] * (cdf + xi * pdf);
        }
    });
}

Var Tape::log_floor(Var a, double eps) {
    Tensor out = value(a);
    for (auto& x : out.v) x = std::log(x > eps ? x : eps);
    auto ai = a.id;
    return push(std::move(out), node(a).requires_grad, [ai, eps](Tape& t, const Node& self) {
        if (!t.nodes_[ai].requires_grad) return;
        Tensor& ga = t.grad_buf(ai);
        const Tensor& x = t.nodes_[ai].val;
        for (std::size_t i = 0; i < self.grad.v.size(); ++i)
            if (x.v[i] > eps) ga.v[i] += self.grad.v[i] / x.v[i];
    });
}

Var Tape::transpose_(Var a) {
    Tensor out = num::transpose(value(a));
    auto ai = a.id;
    return push(std::move(out), node(a).requires_grad, [ai](Tape& t, const Node& self) {
        if (!t.nodes_[ai].requires_grad) return;
        Tensor& ga = t.grad_buf(ai);
        for (std::size_t r = 0; r < ga.rows(); ++r)
            for (std::size_t c = 0; c < ga.cols(); ++c) ga.at(r, c) += self.grad.at(c, r);
    });
}

Var Tape::matmul(Var a, Var b, bool trans_a, bool trans_b) {
    Tensor out = num::matmul(value(a), value(b), trans_a, trans_b);
    bool rg = node(a).requires_grad || node(b).requires_grad;
    auto ai = a.id, bi = b.id;
    return push(std::move(out), rg, [ai, bi, trans_a, trans_b](Tape& t, const Node& self) {
        const Tensor& g = self.grad;
        const Tensor& va = t.nodes_[ai].val;
        const Tensor& vb = t.nodes_[bi].val;
        if (t.nodes_[ai].requires_grad) {
            // d op_a(A) = G * op_b(B)^T
            Tensor da = num::matmul(g, vb, false, !trans_b);
            Tensor& ga = t.grad_buf(ai);
            if (trans_a) {
                for (std::size_t r = 0; r < ga.rows(); ++r)
                    for (std::size_t c = 0; c < ga.cols(); ++c) ga.at(r, c) += da.at(c, r);
            } else {
                for (std::size_t i = 0; i < ga.v.size(); ++i) ga.v[i] += da.v[i];
            }
        }
        if (t.nodes_[bi].requires_grad) {
            // d op_b(B) = op_a(A)^T * G
            Tensor db = num::matmul(va, g, !trans_a, false);
            Tensor& gb = t.grad_buf(bi);
            if (trans_b) {
                for (std::size_t r = 0; r < gb.rows(); ++r)
                    for (std::size_t c = 0; c < gb.cols(); ++c) gb.at(r, c) += db.at(c, r);
            } else {
                for (std::size_t i = 0; i < gb.v.size(); ++i) gb.v[i] += db.v[i];
            }
        }
    });
}

Var Tape::concat_cols(std::span<const Var> parts) {
    if (parts.empty()) raise(ErrorKind::dimension, "concat_cols: no inputs");
    std::size_t rows = value(parts[0]).rows();
    std::size_t cols = 0;
    bool rg = false;
    for (Var p : parts) {
        if (value(p).rows() != rows) raise(ErrorKind::dimension, "concat_cols: row mismatch");
        cols += value(p).cols();
        rg = rg || node(p).requires_grad;
    }
    Tensor out(rows, cols);
    std::size_t off = 0;
    std::vector<std::uint32_t> ids;
    std::vector<std::size_t> widths;
    for (Var p : parts) {
        const Tensor& tp = value(p);
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < tp.cols(); ++c) out.at(r, off + c) = tp.at(r, c);
        ids.push_back(p.id);
        widths.push_back(tp.cols());
        off += tp.cols();
    }
    return push(std::move(out), rg, [ids, widths](Tape& t, const Node& self) {
        std::size_t off = 0;
        for (std::size_t k = 0; k < ids.size(); ++k) {
            if (t.nodes_[ids[k]].requires_grad) {
                Tensor& gp = t.grad_buf(ids[k]);
                for (std::size_t r = 0; r < self.grad.rows(); ++r)
                    for (std::size_t c = 0; c < widths[k]; ++c)
                        gp.at(r, c) += self.grad.at(r, off + c);
            }
            off += widths[k];
        }
    });
}

Var Tape::slice_cols(Var a, std::size_t start, std::size_t len) {
    const Tensor& ta = value(a);
    if (start + len > ta.cols()) raise(ErrorKind::dimension, "slice_cols: out of range");
    Tensor out(ta.rows(), len);
    for (std::size_t r = 0; r < ta.rows(); ++r)
        for (std::size_t c = 0; c < len; ++c) out.at(r, c) = ta.at(r, start + c);
    auto ai = a.id;
    return push(std::move(out), node(a).requires_grad, [ai, start, len](Tape& t, const Node& self) {
        if (!t.nodes_[ai].requires_grad) return;
        Tensor& ga = t.grad_buf(ai);
        for (std::size_t r = 0; r < self.grad.rows(); ++r)
            for (std::size_t c = 0; c < len; ++c) ga.at(r, start + c) += self.grad.at(r, c);
    });
}

Var Tape::gather_rows(Var a, std::vector<std::size_t> idx) {
    const Tensor& ta = value(a);
    Tensor out(idx.size(), ta.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) {
        if (idx[i] >= ta.rows()) raise(ErrorKind::dimension, "gather_rows: index out of range");
        for (std::size_t c = 0; c < ta.cols(); ++c) out.at(i, c) = ta.at(idx[i], c);
    }
    auto ai = a.id;
    return push(std::move(out), node(a).requires_grad,
                [ai, idx = std::move(idx)](Tape& t, const Node& self) {
                    if (!t.nodes_[ai].requires_grad) return;
                    Tensor& ga = t.grad_buf(ai);
                    for (std::size_t i = 0; i < idx.size(); ++i)
                        for (std::size_t c = 0; c < self.grad.cols(); ++c)
                            ga.at(idx[i], c) += self.grad.at(i, c);
                });
}

Var Tape::gather_cols(Var a, std::vector<std::size_t> idx) {
    const Tensor& ta = value(a);
    Tensor out(ta.rows(), idx.size());
    for (std::size_t j = 0; j < idx.size(); ++j) {
        if (idx[j] >= ta.cols()) raise(ErrorKind::dimension, "gather_cols: index out of range");
        for (std::size_t r = 0; r < ta.rows(); ++r) out.at(r, j) = ta.at(r, idx[j]);
    }
    auto ai = a.id;
    return push(std::move(out), node(a).requires_grad,
                [ai, idx = std::move(idx)](Tape& t, const Node& self) {
                    if (!t.nodes_[ai].requires_grad) return;
                    Tensor& ga = t.grad_buf(ai);
                    for (std::size_t j = 0; j < idx.size(); ++j)
                        for (std::size_t r = 0; r < self.grad.rows(); ++r)
                            ga.at(r, idx[j]) += self.grad.at(r, j);
                });
}

Var Tape::mean_over_rows(Var a) {
    const Tensor& ta = value(a);
    if (ta.rows() == 0) raise(ErrorKind::dimension, "mean_over_rows: empty input");
    Tensor out(1, ta.cols());
    for (std::size_t r = 0; r < ta.rows(); ++r)
        for (std::size_t c = 0; c < ta.cols(); ++c) out.at(0, c) += ta.at(r, c);
    for (auto& x : out.v) x /= static_cast<double>(ta.rows());
    auto ai = a.id;
    const double inv = 1.0 / static_cast<double>(ta.rows());
    return push(std::move(out), node(a).requires_grad, [ai, inv](Tape& t, const Node& self) {
        if (!t.nodes_[ai].requires_grad) return;
        Tensor& ga = t.grad_buf(ai);
        for (std::size_t r = 0; r < ga.rows(); ++r)
            for (std::size_t c = 0; c < ga.cols(); ++c) ga.at(r, c) += self.grad.at(0, c) * inv;
    });
}

Var Tape::row_softmax(Var a) {
    const Tensor& ta = value(a);
    Tensor out = ta;
    for (std::size_t r = 0; r < out.rows(); ++r) {
        double mx = out.at(r, 0);
        for (std::size_t c = 1; c < out.cols(); ++c) mx = std::max(mx, out.at(r, c));
        double s = 0.0;
        for (std::size_t c = 0; c < out.cols(); ++c) {
            double e = std::exp(out.at(r, c) - mx);
            out.at(r, c) = e;
            s += e;
        }
        for (std::size_t c = 0; c < out.cols(); ++c) out.at(r, c) /= s;
    }
    auto ai = a.id;
    return push(std::move(out), node(a).requires_grad, [ai](Tape& t, const Node& self) {
        if (!t.nodes_[ai].requires_grad) return;
        Tensor& ga = t.grad_buf(ai);
        const Tensor& y = self.val;
        const Tensor& g = self.grad;
        for (std::size_t r = 0; r < y.rows(); ++r) {
            double dot = 0.0;
            for (std::size_t c = 0; c < y.cols(); ++c) dot += g.at(r, c) * y.at(r, c);
            for (std::size_t c = 0; c < y.cols(); ++c)
                ga.at(r, c) += y.at(r, c) * (g.at(r, c) - dot);
        }
    });
}

Var Tape::logsumexp_rows(Var a) {
    const Tensor& ta = value(a);
    if (ta.rows() == 0) raise(ErrorKind::dimension, "logsumexp_rows: empty input");
    Tensor out(1, ta.cols());
    for (std::size_t c = 0; c < ta.cols(); ++c) {
        double mx = ta.at(0, c);
        for (std::size_t r = 1; r < ta.rows(); ++r) mx = std::max(mx, ta.at(r, c));
        double s = 0.0;
        for (std::size_t r = 0; r < ta.rows(); ++r) s += std::exp(ta.at(r, c) - mx);
        out.at(0, c) = mx + std::log(s);
    }
    auto ai = a.id;
    return push(std::move(out), node(a).requires_grad, [ai](Tape& t, const Node& self) {
        if (!t.nodes_[ai].requires_grad) return;
        Tensor& ga = t.grad_buf(ai);
        const Tensor& x = t.nodes_[ai].val;
        for (std::size_t r = 0; r < x.rows(); ++r)
            for (std::size_t c = 0; c < x.cols(); ++c)
                ga.at(r, c) += self.grad.at(0, c) * std::exp(x.at(r, c) - self.val.at(0, c));
    });
}

Var Tape::masked_row_normalize(Var a, const Tensor& mask, double eps) {
    const Tensor& ta = value(a);
    check_same_shape(ta, mask, "masked_row_normalize");
    Tensor out = ta;
    for (std::size_t r = 0; r < out.rows(); ++r) {
        double s = eps;
        for (std::size_t c = 0; c < out.cols(); ++c) s += ta.at(r, c) * mask.at(r, c);
        if (s == 0.0) raise(ErrorKind::contract, "masked_row_normalize: zero denominator");
        for (std::size_t c = 0; c < out.cols(); ++c) out.at(r, c) = ta.at(r, c) * mask.at(r, c) / s;
    }
    auto ai = a.id;
    return push(std::move(out), node(a).requires_grad,
                [ai, mask, eps](Tape& t, const Node& self) {
                    if (!t.nodes_[ai].requires_grad) return;
                    Tensor& ga = t.grad_buf(ai);
                    const Tensor& x = t.nodes_[ai].val;
                    const Tensor& y = self.val;
                    const Tensor& g = self.grad;
                    for (std::size_t r = 0; r < x.rows(); ++r) {
                        double s = eps;
                        double gy = 0.0;
                        for (std::size_t c = 0; c < x.cols(); ++c) {
                            s += x.at(r, c) * mask.at(r, c);
                            gy += g.at(r, c) * y.at(r, c);
                        }
                        for (std::size_t c = 0; c < x.cols(); ++c)
                            ga.at(r, c) += mask.at(r, c) * (g.at(r, c) - gy) / s;
                    }
                });
}

Var Tape::layer_norm(Var a, Var gain, Var bias, double eps) {
    const Tensor& x = value(a);
    const Tensor& gn = value(gain);
    const Tensor& bs = value(bias);
    if (gn.rows() != 1 || gn.cols() != x.cols() || bs.rows() != 1 || bs.cols() != x.cols())
        raise(ErrorKind::dimension, "layer_norm: gain/bias must be 1 x cols(a)");

    const std::size_t n = x.cols();
    Tensor out(x.rows(), n);
    for (std::size_t r = 0; r < x.rows(); ++r) {
        double mu = 0.0;
        for (std::size_t c = 0; c < n; ++c) mu += x.at(r, c);
        mu /= static_cast<double>(n);
        double var = 0.0;
        for (std::size_t c = 0; c < n; ++c) {
            double d = x.at(r, c) - mu;
            var += d * d;
        }
        var /= static_cast<double>(n);
        double inv_sigma = 1.0 / std::sqrt(var + eps);
        for (std::size_t c = 0; c < n; ++c)
            out.at(r, c) = (x.at(r, c) - mu) * inv_sigma * gn.at(0, c) + bs.at(0, c);
    }
    bool rg = node(a).requires_grad || node(gain).requires_grad || node(bias).requires_grad;
    auto ai = a.id, gi = gain.id, bi = bias.id;
    return push(std::move(out), rg, [ai, gi, bi, eps](Tape& t, const Node& self) {
        const Tensor& x = t.nodes_[ai].val;
        const Tensor& gn = t.nodes_[gi].val;
        const Tensor& g = self.grad;
        const std::size_t n = x.cols();
        const double dn = static_cast<double>(n);
        std::vector<double> xhat(n);
        for (std::size_t r = 0; r < x.rows(); ++r) {
            double mu = 0.0;
            for (std::size_t c = 0; c < n; ++c) mu += x.at(r, c);
            mu /= dn;
            double var = 0.0;
            for (std::size_t c = 0; c < n; ++c) {
                double d = x.at(r, c) - mu;
                var += d * d;
            }
            var /= dn;
            double inv_sigma = 1.0 / std::sqrt(var + eps);
            for (std::size_t c = 0; c < n; ++c) xhat[c] = (x.at(r, c) - mu) * inv_sigma;

            if (t.nodes_[gi].requires_grad) {
                Tensor& gg = t.grad_buf(gi);
                for (std::size_t c = 0; c < n; ++c) gg.at(0, c) += g.at(r, c) * xhat[c];
            }
            if (t.nodes_[bi].requires_grad) {
                Tensor& gb = t.grad_buf(bi);
                for (std::size_t c = 0; c < n; ++c) gb.at(0, c) += g.at(r, c);
            }
            if (t.nodes_[ai].requires_grad) {
                Tensor& ga = t.grad_buf(ai);
                double m1 = 0.0, m2 = 0.0;
                for (std::size_t c = 0; c < n; ++c) {
                    double dxhat = g.at(r, c) * gn.at(0, c);
                    m1 += dxhat;
                    m2 += dxhat * xhat[c];
                }
                m1 /= dn;
                m2 /= dn;
                for (std::size_t c = 0; c < n; ++c) {
                    double dxhat = g.at(r, c) * gn.at(0, c);
                    ga.at(r, c) += (dxhat - m1 - xhat[c] * m2) * inv_sigma;
                }
            }
        }
    });
}

Var Tape::reduce_sum(Var a) {
    Tensor out = Tensor::scalar(value(a).sum());
    auto ai = a.id;
    return push(std::move(out), node(a).requires_grad, [ai](Tape& t, const Node& self) {
        if (!t.nodes_[ai].requires_grad) return;
        Tensor& ga = t.grad_buf(ai);
        for (auto& x : ga.v) x += self.grad.v[0];
    });
}

Var Tape::reduce_mean(Var a) {
    const double n = static_cast<double>(value(a).numel());
    if (n == 0) raise(ErrorKind::dimension, "reduce_mean: empty input");
    Tensor out = Tensor::scalar(value(a).sum() / n);
    auto ai = a.id;
    return push(std::move(out), node(a).requires_grad, [ai, n](Tape& t, const Node& self) {
        if (!t.nodes_[ai].requires_grad) return;
        Tensor& ga = t.grad_buf(ai);
        for (auto& x : ga.v) x += self.grad.v[0] / n;
    });
}

Var Tape::blocked_outer(Var zs, Var zo, std::size_t groups) {
    const Tensor& s = value(zs);
    const Tensor& o = value(zo);
    if (s.rows() != 1 || o.rows() != 1 || !s.same_shape(o))
        raise(ErrorKind::dimension, "blocked_outer: inputs must be equal-length rows");
    const std::size_t d = s.cols();
    if (groups == 0 || d % groups != 0)
        raise(ErrorKind::config, "blocked_outer: group count must divide dimension");
    const std::size_t bk = d / groups;

    Tensor out(1, d * bk);
    for (std::size_t g = 0; g < groups; ++g)
        for (std::size_t i = 0; i < bk; ++i)
            for (std::size_t j = 0; j < bk; ++j)
                out.v[(g * bk + i) * bk + j] = s.v[g * bk + i] * o.v[g * bk + j];

    bool rg = node(zs).requires_grad || node(zo).requires_grad;
    auto si = zs.id, oi = zo.id;
    return push(std::move(out), rg, [si, oi, groups, bk](Tape& t, const Node& self) {
        const Tensor& s = t.nodes_[si].val;
        const Tensor& o = t.nodes_[oi].val;
        const Tensor& g = self.grad;
        for (std::size_t grp = 0; grp < groups; ++grp)
            for (std::size_t i = 0; i < bk; ++i)
                for (std::size_t j = 0; j < bk; ++j) {
                    double gv = g.v[(grp * bk + i) * bk + j];
                    if (t.nodes_[si].requires_grad)
                        t.grad_buf(si).v[grp * bk + i] += gv * o.v[grp * bk + j];
                    if (t.nodes_[oi].requires_grad)
                        t.grad_buf(oi).v[grp * bk + j] += gv * s.v[grp * bk + i];
                }
    });
}

Var Tape::bce_logits_sum(Var logits, const Tensor& targets) {
    const Tensor& y = value(logits);
    check_same_shape(y, targets, "bce_logits_sum");
    double loss = 0.0;
    for (std::size_t i = 0; i < y.v.size(); ++i) {
        double yi = y.v[i], ti = targets.v[i];
        loss += std::max(yi, 0.0) - yi * ti + std::log1p(std::exp(-std::abs(yi)));
    }
    auto ai = logits.id;
    return push(Tensor::scalar(loss), node(logits).requires_grad,
                [ai, targets](Tape& t, const Node& self) {
                    if (!t.nodes_[ai].requires_grad) return;
                    Tensor& ga = t.grad_buf(ai);
                    const Tensor& y = t.nodes_[ai].val;
                    for (std::size_t i = 0; i < y.v.size(); ++i) {
                        double sig = 1.0 / (1.0 + std::exp(-y.v[i]));
                        ga.v[i] += self.grad.v[0] * (sig - targets.v[i]);
                    }
                });
}

void Tape::backward(Var loss) {
    if (value(loss).numel() != 1)
        raise(ErrorKind::contract, "backward: loss must be scalar");
    grad_buf(loss.id).v[0] = 1.0;
    for (std::uint32_t i = loss.id + 1; i-- > 0;) {
        Node& n = nodes_[i];
        if (!n.backprop || !n.requires_grad) continue;
        if (n.grad.v.empty()) continue; // not reachable from the loss
        n.backprop(*this, n);
    }
}

} // namespace evirex::num
