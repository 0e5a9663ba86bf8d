#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "evirex/error.hpp"
#include "evirex/rexmodel.hpp"

using namespace evirex;
using namespace evirex::num;

namespace {

// EncoderOutput stand-in with hand-picked H and A.
EncoderOutput fake_output(Tape& tape, Tensor h, Tensor a) {
    return EncoderOutput{tape.constant(std::move(h)), tape.constant(std::move(a))};
}

TokenizedDocument markers_for(std::vector<std::vector<int>> per_entity) {
    TokenizedDocument tok;
    tok.mention_start_marker_pos = std::move(per_entity);
    return tok;
}

ParamSet zero_classifier(const ClassifierConfig& cfg) {
    ParamSet ps;
    const std::size_t d = cfg.dim;
    ps.add("classifier.w_subject", Tensor(d, 2 * d, 0.0));
    ps.add("classifier.b_subject", Tensor(1, d, 0.0));
    ps.add("classifier.w_object", Tensor(d, 2 * d, 0.0));
    ps.add("classifier.b_object", Tensor(1, d, 0.0));
    ps.add("classifier.bilinear", Tensor(cfg.score_width(), d * (d / cfg.groups), 0.0));
    ps.add("classifier.bias", Tensor(1, cfg.score_width(), 0.0));
    return ps;
}

// grouped bilinear evaluated directly from raw z vectors and per-relation
// blocks; the oracle for the blocked_outer + matmul path
double grouped_score(const std::vector<double>& zs, const std::vector<double>& zo,
                     const std::vector<double>& blocks_row, std::size_t groups) {
    const std::size_t d = zs.size();
    const std::size_t bk = d / groups;
    double y = 0.0;
    for (std::size_t g = 0; g < groups; ++g)
        for (std::size_t i = 0; i < bk; ++i)
            for (std::size_t j = 0; j < bk; ++j)
                y += zs[g * bk + i] * blocks_row[(g * bk + i) * bk + j] * zo[g * bk + j];
    return y;
}

} // namespace

TEST_CASE("entity embedding is logsumexp pooling over opening markers") {
    Tape tape;
    SUBCASE("a single mention returns its H row") {
        Tensor h = Tensor::from_rows({{1.0, -2.0}, {3.0, 4.0}});
        EncoderOutput out = fake_output(tape, h, Tensor(2, 2, 0.5));
        TokenizedDocument tok = markers_for({{1}});
        Var e = entity_embedding(tape, out, tok, 0);
        CHECK(tape.value(e).v[0] == doctest::Approx(3.0));
        CHECK(tape.value(e).v[1] == doctest::Approx(4.0));
    }
    SUBCASE("two identical mentions add ln 2 elementwise") {
        Tensor h = Tensor::from_rows({{0.7, -1.1}, {0.7, -1.1}});
        EncoderOutput out = fake_output(tape, h, Tensor(2, 2, 0.5));
        TokenizedDocument tok = markers_for({{0, 1}});
        Var e = entity_embedding(tape, out, tok, 0);
        CHECK(tape.value(e).v[0] == doctest::Approx(0.7 + std::log(2.0)).epsilon(1e-12));
        CHECK(tape.value(e).v[1] == doctest::Approx(-1.1 + std::log(2.0)).epsilon(1e-12));
    }
    SUBCASE("mention rows [0,1] and [1,0]") {
        Tensor h = Tensor::from_rows({{0.0, 1.0}, {1.0, 0.0}});
        EncoderOutput out = fake_output(tape, h, Tensor(2, 2, 0.5));
        TokenizedDocument tok = markers_for({{0, 1}});
        Var e = entity_embedding(tape, out, tok, 0);
        CHECK(tape.value(e).v[0] == doctest::Approx(1.31326).epsilon(1e-4));
        CHECK(tape.value(e).v[1] == doctest::Approx(1.31326).epsilon(1e-4));
    }
    SUBCASE("an entity without markers is rejected") {
        Tensor h(2, 2, 0.0);
        EncoderOutput out = fake_output(tape, h, Tensor(2, 2, 0.5));
        TokenizedDocument tok = markers_for({{}});
        CHECK_THROWS_AS(entity_embedding(tape, out, tok, 0), Error);
    }
}

TEST_CASE("token importance q") {
    Tape tape;
    SUBCASE("uniform importances stay uniform") {
        Var a = tape.constant(Tensor::row({0.25, 0.25, 0.25, 0.25}));
        PairContext ctx = pair_token_distribution(tape, a, a);
        for (double x : tape.value(ctx.q).v) CHECK(x == doctest::Approx(0.25).epsilon(1e-12));
    }
    SUBCASE("hand evaluation of the Hadamard-normalized form") {
        Var as = tape.constant(Tensor::row({0.5, 0.5}));
        Var ao = tape.constant(Tensor::row({0.8, 0.2}));
        PairContext ctx = pair_token_distribution(tape, as, ao);
        CHECK(tape.value(ctx.q).v[0] == doctest::Approx(0.8).epsilon(1e-9));
        CHECK(tape.value(ctx.q).v[1] == doctest::Approx(0.2).epsilon(1e-9));
    }
    SUBCASE("disjoint supports fall back to uniform") {
        Var as = tape.constant(Tensor::row({1.0, 0.0}));
        Var ao = tape.constant(Tensor::row({0.0, 1.0}));
        PairContext ctx = pair_token_distribution(tape, as, ao);
        CHECK(tape.value(ctx.q).v[0] == doctest::Approx(0.5));
        CHECK(tape.value(ctx.q).v[1] == doctest::Approx(0.5));
    }
    SUBCASE("q is a distribution for random attention rows") {
        Rng rng2(8);
        for (int trial = 0; trial < 50; ++trial) {
            Tensor arow = Tensor::randn(1, 12, rng2, 1.0);
            Tensor brow = Tensor::randn(1, 12, rng2, 1.0);
            for (auto& x : arow.v) x = std::abs(x) + 1e-6;
            for (auto& x : brow.v) x = std::abs(x) + 1e-6;
            Tape t;
            PairContext ctx =
                pair_token_distribution(t, t.constant(arow), t.constant(brow));
            double sum = 0.0;
            for (double x : t.value(ctx.q).v) {
                CHECK(x >= 0.0);
                sum += x;
            }
            CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));
        }
    }
}

TEST_CASE("local context is H^T q") {
    Tape tape;
    Tensor h = Tensor::from_rows({{1.0, 0.0}, {0.0, 1.0}});
    EncoderOutput out = fake_output(tape, h, Tensor(2, 2, 0.5));
    SUBCASE("one-hot q selects a row") {
        Var c = local_context(tape, out, tape.constant(Tensor::row({0.0, 1.0})));
        CHECK(tape.value(c).v[0] == 0.0);
        CHECK(tape.value(c).v[1] == 1.0);
    }
    SUBCASE("uniform q averages the rows") {
        Var c = local_context(tape, out, tape.constant(Tensor::row({0.5, 0.5})));
        CHECK(tape.value(c).v[0] == doctest::Approx(0.5));
        CHECK(tape.value(c).v[1] == doctest::Approx(0.5));
    }
    SUBCASE("worked example") {
        Var c = local_context(tape, out, tape.constant(Tensor::row({0.25, 0.75})));
        CHECK(tape.value(c).v[0] == doctest::Approx(0.25));
        CHECK(tape.value(c).v[1] == doctest::Approx(0.75));
    }
}

TEST_CASE("relation scores") {
    ClassifierConfig cfg;
    cfg.dim = 8;
    cfg.num_real_relations = 3;
    cfg.groups = 2;

    SUBCASE("all-zero parameters score zero, so every P(r) is one half") {
        ParamSet ps = zero_classifier(cfg);
        Tape tape;
        ParamLeaves leaves = make_leaves(tape, ps);
        Var h = tape.constant(Tensor(1, 8, 0.3));
        Var c = tape.constant(Tensor(1, 8, -0.2));
        Var y = relation_scores(tape, leaves, h, h, c, cfg);
        for (double v : tape.value(y).v) {
            CHECK(v == 0.0);
            CHECK(1.0 / (1.0 + std::exp(-v)) == doctest::Approx(0.5));
        }
    }

    SUBCASE("grouped path equals the direct block evaluation") {
        Rng rng(5);
        ParamSet ps;
        init_classifier_params(ps, cfg, rng);
        Tape tape;
        ParamLeaves leaves = make_leaves(tape, ps);
        Var h_s = tape.constant(Tensor::randn(1, 8, rng, 1.0));
        Var h_o = tape.constant(Tensor::randn(1, 8, rng, 1.0));
        Var c = tape.constant(Tensor::randn(1, 8, rng, 1.0));
        Var y = relation_scores(tape, leaves, h_s, h_o, c, cfg);

        // recompute z_s, z_o by hand
        auto z_of = [&](const char* w, const char* b, Var h) {
            std::vector<double> z(cfg.dim);
            const Tensor& wm = ps.at(w);
            const Tensor& bv = ps.at(b);
            for (std::size_t i = 0; i < cfg.dim; ++i) {
                double s = bv.v[i];
                for (std::size_t j = 0; j < 2 * cfg.dim; ++j) {
                    double x = j < cfg.dim ? tape.value(h).v[j] : tape.value(c).v[j - cfg.dim];
                    s += wm.at(i, j) * x;
                }
                z[i] = std::tanh(s);
            }
            return z;
        };
        const auto zs = z_of("classifier.w_subject", "classifier.b_subject", h_s);
        const auto zo = z_of("classifier.w_object", "classifier.b_object", h_o);
        const Tensor& blocks = ps.at("classifier.bilinear");
        const Tensor& bias = ps.at("classifier.bias");
        for (std::size_t r = 0; r < cfg.score_width(); ++r) {
            std::vector<double> row(blocks.v.begin() + static_cast<long>(r * blocks.cols()),
                                    blocks.v.begin() + static_cast<long>((r + 1) * blocks.cols()));
            const double expected = grouped_score(zs, zo, row, cfg.groups) + bias.v[r];
            CHECK(tape.value(y).v[r] == doctest::Approx(expected).epsilon(1e-10));
        }
    }

    SUBCASE("k=1 and k=d agree on a diagonal bilinear form") {
        Rng rng(9);
        const std::size_t d = 8;
        std::vector<double> diag(d);
        for (auto& x : diag) x = std::normal_distribution<double>(0, 1)(rng);

        ClassifierConfig full = cfg;
        full.groups = 1;
        ClassifierConfig perdim = cfg;
        perdim.groups = d;

        auto score_with = [&](const ClassifierConfig& c2) {
            ParamSet ps = zero_classifier(c2);
            Tensor& blocks = ps.at("classifier.bilinear");
            for (std::size_t r = 0; r < c2.score_width(); ++r) {
                if (c2.groups == 1) {
                    for (std::size_t i = 0; i < d; ++i)
                        blocks.at(r, i * d + i) = diag[i] * static_cast<double>(r + 1);
                } else {
                    for (std::size_t i = 0; i < d; ++i)
                        blocks.at(r, i) = diag[i] * static_cast<double>(r + 1);
                }
            }
            // identity-ish subject/object maps so z vectors differ per side
            Tensor& ws = ps.at("classifier.w_subject");
            Tensor& wo = ps.at("classifier.w_object");
            for (std::size_t i = 0; i < d; ++i) {
                ws.at(i, i) = 0.9;
                wo.at(i, i) = -0.7;
                wo.at(i, d + i) = 0.3;
            }
            Tape tape;
            ParamLeaves leaves = make_leaves(tape, ps);
            Rng data_rng(77);
            Var h_s = tape.constant(Tensor::randn(1, d, data_rng, 1.0));
            Var h_o = tape.constant(Tensor::randn(1, d, data_rng, 1.0));
            Var c = tape.constant(Tensor::randn(1, d, data_rng, 1.0));
            return tape.value(relation_scores(tape, leaves, h_s, h_o, c, c2)).v;
        };
        const auto y_full = score_with(full);
        const auto y_perdim = score_with(perdim);
        for (std::size_t r = 0; r < y_full.size(); ++r)
            CHECK(y_full[r] == doctest::Approx(y_perdim[r]).epsilon(1e-12));
    }

    SUBCASE("swapping the pair with tied weights and symmetric blocks is a no-op") {
        Rng rng(13);
        ParamSet ps = zero_classifier(cfg);
        Tensor shared_w = Tensor::randn(cfg.dim, 2 * cfg.dim, rng, 0.4);
        ps.at("classifier.w_subject") = shared_w;
        ps.at("classifier.w_object") = shared_w;
        Tensor shared_b = Tensor::randn(1, cfg.dim, rng, 0.4);
        ps.at("classifier.b_subject") = shared_b;
        ps.at("classifier.b_object") = shared_b;
        Tensor& blocks = ps.at("classifier.bilinear");
        const std::size_t bk = cfg.dim / cfg.groups;
        for (std::size_t r = 0; r < cfg.score_width(); ++r)
            for (std::size_t g = 0; g < cfg.groups; ++g)
                for (std::size_t i = 0; i < bk; ++i)
                    for (std::size_t j = 0; j <= i; ++j) {
                        double v = std::normal_distribution<double>(0, 1)(rng);
                        blocks.at(r, (g * bk + i) * bk + j) = v;
                        blocks.at(r, (g * bk + j) * bk + i) = v;
                    }

        Tape tape;
        ParamLeaves leaves = make_leaves(tape, ps);
        Rng data_rng(21);
        Var h_s = tape.constant(Tensor::randn(1, cfg.dim, data_rng, 1.0));
        Var h_o = tape.constant(Tensor::randn(1, cfg.dim, data_rng, 1.0));
        Var c = tape.constant(Tensor::randn(1, cfg.dim, data_rng, 1.0));
        const auto y1 = tape.value(relation_scores(tape, leaves, h_s, h_o, c, cfg)).v;
        const auto y2 = tape.value(relation_scores(tape, leaves, h_o, h_s, c, cfg)).v;
        for (std::size_t r = 0; r < y1.size(); ++r)
            CHECK(y1[r] == doctest::Approx(y2[r]).epsilon(1e-12));
    }
}

TEST_CASE("adaptive thresholding loss") {
    ClassifierConfig cfg;
    cfg.dim = 8;
    cfg.num_real_relations = 3;
    cfg.groups = 2;

    auto loss_for = [&](std::initializer_list<double> scores, std::set<int> positives) {
        Tape tape;
        Var y = tape.constant(Tensor::row(scores));
        return tape.value(atl_loss(tape, y, positives, cfg)).v[0];
    };

    SUBCASE("one positive tied with TH and no negatives gives ln 2") {
        ClassifierConfig single = cfg;
        single.num_real_relations = 1;
        Tape tape;
        Var y = tape.constant(Tensor::row({0.4, 0.4})); // TH, r1
        const double l = tape.value(atl_loss(tape, y, {1}, single)).v[0];
        CHECK(l == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    }
    SUBCASE("well-separated scores drive the loss to zero") {
        CHECK(loss_for({0.0, 30.0, -30.0, -30.0}, {1}) == doctest::Approx(0.0).epsilon(1e-9));
        CHECK(loss_for({0.0, -30.0, -30.0, -30.0}, {}) == doctest::Approx(0.0).epsilon(1e-9));
    }
    SUBCASE("loss is nonnegative on random scores") {
        Rng rng(31);
        for (int trial = 0; trial < 100; ++trial) {
            Tensor y = Tensor::randn(1, 4, rng, 2.0);
            std::set<int> pos;
            for (int r = 1; r <= 3; ++r)
                if (std::uniform_real_distribution<>(0, 1)(rng) < 0.4) pos.insert(r);
            Tape tape;
            CHECK(tape.value(atl_loss(tape, tape.constant(y), pos, cfg)).v[0] >= -1e-12);
        }
    }
    SUBCASE("positives must be real relation ids") {
        Tape tape;
        Var y = tape.constant(Tensor(1, 4, 0.0));
        CHECK_THROWS_AS(atl_loss(tape, y, {0}, cfg), Error);
        CHECK_THROWS_AS(atl_loss(tape, y, {4}, cfg), Error);
    }
}

TEST_CASE("binary cross-entropy loss") {
    ClassifierConfig cfg;
    cfg.dim = 8;
    cfg.num_real_relations = 3;
    cfg.groups = 2;

    SUBCASE("a zero logit contributes ln 2 whether positive or negative") {
        Tape tape;
        Var y = tape.constant(Tensor::row({5.0, 0.0, 30.0, -30.0}));
        const double with_pos = tape.value(bce_loss(tape, y, {1, 2}, cfg)).v[0];
        const double with_neg = tape.value(bce_loss(tape, y, {2}, cfg)).v[0];
        CHECK(with_pos == doctest::Approx(std::log(2.0)).epsilon(1e-9));
        CHECK(with_neg == doctest::Approx(std::log(2.0)).epsilon(1e-9));
    }
    SUBCASE("no positives, strongly negative scores") {
        Tape tape;
        Var y = tape.constant(Tensor::row({0.0, -10.0, -10.0, -10.0}));
        const double l = tape.value(bce_loss(tape, y, {}, cfg)).v[0];
        CHECK(l == doctest::Approx(3.0 * std::log1p(std::exp(-10.0))).epsilon(1e-9));
        CHECK(l == doctest::Approx(3.0 * 4.54e-5).epsilon(1e-2));
    }
}
