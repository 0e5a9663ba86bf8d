#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>

#include "evirex/metrics.hpp"

using namespace evirex;

namespace {

// ---- brute-force oracles: linear scans over label/prediction lists, no sets

struct OracleScores {
    double p, r, f1;
};

bool same_triple(const Prediction& a, const std::string& doc, int h, int t, int r) {
    return a.doc_id == doc && a.subject == h && a.object == t && a.relation == r;
}

std::vector<Prediction> oracle_dedup(const std::vector<Prediction>& preds) {
    std::vector<Prediction> out;
    for (const Prediction& p : preds) {
        bool seen = false;
        for (const Prediction& q : out)
            if (same_triple(q, p.doc_id, p.subject, p.object, p.relation)) seen = true;
        if (!seen) out.push_back(p);
    }
    return out;
}

OracleScores oracle_prf(std::size_t matched, std::size_t n_pred, std::size_t n_gold) {
    OracleScores s{};
    s.p = n_pred ? static_cast<double>(matched) / static_cast<double>(n_pred) : 0.0;
    s.r = n_gold ? static_cast<double>(matched) / static_cast<double>(n_gold) : 0.0;
    s.f1 = (s.p + s.r) > 0 ? 2 * s.p * s.r / (s.p + s.r) : 0.0;
    return s;
}

using GoldTriple = std::tuple<std::string, int, int, int>;

std::vector<GoldTriple> oracle_gold_triples(const Corpus& gold) {
    std::vector<GoldTriple> out;
    for (const Document& d : gold.docs)
        for (const RelationInstance& l : d.labels) {
            GoldTriple t{d.doc_id, l.head, l.tail, l.relation};
            bool seen = false;
            for (const GoldTriple& x : out)
                if (x == t) seen = true;
            if (!seen) out.push_back(t);
        }
    return out;
}

OracleScores oracle_re(const std::vector<Prediction>& preds_in, const Corpus& gold) {
    const auto preds = oracle_dedup(preds_in);
    const auto gold_triples = oracle_gold_triples(gold);
    std::size_t matched = 0;
    for (const Prediction& p : preds)
        for (const GoldTriple& g : gold_triples)
            if (same_triple(p, std::get<0>(g), std::get<1>(g), std::get<2>(g), std::get<3>(g)))
                ++matched;
    return oracle_prf(matched, preds.size(), gold_triples.size());
}

bool oracle_fact_in_train(const Corpus& eval_corpus, const Corpus& train,
                          const std::string& doc_id, int head, int relation, int tail) {
    const Document* doc = nullptr;
    for (const Document& d : eval_corpus.docs)
        if (d.doc_id == doc_id) doc = &d;
    if (!doc) return false;
    for (const Document& td : train.docs)
        for (const RelationInstance& tl : td.labels) {
            if (tl.relation != relation) continue;
            bool head_overlap = false, tail_overlap = false;
            for (const Mention& em : doc->entities[static_cast<std::size_t>(head)].mentions)
                for (const Mention& tm : td.entities[static_cast<std::size_t>(tl.head)].mentions)
                    if (em.surface == tm.surface) head_overlap = true;
            for (const Mention& em : doc->entities[static_cast<std::size_t>(tail)].mentions)
                for (const Mention& tm : td.entities[static_cast<std::size_t>(tl.tail)].mentions)
                    if (em.surface == tm.surface) tail_overlap = true;
            if (head_overlap && tail_overlap) return true;
        }
    return false;
}

double oracle_ign(const std::vector<Prediction>& preds_in, const Corpus& gold,
                  const Corpus& train) {
    const auto preds = oracle_dedup(preds_in);
    std::size_t n_gold = 0, n_pred = 0, matched = 0;
    std::vector<GoldTriple> kept_gold;
    for (const GoldTriple& g : oracle_gold_triples(gold))
        if (!oracle_fact_in_train(gold, train, std::get<0>(g), std::get<1>(g), std::get<3>(g),
                                  std::get<2>(g)))
            kept_gold.push_back(g);
    n_gold = kept_gold.size();
    for (const Prediction& p : preds) {
        if (oracle_fact_in_train(gold, train, p.doc_id, p.subject, p.relation, p.object))
            continue;
        ++n_pred;
        for (const GoldTriple& g : kept_gold)
            if (same_triple(p, std::get<0>(g), std::get<1>(g), std::get<2>(g), std::get<3>(g)))
                ++matched;
    }
    return oracle_prf(matched, n_pred, n_gold).f1;
}

OracleScores oracle_evi(const std::vector<Prediction>& preds, const Corpus& gold) {
    // unique (doc, s, o, r, sentence) tuples via linear containment scans
    using Tuple = std::tuple<std::string, int, int, int, int>;
    std::vector<Tuple> pred_tuples, gold_tuples;
    auto insert_unique = [](std::vector<Tuple>& xs, const Tuple& t) {
        for (const Tuple& x : xs)
            if (x == t) return;
        xs.push_back(t);
    };
    for (const Prediction& p : preds)
        for (int s : p.evidence)
            insert_unique(pred_tuples, {p.doc_id, p.subject, p.object, p.relation, s});
    for (const Document& d : gold.docs)
        for (const RelationInstance& l : d.labels)
            for (int s : l.evidence)
                insert_unique(gold_tuples, {d.doc_id, l.head, l.tail, l.relation, s});
    std::size_t matched = 0;
    for (const Tuple& p : pred_tuples)
        for (const Tuple& g : gold_tuples)
            if (p == g) ++matched;
    return oracle_prf(matched, pred_tuples.size(), gold_tuples.size());
}

// ---- random small instances

struct Instance {
    Corpus gold;
    Corpus train;
    std::vector<Prediction> preds;
};

Instance random_instance(Rng& rng) {
    auto rand_int = [&rng](int lo, int hi) {
        return std::uniform_int_distribution<int>(lo, hi)(rng);
    };
    auto coin = [&rng](double p) {
        return std::uniform_real_distribution<double>(0, 1)(rng) < p;
    };

    Instance inst;
    const int n_docs = rand_int(1, 5);
    const int n_rel = rand_int(1, 4);
    const std::vector<std::string> name_pool{"alpha", "beta", "gamma", "delta", "eps"};

    auto random_corpus = [&](const std::string& prefix, int docs) {
        Corpus c;
        for (int di = 0; di < docs; ++di) {
            Document d;
            d.doc_id = prefix + std::to_string(di);
            const int n_sent = rand_int(2, 4);
            for (int s = 0; s < n_sent; ++s) d.sentences.push_back({"w", "w", "w"});
            const int n_ent = rand_int(2, 4);
            for (int e = 0; e < n_ent; ++e) {
                Entity ent;
                ent.type_tag = "X";
                Mention m;
                m.sent_id = rand_int(0, n_sent - 1);
                m.start = 0;
                m.end = 1;
                m.surface = name_pool[static_cast<std::size_t>(rand_int(0, 4))];
                ent.mentions.push_back(m);
                d.entities.push_back(ent);
            }
            const int n_labels = rand_int(0, 4);
            for (int l = 0; l < n_labels; ++l) {
                RelationInstance ri;
                ri.head = rand_int(0, n_ent - 1);
                ri.tail = rand_int(0, n_ent - 1);
                if (ri.head == ri.tail) continue;
                ri.relation = rand_int(1, n_rel);
                for (int s = 0; s < n_sent; ++s)
                    if (coin(0.5)) ri.evidence.insert(s);
                d.labels.push_back(ri);
            }
            c.docs.push_back(d);
        }
        return c;
    };

    inst.gold = random_corpus("doc", n_docs);
    inst.train = random_corpus("train", rand_int(1, 3));

    // predictions: some lifted from gold (possibly with mangled evidence),
    // some random, some duplicated
    for (const Document& d : inst.gold.docs) {
        for (const RelationInstance& l : d.labels) {
            if (!coin(0.6)) continue;
            Prediction p;
            p.doc_id = d.doc_id;
            p.subject = l.head;
            p.object = l.tail;
            p.relation = coin(0.8) ? l.relation : rand_int(1, n_rel);
            p.score = 1.0;
            for (int s = 0; s < static_cast<int>(d.sentences.size()); ++s)
                if (coin(0.4)) p.evidence.insert(s);
            inst.preds.push_back(p);
            if (coin(0.25)) inst.preds.push_back(p); // duplicate on purpose
        }
        const int extra = rand_int(0, 2);
        for (int k = 0; k < extra && d.entities.size() >= 2; ++k) {
            Prediction p;
            p.doc_id = d.doc_id;
            p.subject = rand_int(0, static_cast<int>(d.entities.size()) - 1);
            p.object = rand_int(0, static_cast<int>(d.entities.size()) - 1);
            if (p.subject == p.object) continue;
            p.relation = rand_int(1, n_rel);
            p.score = 0.5;
            if (coin(0.5)) p.evidence.insert(rand_int(0, static_cast<int>(d.sentences.size()) - 1));
            inst.preds.push_back(p);
        }
    }
    return inst;
}

} // namespace

TEST_CASE("worked examples") {
    Corpus gold;
    Document d;
    d.doc_id = "doc0";
    d.sentences = {{"a"}, {"b"}};
    Entity e0, e1, e2;
    e0.mentions = {{0, 0, 1, "A"}};
    e1.mentions = {{0, 0, 1, "B"}};
    e2.mentions = {{1, 0, 1, "C"}};
    d.entities = {e0, e1, e2};
    d.labels.push_back({0, 1, 1, {0}});
    d.labels.push_back({0, 2, 2, {1}});
    gold.docs.push_back(d);

    auto pred = [&](int h, int t, int r, std::set<int> ev) {
        Prediction p;
        p.doc_id = "doc0";
        p.subject = h;
        p.object = t;
        p.relation = r;
        p.evidence = std::move(ev);
        return p;
    };

    SUBCASE("predictions equal to gold score 1 everywhere") {
        std::vector<Prediction> preds{pred(0, 1, 1, {0}), pred(0, 2, 2, {1})};
        EvalReport rep = evaluate(preds, gold);
        CHECK(rep.re.f1 == doctest::Approx(1.0));
        CHECK(rep.re.precision == doctest::Approx(1.0));
        CHECK(rep.evi.f1 == doctest::Approx(1.0));
    }
    SUBCASE("empty predictions score zero under the zero-division rule") {
        PRF s = re_f1({}, gold);
        CHECK(s.precision == 0.0);
        CHECK(s.recall == 0.0);
        CHECK(s.f1 == 0.0);
    }
    SUBCASE("one right and one wrong out of two gold is 0.5 across the board") {
        std::vector<Prediction> preds{pred(0, 1, 1, {}), pred(1, 2, 1, {})};
        PRF s = re_f1(preds, gold);
        CHECK(s.precision == doctest::Approx(0.5));
        CHECK(s.recall == doctest::Approx(0.5));
        CHECK(s.f1 == doctest::Approx(0.5));
    }
    SUBCASE("evidence with one extra sentence per triple halves precision") {
        std::vector<Prediction> preds{pred(0, 1, 1, {0, 1})};
        Corpus single;
        Document d1 = d;
        d1.labels = {{0, 1, 1, {0}}};
        single.docs.push_back(d1);
        PRF s = evi_f1(preds, single);
        CHECK(s.precision == doctest::Approx(0.5));
        CHECK(s.recall == doctest::Approx(1.0));
        CHECK(s.f1 == doctest::Approx(2.0 / 3.0));
    }
    SUBCASE("a correct triple with empty evidence contributes nothing") {
        std::vector<Prediction> preds{pred(0, 1, 1, {})};
        PRF s = evi_f1(preds, gold);
        CHECK(s.precision == 0.0);
        CHECK(s.recall == 0.0);
    }
}

TEST_CASE("ign f1 worked examples") {
    auto make_doc = [](const std::string& id, const std::string& head_name,
                       const std::string& tail_name, int rel) {
        Document d;
        d.doc_id = id;
        d.sentences = {{"w"}};
        Entity h, t;
        h.mentions = {{0, 0, 1, head_name}};
        t.mentions = {{0, 0, 1, tail_name}};
        d.entities = {h, t};
        d.labels.push_back({0, 1, rel, {}});
        return d;
    };

    Corpus gold;
    gold.docs = {make_doc("e0", "A", "B", 1), make_doc("e1", "C", "D", 1),
                 make_doc("e2", "E", "F", 2)};
    std::vector<Prediction> preds;
    for (const Document& d : gold.docs) {
        Prediction p;
        p.doc_id = d.doc_id;
        p.subject = 0;
        p.object = 1;
        p.relation = d.labels[0].relation;
        preds.push_back(p);
    }

    SUBCASE("no shared facts: ign equals plain F1") {
        Corpus train;
        train.docs = {make_doc("t0", "X", "Y", 1)};
        CHECK(ign_f1(preds, gold, train) == doctest::Approx(re_f1(preds, gold).f1));
    }
    SUBCASE("one gold fact in train leaves the rest perfect") {
        Corpus train;
        train.docs = {make_doc("t0", "A", "B", 1)};
        CHECK(ign_f1(preds, gold, train) == doctest::Approx(1.0));
    }
    SUBCASE("every gold fact in train gives zero") {
        Corpus train = gold;
        CHECK(ign_f1(preds, gold, train) == doctest::Approx(0.0));
    }
}

TEST_CASE("metrics equal the brute-force oracle on random small instances") {
    Rng rng(2024);
    for (int trial = 0; trial < 200; ++trial) {
        Instance inst = random_instance(rng);
        const PRF re = re_f1(inst.preds, inst.gold);
        const OracleScores ore = oracle_re(inst.preds, inst.gold);
        CHECK(re.precision == doctest::Approx(ore.p).epsilon(1e-12));
        CHECK(re.recall == doctest::Approx(ore.r).epsilon(1e-12));
        CHECK(re.f1 == doctest::Approx(ore.f1).epsilon(1e-12));

        CHECK(ign_f1(inst.preds, inst.gold, inst.train) ==
              doctest::Approx(oracle_ign(inst.preds, inst.gold, inst.train)).epsilon(1e-12));

        const PRF evi = evi_f1(inst.preds, inst.gold);
        const OracleScores oevi = oracle_evi(inst.preds, inst.gold);
        CHECK(evi.precision == doctest::Approx(oevi.p).epsilon(1e-12));
        CHECK(evi.recall == doctest::Approx(oevi.r).epsilon(1e-12));
        CHECK(evi.f1 == doctest::Approx(oevi.f1).epsilon(1e-12));
    }
}

TEST_CASE("prediction order does not matter and dedup is idempotent") {
    Rng rng(99);
    for (int trial = 0; trial < 20; ++trial) {
        Instance inst = random_instance(rng);
        std::vector<Prediction> shuffled = inst.preds;
        std::shuffle(shuffled.begin(), shuffled.end(), rng);
        CHECK(re_f1(inst.preds, inst.gold).f1 ==
              doctest::Approx(re_f1(shuffled, inst.gold).f1).epsilon(1e-12));
        CHECK(evi_f1(inst.preds, inst.gold).f1 ==
              doctest::Approx(evi_f1(shuffled, inst.gold).f1).epsilon(1e-12));

        std::vector<Prediction> doubled = inst.preds;
        doubled.insert(doubled.end(), inst.preds.begin(), inst.preds.end());
        CHECK(re_f1(doubled, inst.gold).f1 ==
              doctest::Approx(re_f1(inst.preds, inst.gold).f1).epsilon(1e-12));
        CHECK(evi_f1(doubled, inst.gold).f1 ==
              doctest::Approx(evi_f1(inst.preds, inst.gold).f1).epsilon(1e-12));
    }
}

TEST_CASE("report serialization carries the scores") {
    Corpus gold;
    Document d;
    d.doc_id = "doc0";
    d.sentences = {{"w"}};
    Entity a, b;
    a.mentions = {{0, 0, 1, "A"}};
    b.mentions = {{0, 0, 1, "B"}};
    d.entities = {a, b};
    d.labels.push_back({0, 1, 1, {0}});
    gold.docs.push_back(d);
    Prediction p;
    p.doc_id = "doc0";
    p.subject = 0;
    p.object = 1;
    p.relation = 1;
    p.evidence = {0};
    EvalReport rep = evaluate({p}, gold);
    CHECK(rep.to_json().find("\"f1\"") != std::string::npos);
    CHECK(rep.to_text().find("RE") != std::string::npos);
    CHECK(rep.re_matched == 1);
    CHECK(rep.evi_matched == 1);
}
