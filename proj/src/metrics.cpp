#include "evirex/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <set>

#include <json.hpp>

#include "evirex/error.hpp"

namespace evirex {

using nlohmann::json;

namespace {

using TripleKey = std::tuple<std::string, int, int, int>;

std::vector<Prediction> dedup(const std::vector<Prediction>& preds) {
    std::set<TripleKey> seen;
    std::vector<Prediction> out;
    for (const Prediction& p : preds) {
        TripleKey key{p.doc_id, p.subject, p.object, p.relation};
        if (seen.insert(key).second) out.push_back(p);
    }
    return out;
}

std::set<TripleKey> gold_triples(const Corpus& gold) {
    std::set<TripleKey> out;
    for (const Document& d : gold.docs)
        for (const RelationInstance& r : d.labels)
            out.insert({d.doc_id, r.head, r.tail, r.relation});
    return out;
}

PRF micro(std::size_t matched, std::size_t n_pred, std::size_t n_gold) {
    PRF s;
    s.precision = n_pred == 0 ? 0.0 : static_cast<double>(matched) / static_cast<double>(n_pred);
    s.recall = n_gold == 0 ? 0.0 : static_cast<double>(matched) / static_cast<double>(n_gold);
    s.f1 = (s.precision + s.recall) == 0.0
               ? 0.0
               : 2.0 * s.precision * s.recall / (s.precision + s.recall);
    return s;
}

std::set<std::string> entity_names(const Document& d, int entity) {
    std::set<std::string> names;
    for (const Mention& m : d.entities[static_cast<std::size_t>(entity)].mentions)
        names.insert(m.surface);
    return names;
}

bool overlaps(const std::set<std::string>& a, const std::set<std::string>& b) {
    for (const auto& x : a)
        if (b.count(x)) return true;
    return false;
}

struct FactTable {
    // per relation id: list of (head names, tail names) from the train split
    std::map<int, std::vector<std::pair<std::set<std::string>, std::set<std::string>>>> facts;

    bool contains(const std::set<std::string>& head, int relation,
                  const std::set<std::string>& tail) const {
        auto it = facts.find(relation);
        if (it == facts.end()) return false;
        for (const auto& [h, t] : it->second)
            if (overlaps(head, h) && overlaps(tail, t)) return true;
        return false;
    }
};

FactTable build_fact_table(const Corpus& train) {
    FactTable table;
    for (const Document& d : train.docs)
        for (const RelationInstance& r : d.labels)
            table.facts[r.relation].emplace_back(entity_names(d, r.head), entity_names(d, r.tail));
    return table;
}

const Document* find_doc(const Corpus& corpus, const std::string& doc_id) {
    for (const Document& d : corpus.docs)
        if (d.doc_id == doc_id) return &d;
    return nullptr;
}

} // namespace

PRF re_f1(const std::vector<Prediction>& preds, const Corpus& gold) {
    const auto unique = dedup(preds);
    const auto gold_set = gold_triples(gold);
    std::size_t matched = 0;
    for (const Prediction& p : unique)
        if (gold_set.count({p.doc_id, p.subject, p.object, p.relation})) ++matched;
    return micro(matched, unique.size(), gold_set.size());
}

double ign_f1(const std::vector<Prediction>& preds, const Corpus& gold_eval, const Corpus& train) {
    const FactTable table = build_fact_table(train);
    auto in_train = [&](const std::string& doc_id, int head, int relation, int tail) {
        const Document* d = find_doc(gold_eval, doc_id);
        if (!d) raise(ErrorKind::validation, "prediction references unknown doc " + doc_id);
        return table.contains(entity_names(*d, head), relation, entity_names(*d, tail));
    };

    std::set<TripleKey> gold_set;
    for (const Document& d : gold_eval.docs)
        for (const RelationInstance& r : d.labels)
            if (!in_train(d.doc_id, r.head, r.relation, r.tail))
                gold_set.insert({d.doc_id, r.head, r.tail, r.relation});

    std::size_t matched = 0, kept_preds = 0;
    for (const Prediction& p : dedup(preds)) {
        if (in_train(p.doc_id, p.subject, p.relation, p.object)) continue;
        ++kept_preds;
        if (gold_set.count({p.doc_id, p.subject, p.object, p.relation})) ++matched;
    }
    return micro(matched, kept_preds, gold_set.size()).f1;
}

PRF evi_f1(const std::vector<Prediction>& preds, const Corpus& gold) {
    using EviKey = std::tuple<std::string, int, int, int, int>;
    std::set<EviKey> gold_set;
    for (const Document& d : gold.docs)
        for (const RelationInstance& r : d.labels)
            for (int s : r.evidence) gold_set.insert({d.doc_id, r.head, r.tail, r.relation, s});

    // tuple-set semantics: duplicates of a triple contribute the union of
    // their evidence, so scoring is order-independent
    std::set<EviKey> pred_set;
    for (const Prediction& p : preds)
        for (int s : p.evidence) pred_set.insert({p.doc_id, p.subject, p.object, p.relation, s});

    std::size_t matched = 0;
    for (const auto& key : pred_set)
        if (gold_set.count(key)) ++matched;
    return micro(matched, pred_set.size(), gold_set.size());
}

EvalReport evaluate(const std::vector<Prediction>& preds, const Corpus& gold,
                    const Corpus* train) {
    EvalReport rep;
    const auto unique = dedup(preds);
    rep.re = re_f1(unique, gold);
    rep.re_gold = gold_triples(gold).size();
    rep.re_pred = unique.size();
    {
        const auto gold_set = gold_triples(gold);
        for (const Prediction& p : unique)
            if (gold_set.count({p.doc_id, p.subject, p.object, p.relation})) ++rep.re_matched;
    }
    rep.ign_f1 = train ? ign_f1(unique, gold, *train) : rep.re.f1;
    rep.evi = evi_f1(preds, gold);
    {
        using EviKey = std::tuple<std::string, int, int, int, int>;
        std::set<EviKey> pred_set, gold_set;
        for (const Document& d : gold.docs)
            for (const RelationInstance& r : d.labels)
                for (int s : r.evidence) gold_set.insert({d.doc_id, r.head, r.tail, r.relation, s});
        for (const Prediction& p : preds)
            for (int s : p.evidence) pred_set.insert({p.doc_id, p.subject, p.object, p.relation, s});
        rep.evi_pred = pred_set.size();
        for (const auto& key : pred_set)
            if (gold_set.count(key)) ++rep.evi_matched;
        rep.evi_gold = gold_set.size();
    }
    return rep;
}

std::string EvalReport::to_json() const {
    json j;
    j["re"] = {{"precision", re.precision}, {"recall", re.recall}, {"f1", re.f1}};
    j["ign_f1"] = ign_f1;
    j["evi"] = {{"precision", evi.precision}, {"recall", evi.recall}, {"f1", evi.f1}};
    j["counts"] = {{"re_gold", re_gold},   {"re_pred", re_pred},   {"re_matched", re_matched},
                   {"evi_gold", evi_gold}, {"evi_pred", evi_pred}, {"evi_matched", evi_matched}};
    return j.dump(1);
}

std::string EvalReport::to_text() const {
    char buf[512];
    std::string out;
    out += "metric        precision    recall        f1\n";
    std::snprintf(buf, sizeof(buf), "RE            %9.4f %9.4f %9.4f\n", re.precision, re.recall,
                  re.f1);
    out += buf;
    std::snprintf(buf, sizeof(buf), "RE (ign)              -         - %9.4f\n", ign_f1);
    out += buf;
    std::snprintf(buf, sizeof(buf), "Evi           %9.4f %9.4f %9.4f\n", evi.precision,
                  evi.recall, evi.f1);
    out += buf;
    std::snprintf(buf, sizeof(buf), "counts  gold/pred/matched  RE %zu/%zu/%zu  Evi %zu/%zu/%zu\n",
                  re_gold, re_pred, re_matched, evi_gold, evi_pred, evi_matched);
    out += buf;
    return out;
}

} // namespace evirex
