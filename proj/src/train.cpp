#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <ostream>

#include "evirex/error.hpp"
#include "evirex/pipeline.hpp"

namespace evirex {

using num::Tape;
using num::Var;

const char* to_string(ReLossKind k) { return k == ReLossKind::atl ? "atl" : "bce"; }

const char* to_string(ErSupervision s) {
    switch (s) {
    case ErSupervision::gold: return "gold";
    case ErSupervision::silver: return "silver";
    default: return "none";
    }
}

ReLossKind re_loss_from_string(const std::string& s) {
    if (s == "atl") return ReLossKind::atl;
    if (s == "bce") return ReLossKind::bce;
    raise(ErrorKind::config, "re_loss must be 'atl' or 'bce', got '" + s + "'");
}

ErSupervision er_supervision_from_string(const std::string& s) {
    if (s == "gold") return ErSupervision::gold;
    if (s == "silver") return ErSupervision::silver;
    if (s == "none") return ErSupervision::none;
    raise(ErrorKind::config, "er_supervision must be gold|silver|none, got '" + s + "'");
}

void TrainConfig::validate() const {
    if (lambda < 0.0) raise(ErrorKind::config, "lambda must be nonnegative");
    if (warmup_fraction < 0.0 || warmup_fraction > 1.0)
        raise(ErrorKind::config, "warmup fraction must lie in [0,1]");
    if (batch_size == 0) raise(ErrorKind::config, "batch size must be positive");
    if (evi_threshold <= 0.0 || evi_threshold >= 1.0)
        raise(ErrorKind::config, "evidence threshold must lie in (0,1)");
}

DocLoss build_doc_loss(num::Tape& tape, const num::ParamLeaves& leaves, const Document& doc,
                       const TokenizedDocument& tok, const ModelConfig& cfg,
                       const DocLossOptions& opts) {
    if (opts.er_supervision == ErSupervision::silver && opts.silver == nullptr)
        raise(ErrorKind::contract, "silver supervision requires a silver evidence store");

    DocGraph graph = build_doc_graph(tape, leaves, tok, cfg, /*with_scores=*/true);
    if (graph.pairs.empty()) raise(ErrorKind::contract, "document has no entity pairs");

    std::map<std::pair<int, int>, std::set<int>> positives;
    std::map<std::pair<int, int>, std::vector<const RelationInstance*>> pair_labels;
    for (const RelationInstance& r : doc.labels) {
        positives[{r.head, r.tail}].insert(r.relation);
        pair_labels[{r.head, r.tail}].push_back(&r);
    }

    std::vector<Var> re_terms;
    std::vector<Var> er_terms;
    for (const PairGraph& pair : graph.pairs) {
        const std::pair<int, int> key{static_cast<int>(pair.subject),
                                      static_cast<int>(pair.object)};
        static const std::set<int> kNoRelations;
        auto pit = positives.find(key);
        const std::set<int>& pos = pit == positives.end() ? kNoRelations : pit->second;

        re_terms.push_back(opts.re_loss == ReLossKind::atl
                               ? atl_loss(tape, pair.scores, pos, cfg.classifier)
                               : bce_loss(tape, pair.scores, pos, cfg.classifier));

        if (opts.er_supervision == ErSupervision::gold) {
            auto lit = pair_labels.find(key);
            if (lit != pair_labels.end()) {
                auto v = gold_evidence_distribution(lit->second, doc.sentences.size());
                if (v) er_terms.push_back(er_loss_gold(tape, *v, pair.p));
            }
        } else if (opts.er_supervision == ErSupervision::silver) {
            const auto& stored = opts.silver->get(doc.doc_id, key.first, key.second,
                                                  tok.token_count());
            er_terms.push_back(er_loss_silver(tape, stored, pair.q));
        }
    }

    auto mean_of = [&tape](const std::vector<Var>& terms) {
        Var acc = terms[0];
        for (std::size_t i = 1; i < terms.size(); ++i) acc = tape.add(acc, terms[i]);
        return tape.scale(acc, 1.0 / static_cast<double>(terms.size()));
    };

    DocLoss out;
    out.re = mean_of(re_terms);
    out.er_pairs = er_terms.size();
    if (!er_terms.empty()) {
        out.er = mean_of(er_terms);
        out.total = combine_losses(tape, out.re, *out.er, opts.lambda);
    } else {
        out.total = out.re;
    }
    return out;
}

namespace {

struct PreparedDoc {
    const Document* doc = nullptr;
    TokenizedDocument tok;
};

std::vector<Prediction> predict_with(const num::ParamSet& params, const Vocabulary& vocab,
                                     const ModelConfig& cfg, const Corpus& corpus,
                                     double evi_threshold);

} // namespace

TrainResult train(const Corpus& train_corpus, const Corpus* dev_corpus,
                  const RelationSchema& schema, const ModelConfig& mcfg, const TrainConfig& cfg,
                  const Model* init, const SilverEvidenceStore* silver,
                  std::ostream* log_stream) {
    cfg.validate();
    mcfg.validate();
    if (cfg.er_supervision == ErSupervision::silver && silver == nullptr)
        raise(ErrorKind::contract, "er_supervision=silver requires a silver evidence store");

    const std::string schema_hash = to_hex(schema.hash());
    Model model = init ? *init
                       : Model::fresh(mcfg,
                                      Vocabulary::build(train_corpus, mcfg.encoder.vocab_size),
                                      schema_hash, cfg.seed);
    if (init && init->schema_hash != schema_hash)
        raise(ErrorKind::state, "init checkpoint was trained against a different schema");

    // tokenize once; documents over the max length are dropped with a count
    std::vector<PreparedDoc> docs;
    std::size_t skipped = 0;
    for (const Document& d : train_corpus.docs) {
        PreparedDoc p;
        p.doc = &d;
        p.tok = tokenize_with_markers(d, model.vocab);
        if (p.tok.token_count() > model.cfg.encoder.max_len || d.entities.size() < 2) {
            ++skipped;
            continue;
        }
        docs.push_back(std::move(p));
    }

    if (cfg.er_supervision == ErSupervision::silver) {
        for (const PreparedDoc& p : docs)
            if (!silver->has_doc(p.doc->doc_id))
                raise(ErrorKind::state,
                      "silver store does not cover document " + p.doc->doc_id);
    }

    const std::size_t steps_per_epoch = docs.empty() ? 0 : (docs.size() + cfg.batch_size - 1) / cfg.batch_size;
    const std::size_t total_steps = steps_per_epoch * cfg.epochs;

    num::AdamWConfig ocfg;
    ocfg.lr_encoder = cfg.lr_encoder;
    ocfg.lr_classifier = cfg.lr_classifier;
    ocfg.weight_decay = cfg.weight_decay;
    ocfg.clip_norm = cfg.grad_clip;
    ocfg.warmup_steps =
        static_cast<std::size_t>(std::llround(cfg.warmup_fraction * static_cast<double>(total_steps)));
    num::AdamW optimizer(model.params, ocfg);

    DocLossOptions opts;
    opts.re_loss = cfg.re_loss;
    opts.er_supervision = cfg.er_supervision;
    opts.lambda = cfg.lambda;
    opts.silver = silver;

    // decoupled from the init stream so continuing from a checkpoint shuffles
    // the same way a fresh run would
    Rng shuffle_rng(cfg.seed * 0x9e3779b97f4a7c15ull + 1);

    TrainResult result;
    num::ParamSet best_params = model.params;
    double best_dev_f1 = -1.0;
    std::size_t best_epoch = 0;

    std::vector<std::size_t> order(docs.size());
    std::iota(order.begin(), order.end(), 0);

    num::GradAccum grads(model.params);
    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        double sum_re = 0.0, sum_er = 0.0, sum_total = 0.0;
        std::size_t er_docs = 0;

        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
            grads.reset();
            for (std::size_t i = start; i < stop; ++i) {
                const PreparedDoc& p = docs[order[i]];
                Tape tape;
                num::ParamLeaves leaves = make_leaves(tape, model.params);
                DocLoss loss = build_doc_loss(tape, leaves, *p.doc, p.tok, model.cfg, opts);
                tape.backward(loss.total);
                grads.accumulate(tape, leaves);
                sum_re += tape.value(loss.re).v[0];
                sum_total += tape.value(loss.total).v[0];
                if (loss.er) {
                    sum_er += tape.value(*loss.er).v[0];
                    ++er_docs;
                }
            }
            grads.scale(1.0 / static_cast<double>(stop - start));
            optimizer.step(model.params, grads);
        }

        EpochLog log;
        log.epoch = epoch;
        log.loss_re = docs.empty() ? 0.0 : sum_re / static_cast<double>(docs.size());
        log.loss_er = er_docs == 0 ? 0.0 : sum_er / static_cast<double>(er_docs);
        log.loss_total = docs.empty() ? 0.0 : sum_total / static_cast<double>(docs.size());

        if (dev_corpus) {
            auto preds = predict_with(model.params, model.vocab, model.cfg, *dev_corpus,
                                      cfg.evi_threshold);
            EvalReport rep = evaluate(preds, *dev_corpus);
            log.dev_re_f1 = rep.re.f1;
            log.dev_evi_f1 = rep.evi.f1;
            if (rep.re.f1 > best_dev_f1) {
                best_dev_f1 = rep.re.f1;
                best_params = model.params;
                best_epoch = epoch;
            }
        }
        if (log_stream) {
            (*log_stream) << "epoch " << epoch << " L_RE " << log.loss_re << " L_ER "
                          << log.loss_er << " L " << log.loss_total;
            if (dev_corpus)
                (*log_stream) << " dev_re_f1 " << log.dev_re_f1 << " dev_evi_f1 "
                              << log.dev_evi_f1;
            (*log_stream) << "\n";
        }
        result.log.push_back(log);
    }

    if (cfg.select_best_dev && dev_corpus && best_dev_f1 >= 0.0) {
        model.params = std::move(best_params);
        result.selected_epoch = best_epoch;
    } else {
        result.selected_epoch = cfg.epochs;
    }
    result.model = std::move(model);
    result.skipped_docs = skipped;
    return result;
}

namespace {

std::vector<Prediction> predict_with(const num::ParamSet& params, const Vocabulary& vocab,
                                     const ModelConfig& cfg, const Corpus& corpus,
                                     double evi_threshold) {
    std::vector<Prediction> out;
    for (const Document& doc : corpus.docs) {
        TokenizedDocument tok = tokenize_with_markers(doc, vocab);
        if (tok.token_count() > cfg.encoder.max_len || doc.entities.size() < 2) continue;

        Tape tape;
        num::ParamLeaves leaves = make_leaves(tape, params);
        DocGraph graph = build_doc_graph(tape, leaves, tok, cfg, /*with_scores=*/true);
        for (const PairGraph& pair : graph.pairs) {
            const num::Tensor& y = tape.value(pair.scores);
            const double th = y.v[kThIndex];
            std::set<int> evidence;
            const num::Tensor& p = tape.value(pair.p);
            for (std::size_t i = 0; i < p.cols(); ++i)
                if (p.v[i] > evi_threshold) evidence.insert(static_cast<int>(i));
            for (std::size_t r = 1; r < y.cols(); ++r) {
                if (y.v[r] > th) {
                    Prediction pr;
                    pr.doc_id = doc.doc_id;
                    pr.subject = static_cast<int>(pair.subject);
                    pr.object = static_cast<int>(pair.object);
                    pr.relation = static_cast<int>(r);
                    pr.score = y.v[r] - th;
                    pr.evidence = evidence;
                    out.push_back(std::move(pr));
                }
            }
        }
    }
    return out;
}

} // namespace

std::vector<Prediction> predict(const Model& model, const Corpus& corpus, double evi_threshold) {
    if (evi_threshold <= 0.0 || evi_threshold >= 1.0)
        raise(ErrorKind::config, "evidence threshold must lie in (0,1)");
    return predict_with(model.params, model.vocab, model.cfg, corpus, evi_threshold);
}

SilverEvidenceStore distill(const Model& teacher, const Corpus& distant) {
    SilverEvidenceStore store;
    for (const Document& doc : distant.docs) {
        TokenizedDocument tok = tokenize_with_markers(doc, teacher.vocab);
        if (tok.token_count() > teacher.cfg.encoder.max_len) {
            store.mark_skipped(doc.doc_id);
            continue;
        }
        if (doc.entities.size() < 2) continue;
        Tape tape;
        num::ParamLeaves leaves = make_leaves(tape, teacher.params);
        DocGraph graph = build_doc_graph(tape, leaves, tok, teacher.cfg, /*with_scores=*/false);
        for (const PairGraph& pair : graph.pairs) {
            const num::Tensor& q = tape.value(pair.q);
            store.put(doc.doc_id, static_cast<int>(pair.subject),
                      static_cast<int>(pair.object), q.v);
        }
    }
    return store;
}

std::string inspect_attention(const Model& model, const Corpus& corpus,
                              const std::string& doc_id, int subject, int object,
                              double evi_threshold) {
    const Document* doc = nullptr;
    for (const Document& d : corpus.docs)
        if (d.doc_id == doc_id) doc = &d;
    if (!doc) raise(ErrorKind::validation, "unknown doc_id: " + doc_id);
    const int n_ent = static_cast<int>(doc->entities.size());
    if (subject < 0 || subject >= n_ent || object < 0 || object >= n_ent || subject == object)
        raise(ErrorKind::validation, "invalid entity pair for doc " + doc_id);

    TokenizedDocument tok = tokenize_with_markers(*doc, model.vocab);
    if (tok.token_count() > model.cfg.encoder.max_len)
        raise(ErrorKind::validation, "document exceeds encoder max length");

    Tape tape;
    num::ParamLeaves leaves = make_leaves(tape, model.params);
    EncoderOutput enc = encode(tape, leaves, tok, model.cfg.encoder);
    PairContext ctx = token_importance(tape, enc, tok, static_cast<std::size_t>(subject),
                                       static_cast<std::size_t>(object));
    Var p = sentence_importance(tape, ctx.q, tok);

    const num::Tensor& qv = tape.value(ctx.q);
    const num::Tensor& pv = tape.value(p);

    std::string out;
    char buf[256];
    std::snprintf(buf, sizeof(buf), "doc %s pair (s=%d, o=%d)\n", doc_id.c_str(), subject,
                  object);
    out += buf;
    for (std::size_t i = 0; i < tok.sentence_spans.size(); ++i) {
        const auto& [lo, hi] = tok.sentence_spans[i];
        std::snprintf(buf, sizeof(buf), "sentence %zu  p=%.6f%s\n", i, pv.v[i],
                      pv.v[i] > evi_threshold ? "  [evidence]" : "");
        out += buf;
        for (int t = lo; t <= hi; ++t) {
            std::snprintf(buf, sizeof(buf), "  [%3d] %-16s q=%.6f\n", t,
                          model.vocab.word(tok.ids[static_cast<std::size_t>(t)]).c_str(),
                          qv.v[static_cast<std::size_t>(t)]);
            out += buf;
        }
    }
    return out;
}

} // namespace evirex
