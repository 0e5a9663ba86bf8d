#include <algorithm>
#include <numeric>

#include "evirex/corpus.hpp"
#include "evirex/error.hpp"

namespace evirex {

namespace {

struct TokenInventory {
    std::vector<std::string> keywords; // one per real relation
    std::vector<std::string> entity_names;
    std::vector<std::string> fillers;
};

TokenInventory make_inventory(const SynthConfig& cfg) {
    TokenInventory inv;
    for (std::size_t r = 0; r < cfg.num_relations; ++r)
        inv.keywords.push_back("kw" + std::to_string(r + 1));
    for (std::size_t e = 0; e < cfg.entity_pool; ++e)
        inv.entity_names.push_back("ent" + std::to_string(e + 1));
    const std::size_t used = Vocabulary::kReserved + cfg.num_relations + cfg.entity_pool;
    if (cfg.vocab_size < used + 5)
        raise(ErrorKind::config, "synthetic vocab too small for keywords, entities and fillers");
    for (std::size_t w = 0; w < cfg.vocab_size - used; ++w)
        inv.fillers.push_back("w" + std::to_string(w + 1));
    return inv;
}

enum class SentKind { evidence, mention, distractor };

struct SentSpec {
    SentKind kind = SentKind::distractor;
    int fact = -1;                // evidence sentences
    std::vector<int> entities;    // mention sentences (1..2 local entity ids)
};

struct Fact {
    int head = 0;
    int tail = 0;
    int relation = 1; // schema id
    int n_evidence = 1;
};

void check_feasible(const SynthConfig& cfg) {
    if (cfg.entities_per_doc < 2) raise(ErrorKind::config, "need at least two entities per doc");
    if (cfg.tokens_per_sentence < 4)
        raise(ErrorKind::config, "need at least four tokens per sentence");
    if (cfg.entity_pool < cfg.entities_per_doc)
        raise(ErrorKind::config, "entity pool smaller than entities per doc");
    if (cfg.num_relations < 1) raise(ErrorKind::config, "need at least one relation");
    const std::size_t pairs = cfg.entities_per_doc * (cfg.entities_per_doc - 1) / 2;
    if (cfg.facts_per_doc > pairs)
        raise(ErrorKind::config, "more facts per doc than unordered entity pairs");
    const std::size_t mention_sents = (cfg.entities_per_doc - 2 + 1) / 2;
    if (cfg.facts_per_doc + mention_sents > cfg.sentences_per_doc)
        raise(ErrorKind::config, "more entities/facts than sentence capacity");
}

Document make_document(const SynthConfig& cfg, const TokenInventory& inv, const std::string& id,
                       Rng& rng) {
    auto rand_int = [&rng](std::size_t n) {
        return static_cast<int>(std::uniform_int_distribution<std::size_t>(0, n - 1)(rng));
    };
    auto coin = [&rng](double p) {
        return std::uniform_real_distribution<double>(0.0, 1.0)(rng) < p;
    };

    Document doc;
    doc.doc_id = id;

    // entity surfaces: distinct draws from the shared pool
    std::vector<std::size_t> pool(inv.entity_names.size());
    std::iota(pool.begin(), pool.end(), 0);
    std::shuffle(pool.begin(), pool.end(), rng);
    std::vector<std::string> surfaces;
    for (std::size_t e = 0; e < cfg.entities_per_doc; ++e) {
        surfaces.push_back(inv.entity_names[pool[e]]);
        Entity ent;
        ent.type_tag = "SYN";
        doc.entities.push_back(ent);
    }

    // facts: distinct unordered pairs, random orientation and relation
    std::vector<std::pair<int, int>> all_pairs;
    for (int i = 0; i < static_cast<int>(cfg.entities_per_doc); ++i)
        for (int j = i + 1; j < static_cast<int>(cfg.entities_per_doc); ++j)
            all_pairs.emplace_back(i, j);
    std::shuffle(all_pairs.begin(), all_pairs.end(), rng);

    std::vector<Fact> facts;
    for (std::size_t f = 0; f < cfg.facts_per_doc; ++f) {
        Fact fact;
        auto [a, b] = all_pairs[f];
        if (coin(0.5)) std::swap(a, b);
        fact.head = a;
        fact.tail = b;
        fact.relation = 1 + rand_int(cfg.num_relations);
        fact.n_evidence = 1;
        facts.push_back(fact);
    }

    // sentence plan: evidence first, then mention sentences for uncovered
    // entities, distractors fill the rest
    std::vector<bool> covered(cfg.entities_per_doc, false);
    for (const Fact& f : facts) {
        covered[static_cast<std::size_t>(f.head)] = true;
        covered[static_cast<std::size_t>(f.tail)] = true;
    }
    std::vector<int> uncovered;
    for (std::size_t e = 0; e < cfg.entities_per_doc; ++e)
        if (!covered[e]) uncovered.push_back(static_cast<int>(e));

    std::vector<SentSpec> specs;
    for (std::size_t f = 0; f < facts.size(); ++f)
        specs.push_back({SentKind::evidence, static_cast<int>(f), {}});
    for (std::size_t u = 0; u < uncovered.size(); u += 2) {
        SentSpec s;
        s.kind = SentKind::mention;
        s.entities.push_back(uncovered[u]);
        if (u + 1 < uncovered.size()) s.entities.push_back(uncovered[u + 1]);
        specs.push_back(std::move(s));
    }
    // second evidence sentence for some facts while room remains
    for (std::size_t f = 0; f < facts.size() && specs.size() < cfg.sentences_per_doc; ++f) {
        if (coin(cfg.two_sentence_evidence)) {
            facts[f].n_evidence = 2;
            specs.push_back({SentKind::evidence, static_cast<int>(f), {}});
        }
    }
    while (specs.size() < cfg.sentences_per_doc) {
        SentSpec s;
        s.kind = SentKind::distractor;
        specs.push_back(s);
    }
    if (specs.size() > cfg.sentences_per_doc)
        raise(ErrorKind::config, "sentence plan exceeds sentences per doc");
    std::shuffle(specs.begin(), specs.end(), rng);

    std::vector<std::set<int>> fact_evidence(facts.size());

    const std::size_t n_tok = cfg.tokens_per_sentence;
    for (std::size_t sent_idx = 0; sent_idx < specs.size(); ++sent_idx) {
        const SentSpec& spec = specs[sent_idx];
        std::vector<std::string> toks(n_tok);
        for (auto& t : toks) t = inv.fillers[static_cast<std::size_t>(rand_int(inv.fillers.size()))];

        auto add_mention = [&](int entity, int pos) {
            toks[static_cast<std::size_t>(pos)] = surfaces[static_cast<std::size_t>(entity)];
            Mention m;
            m.sent_id = static_cast<int>(sent_idx);
            m.start = pos;
            m.end = pos + 1;
            m.surface = surfaces[static_cast<std::size_t>(entity)];
            doc.entities[static_cast<std::size_t>(entity)].mentions.push_back(m);
        };

        switch (spec.kind) {
        case SentKind::evidence: {
            const Fact& f = facts[static_cast<std::size_t>(spec.fact)];
            // head–keyword–tail adjacency carries both the relation type and
            // its direction
            const int p = rand_int(n_tok - 2);
            add_mention(f.head, p);
            toks[static_cast<std::size_t>(p + 1)] =
                inv.keywords[static_cast<std::size_t>(f.relation - 1)];
            add_mention(f.tail, p + 2);
            fact_evidence[static_cast<std::size_t>(spec.fact)].insert(static_cast<int>(sent_idx));
            break;
        }
        case SentKind::mention: {
            std::vector<int> positions;
            while (positions.size() < spec.entities.size() + 1) {
                int p = rand_int(n_tok);
                if (std::find(positions.begin(), positions.end(), p) == positions.end())
                    positions.push_back(p);
            }
            for (std::size_t k = 0; k < spec.entities.size(); ++k)
                add_mention(spec.entities[k], positions[k]);
            // a lone entity may sit next to a keyword; that never completes a
            // triple pattern
            if (spec.entities.size() == 1 && coin(0.5))
                toks[static_cast<std::size_t>(positions.back())] =
                    inv.keywords[static_cast<std::size_t>(rand_int(inv.keywords.size()))];
            break;
        }
        case SentKind::distractor: {
            const int kind = rand_int(3);
            if (kind == 0) break; // fillers only
            std::vector<int> positions;
            while (positions.size() < 2) {
                int p = rand_int(n_tok);
                if (std::find(positions.begin(), positions.end(), p) == positions.end())
                    positions.push_back(p);
            }
            if (kind == 1) {
                add_mention(rand_int(cfg.entities_per_doc), positions[0]);
                toks[static_cast<std::size_t>(positions[1])] =
                    inv.keywords[static_cast<std::size_t>(rand_int(inv.keywords.size()))];
            } else {
                const int a = rand_int(cfg.entities_per_doc);
                int b = rand_int(cfg.entities_per_doc);
                while (b == a) b = rand_int(cfg.entities_per_doc);
                add_mention(a, positions[0]);
                add_mention(b, positions[1]);
            }
            break;
        }
        }
        doc.sentences.push_back(std::move(toks));
    }

    for (std::size_t f = 0; f < facts.size(); ++f) {
        RelationInstance r;
        r.head = facts[f].head;
        r.tail = facts[f].tail;
        r.relation = facts[f].relation;
        r.evidence = fact_evidence[f];
        doc.labels.push_back(std::move(r));
    }
    return doc;
}

} // namespace

SynthResult generate_synthetic(const SynthConfig& cfg, std::uint64_t seed) {
    check_feasible(cfg);
    const TokenInventory inv = make_inventory(cfg);

    std::vector<std::string> names{"NA"};
    for (std::size_t r = 0; r < cfg.num_relations; ++r) names.push_back("rel" + std::to_string(r + 1));

    SynthResult out;
    out.schema = RelationSchema::from_names(std::move(names));

    Rng rng(seed);
    auto fill = [&](Corpus& corpus, const char* prefix, std::size_t n) {
        for (std::size_t i = 0; i < n; ++i) {
            Document d =
                make_document(cfg, inv, std::string(prefix) + "_" + std::to_string(i), rng);
            d.validate(out.schema);
            corpus.docs.push_back(std::move(d));
        }
    };
    fill(out.train, "train", cfg.train_docs);
    fill(out.dev, "dev", cfg.dev_docs);
    fill(out.distant, "distant", cfg.distant_docs);
    for (Document& d : out.distant.docs)
        for (RelationInstance& r : d.labels) r.evidence.clear();
    return out;
}

} // namespace evirex
