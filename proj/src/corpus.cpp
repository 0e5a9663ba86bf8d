#include "evirex/corpus.hpp"

#include <algorithm>
#include <set>

#include <json.hpp>

#include "evirex/error.hpp"

namespace evirex {

using nlohmann::json;

RelationSchema RelationSchema::from_names(std::vector<std::string> names_with_epsilon) {
    if (names_with_epsilon.empty())
        raise(ErrorKind::config, "relation schema needs at least the no-relation entry");
    std::set<std::string> seen;
    for (const auto& n : names_with_epsilon)
        if (!seen.insert(n).second)
            raise(ErrorKind::config, "duplicate relation name: " + n);
    RelationSchema s;
    s.names_ = std::move(names_with_epsilon);
    return s;
}

RelationSchema RelationSchema::parse(const std::string& text) {
    std::vector<std::string> names = split_lines(text);
    while (!names.empty() && names.back().empty()) names.pop_back();
    return from_names(std::move(names));
}

std::string RelationSchema::serialize() const {
    std::string out;
    for (const auto& n : names_) {
        out += n;
        out += '\n';
    }
    return out;
}

const std::string& RelationSchema::name(int id) const {
    if (id < 0 || id >= static_cast<int>(names_.size()))
        raise(ErrorKind::config, "relation id out of range: " + std::to_string(id));
    return names_[static_cast<std::size_t>(id)];
}

int RelationSchema::id_of(const std::string& name) const {
    for (std::size_t i = 0; i < names_.size(); ++i)
        if (names_[i] == name) return static_cast<int>(i);
    raise(ErrorKind::validation, "unknown relation name: " + name);
}

void Document::validate(const RelationSchema& schema) const {
    auto fail = [this](const std::string& what) {
        raise(ErrorKind::validation, "document '" + doc_id + "': " + what);
    };
    const int n_sent = static_cast<int>(sentences.size());
    for (std::size_t e = 0; e < entities.size(); ++e) {
        if (entities[e].mentions.empty())
            fail("entity " + std::to_string(e) + " has no mentions");
        for (const Mention& m : entities[e].mentions) {
            if (m.sent_id < 0 || m.sent_id >= n_sent)
                fail("mention sent_id " + std::to_string(m.sent_id) + " out of range");
            const int len = static_cast<int>(sentences[static_cast<std::size_t>(m.sent_id)].size());
            if (m.start >= m.end)
                fail("mention span empty or inverted (" + std::to_string(m.start) + "," +
                     std::to_string(m.end) + ")");
            if (m.start < 0 || m.end > len)
                fail("mention span (" + std::to_string(m.start) + "," + std::to_string(m.end) +
                     ") outside sentence " + std::to_string(m.sent_id));
        }
    }
    const int n_ent = static_cast<int>(entities.size());
    for (const RelationInstance& r : labels) {
        if (r.head < 0 || r.head >= n_ent || r.tail < 0 || r.tail >= n_ent)
            fail("label entity index out of range");
        if (r.head == r.tail) fail("label head equals tail");
        if (r.relation <= schema.epsilon_id() || r.relation > static_cast<int>(schema.num_real()))
            fail("label relation id out of range: " + std::to_string(r.relation));
        for (int s : r.evidence)
            if (s < 0 || s >= n_sent) fail("evidence sentence index out of range");
    }
}

namespace {

Document parse_document(const json& j, std::size_t index, const RelationSchema& schema) {
    auto fail = [index](const std::string& what) {
        raise(ErrorKind::parse, "document " + std::to_string(index) + ": " + what);
    };
    if (!j.is_object()) fail("expected an object");
    Document d;
    d.doc_id = j.value("title", "doc_" + std::to_string(index));

    if (!j.contains("sents") || !j["sents"].is_array()) fail("missing 'sents' array");
    for (const auto& sent : j["sents"]) {
        if (!sent.is_array()) fail("'sents' entries must be token arrays");
        std::vector<std::string> toks;
        for (const auto& t : sent) toks.push_back(t.get<std::string>());
        d.sentences.push_back(std::move(toks));
    }

    if (!j.contains("vertexSet") || !j["vertexSet"].is_array()) fail("missing 'vertexSet' array");
    for (const auto& vs : j["vertexSet"]) {
        if (!vs.is_array()) fail("'vertexSet' entries must be mention arrays");
        Entity e;
        for (const auto& m : vs) {
            Mention men;
            men.sent_id = m.at("sent_id").get<int>();
            const auto& pos = m.at("pos");
            if (!pos.is_array() || pos.size() != 2) fail("mention 'pos' must be [start, end]");
            men.start = pos[0].get<int>();
            men.end = pos[1].get<int>();
            men.surface = m.value("name", "");
            if (e.type_tag.empty()) e.type_tag = m.value("type", "");
            e.mentions.push_back(std::move(men));
        }
        d.entities.push_back(std::move(e));
    }

    if (j.contains("labels")) {
        if (!j["labels"].is_array()) fail("'labels' must be an array");
        for (const auto& l : j["labels"]) {
            RelationInstance r;
            r.head = l.at("h").get<int>();
            r.tail = l.at("t").get<int>();
            r.relation = schema.id_of(l.at("r").get<std::string>());
            if (l.contains("evidence"))
                for (const auto& ev : l["evidence"]) r.evidence.insert(ev.get<int>());
            d.labels.push_back(std::move(r));
        }
    }
    return d;
}

} // namespace

Corpus parse_docred(const std::string& json_text, const RelationSchema& schema) {
    json root;
    try {
        root = json::parse(json_text);
    } catch (const json::parse_error& e) {
        raise(ErrorKind::parse, std::string("corpus JSON malformed: ") + e.what());
    }
    if (!root.is_array()) raise(ErrorKind::parse, "corpus JSON must be an array of documents");

    Corpus corpus;
    for (std::size_t i = 0; i < root.size(); ++i) {
        Document d;
        try {
            d = parse_document(root[i], i, schema);
        } catch (const json::exception& e) {
            raise(ErrorKind::parse, "document " + std::to_string(i) + ": " + e.what());
        }
        d.validate(schema);
        corpus.docs.push_back(std::move(d));
    }
    return corpus;
}

std::string serialize_docred(const Corpus& corpus, const RelationSchema& schema) {
    json root = json::array();
    for (const Document& d : corpus.docs) {
        json jd;
        jd["title"] = d.doc_id;
        json sents = json::array();
        for (const auto& s : d.sentences) sents.push_back(s);
        jd["sents"] = std::move(sents);
        json vs = json::array();
        for (const Entity& e : d.entities) {
            json mentions = json::array();
            for (const Mention& m : e.mentions) {
                json jm;
                jm["sent_id"] = m.sent_id;
                jm["pos"] = json::array({m.start, m.end});
                jm["name"] = m.surface;
                jm["type"] = e.type_tag;
                mentions.push_back(std::move(jm));
            }
            vs.push_back(std::move(mentions));
        }
        jd["vertexSet"] = std::move(vs);
        json labels = json::array();
        for (const RelationInstance& r : d.labels) {
            json jl;
            jl["h"] = r.head;
            jl["t"] = r.tail;
            jl["r"] = schema.name(r.relation);
            jl["evidence"] = json(r.evidence);
            labels.push_back(std::move(jl));
        }
        jd["labels"] = std::move(labels);
        root.push_back(std::move(jd));
    }
    return root.dump(1);
}

} // namespace evirex
