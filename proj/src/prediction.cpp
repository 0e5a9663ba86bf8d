#include "evirex/prediction.hpp"

#include <json.hpp>

#include "evirex/error.hpp"

namespace evirex {

using nlohmann::json;

std::string serialize_predictions(const std::vector<Prediction>& preds,
                                  const RelationSchema& schema) {
    json root = json::array();
    for (const Prediction& p : preds) {
        json j;
        j["title"] = p.doc_id;
        j["h_idx"] = p.subject;
        j["t_idx"] = p.object;
        j["r"] = schema.name(p.relation);
        j["score"] = p.score;
        j["evidence"] = json(p.evidence);
        root.push_back(std::move(j));
    }
    return root.dump(1);
}

std::vector<Prediction> parse_predictions(const std::string& json_text,
                                          const RelationSchema& schema) {
    json root;
    try {
        root = json::parse(json_text);
    } catch (const json::parse_error& e) {
        raise(ErrorKind::parse, std::string("predictions JSON malformed: ") + e.what());
    }
    if (!root.is_array()) raise(ErrorKind::parse, "predictions JSON must be an array");
    std::vector<Prediction> out;
    for (std::size_t i = 0; i < root.size(); ++i) {
        const auto& j = root[i];
        try {
            Prediction p;
            p.doc_id = j.at("title").get<std::string>();
            p.subject = j.at("h_idx").get<int>();
            p.object = j.at("t_idx").get<int>();
            p.relation = schema.id_of(j.at("r").get<std::string>());
            p.score = j.value("score", 0.0);
            if (j.contains("evidence"))
                for (const auto& ev : j["evidence"]) p.evidence.insert(ev.get<int>());
            out.push_back(std::move(p));
        } catch (const json::exception& e) {
            raise(ErrorKind::parse, "prediction " + std::to_string(i) + ": " + e.what());
        }
    }
    return out;
}

} // namespace evirex
