#include <algorithm>
#include <set>

#include "evirex/corpus.hpp"
#include "evirex/error.hpp"

namespace evirex {

namespace {

struct MarkerEvent {
    int entity = 0;
    int mention = 0;
};

} // namespace

TokenizedDocument tokenize_with_markers(const Document& doc, const Vocabulary& vocab,
                                        bool add_bos_eos) {
    TokenizedDocument out;
    out.mention_start_marker_pos.resize(doc.entities.size());

    int pos = 0;
    if (add_bos_eos) {
        out.ids.push_back(Vocabulary::kBos);
        out.bos_pos = pos++;
    }

    for (int sent = 0; sent < static_cast<int>(doc.sentences.size()); ++sent) {
        const auto& tokens = doc.sentences[static_cast<std::size_t>(sent)];
        const int len = static_cast<int>(tokens.size());

        // Marker events per token boundary. At a shared boundary closings are
        // emitted before openings; opening order ascends by entity index,
        // closing order descends, so spans sharing boundaries stay nested.
        std::vector<std::vector<MarkerEvent>> opens(static_cast<std::size_t>(len) + 1);
        std::vector<std::vector<MarkerEvent>> closes(static_cast<std::size_t>(len) + 1);
        for (int e = 0; e < static_cast<int>(doc.entities.size()); ++e) {
            const auto& mentions = doc.entities[static_cast<std::size_t>(e)].mentions;
            for (int m = 0; m < static_cast<int>(mentions.size()); ++m) {
                const Mention& men = mentions[static_cast<std::size_t>(m)];
                if (men.sent_id != sent) continue;
                opens[static_cast<std::size_t>(men.start)].push_back({e, m});
                closes[static_cast<std::size_t>(men.end)].push_back({e, m});
            }
        }
        const int span_start = pos;
        for (int b = 0; b <= len; ++b) {
            auto& cl = closes[static_cast<std::size_t>(b)];
            std::sort(cl.begin(), cl.end(), [](const MarkerEvent& a, const MarkerEvent& b2) {
                if (a.entity != b2.entity) return a.entity > b2.entity;
                return a.mention > b2.mention;
            });
            for ([[maybe_unused]] const MarkerEvent& ev : cl) {
                out.marker_positions.push_back(pos);
                out.ids.push_back(Vocabulary::kMarker);
                ++pos;
            }
            auto& op = opens[static_cast<std::size_t>(b)];
            std::sort(op.begin(), op.end(), [](const MarkerEvent& a, const MarkerEvent& b2) {
                if (a.entity != b2.entity) return a.entity < b2.entity;
                return a.mention < b2.mention;
            });
            for (const MarkerEvent& ev : op) {
                out.mention_start_marker_pos[static_cast<std::size_t>(ev.entity)].push_back(pos);
                out.marker_positions.push_back(pos);
                out.ids.push_back(Vocabulary::kMarker);
                ++pos;
            }
            if (b < len) {
                out.ids.push_back(vocab.id(tokens[static_cast<std::size_t>(b)]));
                ++pos;
            }
        }
        out.sentence_spans.emplace_back(span_start, pos - 1);
    }

    if (add_bos_eos) {
        out.eos_pos = pos;
        out.ids.push_back(Vocabulary::kEos);
        ++pos;
    }
    return out;
}

std::vector<std::vector<std::string>> reconstruct_sentences(const TokenizedDocument& tok,
                                                            const Vocabulary& vocab) {
    std::set<int> markers(tok.marker_positions.begin(), tok.marker_positions.end());
    std::vector<std::vector<std::string>> sentences;
    for (const auto& [lo, hi] : tok.sentence_spans) {
        std::vector<std::string> sent;
        for (int p = lo; p <= hi; ++p) {
            if (markers.count(p)) continue;
            if (tok.bos_pos && *tok.bos_pos == p) continue;
            if (tok.eos_pos && *tok.eos_pos == p) continue;
            sent.push_back(vocab.word(tok.ids[static_cast<std::size_t>(p)]));
        }
        sentences.push_back(std::move(sent));
    }
    return sentences;
}

} // namespace evirex
