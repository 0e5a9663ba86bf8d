#include <algorithm>

#include "evirex/corpus.hpp"
#include "evirex/error.hpp"

namespace evirex {

namespace {
const std::string kReservedNames[Vocabulary::kReserved] = {"<unk>", "<m>", "<bos>", "<eos>"};
}

Vocabulary Vocabulary::build(const Corpus& corpus, std::size_t max_size) {
    return build(std::vector<const Corpus*>{&corpus}, max_size);
}

Vocabulary Vocabulary::build(const std::vector<const Corpus*>& corpora, std::size_t max_size) {
    if (max_size <= kReserved) raise(ErrorKind::config, "vocabulary size too small");
    std::map<std::string, std::size_t> counts;
    for (const Corpus* c : corpora)
        for (const Document& d : c->docs)
            for (const auto& sent : d.sentences)
                for (const auto& tok : sent) ++counts[tok];

    std::vector<std::pair<std::string, std::size_t>> items(counts.begin(), counts.end());
    std::sort(items.begin(), items.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    if (items.size() > max_size - kReserved) items.resize(max_size - kReserved);

    std::vector<std::string> words;
    words.reserve(items.size());
    for (auto& it : items) words.push_back(std::move(it.first));
    return from_words(std::move(words));
}

Vocabulary Vocabulary::from_words(std::vector<std::string> words) {
    Vocabulary v;
    v.words_ = std::move(words);
    for (std::size_t i = 0; i < v.words_.size(); ++i) {
        if (!v.index_.emplace(v.words_[i], static_cast<int>(i) + kReserved).second)
            raise(ErrorKind::config, "duplicate vocabulary word: " + v.words_[i]);
    }
    return v;
}

int Vocabulary::id(const std::string& word) const {
    auto it = index_.find(word);
    return it == index_.end() ? kUnk : it->second;
}

const std::string& Vocabulary::word(int id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= size())
        raise(ErrorKind::config, "token id out of range: " + std::to_string(id));
    if (id < kReserved) return kReservedNames[id];
    return words_[static_cast<std::size_t>(id - kReserved)];
}

} // namespace evirex
