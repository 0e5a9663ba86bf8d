#include "evirex/evidence.hpp"

#include <cmath>
#include <cstring>

#include "evirex/error.hpp"

namespace evirex {

using num::Tensor;
using num::Var;

num::Var sentence_importance(num::Tape& tape, num::Var q, const TokenizedDocument& tok) {
    const std::size_t n_tokens = tape.value(q).cols();
    if (n_tokens != tok.token_count())
        raise(ErrorKind::dimension, "sentence_importance: q length does not match document");
    const std::size_t n_sent = tok.sentence_spans.size();
    Tensor spans(n_sent, n_tokens, 0.0);
    for (std::size_t i = 0; i < n_sent; ++i) {
        const auto& [lo, hi] = tok.sentence_spans[i];
        for (int t = lo; t <= hi; ++t) spans.at(i, static_cast<std::size_t>(t)) = 1.0;
    }
    return tape.matmul(q, tape.constant(std::move(spans)), false, true);
}

std::optional<std::vector<double>>
gold_evidence_distribution(const std::vector<const RelationInstance*>& pair_labels,
                           std::size_t n_sentences) {
    if (pair_labels.empty()) return std::nullopt;
    std::vector<double> marginal(n_sentences, 0.0);
    double total = 0.0;
    for (const RelationInstance* r : pair_labels) {
        for (int s : r->evidence) {
            marginal[static_cast<std::size_t>(s)] += 1.0;
            total += 1.0;
        }
    }
    if (total == 0.0) return std::nullopt;
    for (double& x : marginal) x /= total;
    return marginal;
}

num::Var kl_to_target(num::Tape& tape, const std::vector<double>& target, num::Var predicted) {
    const Tensor& pred = tape.value(predicted);
    if (pred.rows() != 1 || pred.cols() != target.size())
        raise(ErrorKind::dimension, "kl_to_target: distribution length mismatch");
    double entropy_part = 0.0; // sum v log v, constant in the graph
    Tensor tv(1, target.size());
    for (std::size_t i = 0; i < target.size(); ++i) {
        tv.v[i] = target[i];
        if (target[i] > 0.0) entropy_part += target[i] * std::log(target[i]);
    }
    Var cross = tape.reduce_sum(
        tape.mul(tape.constant(std::move(tv)), tape.log_floor(predicted, kEpsLog)));
    return tape.add(tape.constant(Tensor::scalar(entropy_part)), tape.scale(cross, -1.0));
}

num::Var combine_losses(num::Tape& tape, num::Var re_loss, num::Var er_loss, double lambda) {
    if (lambda < 0.0) raise(ErrorKind::config, "lambda must be nonnegative");
    return tape.add(re_loss, tape.scale(er_loss, lambda));
}

namespace {

constexpr char kMagic[8] = {'E', 'V', 'X', 'S', 'T', 'O', 'R', 'E'};
constexpr std::uint32_t kVersion = 1;
constexpr std::uint8_t kPrecisionBits = 16;

template <typename T>
void put_le(std::string& out, T value) {
    char buf[sizeof(T)];
    std::memcpy(buf, &value, sizeof(T));
    out.append(buf, sizeof(T));
}

template <typename T>
T take_le(const std::string& in, std::size_t& off) {
    if (off + sizeof(T) > in.size())
        raise(ErrorKind::parse, "silver store: truncated file");
    T value;
    std::memcpy(&value, in.data() + off, sizeof(T));
    off += sizeof(T);
    return value;
}

void put_string(std::string& out, const std::string& s) {
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
    out.append(s);
}

std::string take_string(const std::string& in, std::size_t& off) {
    const auto n = take_le<std::uint32_t>(in, off);
    if (off + n > in.size()) raise(ErrorKind::parse, "silver store: truncated string");
    std::string s = in.substr(off, n);
    off += n;
    return s;
}

void renormalize(std::vector<double>& q) {
    double s = 0.0;
    for (double x : q) s += x;
    if (s <= 0.0) raise(ErrorKind::parse, "silver store: non-positive distribution mass");
    for (double& x : q) x /= s;
}

} // namespace

void SilverEvidenceStore::put(const std::string& doc_id, int subject, int object,
                              std::vector<double> q) {
    auto it = docs_.find(doc_id);
    if (it == docs_.end()) {
        it = docs_.emplace(doc_id, DocRecord{}).first;
        it->second.token_count = q.size();
        doc_order_.push_back(doc_id);
    } else if (it->second.token_count != q.size()) {
        raise(ErrorKind::state, "silver store: inconsistent token count within doc " + doc_id);
    }
    it->second.pairs[PairKey{subject, object}] = std::move(q);
}

bool SilverEvidenceStore::was_skipped(const std::string& doc_id) const {
    for (const auto& s : skipped_)
        if (s == doc_id) return true;
    return false;
}

const std::vector<double>& SilverEvidenceStore::get(const std::string& doc_id, int subject,
                                                    int object,
                                                    std::size_t expected_tokens) const {
    auto it = docs_.find(doc_id);
    if (it == docs_.end())
        raise(ErrorKind::state, "silver store: no record for doc " + doc_id);
    if (it->second.token_count != expected_tokens)
        raise(ErrorKind::state, "silver store: tokenization mismatch for doc " + doc_id +
                                    " (stored " + std::to_string(it->second.token_count) +
                                    ", document has " + std::to_string(expected_tokens) + ")");
    auto pit = it->second.pairs.find(PairKey{subject, object});
    if (pit == it->second.pairs.end())
        raise(ErrorKind::state, "silver store: missing pair (" + std::to_string(subject) + "," +
                                    std::to_string(object) + ") in doc " + doc_id);
    return pit->second;
}

std::size_t SilverEvidenceStore::pair_count(const std::string& doc_id) const {
    auto it = docs_.find(doc_id);
    return it == docs_.end() ? 0 : it->second.pairs.size();
}

std::string SilverEvidenceStore::serialize() const {
    std::string out;
    out.append(kMagic, sizeof(kMagic));
    put_le<std::uint32_t>(out, kVersion);
    put_le<std::uint8_t>(out, kPrecisionBits);
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(skipped_.size()));
    for (const auto& s : skipped_) put_string(out, s);
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(doc_order_.size()));
    for (const auto& doc_id : doc_order_) {
        const DocRecord& rec = docs_.at(doc_id);
        put_string(out, doc_id);
        put_le<std::uint32_t>(out, static_cast<std::uint32_t>(rec.token_count));
        put_le<std::uint32_t>(out, static_cast<std::uint32_t>(rec.pairs.size()));
        for (const auto& [key, q] : rec.pairs) {
            put_le<std::uint16_t>(out, static_cast<std::uint16_t>(key.subject));
            put_le<std::uint16_t>(out, static_cast<std::uint16_t>(key.object));
            for (double x : q) put_le<std::uint16_t>(out, float_to_half(static_cast<float>(x)));
        }
    }
    return out;
}

SilverEvidenceStore SilverEvidenceStore::deserialize(const std::string& bytes) {
    std::size_t off = 0;
    if (bytes.size() < sizeof(kMagic) || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0)
        raise(ErrorKind::parse, "silver store: bad magic");
    off = sizeof(kMagic);
    const auto version = take_le<std::uint32_t>(bytes, off);
    if (version != kVersion)
        raise(ErrorKind::parse, "silver store: unsupported version " + std::to_string(version));
    const auto precision = take_le<std::uint8_t>(bytes, off);
    if (precision != kPrecisionBits)
        raise(ErrorKind::parse, "silver store: unsupported precision tag");

    SilverEvidenceStore store;
    const auto n_skipped = take_le<std::uint32_t>(bytes, off);
    for (std::uint32_t i = 0; i < n_skipped; ++i) store.skipped_.push_back(take_string(bytes, off));
    const auto n_docs = take_le<std::uint32_t>(bytes, off);
    for (std::uint32_t d = 0; d < n_docs; ++d) {
        const std::string doc_id = take_string(bytes, off);
        const auto token_count = take_le<std::uint32_t>(bytes, off);
        const auto n_pairs = take_le<std::uint32_t>(bytes, off);
        for (std::uint32_t p = 0; p < n_pairs; ++p) {
            const int subject = take_le<std::uint16_t>(bytes, off);
            const int object = take_le<std::uint16_t>(bytes, off);
            std::vector<double> q(token_count);
            for (auto& x : q)
                x = static_cast<double>(half_to_float(take_le<std::uint16_t>(bytes, off)));
            renormalize(q);
            store.put(doc_id, subject, object, std::move(q));
        }
    }
    return store;
}

void SilverEvidenceStore::save(const std::string& path) const { write_file(path, serialize()); }

SilverEvidenceStore SilverEvidenceStore::load(const std::string& path) {
    return deserialize(read_file(path));
}

} // namespace evirex
