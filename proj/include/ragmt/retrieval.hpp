#pragma once

// Okapi BM25 over the Spanish side of a retrieval bank.
//
//   score(D, Q) = sum over distinct t in Q of
//       idf(t) * f(t,D) * (k1 + 1) / (f(t,D) + k1 * (1 - b + b * |D| / avgdl))
//   idf(t)      = ln(1 + (N - n_t + 0.5) / (n_t + 0.5))
//
// Ranking is by score descending, then pair id ascending. Documents with a
// zero score still fill the top-r quota.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <functional>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "ragmt/corpus.hpp"
#include "ragmt/error.hpp"
#include "ragmt/unicode.hpp"

namespace ragmt {

/// Case-folded maximal runs of letters, digits and combining marks.
inline std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> terms;
    std::string current;
    for (char32_t c : unicode::decode(text)) {
        if (unicode::is_word_char(c)) {
            unicode::append_utf8(current, unicode::fold_case(c));
        } else if (!current.empty()) {
            terms.push_back(std::move(current));
            current.clear();
        }
    }
    if (!current.empty()) terms.push_back(std::move(current));
    return terms;
}

/// Query terms with duplicates removed, in first-occurrence order.
inline std::vector<std::string> distinct_terms(std::span<const std::string> terms) {
    std::vector<std::string> out;
    std::unordered_set<std::string_view> seen;
    for (const std::string& term : terms) {
        if (seen.insert(term).second) out.push_back(term);
    }
    return out;
}

struct Bm25Params {
    double k1 = 1.2;
    double b = 0.75;
};

struct Posting {
    std::uint32_t pair_id = 0;
    std::uint32_t term_frequency = 0;

    bool operator==(const Posting&) const = default;
};

class Bm25Index {
public:
    static constexpr std::uint8_t kFormatVersion = 1;

    Bm25Index() = default;

    static Bm25Index build(const RetrievalBank& bank, Bm25Params params = {}) {
        if (!(params.k1 >= 0.0)) throw Error("BM25 k1 must be >= 0");
        if (!(params.b >= 0.0 && params.b <= 1.0)) throw Error("BM25 b must lie in [0, 1]");
        Bm25Index index;
        index.params_ = params;
        index.doc_lens_.reserve(bank.size());
        std::unordered_map<std::string, std::uint32_t> counts;
        for (const ParallelPair& pair : bank.pairs()) {
            const auto id = static_cast<std::uint32_t>(pair.id);
            const std::vector<std::string> terms = tokenize(pair.source_es);
            index.doc_lens_.push_back(static_cast<std::uint32_t>(terms.size()));
            counts.clear();
            for (const std::string& term : terms) ++counts[term];
            // Pairs are visited in id order, so every postings list stays sorted.
            for (auto& [term, tf] : counts) index.postings_[term].push_back({id, tf});
        }
        index.finish();
        return index;
    }

    std::size_t doc_count() const noexcept { return doc_lens_.size(); }
    double avg_doc_len() const noexcept { return avg_doc_len_; }
    std::uint64_t total_terms() const noexcept { return total_terms_; }
    std::size_t vocabulary_size() const noexcept { return postings_.size(); }
    const Bm25Params& params() const noexcept { return params_; }
    std::span<const std::uint32_t> doc_lens() const noexcept { return doc_lens_; }

    /// Postings for `term` sorted by pair id, or empty if the term is unseen.
    std::span<const Posting> postings(std::string_view term) const {
        const auto it = postings_.find(term);
        if (it == postings_.end()) return {};
        return it->second;
    }

    std::size_t document_frequency(std::string_view term) const { return postings(term).size(); }

    double idf(std::string_view term) const {
        const double n = static_cast<double>(document_frequency(term));
        const double total = static_cast<double>(doc_count());
        return std::log(1.0 + (total - n + 0.5) / (n + 0.5));
    }

    /// Weight of one term occurrence count in one document.
    double term_weight(double idf, std::uint32_t term_frequency, std::uint32_t doc_len) const {
        const double tf = term_frequency;
        const double norm = 1.0 - params_.b + params_.b * static_cast<double>(doc_len) / avg_doc_len_;
        return idf * (tf * (params_.k1 + 1.0)) / (tf + params_.k1 * norm);
    }

    double score(std::span<const std::string> query_terms, std::size_t pair_id) const {
        if (pair_id >= doc_count()) {
            throw Error("pair id " + std::to_string(pair_id) + " out of range for index of " +
                        std::to_string(doc_count()) + " documents");
        }
        double total = 0.0;
        for (const std::string& term : distinct_terms(query_terms)) {
            const std::span<const Posting> list = postings(term);
            const auto it = std::lower_bound(list.begin(), list.end(), pair_id,
                                             [](const Posting& p, std::size_t id) { return p.pair_id < id; });
            if (it == list.end() || it->pair_id != pair_id) continue;
            total += term_weight(idf(term), it->term_frequency, doc_lens_[pair_id]);
        }
        return total;
    }

    /// Scores of every document, accumulated term by term over the postings.
    std::vector<double> score_all(std::span<const std::string> query_terms) const {
        std::vector<double> scores(doc_count(), 0.0);
        for (const std::string& term : distinct_terms(query_terms)) {
            const std::span<const Posting> list = postings(term);
            if (list.empty()) continue;
            const double term_idf = idf(term);
            for (const Posting& posting : list) {
                scores[posting.pair_id] += term_weight(term_idf, posting.term_frequency, doc_lens_[posting.pair_id]);
            }
        }
        return scores;
    }

    // Binary layout, little-endian: version byte, k1, b (f64), N (u64),
    // N doc lengths (u32), vocabulary size (u64), then per term in byte
    // order: length (u32), UTF-8 bytes, posting count (u32), (id, tf) pairs.
    void save(std::ostream& out) const {
        out.put(static_cast<char>(kFormatVersion));
        write_pod(out, params_.k1);
        write_pod(out, params_.b);
        write_pod(out, static_cast<std::uint64_t>(doc_lens_.size()));
        for (std::uint32_t len : doc_lens_) write_pod(out, len);
        std::vector<const std::string*> terms;
        terms.reserve(postings_.size());
        for (const auto& entry : postings_) terms.push_back(&entry.first);
        std::sort(terms.begin(), terms.end(), [](const auto* a, const auto* b) { return *a < *b; });
        write_pod(out, static_cast<std::uint64_t>(terms.size()));
        for (const std::string* term : terms) {
            write_pod(out, static_cast<std::uint32_t>(term->size()));
            out.write(term->data(), static_cast<std::streamsize>(term->size()));
            const auto& list = postings_.find(*term)->second;
            write_pod(out, static_cast<std::uint32_t>(list.size()));
            for (const Posting& posting : list) {
                write_pod(out, posting.pair_id);
                write_pod(out, posting.term_frequency);
            }
        }
        if (!out) throw Error("failed to write BM25 index");
    }

    static Bm25Index load(std::istream& in) {
        const int version = in.get();
        if (version != kFormatVersion) {
            throw Error("unsupported BM25 index format version " + std::to_string(version));
        }
        Bm25Index index;
        index.params_.k1 = read_pod<double>(in);
        index.params_.b = read_pod<double>(in);
        const auto n = read_pod<std::uint64_t>(in);
        index.doc_lens_.resize(n);
        for (auto& len : index.doc_lens_) len = read_pod<std::uint32_t>(in);
        const auto vocabulary = read_pod<std::uint64_t>(in);
        for (std::uint64_t v = 0; v < vocabulary; ++v) {
            std::string term(read_pod<std::uint32_t>(in), '\0');
            in.read(term.data(), static_cast<std::streamsize>(term.size()));
            std::vector<Posting> list(read_pod<std::uint32_t>(in));
            for (Posting& posting : list) {
                posting.pair_id = read_pod<std::uint32_t>(in);
                posting.term_frequency = read_pod<std::uint32_t>(in);
                if (posting.pair_id >= n) throw Error("corrupt BM25 index: posting id out of range");
            }
            if (!in) throw Error("truncated BM25 index");
            index.postings_.emplace(std::move(term), std::move(list));
        }
        index.finish();
        return index;
    }

private:
    struct TermHash {
        using is_transparent = void;
        std::size_t operator()(std::string_view s) const noexcept { return std::hash<std::string_view>{}(s); }
    };
    using PostingMap = std::unordered_map<std::string, std::vector<Posting>, TermHash, std::equal_to<>>;

    void finish() {
        total_terms_ = 0;
        for (std::uint32_t len : doc_lens_) total_terms_ += len;
        avg_doc_len_ = doc_lens_.empty() ? 0.0 : static_cast<double>(total_terms_) / static_cast<double>(doc_lens_.size());
    }

    template <typename T>
    static void write_pod(std::ostream& out, T value) {
        static_assert(std::endian::native == std::endian::little, "index format assumes a little-endian host");
        char bytes[sizeof(T)];
        std::memcpy(bytes, &value, sizeof(T));
        out.write(bytes, sizeof(T));
    }

    template <typename T>
    static T read_pod(std::istream& in) {
        char bytes[sizeof(T)];
        if (!in.read(bytes, sizeof(T))) throw Error("truncated BM25 index");
        T value;
        std::memcpy(&value, bytes, sizeof(T));
        return value;
    }

    Bm25Params params_;
    std::vector<std::uint32_t> doc_lens_;
    std::uint64_t total_terms_ = 0;
    double avg_doc_len_ = 0.0;
    PostingMap postings_;
};

struct ScoredPair {
    ParallelPair pair;
    double score = 0.0;
};

struct RetrievedSet {
    std::string query;
    std::vector<ScoredPair> entries;
};

/// Top-r pairs for `query`: exactly min(r, N) entries.
inline RetrievedSet retrieve(const Bm25Index& index, const RetrievalBank& bank, std::string_view query,
                             std::size_t r) {
    if (index.doc_count() != bank.size()) {
        throw Error("index covers " + std::to_string(index.doc_count()) + " documents but bank has " +
                    std::to_string(bank.size()));
    }
    RetrievedSet result;
    result.query = std::string(query);
    const std::size_t quota = std::min(r, bank.size());
    if (quota == 0) return result;

    const std::vector<double> scores = index.score_all(tokenize(query));
    std::vector<std::uint32_t> matched;
    for (std::uint32_t id = 0; id < scores.size(); ++id) {
        if (scores[id] > 0.0) matched.push_back(id);
    }
    const auto better = [&](std::uint32_t a, std::uint32_t b) {
        return scores[a] != scores[b] ? scores[a] > scores[b] : a < b;
    };
    const std::size_t take = std::min(quota, matched.size());
    std::partial_sort(matched.begin(), matched.begin() + static_cast<std::ptrdiff_t>(take), matched.end(), better);

    result.entries.reserve(quota);
    for (std::size_t i = 0; i < take; ++i) result.entries.push_back({bank[matched[i]], scores[matched[i]]});
    // Zero-score fill in id order.
    for (std::uint32_t id = 0; id < scores.size() && result.entries.size() < quota; ++id) {
        if (scores[id] <= 0.0) result.entries.push_back({bank[id], scores[id]});
    }
    return result;
}

} // namespace ragmt
