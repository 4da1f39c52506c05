#pragma once

// chrF / chrF++ (character n-gram F-score with optional word n-grams).
//
// Per order o: P = matched/hyp_total, R = matched/ref_total,
// F = (1 + beta^2) P R / (beta^2 P + R). The score is 100 times the mean F
// over the orders that have at least one n-gram on either side. Corpus
// scores come from summed statistics, not from averaged sentence scores.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "ragmt/error.hpp"
#include "ragmt/unicode.hpp"

namespace ragmt {

enum class WordTokenizer {
    whitespace,        ///< split on whitespace only
    split_punctuation, ///< also detach one ASCII punctuation mark from either end of a word
};

struct ChrfParams {
    int char_order = 6;
    int word_order = 2;
    double beta = 2.0;
    WordTokenizer word_tokenizer = WordTokenizer::whitespace;

    void validate() const {
        if (char_order < 1) throw Error("chrF char_order must be >= 1");
        if (word_order < 0) throw Error("chrF word_order must be >= 0");
        if (!(beta > 0.0)) throw Error("chrF beta must be > 0");
    }
};

struct OrderStats {
    std::uint64_t matched = 0;
    std::uint64_t hyp_total = 0;
    std::uint64_t ref_total = 0;

    OrderStats& operator+=(const OrderStats& other) {
        matched += other.matched;
        hyp_total += other.hyp_total;
        ref_total += other.ref_total;
        return *this;
    }
    bool operator==(const OrderStats&) const = default;
};

/// Character orders 1..char_order followed by word orders 1..word_order.
struct ChrfStatistics {
    std::vector<OrderStats> orders;

    static ChrfStatistics zeros(const ChrfParams& params) {
        return {std::vector<OrderStats>(static_cast<std::size_t>(params.char_order + params.word_order))};
    }

    ChrfStatistics& operator+=(const ChrfStatistics& other) {
        if (orders.empty()) orders.resize(other.orders.size());
        if (orders.size() != other.orders.size()) throw Error("cannot add chrF statistics of different orders");
        for (std::size_t i = 0; i < orders.size(); ++i) orders[i] += other.orders[i];
        return *this;
    }
    bool operator==(const ChrfStatistics&) const = default;
};

inline ChrfStatistics operator+(ChrfStatistics a, const ChrfStatistics& b) { return a += b; }

/// n-gram -> count. Keys are code point sequences; word n-grams join their
/// tokens with a single space.
using NgramCounts = std::unordered_map<std::u32string, std::uint64_t>;

inline std::u32string strip_whitespace(std::u32string_view text) {
    std::u32string out;
    out.reserve(text.size());
    for (char32_t c : text) {
        if (!unicode::is_whitespace(c)) out.push_back(c);
    }
    return out;
}

inline NgramCounts char_ngrams(std::string_view text, int n) {
    if (n < 1) throw Error("n-gram order must be >= 1");
    const std::u32string chars = strip_whitespace(unicode::decode(text));
    NgramCounts counts;
    const auto len = static_cast<std::size_t>(n);
    for (std::size_t i = 0; i + len <= chars.size(); ++i) ++counts[chars.substr(i, len)];
    return counts;
}

namespace detail {

inline bool is_ascii_punct(char32_t c) {
    return c < 0x80 && std::u32string_view(U"!\"#$%&'()*+,-./:;<=>?@[\\]^_`{|}~").find(c) != std::u32string_view::npos;
}

inline std::vector<std::u32string> split_words(std::u32string_view text, WordTokenizer tokenizer) {
    std::vector<std::u32string> words;
    std::size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && unicode::is_whitespace(text[i])) ++i;
        const std::size_t start = i;
        while (i < text.size() && !unicode::is_whitespace(text[i])) ++i;
        if (i == start) continue;
        std::u32string word(text.substr(start, i - start));
        if (tokenizer == WordTokenizer::split_punctuation && word.size() > 1) {
            if (is_ascii_punct(word.back())) {
                const char32_t mark = word.back();
                word.pop_back();
                words.push_back(std::move(word));
                words.emplace_back(1, mark);
                continue;
            }
            if (is_ascii_punct(word.front())) {
                words.emplace_back(1, word.front());
                words.push_back(word.substr(1));
                continue;
            }
        }
        words.push_back(std::move(word));
    }
    return words;
}

inline NgramCounts word_ngrams_of(const std::vector<std::u32string>& words, int n) {
    NgramCounts counts;
    const auto len = static_cast<std::size_t>(n);
    for (std::size_t i = 0; i + len <= words.size(); ++i) {
        std::u32string key = words[i];
        for (std::size_t j = i + 1; j < i + len; ++j) key.append(U" ").append(words[j]);
        ++counts[key];
    }
    return counts;
}

inline OrderStats compare(const NgramCounts& hyp, const NgramCounts& ref) {
    OrderStats stats;
    for (const auto& [gram, count] : hyp) {
        stats.hyp_total += count;
        if (const auto it = ref.find(gram); it != ref.end()) stats.matched += std::min(count, it->second);
    }
    for (const auto& [gram, count] : ref) stats.ref_total += count;
    return stats;
}

} // namespace detail

inline NgramCounts word_ngrams(std::string_view text, int n, WordTokenizer tokenizer = WordTokenizer::whitespace) {
    if (n < 1) throw Error("n-gram order must be >= 1");
    return detail::word_ngrams_of(detail::split_words(unicode::decode(text), tokenizer), n);
}

inline ChrfStatistics sentence_stats(std::string_view hypothesis, std::string_view reference,
                                     const ChrfParams& params = {}) {
    params.validate();
    ChrfStatistics stats;
    stats.orders.reserve(static_cast<std::size_t>(params.char_order + params.word_order));

    const std::u32string hyp = unicode::decode(hypothesis);
    const std::u32string ref = unicode::decode(reference);
    const std::u32string hyp_chars = strip_whitespace(hyp);
    const std::u32string ref_chars = strip_whitespace(ref);
    const auto count_chars = [](const std::u32string& chars, std::size_t n) {
        NgramCounts counts;
        for (std::size_t i = 0; i + n <= chars.size(); ++i) ++counts[chars.substr(i, n)];
        return counts;
    };
    for (int n = 1; n <= params.char_order; ++n) {
        const auto len = static_cast<std::size_t>(n);
        stats.orders.push_back(detail::compare(count_chars(hyp_chars, len), count_chars(ref_chars, len)));
    }
    if (params.word_order > 0) {
        const auto hyp_words = detail::split_words(hyp, params.word_tokenizer);
        const auto ref_words = detail::split_words(ref, params.word_tokenizer);
        for (int n = 1; n <= params.word_order; ++n) {
            stats.orders.push_back(
                detail::compare(detail::word_ngrams_of(hyp_words, n), detail::word_ngrams_of(ref_words, n)));
        }
    }
    return stats;
}

/// F-score of one order.
inline double order_f_score(const OrderStats& order, double beta) {
    const double precision =
        order.hyp_total > 0 ? static_cast<double>(order.matched) / static_cast<double>(order.hyp_total) : 0.0;
    const double recall =
        order.ref_total > 0 ? static_cast<double>(order.matched) / static_cast<double>(order.ref_total) : 0.0;
    if (precision == 0.0 && recall == 0.0) return 0.0;
    const double beta2 = beta * beta;
    return (1.0 + beta2) * precision * recall / (beta2 * precision + recall);
}

inline double score_from_stats(const ChrfStatistics& stats, const ChrfParams& params = {}) {
    double sum = 0.0;
    std::size_t included = 0;
    for (const OrderStats& order : stats.orders) {
        if (order.hyp_total == 0 && order.ref_total == 0) continue;
        sum += order_f_score(order, params.beta);
        ++included;
    }
    if (included == 0) return 0.0;
    return 100.0 * sum / static_cast<double>(included);
}

inline double sentence_chrf(std::string_view hypothesis, std::string_view reference, const ChrfParams& params = {}) {
    return score_from_stats(sentence_stats(hypothesis, reference, params), params);
}

inline ChrfStatistics corpus_stats(std::span<const std::string> hyps, std::span<const std::string> refs,
                                   const ChrfParams& params = {}) {
    if (hyps.size() != refs.size()) {
        throw Error("hypothesis/reference count mismatch: " + std::to_string(hyps.size()) + " vs " +
                    std::to_string(refs.size()));
    }
    if (hyps.empty()) throw Error("cannot score an empty corpus");
    ChrfStatistics total = ChrfStatistics::zeros(params);
    for (std::size_t i = 0; i < hyps.size(); ++i) total += sentence_stats(hyps[i], refs[i], params);
    return total;
}

inline double corpus_chrf(std::span<const std::string> hyps, std::span<const std::string> refs,
                          const ChrfParams& params = {}) {
    return score_from_stats(corpus_stats(hyps, refs, params), params);
}

/// 100 * (score - baseline) / baseline.
inline double percent_improvement(double score, double baseline) {
    if (!(baseline > 0.0)) throw Error("baseline score must be > 0");
    return 100.0 * (score - baseline) / baseline;
}

} // namespace ragmt
