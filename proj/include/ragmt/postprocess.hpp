#pragma once

// Raw generation -> submission caption.

#include <array>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ragmt/corpus.hpp"
#include "ragmt/error.hpp"
#include "ragmt/unicode.hpp"

namespace ragmt {

inline constexpr std::string_view kStepStripPrefixes = "strip_prefixes";
inline constexpr std::string_view kStepNormalizeWhitespace = "normalize_whitespace";
inline constexpr std::string_view kStepNfd = "nfd";

struct CleanCaption {
    std::string text;
    std::vector<std::string> applied_steps;
};

namespace detail {

// Lead-in labels that may span several words. Single-word labels are
// covered by the generic rule.
inline constexpr std::array<std::u32string_view, 8> kMultiWordLabels{
    U"orizaba nahuatl", U"yucatec maya", U"maya yucateco", U"náhuatl de orizaba",
    U"final caption",   U"target caption", U"caption in", U"translation into",
};

inline constexpr std::array<std::pair<char32_t, char32_t>, 7> kQuotePairs{{
    {U'"', U'"'},
    {U'\'', U'\''},
    {0x201C, 0x201D}, // “ ”
    {0x2018, 0x2019}, // ‘ ’
    {0x00AB, 0x00BB}, // « »
    {0x201E, 0x201C}, // „ “
    {0x300C, 0x300D}, // 「 」
}};

inline std::u32string_view trim32(std::u32string_view text) {
    while (!text.empty() && unicode::is_whitespace(text.front())) text.remove_prefix(1);
    while (!text.empty() && unicode::is_whitespace(text.back())) text.remove_suffix(1);
    return text;
}

inline bool is_label_char(char32_t c, bool first) {
    return unicode::is_letter(c) || (!first && unicode::is_combining_mark(c));
}

/// Matches a case-folded label at the start of `text`; a space in the label
/// matches any run of whitespace. Returns the matched length or 0.
inline std::size_t match_label(std::u32string_view text, std::u32string_view folded_label) {
    std::size_t i = 0;
    for (char32_t expected : folded_label) {
        if (expected == U' ') {
            if (i >= text.size() || !unicode::is_whitespace(text[i])) return 0;
            while (i < text.size() && unicode::is_whitespace(text[i])) ++i;
            continue;
        }
        if (i >= text.size() || unicode::fold_case(text[i]) != expected) return 0;
        ++i;
    }
    return i;
}

/// Length of a leading `label:` (colon included) or 0. A label is one of the
/// multi-word labels above, or a single run of letters and marks; the colon
/// must be followed by whitespace or the end of the line.
inline std::size_t leading_label_length(std::u32string_view line) {
    std::size_t label_end = 0;
    for (std::u32string_view label : kMultiWordLabels) {
        label_end = match_label(line, label);
        if (label_end == 0) continue;
        // "caption in Guaraní:" and "translation into Bribri:" name one more word.
        if (label.ends_with(U" in") || label.ends_with(U" into")) {
            if (label_end >= line.size() || !unicode::is_whitespace(line[label_end])) {
                label_end = 0;
                continue;
            }
            while (label_end < line.size() && unicode::is_whitespace(line[label_end])) ++label_end;
            const std::size_t word_start = label_end;
            while (label_end < line.size() && is_label_char(line[label_end], label_end == word_start)) ++label_end;
            if (label_end == word_start) {
                label_end = 0;
                continue;
            }
        }
        if (label_end < line.size() && line[label_end] == U':') break;
        label_end = 0;
    }
    if (label_end == 0) {
        while (label_end < line.size() && is_label_char(line[label_end], label_end == 0)) ++label_end;
    }
    if (label_end == 0 || label_end >= line.size() || line[label_end] != U':') return 0;
    const std::size_t after = label_end + 1;
    if (after < line.size() && !unicode::is_whitespace(line[after])) return 0;
    return after;
}

inline bool strip_wrapping_quotes(std::u32string_view& line) {
    if (line.size() < 2) return false;
    for (const auto& [open, close] : kQuotePairs) {
        if (line.front() == open && line.back() == close) {
            line = trim32(line.substr(1, line.size() - 2));
            return true;
        }
    }
    return false;
}

} // namespace detail

/// First non-empty line, without leading `label:` lead-ins and wrapping quotes.
/// Labels and quotes are removed until none remain, so the result is a fixed
/// point of this function.
inline std::string strip_prefixes(std::string_view raw) {
    const std::u32string text = unicode::decode(raw);
    std::u32string_view line;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t end = pos;
        while (end < text.size() && !unicode::is_line_break(text[end])) ++end;
        line = detail::trim32(std::u32string_view(text).substr(pos, end - pos));
        if (!line.empty()) break;
        pos = end + 1;
    }

    bool changed = true;
    while (changed && !line.empty()) {
        changed = false;
        if (const std::size_t label = detail::leading_label_length(line); label > 0) {
            line = detail::trim32(line.substr(label));
            changed = true;
        }
        if (detail::strip_wrapping_quotes(line)) changed = true;
    }
    if (line.empty()) throw Error("empty caption");
    return unicode::encode(line);
}

/// Collapses runs of Unicode whitespace to one ASCII space and trims.
inline std::string normalize_whitespace(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    bool pending_space = false;
    for (char32_t c : unicode::decode(text)) {
        if (unicode::is_whitespace(c)) {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) out.push_back(' ');
        pending_space = false;
        unicode::append_utf8(out, c);
    }
    return out;
}

inline std::string nfd_normalize(std::string_view text) { return unicode::nfd(text); }

inline CleanCaption clean(std::string_view raw, const LanguageProfile& profile) {
    CleanCaption caption;
    caption.text = strip_prefixes(raw);
    caption.applied_steps.emplace_back(kStepStripPrefixes);
    caption.text = normalize_whitespace(caption.text);
    caption.applied_steps.emplace_back(kStepNormalizeWhitespace);
    if (profile.apply_nfd) {
        caption.text = nfd_normalize(caption.text);
        caption.applied_steps.emplace_back(kStepNfd);
    }
    return caption;
}

} // namespace ragmt
