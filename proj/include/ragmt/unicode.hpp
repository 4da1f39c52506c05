#pragma once

// Thin UTF-8 / code point helpers over ICU. Everything that needs Unicode
// character properties or normalization goes through here.

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>

#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>
#include <unicode/utf8.h>

#include "ragmt/error.hpp"

namespace ragmt::unicode {

inline constexpr char32_t kReplacement = 0xFFFD;

/// Decodes UTF-8; ill-formed sequences become U+FFFD.
inline std::u32string decode(std::string_view utf8) {
    std::u32string out;
    out.reserve(utf8.size());
    const auto* s = reinterpret_cast<const std::uint8_t*>(utf8.data());
    const auto length = static_cast<std::int32_t>(utf8.size());
    std::int32_t i = 0;
    while (i < length) {
        UChar32 c;
        U8_NEXT(s, i, length, c);
        out.push_back(c < 0 ? kReplacement : static_cast<char32_t>(c));
    }
    return out;
}

inline void append_utf8(std::string& out, char32_t c) {
    if (c < 0x80) {
        out.push_back(static_cast<char>(c));
    } else if (c < 0x800) {
        out.push_back(static_cast<char>(0xC0 | (c >> 6)));
        out.push_back(static_cast<char>(0x80 | (c & 0x3F)));
    } else if (c < 0x10000) {
        out.push_back(static_cast<char>(0xE0 | (c >> 12)));
        out.push_back(static_cast<char>(0x80 | ((c >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (c & 0x3F)));
    } else {
        out.push_back(static_cast<char>(0xF0 | (c >> 18)));
        out.push_back(static_cast<char>(0x80 | ((c >> 12) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | ((c >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (c & 0x3F)));
    }
}

inline std::string encode(std::u32string_view text) {
    std::string out;
    out.reserve(text.size());
    for (char32_t c : text) append_utf8(out, c);
    return out;
}

inline bool is_valid_utf8(std::string_view utf8) {
    const auto* s = reinterpret_cast<const std::uint8_t*>(utf8.data());
    const auto length = static_cast<std::int32_t>(utf8.size());
    std::int32_t i = 0;
    while (i < length) {
        UChar32 c;
        U8_NEXT(s, i, length, c);
        if (c < 0) return false;
    }
    return true;
}

inline std::size_t codepoint_count(std::string_view utf8) {
    std::size_t n = 0;
    for (unsigned char byte : utf8) {
        if ((byte & 0xC0) != 0x80) ++n;
    }
    return n;
}

/// Unicode White_Space property.
inline bool is_whitespace(char32_t c) { return u_isUWhiteSpace(static_cast<UChar32>(c)) != 0; }

inline bool is_line_break(char32_t c) {
    switch (c) {
    case U'\n': case U'\r': case U'\v': case U'\f':
    case 0x85: case 0x2028: case 0x2029:
        return true;
    default:
        return false;
    }
}

inline bool is_letter(char32_t c) {
    return (U_GET_GC_MASK(static_cast<UChar32>(c)) & U_GC_L_MASK) != 0;
}

inline bool is_combining_mark(char32_t c) {
    return (U_GET_GC_MASK(static_cast<UChar32>(c)) & U_GC_M_MASK) != 0;
}

/// Letters, decimal digits and combining marks.
inline bool is_word_char(char32_t c) {
    return (U_GET_GC_MASK(static_cast<UChar32>(c)) & (U_GC_L_MASK | U_GC_ND_MASK | U_GC_M_MASK)) != 0;
}

/// Simple (single code point) default case folding.
inline char32_t fold_case(char32_t c) {
    return static_cast<char32_t>(u_foldCase(static_cast<UChar32>(c), U_FOLD_CASE_DEFAULT));
}

inline std::string_view trim(std::string_view text) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(text.data());
    const auto length = static_cast<std::int32_t>(text.size());

    std::int32_t begin = 0;
    while (begin < length) {
        std::int32_t next = begin;
        UChar32 c;
        U8_NEXT(p, next, length, c);
        if (c < 0 || !is_whitespace(static_cast<char32_t>(c))) break;
        begin = next;
    }
    std::int32_t end = length;
    while (end > begin) {
        std::int32_t prev = end;
        UChar32 c;
        U8_PREV(p, begin, prev, c);
        if (c < 0 || !is_whitespace(static_cast<char32_t>(c))) break;
        end = prev;
    }
    return text.substr(static_cast<std::size_t>(begin), static_cast<std::size_t>(end - begin));
}

inline bool is_blank(std::string_view text) { return trim(text).empty(); }

namespace detail {

inline const icu::Normalizer2& nfd_instance() {
    UErrorCode status = U_ZERO_ERROR;
    const icu::Normalizer2* instance = icu::Normalizer2::getNFDInstance(status);
    if (U_FAILURE(status) || instance == nullptr) {
        throw Error(std::string("ICU NFD normalizer unavailable: ") + u_errorName(status));
    }
    return *instance;
}

} // namespace detail

/// Canonical decomposition (NFD).
inline std::string nfd(std::string_view utf8) {
    const icu::UnicodeString source =
        icu::UnicodeString::fromUTF8(icu::StringPiece(utf8.data(), static_cast<std::int32_t>(utf8.size())));
    UErrorCode status = U_ZERO_ERROR;
    const icu::UnicodeString normalized = detail::nfd_instance().normalize(source, status);
    if (U_FAILURE(status)) {
        throw Error(std::string("NFD normalization failed: ") + u_errorName(status));
    }
    std::string out;
    normalized.toUTF8String(out);
    return out;
}

inline bool is_nfd(std::string_view utf8) {
    const icu::UnicodeString source =
        icu::UnicodeString::fromUTF8(icu::StringPiece(utf8.data(), static_cast<std::int32_t>(utf8.size())));
    UErrorCode status = U_ZERO_ERROR;
    const bool result = detail::nfd_instance().isNormalized(source, status);
    return U_SUCCESS(status) && result;
}

} // namespace ragmt::unicode
