#pragma once

// Retrieval banks, caption datasets and per-language profiles.
//
// Bank files and datasets are JSON Lines, one record per line:
//   bank     {"es": "...", "tgt": "...", "origin": "train|synthetic|dev"}
//   dataset  {"id": "...", "caption_es": "...", "caption_tgt": "..."}
// Text fields are kept byte-for-byte as read.

#include <algorithm>
#include <array>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <iosfwd>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_set>
#include <utility>
#include <vector>

#include <json.hpp>

#include "ragmt/detail/prompt_text.hpp"
#include "ragmt/error.hpp"
#include "ragmt/unicode.hpp"

namespace ragmt {

enum class Language { bzd, grn, nah, hch, yua };

inline constexpr std::array kAllLanguages{Language::bzd, Language::grn, Language::hch, Language::nah,
                                          Language::yua};

inline std::string_view code(Language language) {
    switch (language) {
    case Language::bzd: return "bzd";
    case Language::grn: return "grn";
    case Language::nah: return "nah";
    case Language::hch: return "hch";
    case Language::yua: return "yua";
    }
    return "?";
}

inline std::string_view display_name(Language language) {
    switch (language) {
    case Language::bzd: return "Bribri";
    case Language::grn: return "Guaraní";
    case Language::nah: return "Orizaba Nahuatl";
    case Language::hch: return "Wixárika";
    case Language::yua: return "Yucatec Maya";
    }
    return "?";
}

inline Language parse_language(std::string_view text) {
    for (Language language : kAllLanguages) {
        if (code(language) == text) return language;
    }
    throw Error("unknown language code '" + std::string(text) + "' (supported: bzd, grn, hch, nah, yua)");
}

enum class Origin { train, synthetic, dev };

inline std::string_view to_string(Origin origin) {
    switch (origin) {
    case Origin::train: return "train";
    case Origin::synthetic: return "synthetic";
    case Origin::dev: return "dev";
    }
    return "?";
}

inline std::optional<Origin> parse_origin(std::string_view text) {
    if (text == "train") return Origin::train;
    if (text == "synthetic") return Origin::synthetic;
    if (text == "dev") return Origin::dev;
    return std::nullopt;
}

struct ParallelPair {
    std::size_t id = 0;
    std::string source_es;
    std::string target;
    Origin origin = Origin::train;

    bool operator==(const ParallelPair&) const = default;
};

enum class BankFilter { all, exclude_synthetic };

/// Ordered, immutable set of parallel pairs for one language. Pair ids are
/// dense from 0 and equal to the pair's position.
class RetrievalBank {
public:
    RetrievalBank() = default;

    RetrievalBank(Language language, std::vector<ParallelPair> pairs)
        : language_(language), pairs_(std::move(pairs)) {
        for (std::size_t i = 0; i < pairs_.size(); ++i) {
            if (pairs_[i].id != i) {
                throw Error("bank pair ids must be dense from 0; found id " + std::to_string(pairs_[i].id) +
                            " at position " + std::to_string(i));
            }
        }
    }

    Language language() const noexcept { return language_; }
    std::span<const ParallelPair> pairs() const noexcept { return pairs_; }
    std::size_t size() const noexcept { return pairs_.size(); }
    bool empty() const noexcept { return pairs_.empty(); }
    const ParallelPair& operator[](std::size_t id) const { return pairs_.at(id); }

private:
    Language language_ = Language::grn;
    std::vector<ParallelPair> pairs_;
};

struct CaptionExample {
    std::string example_id;
    std::string spanish_caption;
    std::optional<std::string> reference_target;

    bool operator==(const CaptionExample&) const = default;
};

namespace detail {

inline bool has_line_break(std::string_view text) {
    for (char32_t c : unicode::decode(text)) {
        if (unicode::is_line_break(c)) return true;
    }
    return false;
}

inline nlohmann::json parse_record(const std::string& line, std::size_t line_no) {
    nlohmann::json record;
    try {
        record = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(line_no, std::string("malformed record: ") + e.what());
    }
    if (!record.is_object()) throw ParseError(line_no, "malformed record: expected a JSON object");
    return record;
}

/// Reads a required or optional string field; `label` names the field in errors.
inline std::optional<std::string> text_field(const nlohmann::json& record, const char* key, std::string_view label,
                                             bool required, std::size_t line_no) {
    const auto it = record.find(key);
    if (it == record.end() || it->is_null()) {
        if (required) throw ParseError(line_no, "missing " + std::string(label));
        return std::nullopt;
    }
    if (!it->is_string()) throw ParseError(line_no, std::string(label) + " must be a string");
    std::string value = it->get<std::string>();
    if (unicode::is_blank(value)) throw ParseError(line_no, "empty " + std::string(label));
    if (has_line_break(value)) throw ParseError(line_no, std::string(label) + " contains a line break");
    return value;
}

template <typename OnRecord>
void for_each_record(std::istream& in, OnRecord&& on_record) {
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) throw ParseError(line_no, "malformed record: empty line");
        on_record(parse_record(line, line_no), line_no);
    }
}

inline std::ifstream open_input(const std::filesystem::path& path, std::string_view what) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + std::string(what) + " '" + path.string() + "'");
    return in;
}

} // namespace detail

inline RetrievalBank parse_bank(std::istream& in, Language language, BankFilter filter = BankFilter::all) {
    std::vector<ParallelPair> pairs;
    detail::for_each_record(in, [&](const nlohmann::json& record, std::size_t line_no) {
        ParallelPair pair;
        pair.source_es = *detail::text_field(record, "es", "source", true, line_no);
        pair.target = *detail::text_field(record, "tgt", "target", true, line_no);
        if (auto origin = record.find("origin"); origin != record.end() && !origin->is_null()) {
            if (!origin->is_string()) throw ParseError(line_no, "origin must be a string");
            const auto parsed = parse_origin(origin->get<std::string>());
            if (!parsed) throw ParseError(line_no, "unknown origin '" + origin->get<std::string>() + "'");
            pair.origin = *parsed;
        }
        if (filter == BankFilter::exclude_synthetic && pair.origin == Origin::synthetic) return;
        pair.id = pairs.size();
        pairs.push_back(std::move(pair));
    });
    return RetrievalBank(language, std::move(pairs));
}

inline RetrievalBank load_bank(const std::filesystem::path& path, Language language,
                               BankFilter filter = BankFilter::all) {
    auto in = detail::open_input(path, "bank file");
    try {
        return parse_bank(in, language, filter);
    } catch (const ParseError& e) {
        throw ParseError(e.line(), e.detail(), path.string());
    }
}

inline RetrievalBank load_bank(const std::filesystem::path& path, std::string_view language_code,
                               BankFilter filter = BankFilter::all) {
    return load_bank(path, parse_language(language_code), filter);
}

inline void write_bank(std::ostream& out, const RetrievalBank& bank) {
    for (const ParallelPair& pair : bank.pairs()) {
        const nlohmann::json record{{"es", pair.source_es}, {"tgt", pair.target}, {"origin", to_string(pair.origin)}};
        out << record.dump() << '\n';
    }
}

inline std::vector<CaptionExample> parse_dataset(std::istream& in) {
    std::vector<CaptionExample> examples;
    std::unordered_set<std::string> seen;
    detail::for_each_record(in, [&](const nlohmann::json& record, std::size_t line_no) {
        CaptionExample example;
        const auto id = record.find("id");
        if (id == record.end() || id->is_null()) throw ParseError(line_no, "missing id");
        if (id->is_string()) {
            example.example_id = id->get<std::string>();
        } else if (id->is_number_integer()) {
            example.example_id = id->dump();
        } else {
            throw ParseError(line_no, "id must be a string");
        }
        if (example.example_id.empty()) throw ParseError(line_no, "empty id");
        if (!seen.insert(example.example_id).second) {
            throw ParseError(line_no, "duplicate id '" + example.example_id + "'");
        }
        example.spanish_caption = *detail::text_field(record, "caption_es", "caption_es", true, line_no);
        example.reference_target = detail::text_field(record, "caption_tgt", "caption_tgt", false, line_no);
        examples.push_back(std::move(example));
    });
    return examples;
}

inline std::vector<CaptionExample> load_dev_set(const std::filesystem::path& path) {
    auto in = detail::open_input(path, "dataset file");
    try {
        return parse_dataset(in);
    } catch (const ParseError& e) {
        throw ParseError(e.line(), e.detail(), path.string());
    }
}

inline void write_dataset(std::ostream& out, std::span<const CaptionExample> examples) {
    for (const CaptionExample& example : examples) {
        nlohmann::json record{{"id", example.example_id}, {"caption_es", example.spanish_caption}};
        if (example.reference_target) record["caption_tgt"] = *example.reference_target;
        out << record.dump() << '\n';
    }
}

/// Dev pairs with references, as parallel pairs (ids are dataset positions).
inline std::vector<ParallelPair> reference_pairs(std::span<const CaptionExample> examples) {
    std::vector<ParallelPair> pairs;
    for (std::size_t i = 0; i < examples.size(); ++i) {
        if (!examples[i].reference_target) continue;
        pairs.push_back({i, examples[i].spanish_caption, *examples[i].reference_target, Origin::dev});
    }
    return pairs;
}

struct LanguageProfile {
    Language language = Language::grn;
    std::string system_template_id;
    std::optional<std::string> morphological_block;
    std::size_t default_r = 0;
    std::size_t default_d = 0;
    bool apply_nfd = false;

    bool operator==(const LanguageProfile&) const = default;
};

/// Submission configurations: (r, d) per language, NFD and morphological
/// prompting for Bribri only.
inline LanguageProfile builtin_profile(Language language) {
    LanguageProfile profile;
    profile.language = language;
    profile.system_template_id = std::string(code(language)) + "_system";
    switch (language) {
    case Language::bzd:
        profile.default_r = 80;
        profile.default_d = 20;
        profile.apply_nfd = true;
        profile.morphological_block = std::string(detail::kMorphologicalBlock);
        break;
    case Language::grn:
        profile.default_r = 80;
        profile.default_d = 49;
        break;
    case Language::nah:
        profile.default_r = 40;
        profile.default_d = 20;
        break;
    case Language::hch:
        profile.default_r = 40;
        profile.default_d = 20;
        break;
    case Language::yua:
        profile.default_r = 0;
        profile.default_d = 49;
        break;
    }
    return profile;
}

inline LanguageProfile builtin_profile(std::string_view language_code) {
    return builtin_profile(parse_language(language_code));
}

/// Applies the fields present in `overrides` (LanguageProfile field names);
/// `"morphological_block": null` removes the block.
inline LanguageProfile apply_overrides(LanguageProfile profile, const nlohmann::json& overrides) {
    if (!overrides.is_object()) throw Error("profile override must be a JSON object");
    for (const auto& [key, value] : overrides.items()) {
        try {
            if (key == "language") {
                if (parse_language(value.get<std::string>()) != profile.language) {
                    throw Error("override is for language '" + value.get<std::string>() + "'");
                }
            } else if (key == "system_template_id") {
                profile.system_template_id = value.get<std::string>();
            } else if (key == "morphological_block") {
                profile.morphological_block =
                    value.is_null() ? std::nullopt : std::optional<std::string>(value.get<std::string>());
            } else if (key == "default_r") {
                profile.default_r = value.get<std::size_t>();
            } else if (key == "default_d") {
                profile.default_d = value.get<std::size_t>();
            } else if (key == "apply_nfd") {
                profile.apply_nfd = value.get<bool>();
            } else {
                throw Error("unknown profile field '" + key + "'");
            }
        } catch (const nlohmann::json::type_error& e) {
            throw Error("profile field '" + key + "': " + e.what());
        }
    }
    return profile;
}

/// Loads the builtin profile for `language` and applies overrides from a
/// config file. The file holds either one profile object or an object keyed
/// by language code.
inline LanguageProfile load_profile(const std::filesystem::path& path, Language language) {
    auto in = detail::open_input(path, "profile config");
    nlohmann::json config;
    try {
        config = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw Error("profile config '" + path.string() + "': " + e.what());
    }
    if (!config.is_object()) throw Error("profile config '" + path.string() + "' must be a JSON object");
    LanguageProfile profile = builtin_profile(language);
    if (config.contains("language")) {
        if (parse_language(config["language"].get<std::string>()) != language) return profile;
        return apply_overrides(profile, config);
    }
    if (const auto it = config.find(std::string(code(language))); it != config.end()) {
        return apply_overrides(profile, *it);
    }
    return profile;
}

} // namespace ragmt
