#pragma once

// Many-shot prompt assembly: system instruction plus a user message holding
// the dev exemplar block, the retrieved block and the query stub.
//
//   Development exemplars:
//   ES: <source> ||| TGT: <target>
//   ...
//
//   Retrieved examples:
//   ES: <source> ||| TGT: <target>
//   ...
//
//   ES: <query>
//   TGT:

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "ragmt/corpus.hpp"
#include "ragmt/detail/prompt_text.hpp"
#include "ragmt/error.hpp"
#include "ragmt/retrieval.hpp"
#include "ragmt/unicode.hpp"

namespace ragmt {

inline constexpr std::string_view kDevHeader = "Development exemplars:";
inline constexpr std::string_view kRetrievedHeader = "Retrieved examples:";
inline constexpr std::string_view kSourcePrefix = "ES: ";
inline constexpr std::string_view kTargetSeparator = " ||| TGT: ";
inline constexpr std::string_view kTargetStub = "TGT:";

enum class TemplateVariant { standard, morphological_bribri, wixarika_glossary_v2, wixarika_glossary_v3 };

inline std::string_view to_string(TemplateVariant variant) {
    switch (variant) {
    case TemplateVariant::standard: return "standard";
    case TemplateVariant::morphological_bribri: return "morphological_bribri";
    case TemplateVariant::wixarika_glossary_v2: return "wixarika_glossary_v2";
    case TemplateVariant::wixarika_glossary_v3: return "wixarika_glossary_v3";
    }
    return "?";
}

struct PromptTemplate {
    std::string template_id;
    std::string system_text;
    TemplateVariant variant = TemplateVariant::standard;

    /// System text with every `{language_name}` replaced.
    std::string render(std::string_view language_name) const {
        static constexpr std::string_view placeholder = "{language_name}";
        std::string out;
        std::size_t pos = 0;
        while (true) {
            const std::size_t hit = system_text.find(placeholder, pos);
            out.append(system_text, pos, hit == std::string::npos ? std::string::npos : hit - pos);
            if (hit == std::string::npos) break;
            out.append(language_name);
            pos = hit + placeholder.size();
        }
        return out;
    }
};

inline std::string render_morphological_block() { return std::string(detail::kMorphologicalBlock); }

class TemplateRegistry {
public:
    /// "standard", one `<code>_system` template per language, and the two
    /// Wixarika glossary variants.
    static TemplateRegistry builtin() {
        const std::string standard(detail::kStandardSystemText);
        TemplateRegistry registry;
        registry.add({"standard", standard, TemplateVariant::standard});
        for (Language language : kAllLanguages) {
            PromptTemplate tmpl{std::string(code(language)) + "_system", standard, TemplateVariant::standard};
            if (language == Language::bzd) {
                tmpl.system_text += "\n\n" + render_morphological_block();
                tmpl.variant = TemplateVariant::morphological_bribri;
            }
            registry.add(std::move(tmpl));
        }
        registry.add({"hch_glossary_v2", standard + "\n\n" + std::string(detail::kWixarikaGlossaryV2),
                      TemplateVariant::wixarika_glossary_v2});
        registry.add({"hch_glossary_v3", standard + "\n\n" + std::string(detail::kWixarikaGlossaryV3),
                      TemplateVariant::wixarika_glossary_v3});
        return registry;
    }

    void add(PromptTemplate tmpl) {
        const std::string id = tmpl.template_id;
        templates_.insert_or_assign(id, std::move(tmpl));
    }

    /// Reads one template file; the id defaults to the file stem.
    void load_file(const std::filesystem::path& path, std::optional<std::string> template_id = std::nullopt,
                   TemplateVariant variant = TemplateVariant::standard) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw Error("cannot open template file '" + path.string() + "'");
        std::ostringstream text;
        text << in.rdbuf();
        std::string body = text.str();
        while (!body.empty() && (body.back() == '\n' || body.back() == '\r')) body.pop_back();
        if (!unicode::is_valid_utf8(body)) throw Error("template file '" + path.string() + "' is not valid UTF-8");
        add({template_id.value_or(path.stem().string()), std::move(body), variant});
    }

    /// Loads every `*.txt` file in `dir`, overriding builtins of the same id.
    void load_directory(const std::filesystem::path& dir) {
        std::vector<std::filesystem::path> files;
        for (const auto& entry : std::filesystem::directory_iterator(dir)) {
            if (entry.is_regular_file() && entry.path().extension() == ".txt") files.push_back(entry.path());
        }
        std::sort(files.begin(), files.end());
        for (const auto& file : files) load_file(file);
    }

    bool contains(std::string_view id) const { return templates_.find(std::string(id)) != templates_.end(); }

    const PromptTemplate& find(std::string_view id) const {
        const auto it = templates_.find(std::string(id));
        if (it == templates_.end()) {
            std::string known;
            for (const auto& [name, _] : templates_) known += (known.empty() ? "" : ", ") + name;
            throw Error("unknown template '" + std::string(id) + "' (available: " + known + ")");
        }
        return it->second;
    }

    std::vector<std::string> ids() const {
        std::vector<std::string> out;
        for (const auto& [name, _] : templates_) out.push_back(name);
        return out;
    }

private:
    std::map<std::string, PromptTemplate> templates_;
};

/// Template for a profile with `{language_name}` filled in. A profile that
/// carries a morphological block gets it appended unless the template text
/// already contains it.
inline PromptTemplate resolve_template(const TemplateRegistry& registry, const LanguageProfile& profile) {
    PromptTemplate tmpl = registry.find(profile.system_template_id);
    if (profile.morphological_block && tmpl.system_text.find(*profile.morphological_block) == std::string::npos) {
        tmpl.system_text += "\n\n" + *profile.morphological_block;
        tmpl.variant = TemplateVariant::morphological_bribri;
    }
    tmpl.system_text = tmpl.render(display_name(profile.language));
    return tmpl;
}

/// First `d` dev examples in file order, skipping `current_id` when
/// `holdout_self` is set.
inline std::vector<ParallelPair> select_dev_exemplars(std::span<const CaptionExample> dev, std::size_t d,
                                                      std::optional<std::string_view> current_id = std::nullopt,
                                                      bool holdout_self = false) {
    const bool skip_current =
        holdout_self && current_id &&
        std::any_of(dev.begin(), dev.end(), [&](const CaptionExample& e) { return e.example_id == *current_id; });
    const std::size_t available = dev.size() - (skip_current ? 1 : 0);
    if (d > available) {
        throw Error("d=" + std::to_string(d) + " exceeds the " + std::to_string(available) +
                    " available dev exemplars");
    }
    std::vector<ParallelPair> out;
    out.reserve(d);
    for (std::size_t i = 0; i < dev.size() && out.size() < d; ++i) {
        const CaptionExample& example = dev[i];
        if (skip_current && example.example_id == *current_id) continue;
        if (!example.reference_target) {
            throw Error("dev example '" + example.example_id + "' has no reference caption");
        }
        out.push_back({i, example.spanish_caption, *example.reference_target, Origin::dev});
    }
    return out;
}

struct AssembledPrompt {
    std::string system_text;
    std::string user_text;
    std::size_t dev_block_count = 0;
    std::size_t retrieved_block_count = 0;
    std::size_t token_estimate = 0;

    bool operator==(const AssembledPrompt&) const = default;
};

/// ceil(code points / 4) over system and user text.
inline std::size_t estimate_tokens(std::string_view system_text, std::string_view user_text) {
    const std::size_t chars = unicode::codepoint_count(system_text) + unicode::codepoint_count(user_text);
    return (chars + 3) / 4;
}

namespace detail {

inline void require_single_line(std::string_view text, std::string_view what) {
    if (has_line_break(text)) throw Error(std::string(what) + " contains a line break: " + std::string(text));
}

inline void append_exemplar(std::string& out, const ParallelPair& pair) {
    require_single_line(pair.source_es, "exemplar source");
    require_single_line(pair.target, "exemplar target");
    out.append(kSourcePrefix).append(pair.source_es).append(kTargetSeparator).append(pair.target).push_back('\n');
}

} // namespace detail

inline AssembledPrompt assemble(const PromptTemplate& tmpl, std::span<const ParallelPair> dev_block,
                                const RetrievedSet& retrieved, std::string_view query) {
    if (unicode::is_blank(query)) throw Error("query caption is empty");
    detail::require_single_line(query, "query caption");

    AssembledPrompt prompt;
    prompt.system_text = tmpl.system_text;
    std::string& user = prompt.user_text;
    if (!dev_block.empty()) {
        user.append(kDevHeader).push_back('\n');
        for (const ParallelPair& pair : dev_block) detail::append_exemplar(user, pair);
        user.push_back('\n');
    }
    if (!retrieved.entries.empty()) {
        user.append(kRetrievedHeader).push_back('\n');
        for (const ScoredPair& entry : retrieved.entries) detail::append_exemplar(user, entry.pair);
        user.push_back('\n');
    }
    user.append(kSourcePrefix).append(query).push_back('\n');
    user.append(kTargetStub);

    prompt.dev_block_count = dev_block.size();
    prompt.retrieved_block_count = retrieved.entries.size();
    prompt.token_estimate = estimate_tokens(prompt.system_text, prompt.user_text);
    return prompt;
}

/// The query of an assembled user message: the "ES: " line just before the
/// closing "TGT:" stub.
inline std::optional<std::string> extract_query(std::string_view user_text) {
    if (!user_text.ends_with(kTargetStub)) return std::nullopt;
    user_text.remove_suffix(kTargetStub.size());
    if (!user_text.ends_with('\n')) return std::nullopt;
    user_text.remove_suffix(1);
    const std::size_t start = user_text.rfind('\n');
    const std::string_view line = start == std::string_view::npos ? user_text : user_text.substr(start + 1);
    if (!line.starts_with(kSourcePrefix)) return std::nullopt;
    return std::string(line.substr(kSourcePrefix.size()));
}

/// Number of exemplar lines ("ES: ... ||| TGT: ...") in a user message.
inline std::size_t count_exemplar_lines(std::string_view user_text) {
    std::size_t count = 0;
    std::size_t pos = 0;
    while (pos < user_text.size()) {
        const std::size_t end = std::min(user_text.find('\n', pos), user_text.size());
        const std::string_view line = user_text.substr(pos, end - pos);
        if (line.starts_with(kSourcePrefix) && line.find(kTargetSeparator) != std::string_view::npos) ++count;
        pos = end + 1;
    }
    return count;
}

} // namespace ragmt
