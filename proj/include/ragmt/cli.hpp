#pragma once

// Subcommand implementations behind the `ragmt` executable. They take parsed
// options and output streams and return the process exit code, so the same
// code paths run in-process from tests.

#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <initializer_list>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ragmt/backend.hpp"
#include "ragmt/corpus.hpp"
#include "ragmt/metrics.hpp"
#include "ragmt/pipeline.hpp"
#include "ragmt/promptkit.hpp"
#include "ragmt/retrieval.hpp"
#include "ragmt/sweep.hpp"

#ifndef RAGMT_VERSION
#define RAGMT_VERSION "0.0.0"
#endif

namespace ragmt::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitPartial = 2;

struct CommonOptions {
    std::string backend = "mock";
    std::filesystem::path cache;
    std::size_t max_concurrency = 4;
    bool keep_going = false;
    bool holdout_self = false;
    std::filesystem::path adapters;       ///< extra adapter definitions
    std::filesystem::path profile_config; ///< LanguageProfile overrides
    std::filesystem::path template_dir;   ///< extra or replacement templates
    std::string template_id;              ///< overrides the profile's template
    GenerationConfig generation;
    Bm25Params bm25;
};

struct IndexOptions {
    std::filesystem::path bank;
    std::string language;
    std::filesystem::path out;
    bool exclude_synthetic = false;
};

struct TranslateOptions {
    std::filesystem::path dataset;
    std::filesystem::path dev; ///< defaults to the dataset
    std::filesystem::path bank;
    std::string language;
    std::optional<std::size_t> r;
    std::optional<std::size_t> d;
    std::filesystem::path out;
    bool exclude_synthetic = false;
};

struct ScoreOptions {
    std::filesystem::path hyp;
    std::filesystem::path ref;
    std::optional<double> baseline;
    bool per_sentence = false;
    std::string hyp_field = "caption";
    std::string ref_field = "caption_tgt";
    ChrfParams params;
};

struct SweepOptions {
    std::filesystem::path dataset;
    std::filesystem::path bank;
    std::string language;
    std::vector<std::size_t> r_values{0, 10, 20, 40, 80};
    std::vector<std::size_t> d_values{0, 10, 20, 30, 40, 49};
    std::filesystem::path out; ///< report prefix: <out>.tsv, <out>.txt
    bool exclude_synthetic = false;
};

namespace detail {

inline std::int64_t manifest_timestamp() {
    if (const char* epoch = std::getenv("SOURCE_DATE_EPOCH"); epoch != nullptr && *epoch != '\0') {
        return std::strtoll(epoch, nullptr, 10);
    }
    return static_cast<std::int64_t>(std::time(nullptr));
}

inline void write_file(const std::filesystem::path& path, const std::string& contents) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write '" + path.string() + "'");
    out << contents;
    if (!out) throw Error("failed writing '" + path.string() + "'");
}

inline std::filesystem::path with_suffix(const std::filesystem::path& path, const std::string& suffix) {
    return path.string() + suffix;
}

inline std::unique_ptr<Backend> make_backend(const CommonOptions& common, std::span<const ParallelPair> oracle_pairs) {
    if (common.backend == "mock") return mock_oracle(oracle_pairs);
    auto adapters = builtin_adapters();
    if (!common.adapters.empty()) {
        for (AdapterConfig& adapter : load_adapters(common.adapters)) adapters.insert_or_assign(adapter.name, adapter);
    }
    const auto it = adapters.find(common.backend);
    if (it == adapters.end()) {
        std::string known = "mock";
        for (const auto& [name, _] : adapters) known += ", " + name;
        throw Error("unknown backend '" + common.backend + "' (available: " + known + ")");
    }
    return std::make_unique<HttpBackend>(it->second);
}

inline LanguageProfile make_profile(const CommonOptions& common, Language language) {
    LanguageProfile profile =
        common.profile_config.empty() ? builtin_profile(language) : load_profile(common.profile_config, language);
    if (!common.template_id.empty()) profile.system_template_id = common.template_id;
    return profile;
}

inline TemplateRegistry make_registry(const CommonOptions& common) {
    TemplateRegistry registry = TemplateRegistry::builtin();
    if (!common.template_dir.empty()) registry.load_directory(common.template_dir);
    return registry;
}

/// Oracle pairs for the mock backend: referenced examples of each dataset in
/// turn, then the bank. Earlier pairs win on duplicate Spanish text.
inline std::vector<ParallelPair> oracle_pairs(std::initializer_list<std::span<const CaptionExample>> datasets,
                                              const RetrievalBank& bank) {
    std::vector<ParallelPair> pairs;
    for (const auto& dataset : datasets) {
        const auto refs = reference_pairs(dataset);
        pairs.insert(pairs.end(), refs.begin(), refs.end());
    }
    pairs.insert(pairs.end(), bank.pairs().begin(), bank.pairs().end());
    return pairs;
}

inline std::vector<std::string> read_column(const std::filesystem::path& path, const std::string& field) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open '" + path.string() + "'");
    const bool jsonl = path.extension() == ".jsonl";
    std::vector<std::string> lines;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!jsonl) {
            lines.push_back(line);
            continue;
        }
        try {
            const auto record = nlohmann::json::parse(line);
            const auto it = record.find(field);
            lines.push_back(it == record.end() || it->is_null() ? std::string{} : it->get<std::string>());
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(line_no, std::string("malformed record: ") + e.what(), path.string());
        }
    }
    return lines;
}

inline std::string fixed(double value, int decimals) {
    char buffer[64];
    std::snprintf(buffer, sizeof buffer, "%.*f", decimals, value);
    return buffer;
}

} // namespace detail

inline int cmd_index(const IndexOptions& options, const CommonOptions& common, std::ostream& out, std::ostream& err) {
    const Language language = parse_language(options.language);
    const RetrievalBank bank = load_bank(options.bank, language,
                                         options.exclude_synthetic ? BankFilter::exclude_synthetic : BankFilter::all);
    const Bm25Index index = Bm25Index::build(bank, common.bm25);
    out << "N=" << index.doc_count() << '\n';
    out << "avg_doc_len=" << detail::fixed(index.avg_doc_len(), 4) << '\n';
    out << "vocabulary=" << index.vocabulary_size() << '\n';
    if (index.doc_count() == 0) err << "warning: bank is empty; retrieval is disabled (r is effectively 0)\n";
    if (!options.out.empty()) {
        std::ostringstream buffer;
        index.save(buffer);
        detail::write_file(options.out, buffer.str());
        out << "index written to " << options.out.string() << '\n';
    }
    return kExitOk;
}

inline int cmd_translate(const TranslateOptions& options, const CommonOptions& common, std::ostream& out,
                         std::ostream& err) {
    const Language language = parse_language(options.language);
    const LanguageProfile profile = detail::make_profile(common, language);
    const std::vector<CaptionExample> dataset = load_dev_set(options.dataset);
    const std::vector<CaptionExample> dev = options.dev.empty() ? dataset : load_dev_set(options.dev);
    const RetrievalBank bank = load_bank(options.bank, language,
                                         options.exclude_synthetic ? BankFilter::exclude_synthetic : BankFilter::all);
    const Bm25Index index = Bm25Index::build(bank, common.bm25);
    const TemplateRegistry registry = detail::make_registry(common);
    const PromptTemplate prompt_template = resolve_template(registry, profile);

    const std::unique_ptr<Backend> backend =
        detail::make_backend(common, detail::oracle_pairs({dataset, dev}, bank));
    ResponseCache cache(common.cache);

    PipelineOptions pipeline;
    pipeline.r = options.r.value_or(profile.default_r);
    pipeline.d = options.d.value_or(profile.default_d);
    pipeline.holdout_self = common.holdout_self;
    pipeline.keep_going = common.keep_going;
    pipeline.max_concurrency = common.max_concurrency;
    pipeline.generation = common.generation;
    const PipelineResources resources{bank, index, profile, prompt_template, dev, *backend, &cache};
    const std::vector<TranslationResult> results = translate_all(resources, pipeline, dataset);

    std::string submission;
    std::size_t failures = 0;
    for (const TranslationResult& result : results) {
        submission += nlohmann::json{{"id", result.example_id}, {"caption", result.caption}}.dump() + "\n";
        if (result.error) {
            ++failures;
            err << "error: example '" << result.example_id << "': " << *result.error << '\n';
        }
    }
    detail::write_file(options.out, submission);

    const nlohmann::json manifest{
        {"language", code(language)},
        {"r", pipeline.r},
        {"d", pipeline.d},
        {"effective_r", std::min(pipeline.r, bank.size())},
        {"model_id", common.generation.model_id},
        {"temperature", common.generation.temperature},
        {"max_output_tokens", common.generation.max_output_tokens},
        {"thinking_enabled", common.generation.thinking_enabled},
        {"backend", common.backend},
        {"template_id", prompt_template.template_id},
        {"apply_nfd", profile.apply_nfd},
        {"holdout_self", common.holdout_self},
        {"exclude_synthetic", options.exclude_synthetic},
        {"bm25", {{"k1", common.bm25.k1}, {"b", common.bm25.b}}},
        {"bank_path", options.bank.string()},
        {"dataset_path", options.dataset.string()},
        {"dev_path", (options.dev.empty() ? options.dataset : options.dev).string()},
        {"cache_path", common.cache.string()},
        {"timestamp", detail::manifest_timestamp()},
        {"tool_version", RAGMT_VERSION}};
    detail::write_file(detail::with_suffix(options.out, ".manifest.json"), manifest.dump(2) + "\n");

    out << "wrote " << results.size() << " captions to " << options.out.string() << " (r=" << pipeline.r
        << ", d=" << pipeline.d << ", backend calls=" << backend->calls() << ")\n";
    if (failures > 0) {
        err << failures << " of " << results.size() << " examples failed\n";
        return kExitPartial;
    }
    return kExitOk;
}

inline int cmd_score(const ScoreOptions& options, std::ostream& out, std::ostream& err) {
    const std::vector<std::string> hyps = detail::read_column(options.hyp, options.hyp_field);
    const std::vector<std::string> refs = detail::read_column(options.ref, options.ref_field);
    if (hyps.size() != refs.size()) {
        err << "error: " << options.hyp.string() << " has " << hyps.size() << " lines but " << options.ref.string()
            << " has " << refs.size() << '\n';
        return kExitError;
    }
    if (options.per_sentence) {
        for (std::size_t i = 0; i < hyps.size(); ++i) {
            out << (i + 1) << '\t' << detail::fixed(sentence_chrf(hyps[i], refs[i], options.params), 2) << '\n';
        }
    }
    const double score = corpus_chrf(hyps, refs, options.params);
    out << detail::fixed(score, 2) << '\n';
    if (options.baseline) {
        const double improvement = percent_improvement(score, *options.baseline);
        out << (improvement >= 0 ? "+" : "") << detail::fixed(improvement, 1) << "%\n";
    }
    return kExitOk;
}

inline int cmd_sweep(const SweepOptions& options, const CommonOptions& common, std::ostream& out,
                     std::ostream& err) {
    SweepGrid grid;
    grid.language = parse_language(options.language);
    grid.r_values = options.r_values;
    grid.d_values = options.d_values;
    grid.bank_filter = options.exclude_synthetic ? BankFilter::exclude_synthetic : BankFilter::all;

    const LanguageProfile profile = detail::make_profile(common, grid.language);
    const std::vector<CaptionExample> dataset = load_dev_set(options.dataset);
    const RetrievalBank bank = load_bank(options.bank, grid.language, grid.bank_filter);
    const Bm25Index index = Bm25Index::build(bank, common.bm25);
    const TemplateRegistry registry = detail::make_registry(common);
    const PromptTemplate prompt_template = resolve_template(registry, profile);
    const std::unique_ptr<Backend> backend = detail::make_backend(common, detail::oracle_pairs({dataset}, bank));
    ResponseCache cache(common.cache);

    PipelineOptions pipeline;
    pipeline.holdout_self = common.holdout_self;
    pipeline.keep_going = common.keep_going;
    pipeline.max_concurrency = common.max_concurrency;
    pipeline.generation = common.generation;
    const SweepSetup setup{dataset, bank, index, profile, prompt_template, *backend, &cache, pipeline, ChrfParams{}};
    const std::vector<SweepCell> cells = run_grid(grid, setup);

    std::ostringstream tsv;
    std::ostringstream text;
    write_report_tsv(tsv, grid.language, cells);
    write_report_text(text, grid.language, cells);
    out << text.str();
    if (!options.out.empty()) {
        detail::write_file(detail::with_suffix(options.out, ".tsv"), tsv.str());
        detail::write_file(detail::with_suffix(options.out, ".txt"), text.str());
    }
    err << "cells=" << cells.size() << " bank=" << bank.size() << " backend calls=" << backend->calls() << '\n';

    const auto failed = std::count_if(cells.begin(), cells.end(), [](const SweepCell& c) { return c.failed; });
    if (failed > 0) {
        err << failed << " of " << cells.size() << " cells failed\n";
        return kExitPartial;
    }
    return kExitOk;
}

} // namespace ragmt::cli
