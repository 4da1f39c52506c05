#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "ragmt/cli.hpp"

namespace {

CLI::App* add_index(CLI::App& app, ragmt::cli::IndexOptions& options) {
    auto* cmd = app.add_subcommand("index", "Build a BM25 index over a retrieval bank and print its statistics");
    cmd->add_option("--bank", options.bank, "Bank file (JSONL: es, tgt, origin)")->required()->check(CLI::ExistingFile);
    cmd->add_option("--language", options.language, "Language code: bzd, grn, hch, nah, yua")->required();
    cmd->add_option("--out", options.out, "Write the index to this file (default: not persisted)");
    cmd->add_flag("--exclude-synthetic", options.exclude_synthetic, "Drop origin=synthetic pairs")
        ->capture_default_str();
    return cmd;
}

CLI::App* add_translate(CLI::App& app, ragmt::cli::TranslateOptions& options, std::optional<std::size_t>& r,
                        std::optional<std::size_t>& d) {
    auto* cmd = app.add_subcommand("translate", "Translate Spanish captions into the target language");
    cmd->add_option("--dataset", options.dataset, "Dataset to translate (JSONL: id, caption_es, caption_tgt?)")
        ->required()
        ->check(CLI::ExistingFile);
    cmd->add_option("--dev", options.dev, "Dev set supplying exemplars (default: the dataset itself)")
        ->check(CLI::ExistingFile);
    cmd->add_option("--bank", options.bank, "Retrieval bank (JSONL)")->required()->check(CLI::ExistingFile);
    cmd->add_option("--language", options.language, "Language code: bzd, grn, hch, nah, yua")->required();
    cmd->add_option("--r", r, "Retrieved exemplars per prompt (default: language profile)");
    cmd->add_option("--d", d, "Dev exemplars per prompt (default: language profile)");
    cmd->add_option("--out", options.out, "Submission file (JSONL: id, caption); manifest goes to <out>.manifest.json")
        ->required();
    cmd->add_flag("--exclude-synthetic", options.exclude_synthetic, "Drop origin=synthetic bank pairs")
        ->capture_default_str();
    return cmd;
}

CLI::App* add_score(CLI::App& app, ragmt::cli::ScoreOptions& options, bool& split_punctuation) {
    auto* cmd = app.add_subcommand("score", "Corpus chrF++ of line-aligned hypotheses against references");
    cmd->add_option("hyp", options.hyp, "Hypotheses: plain text, or .jsonl")->required()->check(CLI::ExistingFile);
    cmd->add_option("ref", options.ref, "References: plain text, or .jsonl")->required()->check(CLI::ExistingFile);
    cmd->add_option("--baseline", options.baseline, "Also print percent improvement over this score");
    cmd->add_flag("--per-sentence", options.per_sentence, "Print index<TAB>score for every sentence first")
        ->capture_default_str();
    cmd->add_option("--hyp-field", options.hyp_field, "Field read from .jsonl hypotheses")->capture_default_str();
    cmd->add_option("--ref-field", options.ref_field, "Field read from .jsonl references")->capture_default_str();
    cmd->add_option("--char-order", options.params.char_order, "Character n-gram order")->capture_default_str();
    cmd->add_option("--word-order", options.params.word_order, "Word n-gram order (0 = chrF)")->capture_default_str();
    cmd->add_option("--beta", options.params.beta, "Recall weight")->capture_default_str();
    cmd->add_flag("--split-punctuation", split_punctuation,
                  "Detach leading/trailing ASCII punctuation from words before word n-grams")
        ->capture_default_str();
    return cmd;
}

CLI::App* add_sweep(CLI::App& app, ragmt::cli::SweepOptions& options) {
    auto* cmd = app.add_subcommand("sweep", "Run an (r, d) grid on a referenced dev set and report chrF++ per cell");
    cmd->add_option("--dataset", options.dataset, "Dev set with references (JSONL)")
        ->required()
        ->check(CLI::ExistingFile);
    cmd->add_option("--bank", options.bank, "Retrieval bank (JSONL)")->required()->check(CLI::ExistingFile);
    cmd->add_option("--language", options.language, "Language code: bzd, grn, hch, nah, yua")->required();
    cmd->add_option("--r", options.r_values, "Comma-separated r values")->delimiter(',')->capture_default_str();
    cmd->add_option("--d", options.d_values, "Comma-separated d values")->delimiter(',')->capture_default_str();
    cmd->add_option("--out", options.out, "Report prefix: writes <out>.tsv and <out>.txt (default: stdout only)");
    cmd->add_flag("--exclude-synthetic", options.exclude_synthetic, "Drop origin=synthetic bank pairs")
        ->capture_default_str();
    return cmd;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Retrieval-augmented many-shot caption translation and chrF++ evaluation"};
    app.set_version_flag("--version", RAGMT_VERSION);
    app.require_subcommand(1);
    app.fallthrough();

    ragmt::cli::CommonOptions common;
    app.add_option("--backend", common.backend, "Generation backend: mock, openai-chat, gemini, or an adapter name")
        ->capture_default_str();
    app.add_option("--cache", common.cache, "Response cache file (default: in-memory only)");
    app.add_option("--max-concurrency", common.max_concurrency, "Concurrent generation calls")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    app.add_flag("--keep-going", common.keep_going, "Record failures and continue; exit code 2 if any failed")
        ->capture_default_str();
    app.add_flag("--holdout-self", common.holdout_self, "Never use an example as its own dev exemplar")
        ->capture_default_str();
    app.add_option("--adapters", common.adapters, "JSON file with extra HTTP adapter definitions")
        ->check(CLI::ExistingFile);
    app.add_option("--profile-config", common.profile_config, "JSON file overriding language profile fields")
        ->check(CLI::ExistingFile);
    app.add_option("--template-dir", common.template_dir, "Directory of <template_id>.txt system prompts")
        ->check(CLI::ExistingDirectory);
    app.add_option("--template", common.template_id, "Template id (default: the language profile's)");
    app.add_option("--model", common.generation.model_id, "Model id sent to the backend")->capture_default_str();
    app.add_option("--temperature", common.generation.temperature, "Sampling temperature")->capture_default_str();
    app.add_option("--max-output-tokens", common.generation.max_output_tokens, "Generation length cap")
        ->capture_default_str();
    app.add_flag("--thinking", common.generation.thinking_enabled, "Enable model thinking")->capture_default_str();
    app.add_option("--k1", common.bm25.k1, "BM25 k1")->capture_default_str();
    app.add_option("--b", common.bm25.b, "BM25 b")->capture_default_str();

    ragmt::cli::IndexOptions index_options;
    ragmt::cli::TranslateOptions translate_options;
    ragmt::cli::ScoreOptions score_options;
    ragmt::cli::SweepOptions sweep_options;
    std::optional<std::size_t> translate_r;
    std::optional<std::size_t> translate_d;
    bool split_punctuation = false;

    auto* index_cmd = add_index(app, index_options);
    auto* translate_cmd = add_translate(app, translate_options, translate_r, translate_d);
    auto* score_cmd = add_score(app, score_options, split_punctuation);
    auto* sweep_cmd = add_sweep(app, sweep_options);

    CLI11_PARSE(app, argc, argv);

    try {
        if (index_cmd->parsed()) return ragmt::cli::cmd_index(index_options, common, std::cout, std::cerr);
        if (translate_cmd->parsed()) {
            translate_options.r = translate_r;
            translate_options.d = translate_d;
            return ragmt::cli::cmd_translate(translate_options, common, std::cout, std::cerr);
        }
        if (score_cmd->parsed()) {
            if (split_punctuation) score_options.params.word_tokenizer = ragmt::WordTokenizer::split_punctuation;
            return ragmt::cli::cmd_score(score_options, std::cout, std::cerr);
        }
        if (sweep_cmd->parsed()) return ragmt::cli::cmd_sweep(sweep_options, common, std::cout, std::cerr);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return ragmt::cli::kExitError;
    }
    return ragmt::cli::kExitError;
}
