#pragma once

// Query -> retrieve -> assemble -> generate -> clean, for a whole dataset.

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "ragmt/backend.hpp"
#include "ragmt/corpus.hpp"
#include "ragmt/error.hpp"
#include "ragmt/postprocess.hpp"
#include "ragmt/promptkit.hpp"
#include "ragmt/retrieval.hpp"

namespace ragmt {

/// Failure while processing one dataset example.
class ExampleError : public Error {
public:
    ExampleError(std::string example_id, const std::string& what)
        : Error("example '" + example_id + "': " + what), example_id_(std::move(example_id)) {}

    const std::string& example_id() const noexcept { return example_id_; }

private:
    std::string example_id_;
};

/// Runs `task(i)` for i in [0, count) on up to `workers` threads. Once a task
/// throws and `stop_on_error` is set, no new indices are started. Returns
/// the exception of each failed index.
inline std::vector<std::exception_ptr> parallel_for(std::size_t count, std::size_t workers,
                                                    const std::function<void(std::size_t)>& task,
                                                    bool stop_on_error = true) {
    std::vector<std::exception_ptr> errors(count);
    std::atomic<std::size_t> next{0};
    std::atomic<bool> stop{false};
    const auto run = [&] {
        while (!stop.load()) {
            const std::size_t i = next.fetch_add(1);
            if (i >= count) return;
            try {
                task(i);
            } catch (...) {
                errors[i] = std::current_exception();
                if (stop_on_error) stop.store(true);
            }
        }
    };
    const std::size_t threads = std::clamp<std::size_t>(workers, 1, std::max<std::size_t>(count, 1));
    if (threads == 1) {
        run();
    } else {
        std::vector<std::jthread> pool;
        pool.reserve(threads);
        for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(run);
    }
    return errors;
}

struct PipelineOptions {
    std::size_t r = 0;
    std::size_t d = 0;
    bool holdout_self = false;
    bool keep_going = false;
    std::size_t max_concurrency = 4;
    GenerationConfig generation;
};

/// Everything a translation run reads. Nothing here is mutated except the
/// backend's call counter and the cache.
struct PipelineResources {
    const RetrievalBank& bank;
    const Bm25Index& index;
    const LanguageProfile& profile;
    const PromptTemplate& prompt_template; ///< already resolved for the profile
    std::span<const CaptionExample> dev;   ///< source of dev exemplars
    Backend& backend;
    ResponseCache* cache = nullptr;
};

struct TranslationResult {
    std::string example_id;
    std::string caption;
    std::vector<std::string> applied_steps;
    std::size_t retrieved_count = 0;
    std::size_t token_estimate = 0;
    std::optional<std::string> error;
};

inline AssembledPrompt build_prompt(const PipelineResources& res, const PipelineOptions& options,
                                    const CaptionExample& example) {
    const RetrievedSet retrieved = retrieve(res.index, res.bank, example.spanish_caption, options.r);
    const std::vector<ParallelPair> dev_block =
        select_dev_exemplars(res.dev, options.d, example.example_id, options.holdout_self);
    return assemble(res.prompt_template, dev_block, retrieved, example.spanish_caption);
}

inline TranslationResult translate_one(const PipelineResources& res, const PipelineOptions& options,
                                       const CaptionExample& example) {
    TranslationResult result;
    result.example_id = example.example_id;
    const AssembledPrompt prompt = build_prompt(res, options, example);
    result.retrieved_count = prompt.retrieved_block_count;
    result.token_estimate = prompt.token_estimate;
    const std::string raw = generate(res.backend, prompt, options.generation, res.cache);
    CleanCaption caption = clean(raw, res.profile);
    result.caption = std::move(caption.text);
    result.applied_steps = std::move(caption.applied_steps);
    return result;
}

/// Translates `queries` in input order. Without `keep_going` the first
/// failure (in input order) is rethrown as an ExampleError; with it, failed
/// examples get an empty caption and their error message.
inline std::vector<TranslationResult> translate_all(const PipelineResources& res, const PipelineOptions& options,
                                                    std::span<const CaptionExample> queries) {
    std::vector<TranslationResult> results(queries.size());
    const auto errors = parallel_for(
        queries.size(), options.max_concurrency,
        [&](std::size_t i) { results[i] = translate_one(res, options, queries[i]); }, !options.keep_going);

    for (std::size_t i = 0; i < queries.size(); ++i) {
        if (!errors[i]) continue;
        std::string message;
        try {
            std::rethrow_exception(errors[i]);
        } catch (const std::exception& e) {
            message = e.what();
        }
        if (!options.keep_going) throw ExampleError(queries[i].example_id, message);
        results[i] = TranslationResult{};
        results[i].example_id = queries[i].example_id;
        results[i].error = message;
    }
    if (!options.keep_going) {
        // Indices skipped after an early stop have no result; that only
        // happens when some index failed, which was rethrown above.
        for (std::size_t i = 0; i < queries.size(); ++i) {
            if (results[i].example_id.empty()) throw ExampleError(queries[i].example_id, "not processed");
        }
    }
    return results;
}

} // namespace ragmt
