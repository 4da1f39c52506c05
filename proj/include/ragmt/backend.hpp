#pragma once

// Text generation backends and the content-addressed response cache.
//
// HTTP backends share one contract: POST a JSON body built from a request
// template, read the completion from a JSON pointer into the response. A
// provider is described entirely by an AdapterConfig, so new providers need
// configuration, not code.

#include <array>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <unordered_map>
#include <utility>
#include <vector>

#include <httplib.h>
#include <json.hpp>
#include <openssl/evp.h>

#include "ragmt/corpus.hpp"
#include "ragmt/error.hpp"
#include "ragmt/promptkit.hpp"

namespace ragmt {

struct GenerationConfig {
    double temperature = 0.0;
    std::size_t max_output_tokens = 120;
    bool thinking_enabled = false;
    std::string model_id = "gemini-2.5-flash";

    bool operator==(const GenerationConfig&) const = default;
};

/// A generation request failed. `status` is set when the remote answered.
class GenerationError : public Error {
public:
    GenerationError(const std::string& what, int attempts, std::optional<int> status = std::nullopt,
                    std::string body_excerpt = {})
        : Error(what), attempts_(attempts), status_(status), body_excerpt_(std::move(body_excerpt)) {}

    int attempts() const noexcept { return attempts_; }
    std::optional<int> status() const noexcept { return status_; }
    const std::string& body_excerpt() const noexcept { return body_excerpt_; }

private:
    int attempts_;
    std::optional<int> status_;
    std::string body_excerpt_;
};

// ---------------------------------------------------------------------------
// Cache keys

struct CacheKey {
    std::string digest; ///< 64 lowercase hex characters (SHA-256)

    bool operator==(const CacheKey&) const = default;
};

namespace detail {

inline std::string sha256_hex(std::string_view data) {
    std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
    unsigned int length = 0;
    if (EVP_Digest(data.data(), data.size(), digest.data(), &length, EVP_sha256(), nullptr) != 1) {
        throw Error("SHA-256 digest failed");
    }
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    out.reserve(length * 2);
    for (unsigned int i = 0; i < length; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 0xF]);
    }
    return out;
}

// Length-prefixed so that no two field tuples serialize identically.
inline void append_field(std::string& out, std::string_view field) {
    out.append(std::to_string(field.size())).push_back(':');
    out.append(field);
}

} // namespace detail

inline CacheKey make_cache_key(const AssembledPrompt& prompt, const GenerationConfig& config) {
    std::string material;
    material.reserve(prompt.system_text.size() + prompt.user_text.size() + 128);
    detail::append_field(material, "ragmt-cache-v1");
    detail::append_field(material, config.model_id);
    detail::append_field(material, prompt.system_text);
    detail::append_field(material, prompt.user_text);
    char temperature[32];
    std::snprintf(temperature, sizeof temperature, "%.17g", config.temperature);
    detail::append_field(material, temperature);
    detail::append_field(material, std::to_string(config.max_output_tokens));
    detail::append_field(material, config.thinking_enabled ? "1" : "0");
    return {detail::sha256_hex(material)};
}

// ---------------------------------------------------------------------------
// Response cache

/// JSON Lines file of {"key", "response", "model", "ts"} records. Reads may
/// run concurrently; writes are serialized and appended immediately. An
/// empty path keeps the cache in memory only.
class ResponseCache {
public:
    ResponseCache() = default;

    explicit ResponseCache(std::filesystem::path path) : path_(std::move(path)) {
        if (path_.empty()) return;
        if (std::filesystem::exists(path_)) load();
        if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
        out_.open(path_, std::ios::binary | std::ios::app);
        if (!out_) throw Error("cannot open cache file '" + path_.string() + "' for writing");
    }

    std::optional<std::string> get(const CacheKey& key) const {
        std::shared_lock lock(mutex_);
        const auto it = entries_.find(key.digest);
        if (it == entries_.end()) return std::nullopt;
        return it->second;
    }

    void put(const CacheKey& key, const std::string& response, std::string_view model) {
        std::unique_lock lock(mutex_);
        if (!entries_.emplace(key.digest, response).second) return;
        if (!out_.is_open()) return;
        const nlohmann::json record{{"key", key.digest},
                                    {"response", response},
                                    {"model", model},
                                    {"ts", static_cast<std::int64_t>(std::time(nullptr))}};
        out_ << record.dump() << '\n';
        out_.flush();
        if (!out_) throw Error("failed to append to cache file '" + path_.string() + "'");
    }

    std::size_t size() const {
        std::shared_lock lock(mutex_);
        return entries_.size();
    }

    const std::filesystem::path& path() const noexcept { return path_; }

private:
    void load() {
        std::ifstream in(path_, std::ios::binary);
        if (!in) throw Error("cannot read cache file '" + path_.string() + "'");
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (line.empty()) continue;
            try {
                const auto record = nlohmann::json::parse(line);
                entries_.insert_or_assign(record.at("key").get<std::string>(),
                                          record.at("response").get<std::string>());
            } catch (const nlohmann::json::exception& e) {
                throw ParseError(line_no, std::string("malformed cache record: ") + e.what(), path_.string());
            }
        }
    }

    std::filesystem::path path_;
    mutable std::shared_mutex mutex_;
    std::unordered_map<std::string, std::string> entries_;
    std::ofstream out_;
};

// ---------------------------------------------------------------------------
// Backends

class Backend {
public:
    virtual ~Backend() = default;

    /// Raw completion for one prompt. Counts as one backend call.
    std::string complete(const AssembledPrompt& prompt, const GenerationConfig& config) {
        calls_.fetch_add(1, std::memory_order_relaxed);
        return do_complete(prompt, config);
    }

    std::size_t calls() const noexcept { return calls_.load(std::memory_order_relaxed); }
    virtual std::string name() const = 0;

protected:
    virtual std::string do_complete(const AssembledPrompt& prompt, const GenerationConfig& config) = 0;

private:
    std::atomic<std::size_t> calls_{0};
};

/// Answers with the target of the pair whose Spanish side equals the query,
/// or echoes the query when there is none.
class MockOracleBackend final : public Backend {
public:
    explicit MockOracleBackend(std::span<const ParallelPair> pairs) {
        for (const ParallelPair& pair : pairs) table_.emplace(pair.source_es, pair.target);
    }

    std::string name() const override { return "mock"; }

protected:
    std::string do_complete(const AssembledPrompt& prompt, const GenerationConfig&) override {
        const std::optional<std::string> query = extract_query(prompt.user_text);
        if (!query) throw Error("mock backend: prompt has no query line");
        const auto it = table_.find(*query);
        return it == table_.end() ? *query : it->second;
    }

private:
    std::unordered_map<std::string, std::string> table_;
};

inline std::unique_ptr<Backend> mock_oracle(std::span<const ParallelPair> pairs) {
    return std::make_unique<MockOracleBackend>(pairs);
}

/// Backend backed by an arbitrary function; handy for tests and scripting.
class CallbackBackend final : public Backend {
public:
    using Fn = std::function<std::string(const AssembledPrompt&, const GenerationConfig&)>;

    explicit CallbackBackend(Fn fn, std::string name = "callback") : fn_(std::move(fn)), name_(std::move(name)) {}
    std::string name() const override { return name_; }

protected:
    std::string do_complete(const AssembledPrompt& prompt, const GenerationConfig& config) override {
        return fn_(prompt, config);
    }

private:
    Fn fn_;
    std::string name_;
};

struct RetryPolicy {
    int max_attempts = 3;
    std::chrono::milliseconds initial_backoff{1000};
    std::chrono::milliseconds max_backoff{4000};
    std::vector<int> retry_statuses{429, 503};
    std::function<void(std::chrono::milliseconds)> sleep = [](std::chrono::milliseconds d) {
        std::this_thread::sleep_for(d);
    };

    /// Delay before attempt `attempt` (2-based): 1s, 2s, 4s, capped.
    std::chrono::milliseconds backoff_before(int attempt) const {
        auto delay = initial_backoff;
        for (int i = 2; i < attempt && delay < max_backoff; ++i) delay *= 2;
        return std::min(delay, max_backoff);
    }

    bool retryable(int status) const {
        return std::find(retry_statuses.begin(), retry_statuses.end(), status) != retry_statuses.end();
    }
};

struct AdapterConfig {
    std::string name;
    std::string base_url;         ///< scheme://host[:port]
    std::string path;             ///< may contain {{model}}
    std::string credential_env;   ///< environment variable holding the key; empty for none
    std::string auth_header = "Authorization";
    std::string auth_prefix = "Bearer ";
    nlohmann::json request_template = nlohmann::json::object();
    std::string response_pointer; ///< JSON pointer to the completion text
    nlohmann::json extra_fields = nlohmann::json::object();
    nlohmann::json thinking_disabled_fields = nlohmann::json::object();
    nlohmann::json thinking_enabled_fields = nlohmann::json::object();
    int timeout_seconds = 120;

    static AdapterConfig from_json(const nlohmann::json& j) {
        AdapterConfig config;
        try {
            config.name = j.at("name").get<std::string>();
            config.base_url = j.at("base_url").get<std::string>();
            config.path = j.at("path").get<std::string>();
            config.credential_env = j.value("credential_env", std::string{});
            config.auth_header = j.value("auth_header", config.auth_header);
            config.auth_prefix = j.value("auth_prefix", config.auth_prefix);
            config.request_template = j.at("request_template");
            config.response_pointer = j.at("response_pointer").get<std::string>();
            config.extra_fields = j.value("extra_fields", nlohmann::json::object());
            config.thinking_disabled_fields = j.value("thinking_disabled_fields", nlohmann::json::object());
            config.thinking_enabled_fields = j.value("thinking_enabled_fields", nlohmann::json::object());
            config.timeout_seconds = j.value("timeout_seconds", config.timeout_seconds);
        } catch (const nlohmann::json::exception& e) {
            throw Error("invalid adapter config: " + std::string(e.what()));
        }
        return config;
    }
};

namespace detail {

inline std::string replace_all(std::string text, std::string_view from, std::string_view to) {
    for (std::size_t pos = text.find(from); pos != std::string::npos; pos = text.find(from, pos + to.size())) {
        text.replace(pos, from.size(), to);
    }
    return text;
}

inline nlohmann::json fill_template(const nlohmann::json& node, const AssembledPrompt& prompt,
                                    const GenerationConfig& config) {
    if (node.is_object()) {
        nlohmann::json out = nlohmann::json::object();
        for (const auto& [key, value] : node.items()) out[key] = fill_template(value, prompt, config);
        return out;
    }
    if (node.is_array()) {
        nlohmann::json out = nlohmann::json::array();
        for (const auto& value : node) out.push_back(fill_template(value, prompt, config));
        return out;
    }
    if (!node.is_string()) return node;
    const auto& text = node.get_ref<const std::string&>();
    if (text == "{{system}}") return prompt.system_text;
    if (text == "{{user}}") return prompt.user_text;
    if (text == "{{temperature}}") return config.temperature;
    if (text == "{{max_tokens}}") return config.max_output_tokens;
    if (text == "{{thinking}}") return config.thinking_enabled;
    return replace_all(text, "{{model}}", config.model_id);
}

inline std::string excerpt(std::string_view body, std::size_t limit = 200) {
    return std::string(body.substr(0, limit));
}

} // namespace detail

/// Request body for one prompt under an adapter.
inline nlohmann::json build_request_body(const AdapterConfig& adapter, const AssembledPrompt& prompt,
                                         const GenerationConfig& config) {
    nlohmann::json body = detail::fill_template(adapter.request_template, prompt, config);
    body.merge_patch(detail::fill_template(adapter.extra_fields, prompt, config));
    body.merge_patch(config.thinking_enabled ? adapter.thinking_enabled_fields : adapter.thinking_disabled_fields);
    return body;
}

class HttpBackend final : public Backend {
public:
    explicit HttpBackend(AdapterConfig adapter, RetryPolicy retry = {})
        : adapter_(std::move(adapter)), retry_(std::move(retry)) {
        if (retry_.max_attempts < 1) throw Error("retry policy needs at least one attempt");
    }

    std::string name() const override { return adapter_.name; }
    const AdapterConfig& adapter() const noexcept { return adapter_; }

protected:
    std::string do_complete(const AssembledPrompt& prompt, const GenerationConfig& config) override {
        httplib::Headers headers;
        if (!adapter_.credential_env.empty()) {
            const char* credential = std::getenv(adapter_.credential_env.c_str());
            if (credential == nullptr || *credential == '\0') {
                throw GenerationError("environment variable " + adapter_.credential_env + " is not set", 0);
            }
            headers.emplace(adapter_.auth_header, adapter_.auth_prefix + credential);
        }
        const std::string body = build_request_body(adapter_, prompt, config).dump();
        const std::string path = detail::replace_all(adapter_.path, "{{model}}", config.model_id);

        std::string last_failure;
        std::optional<int> last_status;
        std::string last_body;
        for (int attempt = 1; attempt <= retry_.max_attempts; ++attempt) {
            if (attempt > 1) retry_.sleep(retry_.backoff_before(attempt));
            httplib::Client client(adapter_.base_url);
            client.set_connection_timeout(std::chrono::seconds(30));
            client.set_read_timeout(std::chrono::seconds(adapter_.timeout_seconds));
            const httplib::Result result = client.Post(path, headers, body, "application/json");
            if (!result) {
                last_failure = "transport error: " + httplib::to_string(result.error());
                last_status.reset();
                continue;
            }
            const int status = result->status;
            if (status >= 200 && status < 300) return extract_completion(result->body, attempt);
            if (!retry_.retryable(status)) {
                throw GenerationError(adapter_.name + ": remote returned status " + std::to_string(status) + ": " +
                                          detail::excerpt(result->body),
                                      attempt, status, detail::excerpt(result->body));
            }
            last_failure = "status " + std::to_string(status);
            last_status = status;
            last_body = detail::excerpt(result->body);
        }
        throw GenerationError(adapter_.name + ": retries exhausted after " + std::to_string(retry_.max_attempts) +
                                  " attempts (" + last_failure + ")",
                              retry_.max_attempts, last_status, last_body);
    }

private:
    std::string extract_completion(const std::string& body, int attempt) const {
        try {
            const auto response = nlohmann::json::parse(body);
            const auto& text = response.at(nlohmann::json::json_pointer(adapter_.response_pointer));
            if (!text.is_string()) throw Error("completion field is not a string");
            return text.get<std::string>();
        } catch (const std::exception& e) {
            throw GenerationError(adapter_.name + ": cannot read completion at '" + adapter_.response_pointer +
                                      "': " + e.what(),
                                  attempt, std::nullopt, detail::excerpt(body));
        }
    }

    AdapterConfig adapter_;
    RetryPolicy retry_;
};

/// Adapters shipped with the tool: "openai-chat" and "gemini".
inline std::map<std::string, AdapterConfig> builtin_adapters() {
    std::map<std::string, AdapterConfig> adapters;

    AdapterConfig openai;
    openai.name = "openai-chat";
    openai.base_url = "https://api.openai.com";
    openai.path = "/v1/chat/completions";
    openai.credential_env = "OPENAI_API_KEY";
    openai.request_template = {
        {"model", "{{model}}"},
        {"messages", {{{"role", "system"}, {"content", "{{system}}"}}, {{"role", "user"}, {"content", "{{user}}"}}}},
        {"temperature", "{{temperature}}"},
        {"max_tokens", "{{max_tokens}}"}};
    openai.response_pointer = "/choices/0/message/content";
    adapters.emplace(openai.name, openai);

    AdapterConfig gemini;
    gemini.name = "gemini";
    gemini.base_url = "https://generativelanguage.googleapis.com";
    gemini.path = "/v1beta/models/{{model}}:generateContent";
    gemini.credential_env = "GEMINI_API_KEY";
    gemini.auth_header = "x-goog-api-key";
    gemini.auth_prefix = "";
    gemini.request_template = {
        {"systemInstruction", {{"parts", {{{"text", "{{system}}"}}}}}},
        {"contents", {{{"role", "user"}, {"parts", {{{"text", "{{user}}"}}}}}}},
        {"generationConfig", {{"temperature", "{{temperature}}"}, {"maxOutputTokens", "{{max_tokens}}"}}}};
    gemini.thinking_disabled_fields = {{"generationConfig", {{"thinkingConfig", {{"thinkingBudget", 0}}}}}};
    gemini.response_pointer = "/candidates/0/content/parts/0/text";
    adapters.emplace(gemini.name, gemini);

    return adapters;
}

/// Reads adapters from a JSON file holding an array or {"adapters": [...]}.
inline std::vector<AdapterConfig> load_adapters(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open adapter config '" + path.string() + "'");
    nlohmann::json config;
    try {
        config = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw Error("adapter config '" + path.string() + "': " + e.what());
    }
    const nlohmann::json& list = config.is_object() && config.contains("adapters") ? config["adapters"] : config;
    if (!list.is_array()) throw Error("adapter config '" + path.string() + "' must hold an array of adapters");
    std::vector<AdapterConfig> adapters;
    for (const auto& entry : list) adapters.push_back(AdapterConfig::from_json(entry));
    return adapters;
}

/// One generation with caching: a cache hit never reaches the backend.
inline std::string generate(Backend& backend, const AssembledPrompt& prompt, const GenerationConfig& config,
                            ResponseCache* cache = nullptr) {
    std::optional<CacheKey> key;
    if (cache != nullptr) {
        key = make_cache_key(prompt, config);
        if (auto hit = cache->get(*key)) return *std::move(hit);
    }
    std::string text = backend.complete(prompt, config);
    if (unicode::is_blank(text)) throw Error("empty generation");
    if (cache != nullptr) cache->put(*key, text, config.model_id);
    return text;
}

} // namespace ragmt
