#pragma once

/**
 * OpenAI-compatible chat-completions client with deterministic on-disk
 * caching, retries, and token accounting.
 *
 * Cache layout: one file per key under the cache directory, named
 * "<key>.jsonl". Each file holds two JSON lines:
 *   {"record":"request","model":...,"temperature":...,"max_tokens":...,
 *    "sample_tag":...,"prompt":...}
 *   {"record":"response","text":...,"input_tokens":...,"output_tokens":...}
 * Files are written atomically (temp file + rename) and are append-only per
 * key: an existing entry is never rewritten with different content. On a
 * hit the stored request metadata is re-verified against the incoming
 * request; any mismatch is treated as a miss.
 *
 * Retries: exponential backoff starting at backoff_initial_ms, doubling,
 * jittered. HTTP 429 and 5xx are retried; other 4xx are not.
 */

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "aor/core.hpp"
#include "aor/errors.hpp"

namespace aor {

struct ModelEndpoint {
    std::string base_url = "https://api.openai.com/v1";
    std::string model_name = "gpt-3.5-turbo";
    std::string api_key;            // read from the environment, never from config files
    std::chrono::seconds timeout{60};
    int max_retries = 3;
    int backoff_initial_ms = 1000;  // 0 disables sleeping (tests)
};

struct SamplingParams {
    double temperature = 1.0;
    int max_tokens = 1024;
    // Distinguishes the i-th sample of an otherwise identical request so
    // repeated draws get distinct cache entries.
    int sample_tag = 0;
};

struct Completion {
    std::string text;
    TokenUsage usage;
    bool cached = false;
};

struct TemperatureRule {
    std::string prefix; // matched case-insensitively against the model name
    double temperature;
};

/// Built-in prefix table: llama -> 0.6, mistral/mixtral -> 0.7,
/// everything else (gpt/claude/...) -> 1.0.
std::span<const TemperatureRule> default_temperature_rules();
double default_temperature(const std::string& model_name);
double default_temperature(const std::string& model_name,
                           std::span<const TemperatureRule> rules);

/// Stable across runs and platforms; any byte change in the inputs changes
/// the key. 16 lowercase hex characters.
std::string cache_key(const std::string& model, const std::string& prompt,
                      const SamplingParams& params);

// ============================================================================
// Client interface
// ============================================================================

class CompletionClient {
public:
    virtual ~CompletionClient() = default;

    /// Returns model text + usage. Throws TransportError after retry
    /// exhaustion, ProtocolError on malformed endpoint responses,
    /// std::invalid_argument on an empty prompt.
    virtual Completion complete(const std::string& prompt,
                                const SamplingParams& params) = 0;

    virtual const std::string& model_name() const = 0;
};

/// Exactly `count` completions with consecutive sample_tags starting at
/// params.sample_tag, so dynamic rounds extend (never repeat) the sample
/// sequence for a question.
std::vector<Completion> sample_chains(CompletionClient& client,
                                      const std::string& question_prompt,
                                      int count, SamplingParams params);

// ============================================================================
// Disk cache
// ============================================================================

class DiskCache {
public:
    explicit DiskCache(std::filesystem::path dir);

    struct Entry {
        std::string model;
        SamplingParams params;
        std::string prompt;
        std::string text;
        TokenUsage usage;
    };

    /// Hit only when the stored request metadata matches exactly.
    std::optional<Completion> lookup(const std::string& model,
                                     const std::string& prompt,
                                     const SamplingParams& params) const;
    void store(const Entry& entry) const;

    const std::filesystem::path& dir() const { return dir_; }

private:
    std::filesystem::path dir_;
};

// ============================================================================
// Live client
// ============================================================================

class HttpCompletionClient : public CompletionClient {
public:
    HttpCompletionClient(ModelEndpoint endpoint,
                         std::optional<std::filesystem::path> cache_dir);
    ~HttpCompletionClient() override;

    Completion complete(const std::string& prompt,
                        const SamplingParams& params) override;
    const std::string& model_name() const override { return endpoint_.model_name; }

    // Usage ledger. billed = fresh network responses; cached = replayed from
    // disk. Safe to read concurrently with complete().
    TokenUsage billed_usage() const;
    TokenUsage cached_usage() const;
    std::int64_t network_calls() const;

    /// Test hook: overrides the backoff sleep.
    void set_sleep_hook(std::function<void(std::chrono::milliseconds)> hook);

private:
    struct Http;
    Completion perform_request(const std::string& prompt, const SamplingParams& params);

    ModelEndpoint endpoint_;
    std::optional<DiskCache> cache_;
    std::unique_ptr<Http> http_;
    std::function<void(std::chrono::milliseconds)> sleep_hook_;

    mutable std::mutex ledger_mu_;
    TokenUsage billed_;
    TokenUsage cached_total_;
    std::int64_t network_calls_ = 0;
};

// ============================================================================
// Scripted client (offline)
// ============================================================================

/// Deterministic completions for offline runs and tests: the i-th sample_tag
/// returns the (i-1 mod size)-th scripted text. Records every tag it serves.
class ScriptedClient : public CompletionClient {
public:
    explicit ScriptedClient(std::vector<std::string> completions,
                            std::string model = "scripted");

    Completion complete(const std::string& prompt,
                        const SamplingParams& params) override;
    const std::string& model_name() const override { return model_; }

    std::vector<int> seen_tags() const;

private:
    std::vector<std::string> completions_;
    std::string model_;
    mutable std::mutex mu_;
    std::vector<int> seen_tags_;
};

} // namespace aor
