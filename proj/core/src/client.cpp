#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include "aor/client.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <random>
#include <sstream>
#include <thread>

#include <unistd.h>

#include <nlohmann/json.hpp>

namespace aor {

using nlohmann::json;

// ============================================================================
// Temperature defaults
// ============================================================================

namespace {

const TemperatureRule kTemperatureRules[] = {
    {"llama", 0.6},
    {"mixtral", 0.7},
    {"mistral", 0.7},
};

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

} // namespace

std::span<const TemperatureRule> default_temperature_rules() {
    return kTemperatureRules;
}

double default_temperature(const std::string& model_name,
                           std::span<const TemperatureRule> rules) {
    const std::string name = lower(model_name);
    for (const auto& rule : rules) {
        if (name.rfind(lower(rule.prefix), 0) == 0) return rule.temperature;
    }
    return 1.0;
}

double default_temperature(const std::string& model_name) {
    return default_temperature(model_name, default_temperature_rules());
}

// ============================================================================
// Cache key
// ============================================================================

namespace {

std::string render_temperature(double t) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), t);
    return std::string(buf, res.ptr);
}

std::uint64_t fnv1a64(const std::string& data) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

} // namespace

std::string cache_key(const std::string& model, const std::string& prompt,
                      const SamplingParams& params) {
    std::string canonical = "v1|" + model + "|" + render_temperature(params.temperature) +
                            "|" + std::to_string(params.max_tokens) + "|" +
                            std::to_string(params.sample_tag) + "|" + prompt;
    std::uint64_t h = fnv1a64(canonical);
    char buf[17];
    static const char* hex = "0123456789abcdef";
    for (int i = 15; i >= 0; --i) {
        buf[i] = hex[h & 0xF];
        h >>= 4;
    }
    buf[16] = '\0';
    return std::string(buf, 16);
}

// ============================================================================
// sample_chains
// ============================================================================

std::vector<Completion> sample_chains(CompletionClient& client,
                                      const std::string& question_prompt,
                                      int count, SamplingParams params) {
    if (count < 0) throw std::invalid_argument("sample_chains: count must be >= 0");
    std::vector<Completion> completions;
    completions.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        SamplingParams p = params;
        p.sample_tag = params.sample_tag + i;
        completions.push_back(client.complete(question_prompt, p));
    }
    return completions;
}

// ============================================================================
// DiskCache
// ============================================================================

DiskCache::DiskCache(std::filesystem::path dir) : dir_(std::move(dir)) {
    std::filesystem::create_directories(dir_);
}

std::optional<Completion> DiskCache::lookup(const std::string& model,
                                            const std::string& prompt,
                                            const SamplingParams& params) const {
    const auto path = dir_ / (cache_key(model, prompt, params) + ".jsonl");
    std::ifstream in(path);
    if (!in) return std::nullopt;
    std::string request_line, response_line;
    if (!std::getline(in, request_line) || !std::getline(in, response_line)) {
        return std::nullopt;
    }
    try {
        json req = json::parse(request_line);
        if (req.value("record", "") != "request" ||
            req.value("model", "") != model ||
            req.value("prompt", "") != prompt ||
            req.value("sample_tag", -1) != params.sample_tag ||
            req.value("max_tokens", -1) != params.max_tokens ||
            req.value("temperature", std::string()) !=
                render_temperature(params.temperature)) {
            return std::nullopt; // stale or colliding entry: miss
        }
        json resp = json::parse(response_line);
        if (resp.value("record", "") != "response") return std::nullopt;
        Completion c;
        c.text = resp.at("text").get<std::string>();
        c.usage.input_tokens = resp.value("input_tokens", 0);
        c.usage.output_tokens = resp.value("output_tokens", 0);
        c.cached = true;
        return c;
    } catch (const json::exception&) {
        return std::nullopt; // corrupt entry: miss (will be rewritten)
    }
}

void DiskCache::store(const Entry& entry) const {
    const std::string key = cache_key(entry.model, entry.prompt, entry.params);
    const auto path = dir_ / (key + ".jsonl");
    const auto tmp = dir_ / (key + ".tmp." + std::to_string(::getpid()) + "." +
                             std::to_string(std::hash<std::thread::id>{}(
                                 std::this_thread::get_id())));
    {
        json req{{"record", "request"},
                 {"model", entry.model},
                 {"temperature", render_temperature(entry.params.temperature)},
                 {"max_tokens", entry.params.max_tokens},
                 {"sample_tag", entry.params.sample_tag},
                 {"prompt", entry.prompt}};
        json resp{{"record", "response"},
                  {"text", entry.text},
                  {"input_tokens", entry.usage.input_tokens},
                  {"output_tokens", entry.usage.output_tokens}};
        std::ofstream out(tmp, std::ios::trunc);
        out << req.dump() << "\n" << resp.dump() << "\n";
        if (!out) {
            throw std::runtime_error("cache write failed: " + tmp.string());
        }
    }
    // Atomic publish; concurrent writers of identical content race benignly.
    std::filesystem::rename(tmp, path);
}

// ============================================================================
// HttpCompletionClient
// ============================================================================

struct HttpCompletionClient::Http {
    std::unique_ptr<httplib::Client> client;
    std::string path_prefix;
};

namespace {

/// Splits "https://host:port/v1" into origin + path prefix.
std::pair<std::string, std::string> split_base_url(const std::string& base_url) {
    std::size_t scheme = base_url.find("://");
    if (scheme == std::string::npos) {
        throw std::invalid_argument("base_url must include a scheme: " + base_url);
    }
    std::size_t path = base_url.find('/', scheme + 3);
    if (path == std::string::npos) return {base_url, ""};
    std::string prefix = base_url.substr(path);
    while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
    return {base_url.substr(0, path), prefix};
}

} // namespace

HttpCompletionClient::HttpCompletionClient(
    ModelEndpoint endpoint, std::optional<std::filesystem::path> cache_dir)
    : endpoint_(std::move(endpoint)), http_(std::make_unique<Http>()) {
    if (cache_dir) cache_.emplace(*cache_dir);
    auto [origin, prefix] = split_base_url(endpoint_.base_url);
    http_->client = std::make_unique<httplib::Client>(origin);
    http_->client->set_connection_timeout(endpoint_.timeout);
    http_->client->set_read_timeout(endpoint_.timeout);
    http_->path_prefix = prefix;
}

HttpCompletionClient::~HttpCompletionClient() = default;

void HttpCompletionClient::set_sleep_hook(
    std::function<void(std::chrono::milliseconds)> hook) {
    sleep_hook_ = std::move(hook);
}

Completion HttpCompletionClient::complete(const std::string& prompt,
                                          const SamplingParams& params) {
    if (prompt.empty()) throw std::invalid_argument("complete: prompt must be non-empty");
    if (cache_) {
        if (auto hit = cache_->lookup(endpoint_.model_name, prompt, params)) {
            std::lock_guard lock(ledger_mu_);
            cached_total_ += hit->usage;
            return *hit;
        }
    }
    Completion fresh = perform_request(prompt, params);
    if (cache_) {
        cache_->store(DiskCache::Entry{endpoint_.model_name, params, prompt,
                                       fresh.text, fresh.usage});
    }
    {
        std::lock_guard lock(ledger_mu_);
        billed_ += fresh.usage;
    }
    return fresh;
}

Completion HttpCompletionClient::perform_request(const std::string& prompt,
                                                 const SamplingParams& params) {
    json body{{"model", endpoint_.model_name},
              {"temperature", params.temperature},
              {"max_tokens", params.max_tokens},
              {"messages", json::array({json{{"role", "user"}, {"content", prompt}}})}};
    const std::string payload = body.dump();
    httplib::Headers headers;
    if (!endpoint_.api_key.empty()) {
        headers.emplace("Authorization", "Bearer " + endpoint_.api_key);
    }

    static thread_local std::mt19937 jitter_rng{std::random_device{}()};
    std::uniform_real_distribution<double> jitter(0.5, 1.5);

    std::string last_failure;
    for (int attempt = 0; attempt <= endpoint_.max_retries; ++attempt) {
        if (attempt > 0) {
            auto delay = std::chrono::milliseconds(static_cast<std::int64_t>(
                endpoint_.backoff_initial_ms * (1 << (attempt - 1)) * jitter(jitter_rng)));
            if (sleep_hook_) sleep_hook_(delay);
            else if (delay.count() > 0) std::this_thread::sleep_for(delay);
        }
        {
            std::lock_guard lock(ledger_mu_);
            ++network_calls_;
        }
        auto result = http_->client->Post(http_->path_prefix + "/chat/completions",
                                          headers, payload, "application/json");
        if (!result) {
            last_failure = "connection error: " + httplib::to_string(result.error());
            continue;
        }
        const int status = result->status;
        if (status == 429 || (status >= 500 && status < 600)) {
            last_failure = "HTTP " + std::to_string(status);
            continue;
        }
        if (status != 200) {
            throw ProtocolError("endpoint returned HTTP " + std::to_string(status) +
                                ": " + result->body.substr(0, 200));
        }
        try {
            json response = json::parse(result->body);
            Completion c;
            c.text = response.at("choices").at(0).at("message").at("content")
                         .get<std::string>();
            if (response.contains("usage")) {
                c.usage.input_tokens = response["usage"].value("prompt_tokens", 0);
                c.usage.output_tokens = response["usage"].value("completion_tokens", 0);
            }
            return c;
        } catch (const json::exception& e) {
            throw ProtocolError(std::string("malformed endpoint response: ") + e.what());
        }
    }
    throw TransportError("request failed after " +
                         std::to_string(endpoint_.max_retries + 1) +
                         " attempts; last failure: " + last_failure);
}

TokenUsage HttpCompletionClient::billed_usage() const {
    std::lock_guard lock(ledger_mu_);
    return billed_;
}

TokenUsage HttpCompletionClient::cached_usage() const {
    std::lock_guard lock(ledger_mu_);
    return cached_total_;
}

std::int64_t HttpCompletionClient::network_calls() const {
    std::lock_guard lock(ledger_mu_);
    return network_calls_;
}

// ============================================================================
// ScriptedClient
// ============================================================================

ScriptedClient::ScriptedClient(std::vector<std::string> completions, std::string model)
    : completions_(std::move(completions)), model_(std::move(model)) {
    if (completions_.empty()) {
        throw std::invalid_argument("ScriptedClient needs at least one completion");
    }
}

Completion ScriptedClient::complete(const std::string& prompt,
                                    const SamplingParams& params) {
    if (prompt.empty()) throw std::invalid_argument("complete: prompt must be non-empty");
    {
        std::lock_guard lock(mu_);
        seen_tags_.push_back(params.sample_tag);
    }
    const std::size_t n = completions_.size();
    std::size_t slot = params.sample_tag <= 0
        ? 0
        : static_cast<std::size_t>(params.sample_tag - 1) % n;
    Completion c;
    c.text = completions_[slot];
    // Deterministic synthetic usage so cost plumbing stays exercised offline.
    c.usage.input_tokens = static_cast<std::int64_t>(prompt.size() / 4);
    c.usage.output_tokens = static_cast<std::int64_t>(c.text.size() / 4);
    return c;
}

std::vector<int> ScriptedClient::seen_tags() const {
    std::lock_guard lock(mu_);
    return seen_tags_;
}

} // namespace aor
