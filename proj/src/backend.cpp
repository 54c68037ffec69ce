#include "cotc/backend.hpp"

#include "cotc/errors.hpp"
#include "cotc/rng.hpp"

#include <httplib.h>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <condition_variable>
#include <cstdlib>
#include <mutex>
#include <thread>

namespace cotc::backend {

namespace {

using json = nlohmann::json;

// Counting semaphore with a runtime limit; std::counting_semaphore bakes the
// ceiling into the type.
class Slots {
public:
    explicit Slots(int count) : available_(count) {}

    void acquire() {
        std::unique_lock lock(mu_);
        cv_.wait(lock, [&] { return available_ > 0; });
        --available_;
    }

    void release() {
        {
            std::lock_guard lock(mu_);
            ++available_;
        }
        cv_.notify_one();
    }

private:
    std::mutex mu_;
    std::condition_variable cv_;
    int available_;
};

struct SlotGuard {
    explicit SlotGuard(Slots& s) : slots(s) { slots.acquire(); }
    ~SlotGuard() { slots.release(); }
    Slots& slots;
};

struct ParsedEndpoint {
    std::string base;      // scheme://host:port for httplib::Client
    std::string path_root; // anything after the authority, e.g. "/v1"
};

ParsedEndpoint parse_endpoint(const std::string& url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) {
        throw ValueError("endpoint_url must include a scheme, got '" + url + "'");
    }
    const auto path_begin = url.find('/', scheme_end + 3);
    if (path_begin == std::string::npos) return {url, ""};
    std::string root = url.substr(path_begin);
    while (!root.empty() && root.back() == '/') root.pop_back();
    return {url.substr(0, path_begin), root};
}

} // namespace

void validate(const BackendConfig& config) {
    if (config.endpoint_url.empty()) throw ValueError("endpoint_url must be set");
    if (config.api_key_env.empty()) throw ValueError("api_key_env must name a variable");
    if (config.top_logprobs_k < 1) throw ValueError("top_logprobs_k must be >= 1");
    if (config.max_tokens < 1) throw ValueError("max_tokens must be >= 1");
    if (config.max_in_flight < 1) throw ValueError("max_in_flight must be >= 1");
    if (config.retry.max_attempts < 1) throw ValueError("retry.max_attempts must be >= 1");
    if (config.retry.base_backoff_ms < 0) throw ValueError("retry.base_backoff_ms must be >= 0");
}

struct CompletionClient::Impl {
    BackendConfig config;
    ParsedEndpoint endpoint;
    Slots slots;
    std::mutex jitter_mu;
    SplitMix64 jitter;

    Impl(BackendConfig cfg)
        : config(std::move(cfg)),
          endpoint(parse_endpoint(config.endpoint_url)),
          slots(config.max_in_flight),
          jitter(static_cast<std::uint64_t>(
              std::chrono::steady_clock::now().time_since_epoch().count())) {}

    std::string api_key() const {
        const char* key = std::getenv(config.api_key_env.c_str());
        if (!key || !*key) {
            throw AuthError("environment variable " + config.api_key_env + " is not set");
        }
        return key;
    }

    // One POST /completions with bounded retries. Returns the parsed body.
    json post_completion(const std::string& prompt) {
        const std::string key = api_key();
        json body;
        body["model"] = config.model;
        body["prompt"] = prompt;
        body["max_tokens"] = config.max_tokens;
        body["temperature"] = config.temperature;
        body["logprobs"] = config.top_logprobs_k;
        body["echo"] = false;
        const std::string payload = body.dump();

        std::string last_error;
        for (int attempt = 0; attempt < config.retry.max_attempts; ++attempt) {
            if (attempt > 0) backoff(attempt);
            SlotGuard guard(slots);
            httplib::Client client(endpoint.base);
            client.set_connection_timeout(5, 0);
            client.set_read_timeout(300, 0);
            httplib::Headers headers{{"Authorization", "Bearer " + key}};
            auto res = client.Post(endpoint.path_root + "/completions", headers, payload,
                                   "application/json");
            if (!res) {
                last_error = "connection failed (" + httplib::to_string(res.error()) + ")";
                continue;
            }
            if (res->status == 401 || res->status == 403) {
                throw AuthError("backend rejected credentials with status " +
                                std::to_string(res->status));
            }
            if (res->status == 429 || res->status >= 500) {
                last_error = "status " + std::to_string(res->status);
                continue;
            }
            if (res->status != 200) {
                throw ProtocolError("unexpected status " + std::to_string(res->status) + ": " +
                                    res->body.substr(0, 200));
            }
            try {
                return json::parse(res->body);
            } catch (const json::exception& e) {
                throw ProtocolError(std::string("response is not valid JSON: ") + e.what());
            }
        }
        throw TransportError("request failed after " + std::to_string(config.retry.max_attempts) +
                             " attempts: " + last_error);
    }

    void backoff(int attempt) {
        double u;
        {
            std::lock_guard lock(jitter_mu);
            u = jitter.uniform01();
        }
        // Full jitter: sleep uniformly within the exponential window.
        const double window =
            static_cast<double>(config.retry.base_backoff_ms) * std::pow(2.0, attempt - 1);
        const auto ms = static_cast<long>(std::min(window, 10'000.0) * u);
        if (ms > 0) std::this_thread::sleep_for(std::chrono::milliseconds(ms));
    }
};

CompletionClient::CompletionClient(BackendConfig config) {
    validate(config);
    impl_ = std::make_unique<Impl>(std::move(config));
}

CompletionClient::~CompletionClient() = default;

const BackendConfig& CompletionClient::config() const { return impl_->config; }

namespace {

const json& first_choice(const json& response) {
    auto it = response.find("choices");
    if (it == response.end() || !it->is_array() || it->empty()) {
        throw ProtocolError("response carries no choices");
    }
    return (*it)[0];
}

} // namespace

std::string CompletionClient::complete_text(const std::string& prompt) {
    const json response = impl_->post_completion(prompt);
    const json& choice = first_choice(response);
    auto text = choice.find("text");
    if (text == choice.end() || !text->is_string()) {
        throw ProtocolError("choice carries no text field");
    }
    return text->get<std::string>();
}

TraceRecord CompletionClient::fetch_trace(const std::string& id, const std::string& problem) {
    const json response = impl_->post_completion(problem + "\n");
    const json& choice = first_choice(response);

    auto lp = choice.find("logprobs");
    if (lp == choice.end() || lp->is_null()) {
        throw ProtocolError("response lacks logprobs; request them from the backend");
    }
    const auto tokens_it = lp->find("tokens");
    const auto top_it = lp->find("top_logprobs");
    if (tokens_it == lp->end() || !tokens_it->is_array() || top_it == lp->end() ||
        !top_it->is_array() || top_it->size() != tokens_it->size()) {
        throw ProtocolError("logprobs object lacks aligned tokens/top_logprobs arrays");
    }

    TraceRecord record;
    record.id = id;
    record.problem = problem;
    record.meta["model"] = impl_->config.model;
    record.meta["temperature"] = std::to_string(impl_->config.temperature);
    record.meta["max_tokens"] = std::to_string(impl_->config.max_tokens);
    record.meta["logprobs_depth"] = std::to_string(impl_->config.top_logprobs_k);

    std::string completion;
    record.tokens.reserve(tokens_it->size());
    for (std::size_t i = 0; i < tokens_it->size(); ++i) {
        const json& tok = (*tokens_it)[i];
        if (!tok.is_string()) throw ProtocolError("token entries must be strings");
        TokenRecord t;
        t.text = tok.get<std::string>();
        completion += t.text;

        const json& top = (*top_it)[i];
        if (!top.is_object() || top.empty()) {
            throw ProtocolError("top_logprobs entry " + std::to_string(i) +
                                " is not a non-empty object");
        }
        std::vector<std::pair<std::string, double>> lps;
        lps.reserve(top.size());
        for (const auto& [alt, alt_lp] : top.items()) {
            if (!alt_lp.is_number()) throw ProtocolError("logprob values must be numbers");
            lps.emplace_back(alt, alt_lp.get<double>());
        }
        std::sort(lps.begin(), lps.end(), [](const auto& a, const auto& b) {
            if (a.second != b.second) return a.second > b.second;
            return a.first < b.first;
        });
        t.top_logprobs = std::move(lps);
        record.tokens.push_back(std::move(t));
    }
    record.raw_completion = std::move(completion);

    // Truncated thinking is recorded, not discarded.
    if (record.raw_completion.find("</think>") == std::string::npos) {
        record.meta["truncated"] = "true";
    }

    validate(record); // every fetched trace passes trace_model validation
    return record;
}

} // namespace cotc::backend
