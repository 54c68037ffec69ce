#pragma once

#include "cotc/trace.hpp"

#include <cstdint>
#include <memory>
#include <string>

namespace cotc::backend {

struct RetryPolicy {
    int max_attempts = 4;
    int base_backoff_ms = 100;
};

struct BackendConfig {
    std::string endpoint_url;                  // e.g. http://127.0.0.1:8080/v1
    std::string api_key_env = "OPENAI_API_KEY"; // environment variable NAME, never the key
    std::string model;
    int top_logprobs_k = 20;
    int max_tokens = 4096;
    double temperature = 0.6;
    int max_in_flight = 4;
    RetryPolicy retry;
};

void validate(const BackendConfig& config);

/**
 * Client for OpenAI-compatible completion endpoints with logprobs.
 *
 * POSTs {endpoint}/completions with {"model","prompt","max_tokens",
 * "temperature","logprobs": k,"echo": false} and expects per-token "tokens",
 * "token_logprobs" and "top_logprobs" arrays in the response.
 *
 * Concurrency is capped at max_in_flight across all threads sharing the
 * client; retries use exponential backoff with full jitter and a hard
 * attempt cap. The API key is read from the environment variable named in
 * the config and is never logged.
 */
class CompletionClient {
public:
    explicit CompletionClient(BackendConfig config);
    ~CompletionClient();

    CompletionClient(const CompletionClient&) = delete;
    CompletionClient& operator=(const CompletionClient&) = delete;

    /**
     * Fetches one trace. The returned record's tokens carry top_logprobs at
     * the requested depth; raw_completion is reconstructed from the returned
     * tokens. A completion with no "</think>" is not discarded: it is
     * flagged with meta["truncated"] = "true".
     *
     * Throws AuthError (401/403 or missing key), ProtocolError (response
     * lacks logprobs), TransportError (after bounded retries).
     */
    TraceRecord fetch_trace(const std::string& id, const std::string& problem);

    // Completes an arbitrary prompt and returns the raw text (used when a
    // sweep regenerates final answers from compressed prompts).
    std::string complete_text(const std::string& prompt);

    const BackendConfig& config() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

} // namespace cotc::backend
