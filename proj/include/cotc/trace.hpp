#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace cotc {

// ─── Canonical data model for inference traces ───────────────
//
// One TraceRecord per problem instance. Tokens are aligned to the raw
// completion by exact surface-text concatenation; records that fail that
// alignment are rejected at parse time, never repaired.
//
// Logprobs are stored in natural log (what completion APIs return);
// entropy is always reported in bits. The conversion lives in the entropy
// engine, not here.

struct TokenRecord {
    std::string text;                              // surface form
    std::optional<std::int64_t> token_id;          // backend tokenizer id
    std::optional<double> entropy_bits;            // precomputed per-token entropy, bits
    // (token_text, logprob) pairs, natural log, sorted descending by logprob.
    std::optional<std::vector<std::pair<std::string, double>>> top_logprobs;

    bool operator==(const TokenRecord&) const = default;
};

struct TraceRecord {
    std::string id;                                // unique per dataset
    std::string problem;                           // user query
    std::string raw_completion;                    // full generated text incl. <think>...</think>
    std::vector<TokenRecord> tokens;               // generation order, concatenates to raw_completion
    std::optional<std::string> ground_truth;
    std::map<std::string, std::string> meta;       // model name, sampling params, unknown input fields

    bool operator==(const TraceRecord&) const = default;
};

// Half-open index range into TraceRecord.tokens.
struct TokenSpan {
    std::size_t begin = 0;
    std::size_t end = 0;

    std::size_t size() const { return end - begin; }
    bool empty() const { return begin >= end; }
    bool operator==(const TokenSpan&) const = default;
};

// Half-open character range into raw_completion.
struct CharSpan {
    std::size_t begin = 0;
    std::size_t end = 0;

    std::size_t size() const { return end - begin; }
    bool empty() const { return begin >= end; }
    bool operator==(const CharSpan&) const = default;
};

// One reasoning step of the thinking region.
struct Step {
    std::size_t index = 0;      // 0-based position among steps
    TokenSpan token_span;       // tokens whose text covers this step
    std::string text;           // verbatim step text (no surrounding delimiters)
    double entropy_bits = 0.0;  // sum of member token entropies

    bool operator==(const Step&) const = default;
};

enum class Strategy { LowEntropy, HighEntropy, Random };

std::string to_string(Strategy s);
// Accepts the CLI spellings "low-entropy" | "high-entropy" | "random".
Strategy strategy_from_string(const std::string& s);

// Elements of a compressed CoT, in original step order.
struct KeptStep {
    std::size_t index = 0;
    std::string text;
    bool operator==(const KeptStep&) const = default;
};
struct Skip {
    std::size_t index = 0;      // first original index the marker stands for
    bool operator==(const Skip&) const = default;
};
using CotElement = std::variant<KeptStep, Skip>;

struct CompressedCot {
    std::string source_id;
    double kappa = 0.0;
    Strategy strategy = Strategy::LowEntropy;
    std::vector<CotElement> elements;   // original order, every step index appears once
    std::string inference_prompt;       // problem + compressed think + </think> scaffold
};

// ─── Validation ───────────────────────────────────────────────
// Throws ValueError on invariant violations local to one token,
// AlignmentError / ValueError on record-level violations.
void validate(const TokenRecord& token);
void validate(const TraceRecord& record);

// ─── Line-delimited serialization ─────────────────────────────
// One JSON object per line; field order is fixed so two serializations of
// the same record are byte-identical. parse_trace_line inverts serialize_trace.
//
// Required keys: "id", "problem", "raw_completion", "tokens". Unknown
// top-level keys are preserved as strings in meta so third-party trace
// producers round-trip.
TraceRecord parse_trace_line(const std::string& line);
std::string serialize_trace(const TraceRecord& record);

} // namespace cotc
