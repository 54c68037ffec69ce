#pragma once

#include "cotc/trace.hpp"

#include <span>
#include <vector>

namespace cotc {

struct SegmentedTrace; // segmenter.hpp

namespace entropy {

// Everything here is base-2: token entropy is the Shannon entropy of the
// next-token distribution in bits, step entropy is the plain sum of token
// entropies over the step's span. No per-length normalization.

enum class Mode {
    Exact,          // every token carried backend-supplied entropy_bits
    TopKLowerBound, // at least one token was computed from truncated logprobs
};

struct Report {
    std::vector<double> per_token_bits; // aligned to TraceRecord.tokens
    std::vector<double> per_step_bits;  // aligned to SegmentedTrace.steps
    Mode mode = Mode::Exact;
};

// -sum p log2 p over a full distribution. Input must be non-negative and sum
// to 1 within 1e-6 (renormalized internally; larger deviation is an error,
// not silently fixed). 0*log 0 := 0; probabilities below 1e-15 count as 0.
double token_entropy_from_distribution(std::span<const double> probs);

// Entropy from truncated top-k logprobs (natural log, descending). The
// unobserved tail mass max(0, 1 - sum exp) is lumped into a single outcome,
// which never overestimates the full-vocabulary entropy.
double token_entropy_from_topk(std::span<const std::pair<std::string, double>> top_logprobs);

// Per-token dispatch: backend-supplied entropy_bits wins, else top-k.
// Throws MissingEntropySource when the token has neither.
double token_bits(const TokenRecord& token);

// Exact sum of per-token bits over a span. Throws RangeError if out of bounds.
double step_entropy(std::span<const double> per_token_bits, TokenSpan span);

// Full report for a segmented trace. Mode is Exact iff every token of the
// record had entropy_bits supplied. Tokens outside the think region that
// lack both sources score 0 bits; inside the think region they are an error.
Report analyze(const SegmentedTrace& segmented);

} // namespace entropy
} // namespace cotc
