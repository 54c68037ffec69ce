#include "cotc/entropy.hpp"

#include "cotc/errors.hpp"
#include "cotc/segmenter.hpp"

#include <cmath>
#include <string>

namespace cotc::entropy {

namespace {

constexpr double kZeroProb = 1e-15;     // below this a probability counts as 0
constexpr double kMassTolerance = 1e-6; // allowed deviation of total mass from 1

double nats_to_bits_term(double p) {
    // -p * log2(p) with the continuous extension at 0.
    if (p < kZeroProb) return 0.0;
    return -p * std::log2(p);
}

} // namespace

double token_entropy_from_distribution(std::span<const double> probs) {
    if (probs.empty()) throw ValueError("entropy of an empty distribution");
    double sum = 0.0;
    for (double p : probs) {
        if (!std::isfinite(p) || p < 0.0) {
            throw ValueError("distribution entries must be finite and non-negative");
        }
        sum += p;
    }
    if (sum <= 0.0) throw ValueError("distribution sums to zero");
    if (std::abs(sum - 1.0) > kMassTolerance) {
        throw ValueError("distribution mass " + std::to_string(sum) +
                         " deviates from 1 by more than 1e-6");
    }
    double h = 0.0;
    for (double p : probs) h += nats_to_bits_term(p / sum);
    return h < 0.0 ? 0.0 : h;
}

double token_entropy_from_topk(std::span<const std::pair<std::string, double>> top_logprobs) {
    if (top_logprobs.empty()) throw ValueError("top_logprobs must be non-empty");
    double prev = 1.0;
    double mass = 0.0;
    for (const auto& [tok, lp] : top_logprobs) {
        if (lp > 1e-9) {
            throw ValueError("positive logprob " + std::to_string(lp) + " for '" + tok + "'");
        }
        if (lp > prev) throw ValueError("top_logprobs must be sorted descending");
        prev = lp;
        mass += std::exp(std::min(lp, 0.0));
    }
    if (mass > 1.0 + kMassTolerance) {
        throw ValueError("top_logprobs mass " + std::to_string(mass) + " exceeds 1");
    }

    // Observed outcomes keep their probabilities; the unobserved tail is one
    // lumped outcome. When rounding pushes the mass slightly past 1 the
    // observed part is renormalized and the tail is empty.
    const double scale = mass > 1.0 ? 1.0 / mass : 1.0;
    double h = 0.0;
    for (const auto& [tok, lp] : top_logprobs) {
        h += nats_to_bits_term(std::exp(std::min(lp, 0.0)) * scale);
    }
    h += nats_to_bits_term(std::max(0.0, 1.0 - mass));
    return h < 0.0 ? 0.0 : h;
}

double token_bits(const TokenRecord& token) {
    if (token.entropy_bits) {
        const double h = *token.entropy_bits;
        if (!std::isfinite(h) || h < 0.0) throw ValueError("invalid entropy_bits on token");
        return h;
    }
    if (token.top_logprobs) return token_entropy_from_topk(*token.top_logprobs);
    throw MissingEntropySource("token '" + token.text +
                               "' has neither entropy_bits nor top_logprobs");
}

double step_entropy(std::span<const double> per_token_bits, TokenSpan span) {
    if (span.begin > span.end || span.end > per_token_bits.size()) {
        throw RangeError("step span [" + std::to_string(span.begin) + ", " +
                         std::to_string(span.end) + ") out of bounds for " +
                         std::to_string(per_token_bits.size()) + " tokens");
    }
    double sum = 0.0;
    for (std::size_t i = span.begin; i < span.end; ++i) sum += per_token_bits[i];
    return sum;
}

Report analyze(const SegmentedTrace& segmented) {
    const auto& record = segmented.source;
    Report report;
    report.per_token_bits.reserve(record.tokens.size());

    // Character offsets tell us which tokens overlap the think region; only
    // those are required to carry an entropy source.
    std::size_t off = 0;
    bool all_exact = true;
    for (const auto& token : record.tokens) {
        const std::size_t begin = off;
        const std::size_t end = off + token.text.size();
        off = end;
        if (!token.entropy_bits) all_exact = false;
        const bool in_think = begin < segmented.think_span.end && end > segmented.think_span.begin;
        if (!token.entropy_bits && !token.top_logprobs) {
            if (in_think) {
                throw MissingEntropySource("think-region token '" + token.text +
                                           "' has neither entropy_bits nor top_logprobs");
            }
            report.per_token_bits.push_back(0.0);
            continue;
        }
        report.per_token_bits.push_back(token_bits(token));
    }

    report.per_step_bits.reserve(segmented.steps.size());
    for (const auto& step : segmented.steps) {
        report.per_step_bits.push_back(step_entropy(report.per_token_bits, step.token_span));
    }
    report.mode = all_exact ? Mode::Exact : Mode::TopKLowerBound;
    return report;
}

} // namespace cotc::entropy
