#include "cotc/pruner.hpp"

#include "cotc/errors.hpp"
#include "cotc/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace cotc {

PruneConfig::PruneConfig(double kappa_, Strategy strategy_, std::uint64_t seed_,
                         std::string skip_token_, bool collapse_skip_runs_)
    : kappa(kappa_),
      strategy(strategy_),
      seed(seed_),
      skip_token(std::move(skip_token_)),
      collapse_skip_runs(collapse_skip_runs_) {
    validate(*this);
}

void validate(const PruneConfig& config) {
    if (!(config.kappa >= 0.0 && config.kappa <= 1.0)) {
        throw ValueError("kappa must lie in [0, 1], got " + std::to_string(config.kappa));
    }
    if (config.skip_token.empty()) throw ValueError("skip_token must be non-empty");
}

namespace pruner {

namespace {

// floor(kappa * N), with a 1e-9 nudge so grid ratios like 0.3 * 10 land on
// the integer they denote instead of one below it (0.3 * 10 == 2.999...96
// in binary). Never over-prunes: the nudge only absorbs representation
// error far smaller than any meaningful fraction of a step.
std::size_t target_count(double kappa, std::size_t n) {
    const double raw = kappa * static_cast<double>(n);
    auto k = static_cast<std::size_t>(std::floor(raw + 1e-9));
    return std::min(k, n);
}

} // namespace

PrunePlan select(std::span<const double> entropies, const PruneConfig& config) {
    validate(config);
    for (double e : entropies) {
        if (!std::isfinite(e)) throw ValueError("step entropies must be finite");
    }

    const std::size_t n = entropies.size();
    PrunePlan plan;
    plan.k_target = target_count(config.kappa, n);

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    switch (config.strategy) {
        case Strategy::LowEntropy:
            std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
                if (entropies[a] != entropies[b]) return entropies[a] < entropies[b];
                return a < b;
            });
            break;
        case Strategy::HighEntropy:
            std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
                if (entropies[a] != entropies[b]) return entropies[a] > entropies[b];
                return a < b;
            });
            break;
        case Strategy::Random: {
            // Full Fisher-Yates permutation; the pruned set is its prefix, so
            // plans for growing kappa are nested for free.
            SplitMix64 rng(config.seed);
            for (std::size_t i = 0; i < n; ++i) {
                const std::size_t j = i + static_cast<std::size_t>(rng.bounded(n - i));
                std::swap(order[i], order[j]);
            }
            break;
        }
    }

    plan.ranking.reserve(n);
    for (std::size_t idx : order) plan.ranking.emplace_back(idx, entropies[idx]);

    plan.pruned_indices.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(plan.k_target));
    plan.kept_indices.assign(order.begin() + static_cast<std::ptrdiff_t>(plan.k_target), order.end());
    std::sort(plan.pruned_indices.begin(), plan.pruned_indices.end());
    std::sort(plan.kept_indices.begin(), plan.kept_indices.end());
    return plan;
}

std::string render_think(const std::vector<CotElement>& elements, const std::string& skip_token) {
    std::string out;
    bool first = true;
    for (const auto& e : elements) {
        if (!first) out += "\n\n";
        first = false;
        if (const auto* kept = std::get_if<KeptStep>(&e)) {
            out += kept->text;
        } else {
            out += skip_token;
        }
    }
    return out;
}

std::string build_prompt(const std::string& problem, const std::string& compressed_think) {
    std::string out;
    out.reserve(problem.size() + compressed_think.size() + 20);
    out += problem;
    out += "\n<think>\n";
    out += compressed_think;
    out += "\n</think>\n";
    return out;
}

CompressedCot compress(const SegmentedTrace& segmented, const PrunePlan& plan,
                       const PruneConfig& config) {
    const std::size_t n = segmented.steps.size();
    if (plan.pruned_indices.size() + plan.kept_indices.size() != n) {
        throw PlanMismatch("plan covers " +
                           std::to_string(plan.pruned_indices.size() + plan.kept_indices.size()) +
                           " steps, trace has " + std::to_string(n));
    }
    std::vector<char> pruned(n, 0);
    for (std::size_t idx : plan.pruned_indices) {
        if (idx >= n) throw PlanMismatch("pruned index " + std::to_string(idx) + " out of range");
        if (pruned[idx]) throw PlanMismatch("step " + std::to_string(idx) + " pruned twice");
        pruned[idx] = 1;
    }
    for (std::size_t idx : plan.kept_indices) {
        if (idx >= n) throw PlanMismatch("kept index " + std::to_string(idx) + " out of range");
        if (pruned[idx]) throw PlanMismatch("step " + std::to_string(idx) + " both pruned and kept");
    }

    CompressedCot cot;
    cot.source_id = segmented.source.id;
    cot.kappa = config.kappa;
    cot.strategy = config.strategy;
    cot.elements.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (pruned[i]) {
            if (config.collapse_skip_runs && !cot.elements.empty() &&
                std::holds_alternative<Skip>(cot.elements.back())) {
                continue;
            }
            cot.elements.emplace_back(Skip{i});
        } else {
            cot.elements.emplace_back(KeptStep{i, segmented.steps[i].text});
        }
    }
    cot.inference_prompt =
        build_prompt(segmented.source.problem, render_think(cot.elements, config.skip_token));
    return cot;
}

std::size_t compressed_think_tokens(const SegmentedTrace& original, const CompressedCot& compressed) {
    std::size_t kept = 0;
    std::size_t skips = 0;
    for (const auto& e : compressed.elements) {
        if (const auto* k = std::get_if<KeptStep>(&e)) {
            if (k->index >= original.steps.size()) {
                throw PlanMismatch("compressed element index out of range");
            }
            kept += original.steps[k->index].token_span.size();
        } else {
            ++skips;
        }
    }
    return kept + skips;
}

double token_reduction(const SegmentedTrace& original, const CompressedCot& compressed) {
    const std::size_t total = segmenter::think_token_count(original);
    if (total == 0) return 0.0;
    const double kept = static_cast<double>(compressed_think_tokens(original, compressed));
    return 1.0 - kept / static_cast<double>(total);
}

std::size_t compressed_total_tokens(const SegmentedTrace& original, const CompressedCot& compressed) {
    const std::size_t all = original.source.tokens.size();
    const std::size_t think_total = segmenter::think_token_count(original);
    return all - think_total + compressed_think_tokens(original, compressed);
}

} // namespace pruner
} // namespace cotc
