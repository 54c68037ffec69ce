#pragma once

#include "cotc/segmenter.hpp"
#include "cotc/trace.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace cotc {

struct PruneConfig {
    PruneConfig() = default;
    PruneConfig(double kappa_, Strategy strategy_, std::uint64_t seed_ = 0,
                std::string skip_token_ = "[SKIP]", bool collapse_skip_runs_ = false);

    double kappa = 0.8;                 // pruning ratio
    Strategy strategy = Strategy::LowEntropy;
    std::uint64_t seed = 0;             // used only by Strategy::Random
    std::string skip_token = "[SKIP]";
    // Render runs of consecutive skips as a single marker. Off by default:
    // each pruned step keeps its own [SKIP].
    bool collapse_skip_runs = false;
};

// Throws ValueError unless 0 <= kappa <= 1 and skip_token is non-empty.
void validate(const PruneConfig& config);

struct PrunePlan {
    std::vector<std::size_t> pruned_indices; // sorted ascending
    std::vector<std::size_t> kept_indices;   // sorted ascending
    std::size_t k_target = 0;                // floor(kappa * N)
    // Selection-order provenance: the full ranking the strategy walked
    // (ascending entropy for LowEntropy, descending for HighEntropy, the
    // seeded permutation for Random). The first k_target entries are pruned.
    std::vector<std::pair<std::size_t, double>> ranking;
};

namespace pruner {

/**
 * Chooses floor(kappa * N) steps to prune.
 *
 *   LowEntropy   the smallest entropies
 *   HighEntropy  the largest
 *   Random       uniform sample without replacement (SplitMix64-seeded
 *                Fisher-Yates; plans for growing kappa are nested)
 *
 * Ties are broken by lower step index first, so identical inputs give
 * identical plans on every platform.
 */
PrunePlan select(std::span<const double> entropies, const PruneConfig& config);

// Joins compressed elements with "\n\n", skips rendered as the skip token.
std::string render_think(const std::vector<CotElement>& elements, const std::string& skip_token);

// Fig. 3 inference scaffold: problem + "\n<think>\n" + think + "\n</think>\n".
std::string build_prompt(const std::string& problem, const std::string& compressed_think);

// Replaces each pruned step with one skip marker, keeps the rest verbatim,
// and assembles the inference prompt. Throws PlanMismatch when the plan does
// not cover the segmented steps exactly.
CompressedCot compress(const SegmentedTrace& segmented, const PrunePlan& plan,
                       const PruneConfig& config);

// Kept-step tokens plus one per skip marker.
std::size_t compressed_think_tokens(const SegmentedTrace& original, const CompressedCot& compressed);

// 1 - (kept think tokens + one per skip marker) / (original think tokens).
// Delimiter and tag tokens are outside both counts. 0 for a stepless trace.
double token_reduction(const SegmentedTrace& original, const CompressedCot& compressed);

// Token count of the whole compressed completion: every trace token minus
// pruned-step tokens, plus one per skip marker. This is the count the
// dataset builder filters on.
std::size_t compressed_total_tokens(const SegmentedTrace& original, const CompressedCot& compressed);

} // namespace pruner
} // namespace cotc
