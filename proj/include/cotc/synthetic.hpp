#pragma once

#include "cotc/trace.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace cotc::synth {

// ─── Exact synthetic language model ──────────────────────────
//
// A bounded-context (order <= 3) symbol model with exact conditional rows.
// Small enough to enumerate its full joint distribution, which is what the
// information-theoretic oracles need: every entropy and mutual-information
// quantity can be computed by exhaustive summation instead of sampling.

enum class SymbolKind {
    Content,    // step / answer material
    Delimiter,  // renders as "\n\n", separates steps
    ThinkClose, // renders as "</think>", separates steps from the answer
};

struct Symbol {
    std::string text;
    SymbolKind kind = SymbolKind::Content;
};

struct SyntheticLm {
    std::vector<Symbol> vocab;
    int order = 3;            // context length bound, m <= 3
    std::uint64_t seed = 0;
    // Context key -> probability row over vocab (sums to 1 within 1e-12).
    // A context with no row is terminal: generation ends there.
    std::unordered_map<std::uint64_t, std::vector<double>> transition;

    // Packs the last <= order symbol ids into a key. Shorter contexts near
    // the sequence start get distinct keys from full-length ones.
    std::uint64_t context_key(std::span<const int> recent) const;
};

// Checks row widths, masses (1 within 1e-12) and entry ranges.
void validate(const SyntheticLm& lm);

// Fixed step structure of the model's support.
struct StepLayout {
    std::vector<int> step_lengths; // content symbols per step, each 1 or 2
    int answer_len = 1;            // answer symbols after </think>, 1 or 2
};

/**
 * Builds a randomly parameterized LM whose support realizes the layout
 * exactly: step_i content symbols, a distinct delimiter symbol after every
 * step but the last, the think-close symbol, then the answer symbols.
 *
 * Content and answer positions get random full-support rows over the content
 * alphabet; structural positions are deterministic. Step lengths <= 2 keep a
 * structural symbol inside every order-3 context, so one stationary table
 * can express the whole layout without collisions.
 */
SyntheticLm make_structured_lm(const StepLayout& layout, int n_content, std::uint64_t seed);

// Draws a random layout within the enumerable envelope used by the
// bound-verification suite: 3-4 steps, |V| <= 6, sequence length <= 12.
StepLayout random_layout(std::uint64_t seed, int* n_content_out);

enum class GenMode { Greedy, Sample };

/**
 * Generates one trace from the model: "<think>" + symbols + answer, wrapped
 * as a validated TraceRecord. Every token carries entropy_bits computed
 * exactly from its conditional row. Greedy picks the argmax symbol (ties to
 * the lowest id); Sample draws with SplitMix64(sample_seed).
 *
 * Throws NonTermination if the model runs past the hard length cap.
 */
TraceRecord synth_generate(const std::string& problem_id, const SyntheticLm& lm,
                           GenMode mode = GenMode::Greedy, std::uint64_t sample_seed = 0);

struct JointSequence {
    std::vector<int> symbols;
    double prob = 0.0;
};

/**
 * Exhaustively enumerates every sequence in the model's support with its
 * exact probability. Sequences still running at max_len are cut there, so
 * the probabilities always total 1. Throws ExplosionError past sequence_cap
 * sequences (10^7 by default).
 */
std::vector<JointSequence> exact_joint(const SyntheticLm& lm, std::size_t max_len,
                                       std::size_t sequence_cap = 10'000'000);

// ─── Synthetic task family for desk-scale sweeps ─────────────
//
// Deterministically generated reasoning tasks whose ideal reader is exactly
// computable: the answer is a two-bit value spelled out inside two
// high-entropy "key" steps; every other step is near-deterministic filler.
// An evaluator that sees both digit markers answers correctly; a missing
// marker falls back to the digit 0. That makes accuracy under any masking
// scheme an exact function of which tokens survive.

struct TaskProfile {
    int min_filler_steps = 8;
    int max_filler_steps = 18;
    int min_filler_tokens = 3; // tokens per filler step
    int max_filler_tokens = 6;
    int min_tail_tokens = 0;   // extra answer-region padding after the boxed answer
    int max_tail_tokens = 0;
};

// The i-th task of a seeded family. Answer bits cycle through all four
// combinations, so family-level accuracies are exact quarters when markers
// are unreadable.
TraceRecord make_task(std::uint64_t family_seed, int index, const TaskProfile& profile = {});

// The idealized model continuation: reads the digit markers that survived
// compression and answers; unreadable digits default to 0. Returns the
// predicted answer string.
std::string task_answer_from_think(const std::string& think_text);

} // namespace cotc::synth
