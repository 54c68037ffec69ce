#pragma once

#include "cotc/trace.hpp"

#include <string>
#include <vector>

namespace cotc {

// A trace split into its thinking region and "\n\n"-delimited steps.
struct SegmentedTrace {
    TraceRecord source;
    CharSpan think_span;        // characters strictly between <think> and </think>
    std::vector<Step> steps;    // ordered, disjoint token spans, entropies filled
    std::string tail;           // text after </think>, the final-answer region
};

namespace segmenter {

/**
 * Splits raw text into step character ranges using the delimiter rule shared
 * by segment() and the reward engine's step counting:
 *
 *   - the delimiter is the literal two-character sequence "\n\n"; runs of 3+
 *     newlines count as one boundary,
 *   - leading/trailing newline runs belong to the delimiter, not to a step,
 *   - empty and whitespace-only segments are dropped.
 *
 * Returned ranges are relative to `text` and strictly ascending.
 */
std::vector<CharSpan> split_steps(const std::string& text);

// Maps character ranges to covering token ranges. A token made purely of
// delimiter characters belongs to no step; a token mixing delimiter and
// content characters goes to the step owning its first content character.
// Throws TokenBoundaryError when one token carries content from two steps.
std::vector<TokenSpan> step_token_spans(const TraceRecord& record,
                                        const std::vector<CharSpan>& char_ranges);

// Extracts the single <think>...</think> block, splits it into steps and
// resolves token spans. Step entropies are summed from per-token entropy.
// Throws MissingThinkTags / MultipleThinkBlocks / TokenBoundaryError.
SegmentedTrace segment(TraceRecord record);

// Total tokens covered by step spans (the "thinking token" count used for
// reduction ratios; delimiter and tag tokens are not counted).
std::size_t think_token_count(const SegmentedTrace& segmented);

} // namespace segmenter
} // namespace cotc
