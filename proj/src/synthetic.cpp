#include "cotc/synthetic.hpp"

#include "cotc/entropy.hpp"
#include "cotc/errors.hpp"
#include "cotc/rng.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <string_view>

namespace cotc::synth {

namespace {

constexpr std::size_t kGenerationCap = 4096; // symbols per generation

} // namespace

std::uint64_t SyntheticLm::context_key(std::span<const int> recent) const {
    // Base-(V+1) fold; ids are shifted by one so shorter contexts cannot
    // collide with longer ones.
    const std::uint64_t base = vocab.size() + 1;
    std::uint64_t key = 0;
    const std::size_t take = std::min<std::size_t>(recent.size(), static_cast<std::size_t>(order));
    for (std::size_t i = recent.size() - take; i < recent.size(); ++i) {
        key = key * base + static_cast<std::uint64_t>(recent[i] + 1);
    }
    return key;
}

void validate(const SyntheticLm& lm) {
    if (lm.vocab.empty()) throw ValueError("synthetic lm needs a vocabulary");
    if (lm.order < 1 || lm.order > 3) throw ValueError("synthetic lm order must be 1..3");
    for (const auto& [key, row] : lm.transition) {
        if (row.size() != lm.vocab.size()) {
            throw ValueError("transition row width does not match vocabulary");
        }
        double sum = 0.0;
        for (double p : row) {
            if (!std::isfinite(p) || p < 0.0) throw ValueError("transition rows must be non-negative");
            sum += p;
        }
        if (std::abs(sum - 1.0) > 1e-12) {
            throw ValueError("transition row mass deviates from 1 by more than 1e-12");
        }
    }
}

namespace {

void check_layout(const StepLayout& layout, int n_content) {
    if (layout.step_lengths.empty()) throw ValueError("layout needs at least one step");
    for (int len : layout.step_lengths) {
        if (len < 1 || len > 2) {
            // Lengths above 2 push the previous structural symbol out of the
            // order-3 context window and the table stops being well-defined.
            throw ValueError("step lengths must be 1 or 2");
        }
    }
    if (layout.answer_len < 1 || layout.answer_len > 2) {
        throw ValueError("answer length must be 1 or 2");
    }
    if (n_content < 2) throw ValueError("need at least two content symbols");
}

std::vector<int> trim_context(const std::vector<int>& recent, int order) {
    if (recent.size() <= static_cast<std::size_t>(order)) return recent;
    return {recent.end() - order, recent.end()};
}

} // namespace

SyntheticLm make_structured_lm(const StepLayout& layout, int n_content, std::uint64_t seed) {
    check_layout(layout, n_content);
    const int n_steps = static_cast<int>(layout.step_lengths.size());

    SyntheticLm lm;
    lm.order = 3;
    lm.seed = seed;
    static constexpr const char* kContentTexts[] = {"a", "b", "c", "d", "e", "f"};
    if (n_content > 6) throw ValueError("at most six content symbols supported");
    for (int i = 0; i < n_content; ++i) lm.vocab.push_back({kContentTexts[i], SymbolKind::Content});
    const int first_delim = n_content;
    for (int i = 0; i + 1 < n_steps; ++i) lm.vocab.push_back({"\n\n", SymbolKind::Delimiter});
    const int think_close = static_cast<int>(lm.vocab.size());
    lm.vocab.push_back({"</think>", SymbolKind::ThinkClose});

    // The emission schedule the support must realize.
    enum class Slot { Content, Answer, Structural };
    struct Position {
        Slot slot;
        int structural_id = -1;
    };
    std::vector<Position> schedule;
    for (int s = 0; s < n_steps; ++s) {
        for (int k = 0; k < layout.step_lengths[static_cast<std::size_t>(s)]; ++k) {
            schedule.push_back({Slot::Content, -1});
        }
        if (s + 1 < n_steps) schedule.push_back({Slot::Structural, first_delim + s});
    }
    schedule.push_back({Slot::Structural, think_close});
    for (int k = 0; k < layout.answer_len; ++k) schedule.push_back({Slot::Answer, -1});

    SplitMix64 rng(seed);
    // Reachable contexts per position, keyed for deterministic row drawing.
    std::map<std::uint64_t, std::vector<int>> frontier;
    frontier[0] = {};
    for (const auto& pos : schedule) {
        std::map<std::uint64_t, std::vector<int>> next;
        for (const auto& [key, recent] : frontier) {
            if (lm.transition.count(key)) {
                throw StructureError("context key collision while building structured lm");
            }
            std::vector<double> row(lm.vocab.size(), 0.0);
            if (pos.slot == Slot::Structural) {
                row[static_cast<std::size_t>(pos.structural_id)] = 1.0;
            } else {
                double sum = 0.0;
                for (int c = 0; c < n_content; ++c) {
                    const double w = rng.uniform(0.05, 1.0);
                    row[static_cast<std::size_t>(c)] = w;
                    sum += w;
                }
                for (int c = 0; c < n_content; ++c) row[static_cast<std::size_t>(c)] /= sum;
            }
            for (std::size_t id = 0; id < row.size(); ++id) {
                if (row[id] <= 0.0) continue;
                std::vector<int> grown = recent;
                grown.push_back(static_cast<int>(id));
                grown = trim_context(grown, lm.order);
                next.emplace(lm.context_key(grown), std::move(grown));
            }
            lm.transition.emplace(key, std::move(row));
        }
        frontier = std::move(next);
    }
    // Contexts left in the frontier are terminal on purpose: no rows.
    validate(lm);
    return lm;
}

StepLayout random_layout(std::uint64_t seed, int* n_content_out) {
    SplitMix64 rng(seed);
    StepLayout layout;
    const int n_steps = 3 + static_cast<int>(rng.bounded(2)); // 3 or 4
    const int n_content = n_steps == 4 ? 2 : 2 + static_cast<int>(rng.bounded(2));
    layout.answer_len = 1 + static_cast<int>(rng.bounded(2));
    for (int i = 0; i < n_steps; ++i) {
        layout.step_lengths.push_back(1 + static_cast<int>(rng.bounded(2)));
    }
    // Keep total sequence length (content + delimiters + close + answer)
    // inside the enumerable envelope of 12 symbols.
    auto total = [&] {
        int t = n_steps - 1 + 1 + layout.answer_len;
        for (int len : layout.step_lengths) t += len;
        return t;
    };
    std::size_t shrink = 0;
    while (total() > 12) {
        auto& len = layout.step_lengths[shrink++ % layout.step_lengths.size()];
        if (len > 1) --len;
        if (shrink > 16 && total() > 12) layout.answer_len = 1;
    }
    if (n_content_out) *n_content_out = n_content;
    return layout;
}

TraceRecord synth_generate(const std::string& problem_id, const SyntheticLm& lm, GenMode mode,
                           std::uint64_t sample_seed) {
    validate(lm);
    SplitMix64 rng(sample_seed);

    TraceRecord record;
    record.id = problem_id;
    record.problem = "synthetic problem " + problem_id;
    record.meta["generator"] = "synthetic-lm";
    record.meta["mode"] = mode == GenMode::Greedy ? "greedy" : "sample";

    std::string completion = "<think>";
    record.tokens.push_back({"<think>", std::nullopt, 0.0, std::nullopt});

    std::vector<int> recent;
    std::string answer;
    bool after_close = false;
    for (std::size_t emitted = 0;; ++emitted) {
        if (emitted > kGenerationCap) {
            throw NonTermination("synthetic generation exceeded " +
                                 std::to_string(kGenerationCap) + " symbols");
        }
        const auto it = lm.transition.find(lm.context_key(recent));
        if (it == lm.transition.end()) break; // terminal context
        const std::vector<double>& row = it->second;

        std::size_t pick = 0;
        if (mode == GenMode::Greedy) {
            for (std::size_t i = 1; i < row.size(); ++i) {
                if (row[i] > row[pick]) pick = i;
            }
        } else {
            const double u = rng.uniform01();
            double acc = 0.0;
            pick = row.size() - 1;
            for (std::size_t i = 0; i < row.size(); ++i) {
                acc += row[i];
                if (u < acc) {
                    pick = i;
                    break;
                }
            }
        }

        const Symbol& sym = lm.vocab[pick];
        completion += sym.text;
        record.tokens.push_back({sym.text, static_cast<std::int64_t>(pick),
                                 entropy::token_entropy_from_distribution(row), std::nullopt});
        if (after_close) answer += sym.text;
        if (sym.kind == SymbolKind::ThinkClose) after_close = true;

        recent.push_back(static_cast<int>(pick));
        if (recent.size() > static_cast<std::size_t>(lm.order)) recent.erase(recent.begin());
    }

    record.raw_completion = std::move(completion);
    if (!answer.empty()) record.ground_truth = answer;
    cotc::validate(record);
    return record;
}

namespace {

void enumerate_sequences(const SyntheticLm& lm, std::vector<int>& prefix, double prob,
                         std::size_t max_len, std::size_t cap,
                         std::vector<JointSequence>& out) {
    const auto it = lm.transition.find(
        lm.context_key(std::span<const int>(prefix.data(), prefix.size())));
    if (it == lm.transition.end() || prefix.size() >= max_len) {
        if (out.size() >= cap) {
            throw ExplosionError("exact enumeration exceeded " + std::to_string(cap) +
                                 " sequences");
        }
        out.push_back({prefix, prob});
        return;
    }
    const std::vector<double>& row = it->second;
    for (std::size_t id = 0; id < row.size(); ++id) {
        if (row[id] <= 0.0) continue;
        prefix.push_back(static_cast<int>(id));
        enumerate_sequences(lm, prefix, prob * row[id], max_len, cap, out);
        prefix.pop_back();
    }
}

} // namespace

std::vector<JointSequence> exact_joint(const SyntheticLm& lm, std::size_t max_len,
                                       std::size_t sequence_cap) {
    validate(lm);
    std::vector<JointSequence> out;
    std::vector<int> prefix;
    enumerate_sequences(lm, prefix, 1.0, max_len, sequence_cap, out);
    return out;
}

// ─── digits-v1 task family ───────────────────────────────────

namespace {

constexpr std::string_view kFirstMarker = "first digit is";
constexpr std::string_view kSecondMarker = "second digit is";

const char* kVerbs[] = {"check", "note", "recall", "expand", "combine", "simplify", "verify"};
const char* kNouns[] = {"term", "identity", "row", "factor", "case", "bound", "table"};

int parse_digit_after(const std::string& text, std::string_view marker) {
    const std::size_t pos = text.find(marker);
    if (pos == std::string::npos) return -1;
    std::size_t i = pos + marker.size();
    while (i < text.size() && (text[i] == ' ' || text[i] == '\n')) ++i;
    if (i < text.size() && (text[i] == '0' || text[i] == '1')) return text[i] - '0';
    return -1;
}

} // namespace

TraceRecord make_task(std::uint64_t family_seed, int index, const TaskProfile& profile) {
    SplitMix64 rng(family_seed ^ (static_cast<std::uint64_t>(index) * 0x9E3779B97F4A7C15ull +
                                  0xD1B54A32D192ED03ull));
    const int b1 = index & 1;
    const int b2 = (index >> 1) & 1;
    const int value = 2 * b1 + b2;

    const int span = profile.max_filler_steps - profile.min_filler_steps + 1;
    const int n_filler = profile.min_filler_steps + static_cast<int>(rng.bounded(span));
    const int n_steps = n_filler + 2;

    // Two distinct key-step positions.
    const int key1_pos = static_cast<int>(rng.bounded(n_steps));
    int key2_pos = static_cast<int>(rng.bounded(n_steps - 1));
    if (key2_pos >= key1_pos) ++key2_pos;

    TraceRecord record;
    record.id = "task-" + std::to_string(index);
    record.problem = "What value does instrument sequence #" + std::to_string(index) + " encode?";
    record.ground_truth = std::to_string(value);
    record.meta["family"] = "digits-v1";

    std::string completion = "<think>";
    record.tokens.push_back({"<think>", std::nullopt, 0.0, std::nullopt});
    auto push = [&](std::string text, double bits) {
        completion += text;
        record.tokens.push_back({std::move(text), std::nullopt, bits, std::nullopt});
    };

    for (int s = 0; s < n_steps; ++s) {
        if (s > 0) push("\n\n", rng.uniform(0.002, 0.02));
        if (s == key1_pos || s == key2_pos) {
            // Key steps: near-deterministic glue, one high-entropy digit.
            // The first-digit step always outranks the second-digit step.
            const bool first = s == key1_pos;
            const double digit_bits = first ? rng.uniform(3.0, 4.0) : rng.uniform(2.0, 2.9);
            push(first ? "so" : "thus", rng.uniform(1e-4, 1e-3));
            push(" the", rng.uniform(1e-4, 1e-3));
            push(first ? " first" : " second", rng.uniform(1e-4, 1e-3));
            push(" digit", rng.uniform(1e-4, 1e-3));
            push(" is", rng.uniform(1e-4, 1e-3));
            push(std::string(" ") + static_cast<char>('0' + (first ? b1 : b2)), digit_bits);
        } else {
            const int tok_span = profile.max_filler_tokens - profile.min_filler_tokens + 1;
            const int n_tokens =
                profile.min_filler_tokens + static_cast<int>(rng.bounded(tok_span));
            push(kVerbs[rng.bounded(std::size(kVerbs))], rng.uniform(0.02, 0.25));
            for (int t = 1; t + 1 < n_tokens; ++t) {
                push(std::string(" ") + kNouns[rng.bounded(std::size(kNouns))],
                     rng.uniform(0.02, 0.25));
            }
            push(" " + std::to_string(rng.bounded(100)), rng.uniform(0.02, 0.25));
        }
    }

    push("</think>", 0.0);
    push("\nThe", rng.uniform(0.005, 0.05));
    push(" answer", rng.uniform(0.005, 0.05));
    push(" is", rng.uniform(0.005, 0.05));
    push(" \\boxed{" + std::to_string(value) + "}", rng.uniform(0.005, 0.05));
    push(".", rng.uniform(0.005, 0.05));
    if (profile.max_tail_tokens > 0) {
        const int pad_span = profile.max_tail_tokens - profile.min_tail_tokens + 1;
        const int n_pad = profile.min_tail_tokens + static_cast<int>(rng.bounded(pad_span));
        for (int t = 0; t < n_pad; ++t) {
            push(std::string(" ") + kNouns[rng.bounded(std::size(kNouns))],
                 rng.uniform(0.005, 0.05));
        }
    }

    record.raw_completion = std::move(completion);
    cotc::validate(record);
    return record;
}

std::string task_answer_from_think(const std::string& think_text) {
    int d1 = parse_digit_after(think_text, kFirstMarker);
    int d2 = parse_digit_after(think_text, kSecondMarker);
    if (d1 < 0) d1 = 0; // unreadable digits fall back to the prior guess
    if (d2 < 0) d2 = 0;
    return std::to_string(2 * d1 + d2);
}

} // namespace cotc::synth
