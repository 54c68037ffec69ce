#pragma once

#include <functional>
#include <optional>
#include <string>
#include <tuple>

namespace cotc {

struct RewardConfig {
    // Tier thresholds on the skip ratio. The setup section calls these
    // tau_high/tau_low; the reward definition calls them kappa_high/kappa_low.
    // Same two constants.
    double kappa_high = 0.8;
    double kappa_low = 0.5;
    int tau_skip_num = 100;     // skips beyond this incur the penalty
    int tau_length = 3500;      // tokens beyond this incur the penalty
    double correct_reward = 2.0;
    double skip_high_reward = 1.0;
    double skip_mid_reward = 0.5;
    double penalty = -1.0;
};

void validate(const RewardConfig& config);

struct RewardDiagnostics {
    int n_skip = 0;
    int n_steps = 0;
    double ratio = 0.0;
    int response_tokens = 0;
    std::optional<std::string> extracted_answer;
};

struct RewardBreakdown {
    double correctness = 0.0;
    double skip_ratio_reward = 0.0;
    double skip_num_penalty = 0.0;
    double length_penalty = 0.0;
    double total = 0.0; // sum of the four components
    RewardDiagnostics diagnostics;
};

namespace reward {

inline constexpr const char* kSkipToken = "[SKIP]";

// Last balanced \boxed{...} group; failing that, the last numeric literal
// after "</think>"; none if neither exists. Result is normalized.
std::optional<std::string> extract_answer(const std::string& completion);

// Whitespace trimmed, surrounding '$' stripped, ',' thousands separators
// removed. Applied to both sides before any comparison.
std::string normalize_answer(const std::string& answer);

// Normalized string equality, plus exact rational equivalence when both
// sides parse as numbers ("0.5" == "1/2").
bool answers_equal(const std::string& a, const std::string& b);

// Pluggable grading hook: task-specific graders can replace answers_equal.
using AnswerComparator = std::function<bool(const std::string& extracted, const std::string& truth)>;

double correctness_reward(const std::string& completion, const std::string& ground_truth,
                          const RewardConfig& config,
                          const AnswerComparator& equal = answers_equal);

// Tiered reward on n_skip / max(1, n_steps). Steps are counted with the
// segmenter's "\n\n" rule; a step whose trimmed text equals [SKIP] counts
// as skipped. Returns (reward, n_skip, n_steps).
std::tuple<double, int, int> skip_ratio_reward(const std::string& think_text,
                                               const RewardConfig& config);

// penalty iff n_skip strictly exceeds tau_skip_num.
double skip_num_penalty(int n_skip, const RewardConfig& config);

// penalty iff response_tokens strictly exceeds tau_length.
double length_penalty(int response_tokens, const RewardConfig& config);

// Full composite score. token_count is the completion's token count as
// reported by the producing backend; response length counts the whole
// completion, not just the think region.
RewardBreakdown score(const std::string& completion, const std::string& ground_truth,
                      int token_count, const RewardConfig& config,
                      const AnswerComparator& equal = answers_equal);

} // namespace reward
} // namespace cotc
