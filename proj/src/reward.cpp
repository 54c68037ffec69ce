#include "cotc/reward.hpp"

#include "cotc/errors.hpp"
#include "cotc/segmenter.hpp"

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <optional>

namespace cotc {

void validate(const RewardConfig& config) {
    if (!(config.kappa_low >= 0.0 && config.kappa_low <= config.kappa_high &&
          config.kappa_high <= 1.0)) {
        throw ValueError("reward tiers require 0 <= kappa_low <= kappa_high <= 1");
    }
    if (config.tau_skip_num < 0 || config.tau_length < 0) {
        throw ValueError("tau thresholds must be non-negative");
    }
}

namespace reward {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

// Content of the last "\boxed{...}" whose braces balance; nested groups are
// kept verbatim ("\boxed{\frac{1}{2}}" -> "\frac{1}{2}").
std::optional<std::string> last_boxed_group(const std::string& text) {
    constexpr std::string_view kBoxed = "\\boxed{";
    std::optional<std::string> result;
    std::size_t pos = text.find(kBoxed);
    while (pos != std::string::npos) {
        const std::size_t open = pos + kBoxed.size() - 1; // the '{'
        int depth = 0;
        for (std::size_t i = open; i < text.size(); ++i) {
            if (text[i] == '{') ++depth;
            else if (text[i] == '}' && --depth == 0) {
                result = text.substr(open + 1, i - open - 1);
                break;
            }
        }
        pos = text.find(kBoxed, pos + 1);
    }
    return result;
}

bool is_digit(char c) { return c >= '0' && c <= '9'; }

// Last numeric literal in `text`: optional sign, digits with optional ','
// separators, optional decimal part.
std::optional<std::string> last_numeric_literal(const std::string& text) {
    std::optional<std::string> result;
    std::size_t i = 0;
    while (i < text.size()) {
        if (!is_digit(text[i])) {
            ++i;
            continue;
        }
        std::size_t begin = i;
        if (begin > 0 && text[begin - 1] == '-') --begin;
        while (i < text.size() && (is_digit(text[i]) || (text[i] == ',' && i + 1 < text.size() &&
                                                         is_digit(text[i + 1])))) {
            ++i;
        }
        if (i < text.size() && text[i] == '.' && i + 1 < text.size() && is_digit(text[i + 1])) {
            ++i;
            while (i < text.size() && is_digit(text[i])) ++i;
        }
        result = text.substr(begin, i - begin);
    }
    return result;
}

// Exact rational: value = sign * num / den.
struct Rational {
    __int128 num = 0;
    __int128 den = 1;
};

std::optional<__int128> parse_digits(const std::string& s, std::size_t b, std::size_t e) {
    if (b >= e || e - b > 18) return std::nullopt; // cap keeps products inside __int128
    __int128 v = 0;
    for (std::size_t i = b; i < e; ++i) {
        if (!is_digit(s[i])) return std::nullopt;
        v = v * 10 + (s[i] - '0');
    }
    return v;
}

// Accepts "123", "-4.25" and "a/b" with integer parts. Input is already
// normalized (no commas, no '$').
std::optional<Rational> parse_rational(const std::string& s) {
    if (s.empty()) return std::nullopt;
    if (const auto slash = s.find('/'); slash != std::string::npos) {
        std::string lhs = s.substr(0, slash);
        std::string rhs = s.substr(slash + 1);
        bool neg = false;
        if (!lhs.empty() && (lhs[0] == '-' || lhs[0] == '+')) {
            neg = lhs[0] == '-';
            lhs.erase(0, 1);
        }
        auto num = parse_digits(lhs, 0, lhs.size());
        auto den = parse_digits(rhs, 0, rhs.size());
        if (!num || !den || *den == 0) return std::nullopt;
        return Rational{neg ? -*num : *num, *den};
    }

    std::size_t i = 0;
    bool neg = false;
    if (s[i] == '-' || s[i] == '+') {
        neg = s[i] == '-';
        ++i;
    }
    const std::size_t int_begin = i;
    while (i < s.size() && is_digit(s[i])) ++i;
    const std::size_t int_end = i;

    std::size_t frac_begin = 0;
    std::size_t frac_end = 0;
    if (i < s.size() && s[i] == '.') {
        ++i;
        frac_begin = i;
        while (i < s.size() && is_digit(s[i])) ++i;
        frac_end = i;
        if (frac_end == frac_begin) return std::nullopt;
    }
    if (i != s.size()) return std::nullopt;
    if (int_end == int_begin && frac_end == frac_begin) return std::nullopt;
    // Total significant digits capped so cross products below stay inside
    // __int128.
    if ((int_end - int_begin) + (frac_end - frac_begin) > 18) return std::nullopt;

    __int128 num = 0;
    __int128 den = 1;
    for (std::size_t d = int_begin; d < int_end; ++d) num = num * 10 + (s[d] - '0');
    for (std::size_t d = frac_begin; d < frac_end; ++d) {
        num = num * 10 + (s[d] - '0');
        den *= 10;
    }
    return Rational{neg ? -num : num, den};
}

bool rationals_equal(const Rational& a, const Rational& b) {
    return a.num * b.den == b.num * a.den;
}

} // namespace

std::string normalize_answer(const std::string& answer) {
    std::string s = trim(answer);
    while (s.size() >= 1 && s.front() == '$') s.erase(s.begin());
    while (s.size() >= 1 && s.back() == '$') s.pop_back();
    s = trim(s);
    std::string out;
    out.reserve(s.size());
    for (char c : s) {
        if (c == ',') continue; // thousands separators
        out += c;
    }
    return out;
}

std::optional<std::string> extract_answer(const std::string& completion) {
    if (auto boxed = last_boxed_group(completion)) {
        return normalize_answer(*boxed);
    }
    // Fallback: the last numeric literal in the answer region.
    const std::size_t close = completion.rfind("</think>");
    if (close == std::string::npos) return std::nullopt;
    if (auto num = last_numeric_literal(completion.substr(close + 8))) {
        return normalize_answer(*num);
    }
    return std::nullopt;
}

bool answers_equal(const std::string& a, const std::string& b) {
    const std::string na = normalize_answer(a);
    const std::string nb = normalize_answer(b);
    if (na == nb) return !na.empty();
    const auto ra = parse_rational(na);
    const auto rb = parse_rational(nb);
    return ra && rb && rationals_equal(*ra, *rb);
}

double correctness_reward(const std::string& completion, const std::string& ground_truth,
                          const RewardConfig& config, const AnswerComparator& equal) {
    if (ground_truth.empty()) throw ValueError("ground truth must be non-empty");
    const auto extracted = extract_answer(completion);
    if (!extracted) return 0.0;
    return equal(*extracted, ground_truth) ? config.correct_reward : 0.0;
}

std::tuple<double, int, int> skip_ratio_reward(const std::string& think_text,
                                               const RewardConfig& config) {
    const auto ranges = segmenter::split_steps(think_text);
    int n_steps = static_cast<int>(ranges.size());
    int n_skip = 0;
    for (const auto& r : ranges) {
        if (trim(think_text.substr(r.begin, r.end - r.begin)) == kSkipToken) ++n_skip;
    }
    const double ratio = static_cast<double>(n_skip) / std::max(1, n_steps);
    double r = 0.0;
    if (ratio >= config.kappa_high) {
        r = config.skip_high_reward;
    } else if (ratio >= config.kappa_low) {
        r = config.skip_mid_reward;
    }
    return {r, n_skip, n_steps};
}

double skip_num_penalty(int n_skip, const RewardConfig& config) {
    if (n_skip < 0) throw ValueError("n_skip must be non-negative");
    return n_skip > config.tau_skip_num ? config.penalty : 0.0;
}

double length_penalty(int response_tokens, const RewardConfig& config) {
    if (response_tokens < 0) throw ValueError("response_tokens must be non-negative");
    return response_tokens > config.tau_length ? config.penalty : 0.0;
}

namespace {

// Think region of a free-form completion: text between the first <think> and
// the first </think> after it. Absent tags mean an empty think region.
std::string think_region(const std::string& completion) {
    const std::size_t open = completion.find("<think>");
    if (open == std::string::npos) return {};
    const std::size_t begin = open + 7;
    const std::size_t close = completion.find("</think>", begin);
    if (close == std::string::npos) return {};
    return completion.substr(begin, close - begin);
}

} // namespace

RewardBreakdown score(const std::string& completion, const std::string& ground_truth,
                      int token_count, const RewardConfig& config, const AnswerComparator& equal) {
    validate(config);
    RewardBreakdown b;
    b.diagnostics.extracted_answer = extract_answer(completion);
    if (!ground_truth.empty() && b.diagnostics.extracted_answer) {
        b.correctness =
            equal(*b.diagnostics.extracted_answer, ground_truth) ? config.correct_reward : 0.0;
    }

    const std::string think = think_region(completion);
    auto [ratio_reward, n_skip, n_steps] = skip_ratio_reward(think, config);
    b.skip_ratio_reward = ratio_reward;
    b.diagnostics.n_skip = n_skip;
    b.diagnostics.n_steps = n_steps;
    b.diagnostics.ratio = static_cast<double>(n_skip) / std::max(1, n_steps);
    b.diagnostics.response_tokens = token_count;

    b.skip_num_penalty = skip_num_penalty(n_skip, config);
    b.length_penalty = length_penalty(token_count, config);
    b.total = b.correctness + b.skip_ratio_reward + b.skip_num_penalty + b.length_penalty;
    return b;
}

} // namespace reward
} // namespace cotc
