#include "cotc/errors.hpp"
#include "cotc/reward.hpp"

#include <doctest.h>

#include <string>

using namespace cotc;
using namespace cotc::reward;

namespace {

// think region with n_skip [SKIP] markers among n_steps steps, plus a tail.
std::string completion_with(int n_skip, int n_steps, const std::string& tail) {
    std::string think;
    for (int i = 0; i < n_steps; ++i) {
        if (i > 0) think += "\n\n";
        think += i < n_skip ? "[SKIP]" : "step " + std::to_string(i);
    }
    return "<think>" + think + "</think>" + tail;
}

} // namespace

TEST_CASE("boxed answer extraction") {
    CHECK(extract_answer("...</think> The answer is \\boxed{42}.") == "42");
    CHECK(extract_answer("\\boxed{1/2} then \\boxed{3/4}") == "3/4");
    CHECK(extract_answer("nested \\boxed{\\frac{1}{2}} done") == "\\frac{1}{2}");
    CHECK(extract_answer("no answer here") == std::nullopt);
    // Unbalanced boxed group falls through to an earlier complete one.
    CHECK(extract_answer("\\boxed{7} and \\boxed{oops") == "7");
}

TEST_CASE("numeric fallback after the think region") {
    CHECK(extract_answer("<think>3 plus 4</think> so we get 7") == "7");
    CHECK(extract_answer("<think>99</think> nothing numeric") == std::nullopt);
    CHECK(extract_answer("<think>t</think> first 12 then -3.5") == "-3.5");
    CHECK(extract_answer("<think>t</think> total 1,234,567 items") == "1234567");
    // No </think>: the fallback has no answer region to scan.
    CHECK(extract_answer("numbers 1 2 3 without tags") == std::nullopt);
}

TEST_CASE("answer normalization and equivalence") {
    CHECK(normalize_answer("  $1,234$ ") == "1234");
    CHECK(answers_equal("42", " 42 "));
    CHECK(answers_equal("0.5", "1/2"));
    CHECK(answers_equal("-3/6", "-0.5"));
    CHECK(answers_equal("2.50", "5/2"));
    CHECK(answers_equal("$18$", "18"));
    CHECK(!answers_equal("0.5", "0.6"));
    CHECK(!answers_equal("x+1", "1+x")); // strings only, no CAS
    CHECK(!answers_equal("", ""));
}

TEST_CASE("correctness reward") {
    const RewardConfig config;
    CHECK(correctness_reward("...\\boxed{42}", "42", config) == 2.0);
    CHECK(correctness_reward("...\\boxed{41}", "42", config) == 0.0);
    CHECK(correctness_reward("no answer", "42", config) == 0.0);
    CHECK(correctness_reward("...\\boxed{0.5}", "1/2", config) == 2.0);
    CHECK_THROWS_AS(correctness_reward("x", "", config), ValueError);
}

TEST_CASE("skip ratio tiers with exact boundaries") {
    const RewardConfig config;
    auto ratio_of = [&](int n_skip, int n_steps) {
        std::string think;
        for (int i = 0; i < n_steps; ++i) {
            if (i > 0) think += "\n\n";
            think += i < n_skip ? "[SKIP]" : "s" + std::to_string(i);
        }
        return skip_ratio_reward(think, config);
    };
    // 8/10 = kappa_high exactly -> top tier.
    CHECK(std::get<0>(ratio_of(8, 10)) == 1.0);
    CHECK(std::get<0>(ratio_of(7, 10)) == 0.5);
    // 5/10 = kappa_low exactly -> middle tier.
    CHECK(std::get<0>(ratio_of(5, 10)) == 0.5);
    CHECK(std::get<0>(ratio_of(4, 10)) == 0.0);
    CHECK(std::get<0>(ratio_of(10, 10)) == 1.0);
    // Empty think region: ratio 0/max(1,0).
    const auto [r, n_skip, n_steps] = skip_ratio_reward("", config);
    CHECK(r == 0.0);
    CHECK(n_skip == 0);
    CHECK(n_steps == 0);
}

TEST_CASE("skip counting requires the exact marker") {
    const RewardConfig config;
    const auto [r, n_skip, n_steps] = skip_ratio_reward("[SKIP]\n\n [SKIP] \n\nskip\n\n[skip]", config);
    CHECK(n_steps == 4);
    CHECK(n_skip == 2); // trimmed "[SKIP]" counts, lowercase and words do not
    CHECK(r == 0.5);
}

TEST_CASE("count penalties use strict thresholds") {
    const RewardConfig config;
    CHECK(skip_num_penalty(0, config) == 0.0);
    CHECK(skip_num_penalty(100, config) == 0.0);
    CHECK(skip_num_penalty(101, config) == -1.0);
    CHECK(length_penalty(0, config) == 0.0);
    CHECK(length_penalty(3500, config) == 0.0);
    CHECK(length_penalty(3501, config) == -1.0);
    CHECK(length_penalty(4096, config) == -1.0);
}

TEST_CASE("composite scores match hand sums") {
    const RewardConfig config;
    // correct answer, ratio 0.8, 50 skips is impossible with ratio 0.8 of
    // <=62 steps, so build the exact structures instead.
    {
        // 8 of 10 skipped, correct, short response.
        const auto b = score(completion_with(8, 10, " \\boxed{5}"), "5", 1200, config);
        CHECK(b.correctness == 2.0);
        CHECK(b.skip_ratio_reward == 1.0);
        CHECK(b.skip_num_penalty == 0.0);
        CHECK(b.length_penalty == 0.0);
        CHECK(b.total == doctest::Approx(3.0));
    }
    {
        // wrong answer, ratio 0.2, long response.
        const auto b = score(completion_with(2, 10, " \\boxed{9}"), "5", 4000, config);
        CHECK(b.total == doctest::Approx(-1.0));
    }
    {
        // correct, ratio exactly 0.5, 120 skips -> 2.0 + 0.5 - 1.0 + 0.
        const auto b = score(completion_with(120, 240, " \\boxed{5}"), "5", 1000, config);
        CHECK(b.correctness == 2.0);
        CHECK(b.skip_ratio_reward == 0.5);
        CHECK(b.skip_num_penalty == -1.0);
        CHECK(b.length_penalty == 0.0);
        CHECK(b.total == doctest::Approx(1.5));
    }
}

TEST_CASE("total equals the component sum and stays in range") {
    const RewardConfig config;
    for (int n_skip : {0, 3, 101, 150}) {
        for (int tokens : {10, 3500, 5000}) {
            for (const char* truth : {"5", "7"}) {
                const auto b =
                    score(completion_with(n_skip, 150, " \\boxed{5}"), truth, tokens, config);
                CHECK(std::abs(b.total - (b.correctness + b.skip_ratio_reward +
                                          b.skip_num_penalty + b.length_penalty)) <= 1e-12);
                CHECK(b.total >= -2.0);
                CHECK(b.total <= 3.0);
            }
        }
    }
}

TEST_CASE("ground truth never touches the non-correctness components") {
    const RewardConfig config;
    const std::string completion = completion_with(6, 10, " \\boxed{5}");
    const auto a = score(completion, "5", 100, config);
    const auto b = score(completion, "999", 100, config);
    CHECK(a.skip_ratio_reward == b.skip_ratio_reward);
    CHECK(a.skip_num_penalty == b.skip_num_penalty);
    CHECK(a.length_penalty == b.length_penalty);
    CHECK(a.correctness != b.correctness);
}

TEST_CASE("tier reward is monotone in the ratio") {
    const RewardConfig config;
    double prev = -1.0;
    for (int n_skip = 0; n_skip <= 20; ++n_skip) {
        std::string think;
        for (int i = 0; i < 20; ++i) {
            if (i > 0) think += "\n\n";
            think += i < n_skip ? "[SKIP]" : "s";
        }
        const double r = std::get<0>(skip_ratio_reward(think, config));
        CHECK(r >= prev);
        prev = r;
    }
}

TEST_CASE("custom comparator is honored") {
    const RewardConfig config;
    auto never = [](const std::string&, const std::string&) { return false; };
    CHECK(correctness_reward("\\boxed{42}", "42", config, never) == 0.0);
}
