#include "cotc/entropy.hpp"
#include "cotc/errors.hpp"
#include "cotc/rng.hpp"
#include "cotc/segmenter.hpp"
#include "cotc/synthetic.hpp"

#include <doctest.h>

#include <cmath>
#include <map>

using namespace cotc;
using namespace cotc::synth;

namespace {

// Tiny order-2 chain over {a, b, </think>}: start uniform over {a, b}; an
// initial "a" continues with "b" with probability p_continue; the answer is
// always "a". Terminates because the post-answer context has no row.
SyntheticLm hand_lm(double p_continue) {
    SyntheticLm lm;
    lm.order = 2;
    lm.vocab = {{"a", SymbolKind::Content},
                {"b", SymbolKind::Content},
                {"</think>", SymbolKind::ThinkClose}};
    auto key = [&](std::initializer_list<int> ids) {
        std::vector<int> v(ids);
        return lm.context_key(v);
    };
    lm.transition[key({})] = {0.5, 0.5, 0.0};
    lm.transition[key({0})] = {0.0, p_continue, 1.0 - p_continue};
    lm.transition[key({1})] = {0.0, 0.0, 1.0};
    lm.transition[key({0, 1})] = {0.0, 0.0, 1.0};
    lm.transition[key({0, 2})] = {1.0, 0.0, 0.0};
    lm.transition[key({1, 2})] = {1.0, 0.0, 0.0};
    return lm;
}

} // namespace

TEST_CASE("row validation") {
    SyntheticLm lm = hand_lm(0.0);
    validate(lm);
    lm.transition.begin()->second[0] += 1e-6;
    CHECK_THROWS_AS(validate(lm), ValueError);
}

TEST_CASE("deterministic model generates zero-entropy tokens") {
    const StepLayout layout{{1, 1, 1}, 1};
    SyntheticLm lm = make_structured_lm(layout, 2, 11);
    // Force every content row one-hot.
    for (auto& [key, row] : lm.transition) {
        double best = -1.0;
        std::size_t arg = 0;
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (row[i] > best) {
                best = row[i];
                arg = i;
            }
        }
        std::fill(row.begin(), row.end(), 0.0);
        row[arg] = 1.0;
    }
    const auto record = synth_generate("det", lm);
    for (const auto& t : record.tokens) CHECK(*t.entropy_bits == 0.0);

    const auto joint = exact_joint(lm, 64);
    REQUIRE(joint.size() == 1);
    CHECK(joint[0].prob == doctest::Approx(1.0));
}

TEST_CASE("uniform binary row carries one bit") {
    SyntheticLm lm = hand_lm(0.0);
    // Start row is uniform over {a, b}: first generated token carries 1 bit.
    const auto record = synth_generate("u", lm, GenMode::Sample, 3);
    REQUIRE(record.tokens.size() >= 2);
    CHECK(*record.tokens[1].entropy_bits == doctest::Approx(1.0));
}

TEST_CASE("generation is reproducible byte for byte") {
    int n_content = 0;
    const auto layout = random_layout(17, &n_content);
    const auto lm = make_structured_lm(layout, n_content, 17);
    const auto a = synth_generate("x", lm, GenMode::Sample, 99);
    const auto b = synth_generate("x", lm, GenMode::Sample, 99);
    CHECK(a == b);
    CHECK(serialize_trace(a) == serialize_trace(b));
}

TEST_CASE("generated traces segment cleanly") {
    for (std::uint64_t seed : {1ull, 2ull, 3ull, 4ull}) {
        int n_content = 0;
        const auto layout = random_layout(seed, &n_content);
        const auto lm = make_structured_lm(layout, n_content, seed);
        const auto record = synth_generate("s" + std::to_string(seed), lm, GenMode::Sample, seed);
        const auto seg = segmenter::segment(record);
        CHECK(seg.steps.size() == layout.step_lengths.size());
        CHECK(record.ground_truth.has_value());
        CHECK(seg.tail == *record.ground_truth);
    }
}

TEST_CASE("exact joint sums to one and matches hand products") {
    // Branching chain: a -> (b with p, close with 1-p).
    const double p = 0.25;
    SyntheticLm lm = hand_lm(p);
    const auto joint = exact_joint(lm, 32);
    double total = 0.0;
    for (const auto& s : joint) total += s.prob;
    CHECK(std::abs(total - 1.0) <= 1e-9);
    CHECK(joint.size() == 3); // a</think>a, ab</think>a, b</think>a

    // Structured models: probabilities are products of row entries.
    const StepLayout layout{{2, 1}, 1};
    const auto slm = make_structured_lm(layout, 3, 5);
    const auto sj = exact_joint(slm, 32);
    double stotal = 0.0;
    for (const auto& s : sj) {
        double prod = 1.0;
        std::vector<int> recent;
        for (int id : s.symbols) {
            prod *= slm.transition.at(slm.context_key(recent))[static_cast<std::size_t>(id)];
            recent.push_back(id);
            if (recent.size() > 3) recent.erase(recent.begin());
        }
        CHECK(std::abs(s.prob - prod) <= 1e-12);
        stotal += s.prob;
    }
    CHECK(std::abs(stotal - 1.0) <= 1e-9);
}

TEST_CASE("per-token entropy matches the joint marginal on deterministic prefixes") {
    // With a single possible prefix at each position, the conditional row
    // entropy *is* the marginal next-symbol entropy from the joint.
    const StepLayout layout{{1, 1}, 1};
    const auto lm = make_structured_lm(layout, 2, 23);
    const auto joint = exact_joint(lm, 32);

    // Position 0: marginal over first symbols.
    std::map<int, double> first;
    for (const auto& s : joint) first[s.symbols[0]] += s.prob;
    std::vector<double> marginal;
    for (const auto& [id, prob] : first) marginal.push_back(prob);
    const double h_marginal = entropy::token_entropy_from_distribution(marginal);

    const auto record = synth_generate("m", lm, GenMode::Greedy);
    // tokens[0] is the <think> scaffold; tokens[1] is the first symbol.
    CHECK(std::abs(*record.tokens[1].entropy_bits - h_marginal) <= 1e-9);
}

TEST_CASE("enumeration past the sequence cap explodes") {
    // Free binary chain: every context continues, so the support at
    // max_len = 12 holds 2^12 cut sequences, past a cap of 1000.
    SyntheticLm lm;
    lm.order = 1;
    lm.vocab = {{"a", SymbolKind::Content}, {"b", SymbolKind::Content}};
    std::vector<int> ctx;
    lm.transition[lm.context_key(ctx)] = {0.5, 0.5};
    ctx = {0};
    lm.transition[lm.context_key(ctx)] = {0.5, 0.5};
    ctx = {1};
    lm.transition[lm.context_key(ctx)] = {0.5, 0.5};
    CHECK_THROWS_AS(exact_joint(lm, 12, 1000), ExplosionError);
    CHECK(exact_joint(lm, 12, 5000).size() == 4096);
}

TEST_CASE("non-terminating model is caught") {
    SyntheticLm lm;
    lm.order = 1;
    lm.vocab = {{"a", SymbolKind::Content}};
    std::vector<int> empty_ctx;
    lm.transition[lm.context_key(empty_ctx)] = {1.0};
    std::vector<int> a_ctx{0};
    lm.transition[lm.context_key(a_ctx)] = {1.0}; // a -> a forever
    CHECK_THROWS_AS(synth_generate("loop", lm), NonTermination);
}

TEST_CASE("task family balances answers and separates entropies") {
    const TaskProfile profile;
    std::map<std::string, int> answers;
    for (int i = 0; i < 40; ++i) {
        const auto record = make_task(123, i, profile);
        ++answers[*record.ground_truth];
        const auto seg = segmenter::segment(record);

        // Exactly two key steps, and they out-rank every filler.
        double filler_max = 0.0;
        std::vector<double> keys;
        for (const auto& s : seg.steps) {
            if (s.text.find("digit is") != std::string::npos) {
                keys.push_back(s.entropy_bits);
            } else {
                filler_max = std::max(filler_max, s.entropy_bits);
            }
        }
        REQUIRE(keys.size() == 2);
        CHECK(std::min(keys[0], keys[1]) > filler_max);

        // Full think region answers correctly.
        const std::string think = record.raw_completion.substr(
            seg.think_span.begin, seg.think_span.end - seg.think_span.begin);
        CHECK(task_answer_from_think(think) == *record.ground_truth);
        // Empty think region answers the default.
        CHECK(task_answer_from_think("[SKIP]") == "0");
    }
    CHECK(answers.size() == 4);
    for (const auto& [value, count] : answers) CHECK(count == 10);
}
