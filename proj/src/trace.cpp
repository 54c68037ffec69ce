#include "cotc/trace.hpp"

#include "cotc/errors.hpp"

#include <json.hpp>

#include <cmath>

namespace cotc {

namespace {

using ordered_json = nlohmann::ordered_json;

constexpr double kMassTolerance = 1e-6;

} // namespace

std::string to_string(Strategy s) {
    switch (s) {
        case Strategy::LowEntropy: return "low-entropy";
        case Strategy::HighEntropy: return "high-entropy";
        case Strategy::Random: return "random";
    }
    return "low-entropy";
}

Strategy strategy_from_string(const std::string& s) {
    if (s == "low-entropy" || s == "low") return Strategy::LowEntropy;
    if (s == "high-entropy" || s == "high") return Strategy::HighEntropy;
    if (s == "random") return Strategy::Random;
    throw ValueError("unknown strategy: '" + s + "' (expected low-entropy|high-entropy|random)");
}

void validate(const TokenRecord& token) {
    if (!token.entropy_bits && !token.top_logprobs) {
        throw ValueError("token '" + token.text + "' carries neither entropy_bits nor top_logprobs");
    }
    if (token.entropy_bits) {
        const double h = *token.entropy_bits;
        if (!std::isfinite(h) || h < 0.0) {
            throw ValueError("token '" + token.text + "' has invalid entropy_bits");
        }
    }
    if (token.top_logprobs) {
        const auto& lps = *token.top_logprobs;
        if (lps.empty()) throw ValueError("top_logprobs must be non-empty when present");
        double mass = 0.0;
        double prev = 1.0; // above any valid logprob
        for (const auto& [tok, lp] : lps) {
            // Finite only: JSON cannot carry -inf, and serialize must invert.
            if (!std::isfinite(lp)) {
                throw ValueError("non-finite logprob for alternative '" + tok + "'");
            }
            if (lp > 1e-9) throw ValueError("positive logprob " + std::to_string(lp));
            if (lp > prev) throw ValueError("top_logprobs not sorted descending");
            prev = lp;
            mass += std::exp(std::min(lp, 0.0));
        }
        if (mass > 1.0 + kMassTolerance) {
            throw ValueError("top_logprobs mass " + std::to_string(mass) + " exceeds 1");
        }
    }
}

void validate(const TraceRecord& record) {
    if (record.id.empty()) throw ValueError("record id must be non-empty");
    for (const auto& t : record.tokens) validate(t);

    // Alignment: token texts concatenate to raw_completion, checked in place.
    std::size_t off = 0;
    for (const auto& t : record.tokens) {
        if (off + t.text.size() > record.raw_completion.size() ||
            record.raw_completion.compare(off, t.text.size(), t.text) != 0) {
            throw AlignmentError("record '" + record.id +
                                 "': token texts do not concatenate to raw_completion");
        }
        off += t.text.size();
    }
    if (off != record.raw_completion.size()) {
        throw AlignmentError("record '" + record.id + "': tokens cover " + std::to_string(off) +
                             " of " + std::to_string(record.raw_completion.size()) + " characters");
    }
}

namespace {

std::string require_string(const ordered_json& j, const char* key) {
    auto it = j.find(key);
    if (it == j.end()) throw SchemaError(std::string("missing required field '") + key + "'");
    if (!it->is_string()) throw SchemaError(std::string("field '") + key + "' must be a string");
    return it->get<std::string>();
}

TokenRecord parse_token(const ordered_json& j) {
    if (!j.is_object()) throw SchemaError("token entries must be objects");
    TokenRecord t;
    t.text = require_string(j, "text");
    if (auto it = j.find("token_id"); it != j.end() && !it->is_null()) {
        if (!it->is_number_integer()) throw SchemaError("token_id must be an integer");
        t.token_id = it->get<std::int64_t>();
    }
    if (auto it = j.find("entropy_bits"); it != j.end() && !it->is_null()) {
        if (!it->is_number()) throw SchemaError("entropy_bits must be a number");
        t.entropy_bits = it->get<double>();
    }
    if (auto it = j.find("top_logprobs"); it != j.end() && !it->is_null()) {
        if (!it->is_array()) throw SchemaError("top_logprobs must be an array");
        std::vector<std::pair<std::string, double>> lps;
        lps.reserve(it->size());
        for (const auto& e : *it) {
            if (!e.is_array() || e.size() != 2 || !e[0].is_string() || !e[1].is_number()) {
                throw ValueError("top_logprobs entries must be [token, logprob] pairs");
            }
            lps.emplace_back(e[0].get<std::string>(), e[1].get<double>());
        }
        t.top_logprobs = std::move(lps);
    }
    return t;
}

} // namespace

TraceRecord parse_trace_line(const std::string& line) {
    ordered_json j;
    try {
        j = ordered_json::parse(line);
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(std::string("line is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw SchemaError("trace line must be a JSON object");

    TraceRecord r;
    r.id = require_string(j, "id");
    r.problem = require_string(j, "problem");
    r.raw_completion = require_string(j, "raw_completion");

    auto tokens_it = j.find("tokens");
    if (tokens_it == j.end()) throw SchemaError("missing required field 'tokens'");
    if (!tokens_it->is_array()) throw SchemaError("field 'tokens' must be an array");
    r.tokens.reserve(tokens_it->size());
    for (const auto& tj : *tokens_it) r.tokens.push_back(parse_token(tj));

    if (auto it = j.find("ground_truth"); it != j.end() && !it->is_null()) {
        if (!it->is_string()) throw SchemaError("ground_truth must be a string");
        r.ground_truth = it->get<std::string>();
    }
    if (auto it = j.find("meta"); it != j.end() && !it->is_null()) {
        if (!it->is_object()) throw SchemaError("meta must be an object");
        for (const auto& [k, v] : it->items()) {
            r.meta[k] = v.is_string() ? v.get<std::string>() : v.dump();
        }
    }
    // Unknown extra fields are preserved in meta, not dropped.
    for (const auto& [k, v] : j.items()) {
        if (k == "id" || k == "problem" || k == "raw_completion" || k == "tokens" ||
            k == "ground_truth" || k == "meta") {
            continue;
        }
        r.meta[k] = v.is_string() ? v.get<std::string>() : v.dump();
    }

    validate(r);
    return r;
}

std::string serialize_trace(const TraceRecord& record) {
    validate(record);
    ordered_json j;
    j["id"] = record.id;
    j["problem"] = record.problem;
    j["raw_completion"] = record.raw_completion;
    ordered_json tokens = ordered_json::array();
    for (const auto& t : record.tokens) {
        ordered_json tj;
        tj["text"] = t.text;
        if (t.token_id) tj["token_id"] = *t.token_id;
        if (t.entropy_bits) tj["entropy_bits"] = *t.entropy_bits;
        if (t.top_logprobs) {
            ordered_json lps = ordered_json::array();
            for (const auto& [tok, lp] : *t.top_logprobs) {
                lps.push_back(ordered_json::array({tok, lp}));
            }
            tj["top_logprobs"] = std::move(lps);
        }
        tokens.push_back(std::move(tj));
    }
    j["tokens"] = std::move(tokens);
    if (record.ground_truth) j["ground_truth"] = *record.ground_truth;
    if (!record.meta.empty()) {
        ordered_json m;
        for (const auto& [k, v] : record.meta) m[k] = v;
        j["meta"] = std::move(m);
    }
    return j.dump(); // compact, no raw newlines (escaped inside strings)
}

} // namespace cotc
