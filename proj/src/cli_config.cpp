#include "cotc/cli_config.hpp"

#include "cotc/errors.hpp"
#include "cotc/rng.hpp"

#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace cotc::cli {

namespace {

using json = nlohmann::json;

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
    for (const auto& [key, value] : j.items()) {
        if (!allowed.count(key)) {
            throw SchemaError("unknown config key '" + key + "' in " + where);
        }
    }
}

} // namespace

CliConfig load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValueError("cannot open config file " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw SchemaError("config file " + path + " is not valid JSON: " + e.what());
    }
    if (!j.is_object()) throw SchemaError("config file must hold a JSON object");
    check_keys(j, {"prune", "reward", "backend", "sweep", "mi"}, "config root");

    CliConfig cfg;
    if (j.contains("prune")) {
        const json& p = j["prune"];
        check_keys(p, {"kappa", "strategy", "seed", "skip_token", "collapse_skip_runs"}, "prune");
        cfg.prune.kappa = p.value("kappa", cfg.prune.kappa);
        if (p.contains("strategy")) cfg.prune.strategy = strategy_from_string(p["strategy"]);
        cfg.prune.seed = p.value("seed", cfg.prune.seed);
        cfg.prune.skip_token = p.value("skip_token", cfg.prune.skip_token);
        cfg.prune.collapse_skip_runs = p.value("collapse_skip_runs", cfg.prune.collapse_skip_runs);
    }
    if (j.contains("reward")) {
        const json& r = j["reward"];
        check_keys(r,
                   {"kappa_high", "kappa_low", "tau_skip_num", "tau_length", "correct_reward",
                    "skip_high_reward", "skip_mid_reward", "penalty"},
                   "reward");
        cfg.reward.kappa_high = r.value("kappa_high", cfg.reward.kappa_high);
        cfg.reward.kappa_low = r.value("kappa_low", cfg.reward.kappa_low);
        cfg.reward.tau_skip_num = r.value("tau_skip_num", cfg.reward.tau_skip_num);
        cfg.reward.tau_length = r.value("tau_length", cfg.reward.tau_length);
        cfg.reward.correct_reward = r.value("correct_reward", cfg.reward.correct_reward);
        cfg.reward.skip_high_reward = r.value("skip_high_reward", cfg.reward.skip_high_reward);
        cfg.reward.skip_mid_reward = r.value("skip_mid_reward", cfg.reward.skip_mid_reward);
        cfg.reward.penalty = r.value("penalty", cfg.reward.penalty);
    }
    if (j.contains("backend")) {
        const json& b = j["backend"];
        check_keys(b,
                   {"endpoint_url", "api_key_env", "model", "top_logprobs_k", "max_tokens",
                    "temperature", "max_in_flight", "retry_max_attempts", "retry_base_backoff_ms"},
                   "backend");
        cfg.backend.endpoint_url = b.value("endpoint_url", cfg.backend.endpoint_url);
        cfg.backend.api_key_env = b.value("api_key_env", cfg.backend.api_key_env);
        cfg.backend.model = b.value("model", cfg.backend.model);
        cfg.backend.top_logprobs_k = b.value("top_logprobs_k", cfg.backend.top_logprobs_k);
        cfg.backend.max_tokens = b.value("max_tokens", cfg.backend.max_tokens);
        cfg.backend.temperature = b.value("temperature", cfg.backend.temperature);
        cfg.backend.max_in_flight = b.value("max_in_flight", cfg.backend.max_in_flight);
        cfg.backend.retry.max_attempts = b.value("retry_max_attempts", cfg.backend.retry.max_attempts);
        cfg.backend.retry.base_backoff_ms =
            b.value("retry_base_backoff_ms", cfg.backend.retry.base_backoff_ms);
    }
    if (j.contains("sweep")) {
        const json& s = j["sweep"];
        check_keys(s, {"ratios", "strategies", "eval", "samples", "seed", "jobs"}, "sweep");
        if (s.contains("ratios")) cfg.sweep.ratios = s["ratios"].get<std::vector<double>>();
        if (s.contains("strategies")) {
            cfg.sweep.strategies.clear();
            for (const auto& name : s["strategies"]) {
                cfg.sweep.strategies.push_back(strategy_from_string(name));
            }
        }
        if (s.contains("eval")) {
            const std::string eval = s["eval"];
            if (eval == "synthetic") cfg.sweep.eval = experiment::EvalMode::SyntheticExact;
            else if (eval == "backend") cfg.sweep.eval = experiment::EvalMode::ReplayAgainstBackend;
            else throw ValueError("eval must be synthetic|backend");
        }
        cfg.sweep.samples = s.value("samples", cfg.sweep.samples);
        cfg.sweep.seed = s.value("seed", cfg.sweep.seed);
        cfg.sweep.jobs = s.value("jobs", cfg.sweep.jobs);
    }
    if (j.contains("mi")) {
        const json& m = j["mi"];
        check_keys(m, {"lm_count", "seed"}, "mi");
        cfg.mi_lm_count = m.value("lm_count", cfg.mi_lm_count);
        cfg.mi_seed = m.value("seed", cfg.mi_seed);
    }
    return cfg;
}

std::string CliConfig::config_hash() const {
    // Canonical JSON of the effective configuration; keys sort
    // alphabetically, so the digest is stable.
    json j;
    j["prune"] = {{"kappa", prune.kappa},
                  {"strategy", to_string(prune.strategy)},
                  {"seed", prune.seed},
                  {"skip_token", prune.skip_token},
                  {"collapse_skip_runs", prune.collapse_skip_runs}};
    j["reward"] = {{"kappa_high", reward.kappa_high},
                   {"kappa_low", reward.kappa_low},
                   {"tau_skip_num", reward.tau_skip_num},
                   {"tau_length", reward.tau_length},
                   {"correct_reward", reward.correct_reward},
                   {"skip_high_reward", reward.skip_high_reward},
                   {"skip_mid_reward", reward.skip_mid_reward},
                   {"penalty", reward.penalty}};
    j["backend"] = {{"endpoint_url", backend.endpoint_url},
                    {"api_key_env", backend.api_key_env},
                    {"model", backend.model},
                    {"top_logprobs_k", backend.top_logprobs_k},
                    {"max_tokens", backend.max_tokens},
                    {"temperature", backend.temperature},
                    {"max_in_flight", backend.max_in_flight},
                    {"retry_max_attempts", backend.retry.max_attempts},
                    {"retry_base_backoff_ms", backend.retry.base_backoff_ms}};
    json ratios = json::array();
    for (double r : sweep.ratios) ratios.push_back(r);
    json strategies = json::array();
    for (Strategy s : sweep.strategies) strategies.push_back(to_string(s));
    j["sweep"] = {{"ratios", ratios},
                  {"strategies", strategies},
                  {"eval", sweep.eval == experiment::EvalMode::SyntheticExact ? "synthetic" : "backend"},
                  {"samples", sweep.samples},
                  {"seed", sweep.seed},
                  {"jobs", sweep.jobs}};
    j["mi"] = {{"lm_count", mi_lm_count}, {"seed", mi_seed}};

    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(fnv1a64(j.dump())));
    return buf;
}

} // namespace cotc::cli
