// cotc — chain-of-thought compression toolkit.
//
// Subcommand per pipeline stage so every procedure is independently
// scriptable: collect | inspect | prune | reward | sweep | token-baseline |
// build-dataset | mi-oracle | report.
//
// Exit codes: 0 success, 1 validation error, 2 backend/transport failure,
// 64 usage error.

#include "cotc/backend.hpp"
#include "cotc/cli_config.hpp"
#include "cotc/entropy.hpp"
#include "cotc/errors.hpp"
#include "cotc/experiment.hpp"
#include "cotc/pruner.hpp"
#include "cotc/reward.hpp"
#include "cotc/rng.hpp"
#include "cotc/segmenter.hpp"
#include "cotc/synthetic.hpp"
#include "cotc/trace.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <atomic>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <limits>
#include <memory>
#include <sstream>
#include <thread>

namespace {

using cotc::Strategy;
using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

struct CommonArgs {
    std::string in_path;
    std::string out_path;
    std::string config_path;
};

cotc::cli::CliConfig effective_config(const CommonArgs& args) {
    if (args.config_path.empty()) return {};
    return cotc::cli::load_config_file(args.config_path);
}

std::ifstream open_input(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw cotc::ValueError("cannot open input file " + path);
    return in;
}

std::ofstream open_output(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw cotc::ValueError("cannot open output file " + path);
    return out;
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

// "0.1:1.0:0.1" -> ascending grid, both ends inclusive.
std::vector<double> parse_ratio_grid(const std::string& text) {
    double start = 0;
    double end = 0;
    double step = 0;
    if (std::sscanf(text.c_str(), "%lf:%lf:%lf", &start, &end, &step) != 3 || step <= 0) {
        throw cotc::ValueError("--ratios expects START:END:STEP, got '" + text + "'");
    }
    std::vector<double> out;
    for (int i = 0;; ++i) {
        const double v = start + step * i;
        if (v > end + 1e-9) break;
        out.push_back(std::min(v, 1.0));
    }
    if (out.empty()) throw cotc::ValueError("--ratios grid is empty");
    return out;
}

std::vector<Strategy> parse_strategy_csv(const std::string& text) {
    std::vector<Strategy> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.push_back(cotc::strategy_from_string(item));
    }
    if (out.empty()) throw cotc::ValueError("--strategies list is empty");
    return out;
}

// Trace source over an input stream that accumulates the input digest
// (FNV-1a over record ids) as records are consumed.
cotc::experiment::TraceSource digesting_source(std::istream& in, std::uint64_t& digest) {
    return [&in, &digest]() -> std::optional<cotc::TraceRecord> {
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            auto record = cotc::parse_trace_line(line);
            digest = cotc::fnv1a64(record.id + "\n", digest);
            return record;
        }
        return std::nullopt;
    };
}

void write_sidecar_meta(const std::string& out_path, const cotc::cli::CliConfig& cfg,
                        std::uint64_t input_digest, const ordered_json& extra) {
    ordered_json meta;
    meta["config_hash"] = cfg.config_hash();
    meta["input_digest"] = hex64(input_digest);
    for (const auto& [k, v] : extra.items()) meta[k] = v;
    std::ofstream out(out_path + ".meta.json");
    out << meta.dump() << "\n";
}

// ── collect ──────────────────────────────────────────────────

int run_collect(const CommonArgs& args, cotc::cli::CliConfig cfg, int jobs) {
    struct Problem {
        std::string id;
        std::string text;
        std::optional<std::string> ground_truth;
    };

    auto in = open_input(args.in_path);
    auto out = open_output(args.out_path);

    // The client's semaphore enforces the tighter of --jobs and
    // max_in_flight; worker threads supply the parallelism.
    cfg.backend.max_in_flight = std::min(cfg.backend.max_in_flight, jobs);
    cotc::backend::CompletionClient client(cfg.backend);

    // Chunked streaming keeps memory bounded by jobs, not file size, while
    // preserving input order in the output.
    const std::size_t chunk_size = static_cast<std::size_t>(jobs) * 16;
    std::size_t total = 0;
    std::string line;
    bool more = true;
    while (more) {
        std::vector<Problem> chunk;
        while (chunk.size() < chunk_size && (more = static_cast<bool>(std::getline(in, line)))) {
            if (line.empty()) continue;
            json j;
            try {
                j = json::parse(line);
            } catch (const json::exception& e) {
                throw cotc::SchemaError(std::string("problem line is not valid JSON: ") + e.what());
            }
            Problem p;
            p.id = j.value("id", "");
            p.text = j.value("problem", "");
            if (p.id.empty() || p.text.empty()) {
                throw cotc::SchemaError("problem lines need non-empty 'id' and 'problem'");
            }
            if (j.contains("ground_truth")) p.ground_truth = j["ground_truth"].get<std::string>();
            chunk.push_back(std::move(p));
        }
        if (chunk.empty()) break;

        std::vector<std::string> serialized(chunk.size());
        std::atomic<std::size_t> next{0};
        std::atomic<bool> failed{false};
        std::exception_ptr error;
        std::mutex error_mu;
        auto worker = [&] {
            while (!failed.load()) {
                const std::size_t i = next.fetch_add(1);
                if (i >= chunk.size()) return;
                try {
                    auto record = client.fetch_trace(chunk[i].id, chunk[i].text);
                    if (chunk[i].ground_truth) record.ground_truth = chunk[i].ground_truth;
                    serialized[i] = cotc::serialize_trace(record);
                } catch (...) {
                    std::lock_guard lock(error_mu);
                    if (!error) error = std::current_exception();
                    failed.store(true);
                    return;
                }
            }
        };
        std::vector<std::thread> threads;
        threads.reserve(static_cast<std::size_t>(jobs));
        for (int i = 0; i < jobs; ++i) threads.emplace_back(worker);
        for (auto& t : threads) t.join();
        if (error) std::rethrow_exception(error);

        for (const auto& s : serialized) out << s << '\n';
        total += chunk.size();
    }
    std::cerr << "collected " << total << " traces\n";
    return 0;
}

// ── inspect ──────────────────────────────────────────────────

int run_inspect(const CommonArgs& args) {
    auto in = open_input(args.in_path);
    std::string line;
    char buf[256];
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto seg = cotc::segmenter::segment(cotc::parse_trace_line(line));
        const auto report = cotc::entropy::analyze(seg);
        std::cout << "trace " << seg.source.id << "  steps=" << seg.steps.size() << "  mode="
                  << (report.mode == cotc::entropy::Mode::Exact ? "exact" : "topk-lower-bound")
                  << "\n";
        std::cout << "  index  tokens  entropy_bits\n";
        for (const auto& step : seg.steps) {
            std::snprintf(buf, sizeof buf, "  %5zu  %6zu  %12.6f\n", step.index,
                          step.token_span.size(), step.entropy_bits);
            std::cout << buf;
        }
    }
    return 0;
}

// ── prune / build-dataset ────────────────────────────────────

int run_build(const CommonArgs& args, const cotc::cli::CliConfig& cfg, std::size_t max_tokens,
              bool print_stats) {
    auto in = open_input(args.in_path);
    auto out = open_output(args.out_path);
    std::uint64_t digest = 0xcbf29ce484222325ull;
    const auto stats = cotc::experiment::build_dataset(digesting_source(in, digest), cfg.prune,
                                                       max_tokens, out);
    ordered_json extra;
    extra["input_count"] = stats.input_count;
    extra["emitted_count"] = stats.emitted_count;
    extra["filtered_count"] = stats.filtered_count;
    extra["mean_token_reduction"] = stats.mean_token_reduction;
    write_sidecar_meta(args.out_path, cfg, digest, extra);
    if (print_stats) {
        ordered_json line = extra;
        line["config_hash"] = cfg.config_hash();
        line["input_digest"] = hex64(digest);
        std::cout << line.dump() << "\n";
    } else {
        std::cerr << "emitted " << stats.emitted_count << "/" << stats.input_count << " records\n";
    }
    return 0;
}

// ── reward ───────────────────────────────────────────────────

int whitespace_token_count(const std::string& text) {
    int n = 0;
    bool in_token = false;
    for (char c : text) {
        const bool ws = c == ' ' || c == '\n' || c == '\t' || c == '\r';
        if (!ws && !in_token) ++n;
        in_token = !ws;
    }
    return n;
}

int run_reward(const CommonArgs& args, const cotc::cli::CliConfig& cfg) {
    auto in = open_input(args.in_path);
    std::ostream* out = &std::cout;
    std::ofstream file;
    if (!args.out_path.empty()) {
        file = open_output(args.out_path);
        out = &file;
    }
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw cotc::SchemaError(std::string("completion line is not valid JSON: ") + e.what());
        }
        const std::string id = j.value("id", "");
        const std::string completion = j.value("completion", "");
        const std::string truth = j.value("ground_truth", "");
        if (id.empty()) throw cotc::SchemaError("completion lines need an 'id'");

        int token_count = 0;
        bool fallback = false;
        if (j.contains("token_count")) {
            token_count = j["token_count"].get<int>();
        } else {
            token_count = whitespace_token_count(completion);
            fallback = true;
        }
        const auto b = cotc::reward::score(completion, truth, token_count, cfg.reward);

        ordered_json o;
        o["id"] = id;
        o["total"] = b.total;
        o["correctness"] = b.correctness;
        o["skip_ratio_reward"] = b.skip_ratio_reward;
        o["skip_num_penalty"] = b.skip_num_penalty;
        o["length_penalty"] = b.length_penalty;
        o["n_skip"] = b.diagnostics.n_skip;
        o["n_steps"] = b.diagnostics.n_steps;
        o["response_tokens"] = b.diagnostics.response_tokens;
        if (fallback) o["token_count_source"] = "whitespace";
        *out << o.dump() << '\n';
    }
    return 0;
}

// ── sweep / token-baseline ───────────────────────────────────

int run_sweep(const CommonArgs& args, const cotc::cli::CliConfig& cfg, bool token_mode,
              const std::string& format) {
    auto in = open_input(args.in_path);
    std::uint64_t digest = 0xcbf29ce484222325ull;
    auto source = digesting_source(in, digest);

    cotc::experiment::SweepHooks hooks;
    std::unique_ptr<cotc::backend::CompletionClient> client;
    if (cfg.sweep.eval == cotc::experiment::EvalMode::ReplayAgainstBackend) {
        client = std::make_unique<cotc::backend::CompletionClient>(cfg.backend);
        hooks.backend_complete = [&client](const std::string& prompt) {
            return client->complete_text(prompt);
        };
    }

    const std::string checkpoint = args.out_path + ".ckpt";
    const auto report = token_mode
                            ? cotc::experiment::token_prune_baseline(source, cfg.sweep, checkpoint, hooks)
                            : cotc::experiment::sweep(source, cfg.sweep, checkpoint, hooks);

    auto out = open_output(args.out_path);
    out << cotc::experiment::serialize_report(report) << "\n";
    std::cout << cotc::experiment::render_report(
        report, cotc::experiment::report_format_from_string(format));
    if (!report.complete) {
        std::cerr << "sweep stopped early; resume with the same command to finish\n";
    }
    return 0;
}

// ── mi-oracle ────────────────────────────────────────────────

int run_mi_oracle(const CommonArgs& args, const cotc::cli::CliConfig& cfg,
                  const std::string& format) {
    std::ostream* out = &std::cout;
    std::ofstream file;
    if (!args.out_path.empty()) {
        file = open_output(args.out_path);
        out = &file;
    }
    char buf[256];
    const bool csv = format != "table";
    if (csv) {
        *out << "lm,step,mi_bits,bound_bits,holds\n";
    } else {
        *out << "   lm  step       mi_bits    bound_bits  holds\n";
    }
    int violations = 0;
    for (int i = 0; i < cfg.mi_lm_count; ++i) {
        const std::uint64_t seed = cotc::SplitMix64(cfg.mi_seed + static_cast<std::uint64_t>(i)).next();
        int n_content = 0;
        const auto layout = cotc::synth::random_layout(seed, &n_content);
        const auto lm = cotc::synth::make_structured_lm(layout, n_content, seed);
        const auto report = cotc::experiment::mi_oracle(lm, layout);
        for (const auto& row : report.rows) {
            if (csv) {
                std::snprintf(buf, sizeof buf, "%d,%zu,%.12f,%.12f,%s\n", i, row.step_index,
                              row.mi_bits, row.bound_bits, row.holds ? "true" : "false");
            } else {
                std::snprintf(buf, sizeof buf, "%5d  %4zu  %12.6f  %12.6f  %s\n", i, row.step_index,
                              row.mi_bits, row.bound_bits, row.holds ? "yes" : "NO");
            }
            *out << buf;
            if (!row.holds) ++violations;
        }
        if (csv) {
            std::snprintf(buf, sizeof buf, "%d,aggregate,%.12f,%.12f,%s\n", i,
                          report.aggregate.mi_bits, report.aggregate.bound_sum_bits,
                          report.aggregate.holds ? "true" : "false");
        } else {
            std::snprintf(buf, sizeof buf, "%5d   agg  %12.6f  %12.6f  %s\n", i,
                          report.aggregate.mi_bits, report.aggregate.bound_sum_bits,
                          report.aggregate.holds ? "yes" : "NO");
        }
        *out << buf;
        if (!report.aggregate.holds) ++violations;
    }
    std::cerr << "verified " << cfg.mi_lm_count << " models, " << violations << " violations\n";
    return violations == 0 ? 0 : 1;
}

// ── report ───────────────────────────────────────────────────

int run_report(const CommonArgs& args, const std::string& format) {
    auto in = open_input(args.in_path);
    std::stringstream ss;
    ss << in.rdbuf();
    const auto report = cotc::experiment::parse_report(ss.str());
    const std::string rendered = cotc::experiment::render_report(
        report, cotc::experiment::report_format_from_string(format));
    if (args.out_path.empty()) {
        std::cout << rendered;
    } else {
        open_output(args.out_path) << rendered;
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"entropy-based chain-of-thought compression toolkit"};
    app.require_subcommand(1);

    CommonArgs args;
    double kappa = -1.0;
    std::string strategy;
    std::uint64_t seed = 0;
    bool seed_set = false;
    std::string skip_token;
    std::string ratios;
    std::string strategies;
    std::string eval;
    std::string endpoint;
    std::string model;
    std::string api_key_env;
    int jobs = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    long long max_tokens = -1;
    int tau_skip = -1;
    int tau_length = -1;
    std::string format = "table";

    auto add_common = [&](CLI::App* cmd, bool needs_in, bool needs_out) {
        auto* in = cmd->add_option("--in", args.in_path, "input path (line-delimited records)");
        if (needs_in) in->required();
        auto* out = cmd->add_option("--out", args.out_path, "output path");
        if (needs_out) out->required();
        cmd->add_option("--config", args.config_path, "JSON config file");
    };

    auto* collect = app.add_subcommand("collect", "fetch traces from a completions backend");
    add_common(collect, true, true);
    collect->add_option("--endpoint", endpoint, "backend base URL")->required();
    collect->add_option("--model", model, "model name");
    collect->add_option("--api-key-env", api_key_env, "environment variable holding the API key");
    collect->add_option("--jobs", jobs, "parallel requests");
    collect->add_option("--max-tokens", max_tokens, "completion token budget");

    auto* inspect = app.add_subcommand("inspect", "per-step entropy table");
    add_common(inspect, true, false);

    auto* prune = app.add_subcommand("prune", "compress traces into [SKIP]-pruned CoTs");
    add_common(prune, true, true);
    prune->add_option("--kappa", kappa, "pruning ratio in [0,1]");
    prune->add_option("--strategy", strategy, "low-entropy|high-entropy|random");
    prune->add_option("--seed", seed, "seed for the random strategy")->each([&](const std::string&) {
        seed_set = true;
    });
    prune->add_option("--skip-token", skip_token, "placeholder for pruned steps");

    auto* reward_cmd = app.add_subcommand("reward", "score completions with the composite reward");
    add_common(reward_cmd, true, false);
    reward_cmd->add_option("--tau-skip", tau_skip, "skip-count penalty threshold");
    reward_cmd->add_option("--tau-length", tau_length, "response-length penalty threshold");

    auto* sweep_cmd = app.add_subcommand("sweep", "mask-ratio sweep across strategies");
    add_common(sweep_cmd, true, true);
    sweep_cmd->add_option("--ratios", ratios, "grid START:END:STEP");
    sweep_cmd->add_option("--strategies", strategies, "csv of low,high,random");
    sweep_cmd->add_option("--eval", eval, "backend|synthetic");
    sweep_cmd->add_option("--seed", seed, "sweep seed")->each([&](const std::string&) {
        seed_set = true;
    });
    sweep_cmd->add_option("--jobs", jobs, "worker threads");
    sweep_cmd->add_option("--endpoint", endpoint, "backend base URL (eval=backend)");
    sweep_cmd->add_option("--model", model, "model name");
    sweep_cmd->add_option("--api-key-env", api_key_env, "environment variable holding the API key");
    sweep_cmd->add_option("--format", format, "table|csv|plotdata");

    auto* baseline = app.add_subcommand("token-baseline", "token-level masking baseline");
    add_common(baseline, true, true);
    baseline->add_option("--ratios", ratios, "grid START:END:STEP");
    baseline->add_option("--eval", eval, "backend|synthetic");
    baseline->add_option("--seed", seed, "sweep seed")->each([&](const std::string&) {
        seed_set = true;
    });
    baseline->add_option("--jobs", jobs, "worker threads");
    baseline->add_option("--endpoint", endpoint, "backend base URL (eval=backend)");
    baseline->add_option("--model", model, "model name");
    baseline->add_option("--api-key-env", api_key_env, "environment variable holding the API key");
    baseline->add_option("--format", format, "table|csv|plotdata");

    auto* build = app.add_subcommand("build-dataset", "compress and filter an SFT dataset");
    add_common(build, true, true);
    build->add_option("--kappa", kappa, "pruning ratio in [0,1]");
    build->add_option("--strategy", strategy, "low-entropy|high-entropy|random");
    build->add_option("--seed", seed, "seed for the random strategy")->each([&](const std::string&) {
        seed_set = true;
    });
    build->add_option("--skip-token", skip_token, "placeholder for pruned steps");
    build->add_option("--max-tokens", max_tokens, "drop records compressing past this count");

    auto* mi = app.add_subcommand("mi-oracle", "verify the redundancy bound on exact models");
    add_common(mi, false, false);
    mi->add_option("--seed", seed, "survey seed")->each([&](const std::string&) { seed_set = true; });
    mi->add_option("--format", format, "table|csv");

    auto* report_cmd = app.add_subcommand("report", "render a sweep report file");
    add_common(report_cmd, true, false);
    report_cmd->add_option("--format", format, "table|csv|plotdata");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n";
        std::cerr << app.help();
        return 64;
    }

    try {
        auto cfg = effective_config(args);
        // Flag overrides win over file values.
        if (kappa >= 0.0) cfg.prune.kappa = kappa;
        if (!strategy.empty()) cfg.prune.strategy = cotc::strategy_from_string(strategy);
        if (seed_set) {
            cfg.prune.seed = seed;
            cfg.sweep.seed = seed;
            cfg.mi_seed = seed;
        }
        if (!skip_token.empty()) cfg.prune.skip_token = skip_token;
        if (!endpoint.empty()) cfg.backend.endpoint_url = endpoint;
        if (!model.empty()) cfg.backend.model = model;
        if (!api_key_env.empty()) cfg.backend.api_key_env = api_key_env;
        if (max_tokens > 0) cfg.backend.max_tokens = static_cast<int>(max_tokens);
        if (tau_skip >= 0) cfg.reward.tau_skip_num = tau_skip;
        if (tau_length >= 0) cfg.reward.tau_length = tau_length;
        if (!ratios.empty()) cfg.sweep.ratios = parse_ratio_grid(ratios);
        if (!strategies.empty()) cfg.sweep.strategies = parse_strategy_csv(strategies);
        if (!eval.empty()) {
            if (eval == "synthetic") cfg.sweep.eval = cotc::experiment::EvalMode::SyntheticExact;
            else if (eval == "backend") cfg.sweep.eval = cotc::experiment::EvalMode::ReplayAgainstBackend;
            else throw cotc::ValueError("--eval must be backend|synthetic");
        }
        cfg.sweep.jobs = jobs;

        if (collect->parsed()) return run_collect(args, cfg, jobs);
        if (inspect->parsed()) return run_inspect(args);
        if (prune->parsed()) {
            return run_build(args, cfg, std::numeric_limits<std::size_t>::max(), false);
        }
        if (reward_cmd->parsed()) return run_reward(args, cfg);
        if (sweep_cmd->parsed()) return run_sweep(args, cfg, false, format);
        if (baseline->parsed()) return run_sweep(args, cfg, true, format);
        if (build->parsed()) {
            const std::size_t cap = max_tokens > 0 ? static_cast<std::size_t>(max_tokens) : 4096;
            return run_build(args, cfg, cap, true);
        }
        if (mi->parsed()) return run_mi_oracle(args, cfg, format);
        if (report_cmd->parsed()) return run_report(args, format);
        std::cerr << "no subcommand\n";
        return 64;
    } catch (const cotc::BackendError& e) {
        std::cerr << "backend error: " << e.what() << "\n";
        return 2;
    } catch (const cotc::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
