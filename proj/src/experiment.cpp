#include "cotc/experiment.hpp"

#include "cotc/entropy.hpp"
#include "cotc/errors.hpp"
#include "cotc/reward.hpp"
#include "cotc/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <condition_variable>
#include <cstdio>
#include <deque>
#include <exception>
#include <fstream>
#include <istream>
#include <memory>
#include <mutex>
#include <thread>
#include <unordered_map>
#include <unordered_set>

namespace cotc::experiment {

namespace {

using ordered_json = nlohmann::ordered_json;

constexpr char kSep = '\x1f';

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

} // namespace

TraceSource vector_source(std::vector<TraceRecord> traces) {
    auto shared = std::make_shared<std::vector<TraceRecord>>(std::move(traces));
    auto next = std::make_shared<std::size_t>(0);
    return [shared, next]() -> std::optional<TraceRecord> {
        if (*next >= shared->size()) return std::nullopt;
        return (*shared)[(*next)++];
    };
}

TraceSource jsonl_source(std::istream& in) {
    return [&in]() -> std::optional<TraceRecord> {
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            return parse_trace_line(line);
        }
        return std::nullopt;
    };
}

void validate(const SweepSpec& spec) {
    if (spec.ratios.empty()) throw ValueError("sweep needs at least one ratio");
    double prev = -1.0;
    for (double r : spec.ratios) {
        if (!(r >= 0.0 && r <= 1.0)) throw ValueError("ratios must lie in [0, 1]");
        if (r <= prev) throw ValueError("ratios must be strictly ascending");
        prev = r;
    }
    if (spec.strategies.empty()) throw ValueError("sweep needs at least one strategy");
    if (spec.samples < 0) throw ValueError("samples must be non-negative");
    if (spec.jobs < 1) throw ValueError("jobs must be at least 1");
}

std::string config_hash(const SweepSpec& spec, const std::string& mode) {
    std::string canon = "mode=" + mode + ";ratios=";
    for (double r : spec.ratios) canon += format_double(r) + ",";
    canon += ";strategies=";
    for (Strategy s : spec.strategies) canon += to_string(s) + ",";
    canon += ";eval=";
    canon += spec.eval == EvalMode::SyntheticExact ? "synthetic" : "backend";
    canon += ";samples=" + std::to_string(spec.samples);
    canon += ";seed=" + std::to_string(spec.seed);
    return hex64(fnv1a64(canon));
}

namespace {

// ─── checkpointed sweep engine ───────────────────────────────

struct Cell {
    std::size_t strategy_idx = 0;
    std::size_t ratio_idx = 0;
    bool correct = false;
    long long kept = 0;
    long long orig = 0;
};

struct Aggregate {
    long long n = 0;
    long long correct = 0;
    long long kept = 0;
    long long orig = 0;
};

std::string cell_key(const std::string& trace_id, std::size_t si, std::size_t ri) {
    return trace_id + kSep + std::to_string(si) + kSep + std::to_string(ri);
}

class BoundedQueue {
public:
    explicit BoundedQueue(std::size_t cap) : cap_(cap) {}

    void push(TraceRecord record) {
        std::unique_lock lock(mu_);
        cv_space_.wait(lock, [&] { return items_.size() < cap_ || closed_; });
        if (closed_) return;
        items_.push_back(std::move(record));
        cv_item_.notify_one();
    }

    std::optional<TraceRecord> pop() {
        std::unique_lock lock(mu_);
        cv_item_.wait(lock, [&] { return !items_.empty() || closed_; });
        if (items_.empty()) return std::nullopt;
        TraceRecord r = std::move(items_.front());
        items_.pop_front();
        cv_space_.notify_one();
        return r;
    }

    void close() {
        std::lock_guard lock(mu_);
        closed_ = true;
        cv_item_.notify_all();
        cv_space_.notify_all();
    }

private:
    std::mutex mu_;
    std::condition_variable cv_item_;
    std::condition_variable cv_space_;
    std::deque<TraceRecord> items_;
    std::size_t cap_;
    bool closed_ = false;
};

class SweepEngine {
public:
    SweepEngine(const SweepSpec& spec, const SweepHooks& hooks, std::string mode,
                std::string checkpoint_path)
        : spec_(spec),
          hooks_(hooks),
          mode_(std::move(mode)),
          hash_(config_hash(spec, mode_)),
          checkpoint_path_(std::move(checkpoint_path)),
          aggregates_(spec.strategies.size() * spec.ratios.size()) {
        validate(spec_);
        if (spec_.eval == EvalMode::ReplayAgainstBackend && !hooks_.backend_complete) {
            throw ValueError("ReplayAgainstBackend needs a backend_complete hook");
        }
        load_checkpoint();
        if (!checkpoint_path_.empty()) {
            out_.open(checkpoint_path_, std::ios::app);
            if (!out_) throw CheckpointError("cannot open checkpoint file " + checkpoint_path_);
        }
    }

    SweepReport run(const TraceSource& source) {
        BoundedQueue queue(static_cast<std::size_t>(spec_.jobs) * 2 + 2);
        std::vector<std::thread> workers;
        workers.reserve(static_cast<std::size_t>(spec_.jobs));
        for (int i = 0; i < spec_.jobs; ++i) {
            workers.emplace_back([&] { worker_loop(queue); });
        }

        bool stopped = false;
        std::uint64_t digest = 0xcbf29ce484222325ull;
        long long consumed = 0;
        while (true) {
            if (failed_.load()) break;
            if (hooks_.should_stop && hooks_.should_stop()) {
                stopped = true;
                break;
            }
            if (spec_.samples > 0 && consumed >= spec_.samples) break;
            auto record = source();
            if (!record) break;
            digest = fnv1a64(record->id + "\n", digest);
            ++consumed;
            queue.push(std::move(*record));
        }
        queue.close();
        for (auto& w : workers) w.join();
        if (error_) std::rethrow_exception(error_);

        SweepReport report;
        report.complete = !stopped;
        report.provenance.config_hash = hash_;
        report.provenance.seed = spec_.seed;
        report.provenance.input_digest = hex64(digest);
        for (std::size_t si = 0; si < spec_.strategies.size(); ++si) {
            for (std::size_t ri = 0; ri < spec_.ratios.size(); ++ri) {
                const Aggregate& a = aggregates_[si * spec_.ratios.size() + ri];
                SweepRow row;
                row.strategy = spec_.strategies[si];
                row.kappa = spec_.ratios[ri];
                row.n_samples = static_cast<int>(a.n);
                row.accuracy = a.n > 0 ? static_cast<double>(a.correct) / static_cast<double>(a.n) : 0.0;
                row.kept_think_tokens = a.kept;
                row.token_usage_ratio =
                    a.orig > 0 ? static_cast<double>(a.kept) / static_cast<double>(a.orig) : 0.0;
                report.rows.push_back(row);
            }
        }
        return report;
    }

private:
    void load_checkpoint() {
        if (checkpoint_path_.empty()) return;
        std::ifstream in(checkpoint_path_);
        if (!in) return; // first run
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (line.empty()) continue;
            ordered_json j;
            try {
                j = ordered_json::parse(line);
            } catch (const nlohmann::json::exception&) {
                throw CheckpointError("corrupt checkpoint line " + std::to_string(lineno) + " in " +
                                      checkpoint_path_);
            }
            if (j.value("config_hash", "") != hash_ || j.value("mode", "") != mode_) continue;
            const std::string id = j.value("trace_id", "");
            const std::string strategy = j.value("strategy", "");
            const double kappa = j.value("kappa", -1.0);
            std::size_t si = spec_.strategies.size();
            for (std::size_t i = 0; i < spec_.strategies.size(); ++i) {
                if (to_string(spec_.strategies[i]) == strategy) {
                    si = i;
                    break;
                }
            }
            std::size_t ri = spec_.ratios.size();
            for (std::size_t i = 0; i < spec_.ratios.size(); ++i) {
                if (spec_.ratios[i] == kappa) {
                    ri = i;
                    break;
                }
            }
            if (si >= spec_.strategies.size() || ri >= spec_.ratios.size() || id.empty()) {
                throw CheckpointError("checkpoint entry does not match its config hash, line " +
                                      std::to_string(lineno));
            }
            if (!done_.insert(cell_key(id, si, ri)).second) continue; // duplicate append
            Aggregate& a = aggregates_[si * spec_.ratios.size() + ri];
            a.n += 1;
            a.correct += j.value("correct", false) ? 1 : 0;
            a.kept += j.value("kept_tokens", 0ll);
            a.orig += j.value("orig_tokens", 0ll);
        }
    }

    void worker_loop(BoundedQueue& queue) {
        while (auto record = queue.pop()) {
            try {
                process(std::move(*record));
            } catch (...) {
                std::lock_guard lock(error_mu_);
                if (!error_) error_ = std::current_exception();
                failed_.store(true);
                return;
            }
        }
    }

    bool grade(const std::string& think_text, const std::string& problem,
               const std::string& ground_truth) const {
        if (spec_.eval == EvalMode::SyntheticExact) {
            return reward::answers_equal(synth::task_answer_from_think(think_text), ground_truth);
        }
        const std::string completion =
            hooks_.backend_complete(pruner::build_prompt(problem, think_text));
        const auto extracted = reward::extract_answer(completion);
        return extracted && reward::answers_equal(*extracted, ground_truth);
    }

    void process(TraceRecord record) {
        const std::string id = record.id;
        SegmentedTrace seg = segmenter::segment(std::move(record));
        if (!seg.source.ground_truth) {
            throw ValueError("sweep requires ground_truth on every trace, missing on '" + id + "'");
        }
        const std::string truth = *seg.source.ground_truth;

        std::vector<Cell> cells;
        if (mode_ == "step") {
            step_cells(seg, truth, cells);
        } else {
            token_cells(seg, truth, cells);
        }
        commit(id, cells);
    }

    void step_cells(const SegmentedTrace& seg, const std::string& truth, std::vector<Cell>& cells) {
        std::vector<double> entropies;
        entropies.reserve(seg.steps.size());
        for (const auto& s : seg.steps) entropies.push_back(s.entropy_bits);
        const auto orig = static_cast<long long>(segmenter::think_token_count(seg));

        for (std::size_t si = 0; si < spec_.strategies.size(); ++si) {
            for (std::size_t ri = 0; ri < spec_.ratios.size(); ++ri) {
                if (done_.count(cell_key(seg.source.id, si, ri))) continue;
                PruneConfig cfg(spec_.ratios[ri], spec_.strategies[si],
                                spec_.seed ^ fnv1a64(seg.source.id));
                const PrunePlan plan = pruner::select(entropies, cfg);
                const CompressedCot cot = pruner::compress(seg, plan, cfg);
                const std::string think = pruner::render_think(cot.elements, cfg.skip_token);
                Cell cell;
                cell.strategy_idx = si;
                cell.ratio_idx = ri;
                cell.kept = static_cast<long long>(pruner::compressed_think_tokens(seg, cot));
                cell.orig = orig;
                cell.correct = grade(think, seg.source.problem, truth);
                cells.push_back(cell);
            }
        }
    }

    void token_cells(const SegmentedTrace& seg, const std::string& truth, std::vector<Cell>& cells) {
        const entropy::Report report = entropy::analyze(seg);

        // Step-member tokens ranked by ascending entropy, index tie-break.
        std::vector<std::size_t> members;
        for (const auto& s : seg.steps) {
            for (std::size_t t = s.token_span.begin; t < s.token_span.end; ++t) members.push_back(t);
        }
        std::vector<std::size_t> ranking = members;
        std::sort(ranking.begin(), ranking.end(), [&](std::size_t a, std::size_t b) {
            if (report.per_token_bits[a] != report.per_token_bits[b]) {
                return report.per_token_bits[a] < report.per_token_bits[b];
            }
            return a < b;
        });
        const auto orig = static_cast<long long>(members.size());

        // All tokens lying fully inside the think region, in order, with
        // their membership flag; the rebuild walks these.
        std::vector<std::size_t> think_tokens;
        {
            std::size_t off = 0;
            for (std::size_t t = 0; t < seg.source.tokens.size(); ++t) {
                const std::size_t begin = off;
                off += seg.source.tokens[t].text.size();
                if (begin >= seg.think_span.begin && off <= seg.think_span.end) {
                    think_tokens.push_back(t);
                }
            }
        }

        std::vector<char> removed(seg.source.tokens.size(), 0);
        for (std::size_t ri = 0; ri < spec_.ratios.size(); ++ri) {
            if (done_.count(cell_key(seg.source.id, 0, ri))) continue;
            const auto remove_n = static_cast<std::size_t>(
                std::floor(spec_.ratios[ri] * static_cast<double>(orig) + 1e-9));
            std::fill(removed.begin(), removed.end(), 0);
            for (std::size_t i = 0; i < remove_n && i < ranking.size(); ++i) removed[ranking[i]] = 1;

            std::string think;
            for (std::size_t t : think_tokens) {
                if (!removed[t]) think += seg.source.tokens[t].text;
            }
            Cell cell;
            cell.strategy_idx = 0;
            cell.ratio_idx = ri;
            cell.kept = orig - static_cast<long long>(std::min<std::size_t>(remove_n, ranking.size()));
            cell.orig = orig;
            cell.correct = grade(think, seg.source.problem, truth);
            cells.push_back(cell);
        }
    }

    void commit(const std::string& id, const std::vector<Cell>& cells) {
        if (cells.empty()) return;
        if (out_.is_open()) {
            std::string lines;
            for (const Cell& c : cells) {
                ordered_json j;
                j["config_hash"] = hash_;
                j["mode"] = mode_;
                j["trace_id"] = id;
                j["strategy"] = to_string(spec_.strategies[c.strategy_idx]);
                j["kappa"] = spec_.ratios[c.ratio_idx];
                j["correct"] = c.correct;
                j["kept_tokens"] = c.kept;
                j["orig_tokens"] = c.orig;
                lines += j.dump();
                lines += '\n';
            }
            std::lock_guard lock(out_mu_);
            out_ << lines;
            out_.flush();
        }
        std::lock_guard lock(agg_mu_);
        for (const Cell& c : cells) {
            Aggregate& a = aggregates_[c.strategy_idx * spec_.ratios.size() + c.ratio_idx];
            a.n += 1;
            a.correct += c.correct ? 1 : 0;
            a.kept += c.kept;
            a.orig += c.orig;
        }
    }

    SweepSpec spec_;
    SweepHooks hooks_;
    std::string mode_;
    std::string hash_;
    std::string checkpoint_path_;
    std::vector<Aggregate> aggregates_;
    std::unordered_set<std::string> done_; // read-only while workers run
    std::ofstream out_;
    std::mutex out_mu_;
    std::mutex agg_mu_;
    std::mutex error_mu_;
    std::exception_ptr error_;
    std::atomic<bool> failed_{false};
};

} // namespace

SweepReport sweep(const TraceSource& source, const SweepSpec& spec,
                  const std::string& checkpoint_path, const SweepHooks& hooks) {
    SweepEngine engine(spec, hooks, "step", checkpoint_path);
    return engine.run(source);
}

SweepReport token_prune_baseline(const TraceSource& source, const SweepSpec& spec,
                                 const std::string& checkpoint_path, const SweepHooks& hooks) {
    SweepSpec normalized = spec;
    normalized.strategies = {Strategy::LowEntropy}; // the ranking the baseline uses
    SweepEngine engine(normalized, hooks, "token", checkpoint_path);
    return engine.run(source);
}

DatasetStats build_dataset(const TraceSource& source, const PruneConfig& config,
                           std::size_t max_tokens, std::ostream& out) {
    validate(config);
    DatasetStats stats;
    double reduction_sum = 0.0;
    while (auto record = source()) {
        ++stats.input_count;
        SegmentedTrace seg = segmenter::segment(std::move(*record));
        std::vector<double> entropies;
        entropies.reserve(seg.steps.size());
        for (const auto& s : seg.steps) entropies.push_back(s.entropy_bits);

        PruneConfig item = config;
        item.seed = config.seed ^ fnv1a64(seg.source.id);
        const PrunePlan plan = pruner::select(entropies, item);
        const CompressedCot cot = pruner::compress(seg, plan, item);

        if (pruner::compressed_total_tokens(seg, cot) > max_tokens) {
            ++stats.filtered_count;
            continue;
        }
        ++stats.emitted_count;
        const double reduction = pruner::token_reduction(seg, cot);
        reduction_sum += reduction;

        ordered_json j;
        j["id"] = seg.source.id;
        j["problem"] = seg.source.problem;
        j["compressed_think"] = pruner::render_think(cot.elements, item.skip_token);
        j["inference_prompt"] = cot.inference_prompt;
        j["kappa"] = item.kappa;
        j["strategy"] = to_string(item.strategy);
        j["pruned_indices"] = plan.pruned_indices;
        j["token_reduction"] = reduction;
        if (seg.source.ground_truth) j["ground_truth"] = *seg.source.ground_truth;
        out << j.dump() << '\n';
    }
    stats.mean_token_reduction =
        stats.emitted_count > 0 ? reduction_sum / static_cast<double>(stats.emitted_count) : 0.0;
    return stats;
}

// ─── MI-bound oracle ─────────────────────────────────────────

namespace {

struct ParsedJoint {
    std::vector<std::vector<std::string>> steps; // per sequence: per-step value key
    std::vector<std::string> answers;            // per sequence: answer value key
    std::vector<double> probs;
    std::size_t n_steps = 0;
};

ParsedJoint parse_joint(const synth::SyntheticLm& lm, const synth::StepLayout& layout,
                        const std::vector<synth::JointSequence>& joint) {
    ParsedJoint pj;
    pj.n_steps = layout.step_lengths.size();
    pj.steps.reserve(joint.size());
    pj.answers.reserve(joint.size());
    pj.probs.reserve(joint.size());
    for (const auto& seq : joint) {
        std::vector<std::string> steps;
        std::string current;
        std::string answer;
        bool after_close = false;
        for (int id : seq.symbols) {
            const synth::Symbol& sym = lm.vocab[static_cast<std::size_t>(id)];
            switch (sym.kind) {
                case synth::SymbolKind::Content:
                    (after_close ? answer : current) += std::to_string(id) + ",";
                    break;
                case synth::SymbolKind::Delimiter:
                    steps.push_back(std::move(current));
                    current.clear();
                    break;
                case synth::SymbolKind::ThinkClose:
                    steps.push_back(std::move(current));
                    current.clear();
                    after_close = true;
                    break;
            }
        }
        if (steps.size() != pj.n_steps || answer.empty()) {
            throw StructureError("enumerated sequence does not realize the step layout");
        }
        pj.steps.push_back(std::move(steps));
        pj.answers.push_back(std::move(answer));
        pj.probs.push_back(seq.prob);
    }
    return pj;
}

// I(X ; A | C) by exhaustive summation, with X and C given as key extractors
// over parsed sequences.
template <typename XKey, typename CKey>
double conditional_mi(const ParsedJoint& pj, XKey&& x_of, CKey&& c_of) {
    struct Entry {
        double p = 0.0;
        std::string c, cx, ca;
    };
    std::unordered_map<std::string, double> pc, pcx, pca;
    std::unordered_map<std::string, Entry> pcxa;
    for (std::size_t i = 0; i < pj.probs.size(); ++i) {
        const double p = pj.probs[i];
        const std::string c = c_of(i);
        const std::string x = x_of(i);
        const std::string cx = c + kSep + x;
        const std::string ca = c + kSep + pj.answers[i];
        const std::string cxa = cx + kSep + pj.answers[i];
        pc[c] += p;
        pcx[cx] += p;
        pca[ca] += p;
        Entry& e = pcxa[cxa];
        e.p += p;
        if (e.c.empty()) {
            e.c = c;
            e.cx = cx;
            e.ca = ca;
        }
    }
    double mi = 0.0;
    for (const auto& [key, e] : pcxa) {
        mi += e.p * std::log2(e.p * pc[e.c] / (pcx[e.cx] * pca[e.ca]));
    }
    return std::max(0.0, mi);
}

// H(S_j | S_<j) by exhaustive summation over step prefixes.
double prefix_conditional_entropy(const ParsedJoint& pj, std::size_t j) {
    std::unordered_map<std::string, double> p_prefix, p_prefix_sj;
    std::unordered_map<std::string, std::string> prefix_of;
    for (std::size_t i = 0; i < pj.probs.size(); ++i) {
        std::string prefix;
        for (std::size_t k = 0; k < j; ++k) prefix += pj.steps[i][k] + kSep;
        const std::string with_sj = prefix + pj.steps[i][j];
        p_prefix[prefix] += pj.probs[i];
        p_prefix_sj[with_sj] += pj.probs[i];
        prefix_of.emplace(with_sj, prefix);
    }
    double h = 0.0;
    for (const auto& [key, p] : p_prefix_sj) {
        h -= p * std::log2(p / p_prefix[prefix_of[key]]);
    }
    return std::max(0.0, h);
}

std::string steps_key(const ParsedJoint& pj, std::size_t i, const std::vector<char>& include) {
    std::string key;
    for (std::size_t k = 0; k < pj.n_steps; ++k) {
        if (include[k]) key += pj.steps[i][k] + kSep;
    }
    return key;
}

} // namespace

MiReport mi_oracle(const synth::SyntheticLm& lm, const synth::StepLayout& layout,
                   std::optional<std::vector<std::size_t>> subset) {
    const auto joint = synth::exact_joint(lm, 64);
    const ParsedJoint pj = parse_joint(lm, layout, joint);
    const std::size_t n = pj.n_steps;
    constexpr double kTol = 1e-9;

    MiReport report;
    report.rows.reserve(n);
    for (std::size_t j = 0; j < n; ++j) {
        std::vector<char> others(n, 1);
        others[j] = 0;
        MiRow row;
        row.step_index = j;
        row.mi_bits = conditional_mi(
            pj, [&](std::size_t i) { return pj.steps[i][j]; },
            [&](std::size_t i) { return steps_key(pj, i, others); });
        row.bound_bits = prefix_conditional_entropy(pj, j);
        row.holds = row.mi_bits <= row.bound_bits + kTol;
        report.rows.push_back(row);
    }

    // Default subset: the floor(N/2) steps with the smallest bounds, i.e.
    // the low-entropy half.
    std::vector<std::size_t> chosen;
    if (subset) {
        chosen = *subset;
        for (std::size_t k : chosen) {
            if (k >= n) throw ValueError("subset index out of range");
        }
    } else {
        std::vector<std::size_t> order(n);
        for (std::size_t i = 0; i < n; ++i) order[i] = i;
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            if (report.rows[a].bound_bits != report.rows[b].bound_bits) {
                return report.rows[a].bound_bits < report.rows[b].bound_bits;
            }
            return a < b;
        });
        const std::size_t take = std::max<std::size_t>(1, n / 2);
        chosen.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take));
    }
    // Indices processed in descending order.
    std::sort(chosen.rbegin(), chosen.rend());

    MiAggregate agg;
    agg.subset = chosen;
    std::vector<char> in_subset(n, 0);
    for (std::size_t k : chosen) in_subset[k] = 1;
    std::vector<char> complement(n, 1);
    for (std::size_t k = 0; k < n; ++k) complement[k] = in_subset[k] ? 0 : 1;

    agg.mi_bits = conditional_mi(
        pj, [&](std::size_t i) { return steps_key(pj, i, in_subset); },
        [&](std::size_t i) { return steps_key(pj, i, complement); });

    bool holds = true;
    std::vector<char> excluded(n, 0);
    double chain_sum = 0.0;
    for (std::size_t t = 0; t < chosen.size(); ++t) {
        const std::size_t k = chosen[t];
        excluded[k] = 1;
        std::vector<char> cond(n, 1);
        for (std::size_t q = 0; q < n; ++q) cond[q] = excluded[q] ? 0 : 1;
        const double term = conditional_mi(
            pj, [&](std::size_t i) { return pj.steps[i][k]; },
            [&](std::size_t i) { return steps_key(pj, i, cond); });
        agg.chain_terms.push_back(term);
        chain_sum += term;
        agg.bound_sum_bits += report.rows[k].bound_bits;
        if (term > report.rows[k].bound_bits + kTol) holds = false;
    }
    if (std::abs(chain_sum - agg.mi_bits) > kTol) holds = false; // chain-rule identity
    if (agg.mi_bits > agg.bound_sum_bits + kTol) holds = false;
    agg.holds = holds;
    report.aggregate = std::move(agg);
    return report;
}

// ─── Rendering ───────────────────────────────────────────────

ReportFormat report_format_from_string(const std::string& s) {
    if (s == "table") return ReportFormat::Table;
    if (s == "csv") return ReportFormat::Csv;
    if (s == "plotdata") return ReportFormat::PlotData;
    throw ValueError("unknown format '" + s + "' (expected table|csv|plotdata)");
}

std::string render_report(const SweepReport& report, ReportFormat format) {
    std::string out;
    char buf[256];
    switch (format) {
        case ReportFormat::Table:
            out += "strategy       kappa  accuracy  kept_tokens   usage       n\n";
            for (const auto& r : report.rows) {
                std::snprintf(buf, sizeof buf, "%-13s %6.3f  %8.4f  %11lld  %6.4f  %6d\n",
                              to_string(r.strategy).c_str(), r.kappa, r.accuracy,
                              r.kept_think_tokens, r.token_usage_ratio, r.n_samples);
                out += buf;
            }
            break;
        case ReportFormat::Csv:
            out += "strategy,kappa,accuracy,kept_think_tokens,token_usage_ratio,n_samples\n";
            for (const auto& r : report.rows) {
                std::snprintf(buf, sizeof buf, "%s,%.6f,%.6f,%lld,%.6f,%d\n",
                              to_string(r.strategy).c_str(), r.kappa, r.accuracy,
                              r.kept_think_tokens, r.token_usage_ratio, r.n_samples);
                out += buf;
            }
            break;
        case ReportFormat::PlotData:
            out += "x,y,series\n";
            for (const auto& r : report.rows) {
                std::snprintf(buf, sizeof buf, "%.6f,%.6f,acc_vs_kappa/%s\n", r.kappa, r.accuracy,
                              to_string(r.strategy).c_str());
                out += buf;
            }
            for (const auto& r : report.rows) {
                std::snprintf(buf, sizeof buf, "%.6f,%.6f,acc_vs_usage/%s\n", r.token_usage_ratio,
                              r.accuracy, to_string(r.strategy).c_str());
                out += buf;
            }
            break;
    }
    return out;
}

std::string serialize_report(const SweepReport& report) {
    ordered_json j;
    j["provenance"] = {{"config_hash", report.provenance.config_hash},
                       {"seed", report.provenance.seed},
                       {"input_digest", report.provenance.input_digest}};
    j["complete"] = report.complete;
    ordered_json rows = ordered_json::array();
    for (const auto& r : report.rows) {
        ordered_json row;
        row["strategy"] = to_string(r.strategy);
        row["kappa"] = r.kappa;
        row["accuracy"] = r.accuracy;
        row["kept_think_tokens"] = r.kept_think_tokens;
        row["token_usage_ratio"] = r.token_usage_ratio;
        row["n_samples"] = r.n_samples;
        rows.push_back(std::move(row));
    }
    j["rows"] = std::move(rows);
    return j.dump();
}

SweepReport parse_report(const std::string& json_text) {
    ordered_json j;
    try {
        j = ordered_json::parse(json_text);
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(std::string("report is not valid JSON: ") + e.what());
    }
    SweepReport report;
    if (!j.is_object() || !j.contains("rows") || !j["rows"].is_array()) {
        throw SchemaError("report must be an object with a 'rows' array");
    }
    if (j.contains("provenance") && j["provenance"].is_object()) {
        const auto& p = j["provenance"];
        report.provenance.config_hash = p.value("config_hash", "");
        report.provenance.seed = p.value("seed", 0ull);
        report.provenance.input_digest = p.value("input_digest", "");
    }
    report.complete = j.value("complete", true);
    for (const auto& row : j["rows"]) {
        SweepRow r;
        r.strategy = strategy_from_string(row.value("strategy", "low-entropy"));
        r.kappa = row.value("kappa", 0.0);
        r.accuracy = row.value("accuracy", 0.0);
        r.kept_think_tokens = row.value("kept_think_tokens", 0ll);
        r.token_usage_ratio = row.value("token_usage_ratio", 0.0);
        r.n_samples = row.value("n_samples", 0);
        report.rows.push_back(r);
    }
    return report;
}

} // namespace cotc::experiment
