#pragma once

#include "cotc/pruner.hpp"
#include "cotc/synthetic.hpp"
#include "cotc/trace.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace cotc::experiment {

// Pull-based trace stream: returns std::nullopt when exhausted. Keeps memory
// bounded by what is in flight, not by file size.
using TraceSource = std::function<std::optional<TraceRecord>()>;

TraceSource vector_source(std::vector<TraceRecord> traces);
TraceSource jsonl_source(std::istream& in);

enum class EvalMode {
    ReplayAgainstBackend, // complete the Fig.-3 prompt through a live backend
    SyntheticExact,       // exact idealized continuation for the bundled task family
};

struct SweepSpec {
    std::vector<double> ratios = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
    std::vector<Strategy> strategies = {Strategy::LowEntropy, Strategy::HighEntropy,
                                        Strategy::Random};
    EvalMode eval = EvalMode::SyntheticExact;
    int samples = 0; // 0 = consume the whole stream
    std::uint64_t seed = 0;
    int jobs = 1;
};

void validate(const SweepSpec& spec);

struct SweepRow {
    Strategy strategy = Strategy::LowEntropy;
    double kappa = 0.0;
    double accuracy = 0.0;
    long long kept_think_tokens = 0;
    double token_usage_ratio = 0.0;
    int n_samples = 0;
};

struct SweepProvenance {
    std::string config_hash;
    std::uint64_t seed = 0;
    std::string input_digest;
};

struct SweepReport {
    std::vector<SweepRow> rows; // ordered by (strategy, ratio) as given in the spec
    SweepProvenance provenance;
    bool complete = true; // false when stopped early; resume from the checkpoint
};

struct SweepHooks {
    // Polled between traces; returning true stops the run with partial
    // results persisted in the checkpoint.
    std::function<bool()> should_stop;
    // Sends an inference prompt to a backend and returns the completion text.
    // Required for EvalMode::ReplayAgainstBackend.
    std::function<std::string(const std::string& prompt)> backend_complete;
};

// Stable digest of the effective sweep configuration; checkpoint entries are
// addressed by it so re-running with a changed config cannot mix results.
std::string config_hash(const SweepSpec& spec, const std::string& mode);

/**
 * Compress-and-regrade sweep over (strategy x ratio). Each finished
 * (trace, strategy, kappa) cell is appended to the checkpoint file as it
 * completes; cells already present (same config hash) are not recomputed,
 * so an interrupted sweep resumes to a byte-identical report.
 */
SweepReport sweep(const TraceSource& source, const SweepSpec& spec,
                  const std::string& checkpoint_path, const SweepHooks& hooks = {});

// Token-level masking baseline: removes the lowest-entropy step-member
// tokens irrespective of step boundaries, at the same ratios. Rows carry
// Strategy::LowEntropy (the ranking it uses). The ratio is applied to the
// think-token count: removal = floor(ratio * tokens).
SweepReport token_prune_baseline(const TraceSource& source, const SweepSpec& spec,
                                 const std::string& checkpoint_path, const SweepHooks& hooks = {});

struct DatasetStats {
    std::size_t input_count = 0;
    std::size_t emitted_count = 0;
    std::size_t filtered_count = 0;
    double mean_token_reduction = 0.0; // over emitted records
};

/**
 * Streams traces through compression and writes the compressed dataset,
 * one JSON record per line, dropping every record whose compressed
 * completion token count exceeds max_tokens. For Strategy::Random the
 * per-record seed is config.seed mixed with the record id.
 */
DatasetStats build_dataset(const TraceSource& source, const PruneConfig& config,
                           std::size_t max_tokens, std::ostream& out);

// ─── MI-bound oracle ─────────────────────────────────────────

struct MiRow {
    std::size_t step_index = 0;
    double mi_bits = 0.0;    // I(S_j ; A | all other steps), exact
    double bound_bits = 0.0; // H(S_j | S_<j), exact
    bool holds = false;      // mi <= bound + 1e-9
};

struct MiAggregate {
    std::vector<std::size_t> subset; // processed in descending index order
    double mi_bits = 0.0;            // I(subset ; A | complement)
    double bound_sum_bits = 0.0;     // sum of H(S_k | S_<k) over the subset
    std::vector<double> chain_terms; // per-index decomposition of mi_bits
    bool holds = false;
};

struct MiReport {
    std::vector<MiRow> rows;
    MiAggregate aggregate;
};

/**
 * Numerically verifies the redundancy bound on an enumerable model: for each
 * step, brute-force I(S_j;A|other steps) against H(S_j|S_<j), plus the
 * aggregate inequality for a low-entropy subset (default: the floor(N/2)
 * steps with the smallest bounds). All quantities are exhaustive sums over
 * the exact joint; nothing is sampled.
 */
MiReport mi_oracle(const synth::SyntheticLm& lm, const synth::StepLayout& layout,
                   std::optional<std::vector<std::size_t>> subset = std::nullopt);

// ─── Rendering ───────────────────────────────────────────────

enum class ReportFormat { Table, Csv, PlotData };

ReportFormat report_format_from_string(const std::string& s);

// Deterministic rendering; PlotData emits x,y,series triples for the
// accuracy-vs-kappa and accuracy-vs-token-usage curves.
std::string render_report(const SweepReport& report, ReportFormat format);

// Machine-readable report file (JSON). parse_report inverts it.
std::string serialize_report(const SweepReport& report);
SweepReport parse_report(const std::string& json_text);

} // namespace cotc::experiment
