#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "encassist/corpus.hpp"
#include "encassist/jsonl.hpp"
#include "encassist/label.hpp"

namespace encassist {

/// One scored example. An empty `predicted` marks an unparseable completion,
/// which counts as wrong for every class.
struct RunRecord {
  std::string review_id;
  Source source = Source::sst_local;
  Label gold = Label::neutral;
  std::optional<Label> encoder_label;
  std::optional<Label> predicted;
  std::string completion;

  bool correct() const noexcept { return predicted && *predicted == gold; }
  friend bool operator==(const RunRecord&, const RunRecord&) = default;
};

using Run = std::vector<RunRecord>;

json to_json(const RunRecord& record);
RunRecord run_record_from_json(const json& record);
void write_run(const std::filesystem::path& path, const Run& run);
Run read_run(const std::filesystem::path& path);

/// Sorted copy by review_id; throws PairingError on duplicate ids.
Run sorted_by_id(Run run);

/// All values on a 0-100 scale at full precision.
struct MetricsReport {
  double macro_f1 = 0.0;
  double accuracy = 0.0;
  std::array<double, kNumLabels> per_class_f1{};
  std::size_t n = 0;
};

json to_json(const MetricsReport& report);

/// Requires a non-empty run (throws DomainError).
MetricsReport macro_f1(const Run& run);

struct McNemarResult {
  std::uint64_t b = 0;  // A correct, B wrong
  std::uint64_t c = 0;  // A wrong, B correct
  double p_value = 1.0;
};

/// Exact two-sided binomial p-value for b and c discordant pairs.
double mcnemar_exact_p(std::uint64_t b, std::uint64_t c);

/// Runs are paired by id; throws PairingError when ids or golds differ.
McNemarResult mcnemar(const Run& run_a, const Run& run_b);

struct BootstrapResult {
  double delta_f1 = 0.0;  // macroF1(B) - macroF1(A) on the observed data
  double ci_low = 0.0;
  double ci_high = 0.0;
  double p_value = 1.0;
  std::size_t resamples = 0;
  double coverage = 0.0;
  std::uint64_t seed = 0;
};

struct BootstrapOptions {
  std::size_t resamples = 10'000;
  double coverage = 0.95;
  std::uint64_t seed = 42;
  /// 0 uses hardware concurrency. Results do not depend on this.
  unsigned workers = 0;
};

/// Paired bootstrap of the macro-F1 difference. Resample r draws its indices
/// from a stream seeded by derive_seed(seed, r).
BootstrapResult paired_bootstrap(const Run& run_a, const Run& run_b,
                                 const BootstrapOptions& options = {});

struct FollowReport {
  std::uint64_t changed_followed_correct = 0;
  std::uint64_t changed_followed_wrong = 0;
  double success_rate = 0.0;  // percent
  std::int64_t net = 0;
  double follow_rate = 0.0;   // percent
  double follow_rate_encoder_correct = 0.0;
  double follow_rate_encoder_wrong = 0.0;
  double discrimination_gap = 0.0;  // percentage points
  bool success_rate_empty = false;
  bool discrimination_gap_empty = false;
  std::uint64_t baseline_disagreed = 0;  // baseline != encoder label
  std::size_t n = 0;
};

json to_json(const FollowReport& report);

/// Encoder labels come from the augmented run's records; both runs must cover
/// the same ids with the same golds.
FollowReport follow_analysis(const Run& baseline, const Run& augmented);

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation, divisor n - 1
};

/// Mean and sample std of an arbitrary series; needs at least two values.
MeanStd mean_sample_std(const std::vector<double>& values);

struct AggregateReport {
  MeanStd macro_f1;
  MeanStd accuracy;
  std::array<MeanStd, kNumLabels> per_class_f1{};
  std::size_t runs = 0;
};

json to_json(const AggregateReport& report);

/// Throws AggregationError for fewer than two reports.
AggregateReport aggregate_runs(const std::vector<MetricsReport>& reports);

/// "79.41 ± 0.16"
std::string format_mean_std(const MeanStd& value);

/// trained_tokens * rate / 1e6, rounded to cents.
double token_ft_cost(std::uint64_t trained_tokens, double rate_usd_per_million);

/// GPU-hours cost: rate per hour times elapsed seconds, rounded to cents.
double gpu_ft_cost(double rate_usd_per_hour, std::uint64_t seconds);

/// ft_cost / f1 rounded to cents; throws DomainError for f1 <= 0.
double cost_per_f1(double ft_cost_usd, double f1);

struct CostLedger {
  double ft_cost_usd = 0.0;
  double f1 = 0.0;
  double ratio_usd_per_f1 = 0.0;
};

CostLedger make_cost_ledger(double ft_cost_usd, double f1);
json to_json(const CostLedger& ledger);

}  // namespace encassist
