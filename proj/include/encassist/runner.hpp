#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "encassist/analysis.hpp"
#include "encassist/corpus.hpp"
#include "encassist/encoder.hpp"
#include "encassist/jsonl.hpp"
#include "encassist/llm.hpp"
#include "encassist/prompts.hpp"
#include "encassist/retriever.hpp"

namespace encassist {

inline constexpr std::string_view kVersion = "encassist 0.3.0";
inline constexpr std::string_view kMergedDataset = "Merged";

struct RoundSpec {
  std::int64_t seed = 42;
  double temperature = 0.0;
  friend bool operator==(const RoundSpec&, const RoundSpec&) = default;
};

/// Seed 42 at temperature 0.0, then seed 123 at temperature 0.1.
std::vector<RoundSpec> default_rounds();

/// "42:0.0,123:0.1"
std::vector<RoundSpec> parse_rounds(std::string_view spec);

enum class RetrievalMode { top_k, balanced };

struct RetrievalConfig {
  RetrievalMode mode = RetrievalMode::top_k;
  std::size_t k = 5;
  std::size_t per_class = 2;
  /// Either a prebuilt pool file...
  std::filesystem::path pool_path;
  /// ...or reviews to sample `pool_size` entries from with `pool_seed`.
  std::filesystem::path pool_source;
  std::size_t pool_size = 300;
  std::uint64_t pool_seed = 42;
};

struct LlmEndpoint {
  std::string base_url;
  std::string api_key_env = "OPENAI_API_KEY";
  int max_in_flight = 8;
  int max_output_tokens = 8;
  RetryPolicy retry;
};

struct ExperimentConfig {
  std::string id;
  std::string description;
  /// Absent with an LLM means the minimal (FT-M) format: bare review under
  /// the minimal system message. Absent without an LLM means encoder-only.
  std::optional<SignatureKind> signature;
  /// Backend spec, "file:PATH" | "http:URL" | "toy:PATH". "{split}" is
  /// replaced by `split`.
  std::optional<std::string> encoder_backend;
  std::optional<std::string> llm_model;
  LlmEndpoint llm;
  std::vector<RoundSpec> rounds = default_rounds();
  std::string split = "test";
  /// "{split}" in the path is replaced by `split`.
  std::filesystem::path split_path;
  std::optional<RetrievalConfig> retrieval;
  std::optional<double> ft_cost_usd;
  std::filesystem::path cache_dir;
};

/// Throws ConfigError describing the first violated rule.
void validate(const ExperimentConfig& config);
ExperimentConfig config_from_json(const json& document);
json to_json(const ExperimentConfig& config);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Live objects an experiment needs. Tests inject their own.
struct ExperimentResources {
  std::shared_ptr<const EncoderBackend> encoder;
  std::shared_ptr<const ExamplePool> pool;
  std::shared_ptr<ChatClient> llm;
  std::vector<Review> split;
};

ExperimentResources open_resources(const ExperimentConfig& config);

struct RoundResult {
  RoundSpec round;
  Run run;  // sorted by id
  /// Keyed by dataset name: "Merged", then per-source display names present.
  std::map<std::string, MetricsReport> datasets;
  std::size_t unparseable = 0;
  Usage usage;
};

struct ExperimentReport {
  ExperimentConfig config;
  std::vector<RoundResult> rounds;
  std::map<std::string, AggregateReport> aggregate;  // when >= 2 rounds
  std::optional<CostLedger> cost;                   // when ft_cost_usd is set
};

/// Per-dataset metrics; Merged pools every example rather than averaging.
std::map<std::string, MetricsReport> dataset_metrics(const Run& run);

ExperimentReport run_experiment(const ExperimentConfig& config, ExperimentResources& resources);

json to_json(const ExperimentReport& report);
std::string format_report(const ExperimentReport& report);

/// Writes <out>/<id>.report.json, <out>/<id>.report.txt and
/// <out>/runs/<id>.round<k>.jsonl.
void persist(const ExperimentReport& report, const std::filesystem::path& out_dir);

/// A persisted report together with its run files.
struct PersistedExperiment {
  json report;
  std::vector<Run> rounds;
};

PersistedExperiment load_persisted(const std::filesystem::path& report_json);

struct DatasetDelta {
  std::string dataset;
  double f1_a = 0.0;
  double f1_b = 0.0;
  double delta = 0.0;
};

struct ComparisonReport {
  std::string id_a;
  std::string id_b;
  std::vector<DatasetDelta> deltas;
  McNemarResult mcnemar;
  BootstrapResult bootstrap;
  std::optional<FollowReport> follow;
};

/// Throws PairingError when the runs do not cover the same examples.
ComparisonReport compare(const Run& run_a, const Run& run_b, std::string id_a = "A",
                         std::string id_b = "B", const BootstrapOptions& bootstrap = {});

json to_json(const ComparisonReport& report);
std::string format_comparison(const ComparisonReport& report);

/// Summary table of several persisted reports, one row per experiment.
std::string format_summary(const std::vector<json>& reports);

struct ExportManifest {
  std::string template_name;
  std::string backend;
  std::size_t records = 0;
  std::filesystem::path output;
};

/// Writes the JSONL and `<out>.manifest.json`. FT-L without a backend is a
/// ConfigError.
ExportManifest export_ft(const std::vector<Review>& dataset, FtTemplateKind kind,
                         const EncoderBackend* backend, std::string backend_spec,
                         const std::filesystem::path& out_path);

}  // namespace encassist
