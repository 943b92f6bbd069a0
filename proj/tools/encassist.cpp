// Command-line front end: ingest, stats, export-ft, run, compare, report, train-toy,
// build-pool.

#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "encassist/analysis.hpp"
#include "encassist/corpus.hpp"
#include "encassist/encoder.hpp"
#include "encassist/error.hpp"
#include "encassist/retriever.hpp"
#include "encassist/runner.hpp"

namespace fs = std::filesystem;
using namespace encassist;

namespace {

std::string with_split(std::string path, const std::string& split) {
  if (const auto at = path.find("{split}"); at != std::string::npos) path.replace(at, 7, split);
  return path;
}

const std::vector<std::string> kSplits = {"train", "validation", "test"};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Encoder-assisted LLM sentiment classification toolkit"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  // ingest
  std::vector<std::string> ingest_inputs;
  std::uint64_t ingest_seed = 42;
  std::string ingest_out;
  bool ingest_balance = false;
  auto* ingest = app.add_subcommand("ingest", "Merge per-source JSONL files into one shuffled split");
  ingest->add_option("inputs", ingest_inputs, "Source JSONL files, merged in this order")
      ->required()
      ->check(CLI::ExistingFile);
  ingest->add_option("--seed", ingest_seed, "Shuffle seed")->capture_default_str();
  ingest->add_option("--out", ingest_out, "Output JSONL")->required();
  ingest->add_flag("--balance", ingest_balance, "Oversample minority classes after merging");

  // stats
  std::string stats_input;
  std::string stats_split = "train";
  auto* stats = app.add_subcommand("stats", "Label and source distribution of a split");
  stats->add_option("input", stats_input, "Split JSONL; {split} is substituted")->required();
  stats->add_option("--split", stats_split, "Split name")->check(CLI::IsMember(kSplits));

  // export-ft
  std::string export_input;
  std::string export_split = "train";
  std::string export_template = "FT";
  std::string export_backend;
  std::string export_out;
  auto* export_cmd = app.add_subcommand("export-ft", "Write a chat fine-tuning JSONL file");
  export_cmd->add_option("input", export_input, "Split JSONL; {split} is substituted")->required();
  export_cmd->add_option("--split", export_split, "Split name")->check(CLI::IsMember(kSplits));
  export_cmd->add_option("--template", export_template, "FT-M, FT or FT-L")->capture_default_str();
  export_cmd->add_option("--backend", export_backend, "Encoder backend (file:PATH, http:URL, toy:PATH)");
  export_cmd->add_option("--out", export_out, "Output JSONL")->required();

  // run
  std::string run_config;
  std::string run_split;
  std::string run_signature;
  std::string run_backend;
  std::string run_model;
  std::optional<std::int64_t> run_seed;
  std::optional<double> run_temperature;
  std::string run_rounds;
  std::string run_cache;
  std::string run_out = "results";
  auto* run = app.add_subcommand("run", "Run one experiment and persist its report and runs");
  run->add_option("--config", run_config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  run->add_option("--split", run_split, "Override the split")->check(CLI::IsMember(kSplits));
  run->add_option("--signature", run_signature, "Override the signature ('none' for minimal)");
  run->add_option("--backend", run_backend, "Override the encoder backend");
  run->add_option("--model", run_model, "Override the LLM model");
  run->add_option("--seed", run_seed, "Run a single round with this seed");
  run->add_option("--temperature", run_temperature, "Temperature for the single --seed round");
  run->add_option("--rounds", run_rounds, "Rounds as seed:temperature,...");
  run->add_option("--cache-dir", run_cache, "Response cache directory");
  run->add_option("--out", run_out, "Output directory")->capture_default_str();

  // compare
  std::string compare_a;
  std::string compare_b;
  std::size_t compare_round = 1;
  BootstrapOptions compare_bootstrap;
  std::string compare_out;
  auto* compare_cmd = app.add_subcommand("compare", "Paired comparison of two persisted experiments");
  compare_cmd->add_option("a", compare_a, "Baseline report JSON")->required()->check(CLI::ExistingFile);
  compare_cmd->add_option("b", compare_b, "Candidate report JSON")->required()->check(CLI::ExistingFile);
  compare_cmd->add_option("--round", compare_round, "Round to pair (1-based)")->capture_default_str();
  compare_cmd->add_option("--resamples", compare_bootstrap.resamples, "Bootstrap resamples")
      ->capture_default_str();
  compare_cmd->add_option("--seed", compare_bootstrap.seed, "Bootstrap seed")->capture_default_str();
  compare_cmd->add_option("--out", compare_out, "Write the comparison as JSON");

  // report
  std::vector<std::string> report_inputs;
  std::string report_out;
  auto* report = app.add_subcommand("report", "Summary table over persisted reports");
  report->add_option("reports", report_inputs, "Report JSON files")->required()->check(CLI::ExistingFile);
  report->add_option("--out", report_out, "Write the table to a file");

  // train-toy
  std::string toy_input;
  long toy_dim = 256;
  int toy_epochs = 200;
  std::uint64_t toy_seed = 42;
  std::string toy_out;
  auto* toy = app.add_subcommand("train-toy", "Train the bag-of-words desk encoder");
  toy->add_option("input", toy_input, "Training JSONL")->required()->check(CLI::ExistingFile);
  toy->add_option("--dim", toy_dim, "Hashed feature dimension")->capture_default_str();
  toy->add_option("--epochs", toy_epochs, "Gradient steps")->capture_default_str();
  toy->add_option("--seed", toy_seed, "Seed recorded in the model")->capture_default_str();
  toy->add_option("--out", toy_out, "Model JSON")->required();

  // build-pool
  std::string pool_input;
  std::string pool_backend;
  std::size_t pool_size = 300;
  std::uint64_t pool_seed = 42;
  std::string pool_out;
  auto* pool = app.add_subcommand("build-pool", "Embed a seeded sample of reviews as an example pool");
  pool->add_option("input", pool_input, "Reviews JSONL")->required()->check(CLI::ExistingFile);
  pool->add_option("--backend", pool_backend, "Encoder backend (file:PATH, http:URL, toy:PATH)")
      ->required();
  pool->add_option("--size", pool_size, "Pool size")->capture_default_str();
  pool->add_option("--seed", pool_seed, "Sampling seed")->capture_default_str();
  pool->add_option("--out", pool_out, "Pool JSONL")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*ingest) {
      std::vector<std::pair<std::string, std::vector<Review>>> sources;
      for (const auto& path : ingest_inputs) sources.emplace_back(path, read_reviews(fs::path(path)));
      auto merged = merge_datasets(sources, ingest_seed);
      if (ingest_balance) merged = oversample_balance(merged, ingest_seed);
      write_reviews(fs::path(ingest_out), merged);
      std::cout << "wrote " << merged.size() << " reviews to " << ingest_out << '\n';
    } else if (*stats) {
      const auto reviews = read_reviews(fs::path(with_split(stats_input, stats_split)));
      std::cout << format_stats(split_stats(reviews), stats_split);
    } else if (*export_cmd) {
      const auto reviews = read_reviews(fs::path(with_split(export_input, export_split)));
      std::unique_ptr<EncoderBackend> backend;
      if (!export_backend.empty()) backend = open_backend(export_backend);
      const auto manifest = export_ft(reviews, parse_ft_template(export_template), backend.get(),
                                      export_backend, export_out);
      std::cout << "wrote " << manifest.records << " " << manifest.template_name << " records to "
                << manifest.output.string() << '\n';
    } else if (*run) {
      ExperimentConfig config = load_config(run_config);
      if (!run_split.empty()) config.split = run_split;
      if (!run_signature.empty()) {
        if (run_signature == "none") {
          config.signature.reset();
        } else {
          config.signature = parse_signature(run_signature);
        }
      }
      if (!run_backend.empty()) config.encoder_backend = run_backend;
      if (!run_model.empty()) config.llm_model = run_model;
      if (!run_rounds.empty()) config.rounds = parse_rounds(run_rounds);
      if (run_seed) config.rounds = {{*run_seed, run_temperature.value_or(0.0)}};
      else if (run_temperature) throw ConfigError("--temperature requires --seed");
      if (!run_cache.empty()) config.cache_dir = run_cache;
      validate(config);
      auto resources = open_resources(config);
      const auto result = run_experiment(config, resources);
      persist(result, run_out);
      std::cout << format_report(result);
      if (resources.llm) {
        std::cerr << "network calls: " << resources.llm->network_calls() << '\n';
      }
    } else if (*compare_cmd) {
      const auto a = load_persisted(compare_a);
      const auto b = load_persisted(compare_b);
      if (compare_round < 1 || compare_round > a.rounds.size() || compare_round > b.rounds.size()) {
        throw ConfigError("--round " + std::to_string(compare_round) + " is not present in both reports");
      }
      const auto id_a = a.report.at("config").at("id").get<std::string>();
      const auto id_b = b.report.at("config").at("id").get<std::string>();
      const auto result = encassist::compare(a.rounds[compare_round - 1], b.rounds[compare_round - 1],
                                             id_a, id_b, compare_bootstrap);
      std::cout << format_comparison(result);
      if (!compare_out.empty()) write_file_atomic(compare_out, to_json(result).dump(2) + "\n");
    } else if (*report) {
      std::vector<json> reports;
      for (const auto& path : report_inputs) reports.push_back(load_persisted(path).report);
      const std::string table = format_summary(reports);
      std::cout << table;
      if (!report_out.empty()) write_file_atomic(report_out, table);
    } else if (*toy) {
      const auto corpus = read_reviews(fs::path(toy_input));
      std::vector<double> trace;
      const auto model = toy_train(corpus, toy_dim, toy_epochs, toy_seed, &trace);
      model.save(toy_out);
      std::cout << "trained on " << corpus.size() << " reviews, loss "
                << (trace.empty() ? model.loss(corpus) : trace.back()) << '\n';
    } else if (*pool) {
      const auto backend = open_backend(pool_backend);
      const auto built = build_pool(read_reviews(fs::path(pool_input)), *backend, pool_size, pool_seed);
      built.save(pool_out);
      std::cout << "wrote " << built.size() << " pool entries to " << pool_out << '\n';
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
