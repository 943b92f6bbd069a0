#include "encassist/runner.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <sstream>
#include <thread>

#include "encassist/error.hpp"
#include "encassist/numfmt.hpp"

namespace encassist {

namespace {

/// Runs fn(i) for i in [0, n) on up to `workers` threads. The first exception
/// is rethrown after all threads finish.
template <typename Fn>
void parallel_for(std::size_t n, int workers, Fn&& fn) {
  const auto count = static_cast<std::size_t>(std::max(1, workers));
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::atomic<bool> stop{false};
  const auto loop = [&] {
    while (!stop.load()) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        stop = true;
      }
    }
  };
  if (count == 1 || n <= 1) {
    loop();
  } else {
    std::vector<std::thread> threads;
    for (std::size_t t = 0; t < std::min(count, n); ++t) threads.emplace_back(loop);
    for (auto& t : threads) t.join();
  }
  if (failure) std::rethrow_exception(failure);
}

std::string_view to_string(RetrievalMode mode) {
  return mode == RetrievalMode::top_k ? "top_k" : "balanced";
}

RetrievalMode parse_retrieval_mode(std::string_view text) {
  if (text == "top_k") return RetrievalMode::top_k;
  if (text == "balanced") return RetrievalMode::balanced;
  throw ConfigError("unknown retrieval mode \"" + std::string(text) + "\"");
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::filesystem::path& p) {
  if (p.empty() || p.is_absolute() || base.empty()) return p;
  return base / p;
}

std::string resolve_backend(const std::filesystem::path& base, const std::string& spec) {
  const auto colon = spec.find(':');
  if (colon == std::string::npos) return spec;
  const std::string kind = spec.substr(0, colon);
  if (kind != "file" && kind != "toy") return spec;
  return kind + ":" + resolve(base, spec.substr(colon + 1)).string();
}

std::vector<std::string> dataset_order(const std::map<std::string, MetricsReport>& datasets) {
  std::vector<std::string> names;
  if (datasets.count(std::string(kMergedDataset))) names.emplace_back(kMergedDataset);
  for (Source source : kAllSources) {
    const std::string name(display_name(source));
    if (datasets.count(name)) names.push_back(name);
  }
  return names;
}

std::string pad(std::string text, std::size_t width) {
  // display width counts UTF-8 code points
  std::size_t chars = 0;
  for (unsigned char ch : text) chars += (ch & 0xC0) != 0x80;
  if (chars < width) text.append(width - chars, ' ');
  return text;
}

std::string pad_left(std::string text, std::size_t width) {
  std::size_t chars = 0;
  for (unsigned char ch : text) chars += (ch & 0xC0) != 0x80;
  if (chars < width) text.insert(0, width - chars, ' ');
  return text;
}

std::string mode_name(const ExperimentConfig& config) {
  if (config.signature) return std::string(to_string(*config.signature));
  return config.llm_model ? "minimal" : "encoder-only";
}

std::string run_file_name(const std::string& id, std::size_t round) {
  return "runs/" + id + ".round" + std::to_string(round + 1) + ".jsonl";
}

}  // namespace

// ---------------------------------------------------------------------------
// Rounds

std::vector<RoundSpec> default_rounds() { return {{42, 0.0}, {123, 0.1}}; }

std::vector<RoundSpec> parse_rounds(std::string_view spec) {
  std::vector<RoundSpec> rounds;
  std::size_t start = 0;
  while (start <= spec.size()) {
    const std::size_t comma = std::min(spec.find(',', start), spec.size());
    const std::string item(spec.substr(start, comma - start));
    const auto colon = item.find(':');
    if (item.empty() || colon == std::string::npos) {
      throw ConfigError("round \"" + item + "\" must be seed:temperature");
    }
    RoundSpec round;
    try {
      std::size_t used = 0;
      round.seed = std::stoll(item.substr(0, colon), &used);
      if (used != colon) throw std::invalid_argument("seed");
      const std::string temp = item.substr(colon + 1);
      round.temperature = std::stod(temp, &used);
      if (used != temp.size()) throw std::invalid_argument("temperature");
    } catch (const std::logic_error&) {
      throw ConfigError("round \"" + item + "\" must be seed:temperature");
    }
    rounds.push_back(round);
    start = comma + 1;
  }
  return rounds;
}

// ---------------------------------------------------------------------------
// Config

void validate(const ExperimentConfig& config) {
  if (config.id.empty()) throw ConfigError("experiment id is empty");
  for (char ch : config.id) {
    const bool ok = (ch >= 'a' && ch <= 'z') || (ch >= 'A' && ch <= 'Z') ||
                    (ch >= '0' && ch <= '9') || ch == '_' || ch == '-' || ch == '.';
    if (!ok) throw ConfigError("experiment id \"" + config.id + "\" has invalid characters");
  }
  if (config.split_path.empty()) throw ConfigError(config.id + ": split_path is required");
  if (config.rounds.empty()) throw ConfigError(config.id + ": at least one round is required");
  for (const auto& round : config.rounds) {
    if (!(round.temperature >= 0.0 && round.temperature <= 2.0)) {
      throw ConfigError(config.id + ": temperature must be in [0, 2]");
    }
  }
  if (!config.llm_model) {
    if (config.signature) throw ConfigError(config.id + ": a signature requires an LLM model");
    if (!config.encoder_backend) {
      throw ConfigError(config.id + ": need an LLM model, an encoder backend, or both");
    }
  } else if (config.llm_model->empty()) {
    throw ConfigError(config.id + ": LLM model is empty");
  }
  if (config.llm.max_in_flight < 1) throw ConfigError(config.id + ": max_in_flight must be >= 1");
  if (config.llm.max_output_tokens < 1) {
    throw ConfigError(config.id + ": max_output_tokens must be >= 1");
  }
  if (config.signature) {
    const SignatureKind kind = *config.signature;
    if ((needs_encoder_label(kind) || needs_probs(kind) || needs_examples(kind)) &&
        !config.encoder_backend) {
      throw ConfigError(config.id + ": signature " + std::string(to_string(kind)) +
                        " requires an encoder backend");
    }
    if (needs_examples(kind)) {
      if (!config.retrieval) {
        throw ConfigError(config.id + ": signature " + std::string(to_string(kind)) +
                          " requires a retrieval section");
      }
      if (kind == SignatureKind::TopExamples && config.retrieval->mode != RetrievalMode::top_k) {
        throw ConfigError(config.id + ": TopExamples requires retrieval mode top_k");
      }
      if (kind == SignatureKind::BalancedExamples &&
          config.retrieval->mode != RetrievalMode::balanced) {
        throw ConfigError(config.id + ": BalancedExamples requires retrieval mode balanced");
      }
    }
  }
  if (config.retrieval) {
    const auto& r = *config.retrieval;
    if (r.mode == RetrievalMode::top_k && r.k < 1) throw ConfigError(config.id + ": k must be >= 1");
    if (r.mode == RetrievalMode::balanced && r.per_class < 1) {
      throw ConfigError(config.id + ": per_class must be >= 1");
    }
    if (r.pool_path.empty() == r.pool_source.empty()) {
      throw ConfigError(config.id + ": retrieval needs exactly one of pool_path, pool_source");
    }
    if (!r.pool_source.empty() && r.pool_size < 1) {
      throw ConfigError(config.id + ": pool_size must be >= 1");
    }
  }
  if (config.ft_cost_usd && *config.ft_cost_usd < 0) {
    throw ConfigError(config.id + ": ft_cost_usd must be >= 0");
  }
}

ExperimentConfig config_from_json(const json& document) {
  if (!document.is_object()) throw ConfigError("config must be a JSON object");
  ExperimentConfig config;
  try {
    config.id = document.at("id").get<std::string>();
    config.description = document.value("description", "");
    if (auto it = document.find("signature"); it != document.end() && !it->is_null()) {
      config.signature = parse_signature(it->get<std::string>());
    }
    if (auto it = document.find("encoder"); it != document.end() && !it->is_null()) {
      config.encoder_backend = it->get<std::string>();
    }
    if (auto it = document.find("llm"); it != document.end() && !it->is_null()) {
      const json& llm = *it;
      if (auto model = llm.find("model"); model != llm.end() && !model->is_null()) {
        config.llm_model = model->get<std::string>();
      }
      config.llm.base_url = llm.value("base_url", "");
      config.llm.api_key_env = llm.value("api_key_env", config.llm.api_key_env);
      config.llm.max_in_flight = llm.value("max_in_flight", config.llm.max_in_flight);
      config.llm.max_output_tokens = llm.value("max_output_tokens", config.llm.max_output_tokens);
      if (auto retry = llm.find("retry"); retry != llm.end()) {
        auto& policy = config.llm.retry;
        policy.max_attempts = retry->value("max_attempts", policy.max_attempts);
        policy.initial_backoff = std::chrono::milliseconds(
            retry->value("initial_backoff_ms", policy.initial_backoff.count()));
        policy.multiplier = retry->value("multiplier", policy.multiplier);
        policy.max_backoff =
            std::chrono::milliseconds(retry->value("max_backoff_ms", policy.max_backoff.count()));
      }
    }
    if (auto it = document.find("rounds"); it != document.end()) {
      if (it->is_string()) {
        config.rounds = parse_rounds(it->get<std::string>());
      } else {
        config.rounds.clear();
        for (const auto& round : *it) {
          config.rounds.push_back(
              {round.at("seed").get<std::int64_t>(), round.at("temperature").get<double>()});
        }
      }
    }
    config.split = document.value("split", config.split);
    config.split_path = document.at("split_path").get<std::string>();
    if (auto it = document.find("retrieval"); it != document.end() && !it->is_null()) {
      RetrievalConfig r;
      r.mode = parse_retrieval_mode(it->value("mode", "top_k"));
      r.k = it->value("k", r.k);
      r.per_class = it->value("per_class", r.per_class);
      r.pool_path = it->value("pool_path", "");
      r.pool_source = it->value("pool_source", "");
      r.pool_size = it->value("pool_size", r.pool_size);
      r.pool_seed = it->value("pool_seed", r.pool_seed);
      config.retrieval = r;
    }
    if (auto it = document.find("ft_cost_usd"); it != document.end() && !it->is_null()) {
      config.ft_cost_usd = it->get<double>();
    }
    config.cache_dir = document.value("cache_dir", "");
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  validate(config);
  return config;
}

json to_json(const ExperimentConfig& config) {
  json doc;
  doc["id"] = config.id;
  doc["description"] = config.description;
  doc["signature"] = config.signature ? json(to_string(*config.signature)) : json(nullptr);
  doc["encoder"] = config.encoder_backend ? json(*config.encoder_backend) : json(nullptr);
  doc["llm"] = {{"model", config.llm_model ? json(*config.llm_model) : json(nullptr)},
                {"base_url", config.llm.base_url},
                {"api_key_env", config.llm.api_key_env},
                {"max_in_flight", config.llm.max_in_flight},
                {"max_output_tokens", config.llm.max_output_tokens},
                {"retry",
                 {{"max_attempts", config.llm.retry.max_attempts},
                  {"initial_backoff_ms", config.llm.retry.initial_backoff.count()},
                  {"multiplier", config.llm.retry.multiplier},
                  {"max_backoff_ms", config.llm.retry.max_backoff.count()}}}};
  json rounds = json::array();
  for (const auto& r : config.rounds) rounds.push_back({{"seed", r.seed}, {"temperature", r.temperature}});
  doc["rounds"] = rounds;
  doc["split"] = config.split;
  doc["split_path"] = config.split_path.string();
  if (config.retrieval) {
    const auto& r = *config.retrieval;
    doc["retrieval"] = {{"mode", to_string(r.mode)},
                        {"k", r.k},
                        {"per_class", r.per_class},
                        {"pool_path", r.pool_path.string()},
                        {"pool_source", r.pool_source.string()},
                        {"pool_size", r.pool_size},
                        {"pool_seed", r.pool_seed}};
  } else {
    doc["retrieval"] = nullptr;
  }
  doc["ft_cost_usd"] = config.ft_cost_usd ? json(*config.ft_cost_usd) : json(nullptr);
  doc["cache_dir"] = config.cache_dir.string();
  return doc;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  json document;
  try {
    document = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  ExperimentConfig config = config_from_json(document);
  const auto base = path.parent_path();
  config.split_path = resolve(base, config.split_path);
  config.cache_dir = resolve(base, config.cache_dir);
  if (config.encoder_backend) config.encoder_backend = resolve_backend(base, *config.encoder_backend);
  if (config.retrieval) {
    config.retrieval->pool_path = resolve(base, config.retrieval->pool_path);
    config.retrieval->pool_source = resolve(base, config.retrieval->pool_source);
  }
  return config;
}

// ---------------------------------------------------------------------------
// Resources

ExperimentResources open_resources(const ExperimentConfig& config) {
  validate(config);
  ExperimentResources resources;
  const auto substitute = [&](std::string text) {
    for (auto at = text.find("{split}"); at != std::string::npos; at = text.find("{split}", at)) {
      text.replace(at, 7, config.split);
      at += config.split.size();
    }
    return text;
  };
  resources.split = read_reviews(substitute(config.split_path.string()));
  if (config.encoder_backend) resources.encoder = open_backend(substitute(*config.encoder_backend));
  if (config.retrieval) {
    const auto& r = *config.retrieval;
    if (!r.pool_path.empty()) {
      resources.pool = std::make_shared<ExamplePool>(ExamplePool::load(r.pool_path));
    } else {
      if (!resources.encoder) throw ConfigError(config.id + ": building a pool needs an encoder");
      resources.pool = std::make_shared<ExamplePool>(
          build_pool(read_reviews(r.pool_source), *resources.encoder, r.pool_size, r.pool_seed));
    }
  }
  if (config.llm_model) {
    ChatClientOptions options = options_from_env();
    if (!config.llm.base_url.empty()) options.base_url = config.llm.base_url;
    if (const char* key = std::getenv(config.llm.api_key_env.c_str())) options.api_key = key;
    options.max_in_flight = config.llm.max_in_flight;
    options.retry = config.llm.retry;
    options.cache_dir = config.cache_dir;
    resources.llm = std::make_shared<ChatClient>(std::move(options));
  }
  return resources;
}

// ---------------------------------------------------------------------------
// Execution

std::map<std::string, MetricsReport> dataset_metrics(const Run& run) {
  std::map<std::string, MetricsReport> out;
  out[std::string(kMergedDataset)] = macro_f1(run);
  for (Source source : kAllSources) {
    Run subset;
    for (const auto& record : run) {
      if (record.source == source) subset.push_back(record);
    }
    if (!subset.empty()) out[std::string(display_name(source))] = macro_f1(subset);
  }
  return out;
}

ExperimentReport run_experiment(const ExperimentConfig& config, ExperimentResources& resources) {
  validate(config);
  if (resources.split.empty()) throw ConfigError(config.id + ": split is empty");
  if (config.encoder_backend && !resources.encoder) {
    throw ConfigError(config.id + ": encoder backend not opened");
  }
  if (config.llm_model && !resources.llm) throw ConfigError(config.id + ": LLM client not opened");
  if (config.retrieval && !resources.pool) throw ConfigError(config.id + ": example pool not opened");

  const auto& split = resources.split;
  const std::size_t n = split.size();
  const int workers = config.llm.max_in_flight;

  std::vector<EncoderPrediction> encoded;
  std::vector<RenderedPrompt> prompts;
  // Encoder context is recomputed each round unless it comes from a static file.
  const auto prepare = [&] {
    if (resources.encoder) {
      encoded.resize(n);
      parallel_for(n, workers, [&](std::size_t i) {
        try {
          encoded[i] = resources.encoder->predict(split[i].text, split[i].id);
        } catch (const Error& e) {
          throw Error("encoding \"" + split[i].id + "\": " + e.what());
        }
      });
    }

    if (config.llm_model) {
      prompts.resize(n);
      parallel_for(n, workers, [&](std::size_t i) {
        if (!config.signature) {
          prompts[i] = {std::string(kMinimalSystem), split[i].text};
          return;
        }
        const SignatureKind kind = *config.signature;
        PromptContext ctx;
        ctx.review = split[i].text;
        if (needs_encoder_label(kind)) ctx.encoder_label = encoded[i].label;
        if (needs_probs(kind)) ctx.probs = encoded[i].probs;
        if (needs_examples(kind)) {
          const auto& r = *config.retrieval;
          const auto retrieved = r.mode == RetrievalMode::top_k
                                     ? resources.pool->top_k(encoded[i].embedding, r.k)
                                     : resources.pool->balanced_top(encoded[i].embedding, r.per_class);
          ctx.examples = to_example_lines(retrieved);
        }
        prompts[i] = render(kind, ctx);
      });
    }
  };

  const bool static_encoder =
      resources.encoder && resources.encoder->descriptor().kind == BackendKind::file;
  ExperimentReport report;
  report.config = config;
  for (const auto& spec : config.rounds) {
    if (report.rounds.empty() || (resources.encoder && !static_encoder)) prepare();
    RoundResult round;
    round.round = spec;
    Run run(n);
    std::vector<Usage> usage(n);
    parallel_for(n, workers, [&](std::size_t i) {
      RunRecord& record = run[i];
      record.review_id = split[i].id;
      record.source = split[i].source;
      record.gold = split[i].label;
      if (resources.encoder) record.encoder_label = encoded[i].label;
      if (!config.llm_model) {
        record.predicted = encoded[i].label;
        return;
      }
      ChatRequest request;
      request.model = *config.llm_model;
      request.system = prompts[i].system;
      request.user = prompts[i].user;
      request.temperature = spec.temperature;
      request.seed = spec.seed;
      request.max_output_tokens = config.llm.max_output_tokens;
      const ChatResponse response = resources.llm->complete(request);
      record.completion = response.text;
      usage[i] = response.usage;
      try {
        record.predicted = parse_classification(response.text);
      } catch (const RefusedLabel&) {
      } catch (const UnparseableCompletion&) {
      }
    });
    for (const auto& u : usage) {
      round.usage.prompt_tokens += u.prompt_tokens;
      round.usage.completion_tokens += u.completion_tokens;
    }
    round.unparseable = static_cast<std::size_t>(
        std::count_if(run.begin(), run.end(), [](const RunRecord& r) { return !r.predicted; }));
    round.run = sorted_by_id(std::move(run));
    round.datasets = dataset_metrics(round.run);
    report.rounds.push_back(std::move(round));
  }

  if (report.rounds.size() >= 2) {
    for (const auto& [name, unused] : report.rounds.front().datasets) {
      std::vector<MetricsReport> series;
      for (const auto& round : report.rounds) series.push_back(round.datasets.at(name));
      report.aggregate[name] = aggregate_runs(series);
    }
  }
  if (config.ft_cost_usd) {
    const std::string merged(kMergedDataset);
    const double f1 = report.aggregate.count(merged)
                          ? report.aggregate.at(merged).macro_f1.mean
                          : report.rounds.front().datasets.at(merged).macro_f1;
    report.cost = make_cost_ledger(*config.ft_cost_usd, f1);
  }
  return report;
}

// ---------------------------------------------------------------------------
// Reporting

json to_json(const ExperimentReport& report) {
  json doc;
  doc["version"] = kVersion;
  doc["config"] = to_json(report.config);
  doc["mode"] = mode_name(report.config);
  json rounds = json::array();
  for (std::size_t k = 0; k < report.rounds.size(); ++k) {
    const auto& round = report.rounds[k];
    json datasets = json::object();
    for (const auto& [name, metrics] : round.datasets) datasets[name] = to_json(metrics);
    rounds.push_back({{"seed", round.round.seed},
                      {"temperature", round.round.temperature},
                      {"datasets", datasets},
                      {"unparseable", round.unparseable},
                      {"usage",
                       {{"prompt_tokens", round.usage.prompt_tokens},
                        {"completion_tokens", round.usage.completion_tokens}}},
                      {"run_file", run_file_name(report.config.id, k)}});
  }
  doc["rounds"] = rounds;
  json aggregate = json::object();
  for (const auto& [name, agg] : report.aggregate) aggregate[name] = to_json(agg);
  doc["aggregate"] = aggregate;
  doc["cost"] = report.cost ? to_json(*report.cost) : json(nullptr);
  return doc;
}

std::string format_report(const ExperimentReport& report) {
  std::ostringstream out;
  const auto& config = report.config;
  out << "Experiment " << config.id << " (" << mode_name(config) << ")\n";
  if (!config.description.empty()) out << config.description << '\n';
  out << "Split: " << config.split << ", " << (report.rounds.empty() ? 0 : report.rounds[0].run.size())
      << " examples\n";

  const auto header = [&] {
    out << "  " << pad("Dataset", 13) << pad_left("Macro-F1", 10) << pad_left("Accuracy", 10)
        << pad_left("Negative", 10) << pad_left("Neutral", 10) << pad_left("Positive", 10) << '\n';
  };
  for (std::size_t k = 0; k < report.rounds.size(); ++k) {
    const auto& round = report.rounds[k];
    out << "\nRound " << k + 1 << ": seed " << round.round.seed << ", temperature "
        << fixed(round.round.temperature, 1) << ", unparseable " << round.unparseable << '\n';
    header();
    for (const auto& name : dataset_order(round.datasets)) {
      const auto& m = round.datasets.at(name);
      out << "  " << pad(name, 13) << pad_left(fixed(m.macro_f1, 2), 10)
          << pad_left(fixed(m.accuracy, 2), 10);
      for (double f1 : m.per_class_f1) out << pad_left(fixed(f1, 2), 10);
      out << '\n';
    }
  }
  if (!report.aggregate.empty()) {
    out << "\nMean ± sample std over " << report.rounds.size() << " rounds\n";
    out << "  " << pad("Dataset", 13) << pad_left("Macro-F1", 16) << pad_left("Accuracy", 16) << '\n';
    for (const auto& name : dataset_order(report.rounds.front().datasets)) {
      const auto& a = report.aggregate.at(name);
      out << "  " << pad(name, 13) << pad_left(format_mean_std(a.macro_f1), 16)
          << pad_left(format_mean_std(a.accuracy), 16) << '\n';
    }
  }
  if (report.cost) {
    out << "\nFine-tuning cost: $" << fixed(report.cost->ft_cost_usd, 2) << ", Merged F1 "
        << fixed(report.cost->f1, 2) << ", $" << fixed(report.cost->ratio_usd_per_f1, 2)
        << " per F1 point\n";
  }
  return out.str();
}

void persist(const ExperimentReport& report, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir / "runs");
  const std::string& id = report.config.id;
  for (std::size_t k = 0; k < report.rounds.size(); ++k) {
    write_run(out_dir / run_file_name(id, k), report.rounds[k].run);
  }
  write_file_atomic(out_dir / (id + ".report.json"), to_json(report).dump(2) + "\n");
  write_file_atomic(out_dir / (id + ".report.txt"), format_report(report));
}

PersistedExperiment load_persisted(const std::filesystem::path& report_json) {
  PersistedExperiment out;
  try {
    out.report = json::parse(read_file(report_json));
  } catch (const json::exception& e) {
    throw SchemaError(report_json.string() + ": " + e.what());
  }
  const auto base = report_json.parent_path();
  for (const auto& round : out.report.at("rounds")) {
    out.rounds.push_back(read_run(base / round.at("run_file").get<std::string>()));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Comparison

ComparisonReport compare(const Run& run_a, const Run& run_b, std::string id_a, std::string id_b,
                         const BootstrapOptions& bootstrap) {
  ComparisonReport report;
  report.id_a = std::move(id_a);
  report.id_b = std::move(id_b);
  report.mcnemar = mcnemar(run_a, run_b);
  report.bootstrap = paired_bootstrap(run_a, run_b, bootstrap);
  const auto metrics_a = dataset_metrics(run_a);
  const auto metrics_b = dataset_metrics(run_b);
  for (const auto& name : dataset_order(metrics_a)) {
    const double f1_a = metrics_a.at(name).macro_f1;
    const double f1_b = metrics_b.at(name).macro_f1;
    report.deltas.push_back({name, f1_a, f1_b, f1_b - f1_a});
  }
  const bool labelled = std::all_of(run_b.begin(), run_b.end(),
                                    [](const RunRecord& r) { return r.encoder_label.has_value(); });
  if (labelled) report.follow = follow_analysis(run_a, run_b);
  return report;
}

json to_json(const ComparisonReport& report) {
  json deltas = json::array();
  for (const auto& d : report.deltas) {
    deltas.push_back({{"dataset", d.dataset}, {"f1_a", d.f1_a}, {"f1_b", d.f1_b}, {"delta", d.delta}});
  }
  const auto& bs = report.bootstrap;
  return {{"version", kVersion},
          {"a", report.id_a},
          {"b", report.id_b},
          {"deltas", deltas},
          {"mcnemar", {{"b", report.mcnemar.b}, {"c", report.mcnemar.c}, {"p_value", report.mcnemar.p_value}}},
          {"bootstrap",
           {{"delta_f1", bs.delta_f1},
            {"ci_low", bs.ci_low},
            {"ci_high", bs.ci_high},
            {"p_value", bs.p_value},
            {"resamples", bs.resamples},
            {"coverage", bs.coverage},
            {"seed", bs.seed}}},
          {"follow", report.follow ? to_json(*report.follow) : json(nullptr)}};
}

std::string format_comparison(const ComparisonReport& report) {
  std::ostringstream out;
  out << "Comparison " << report.id_a << " -> " << report.id_b << "\n\n";
  out << "  " << pad("Dataset", 13) << pad_left(report.id_a, 10) << pad_left(report.id_b, 10)
      << pad_left("Delta", 10) << '\n';
  for (const auto& d : report.deltas) {
    out << "  " << pad(d.dataset, 13) << pad_left(fixed(d.f1_a, 2), 10)
        << pad_left(fixed(d.f1_b, 2), 10) << pad_left(fixed(d.delta, 2), 10) << '\n';
  }
  const auto& m = report.mcnemar;
  out << "\nMcNemar exact: b = " << m.b << ", c = " << m.c << ", p = " << shortest(m.p_value) << '\n';
  const auto& bs = report.bootstrap;
  out << "Paired bootstrap (" << bs.resamples << " resamples, seed " << bs.seed
      << "): delta F1 " << fixed(bs.delta_f1, 2) << ", " << fixed(bs.coverage * 100, 0) << "% CI ["
      << fixed(bs.ci_low, 2) << ", " << fixed(bs.ci_high, 2) << "], p = " << shortest(bs.p_value)
      << '\n';
  if (report.follow) {
    const auto& f = *report.follow;
    out << "\nFollowing the encoder label where " << report.id_a << " disagreed with it:\n";
    out << "  correct " << f.changed_followed_correct << ", wrong " << f.changed_followed_wrong
        << ", net " << (f.net > 0 ? "+" : "") << f.net << ", success "
        << (f.success_rate_empty ? std::string("n/a") : fixed(f.success_rate, 2) + "%") << '\n';
    out << "  follow rate " << fixed(f.follow_rate, 2) << "% (encoder correct "
        << fixed(f.follow_rate_encoder_correct, 2) << "%, encoder wrong "
        << fixed(f.follow_rate_encoder_wrong, 2) << "%), gap "
        << (f.discrimination_gap_empty ? std::string("n/a") : fixed(f.discrimination_gap, 2) + " pp")
        << '\n';
  }
  return out.str();
}

std::string format_summary(const std::vector<json>& reports) {
  std::vector<std::string> columns;
  for (Source source : kAllSources) columns.emplace_back(display_name(source));
  columns.emplace_back(kMergedDataset);

  std::ostringstream out;
  out << pad("Experiment", 12) << pad("Mode", 18);
  for (const auto& c : columns) out << pad_left(c, 16);
  out << pad_left("$/F1", 8) << '\n';
  for (const auto& report : reports) {
    out << pad(report.at("config").at("id").get<std::string>(), 12)
        << pad(report.value("mode", ""), 18);
    const json& aggregate = report.at("aggregate");
    for (const auto& c : columns) {
      std::string cell = "-";
      if (aggregate.contains(c)) {
        const auto& f1 = aggregate.at(c).at("macro_f1");
        cell = format_mean_std({f1.at("mean").get<double>(), f1.at("std").get<double>()});
      } else if (!report.at("rounds").empty() && report.at("rounds")[0].at("datasets").contains(c)) {
        cell = fixed(report.at("rounds")[0].at("datasets").at(c).at("macro_f1").get<double>(), 2);
      }
      out << pad_left(cell, 16);
    }
    const json& cost = report.at("cost");
    out << pad_left(cost.is_null() ? "-" : fixed(cost.at("ratio_usd_per_f1").get<double>(), 2), 8)
        << '\n';
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// Fine-tuning export

ExportManifest export_ft(const std::vector<Review>& dataset, FtTemplateKind kind,
                         const EncoderBackend* backend, std::string backend_spec,
                         const std::filesystem::path& out_path) {
  if (kind == FtTemplateKind::FT_L && !backend) {
    throw ConfigError("FT-L export requires an encoder backend");
  }
  std::ostringstream body;
  ExportManifest manifest;
  manifest.records = export_ft_jsonl(dataset, kind, backend, body);
  manifest.template_name = std::string(to_string(kind));
  manifest.backend = backend ? std::move(backend_spec) : "none";
  manifest.output = out_path;
  if (out_path.has_parent_path()) std::filesystem::create_directories(out_path.parent_path());
  write_file_atomic(out_path, body.str());
  const json doc = {{"version", kVersion},
                    {"template", manifest.template_name},
                    {"backend", manifest.backend},
                    {"records", manifest.records},
                    {"output", out_path.filename().string()}};
  write_file_atomic(out_path.string() + ".manifest.json", doc.dump(2) + "\n");
  return manifest;
}

}  // namespace encassist
