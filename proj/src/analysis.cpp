#include "encassist/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <thread>

#include "encassist/error.hpp"
#include "encassist/numfmt.hpp"
#include "encassist/rng.hpp"

namespace encassist {

// ---------------------------------------------------------------------------
// Run records

json to_json(const RunRecord& record) {
  return {{"id", record.review_id},
          {"source", to_string(record.source)},
          {"gold", to_string(record.gold)},
          {"encoder_label",
           record.encoder_label ? json(to_string(*record.encoder_label)) : json(nullptr)},
          {"predicted", record.predicted ? json(to_string(*record.predicted)) : json(nullptr)},
          {"completion", record.completion}};
}

RunRecord run_record_from_json(const json& record) {
  RunRecord out;
  out.review_id = record.at("id").get<std::string>();
  out.source = parse_source(record.at("source").get<std::string>());
  out.gold = parse_label(record.at("gold").get<std::string>());
  if (const auto& enc = record.at("encoder_label"); !enc.is_null()) {
    out.encoder_label = parse_label(enc.get<std::string>());
  }
  if (const auto& pred = record.at("predicted"); !pred.is_null()) {
    out.predicted = parse_label(pred.get<std::string>());
  }
  out.completion = record.value("completion", "");
  return out;
}

void write_run(const std::filesystem::path& path, const Run& run) {
  std::ostringstream out;
  for (const auto& record : run) out << to_json(record).dump() << '\n';
  write_file_atomic(path, out.str());
}

Run read_run(const std::filesystem::path& path) {
  Run run;
  for_each_jsonl(path, [&](const json& record, std::size_t line) {
    try {
      run.push_back(run_record_from_json(record));
    } catch (const std::exception& e) {
      throw SchemaError(path.string() + " line " + std::to_string(line) + ": " + e.what());
    }
  });
  return run;
}

Run sorted_by_id(Run run) {
  std::sort(run.begin(), run.end(),
            [](const RunRecord& a, const RunRecord& b) { return a.review_id < b.review_id; });
  for (std::size_t i = 1; i < run.size(); ++i) {
    if (run[i].review_id == run[i - 1].review_id) {
      throw PairingError("duplicate review id \"" + run[i].review_id + "\" in run");
    }
  }
  return run;
}

// ---------------------------------------------------------------------------
// Metrics

namespace {

constexpr int kUnparseable = static_cast<int>(kNumLabels);

struct Confusion {
  std::array<std::uint64_t, kNumLabels> tp{};
  std::array<std::uint64_t, kNumLabels> fp{};
  std::array<std::uint64_t, kNumLabels> fn{};
  std::uint64_t correct = 0;
  std::uint64_t n = 0;

  void add(int gold, int predicted) {
    ++n;
    if (predicted == gold) {
      ++tp[static_cast<std::size_t>(gold)];
      ++correct;
      return;
    }
    ++fn[static_cast<std::size_t>(gold)];
    if (predicted != kUnparseable) ++fp[static_cast<std::size_t>(predicted)];
  }
};

MetricsReport from_confusion(const Confusion& m) {
  MetricsReport report;
  report.n = m.n;
  double sum = 0.0;
  for (std::size_t c = 0; c < kNumLabels; ++c) {
    const double tp = static_cast<double>(m.tp[c]);
    const double precision_den = static_cast<double>(m.tp[c] + m.fp[c]);
    const double recall_den = static_cast<double>(m.tp[c] + m.fn[c]);
    const double precision = precision_den > 0 ? tp / precision_den : 0.0;
    const double recall = recall_den > 0 ? tp / recall_den : 0.0;
    const double f1 =
        precision + recall > 0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
    report.per_class_f1[c] = 100.0 * f1;
    sum += f1;
  }
  report.macro_f1 = 100.0 * sum / static_cast<double>(kNumLabels);
  report.accuracy =
      m.n > 0 ? 100.0 * static_cast<double>(m.correct) / static_cast<double>(m.n) : 0.0;
  return report;
}

int code(const std::optional<Label>& label) {
  return label ? static_cast<int>(*label) : kUnparseable;
}

struct Paired {
  std::vector<int> gold;
  std::vector<int> a;
  std::vector<int> b;
};

Paired pair_runs(const Run& run_a, const Run& run_b) {
  const Run a = sorted_by_id(run_a);
  const Run b = sorted_by_id(run_b);
  if (a.size() != b.size()) {
    throw PairingError("runs differ in size: " + std::to_string(a.size()) + " vs " +
                       std::to_string(b.size()));
  }
  Paired paired;
  paired.gold.reserve(a.size());
  paired.a.reserve(a.size());
  paired.b.reserve(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].review_id != b[i].review_id) {
      throw PairingError("runs cover different ids (\"" + a[i].review_id + "\" vs \"" +
                         b[i].review_id + "\")");
    }
    if (a[i].gold != b[i].gold) {
      throw PairingError("gold labels differ for \"" + a[i].review_id + "\"");
    }
    paired.gold.push_back(static_cast<int>(a[i].gold));
    paired.a.push_back(code(a[i].predicted));
    paired.b.push_back(code(b[i].predicted));
  }
  return paired;
}

}  // namespace

json to_json(const MetricsReport& report) {
  return {{"macro_f1", report.macro_f1},
          {"accuracy", report.accuracy},
          {"per_class_f1",
           {{"negative", report.per_class_f1[0]},
            {"neutral", report.per_class_f1[1]},
            {"positive", report.per_class_f1[2]}}},
          {"n", report.n}};
}

MetricsReport macro_f1(const Run& run) {
  if (run.empty()) throw DomainError("macro_f1: empty run");
  Confusion m;
  for (const auto& record : run) m.add(static_cast<int>(record.gold), code(record.predicted));
  return from_confusion(m);
}

// ---------------------------------------------------------------------------
// McNemar

double mcnemar_exact_p(std::uint64_t b, std::uint64_t c) {
  const std::uint64_t n = b + c;
  if (n == 0) return 1.0;
  const std::uint64_t k = std::min(b, c);
  double tail = 0.0;  // P(X <= k) for X ~ Binomial(n, 1/2)
  if (n <= 62) {
    unsigned __int128 coefficient = 1;
    unsigned __int128 sum = 0;
    for (std::uint64_t i = 0; i <= k; ++i) {
      sum += coefficient;
      coefficient = coefficient * (n - i) / (i + 1);
    }
    tail = std::ldexp(static_cast<double>(sum), -static_cast<int>(n));
  } else {
    const double log_half_n = -static_cast<double>(n) * std::log(2.0);
    const double lg_n = std::lgamma(static_cast<double>(n) + 1.0);
    std::vector<double> logs;
    logs.reserve(k + 1);
    for (std::uint64_t i = 0; i <= k; ++i) {
      logs.push_back(lg_n - std::lgamma(static_cast<double>(i) + 1.0) -
                     std::lgamma(static_cast<double>(n - i) + 1.0) + log_half_n);
    }
    const double peak = *std::max_element(logs.begin(), logs.end());
    double scaled = 0.0;
    for (double l : logs) scaled += std::exp(l - peak);
    tail = std::exp(peak) * scaled;
  }
  return std::min(1.0, 2.0 * tail);
}

McNemarResult mcnemar(const Run& run_a, const Run& run_b) {
  const Paired paired = pair_runs(run_a, run_b);
  McNemarResult result;
  for (std::size_t i = 0; i < paired.gold.size(); ++i) {
    const bool a_ok = paired.a[i] == paired.gold[i];
    const bool b_ok = paired.b[i] == paired.gold[i];
    if (a_ok && !b_ok) ++result.b;
    if (!a_ok && b_ok) ++result.c;
  }
  result.p_value = mcnemar_exact_p(result.b, result.c);
  return result;
}

// ---------------------------------------------------------------------------
// Bootstrap

BootstrapResult paired_bootstrap(const Run& run_a, const Run& run_b,
                                 const BootstrapOptions& options) {
  if (options.resamples < 1000) throw DomainError("paired_bootstrap: need >= 1000 resamples");
  if (!(options.coverage > 0.0 && options.coverage < 1.0)) {
    throw DomainError("paired_bootstrap: coverage must be in (0, 1)");
  }
  const Paired paired = pair_runs(run_a, run_b);
  const std::size_t n = paired.gold.size();
  if (n == 0) throw DomainError("paired_bootstrap: empty runs");

  BootstrapResult result;
  result.resamples = options.resamples;
  result.coverage = options.coverage;
  result.seed = options.seed;
  {
    Confusion ma, mb;
    for (std::size_t i = 0; i < n; ++i) {
      ma.add(paired.gold[i], paired.a[i]);
      mb.add(paired.gold[i], paired.b[i]);
    }
    result.delta_f1 = from_confusion(mb).macro_f1 - from_confusion(ma).macro_f1;
  }

  std::vector<double> deltas(options.resamples);
  const auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t r = begin; r < end; ++r) {
      SplitMix64 rng(derive_seed(options.seed, r));
      Confusion ma, mb;
      for (std::size_t draw = 0; draw < n; ++draw) {
        const auto i = static_cast<std::size_t>(rng.below(n));
        ma.add(paired.gold[i], paired.a[i]);
        mb.add(paired.gold[i], paired.b[i]);
      }
      deltas[r] = from_confusion(mb).macro_f1 - from_confusion(ma).macro_f1;
    }
  };
  unsigned workers = options.workers ? options.workers : std::thread::hardware_concurrency();
  workers = std::clamp<unsigned>(workers, 1, 64);
  if (workers == 1) {
    work(0, options.resamples);
  } else {
    std::vector<std::thread> threads;
    const std::size_t chunk = (options.resamples + workers - 1) / workers;
    for (unsigned w = 0; w < workers; ++w) {
      const std::size_t begin = std::min(options.resamples, w * chunk);
      const std::size_t end = std::min(options.resamples, begin + chunk);
      if (begin < end) threads.emplace_back(work, begin, end);
    }
    for (auto& t : threads) t.join();
  }

  const auto le = static_cast<double>(
      std::count_if(deltas.begin(), deltas.end(), [](double d) { return d <= 0.0; }));
  const auto ge = static_cast<double>(
      std::count_if(deltas.begin(), deltas.end(), [](double d) { return d >= 0.0; }));
  const double resamples = static_cast<double>(options.resamples);
  result.p_value = std::clamp(2.0 * std::min(le, ge) / resamples, 2.0 / resamples, 1.0);

  std::sort(deltas.begin(), deltas.end());
  const auto quantile = [&](double q) {
    const double h = (resamples - 1.0) * q;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, deltas.size() - 1);
    return deltas[lo] + (h - static_cast<double>(lo)) * (deltas[hi] - deltas[lo]);
  };
  const double tail = (1.0 - options.coverage) / 2.0;
  result.ci_low = quantile(tail);
  result.ci_high = quantile(1.0 - tail);
  return result;
}

// ---------------------------------------------------------------------------
// Follow analysis

json to_json(const FollowReport& report) {
  return {{"changed_followed_correct", report.changed_followed_correct},
          {"changed_followed_wrong", report.changed_followed_wrong},
          {"net", report.net},
          {"success_rate", report.success_rate},
          {"success_rate_empty", report.success_rate_empty},
          {"follow_rate", report.follow_rate},
          {"follow_rate_encoder_correct", report.follow_rate_encoder_correct},
          {"follow_rate_encoder_wrong", report.follow_rate_encoder_wrong},
          {"discrimination_gap", report.discrimination_gap},
          {"discrimination_gap_empty", report.discrimination_gap_empty},
          {"baseline_disagreed", report.baseline_disagreed},
          {"n", report.n}};
}

FollowReport follow_analysis(const Run& baseline_run, const Run& augmented_run) {
  const Run baseline = sorted_by_id(baseline_run);
  const Run augmented = sorted_by_id(augmented_run);
  if (baseline.size() != augmented.size()) {
    throw PairingError("follow_analysis: runs differ in size");
  }
  FollowReport report;
  report.n = baseline.size();
  std::uint64_t followed = 0;
  std::uint64_t enc_correct = 0, enc_correct_followed = 0;
  std::uint64_t enc_wrong = 0, enc_wrong_followed = 0;
  for (std::size_t i = 0; i < baseline.size(); ++i) {
    const auto& base = baseline[i];
    const auto& aug = augmented[i];
    if (base.review_id != aug.review_id || base.gold != aug.gold) {
      throw PairingError("follow_analysis: runs are not aligned at \"" + aug.review_id + "\"");
    }
    if (!aug.encoder_label) {
      throw PairingError("follow_analysis: no encoder label for \"" + aug.review_id + "\"");
    }
    if (base.encoder_label && base.encoder_label != aug.encoder_label) {
      throw PairingError("follow_analysis: encoder labels disagree at \"" + aug.review_id + "\"");
    }
    const Label encoder = *aug.encoder_label;
    const bool follows = aug.predicted == encoder;
    if (follows) ++followed;
    if (encoder == aug.gold) {
      ++enc_correct;
      if (follows) ++enc_correct_followed;
    } else {
      ++enc_wrong;
      if (follows) ++enc_wrong_followed;
    }
    if (base.predicted != encoder) {
      ++report.baseline_disagreed;
      if (follows) {
        if (aug.correct()) {
          ++report.changed_followed_correct;
        } else {
          ++report.changed_followed_wrong;
        }
      }
    }
  }
  const auto rate = [](std::uint64_t num, std::uint64_t den) {
    return den == 0 ? 0.0 : 100.0 * static_cast<double>(num) / static_cast<double>(den);
  };
  const std::uint64_t changed = report.changed_followed_correct + report.changed_followed_wrong;
  report.success_rate = rate(report.changed_followed_correct, changed);
  report.success_rate_empty = changed == 0;
  report.net = static_cast<std::int64_t>(report.changed_followed_correct) -
               static_cast<std::int64_t>(report.changed_followed_wrong);
  report.follow_rate = rate(followed, report.n);
  report.follow_rate_encoder_correct = rate(enc_correct_followed, enc_correct);
  report.follow_rate_encoder_wrong = rate(enc_wrong_followed, enc_wrong);
  report.discrimination_gap_empty = enc_correct == 0 || enc_wrong == 0;
  report.discrimination_gap = report.discrimination_gap_empty
                                  ? 0.0
                                  : report.follow_rate_encoder_correct -
                                        report.follow_rate_encoder_wrong;
  return report;
}

// ---------------------------------------------------------------------------
// Aggregation

MeanStd mean_sample_std(const std::vector<double>& values) {
  if (values.size() < 2) {
    throw AggregationError("need at least 2 values, got " + std::to_string(values.size()));
  }
  const double n = static_cast<double>(values.size());
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / (n - 1.0))};
}

json to_json(const AggregateReport& report) {
  const auto ms = [](const MeanStd& v) { return json{{"mean", v.mean}, {"std", v.std}}; };
  return {{"macro_f1", ms(report.macro_f1)},
          {"accuracy", ms(report.accuracy)},
          {"per_class_f1",
           {{"negative", ms(report.per_class_f1[0])},
            {"neutral", ms(report.per_class_f1[1])},
            {"positive", ms(report.per_class_f1[2])}}},
          {"runs", report.runs}};
}

AggregateReport aggregate_runs(const std::vector<MetricsReport>& reports) {
  if (reports.size() < 2) {
    throw AggregationError("aggregate_runs: need at least 2 reports, got " +
                           std::to_string(reports.size()));
  }
  const auto series = [&](auto field) {
    std::vector<double> values;
    values.reserve(reports.size());
    for (const auto& r : reports) values.push_back(field(r));
    return mean_sample_std(values);
  };
  AggregateReport out;
  out.runs = reports.size();
  out.macro_f1 = series([](const MetricsReport& r) { return r.macro_f1; });
  out.accuracy = series([](const MetricsReport& r) { return r.accuracy; });
  for (std::size_t c = 0; c < kNumLabels; ++c) {
    out.per_class_f1[c] = series([c](const MetricsReport& r) { return r.per_class_f1[c]; });
  }
  return out;
}

std::string format_mean_std(const MeanStd& value) {
  return fixed(value.mean, 2) + " ± " + fixed(value.std, 2);
}

// ---------------------------------------------------------------------------
// Costs

double token_ft_cost(std::uint64_t trained_tokens, double rate_usd_per_million) {
  if (rate_usd_per_million < 0) throw DomainError("token_ft_cost: negative rate");
  return round_decimals(static_cast<double>(trained_tokens) * rate_usd_per_million / 1e6, 2);
}

double gpu_ft_cost(double rate_usd_per_hour, std::uint64_t seconds) {
  if (rate_usd_per_hour < 0) throw DomainError("gpu_ft_cost: negative rate");
  return round_decimals(rate_usd_per_hour * static_cast<double>(seconds) / 3600.0, 2);
}

double cost_per_f1(double ft_cost_usd, double f1) {
  if (!(f1 > 0.0)) throw DomainError("cost_per_f1: F1 must be positive");
  if (ft_cost_usd < 0) throw DomainError("cost_per_f1: negative cost");
  return round_decimals(ft_cost_usd / f1, 2);
}

CostLedger make_cost_ledger(double ft_cost_usd, double f1) {
  return {ft_cost_usd, f1, cost_per_f1(ft_cost_usd, f1)};
}

json to_json(const CostLedger& ledger) {
  return {{"ft_cost_usd", ledger.ft_cost_usd},
          {"f1", ledger.f1},
          {"ratio_usd_per_f1", ledger.ratio_usd_per_f1}};
}

}  // namespace encassist
