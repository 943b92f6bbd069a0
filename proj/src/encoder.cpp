#include "encassist/encoder.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <thread>

#include <httplib.h>

#include "encassist/error.hpp"
#include "encassist/llm.hpp"
#include "encassist/numfmt.hpp"

namespace encassist {

std::string_view to_string(BackendKind kind) noexcept {
  switch (kind) {
    case BackendKind::file: return "file";
    case BackendKind::http: return "http";
    case BackendKind::toy: return "toy";
  }
  return "unknown";
}

void validate_prediction(const EncoderPrediction& prediction, double tolerance,
                         long expected_dim) {
  double sum = 0.0;
  for (double p : prediction.probs) {
    if (!(p >= 0.0 && p <= 1.0)) {
      throw SchemaError("probability " + shortest(p) + " outside [0, 1]");
    }
    sum += p;
  }
  if (std::fabs(sum - 1.0) > tolerance) {
    throw SchemaError("probabilities sum to " + shortest(sum) + ", expected 1");
  }
  if (prediction.label != argmax_label(prediction.probs)) {
    throw SchemaError("label " + std::string(to_string(prediction.label)) +
                      " is not the argmax of the probabilities");
  }
  if (prediction.embedding.size() == 0) throw SchemaError("empty embedding");
  if (expected_dim > 0 && prediction.embedding.size() != expected_dim) {
    throw SchemaError("embedding length " + std::to_string(prediction.embedding.size()) +
                      " differs from declared dimension " + std::to_string(expected_dim));
  }
}

EncoderPrediction prediction_from_json(const json& record) {
  EncoderPrediction prediction;
  const auto probs = record.find("probs");
  if (probs == record.end() || !probs->is_array() || probs->size() != kNumLabels) {
    throw SchemaError("\"probs\" must be an array of 3 numbers");
  }
  for (std::size_t i = 0; i < kNumLabels; ++i) {
    if (!(*probs)[i].is_number()) throw SchemaError("\"probs\" must be numeric");
    prediction.probs[i] = (*probs)[i].get<double>();
  }
  const auto embedding = record.find("embedding");
  if (embedding == record.end() || !embedding->is_array()) {
    throw SchemaError("\"embedding\" must be an array of numbers");
  }
  prediction.embedding.resize(static_cast<Eigen::Index>(embedding->size()));
  for (std::size_t i = 0; i < embedding->size(); ++i) {
    if (!(*embedding)[i].is_number()) throw SchemaError("\"embedding\" must be numeric");
    prediction.embedding[static_cast<Eigen::Index>(i)] = (*embedding)[i].get<double>();
  }
  if (const auto label = record.find("label"); label != record.end()) {
    if (!label->is_string()) throw SchemaError("\"label\" must be a string");
    try {
      prediction.label = parse_label(label->get<std::string>());
    } catch (const IngestError& e) {
      throw SchemaError(e.what());
    }
  } else {
    prediction.label = argmax_label(prediction.probs);
  }
  return prediction;
}

json prediction_to_json(const EncoderPrediction& prediction) {
  json embedding = json::array();
  for (Eigen::Index i = 0; i < prediction.embedding.size(); ++i) {
    embedding.push_back(prediction.embedding[i]);
  }
  return {{"label", to_string(prediction.label)},
          {"probs", prediction.probs},
          {"embedding", std::move(embedding)}};
}

std::string format_percent(double p) {
  if (!(p >= 0.0 && p <= 1.0)) {
    throw RangeError("format_percent: " + shortest(p) + " is outside [0, 1]");
  }
  return fixed(p * 100.0, 2) + "%";
}

// ---------------------------------------------------------------------------

FileBackend FileBackend::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open prediction file " + path.string());
  return load(in, path.filename().string());
}

FileBackend FileBackend::load(std::istream& in, std::string model_name) {
  FileBackend backend;
  backend.descriptor_.model_name = std::move(model_name);
  for_each_jsonl(in, [&](const json& record, std::size_t line) {
    const std::string where = "line " + std::to_string(line) + ": ";
    const auto id = record.find("id");
    if (id == record.end() || !id->is_string()) {
      throw SchemaError(where + "missing string field \"id\"");
    }
    EncoderPrediction prediction;
    try {
      prediction = prediction_from_json(record);
      validate_prediction(prediction, kStoredProbSumTolerance);
    } catch (const SchemaError& e) {
      throw SchemaError(where + e.what());
    }
    if (backend.descriptor_.embedding_dim == 0) {
      backend.descriptor_.embedding_dim = static_cast<long>(prediction.embedding.size());
    } else if (prediction.embedding.size() != backend.descriptor_.embedding_dim) {
      throw SchemaError(where + "embedding length " + std::to_string(prediction.embedding.size()) +
                        " differs from " + std::to_string(backend.descriptor_.embedding_dim) +
                        " declared by the first record");
    }
    if (!backend.predictions_.emplace(id->get<std::string>(), std::move(prediction)).second) {
      throw SchemaError(where + "duplicate id \"" + id->get<std::string>() + "\"");
    }
  });
  return backend;
}

EncoderPrediction FileBackend::predict(std::string_view /*text*/,
                                       std::optional<std::string_view> id) const {
  if (!id) throw LookupError("file backend needs a review id");
  const auto it = predictions_.find(std::string(*id));
  if (it == predictions_.end()) {
    throw LookupError("no prediction for id \"" + std::string(*id) + "\"");
  }
  return it->second;
}

// ---------------------------------------------------------------------------

namespace {

struct SemaphoreGuard {
  explicit SemaphoreGuard(std::counting_semaphore<>& s) : sem(s) { sem.acquire(); }
  ~SemaphoreGuard() { sem.release(); }
  std::counting_semaphore<>& sem;
};

httplib::Client make_client(const std::string& scheme_host, std::chrono::milliseconds timeout) {
  httplib::Client client(scheme_host);
  client.set_connection_timeout(timeout);
  client.set_read_timeout(timeout);
  client.set_write_timeout(timeout);
  return client;
}

}  // namespace

HttpBackend::HttpBackend(HttpBackendOptions options)
    : options_(std::move(options)),
      in_flight_(std::make_unique<std::counting_semaphore<>>(std::max(1, options_.max_in_flight))) {
  if (options_.max_attempts < 1) throw ConfigError("http backend: max_attempts must be >= 1");
  descriptor_.model_name = options_.model_name;
  descriptor_.embedding_dim = options_.embedding_dim;
  if (descriptor_.embedding_dim <= 0) {
    const auto [scheme_host, prefix] = split_base_url(options_.base_url);
    auto client = make_client(scheme_host, options_.timeout);
    auto response = client.Get(prefix + "/health");
    if (!response || response->status != 200) {
      throw BackendUnavailable("http backend: GET /health failed at " + options_.base_url, 1);
    }
    json health;
    try {
      health = json::parse(response->body);
    } catch (const json::parse_error& e) {
      throw SchemaError(std::string("http backend: malformed /health body: ") + e.what());
    }
    if (!health.contains("embedding_dim") || !health["embedding_dim"].is_number_integer() ||
        health["embedding_dim"].get<long>() <= 0) {
      throw SchemaError("http backend: /health lacks a positive embedding_dim");
    }
    descriptor_.embedding_dim = health["embedding_dim"].get<long>();
    if (descriptor_.model_name.empty() && health.contains("model") && health["model"].is_string()) {
      descriptor_.model_name = health["model"].get<std::string>();
    }
  }
}

HttpBackend::~HttpBackend() = default;

EncoderPrediction HttpBackend::predict(std::string_view text,
                                       std::optional<std::string_view> /*id*/) const {
  const auto [scheme_host, prefix] = split_base_url(options_.base_url);
  const std::string body = json{{"text", std::string(text)}}.dump();
  std::string last_error;
  auto backoff = options_.initial_backoff;
  int attempt = 0;
  while (attempt < options_.max_attempts) {
    ++attempt;
    {
      SemaphoreGuard guard(*in_flight_);
      auto client = make_client(scheme_host, options_.timeout);
      auto response = client.Post(prefix + "/predict", body, "application/json");
      if (!response) {
        last_error = "transport error: " + httplib::to_string(response.error());
      } else if (response->status != 200) {
        last_error = "status " + std::to_string(response->status);
        if (response->status >= 400 && response->status < 500 && response->status != 429) break;
      } else {
        json record;
        try {
          record = json::parse(response->body);
        } catch (const json::parse_error& e) {
          throw SchemaError(std::string("http backend: malformed /predict body: ") + e.what());
        }
        EncoderPrediction prediction = prediction_from_json(record);
        validate_prediction(prediction, kProbSumTolerance, descriptor_.embedding_dim);
        return prediction;
      }
    }
    if (attempt < options_.max_attempts) {
      std::this_thread::sleep_for(backoff);
      backoff *= 2;
    }
  }
  throw BackendUnavailable("http backend: " + last_error + " after " + std::to_string(attempt) +
                               " attempt(s)",
                           attempt);
}

// ---------------------------------------------------------------------------

namespace {

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

bool is_token_char(unsigned char c) { return std::isalnum(c) || c >= 0x80; }

constexpr std::string_view kBiasToken = "<bias>";

Eigen::RowVector3d softmax(const Eigen::RowVector3d& logits) {
  const Eigen::RowVector3d shifted = (logits.array() - logits.maxCoeff()).exp().matrix();
  return shifted / shifted.sum();
}

}  // namespace

Eigen::VectorXd hashed_features(std::string_view text, long dim) {
  Eigen::VectorXd x = Eigen::VectorXd::Zero(dim);
  const auto bucket = [dim](std::string_view token) {
    return static_cast<Eigen::Index>(fnv1a(token) % static_cast<std::uint64_t>(dim));
  };
  x[bucket(kBiasToken)] += 1.0;
  std::string token;
  for (std::size_t i = 0; i <= text.size(); ++i) {
    const auto c = i < text.size() ? static_cast<unsigned char>(text[i]) : '\0';
    if (i < text.size() && is_token_char(c)) {
      token.push_back(static_cast<char>(std::tolower(c)));
    } else if (!token.empty()) {
      x[bucket(token)] += 1.0;
      token.clear();
    }
  }
  return x / x.norm();
}

ToyEncoder::ToyEncoder(Eigen::MatrixXd weights, std::uint64_t seed, int epochs)
    : weights_(std::move(weights)), seed_(seed), epochs_(epochs) {
  if (weights_.rows() != static_cast<Eigen::Index>(kNumLabels) || weights_.cols() < 1) {
    throw TrainingError("toy encoder weights must be 3 x dim");
  }
  descriptor_ = {BackendKind::toy, static_cast<long>(weights_.cols()),
                 "toy-bow-" + std::to_string(weights_.cols())};
}

Eigen::Vector3d ToyEncoder::logits(std::string_view text) const {
  return weights_ * hashed_features(text, descriptor_.embedding_dim);
}

EncoderPrediction ToyEncoder::predict(std::string_view text,
                                      std::optional<std::string_view> /*id*/) const {
  EncoderPrediction prediction;
  prediction.embedding = hashed_features(text, descriptor_.embedding_dim);
  const Eigen::RowVector3d p = softmax((weights_ * prediction.embedding).transpose());
  for (std::size_t i = 0; i < kNumLabels; ++i) prediction.probs[i] = p[static_cast<Eigen::Index>(i)];
  prediction.label = argmax_label(prediction.probs);
  return prediction;
}

double ToyEncoder::loss(const std::vector<Review>& corpus) const {
  if (corpus.empty()) return 0.0;
  double total = 0.0;
  for (const auto& review : corpus) {
    const Eigen::RowVector3d p = softmax(logits(review.text).transpose());
    total -= std::log(p[static_cast<Eigen::Index>(index_of(review.label))]);
  }
  return total / static_cast<double>(corpus.size());
}

void ToyEncoder::save(const std::filesystem::path& path) const {
  json rows = json::array();
  for (Eigen::Index r = 0; r < weights_.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < weights_.cols(); ++c) row.push_back(weights_(r, c));
    rows.push_back(std::move(row));
  }
  const json document = {{"kind", "toy"},
                         {"dim", weights_.cols()},
                         {"epochs", epochs_},
                         {"seed", seed_},
                         {"weights", std::move(rows)}};
  write_file_atomic(path, document.dump() + "\n");
}

ToyEncoder ToyEncoder::load(const std::filesystem::path& path) {
  json document;
  try {
    document = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw SchemaError("toy model " + path.string() + ": " + e.what());
  }
  if (document.value("kind", "") != "toy" || !document.contains("weights")) {
    throw SchemaError("toy model " + path.string() + ": not a toy encoder file");
  }
  const long dim = document.at("dim").get<long>();
  const auto& rows = document.at("weights");
  if (!rows.is_array() || rows.size() != kNumLabels) {
    throw SchemaError("toy model: weights must have 3 rows");
  }
  Eigen::MatrixXd weights(static_cast<Eigen::Index>(kNumLabels), dim);
  for (std::size_t r = 0; r < kNumLabels; ++r) {
    if (rows[r].size() != static_cast<std::size_t>(dim)) {
      throw SchemaError("toy model: weight row length differs from dim");
    }
    for (long c = 0; c < dim; ++c) {
      weights(static_cast<Eigen::Index>(r), c) = rows[r][static_cast<std::size_t>(c)].get<double>();
    }
  }
  return ToyEncoder(std::move(weights), document.value("seed", std::uint64_t{0}),
                    document.value("epochs", 0));
}

ToyEncoder toy_train(const std::vector<Review>& corpus, long dim, int epochs, std::uint64_t seed,
                     std::vector<double>* loss_trace) {
  if (dim < 1) throw TrainingError("toy_train: dim must be positive");
  if (epochs < 0) throw TrainingError("toy_train: epochs must be non-negative");
  std::array<std::size_t, kNumLabels> counts{};
  for (const auto& review : corpus) ++counts[index_of(review.label)];
  for (Label label : kAllLabels) {
    if (counts[index_of(label)] == 0) {
      throw TrainingError("toy_train: no examples of class " + std::string(to_string(label)));
    }
  }

  const auto n = static_cast<Eigen::Index>(corpus.size());
  Eigen::MatrixXd features(n, dim);
  Eigen::MatrixXd targets = Eigen::MatrixXd::Zero(n, static_cast<Eigen::Index>(kNumLabels));
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& review = corpus[static_cast<std::size_t>(i)];
    features.row(i) = hashed_features(review.text, dim).transpose();
    targets(i, static_cast<Eigen::Index>(index_of(review.label))) = 1.0;
  }

  Eigen::MatrixXd weights = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(kNumLabels), dim);
  const auto probabilities = [&](const Eigen::MatrixXd& w) {
    Eigen::MatrixXd logits = features * w.transpose();
    for (Eigen::Index i = 0; i < n; ++i) logits.row(i) = softmax(logits.row(i));
    return logits;
  };
  const auto mean_loss = [&](const Eigen::MatrixXd& p) {
    return -(p.array().log() * targets.array()).sum() / static_cast<double>(n);
  };

  Eigen::MatrixXd p = probabilities(weights);
  if (loss_trace) loss_trace->push_back(mean_loss(p));
  for (int epoch = 0; epoch < epochs; ++epoch) {
    const Eigen::MatrixXd gradient = (p - targets).transpose() * features / static_cast<double>(n);
    weights -= ToyEncoder::kLearningRate * gradient;
    p = probabilities(weights);
    if (loss_trace) loss_trace->push_back(mean_loss(p));
  }
  return ToyEncoder(std::move(weights), seed, epochs);
}

// ---------------------------------------------------------------------------

std::unique_ptr<EncoderBackend> open_backend(std::string_view spec) {
  const auto colon = spec.find(':');
  if (colon == std::string_view::npos) {
    throw ConfigError("backend spec \"" + std::string(spec) + "\" must be kind:target");
  }
  const std::string kind(spec.substr(0, colon));
  const std::string target(spec.substr(colon + 1));
  if (kind == "file") return std::make_unique<FileBackend>(FileBackend::load(target));
  if (kind == "toy") return std::make_unique<ToyEncoder>(ToyEncoder::load(target));
  if (kind == "http") {
    HttpBackendOptions options;
    options.base_url = target;
    return std::make_unique<HttpBackend>(std::move(options));
  }
  throw ConfigError("unknown backend kind \"" + kind + "\"");
}

}  // namespace encassist
