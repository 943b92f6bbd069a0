#pragma once

#include <array>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <semaphore>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "encassist/corpus.hpp"
#include "encassist/jsonl.hpp"
#include "encassist/label.hpp"

namespace encassist {

/// Probabilities in class order (negative, neutral, positive).
using ProbTriple = std::array<double, kNumLabels>;

/// Tolerance for probabilities a backend computes itself.
inline constexpr double kProbSumTolerance = 1e-6;
/// Tolerance for probabilities read back from storage, which are commonly
/// rounded to four decimals (0.9985 / 0.0004 / 0.0012 sums to 1.0001).
inline constexpr double kStoredProbSumTolerance = 1e-3;

struct EncoderPrediction {
  Label label = Label::neutral;
  ProbTriple probs{};
  Eigen::VectorXd embedding;
};

/// Checks probs in [0, 1], sum within `tolerance`, label == argmax and, when
/// `expected_dim` > 0, the embedding length. Throws SchemaError.
void validate_prediction(const EncoderPrediction& prediction, double tolerance,
                         long expected_dim = 0);

/// Parses {"label", "probs", "embedding"} (extra keys ignored). The label is
/// optional; when absent it is derived from the probabilities.
EncoderPrediction prediction_from_json(const json& record);
json prediction_to_json(const EncoderPrediction& prediction);

enum class BackendKind { file, http, toy };

std::string_view to_string(BackendKind kind) noexcept;

struct BackendDescriptor {
  BackendKind kind = BackendKind::toy;
  long embedding_dim = 0;
  std::string model_name;
};

/// Uniform contract for every encoder. Implementations are immutable after
/// construction and `predict` may be called concurrently.
class EncoderBackend {
 public:
  virtual ~EncoderBackend() = default;
  virtual const BackendDescriptor& descriptor() const noexcept = 0;
  virtual EncoderPrediction predict(std::string_view text,
                                    std::optional<std::string_view> id = std::nullopt) const = 0;
};

/// p in [0, 1] as a percentage with two decimals, half-up: 0.9985 -> "99.85%".
std::string format_percent(double p);

// ---------------------------------------------------------------------------
// Precomputed predictions

class FileBackend final : public EncoderBackend {
 public:
  /// Records are {"id", "label", "probs", "embedding"}; embedding_dim comes
  /// from the first record. Throws SchemaError with the line number.
  static FileBackend load(const std::filesystem::path& path);
  static FileBackend load(std::istream& in, std::string model_name = "file");

  const BackendDescriptor& descriptor() const noexcept override { return descriptor_; }
  /// Lookup by id; text is ignored. Throws LookupError for unknown or absent ids.
  EncoderPrediction predict(std::string_view text,
                            std::optional<std::string_view> id = std::nullopt) const override;

  std::size_t size() const noexcept { return predictions_.size(); }

 private:
  BackendDescriptor descriptor_{BackendKind::file, 0, {}};
  std::unordered_map<std::string, EncoderPrediction> predictions_;
};

// ---------------------------------------------------------------------------
// Remote service speaking POST /predict

struct HttpBackendOptions {
  std::string base_url;
  /// 0 asks GET /health for the dimension.
  long embedding_dim = 0;
  std::string model_name;
  int max_attempts = 3;
  std::chrono::milliseconds initial_backoff{500};
  std::chrono::milliseconds timeout{30'000};
  int max_in_flight = 8;
};

class HttpBackend final : public EncoderBackend {
 public:
  explicit HttpBackend(HttpBackendOptions options);
  ~HttpBackend() override;
  HttpBackend(const HttpBackend&) = delete;
  HttpBackend& operator=(const HttpBackend&) = delete;

  const BackendDescriptor& descriptor() const noexcept override { return descriptor_; }
  /// Throws BackendUnavailable after `max_attempts` transport failures or
  /// non-200 responses; SchemaError for a response violating the contract.
  EncoderPrediction predict(std::string_view text,
                            std::optional<std::string_view> id = std::nullopt) const override;

 private:
  HttpBackendOptions options_;
  BackendDescriptor descriptor_{BackendKind::http, 0, {}};
  mutable std::unique_ptr<std::counting_semaphore<>> in_flight_;
};

// ---------------------------------------------------------------------------
// Desk-scale bag-of-words encoder

/// Lowercased alphanumeric tokens plus a constant bias token, hashed into
/// `dim` buckets and L2-normalised. This vector is the input to the linear
/// head and serves as the embedding.
Eigen::VectorXd hashed_features(std::string_view text, long dim);

/// Multinomial logistic regression over hashed features. Trained by
/// full-batch gradient descent from zero weights, so training is
/// reproducible and the mean cross-entropy never increases.
class ToyEncoder final : public EncoderBackend {
 public:
  static constexpr double kLearningRate = 0.5;

  ToyEncoder(Eigen::MatrixXd weights, std::uint64_t seed, int epochs);

  const BackendDescriptor& descriptor() const noexcept override { return descriptor_; }
  EncoderPrediction predict(std::string_view text,
                            std::optional<std::string_view> id = std::nullopt) const override;

  Eigen::Vector3d logits(std::string_view text) const;
  /// 3 x dim, one row per class.
  const Eigen::MatrixXd& weights() const noexcept { return weights_; }
  std::uint64_t seed() const noexcept { return seed_; }
  int epochs() const noexcept { return epochs_; }

  /// Mean cross-entropy over a corpus.
  double loss(const std::vector<Review>& corpus) const;

  void save(const std::filesystem::path& path) const;
  static ToyEncoder load(const std::filesystem::path& path);

 private:
  Eigen::MatrixXd weights_;
  std::uint64_t seed_;
  int epochs_;
  BackendDescriptor descriptor_;
};

/// Throws TrainingError if a class is missing or dim < 1. `loss_trace`, when
/// given, receives the loss before training and after every epoch.
ToyEncoder toy_train(const std::vector<Review>& corpus, long dim, int epochs, std::uint64_t seed,
                     std::vector<double>* loss_trace = nullptr);

/// Parses "file:PATH", "http:URL" or "toy:PATH".
std::unique_ptr<EncoderBackend> open_backend(std::string_view spec);

}  // namespace encassist
