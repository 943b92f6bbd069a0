#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "encassist/corpus.hpp"
#include "encassist/encoder.hpp"
#include "encassist/error.hpp"
#include "encassist/label.hpp"

namespace encassist {

/// Cosine similarity, clamped to [-1, 1]. Throws DimensionError on a length
/// mismatch and UndefinedSimilarity if either vector is zero.
template <typename DerivedU, typename DerivedV>
typename DerivedU::Scalar cosine(const Eigen::MatrixBase<DerivedU>& u,
                                 const Eigen::MatrixBase<DerivedV>& v) {
  using Scalar = typename DerivedU::Scalar;
  if (u.size() != v.size()) {
    throw DimensionError("cosine: length " + std::to_string(u.size()) + " vs " +
                         std::to_string(v.size()));
  }
  const Scalar nu = u.norm();
  const Scalar nv = v.norm();
  if (nu == Scalar(0) || nv == Scalar(0)) {
    throw UndefinedSimilarity("cosine: zero vector");
  }
  const Scalar c = u.dot(v) / (nu * nv);
  return std::clamp(c, Scalar(-1), Scalar(1));
}

struct PoolEntry {
  std::string id;
  std::string text;
  Label label = Label::neutral;
  Eigen::VectorXd embedding;
};

struct RetrievedExample {
  std::string id;
  std::string text;
  Label label = Label::neutral;
  double score = 0.0;
};

/// Immutable labelled example pool searched exhaustively.
class ExamplePool {
 public:
  /// Throws DimensionError for inconsistent lengths, UndefinedSimilarity for
  /// a zero embedding and DuplicateIdError for repeated ids.
  explicit ExamplePool(std::vector<PoolEntry> entries);

  std::size_t size() const noexcept { return entries_.size(); }
  long dim() const noexcept { return static_cast<long>(embeddings_.cols()); }
  const std::vector<PoolEntry>& entries() const noexcept { return entries_; }

  /// Highest cosine first, ties by ascending id. Returns min(k, size) entries.
  std::vector<RetrievedExample> top_k(const Eigen::VectorXd& query, std::size_t k) const;

  /// `per_class` best entries of each class, concatenated negative, neutral,
  /// positive. Throws Error naming a class with too few entries.
  std::vector<RetrievedExample> balanced_top(const Eigen::VectorXd& query,
                                             std::size_t per_class) const;

  /// Cosine of the query against every entry, in pool order.
  Eigen::VectorXd scores(const Eigen::VectorXd& query) const;

  /// Pool file records: {"id", "text", "label", "embedding"[, "probs"]}, where
  /// label is the example's gold label.
  static ExamplePool load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

 private:
  std::vector<RetrievedExample> ranked(const Eigen::VectorXd& query, std::vector<std::size_t> rows,
                                       std::size_t k) const;

  std::vector<PoolEntry> entries_;
  Eigen::MatrixXd embeddings_;   // one row per entry
  Eigen::VectorXd inv_norms_;
};

/// Seeded shuffle of `reviews`, first `size` kept, embedded by `backend`.
ExamplePool build_pool(const std::vector<Review>& reviews, const EncoderBackend& backend,
                       std::size_t size, std::uint64_t seed);

}  // namespace encassist
