#include "encassist/retriever.hpp"

#include <numeric>
#include <sstream>
#include <unordered_set>

#include "encassist/jsonl.hpp"
#include "encassist/rng.hpp"

namespace encassist {

ExamplePool::ExamplePool(std::vector<PoolEntry> entries) : entries_(std::move(entries)) {
  if (entries_.empty()) throw Error("example pool is empty");
  const auto dim = entries_.front().embedding.size();
  if (dim == 0) throw DimensionError("example pool: zero-length embedding");
  embeddings_.resize(static_cast<Eigen::Index>(entries_.size()), dim);
  inv_norms_.resize(static_cast<Eigen::Index>(entries_.size()));
  std::unordered_set<std::string> ids;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const auto& entry = entries_[i];
    if (entry.embedding.size() != dim) {
      throw DimensionError("example pool: entry \"" + entry.id + "\" has length " +
                           std::to_string(entry.embedding.size()) + ", expected " +
                           std::to_string(dim));
    }
    const double norm = entry.embedding.norm();
    if (norm == 0.0) {
      throw UndefinedSimilarity("example pool: entry \"" + entry.id + "\" has a zero embedding");
    }
    if (!ids.insert(entry.id).second) {
      throw DuplicateIdError("example pool: duplicate id \"" + entry.id + "\"");
    }
    embeddings_.row(static_cast<Eigen::Index>(i)) = entry.embedding.transpose();
    inv_norms_[static_cast<Eigen::Index>(i)] = 1.0 / norm;
  }
}

Eigen::VectorXd ExamplePool::scores(const Eigen::VectorXd& query) const {
  if (query.size() != embeddings_.cols()) {
    throw DimensionError("query length " + std::to_string(query.size()) + " vs pool dimension " +
                         std::to_string(embeddings_.cols()));
  }
  const double qn = query.norm();
  if (qn == 0.0) throw UndefinedSimilarity("query embedding is zero");
  Eigen::VectorXd s(embeddings_.rows());
  for (Eigen::Index i = 0; i < embeddings_.rows(); ++i) {
    const double c = embeddings_.row(i).dot(query.transpose()) * inv_norms_[i] / qn;
    s[i] = std::clamp(c, -1.0, 1.0);
  }
  return s;
}

std::vector<RetrievedExample> ExamplePool::ranked(const Eigen::VectorXd& query,
                                                  std::vector<std::size_t> rows,
                                                  std::size_t k) const {
  const Eigen::VectorXd s = scores(query);
  const auto before = [&](std::size_t a, std::size_t b) {
    const double sa = s[static_cast<Eigen::Index>(a)];
    const double sb = s[static_cast<Eigen::Index>(b)];
    if (sa != sb) return sa > sb;
    return entries_[a].id < entries_[b].id;
  };
  k = std::min(k, rows.size());
  std::partial_sort(rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(k), rows.end(), before);
  std::vector<RetrievedExample> out;
  out.reserve(k);
  for (std::size_t i = 0; i < k; ++i) {
    const auto& entry = entries_[rows[i]];
    out.push_back({entry.id, entry.text, entry.label, s[static_cast<Eigen::Index>(rows[i])]});
  }
  return out;
}

std::vector<RetrievedExample> ExamplePool::top_k(const Eigen::VectorXd& query,
                                                 std::size_t k) const {
  if (k < 1) throw Error("top_k: k must be >= 1");
  std::vector<std::size_t> rows(entries_.size());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  return ranked(query, std::move(rows), k);
}

std::vector<RetrievedExample> ExamplePool::balanced_top(const Eigen::VectorXd& query,
                                                        std::size_t per_class) const {
  if (per_class < 1) throw Error("balanced_top: per_class must be >= 1");
  std::vector<RetrievedExample> out;
  out.reserve(per_class * kNumLabels);
  for (Label label : kAllLabels) {
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < entries_.size(); ++i) {
      if (entries_[i].label == label) rows.push_back(i);
    }
    if (rows.size() < per_class) {
      throw Error("balanced_top: class " + std::string(to_string(label)) + " has " +
                  std::to_string(rows.size()) + " entries, need " + std::to_string(per_class));
    }
    auto best = ranked(query, std::move(rows), per_class);
    out.insert(out.end(), std::make_move_iterator(best.begin()),
               std::make_move_iterator(best.end()));
  }
  return out;
}

ExamplePool ExamplePool::load(const std::filesystem::path& path) {
  std::vector<PoolEntry> entries;
  for_each_jsonl(path, [&](const json& record, std::size_t line) {
    const std::string where = "line " + std::to_string(line) + ": ";
    PoolEntry entry;
    try {
      entry.id = record.at("id").get<std::string>();
      entry.text = record.at("text").get<std::string>();
      entry.label = parse_label(record.at("label").get<std::string>());
      const auto& embedding = record.at("embedding");
      entry.embedding.resize(static_cast<Eigen::Index>(embedding.size()));
      for (std::size_t i = 0; i < embedding.size(); ++i) {
        entry.embedding[static_cast<Eigen::Index>(i)] = embedding[i].get<double>();
      }
    } catch (const json::exception& e) {
      throw SchemaError(where + e.what());
    } catch (const IngestError& e) {
      throw SchemaError(where + e.what());
    }
    entries.push_back(std::move(entry));
  });
  return ExamplePool(std::move(entries));
}

void ExamplePool::save(const std::filesystem::path& path) const {
  std::ostringstream out;
  for (const auto& entry : entries_) {
    json embedding = json::array();
    for (Eigen::Index i = 0; i < entry.embedding.size(); ++i) embedding.push_back(entry.embedding[i]);
    out << json{{"id", entry.id},
                {"text", entry.text},
                {"label", to_string(entry.label)},
                {"embedding", std::move(embedding)}}
               .dump()
        << '\n';
  }
  write_file_atomic(path, out.str());
}

ExamplePool build_pool(const std::vector<Review>& reviews, const EncoderBackend& backend,
                       std::size_t size, std::uint64_t seed) {
  std::vector<std::size_t> order(reviews.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  fisher_yates(order.begin(), order.end(), seed);
  order.resize(std::min(size, order.size()));
  std::vector<PoolEntry> entries;
  entries.reserve(order.size());
  for (std::size_t index : order) {
    const auto& review = reviews[index];
    auto prediction = backend.predict(review.text, review.id);
    entries.push_back({review.id, review.text, review.label, std::move(prediction.embedding)});
  }
  return ExamplePool(std::move(entries));
}

}  // namespace encassist
