#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <optional>
#include <queue>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "core.hpp"

/**
 * @file flat_index.hpp
 *
 * @brief Exact exhaustive similarity search over an EmbeddingMatrix.
 *
 * L2 scores are squared distances on the raw, unnormalized vectors (smaller is better).
 * Cosine scores are similarities computed from precomputed row norms (larger is better);
 * stored data is never modified. All sums accumulate in double, left to right over components,
 * so scores are reproducible regardless of thread count.
 */

namespace trapdex {

enum class Metric { l2, cosine };

inline std::string_view to_string(Metric m) { return m == Metric::l2 ? "l2" : "cosine"; }

inline std::optional<Metric> parse_metric(std::string_view s) {
  if (s == "l2") return Metric::l2;
  if (s == "cosine") return Metric::cosine;
  return std::nullopt;
}

template <typename A, typename B>
double squared_l2(std::span<const A> a, std::span<const B> b) {
  double acc = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    acc += d * d;
  }
  return acc;
}

template <typename A, typename B>
double dot(std::span<const A> a, std::span<const B> b) {
  double acc = 0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += static_cast<double>(a[i]) * static_cast<double>(b[i]);
  return acc;
}

template <typename A>
double norm(std::span<const A> a) {
  return std::sqrt(dot(a, a));
}

/// True when score `a` ranks ahead of score `b` under the metric.
inline bool better(Metric m, double a, double b) { return m == Metric::l2 ? a < b : a > b; }

struct Neighbor {
  std::size_t row = 0;
  std::string id;
  std::optional<LabelId> label;
  double score = 0;
};

class FlatIndex {
 public:
  FlatIndex(std::shared_ptr<const EmbeddingMatrix> matrix, Metric metric) : matrix_(std::move(matrix)), metric_(metric) {
    if (!matrix_) throw Error("null matrix");
    const auto data = matrix_->data();
    for (float v : data)
      if (!std::isfinite(v)) throw Error("non-finite value in index data");
    if (metric_ == Metric::cosine) {
      norms_.resize(matrix_->size());
      for (std::size_t i = 0; i < matrix_->size(); ++i) {
        norms_[i] = norm(matrix_->row(i));
        if (!(norms_[i] > 0)) throw Error("zero-norm row " + std::to_string(i) + " ('" + matrix_->id(i) +
                                          "') cannot be indexed under cosine");
      }
    }
  }

  FlatIndex(EmbeddingMatrix matrix, Metric metric)
      : FlatIndex(std::make_shared<const EmbeddingMatrix>(std::move(matrix)), metric) {}

  Metric metric() const { return metric_; }
  std::size_t size() const { return matrix_->size(); }
  std::size_t dimension() const { return matrix_->dimension(); }
  const EmbeddingMatrix& matrix() const { return *matrix_; }
  std::shared_ptr<const EmbeddingMatrix> shared_matrix() const { return matrix_; }

  /// Score of one row against a query; `query_norm` is only used under cosine.
  double score(std::size_t row, std::span<const float> query, double query_norm) const {
    if (metric_ == Metric::l2) return squared_l2(matrix_->row(row), query);
    return dot(matrix_->row(row), query) / (norms_[row] * query_norm);
  }

  /**
   * The min(k, N) best rows, best first; ties broken by ascending row index.
   * Uses a bounded heap whose top is the current worst kept entry.
   */
  std::vector<Neighbor> search(std::span<const float> query, std::size_t k) const {
    if (k == 0) throw ValidationError("k must be at least 1");
    if (query.size() != dimension())
      throw Error("query dimension " + std::to_string(query.size()) + " does not match index dimension " +
                  std::to_string(dimension()));
    for (float v : query)
      if (!std::isfinite(v)) throw Error("non-finite value in query");
    double qn = 1;
    if (metric_ == Metric::cosine) {
      qn = norm(query);
      if (!(qn > 0)) throw Error("zero-norm query under cosine");
    }

    using Entry = std::pair<double, std::size_t>;
    const Metric m = metric_;
    // Heap ordering puts the worst entry on top: worse score, or equal score and larger row.
    auto worse_first = [m](const Entry& a, const Entry& b) {
      if (a.first != b.first) return better(m, a.first, b.first);
      return a.second < b.second;
    };
    std::priority_queue<Entry, std::vector<Entry>, decltype(worse_first)> heap(worse_first);
    const std::size_t n = size();
    for (std::size_t i = 0; i < n; ++i) {
      const double s = score(i, query, qn);
      if (heap.size() < k) {
        heap.emplace(s, i);
      } else if (better(m, s, heap.top().first)) {
        heap.pop();
        heap.emplace(s, i);
      }
    }
    std::vector<Neighbor> out(heap.size());
    for (std::size_t j = out.size(); j-- > 0;) {
      const auto [s, row] = heap.top();
      heap.pop();
      out[j] = {row, matrix_->id(row), matrix_->label(row), s};
    }
    return out;
  }

 private:
  std::shared_ptr<const EmbeddingMatrix> matrix_;
  Metric metric_;
  std::vector<double> norms_;
};

inline FlatIndex build_flat_index(std::shared_ptr<const EmbeddingMatrix> matrix, Metric metric) {
  return FlatIndex(std::move(matrix), metric);
}

inline std::vector<Neighbor> search_topk(const FlatIndex& index, std::span<const float> query, std::size_t k) {
  return index.search(query, k);
}

/// Runs every query row through the index; results are in query order for any thread count.
inline std::vector<std::vector<Neighbor>> search_batch(const FlatIndex& index, const EmbeddingMatrix& queries,
                                                       std::size_t k, unsigned threads = 1) {
  if (!queries.empty() && queries.dimension() != index.dimension())
    throw Error("query dimension " + std::to_string(queries.dimension()) + " does not match index dimension " +
                std::to_string(index.dimension()));
  std::vector<std::vector<Neighbor>> out(queries.size());
  const std::size_t nq = queries.size();
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(nq, 1))));
  if (threads == 1) {
    for (std::size_t q = 0; q < nq; ++q) out[q] = index.search(queries.row(q), k);
    return out;
  }
  std::vector<std::exception_ptr> errors(threads);
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (unsigned t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      try {
        for (std::size_t q = t; q < nq; q += threads) out[q] = index.search(queries.row(q), k);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

struct CentroidSet {
  std::size_t dimension = 0;
  /// Ascending label id.
  std::vector<LabelId> labels;
  std::vector<std::vector<double>> centroids;
  std::vector<std::size_t> counts;

  std::size_t size() const { return labels.size(); }
};

/// Per-class arithmetic mean of the rows; every row must carry a label.
inline CentroidSet class_centroids(const EmbeddingMatrix& matrix) {
  std::map<LabelId, std::pair<std::vector<double>, std::size_t>> acc;
  for (std::size_t i = 0; i < matrix.size(); ++i) {
    const auto label = matrix.label(i);
    if (!label) throw Error("unlabeled row " + std::to_string(i) + " ('" + matrix.id(i) + "')");
    auto& [sum, count] = acc[*label];
    if (sum.empty()) sum.assign(matrix.dimension(), 0.0);
    const auto r = matrix.row(i);
    for (std::size_t d = 0; d < r.size(); ++d) sum[d] += r[d];
    ++count;
  }
  CentroidSet out;
  out.dimension = matrix.dimension();
  for (auto& [label, entry] : acc) {
    auto& [sum, count] = entry;
    for (auto& v : sum) v /= static_cast<double>(count);
    out.labels.push_back(label);
    out.centroids.push_back(std::move(sum));
    out.counts.push_back(count);
  }
  return out;
}

}  // namespace trapdex
