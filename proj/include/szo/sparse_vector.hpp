#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdint>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "szo/errors.hpp"

namespace szo {

using Index = std::uint32_t;

inline constexpr Index kMaxDim = Index{1} << 31;

/// Sparse real vector over [0, dim) in canonical form: indices strictly
/// increasing, no stored value equal to 0.0. Immutable once built.
class SparseVector {
 public:
  SparseVector() = default;

  explicit SparseVector(Index dim) : dim_(check_dim(dim)) {}

  /// Builds from unordered (index, value) pairs. Duplicate indices are summed;
  /// entries that end up exactly zero are dropped.
  static SparseVector from_pairs(Index dim, std::vector<std::pair<Index, double>> pairs) {
    SparseVector v(dim);
    std::sort(pairs.begin(), pairs.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    v.indices_.reserve(pairs.size());
    v.values_.reserve(pairs.size());
    for (std::size_t i = 0; i < pairs.size();) {
      const Index idx = pairs[i].first;
      if (idx >= dim) {
        throw std::out_of_range("SparseVector: index " + std::to_string(idx) +
                                " outside dimension " + std::to_string(dim));
      }
      double sum = 0.0;
      for (; i < pairs.size() && pairs[i].first == idx; ++i) sum += pairs[i].second;
      if (sum != 0.0) {
        v.indices_.push_back(idx);
        v.values_.push_back(sum);
      }
    }
    return v;
  }

  /// Builds from already sorted, unique indices. Zero values are dropped.
  static SparseVector from_sorted(Index dim, std::span<const Index> indices,
                                  std::span<const double> values) {
    if (indices.size() != values.size()) {
      throw std::invalid_argument("SparseVector: index/value length mismatch");
    }
    SparseVector v(dim);
    v.indices_.reserve(indices.size());
    v.values_.reserve(values.size());
    for (std::size_t i = 0; i < indices.size(); ++i) {
      if (indices[i] >= dim || (i > 0 && indices[i] <= indices[i - 1])) {
        throw std::invalid_argument("SparseVector: indices must be sorted, unique and < dim");
      }
      if (values[i] != 0.0) {
        v.indices_.push_back(indices[i]);
        v.values_.push_back(values[i]);
      }
    }
    return v;
  }

  static SparseVector from_dense(std::span<const double> dense) {
    SparseVector v(static_cast<Index>(dense.size()));
    for (std::size_t i = 0; i < dense.size(); ++i) {
      if (dense[i] != 0.0) {
        v.indices_.push_back(static_cast<Index>(i));
        v.values_.push_back(dense[i]);
      }
    }
    return v;
  }

  Index dim() const noexcept { return dim_; }
  std::size_t nnz() const noexcept { return indices_.size(); }
  bool empty() const noexcept { return indices_.empty(); }
  std::span<const Index> indices() const noexcept { return indices_; }
  std::span<const double> values() const noexcept { return values_; }

  /// Value at coordinate i (0.0 when not stored).
  double operator[](Index i) const {
    auto it = std::lower_bound(indices_.begin(), indices_.end(), i);
    if (it == indices_.end() || *it != i) return 0.0;
    return values_[static_cast<std::size_t>(it - indices_.begin())];
  }

  std::vector<double> to_dense() const {
    std::vector<double> out(dim_, 0.0);
    for (std::size_t k = 0; k < indices_.size(); ++k) out[indices_[k]] = values_[k];
    return out;
  }

  /// Returns alpha * this, canonical (alpha == 0 gives the empty vector).
  SparseVector scaled(double alpha) const {
    SparseVector v(dim_);
    if (alpha == 0.0) return v;
    v.indices_.reserve(indices_.size());
    v.values_.reserve(values_.size());
    for (std::size_t k = 0; k < indices_.size(); ++k) {
      const double x = alpha * values_[k];
      if (x != 0.0) {
        v.indices_.push_back(indices_[k]);
        v.values_.push_back(x);
      }
    }
    return v;
  }

  friend bool operator==(const SparseVector& a, const SparseVector& b) {
    return a.dim_ == b.dim_ && a.indices_ == b.indices_ && a.values_ == b.values_;
  }

 private:
  static Index check_dim(Index dim) {
    if (dim == 0 || dim > kMaxDim) {
      throw std::invalid_argument("SparseVector: dimension must be in [1, 2^31]");
    }
    return dim;
  }

  Index dim_ = 0;
  std::vector<Index> indices_;
  std::vector<double> values_;

  friend SparseVector axpy(double alpha, const SparseVector& x, const SparseVector& y);
};

/// Sorted set of coordinates over [0, dim).
class ActiveSet {
 public:
  ActiveSet() = default;

  ActiveSet(Index dim, std::vector<Index> indices) : dim_(dim), indices_(std::move(indices)) {
    std::sort(indices_.begin(), indices_.end());
    indices_.erase(std::unique(indices_.begin(), indices_.end()), indices_.end());
    if (!indices_.empty() && indices_.back() >= dim_) {
      throw std::out_of_range("ActiveSet: index outside dimension");
    }
  }

  static ActiveSet all(Index dim) {
    std::vector<Index> idx(dim);
    std::iota(idx.begin(), idx.end(), Index{0});
    ActiveSet s;
    s.dim_ = dim;
    s.indices_ = std::move(idx);
    return s;
  }

  /// Union of the supports of the given vectors.
  static ActiveSet support_union(Index dim, std::span<const SparseVector* const> vectors) {
    std::vector<Index> idx;
    for (const SparseVector* v : vectors) {
      if (v->dim() != dim) throw std::invalid_argument("ActiveSet: dimension mismatch");
      idx.insert(idx.end(), v->indices().begin(), v->indices().end());
    }
    return ActiveSet(dim, std::move(idx));
  }

  Index dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return indices_.size(); }
  bool empty() const noexcept { return indices_.empty(); }
  std::span<const Index> indices() const noexcept { return indices_; }

  bool contains(Index i) const {
    return std::binary_search(indices_.begin(), indices_.end(), i);
  }

  friend bool operator==(const ActiveSet&, const ActiveSet&) = default;

 private:
  Index dim_ = 0;
  std::vector<Index> indices_;
};

namespace detail {
inline void require_same_dim(const SparseVector& a, const SparseVector& b, const char* op) {
  if (a.dim() != b.dim()) {
    throw std::invalid_argument(std::string(op) + ": dimension mismatch (" +
                                std::to_string(a.dim()) + " vs " + std::to_string(b.dim()) + ")");
  }
}
}  // namespace detail

/// Sorted-merge inner product. Summation runs in increasing index order, so
/// dot(a, b) == dot(b, a) bitwise.
inline double dot(const SparseVector& a, const SparseVector& b) {
  detail::require_same_dim(a, b, "dot");
  const auto ia = a.indices(), ib = b.indices();
  const auto va = a.values(), vb = b.values();
  double sum = 0.0;
  std::size_t i = 0, j = 0;
  while (i < ia.size() && j < ib.size()) {
    if (ia[i] < ib[j]) {
      ++i;
    } else if (ib[j] < ia[i]) {
      ++j;
    } else {
      sum += va[i] * vb[j];
      ++i;
      ++j;
    }
  }
  return sum;
}

/// Inner product against a dense weight array.
inline double dot(std::span<const double> w, const SparseVector& x) {
  if (w.size() != x.dim()) throw std::invalid_argument("dot: dimension mismatch");
  double sum = 0.0;
  const auto idx = x.indices();
  const auto val = x.values();
  for (std::size_t k = 0; k < idx.size(); ++k) sum += w[idx[k]] * val[k];
  return sum;
}

/// y + alpha * x in canonical form.
inline SparseVector axpy(double alpha, const SparseVector& x, const SparseVector& y) {
  detail::require_same_dim(x, y, "axpy");
  if (alpha == 0.0) return y;
  SparseVector out(y.dim());
  const auto ix = x.indices(), iy = y.indices();
  const auto vx = x.values(), vy = y.values();
  out.indices_.reserve(ix.size() + iy.size());
  out.values_.reserve(ix.size() + iy.size());
  auto push = [&](Index i, double v) {
    if (v != 0.0) {
      out.indices_.push_back(i);
      out.values_.push_back(v);
    }
  };
  std::size_t i = 0, j = 0;
  while (i < ix.size() || j < iy.size()) {
    if (j == iy.size() || (i < ix.size() && ix[i] < iy[j])) {
      push(ix[i], alpha * vx[i]);
      ++i;
    } else if (i == ix.size() || iy[j] < ix[i]) {
      push(iy[j], vy[j]);
      ++j;
    } else {
      push(ix[i], vy[j] + alpha * vx[i]);
      ++i;
      ++j;
    }
  }
  return out;
}

/// In-place w += alpha * x on a dense array.
inline void axpy_inplace(double alpha, const SparseVector& x, std::span<double> w) {
  if (w.size() != x.dim()) throw std::invalid_argument("axpy: dimension mismatch");
  const auto idx = x.indices();
  const auto val = x.values();
  for (std::size_t k = 0; k < idx.size(); ++k) w[idx[k]] += alpha * val[k];
}

/// Number of nonzero coordinates (0^0 = 0).
inline std::size_t l0_norm(const SparseVector& v) noexcept { return v.nnz(); }

inline double l2_norm_sq(const SparseVector& v) noexcept {
  double s = 0.0;
  for (double x : v.values()) s += x * x;
  return s;
}

inline double l2_norm_sq(std::span<const double> v) noexcept {
  double s = 0.0;
  for (double x : v) s += x * x;
  return s;
}

// Text format: a `dim=<n>` header line followed by one vector per line as
// space-separated `index:value` pairs. Values are written with 17 significant
// digits so that a write/read cycle is bitwise exact.

inline std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline void write_vectors(std::ostream& out, Index dim, std::span<const SparseVector> vectors) {
  out << "dim=" << dim << '\n';
  for (const auto& v : vectors) {
    if (v.dim() != dim) throw std::invalid_argument("write_vectors: dimension mismatch");
    const auto idx = v.indices();
    const auto val = v.values();
    for (std::size_t k = 0; k < idx.size(); ++k) {
      if (k) out << ' ';
      out << idx[k] << ':' << format_double(val[k]);
    }
    out << '\n';
  }
}

inline std::vector<SparseVector> read_vectors(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line.rfind("dim=", 0) != 0) {
    throw DataError("sparse vector file: missing `dim=<n>` header");
  }
  unsigned long long dim = 0;
  try {
    dim = std::stoull(line.substr(4));
  } catch (const std::exception&) {
    throw DataError("sparse vector file: bad header `" + line + "`");
  }
  if (dim == 0 || dim > kMaxDim) throw DataError("sparse vector file: bad dimension");
  std::vector<SparseVector> out;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ls(line);
    std::string tok;
    std::vector<std::pair<Index, double>> pairs;
    while (ls >> tok) {
      const auto colon = tok.find(':');
      if (colon == std::string::npos) {
        throw DataError("sparse vector file: line " + std::to_string(lineno) +
                        ": expected index:value, got `" + tok + "`");
      }
      try {
        const unsigned long long i = std::stoull(tok.substr(0, colon));
        const double x = std::stod(tok.substr(colon + 1));
        if (i >= dim) throw DataError("index out of range");
        pairs.emplace_back(static_cast<Index>(i), x);
      } catch (const std::exception&) {
        throw DataError("sparse vector file: line " + std::to_string(lineno) + ": bad entry `" +
                        tok + "`");
      }
    }
    out.push_back(SparseVector::from_pairs(static_cast<Index>(dim), std::move(pairs)));
  }
  return out;
}

}  // namespace szo
