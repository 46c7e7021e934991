#pragma once

// Fundamental types: datasets, secants, hash models, packed binary codes, and the pure
// functions that relate them (sign hashing, sigmoid relaxation, pair distances).

#include <Eigen/Dense>

#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <iterator>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "isohash/error.hpp"
#include "isohash/parallel.hpp"

namespace isohash {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

inline std::string shape_str(Eigen::Index rows, Eigen::Index cols) {
  std::ostringstream os;
  os << rows << "x" << cols;
  return os.str();
}

/// Q points of dimension N plus the preprocessing applied to them.
struct Dataset {
  Matrix points;  // Q x N
  Vector mean;    // subtracted mean, zeros when not centered
  bool normalized = false;

  Dataset() = default;
  explicit Dataset(Matrix pts) : points(std::move(pts)), mean(Vector::Zero(points.cols())) {}
  Dataset(Matrix pts, Vector m, bool norm) : points(std::move(pts)), mean(std::move(m)), normalized(norm) {}

  std::size_t size() const { return static_cast<std::size_t>(points.rows()); }
  std::size_t dim() const { return static_cast<std::size_t>(points.cols()); }
};

/// Throws DataError when the dataset breaks its invariants.
inline void validate(const Dataset& data) {
  if (data.points.rows() < 2 || data.points.cols() < 1) {
    throw DataError("dataset must have Q >= 2 and N >= 1, got " + shape_str(data.points.rows(), data.points.cols()));
  }
  if (data.mean.size() != data.points.cols()) {
    throw DimensionError("dataset mean has length " + std::to_string(data.mean.size()) + " but points are " +
                         shape_str(data.points.rows(), data.points.cols()));
  }
  if (data.normalized) {
    for (Eigen::Index q = 0; q < data.points.rows(); ++q) {
      const double norm = data.points.row(q).norm();
      if (std::abs(norm - 1.0) > 1e-9) {
        throw DataError("row " + std::to_string(q) + " has norm " + std::to_string(norm) +
                        " in a dataset flagged as normalized");
      }
    }
  }
}

/// A pair (i, j), i > j, and its target ambient distance.
struct SecantRef {
  std::uint32_t i = 0;
  std::uint32_t j = 0;
  double c = 0.0;

  friend bool operator==(const SecantRef&, const SecantRef&) = default;
};

using SecantBatch = std::vector<SecantRef>;

/// Embedding W (M x N), scale lambda, final sigmoid rate alpha and preprocessing statistics.
struct HashModel {
  Matrix W;
  double lambda = 1.0;
  double alpha = 10.0;
  Vector mean;
  bool normalized = false;

  std::size_t bits() const { return static_cast<std::size_t>(W.rows()); }
  std::size_t dim() const { return static_cast<std::size_t>(W.cols()); }
};

/// Q x M matrix over {0,1}, one row per point, packed into 64-bit words.
class BinaryCodes {
public:
  BinaryCodes() = default;
  BinaryCodes(std::size_t rows, std::size_t bits)
      : rows_(rows), bits_(bits), words_((bits + 63) / 64), data_(rows * words_, 0) {}

  std::size_t rows() const { return rows_; }
  std::size_t bits() const { return bits_; }
  std::size_t words_per_row() const { return words_; }

  bool get(std::size_t q, std::size_t m) const { return (data_[q * words_ + m / 64] >> (m % 64)) & 1ULL; }

  void set(std::size_t q, std::size_t m, bool value) {
    std::uint64_t& word = data_[q * words_ + m / 64];
    const std::uint64_t mask = 1ULL << (m % 64);
    word = value ? (word | mask) : (word & ~mask);
  }

  std::span<const std::uint64_t> row(std::size_t q) const { return {data_.data() + q * words_, words_}; }

  /// Popcount of the XOR of two packed rows; unchecked.
  std::uint32_t distance(std::size_t i, std::size_t j) const {
    const std::uint64_t* a = data_.data() + i * words_;
    const std::uint64_t* b = data_.data() + j * words_;
    std::uint32_t d = 0;
    for (std::size_t w = 0; w < words_; ++w) d += static_cast<std::uint32_t>(std::popcount(a[w] ^ b[w]));
    return d;
  }

  /// Unpacked copy, one 0/1 entry per bit.
  Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> unpack() const {
    Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> out(rows_, bits_);
    for (std::size_t q = 0; q < rows_; ++q)
      for (std::size_t m = 0; m < bits_; ++m) out(q, m) = get(q, m) ? 1 : 0;
    return out;
  }

  template <class Derived>
  static BinaryCodes pack(const Eigen::MatrixBase<Derived>& bits01) {
    BinaryCodes codes(static_cast<std::size_t>(bits01.rows()), static_cast<std::size_t>(bits01.cols()));
    for (Eigen::Index q = 0; q < bits01.rows(); ++q)
      for (Eigen::Index m = 0; m < bits01.cols(); ++m) {
        if (bits01(q, m) != 0 && bits01(q, m) != 1) throw DataError("binary code entries must be 0 or 1");
        codes.set(q, m, bits01(q, m) == 1);
      }
    return codes;
  }

  friend bool operator==(const BinaryCodes&, const BinaryCodes&) = default;

private:
  std::size_t rows_ = 0;
  std::size_t bits_ = 0;
  std::size_t words_ = 0;
  std::vector<std::uint64_t> data_;
};

/// Quantizes the projections: bit (q, m) is 1 iff (W x_q)_m >= 0.
template <class Derived>
BinaryCodes codes_from_projections(const Eigen::MatrixBase<Derived>& projections) {
  BinaryCodes codes(static_cast<std::size_t>(projections.rows()), static_cast<std::size_t>(projections.cols()));
  for (Eigen::Index q = 0; q < projections.rows(); ++q)
    for (Eigen::Index m = 0; m < projections.cols(); ++m) codes.set(q, m, projections(q, m) >= 0.0);
  return codes;
}

/// X W^T computed one dot product at a time, so a row's projections never depend on which
/// other rows share the matrix. Quantization goes through here.
inline Matrix project_rows(const Matrix& X, const Matrix& W) {
  Matrix out(X.rows(), W.rows());
  for (Eigen::Index q = 0; q < X.rows(); ++q)
    for (Eigen::Index m = 0; m < W.rows(); ++m) out(q, m) = X.row(q).dot(W.row(m));
  return out;
}

/// h(W x) = (1 + sgn(W x)) / 2 for every row of the data, with sgn(0) = +1.
inline BinaryCodes hash_codes(const HashModel& model, const Dataset& data) {
  if (model.W.cols() != data.points.cols()) {
    throw DimensionError("model W is " + shape_str(model.W.rows(), model.W.cols()) + " but data is " +
                         shape_str(data.points.rows(), data.points.cols()));
  }
  return codes_from_projections(project_rows(data.points, model.W));
}

inline std::uint32_t hamming_pair_dist(const BinaryCodes& codes, std::size_t i, std::size_t j) {
  if (i >= codes.rows() || j >= codes.rows()) {
    throw std::out_of_range("pair (" + std::to_string(i) + ", " + std::to_string(j) + ") out of range for " +
                            std::to_string(codes.rows()) + " codes");
  }
  return codes.distance(i, j);
}

/// sigma_alpha(t) = 1 / (1 + exp(-alpha t)), evaluated without overflow.
inline double sigmoid(double t, double alpha) {
  const double z = alpha * t;
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

/// |h(t) - sigma_alpha(t)|.
inline double sigmoid_gap(double t, double alpha) {
  return t >= 0.0 ? 1.0 - sigmoid(t, alpha) : sigmoid(t, alpha);
}

template <class DerivedX>
Vector sigmoid_embed(const Matrix& W, const Eigen::MatrixBase<DerivedX>& x, double alpha) {
  if (W.cols() != x.size()) {
    throw DimensionError("W is " + shape_str(W.rows(), W.cols()) + " but x has length " + std::to_string(x.size()));
  }
  Vector out(W.rows());
  for (Eigen::Index m = 0; m < W.rows(); ++m) out[m] = sigmoid(W.row(m).dot(x), alpha);
  return out;
}

/// ||sigma_alpha(W x_i) - sigma_alpha(W x_j)||_2^2, the relaxed stand-in for a Hamming distance.
template <class DerivedI, class DerivedJ>
double relaxed_pair_dist(const Matrix& W, const Eigen::MatrixBase<DerivedI>& xi, const Eigen::MatrixBase<DerivedJ>& xj,
                         double alpha) {
  if (xi.size() != xj.size()) throw DimensionError("x_i and x_j differ in length");
  return (sigmoid_embed(W, xi, alpha) - sigmoid_embed(W, xj, alpha)).squaredNorm();
}

/// Euclidean distance between two rows of the dataset.
inline double ambient_distance(const Dataset& data, std::size_t i, std::size_t j) {
  const double* a = data.points.data() + i * data.dim();
  const double* b = data.points.data() + j * data.dim();
  double s = 0.0;
  for (std::size_t n = 0; n < data.dim(); ++n) {
    const double d = a[n] - b[n];
    s += d * d;
  }
  return std::sqrt(s);
}

// Pair enumeration. Pairs are ordered (1,0), (2,0), (2,1), (3,0), ...; the pair (i, j) has
// linear index i (i - 1) / 2 + j.

inline std::uint64_t pair_count(std::uint64_t q) { return q < 2 ? 0 : q * (q - 1) / 2; }

inline std::uint64_t pair_linear_index(std::uint64_t i, std::uint64_t j) { return i * (i - 1) / 2 + j; }

inline std::pair<std::uint32_t, std::uint32_t> pair_at(std::uint64_t t) {
  auto i = static_cast<std::uint64_t>((1.0 + std::sqrt(1.0 + 8.0 * static_cast<double>(t))) / 2.0);
  while (i * (i - 1) / 2 > t) --i;
  while ((i + 1) * i / 2 <= t) ++i;
  return {static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(t - i * (i - 1) / 2)};
}

/// Lazy view over the pairs with linear index in [first, last). Constant memory.
class SecantRange {
public:
  class iterator {
  public:
    using iterator_category = std::forward_iterator_tag;
    using value_type = std::pair<std::uint32_t, std::uint32_t>;
    using difference_type = std::ptrdiff_t;
    using pointer = void;
    using reference = value_type;

    iterator() = default;
    explicit iterator(std::uint64_t t) : t_(t), ij_(t == 0 ? value_type{1, 0} : pair_at(t)) {}

    value_type operator*() const { return ij_; }
    iterator& operator++() {
      ++t_;
      if (++ij_.second == ij_.first) {
        ++ij_.first;
        ij_.second = 0;
      }
      return *this;
    }
    iterator operator++(int) {
      iterator old = *this;
      ++*this;
      return old;
    }
    std::uint64_t linear_index() const { return t_; }
    friend bool operator==(const iterator& a, const iterator& b) { return a.t_ == b.t_; }

  private:
    std::uint64_t t_ = 0;
    value_type ij_{1, 0};
  };

  SecantRange(std::uint64_t first, std::uint64_t last) : first_(first), last_(last) {}

  iterator begin() const { return iterator(first_); }
  iterator end() const { return iterator(last_); }
  std::uint64_t size() const { return last_ - first_; }

  /// The k-th of `parts` contiguous, disjoint sub-ranges.
  SecantRange split(std::uint64_t k, std::uint64_t parts) const {
    const std::uint64_t n = size();
    return {first_ + n * k / parts, first_ + n * (k + 1) / parts};
  }

private:
  std::uint64_t first_;
  std::uint64_t last_;
};

inline SecantRange enumerate_secants(std::uint64_t q) {
  if (q < 2) throw DataError("secant enumeration needs Q >= 2, got " + std::to_string(q));
  return {0, pair_count(q)};
}

/// Every pair of the dataset with its true ambient distance; O(Q^2) memory, small Q only.
inline SecantBatch all_secants(const Dataset& data) {
  SecantBatch out;
  out.reserve(pair_count(data.size()));
  for (auto [i, j] : enumerate_secants(data.size())) out.push_back({i, j, ambient_distance(data, i, j)});
  return out;
}

}  // namespace isohash
