#pragma once

// Dense real/complex tensors and the small set of linear-algebra kernels the
// operator-space MPS code is built on.
//
// Linearization is row-major: for shape (e0, e1, ..., ek) the element at
// (i0, ..., ik) lives at offset ((i0 * e1 + i1) * e2 + ...) * ek + ik.
// Snapshot files rely on this order.

#include <Eigen/Dense>

#include <complex>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace opmps {

using cplx = std::complex<double>;
using Shape = std::vector<std::size_t>;

template <class T>
using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
template <class T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using Vector = Eigen::Matrix<T, Eigen::Dynamic, 1>;

enum class Arithmetic : std::uint8_t { real = 0, complex = 1 };

inline const char* to_string(Arithmetic a) { return a == Arithmetic::real ? "real" : "complex"; }

template <class T>
inline constexpr Arithmetic arithmetic_of = std::is_same_v<T, double> ? Arithmetic::real : Arithmetic::complex;

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class SvdError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NumericalOverflow : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

class DenseTensor {
 public:
  DenseTensor() : DenseTensor(Shape{}, Arithmetic::real) {}
  DenseTensor(Shape shape, Arithmetic arithmetic);
  DenseTensor(Shape shape, std::vector<double> values);
  DenseTensor(Shape shape, std::vector<cplx> values);

  static DenseTensor identity(std::size_t n, Arithmetic arithmetic = Arithmetic::real);

  // Column-major Eigen matrices are copied into the row-major layout.
  static DenseTensor from_matrix(const Matrix<double>& m);
  static DenseTensor from_matrix(const Matrix<cplx>& m);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t extent(std::size_t axis) const;
  std::size_t size() const;
  Arithmetic arithmetic() const { return data_.index() == 0 ? Arithmetic::real : Arithmetic::complex; }
  bool is_real() const { return data_.index() == 0; }

  template <class T>
  std::span<const T> values() const {
    const auto* v = std::get_if<std::vector<T>>(&data_);
    if (v == nullptr) throw std::logic_error("DenseTensor: requested storage variant does not match");
    return {v->data(), v->size()};
  }
  template <class T>
  std::span<T> values() {
    auto* v = std::get_if<std::vector<T>>(&data_);
    if (v == nullptr) throw std::logic_error("DenseTensor: requested storage variant does not match");
    return {v->data(), v->size()};
  }

  cplx at(std::span<const std::size_t> index) const;
  cplx at(std::initializer_list<std::size_t> index) const {
    return at(std::span<const std::size_t>(index.begin(), index.size()));
  }

  // Promotes real storage; complex tensors are returned unchanged.
  DenseTensor as_complex() const;
  template <class T>
  DenseTensor as() const {
    if constexpr (std::is_same_v<T, double>) {
      if (!is_real()) throw std::logic_error("DenseTensor: cannot demote complex storage implicitly");
      return *this;
    } else {
      return as_complex();
    }
  }
  // Drops the imaginary part when it is below tol everywhere; otherwise returns a copy.
  DenseTensor demoted_if_real(double tol) const;

  DenseTensor reshaped(Shape shape) const&;
  DenseTensor reshaped(Shape shape) &&;
  DenseTensor permuted(std::span<const std::size_t> order) const;
  DenseTensor conj() const;

  double max_abs_imag() const;
  double frobenius_norm() const;

  template <class T>
  Matrix<T> matrix() const;
  Matrix<cplx> complex_matrix() const;

 private:
  Shape shape_;
  std::variant<std::vector<double>, std::vector<cplx>> data_;
};

using AxisPair = std::pair<std::size_t, std::size_t>;

// Sums over the paired axes; the result keeps the unpaired axes of a then b, in order.
DenseTensor contract(const DenseTensor& a, const DenseTensor& b, std::span<const AxisPair> paired_axes);
inline DenseTensor contract(const DenseTensor& a, const DenseTensor& b, std::initializer_list<AxisPair> pairs) {
  return contract(a, b, std::span<const AxisPair>(pairs.begin(), pairs.size()));
}

/// Rank-2 product a * b.
DenseTensor matmul(const DenseTensor& a, const DenseTensor& b);

struct TruncatedFactorization {
  DenseTensor left_factor;             // rows x k, orthonormal columns
  std::vector<double> singular_values; // k values, nonincreasing
  DenseTensor right_factor;            // k x cols, orthonormal rows
  double discarded_weight = 0.0;       // sum of discarded s^2 over sum of all s^2
};

// Singular values within this relative distance are kept or dropped together.
inline constexpr double kDegeneracyTol = 1e-14;

/// Kept rank for a nonincreasing spectrum: the smallest k whose discarded weight is
/// within weight_tol, capped by max_rank, then widened to cover a degenerate multiplet
/// straddling the cut. The result can exceed max_rank by the multiplet width.
std::size_t truncation_rank(std::span<const double> singular_values, std::size_t max_rank, double weight_tol,
                            double* discarded_weight = nullptr);

TruncatedFactorization svd_truncate(const DenseTensor& m, std::size_t max_rank, double weight_tol);

template <class T>
struct MatrixFactorization {
  Matrix<T> left;
  Vector<double> singular_values;
  Matrix<T> right;
  double discarded_weight = 0.0;
  double total_weight = 0.0;
};

// Eigen-level variant used by the MPS kernels to avoid round trips through DenseTensor.
template <class T>
MatrixFactorization<T> svd_truncate_matrix(const Matrix<T>& m, std::size_t max_rank, double weight_tol);

/// Singular values only, nonincreasing.
template <class T>
Vector<double> singular_values(const Matrix<T>& m);

enum class Side { left, right };

struct OrthogonalFactorization {
  DenseTensor factor;     // orthonormal columns (left) or rows (right)
  DenseTensor remainder;  // factor * remainder (left) or remainder * factor (right) reconstructs m
};

OrthogonalFactorization orthogonal_factor(const DenseTensor& m, Side side);

// m = Q R with diag(R) real and nonnegative. Q is rows x k, R is k x cols, k = min(rows, cols).
template <class T>
std::pair<Matrix<T>, Matrix<T>> thin_qr(const Matrix<T>& m);

/// exp(scale * g). Symmetric and antisymmetric generators (real or complex hermitian /
/// antihermitian) go through an eigendecomposition, everything else through Padé
/// scaling-and-squaring.
DenseTensor matrix_exp(const DenseTensor& g, double scale);
DenseTensor matrix_exp(const DenseTensor& g, cplx scale);

}  // namespace opmps
