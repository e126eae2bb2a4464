#pragma once

// Operator-space matrix product states.
//
// A state represents exp(log_scale) * sum_nu tr[A^{nu_1} ... A^{nu_n}] |P_nu>>, with
// site tensors of shape (left bond, d^2, right bond) and extent-1 boundary bonds.
// The physical index refers to the local basis named by basis_kind.

#include "opmps/basis.hpp"
#include "opmps/superoperator.hpp"
#include "opmps/tensor.hpp"

#include <optional>
#include <vector>

namespace opmps {

class BasisMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A value kept as mantissa * exp(log_scale) so that thermal norms never overflow.
struct ScaledValue {
  cplx mantissa = 0.0;
  double log_scale = 0.0;

  cplx value() const { return mantissa * std::exp(log_scale); }
};

/// Ratio a / b with the log scales reconciled before exponentiation.
cplx ratio(const ScaledValue& a, const ScaledValue& b);

class OperatorMps {
 public:
  OperatorMps() = default;
  OperatorMps(int d, BasisKind basis_kind, std::vector<DenseTensor> sites, double log_scale = 0.0);

  std::size_t size() const { return sites_.size(); }
  int d() const { return d_; }
  int phys_dim() const { return d_ * d_; }
  BasisKind basis_kind() const { return basis_kind_; }
  double log_scale() const { return log_scale_; }
  std::optional<std::size_t> center() const { return center_; }
  Arithmetic arithmetic() const;
  bool is_real() const { return arithmetic() == Arithmetic::real; }

  const DenseTensor& site(std::size_t i) const { return sites_.at(i); }
  const std::vector<DenseTensor>& sites() const { return sites_; }
  /// Bond extents b_0 .. b_n (b_0 = b_n = 1).
  std::vector<std::size_t> bond_dimensions() const;
  std::size_t max_bond_dimension() const;

  // In-place kernels used by the evolution engine. Free functions below return copies.

  /// Moves the orthogonality centre to `site` and folds the centre norm into log_scale.
  void canonicalize_in_place(std::size_t site);
  /// Applies a d^4 x d^4 gate on (bond, bond+1) and re-splits with svd_truncate. The
  /// singular values go to the right site when absorb == Side::right, else the left one.
  /// Returns the discarded weight.
  double apply_gate_in_place(std::size_t bond, const DenseTensor& gate, std::size_t max_rank, double weight_tol,
                             Side absorb = Side::right, bool* rank_capped = nullptr);
  /// Normalized Schmidt values across the cut between sites cut-1 and cut; moves the centre.
  std::vector<double> schmidt_values_in_place(std::size_t cut);
  /// Right-to-left SVD sweep; returns the summed discarded weight.
  double compress_in_place(std::size_t max_rank, double weight_tol);

  // Raw setters for deserialization.
  void set_center(std::optional<std::size_t> c) { center_ = c; }
  void set_log_scale(double s) { log_scale_ = s; }

 private:
  void move_center_right(std::size_t i);
  void move_center_left(std::size_t i);
  void normalize_center();

  int d_ = 2;
  BasisKind basis_kind_ = BasisKind::hermitian;
  std::vector<DenseTensor> sites_;
  std::optional<std::size_t> center_;
  double log_scale_ = 0.0;
};

struct SchmidtSpectrum {
  std::size_t cut = 0;
  std::vector<double> values;  // sum of squares is 1, nonincreasing
};

/// |e>>: the identity operator with unit coefficient.
OperatorMps identity_state(std::size_t n, const LocalBasis& basis);

struct StringOperator {
  std::size_t first = 0;
  std::size_t last = 0;  // inclusive
  Matrix<cplx> op;
};

/// Bond-dimension-1 state of a product operator; an optional string operator fills a
/// contiguous range (multiplied from the left where it overlaps a factor).
OperatorMps product_operator_state(std::size_t n, std::span<const std::pair<std::size_t, Matrix<cplx>>> factors,
                                   const LocalBasis& basis, const std::optional<StringOperator>& string = std::nullopt);
OperatorMps product_operator_state(const ProductOperator& p, const LocalBasis& basis);

/// Sum of product terms, compressed after the additions.
OperatorMps operator_sum_state(const OperatorSum& terms, const LocalBasis& basis, double weight_tol = 1e-26);

/// <<x|y>> = (dim H)^-1 tr(x^dagger y), including the log scales.
cplx inner(const OperatorMps& x, const OperatorMps& y);
ScaledValue inner_scaled(const OperatorMps& x, const OperatorMps& y);

/// <<x|B|y>> for a sum of bond-1 multiplication MPOs.
ScaledValue sandwich_scaled(const OperatorMps& x, const MultiplicationMpo& mpo, const OperatorMps& y);

std::pair<OperatorMps, double> apply_two_site_gate(OperatorMps state, std::size_t bond, const DenseTensor& gate,
                                                   std::size_t max_rank, double weight_tol);

OperatorMps canonicalize(OperatorMps state, std::size_t center);

SchmidtSpectrum schmidt_spectrum(const OperatorMps& state, std::size_t cut);

/// Operator-space entanglement entropy in bits across the cut between sites cut-1 and
/// cut, computed on a normalized copy.
double osee(const OperatorMps& state, std::size_t cut);
inline std::size_t symmetric_cut(std::size_t n) { return n / 2; }

OperatorMps transform_basis(const OperatorMps& state, const BasisTransform& transform);

/// Applies every term and sums the results; bond dimension grows by the term count.
OperatorMps apply_mpo(const OperatorMps& state, const MultiplicationMpo& mpo);

/// Block-diagonal sum.
OperatorMps mps_add(const OperatorMps& x, const OperatorMps& y);

OperatorMps compress(OperatorMps state, std::size_t max_rank, double weight_tol, double* discarded = nullptr);

/// Full coefficient vector (length d^(2n)), first site most significant. Small n only.
Vector<cplx> to_dense_coefficients(const OperatorMps& state);

}  // namespace opmps
