#pragma once

// Dense reference calculations for small chains (n <= kOracleSiteCap).
//
// Site 0 is the most significant tensor factor, matching the operator-space MPS.

#include "opmps/basis.hpp"
#include "opmps/superoperator.hpp"

#include <optional>

namespace opmps {

inline constexpr std::size_t kOracleSiteCap = 8;

class OracleCapExceeded : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct DenseOperator {
  std::size_t n = 0;
  int d = 2;
  Matrix<cplx> matrix;

  std::size_t dim() const { return static_cast<std::size_t>(matrix.rows()); }
};

void check_oracle_cap(std::size_t n);

/// op acting on `site` of an n-site chain.
Matrix<cplx> embed(const Matrix<cplx>& op, std::size_t site, std::size_t n, int d);
/// A d^2 x d^2 op on (bond, bond + 1).
Matrix<cplx> embed_bond(const Matrix<cplx>& op, std::size_t bond, std::size_t n, int d);

DenseOperator dense_hamiltonian(const HamiltonianTerms& h);
DenseOperator dense_operator(const ProductOperator& p);
DenseOperator dense_operator(const OperatorSum& s);

/// Full eigendecomposition of H, reused across beta and t.
class ThermalOracle {
 public:
  explicit ThermalOracle(const DenseOperator& h);

  const Vector<double>& eigenvalues() const { return evals_; }
  double residual() const { return residual_; }

  /// tr(exp(-beta H) b a(t)) / tr(exp(-beta H)), with a(t) = exp(itH) a exp(-itH); b = 1 when absent.
  cplx expectation(const DenseOperator& a, const std::optional<DenseOperator>& b, double beta, double t) const;
  /// tr(exp(-beta H) a(t) b) / tr(exp(-beta H)).
  cplx expectation_right(const DenseOperator& a, const DenseOperator& b, double beta, double t) const;
  /// exp(itH) a exp(-itH).
  DenseOperator heisenberg(const DenseOperator& a, double t) const;
  /// exp(-beta H), unnormalized.
  DenseOperator boltzmann(double beta) const;

 private:
  cplx correlate(const DenseOperator& a, const DenseOperator* b, bool b_left, double beta, double t) const;

  std::size_t n_;
  int d_;
  Matrix<cplx> v_;
  Vector<double> evals_;
  double residual_ = 0.0;
};

cplx exact_thermal_expectation(const DenseOperator& h, const DenseOperator& a, const std::optional<DenseOperator>& b,
                               double beta, double t);

/// OSEE in bits of x across the cut between sites bond-1 and bond.
double exact_osee(const DenseOperator& x, std::size_t bond);

/// c_nu = <<P_nu|x>> in `basis`, length d^(2n), site 0 most significant.
Vector<cplx> operator_coefficients(const DenseOperator& x, const LocalBasis& basis);
DenseOperator operator_from_coefficients(const Vector<cplx>& c, std::size_t n, const LocalBasis& basis);

/// -i [exp(-i h t)]_{site, site} for a single-particle hopping matrix h.
cplx free_fermion_green(const Matrix<double>& h, std::size_t site, double t);

/// G(t) = -i <{f^dagger, f(t)}>_beta computed directly from dense fermion operators.
cplx exact_green(const ThermalOracle& oracle, const DenseOperator& f, double beta, double t);

}  // namespace opmps
