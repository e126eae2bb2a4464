#pragma once

// Spin-1/2 chain models and the observables evaluated on them.
//
// XXZ:  H = sum_l sx_l sx_{l+1} + sy_l sy_{l+1} + delta sz_l sz_{l+1}   (open chain)
//
// Mapped single-impurity Anderson chain on n sites: the up-spin impurity sits at
// n/2 - 1 with its bath to the left, the down-spin impurity at n/2 with its bath to
// the right. The junction bond (n/2 - 1, n/2) carries only U n n; hopping elsewhere is
// tau_j (s+_j s-_{j+1} + s-_j s+_{j+1}), and n_j = s-_j s+_j.

#include "opmps/basis.hpp"
#include "opmps/mps.hpp"
#include "opmps/superoperator.hpp"

#include <vector>

namespace opmps {

struct XxzModel {
  std::size_t n = 2;
  double delta = 1.0;
};

HamiltonianTerms xxz_terms(const XxzModel& model);

struct SiamChain {
  std::size_t n = 8;
  std::vector<double> taus;  // n - 1 hoppings; taus[junction_bond()] must be 0
  double u = 1.0;
  double eps_f = -0.5;

  /// Uniform bath hopping `tau` with the junction hopping set to zero.
  static SiamChain uniform(std::size_t n, double tau, double u, double eps_f);

  std::size_t up_impurity() const { return n / 2 - 1; }
  std::size_t down_impurity() const { return n / 2; }
  std::size_t junction_bond() const { return n / 2 - 1; }

  void validate() const;
};

HamiltonianTerms siam_terms(const SiamChain& model);

/// n_j = s-_j s+_j.
Matrix<cplx> occupation();

/// j_m = i (s+_m s-_{m+1} - s-_m s+_{m+1}) = (sx_m sy_{m+1} - sy_m sx_{m+1}) / 2.
OperatorSum spin_current_operator(std::size_t m, std::size_t n);
/// sum_m j_m over all bonds.
OperatorSum total_current_operator(std::size_t n);

OperatorMps spin_current_state(std::size_t m, std::size_t n, const LocalBasis& basis);
OperatorMps total_current_state(std::size_t n, const LocalBasis& basis);

/// Jordan-Wigner annihilator f = (prod_{j<site} sz_j) s+_site.
ProductOperator jordan_wigner_annihilator(std::size_t site, std::size_t n);

struct MajoranaPair {
  std::size_t site = 0;
  /// w = f + f^dagger = (prod_{j<site} sz_j) sx_site
  ProductOperator w(std::size_t n) const;
  /// w' = i (f - f^dagger) = -(prod_{j<site} sz_j) sy_site
  ProductOperator w_prime(std::size_t n) const;
};

std::pair<OperatorMps, OperatorMps> majorana_states(const MajoranaPair& pair, std::size_t n, const LocalBasis& basis);

/// The Hamiltonian as a sum of basis products (two-site terms expanded in `basis`).
OperatorSum hamiltonian_operator_sum(const HamiltonianTerms& h, const LocalBasis& basis);

}  // namespace opmps
