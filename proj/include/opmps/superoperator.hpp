#pragma once

// Maps over operator space built from a nearest-neighbour Hamiltonian.
//
//   chi      : a -> H a                    (thermal evolution, real basis)
//   G = -iĤ  : a -> -i (a H - H a)         (Heisenberg evolution, hermitian basis)
//   B (left) : a -> b a,  B (right): a -> a b
//
// Two-site operators act on the joint space with site j as the more significant
// index: row/col = s_j * d + s_{j+1}. Two-site superoperator blocks use the same
// convention on the d^2 x d^2 coefficient pair.

#include "opmps/basis.hpp"
#include "opmps/tensor.hpp"

#include <optional>
#include <utility>
#include <vector>

namespace opmps {

struct OneSiteTerm {
  std::size_t site = 0;
  Matrix<cplx> op;  // d x d
};

struct TwoSiteTerm {
  std::size_t bond = 0;  // acts on sites (bond, bond + 1)
  Matrix<cplx> op;       // d^2 x d^2
};

struct HamiltonianTerms {
  std::size_t n = 0;
  int d = 2;
  std::vector<OneSiteTerm> one_site_terms;
  std::vector<TwoSiteTerm> two_site_terms;

  /// Throws std::invalid_argument on out-of-range sites or wrongly sized operators.
  void validate() const;
};

class RealityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SiteBlock {
  std::size_t site = 0;
  DenseTensor block;  // d^2 x d^2
};

struct BondBlock {
  std::size_t bond = 0;
  DenseTensor block;  // d^4 x d^4
};

enum class SuperMapKind { left_multiplication, commutator_generator };

struct SuperMap {
  std::size_t n = 0;
  int d = 2;
  SuperMapKind kind = SuperMapKind::left_multiplication;
  LocalBasis basis;
  Arithmetic arithmetic = Arithmetic::real;
  std::vector<SiteBlock> one_site_blocks;
  std::vector<BondBlock> two_site_blocks;
  // Number of local product terms in the map. For the commutator generator each
  // Hamiltonian term contributes two (a H_k and H_k a); they are stored summed
  // because only the sum is real.
  std::size_t local_term_count = 0;

  int phys_dim() const { return d * d; }
};

/// chi: [chi_1]_{jl} = d^-1 tr(p_j^dagger H_1 p_l), and the d^-2 two-site analogue.
SuperMap build_chi(const HamiltonianTerms& h, const LocalBasis& basis);

/// G = -iĤ with Ĥ|x>> = |xH - Hx>>; the Heisenberg evolution is |a(t)>> = exp(tG)|a>>.
SuperMap build_commutator_generator(const HamiltonianTerms& h, const LocalBasis& basis);

/// One d^4 x d^4 generator per bond with one-site blocks folded in: half to each adjacent
/// bond for interior sites, the full weight for the two boundary sites.
std::vector<DenseTensor> bond_generators(const SuperMap& map);

// A product operator coefficient * (x) factors, identity on unlisted sites.
struct ProductOperator {
  std::size_t n = 0;
  int d = 2;
  cplx coefficient = 1.0;
  std::vector<std::pair<std::size_t, Matrix<cplx>>> factors;

  void validate() const;
  /// The d x d factor at a site (identity when unlisted; repeated sites multiply left to right).
  Matrix<cplx> factor_at(std::size_t site) const;
};

using OperatorSum = std::vector<ProductOperator>;

ProductOperator adjoint(const ProductOperator& p);
OperatorSum adjoint(const OperatorSum& s);

// A sum of bond-dimension-1 MPOs, one per product term: x -> sum_k c_k (b_k x) or (x b_k).
struct MultiplicationMpo {
  struct Term {
    cplx coefficient = 1.0;
    std::vector<DenseTensor> blocks;  // per site, d^2 x d^2
  };
  std::size_t n = 0;
  int d = 2;
  Side side = Side::left;
  BasisKind basis_kind = BasisKind::hermitian;
  std::vector<Term> terms;

  /// Bond dimension of the equivalent block-diagonal MPO.
  std::size_t bond_dimension() const { return terms.size(); }
};

MultiplicationMpo build_mult_mpo(const ProductOperator& b, Side side, const LocalBasis& basis);
MultiplicationMpo build_mult_mpo(const OperatorSum& b, Side side, const LocalBasis& basis);

/// [M]_{mu nu} = d^-1 tr(p_mu^dagger b p_nu) (left) or d^-1 tr(p_mu^dagger p_nu b) (right).
Matrix<cplx> local_multiplication_block(const Matrix<cplx>& b, Side side, const LocalBasis& basis);

}  // namespace opmps
