#include "opmps/superoperator.hpp"

#include <unsupported/Eigen/KroneckerProduct>
#include <fmt/format.h>

#include <cmath>

namespace opmps {

void HamiltonianTerms::validate() const {
  if (n < 2) throw std::invalid_argument(fmt::format("HamiltonianTerms: need n >= 2 sites, got {}", n));
  for (const auto& t : one_site_terms) {
    if (t.site >= n) throw std::invalid_argument(fmt::format("HamiltonianTerms: site {} outside chain of {}", t.site, n));
    if (t.op.rows() != d || t.op.cols() != d)
      throw std::invalid_argument(fmt::format("HamiltonianTerms: one-site term at {} is not {}x{}", t.site, d, d));
  }
  for (const auto& t : two_site_terms) {
    if (t.bond + 1 >= n)
      throw std::invalid_argument(fmt::format("HamiltonianTerms: bond {} outside chain of {}", t.bond, n));
    if (t.op.rows() != d * d || t.op.cols() != d * d)
      throw std::invalid_argument(fmt::format("HamiltonianTerms: two-site term at bond {} is not {}x{}", t.bond,
                                              d * d, d * d));
  }
}

namespace {

std::vector<Matrix<cplx>> pair_basis(const LocalBasis& basis) {
  std::vector<Matrix<cplx>> out;
  out.reserve(static_cast<std::size_t>(basis.size() * basis.size()));
  for (const auto& a : basis.elements)
    for (const auto& b : basis.elements) out.push_back(Eigen::kroneckerProduct(a, b).eval());
  return out;
}

// [M]_{jl} = dim^-1 tr(P_j^dagger f(P_l)).
template <class F>
Matrix<cplx> superblock(const std::vector<Matrix<cplx>>& ops, F&& f) {
  const auto m = static_cast<Eigen::Index>(ops.size());
  const double dim = static_cast<double>(ops.front().rows());
  Matrix<cplx> out(m, m);
  for (Eigen::Index l = 0; l < m; ++l) {
    const Matrix<cplx> image = f(ops[static_cast<std::size_t>(l)]);
    for (Eigen::Index j = 0; j < m; ++j)
      out(j, l) = (ops[static_cast<std::size_t>(j)].conjugate().cwiseProduct(image)).sum() / dim;
  }
  return out;
}

DenseTensor as_real_block(const Matrix<cplx>& m, const char* what, std::size_t where) {
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  Eigen::Index r = 0, c = 0;
  const double worst = m.imag().cwiseAbs().maxCoeff(&r, &c);
  if (worst > 1e-13 * scale)
    throw RealityError(fmt::format("{} (index {}): entry ({}, {}) has imaginary part {:.3e}; basis or operator is "
                                   "not real-representable",
                                   what, where, r, c, m(r, c).imag()));
  return DenseTensor::from_matrix(Matrix<double>(m.real()));
}

void check_antisymmetric(const DenseTensor& g, const char* what, std::size_t where) {
  const Matrix<double> m = g.matrix<double>();
  const double residue = (m + m.transpose()).cwiseAbs().maxCoeff();
  if (residue > 1e-12 * std::max(1.0, m.cwiseAbs().maxCoeff()))
    throw RealityError(fmt::format("{} (index {}): generator block is not antisymmetric (residue {:.3e}); "
                                   "Hamiltonian or basis is not hermitian",
                                   what, where, residue));
}

void check_basis(const HamiltonianTerms& h, const LocalBasis& basis, BasisKind required, const char* who) {
  h.validate();
  if (basis.kind != required)
    throw std::invalid_argument(fmt::format("{}: requires a {} basis, got {}", who, to_string(required),
                                            to_string(basis.kind)));
  if (basis.d != h.d)
    throw std::invalid_argument(fmt::format("{}: basis d={} does not match Hamiltonian d={}", who, basis.d, h.d));
}

}  // namespace

SuperMap build_chi(const HamiltonianTerms& h, const LocalBasis& basis) {
  check_basis(h, basis, BasisKind::real, "build_chi");
  SuperMap map{h.n, h.d, SuperMapKind::left_multiplication, basis, Arithmetic::real, {}, {}, 0};
  for (const auto& t : h.one_site_terms) {
    auto m = superblock(basis.elements, [&](const Matrix<cplx>& p) { return Matrix<cplx>(t.op * p); });
    map.one_site_blocks.push_back({t.site, as_real_block(m, "build_chi one-site term", t.site)});
  }
  const auto pairs = pair_basis(basis);
  for (const auto& t : h.two_site_terms) {
    auto m = superblock(pairs, [&](const Matrix<cplx>& p) { return Matrix<cplx>(t.op * p); });
    map.two_site_blocks.push_back({t.bond, as_real_block(m, "build_chi two-site term", t.bond)});
  }
  map.local_term_count = map.one_site_blocks.size() + map.two_site_blocks.size();
  return map;
}

SuperMap build_commutator_generator(const HamiltonianTerms& h, const LocalBasis& basis) {
  check_basis(h, basis, BasisKind::hermitian, "build_commutator_generator");
  SuperMap map{h.n, h.d, SuperMapKind::commutator_generator, basis, Arithmetic::real, {}, {}, 0};
  const cplx minus_i(0, -1);
  for (const auto& t : h.one_site_terms) {
    auto m = superblock(basis.elements, [&](const Matrix<cplx>& p) { return Matrix<cplx>(minus_i * (p * t.op - t.op * p)); });
    auto block = as_real_block(m, "build_commutator_generator one-site term", t.site);
    check_antisymmetric(block, "build_commutator_generator one-site term", t.site);
    map.one_site_blocks.push_back({t.site, std::move(block)});
  }
  const auto pairs = pair_basis(basis);
  for (const auto& t : h.two_site_terms) {
    auto m = superblock(pairs, [&](const Matrix<cplx>& p) { return Matrix<cplx>(minus_i * (p * t.op - t.op * p)); });
    auto block = as_real_block(m, "build_commutator_generator two-site term", t.bond);
    check_antisymmetric(block, "build_commutator_generator two-site term", t.bond);
    map.two_site_blocks.push_back({t.bond, std::move(block)});
  }
  map.local_term_count = 2 * (map.one_site_blocks.size() + map.two_site_blocks.size());
  return map;
}

std::vector<DenseTensor> bond_generators(const SuperMap& map) {
  if (map.n < 2) throw std::invalid_argument("bond_generators: need at least two sites");
  const auto p = static_cast<Eigen::Index>(map.phys_dim());
  const bool real = map.arithmetic == Arithmetic::real;
  std::vector<Matrix<cplx>> gens(map.n - 1, Matrix<cplx>::Zero(p * p, p * p));
  for (const auto& b : map.two_site_blocks) gens[b.bond] += b.block.complex_matrix();
  const Matrix<cplx> id = Matrix<cplx>::Identity(p, p);
  for (const auto& s : map.one_site_blocks) {
    const Matrix<cplx> block = s.block.complex_matrix();
    const Matrix<cplx> on_left = Eigen::kroneckerProduct(block, id);   // site is the first of the pair
    const Matrix<cplx> on_right = Eigen::kroneckerProduct(id, block);  // site is the second of the pair
    const bool has_left_bond = s.site > 0;
    const bool has_right_bond = s.site + 1 < map.n;
    const double w = (has_left_bond && has_right_bond) ? 0.5 : 1.0;
    if (has_right_bond) gens[s.site] += w * on_left;
    if (has_left_bond) gens[s.site - 1] += w * on_right;
  }
  std::vector<DenseTensor> out;
  out.reserve(gens.size());
  for (const auto& g : gens)
    out.push_back(real ? DenseTensor::from_matrix(Matrix<double>(g.real())) : DenseTensor::from_matrix(g));
  return out;
}

void ProductOperator::validate() const {
  for (const auto& [site, op] : factors) {
    if (site >= n) throw std::invalid_argument(fmt::format("ProductOperator: factor on site {} outside chain of {}", site, n));
    if (op.rows() != d || op.cols() != d)
      throw std::invalid_argument(fmt::format("ProductOperator: factor on site {} is not {}x{}", site, d, d));
  }
}

Matrix<cplx> ProductOperator::factor_at(std::size_t site) const {
  Matrix<cplx> m = Matrix<cplx>::Identity(d, d);
  for (const auto& [s, op] : factors)
    if (s == site) m = (m * op).eval();
  return m;
}

ProductOperator adjoint(const ProductOperator& p) {
  ProductOperator out{p.n, p.d, std::conj(p.coefficient), {}};
  // Factors on distinct sites commute, so only same-site order needs reversing.
  for (auto it = p.factors.rbegin(); it != p.factors.rend(); ++it) out.factors.emplace_back(it->first, it->second.adjoint());
  return out;
}

OperatorSum adjoint(const OperatorSum& s) {
  OperatorSum out;
  out.reserve(s.size());
  for (const auto& p : s) out.push_back(adjoint(p));
  return out;
}

Matrix<cplx> local_multiplication_block(const Matrix<cplx>& b, Side side, const LocalBasis& basis) {
  if (b.rows() != basis.d || b.cols() != basis.d) throw ShapeError("local_multiplication_block: operator size mismatch");
  return superblock(basis.elements, [&](const Matrix<cplx>& p) {
    return Matrix<cplx>(side == Side::left ? Matrix<cplx>(b * p) : Matrix<cplx>(p * b));
  });
}

namespace {

DenseTensor compact_block(const Matrix<cplx>& m) {
  if (m.imag().cwiseAbs().maxCoeff() == 0.0) return DenseTensor::from_matrix(Matrix<double>(m.real()));
  return DenseTensor::from_matrix(m);
}

}  // namespace

MultiplicationMpo build_mult_mpo(const ProductOperator& b, Side side, const LocalBasis& basis) {
  return build_mult_mpo(OperatorSum{b}, side, basis);
}

MultiplicationMpo build_mult_mpo(const OperatorSum& b, Side side, const LocalBasis& basis) {
  if (b.empty()) throw std::invalid_argument("build_mult_mpo: empty operator sum");
  MultiplicationMpo mpo{b.front().n, basis.d, side, basis.kind, {}};
  for (const auto& term : b) {
    term.validate();
    if (term.n != mpo.n || term.d != basis.d) throw ShapeError("build_mult_mpo: inconsistent chain length or d");
    MultiplicationMpo::Term t{term.coefficient, {}};
    t.blocks.reserve(mpo.n);
    for (std::size_t s = 0; s < mpo.n; ++s)
      t.blocks.push_back(compact_block(local_multiplication_block(term.factor_at(s), side, basis)));
    mpo.terms.push_back(std::move(t));
  }
  return mpo;
}

}  // namespace opmps
