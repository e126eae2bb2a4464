#pragma once

#include "opmps/ed.hpp"
#include "opmps/evolution.hpp"
#include "opmps/models.hpp"
#include "opmps/mps.hpp"
#include "opmps/observables.hpp"

#include <random>

namespace opmps::testing {

inline EvolutionConfig run_config(double step, double total, std::vector<double> points, std::size_t max_rank = 256,
                                  double weight_tol = 1e-12) {
  EvolutionConfig c;
  c.step = step;
  c.total = total;
  c.snapshot_points = std::move(points);
  c.max_rank = max_rank;
  c.weight_tol = weight_tol;
  return c;
}

inline std::vector<Snapshot> thermal_snapshots(const HamiltonianTerms& h, const EvolutionConfig& c, int order = 2) {
  const LocalBasis basis = make_basis(h.d, BasisKind::real);
  const auto schedule = build_schedule(build_chi(h, basis), c.step, order, Direction::imaginary);
  return evolve(identity_state(h.n, basis), schedule, c).snapshots;
}

inline std::vector<Snapshot> heisenberg_snapshots(const HamiltonianTerms& h, const OperatorMps& a,
                                                  const EvolutionConfig& c, int order = 2) {
  const LocalBasis basis = make_basis(h.d, a.basis_kind());
  const auto schedule = build_schedule(build_commutator_generator(h, basis), c.step, order, Direction::real);
  return evolve(a, schedule, c).snapshots;
}

/// Dense matrix of a superoperator in the product basis, from the oracle coefficient maps:
/// column nu holds the coefficients of f(P_nu).
template <class F>
Matrix<cplx> dense_superoperator(std::size_t n, const LocalBasis& basis, F&& f) {
  const std::size_t q = static_cast<std::size_t>(basis.size());
  std::size_t dim = 1;
  for (std::size_t k = 0; k < n; ++k) dim *= q;
  Matrix<cplx> out(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
  for (std::size_t nu = 0; nu < dim; ++nu) {
    Vector<cplx> e = Vector<cplx>::Zero(static_cast<Eigen::Index>(dim));
    e(static_cast<Eigen::Index>(nu)) = 1.0;
    const DenseOperator p = operator_from_coefficients(e, n, basis);
    out.col(static_cast<Eigen::Index>(nu)) = operator_coefficients(f(p), basis);
  }
  return out;
}

/// A random real operator-space MPS with the given bond dimension.
inline OperatorMps random_state(std::size_t n, int d, BasisKind kind, std::size_t bond, unsigned seed,
                                bool complex = false) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  std::vector<DenseTensor> sites;
  const std::size_t p = static_cast<std::size_t>(d * d);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t dl = i == 0 ? 1 : bond, dr = i + 1 == n ? 1 : bond;
    if (complex) {
      std::vector<cplx> v(dl * p * dr);
      for (auto& x : v) x = cplx(g(rng), g(rng));
      sites.emplace_back(Shape{dl, p, dr}, std::move(v));
    } else {
      std::vector<double> v(dl * p * dr);
      for (auto& x : v) x = g(rng);
      sites.emplace_back(Shape{dl, p, dr}, std::move(v));
    }
  }
  return OperatorMps(d, kind, std::move(sites));
}

}  // namespace opmps::testing

namespace opmps::testing {

/// Dense version of the order-2 split exp(-s/2 H_A) exp(-s H_B) exp(-s/2 H_A), with bonds
/// 0, 2, ... in A and 1, 3, ... in B, raised to beta / s. One-site terms are not supported.
inline DenseOperator dense_trotter_boltzmann(const HamiltonianTerms& h, double beta, double step) {
  const auto dim = dense_hamiltonian(h).matrix.rows();
  Matrix<cplx> ha = Matrix<cplx>::Zero(dim, dim), hb = Matrix<cplx>::Zero(dim, dim);
  for (const auto& t : h.two_site_terms) (t.bond % 2 == 0 ? ha : hb) += embed_bond(t.op, t.bond, h.n, h.d);
  auto expm_h = [](const Matrix<cplx>& m, double s) {
    Eigen::SelfAdjointEigenSolver<Matrix<cplx>> es(m);
    return Matrix<cplx>(es.eigenvectors() * (s * es.eigenvalues().array()).exp().matrix().cast<cplx>().asDiagonal() *
                        es.eigenvectors().adjoint());
  };
  const Matrix<cplx> u = expm_h(ha, -0.5 * step) * expm_h(hb, -step) * expm_h(ha, -0.5 * step);
  Matrix<cplx> r = Matrix<cplx>::Identity(dim, dim);
  for (long k = std::lround(beta / step); k > 0; --k) r = u * r;
  return {h.n, h.d, r};
}

}  // namespace opmps::testing
