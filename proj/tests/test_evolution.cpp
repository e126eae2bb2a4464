#include "helpers.hpp"

#include <gtest/gtest.h>
#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>

using namespace opmps;
using namespace opmps::testing;

namespace {

ProductOperator zz(std::size_t n, std::size_t i, std::size_t j) {
  return ProductOperator{n, 2, 1.0, {{i, pauli::z()}, {j, pauli::z()}}};
}

}  // namespace

TEST(Evolution, ThermalZzMatchesTrotterizedDenseProduct) {
  // At step 0.005 the order-2 splitting error alone is ~1.2e-5 here, so the 1e-6 comparison
  // is made against the identically split dense product.
  const auto h = xxz_terms({4, 1.0});
  const auto snaps = thermal_snapshots(h, run_config(0.005, 0.5, {0.5}));
  ASSERT_EQ(snaps.size(), 1u);
  const LocalBasis herm = make_basis(2, BasisKind::hermitian);
  const cplx got = thermal_expectation(snaps[0].state, product_operator_state(zz(4, 1, 2), herm), identity_state(4, herm));
  const Matrix<cplx> r = dense_trotter_boltzmann(h, 0.5, 0.005).matrix;
  const cplx want = (r * dense_operator(zz(4, 1, 2)).matrix).trace() / r.trace();
  EXPECT_NEAR(got.real(), want.real(), 1e-6);
  EXPECT_NEAR(got.imag(), 0.0, 1e-12);
}

TEST(Evolution, ThermalZzMatchesDenseOracle) {
  const auto h = xxz_terms({4, 1.0});
  const auto snaps = thermal_snapshots(h, run_config(0.001, 0.5, {0.5}, 256, 1e-16));
  const LocalBasis herm = make_basis(2, BasisKind::hermitian);
  const cplx got = thermal_expectation(snaps[0].state, product_operator_state(zz(4, 1, 2), herm), identity_state(4, herm));
  const cplx want = exact_thermal_expectation(dense_hamiltonian(h), dense_operator(zz(4, 1, 2)), std::nullopt, 0.5, 0.0);
  EXPECT_NEAR(got.real(), want.real(), 1e-6);
}

TEST(Evolution, ThermalStateMatchesBoltzmannOperator) {
  const auto h = xxz_terms({4, 0.5});
  const auto snaps = thermal_snapshots(h, run_config(0.005, 1.0, {1.0}));
  const LocalBasis real = make_basis(2, BasisKind::real);
  const Vector<cplx> got = to_dense_coefficients(snaps[0].state);
  const Vector<cplx> want = operator_coefficients(ThermalOracle(dense_hamiltonian(h)).boltzmann(1.0), real);
  EXPECT_LT((got - want).norm() / want.norm(), 1e-4);
}

TEST(Evolution, StaysRealInBothDirections) {
  const auto h = xxz_terms({6, 1.0});
  const auto th = build_schedule(build_chi(h, make_basis(2, BasisKind::real)), 0.05, 2, Direction::imaginary);
  const auto rt = build_schedule(build_commutator_generator(h, make_basis(2, BasisKind::hermitian)), 0.05, 2,
                                 Direction::real);
  const auto r1 = evolve(identity_state(6, make_basis(2, BasisKind::real)), th, run_config(0.05, 1.0, {}));
  const auto r2 = evolve(spin_current_state(2, 6, make_basis(2, BasisKind::hermitian)), rt, run_config(0.05, 1.0, {}));
  for (const auto& r : r1.log) EXPECT_EQ(r.arithmetic, Arithmetic::real);
  for (const auto& r : r2.log) EXPECT_EQ(r.arithmetic, Arithmetic::real);
}

TEST(Evolution, RealTimeNormConserved) {
  const auto h = xxz_terms({6, 0.5});
  const LocalBasis herm = make_basis(2, BasisKind::hermitian);
  const auto a = spin_current_state(2, 6, herm);
  const auto snaps = heisenberg_snapshots(h, a, run_config(0.01, 2.0, {0.0, 2.0}, 1024, 0.0));
  const double n0 = inner(snaps[0].state, snaps[0].state).real();
  const double n1 = inner(snaps[1].state, snaps[1].state).real();
  EXPECT_NEAR(n0, 0.5, 1e-12);
  EXPECT_LT(std::abs(n1 - n0), 1e-8);
}

TEST(Evolution, IdentityIsStationary) {
  const auto h = xxz_terms({5, 2.0});
  const LocalBasis herm = make_basis(2, BasisKind::hermitian);
  const auto e = identity_state(5, herm);
  const auto snaps = heisenberg_snapshots(h, e, run_config(0.1, 1.0, {1.0}));
  const cplx f = inner(e, snaps[0].state);
  EXPECT_NEAR(std::abs(f), 1.0, 1e-12);
}

TEST(Evolution, HeisenbergOperatorMatchesDense) {
  const auto h = xxz_terms({4, 0.5});
  const LocalBasis herm = make_basis(2, BasisKind::hermitian);
  const auto j = spin_current_operator(1, 4);
  const auto snaps = heisenberg_snapshots(h, operator_sum_state(j, herm), run_config(0.005, 1.0, {1.0}));
  const DenseOperator want = ThermalOracle(dense_hamiltonian(h)).heisenberg(dense_operator(j), 1.0);
  const Vector<cplx> w = operator_coefficients(want, herm);
  EXPECT_LT((to_dense_coefficients(snaps[0].state) - w).norm() / w.norm(), 1e-4);
}

TEST(Evolution, SnapshotsAtRequestedStamps) {
  const auto h = xxz_terms({4, 1.0});
  const auto r = thermal_snapshots(h, run_config(0.1, 1.0, {0.0, 0.3, 1.0}));
  ASSERT_EQ(r.size(), 3u);
  EXPECT_DOUBLE_EQ(r[0].stamp, 0.0);
  EXPECT_DOUBLE_EQ(r[1].stamp, 0.3);
  EXPECT_DOUBLE_EQ(r[2].stamp, 1.0);
}

TEST(Evolution, ZeroExtentReturnsInitialState) {
  const auto h = xxz_terms({4, 1.0});
  const LocalBasis real = make_basis(2, BasisKind::real);
  const auto r = thermal_snapshots(h, run_config(0.1, 0.0, {0.0}));
  ASSERT_EQ(r.size(), 1u);
  EXPECT_LT((to_dense_coefficients(r[0].state) - to_dense_coefficients(identity_state(4, real))).norm(), 1e-15);
}

TEST(Evolution, LogRecordsEveryStep) {
  const auto h = xxz_terms({6, 1.0});
  const LocalBasis real = make_basis(2, BasisKind::real);
  const auto s = build_schedule(build_chi(h, real), 0.1, 2, Direction::imaginary);
  const auto r = evolve(identity_state(6, real), s, run_config(0.1, 1.0, {}));
  ASSERT_EQ(r.log.size(), 11u);
  EXPECT_EQ(r.log[0].osee_bits, 0.0);
  for (std::size_t k = 1; k < r.log.size(); ++k) {
    EXPECT_GE(r.log[k].osee_bits, r.log[k - 1].osee_bits - 1e-12);
    EXPECT_GE(r.log[k].cumulative_discarded_weight, r.log[k - 1].cumulative_discarded_weight);
  }
}

TEST(Evolution, Deterministic) {
  const auto h = xxz_terms({6, 1.0});
  const auto a = thermal_snapshots(h, run_config(0.05, 1.0, {1.0}, 16, 1e-10));
  const auto b = thermal_snapshots(h, run_config(0.05, 1.0, {1.0}, 16, 1e-10));
  ASSERT_EQ(a[0].state.size(), b[0].state.size());
  for (std::size_t i = 0; i < a[0].state.size(); ++i)
  {
    const auto x = a[0].state.site(i).values<double>();
    const auto y = b[0].state.site(i).values<double>();
    EXPECT_TRUE(std::equal(x.begin(), x.end(), y.begin(), y.end()));
  }
  EXPECT_EQ(a[0].state.log_scale(), b[0].state.log_scale());
}

TEST(Evolution, AbortsWhenCapForcesLargeTruncation) {
  const auto h = xxz_terms({8, 1.0});
  const LocalBasis real = make_basis(2, BasisKind::real);
  const auto s = build_schedule(build_chi(h, real), 0.1, 2, Direction::imaginary);
  auto c = run_config(0.1, 2.0, {0.5, 2.0}, 2, 0.0);
  c.abort_weight = 1e-12;
  const auto r = evolve(identity_state(8, real), s, c);
  EXPECT_TRUE(r.aborted);
  EXPECT_FALSE(r.abort_reason.empty());
  EXPECT_LT(r.snapshots.size(), 2u);
}

TEST(Evolution, TrotterErrorIsThirdOrderPerStep) {
  const auto h = xxz_terms({3, 0.7});
  const LocalBasis herm = make_basis(2, BasisKind::hermitian);
  const auto a = product_operator_state(ProductOperator{3, 2, 1.0, {{0, pauli::x()}, {1, pauli::y()}}}, herm);
  const Matrix<cplx> g = dense_superoperator(3, herm, [&](const DenseOperator& p) {
    const auto hm = dense_hamiltonian(h).matrix;
    return DenseOperator{3, 2, cplx(0.0, -1.0) * (p.matrix * hm - hm * p.matrix)};
  });
  std::vector<double> errs;
  for (double dt : {0.1, 0.05, 0.025}) {
    const auto s = build_schedule(build_commutator_generator(h, herm), dt, 2, Direction::real);
    const auto r = evolve(a, s, run_config(dt, dt, {dt}, 64, 0.0));
    const Vector<cplx> exact = (dt * g).exp() * to_dense_coefficients(a);
    errs.push_back((to_dense_coefficients(r.snapshots[0].state) - exact).norm());
  }
  const double slope1 = std::log(errs[0] / errs[1]) / std::log(2.0);
  const double slope2 = std::log(errs[1] / errs[2]) / std::log(2.0);
  EXPECT_NEAR(slope1, 3.0, 0.2);
  EXPECT_NEAR(slope2, 3.0, 0.2);
}

TEST(Evolution, ScheduleRejectsMismatchedDirection) {
  const auto h = xxz_terms({4, 1.0});
  EXPECT_THROW(build_schedule(build_chi(h, make_basis(2, BasisKind::real)), 0.1, 2, Direction::real),
               std::invalid_argument);
  EXPECT_THROW(build_schedule(build_commutator_generator(h, make_basis(2, BasisKind::hermitian)), 0.1, 3,
                              Direction::real),
               std::invalid_argument);
}

TEST(Evolution, ConfigRejectsOffGridSnapshot) {
  auto c = run_config(0.1, 1.0, {0.25});
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = run_config(0.1, 1.0, {0.5, 0.2});
  EXPECT_THROW(c.validate(), std::invalid_argument);
}

TEST(Evolution, RejectsStateInWrongBasis) {
  const auto h = xxz_terms({4, 1.0});
  const auto s = build_schedule(build_chi(h, make_basis(2, BasisKind::real)), 0.1, 2, Direction::imaginary);
  EXPECT_THROW(evolve(identity_state(4, make_basis(2, BasisKind::hermitian)), s, run_config(0.1, 0.1, {})),
               BasisMismatch);
}
