#include "helpers.hpp"

#include <gtest/gtest.h>

using namespace opmps;
using namespace opmps::testing;

namespace {

const cplx I(0.0, 1.0);
const LocalBasis kHerm = make_basis(2, BasisKind::hermitian);

ProductOperator site_op(std::size_t n, std::size_t site, const Matrix<cplx>& op) { return {n, 2, 1.0, {{site, op}}}; }

Snapshot at(double stamp, OperatorMps s) { return {stamp, std::move(s), 0.0}; }

struct SiamSetup {
  SiamChain model;
  HamiltonianTerms h;
  std::vector<Snapshot> thermal, w_t, wp_t;
  Correlator w_anti, wp_anti;

  SiamSetup(SiamChain m, std::vector<double> betas, std::vector<double> ts, double step)
      : model(std::move(m)), h(siam_terms(model)) {
    const MajoranaPair pair{model.up_impurity()};
    const auto [w, wp] = majorana_states(pair, model.n, kHerm);
    thermal = thermal_snapshots(h, run_config(step, betas.back(), betas));
    const auto cfg = run_config(step, ts.back(), ts);
    w_t = heisenberg_snapshots(h, w, cfg);
    wp_t = heisenberg_snapshots(h, wp, cfg);
    w_anti = anticommutator({pair.w(model.n)}, kHerm, "w");
    wp_anti = anticommutator({pair.w_prime(model.n)}, kHerm, "wp");
  }
};

}  // namespace

TEST(ThermalExpectation, InfiniteTemperatureValues) {
  const std::size_t n = 4;
  const OperatorMps e = identity_state(n, kHerm);
  const OperatorMps rho = in_basis(identity_state(n, make_basis(2, BasisKind::real)), BasisKind::hermitian);
  EXPECT_NEAR(std::abs(thermal_expectation(rho, spin_current_state(1, n, kHerm), e)), 0.0, 1e-15);
  EXPECT_NEAR(std::abs(thermal_expectation(rho, e, e) - 1.0), 0.0, 1e-15);

  const auto sz = product_operator_state(site_op(n, 2, pauli::z()), kHerm);
  const auto mpo = build_mult_mpo(site_op(n, 2, pauli::z()), Side::left, kHerm);
  EXPECT_NEAR(std::abs(time_correlation(rho, mpo, sz, e) - 1.0), 0.0, 1e-15);

  const auto j0 = spin_current_state(0, n, kHerm);
  const auto jmpo = build_mult_mpo(spin_current_operator(0, n), Side::left, kHerm);
  EXPECT_NEAR(std::abs(time_correlation(rho, jmpo, j0, e) - 0.5), 0.0, 1e-15);
}

TEST(ThermalExpectation, BasisOfThermalStateIsIrrelevant) {
  const auto h = xxz_terms({4, 0.7});
  const auto th = thermal_snapshots(h, run_config(0.01, 0.5, {0.5}));
  const OperatorMps e = identity_state(4, kHerm);
  const auto a = product_operator_state({4, 2, 1.0, {{1, pauli::z()}, {2, pauli::z()}}}, kHerm);
  const cplx from_real = thermal_expectation(th[0].state, a, e);
  const cplx from_herm = thermal_expectation(in_basis(th[0].state, BasisKind::hermitian), a, e);
  EXPECT_NEAR(std::abs(from_real - from_herm), 0.0, 1e-14);
}

TEST(Correlation, CurrentCurrentMatchesOracle) {
  const std::size_t n = 6;
  const auto h = xxz_terms({n, 0.5});
  const double beta = 0.25, t = 1.0, step = 0.005;
  const auto th = thermal_snapshots(h, run_config(step, beta, {beta}));
  const auto ht = heisenberg_snapshots(h, spin_current_state(2, n, kHerm), run_config(step, t, {t}));
  const auto mpo = build_mult_mpo(spin_current_operator(2, n), Side::left, kHerm);
  const cplx got = time_correlation(th[0].state, mpo, ht[0].state, identity_state(n, kHerm));

  const auto hd = dense_hamiltonian(h);
  const auto j = dense_operator(spin_current_operator(2, n));
  const cplx want = exact_thermal_expectation(hd, j, j, beta, t);
  EXPECT_NEAR(std::abs(got - want), 0.0, 1e-5) << got << " vs " << want;
}

TEST(Correlation, GridMatchesOracleAndSingleCells) {
  const std::size_t n = 6;
  const auto h = xxz_terms({n, 1.0});
  const std::vector<double> betas = {0.0, 0.5, 1.0}, ts = {0.0, 0.5, 1.0};
  // At step 0.005 the Trotter error alone is ~1.8e-5; weight_tol 1e-12 adds up to ~4e-5 over 400 steps.
  const double step = 0.0025;
  const auto th = thermal_snapshots(h, run_config(step, 1.0, betas, 256, 1e-16));
  const auto b = site_op(n, 2, pauli::x());
  const auto a = site_op(n, 3, pauli::x());
  const auto ht = heisenberg_snapshots(h, product_operator_state(a, kHerm), run_config(step, 1.0, ts, 256, 1e-16));
  const OperatorMps e = identity_state(n, kHerm);
  const Correlator corr = plain_correlator({b}, kHerm, "xx");
  const ExpectationGrid g = evaluate_grid(th, ht, corr, e);
  ASSERT_EQ(g.beta_axis, betas);
  ASSERT_EQ(g.t_axis, ts);
  EXPECT_EQ(g.label, "xx");

  const ThermalOracle oracle(dense_hamiltonian(h));
  const auto ad = dense_operator(a), bd = dense_operator(b);
  for (std::size_t ib = 0; ib < 3; ++ib)
    for (std::size_t it = 0; it < 3; ++it) {
      const cplx want = oracle.expectation(ad, bd, betas[ib], ts[it]);
      EXPECT_NEAR(std::abs(g.at(ib, it).value - want), 0.0, 1e-5) << betas[ib] << "," << ts[it];
      const ExpectationGrid single = evaluate_grid({th[ib]}, {ht[it]}, corr, e);
      EXPECT_EQ(single.at(0, 0).value, time_correlation(th[ib].state, corr.terms[0].mpo, ht[it].state, e));
    }
  EXPECT_NEAR(g.at(0, 0).denom_log, 0.0, 1e-14);
}

TEST(Correlation, RightProductIsConjugateForHermitianOperators) {
  // For Hermitian a, b: <a(t) b> = conj(<b a(t)>).
  const std::size_t n = 4;
  const auto h = xxz_terms({n, 0.6});
  const auto th = thermal_snapshots(h, run_config(0.01, 0.8, {0.8}, 256, 0.0));
  const auto ht = heisenberg_snapshots(h, spin_current_state(1, n, kHerm), run_config(0.01, 0.7, {0.7}, 256, 0.0));
  const OperatorMps e = identity_state(n, kHerm);
  const auto b = spin_current_operator(2, n);
  const cplx left = time_correlation(th[0].state, build_mult_mpo(b, Side::left, kHerm), ht[0].state, e);
  const cplx right = time_correlation(th[0].state, build_mult_mpo(b, Side::right, kHerm), ht[0].state, e);
  EXPECT_GT(std::abs(left.imag()), 1e-3);
  EXPECT_NEAR(std::abs(right - std::conj(left)), 0.0, 1e-12);
}

TEST(Correlation, HamiltonianIsStationary) {
  const std::size_t n = 6;
  const auto h = xxz_terms({n, 0.8});
  const auto th = thermal_snapshots(h, run_config(0.01, 0.5, {0.5}));
  const OperatorMps hs = operator_sum_state(hamiltonian_operator_sum(h, kHerm), kHerm);
  const auto ht = heisenberg_snapshots(h, hs, run_config(0.01, 2.0, {0.0, 1.0, 2.0}));
  const auto b = build_mult_mpo(ProductOperator{n, 2, 1.0, {{1, pauli::z()}, {2, pauli::z()}}}, Side::left, kHerm);
  const Correlator corr{"zzH", {{1.0, b}}};
  const ExpectationGrid g = evaluate_grid(th, ht, corr, identity_state(n, kHerm));
  EXPECT_GT(std::abs(g.at(0, 0).value), 1e-3);
  // Energy is conserved exactly; Trotter leaves an O(step^2) residue.
  for (std::size_t it = 1; it < 3; ++it) EXPECT_NEAR(std::abs(g.at(0, it).value - g.at(0, 0).value), 0.0, 1e-3);
}

TEST(Correlation, ThreadCountDoesNotChangeResult) {
  const std::size_t n = 6;
  const auto h = xxz_terms({n, 1.0});
  const auto th = thermal_snapshots(h, run_config(0.02, 1.0, {0.0, 0.5, 1.0}));
  const auto ht = heisenberg_snapshots(h, spin_current_state(2, n, kHerm), run_config(0.02, 1.0, {0.0, 0.5, 1.0}));
  const Correlator corr = anticommutator(total_current_operator(n), kHerm, "J");
  const OperatorMps e = identity_state(n, kHerm);
  const ExpectationGrid one = evaluate_grid(th, ht, corr, e, 1);
  const ExpectationGrid many = evaluate_grid(th, ht, corr, e, 4);
  ASSERT_EQ(one.cells.size(), many.cells.size());
  for (std::size_t i = 0; i < one.cells.size(); ++i) {
    EXPECT_EQ(one.cells[i].value, many.cells[i].value);
    EXPECT_EQ(one.cells[i].denom_log, many.cells[i].denom_log);
  }
}

TEST(Correlation, SmallBetaFollowsLinearSeries) {
  const std::size_t n = 4;
  const auto h = xxz_terms({n, 0.5});
  const double beta = 0.01, t = 0.5;
  const auto th = thermal_snapshots(h, run_config(0.005, beta, {beta}));
  const auto ht = heisenberg_snapshots(h, product_operator_state(site_op(n, 1, pauli::z()), kHerm),
                                       run_config(0.005, t, {t}));
  const auto b = site_op(n, 2, pauli::z());
  const cplx got = time_correlation(th[0].state, build_mult_mpo(b, Side::left, kHerm), ht[0].state,
                                    identity_state(n, kHerm));
  const auto hd = dense_hamiltonian(h);
  const Matrix<cplx> ba = dense_operator(b).matrix * ThermalOracle(hd).heisenberg(dense_operator(site_op(n, 1, pauli::z())), t).matrix;
  const double dim = 16.0;
  const cplx series = ba.trace() / dim - beta * ((hd.matrix * ba).trace() / dim - hd.matrix.trace() / dim * ba.trace() / dim);
  EXPECT_NEAR(std::abs(got - series), 0.0, 2e-4);
}

TEST(Correlation, VanishingDenominatorIsReported) {
  const std::size_t n = 3;
  const OperatorMps e = identity_state(n, kHerm);
  const OperatorMps negative = product_operator_state({n, 2, -1.0, {}}, kHerm);
  EXPECT_THROW(thermal_expectation(negative, e, e), VanishingDenominator);
  const OperatorMps traceless = product_operator_state(site_op(n, 0, pauli::z()), kHerm);
  EXPECT_THROW(thermal_expectation(traceless, e, e), VanishingDenominator);
}

TEST(Correlation, BasisMismatchIsRejected) {
  const std::size_t n = 3;
  const LocalBasis real = make_basis(2, BasisKind::real);
  const auto mpo = build_mult_mpo(site_op(n, 0, pauli::z()), Side::left, real);
  const OperatorMps a = product_operator_state(site_op(n, 0, pauli::z()), kHerm);
  EXPECT_THROW(time_correlation(identity_state(n, kHerm), mpo, a, identity_state(n, kHerm)), BasisMismatch);
  const std::vector<Snapshot> th = {at(0.0, identity_state(n, real))};
  EXPECT_THROW(evaluate_grid(th, {at(0.0, a)}, Correlator{"z", {{1.0, mpo}}}, identity_state(n, kHerm)), BasisMismatch);
  EXPECT_THROW(evaluate_grid(th, {at(0.0, identity_state(4, kHerm))}, expectation_only("e"), identity_state(n, kHerm)),
               ShapeError);
}

TEST(GreensFunction, ZeroTimeIsMinusI) {
  const SiamSetup s(SiamChain::uniform(6, 0.5, 1.0, -0.5), {0.0, 0.5, 2.0}, {0.0}, 0.01);
  const OperatorMps e = identity_state(6, kHerm);
  for (const auto& rho : s.thermal) {
    const auto g = greens_function(rho, s.w_t, s.wp_t, s.w_anti, s.wp_anti, e);
    ASSERT_EQ(g.values.size(), 1u);
    EXPECT_NEAR(g.values[0].imag(), -1.0, 1e-12);
    EXPECT_NEAR(g.values[0].real(), 0.0, 1e-12);
    EXPECT_NEAR(std::abs(g.ww[0] - 2.0), 0.0, 1e-12);
    EXPECT_NEAR(std::abs(g.wwp[0]), 0.0, 1e-12);
  }
}

TEST(GreensFunction, FreeImpurityMatchesSingleParticleFormula) {
  const std::vector<double> ts = {0.0, 1.0, 2.0, 3.0, 4.0};
  const SiamSetup s(SiamChain::uniform(6, 0.5, 0.0, -0.3), {0.5, 2.0}, ts, 0.01);
  Matrix<double> hs = Matrix<double>::Zero(3, 3);
  hs(0, 1) = hs(1, 0) = hs(1, 2) = hs(2, 1) = 0.5;
  hs(2, 2) = -0.3;
  const ExpectationGrid g = greens_grid(s.thermal, s.w_t, s.wp_t, s.w_anti, s.wp_anti, identity_state(6, kHerm));
  for (std::size_t ib = 0; ib < 2; ++ib)
    for (std::size_t it = 0; it < ts.size(); ++it)
      EXPECT_NEAR(std::abs(g.at(ib, it).value - free_fermion_green(hs, 2, ts[it])), 0.0, 1e-5)
          << "beta=" << g.beta_axis[ib] << " t=" << ts[it];
}

TEST(GreensFunction, InteractingMatchesOracle) {
  const std::vector<double> ts = {0.0, 1.5, 3.0};
  const SiamSetup s(SiamChain::uniform(6, 0.5, 1.0, -0.5), {1.0}, ts, 0.01);
  const ThermalOracle oracle(dense_hamiltonian(s.h));
  const DenseOperator f = dense_operator(jordan_wigner_annihilator(s.model.up_impurity(), 6));
  const auto g = greens_function(s.thermal[0], s.w_t, s.wp_t, s.w_anti, s.wp_anti, identity_state(6, kHerm));
  for (std::size_t it = 0; it < ts.size(); ++it)
    EXPECT_NEAR(std::abs(g.values[it] - exact_green(oracle, f, 1.0, ts[it])), 0.0, 1e-4) << ts[it];
}

TEST(GreensFunction, AssemblyOfIdealMajoranas) {
  // Uncorrelated Majoranas at t = 0: <{w,w}> = <{w',w'}> = 2, cross terms 0.
  EXPECT_EQ(assemble_green(2.0, 2.0, 0.0, 0.0), cplx(0.0, -1.0));
  EXPECT_EQ(assemble_green(0.0, 0.0, 1.0, -1.0), cplx(-0.5, 0.0));
}

TEST(GreensFunction, StampMismatch) {
  const SiamSetup s(SiamChain::uniform(4, 0.5, 1.0, -0.5), {0.0}, {0.0, 0.1}, 0.05);
  auto shifted = s.wp_t;
  shifted[1].stamp = 0.15;
  const OperatorMps e = identity_state(4, kHerm);
  EXPECT_THROW(greens_function(s.thermal[0], s.w_t, shifted, s.w_anti, s.wp_anti, e), StampMismatch);
  shifted.pop_back();
  EXPECT_THROW(greens_grid(s.thermal, s.w_t, shifted, s.w_anti, s.wp_anti, e), StampMismatch);
}
