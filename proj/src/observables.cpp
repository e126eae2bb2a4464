#include "opmps/observables.hpp"

#include <fmt/format.h>

#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

namespace opmps {

namespace {

constexpr double kStampTol = 1e-12;

ScaledValue checked_denominator(const OperatorMps& rho, const OperatorMps& e) {
  const ScaledValue den = inner_scaled(rho, e);
  const double re = den.mantissa.real();
  if (!(re > 0.0) || !std::isfinite(re) || std::abs(den.mantissa.imag()) > 1e-10 * std::abs(re))
    throw VanishingDenominator(fmt::format("<<rho|e>> = ({}, {}) * exp({}) is not positive; the thermal state is corrupted",
                                           den.mantissa.real(), den.mantissa.imag(), den.log_scale));
  return den;
}

cplx numerator_over(const OperatorMps& rho, const Correlator& corr, const OperatorMps& a, const ScaledValue& den) {
  if (corr.terms.empty()) return ratio(inner_scaled(rho, a), den);
  cplx acc = 0.0;
  for (const auto& t : corr.terms) acc += t.weight * ratio(sandwich_scaled(rho, t.mpo, a), den);
  return acc;
}

// Runs f(i) for i in [0, count) on up to `threads` workers; rethrows the first failure.
template <class F>
void parallel_for(std::size_t count, unsigned threads, F&& f) {
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(count, 1))));
  if (threads == 1) {
    for (std::size_t i = 0; i < count; ++i) f(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex m;
  std::vector<std::thread> pool;
  for (unsigned k = 0; k < threads; ++k)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          f(i);
        } catch (...) {
          std::lock_guard lock(m);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

BasisKind common_basis(const std::vector<Snapshot>& snaps, const char* what) {
  if (snaps.empty()) throw std::invalid_argument(fmt::format("{} snapshot set is empty", what));
  const BasisKind k = snaps.front().state.basis_kind();
  for (const auto& s : snaps)
    if (s.state.basis_kind() != k) throw BasisMismatch(fmt::format("{} snapshots mix bases", what));
  return k;
}

void check_shapes(const std::vector<Snapshot>& a, const std::vector<Snapshot>& b) {
  const auto& x = a.front().state;
  const auto& y = b.front().state;
  if (x.size() != y.size() || x.d() != y.d())
    throw ShapeError(fmt::format("snapshot shapes differ: n={} d={} vs n={} d={}", x.size(), x.d(), y.size(), y.d()));
}

void check_mpo_basis(const Correlator& c, BasisKind k) {
  for (const auto& t : c.terms)
    if (t.mpo.basis_kind != k)
      throw BasisMismatch(fmt::format("correlator '{}' is built in the {} basis, states are in the {} basis", c.label,
                                      to_string(t.mpo.basis_kind), to_string(k)));
}

}  // namespace

OperatorMps in_basis(const OperatorMps& state, BasisKind kind) {
  if (state.basis_kind() == kind) return state;
  return transform_basis(state, change_of_basis(make_basis(state.d(), state.basis_kind()), make_basis(state.d(), kind)));
}

cplx thermal_expectation(const OperatorMps& rho, const OperatorMps& a, const OperatorMps& e) {
  const OperatorMps r = in_basis(rho, a.basis_kind());
  const OperatorMps eb = in_basis(e, a.basis_kind());
  return ratio(inner_scaled(r, a), checked_denominator(r, eb));
}

Correlator plain_correlator(const OperatorSum& b, const LocalBasis& basis, std::string label) {
  return {std::move(label), {{1.0, build_mult_mpo(b, Side::left, basis)}}};
}

Correlator anticommutator(const OperatorSum& b, const LocalBasis& basis, std::string label) {
  return {std::move(label), {{1.0, build_mult_mpo(b, Side::left, basis)}, {1.0, build_mult_mpo(b, Side::right, basis)}}};
}

Correlator expectation_only(std::string label) { return {std::move(label), {}}; }

cplx time_correlation(const OperatorMps& rho, const MultiplicationMpo& b, const OperatorMps& a_t, const OperatorMps& e) {
  if (b.basis_kind != a_t.basis_kind()) throw BasisMismatch("time_correlation: B and a(t) are in different bases");
  const OperatorMps r = in_basis(rho, a_t.basis_kind());
  const OperatorMps eb = in_basis(e, a_t.basis_kind());
  return ratio(sandwich_scaled(r, b, a_t), checked_denominator(r, eb));
}

ExpectationGrid evaluate_grid(const std::vector<Snapshot>& thermal, const std::vector<Snapshot>& heisenberg,
                              const Correlator& corr, const OperatorMps& e, unsigned threads) {
  common_basis(thermal, "thermal");
  const BasisKind k = common_basis(heisenberg, "heisenberg");
  check_shapes(thermal, heisenberg);
  check_mpo_basis(corr, k);

  ExpectationGrid grid;
  grid.label = corr.label;
  for (const auto& s : thermal) grid.beta_axis.push_back(s.stamp);
  for (const auto& s : heisenberg) grid.t_axis.push_back(s.stamp);
  grid.cells.resize(thermal.size() * heisenberg.size());

  const OperatorMps eb = in_basis(e, k);
  std::vector<OperatorMps> rhos(thermal.size());
  std::vector<ScaledValue> dens(thermal.size());
  parallel_for(thermal.size(), threads, [&](std::size_t ib) {
    rhos[ib] = in_basis(thermal[ib].state, k);
    dens[ib] = checked_denominator(rhos[ib], eb);
  });

  const std::size_t nt = heisenberg.size();
  parallel_for(grid.cells.size(), threads, [&](std::size_t i) {
    const std::size_t ib = i / nt, it = i % nt;
    GridCell& c = grid.cells[i];
    c.value = numerator_over(rhos[ib], corr, heisenberg[it].state, dens[ib]);
    c.denom_log = std::log(dens[ib].mantissa.real()) + dens[ib].log_scale;
    c.trunc_thermal = thermal[ib].cumulative_discarded_weight;
    c.trunc_real = heisenberg[it].cumulative_discarded_weight;
  });
  return grid;
}

cplx assemble_green(cplx ww, cplx wpwp, cplx wwp, cplx wpw) {
  const cplx i(0.0, 1.0);
  return -0.25 * i * (ww + wpwp) - 0.25 * (wwp - wpw);
}

namespace {

void check_aligned(const std::vector<Snapshot>& w_t, const std::vector<Snapshot>& wp_t) {
  if (w_t.size() != wp_t.size())
    throw StampMismatch(fmt::format("Majorana series have {} and {} stamps", w_t.size(), wp_t.size()));
  for (std::size_t i = 0; i < w_t.size(); ++i)
    if (std::abs(w_t[i].stamp - wp_t[i].stamp) > kStampTol * std::max(1.0, std::abs(w_t[i].stamp)))
      throw StampMismatch(fmt::format("Majorana stamps differ at index {}: {} vs {}", i, w_t[i].stamp, wp_t[i].stamp));
}

struct GreenTerms {
  cplx ww, wpwp, wwp, wpw;
};

GreenTerms green_terms(const OperatorMps& rho, const ScaledValue& den, const OperatorMps& w, const OperatorMps& wp,
                       const Correlator& w_anti, const Correlator& wp_anti) {
  return {numerator_over(rho, w_anti, w, den), numerator_over(rho, wp_anti, wp, den),
          numerator_over(rho, w_anti, wp, den), numerator_over(rho, wp_anti, w, den)};
}

}  // namespace

GreenFunctionSeries greens_function(const Snapshot& rho, const std::vector<Snapshot>& w_t,
                                    const std::vector<Snapshot>& wp_t, const Correlator& w_anti,
                                    const Correlator& wp_anti, const OperatorMps& e) {
  check_aligned(w_t, wp_t);
  const BasisKind k = common_basis(w_t, "w");
  if (common_basis(wp_t, "w'") != k) throw BasisMismatch("Majorana series are in different bases");
  check_mpo_basis(w_anti, k);
  check_mpo_basis(wp_anti, k);

  const OperatorMps r = in_basis(rho.state, k);
  const ScaledValue den = checked_denominator(r, in_basis(e, k));
  GreenFunctionSeries g;
  g.beta = rho.stamp;
  for (std::size_t i = 0; i < w_t.size(); ++i) {
    const auto t = green_terms(r, den, w_t[i].state, wp_t[i].state, w_anti, wp_anti);
    g.t_axis.push_back(w_t[i].stamp);
    g.ww.push_back(t.ww);
    g.wpwp.push_back(t.wpwp);
    g.wwp.push_back(t.wwp);
    g.wpw.push_back(t.wpw);
    g.values.push_back(assemble_green(t.ww, t.wpwp, t.wwp, t.wpw));
  }
  return g;
}

ExpectationGrid greens_grid(const std::vector<Snapshot>& thermal, const std::vector<Snapshot>& w_t,
                            const std::vector<Snapshot>& wp_t, const Correlator& w_anti, const Correlator& wp_anti,
                            const OperatorMps& e, unsigned threads) {
  check_aligned(w_t, wp_t);
  common_basis(thermal, "thermal");
  const BasisKind k = common_basis(w_t, "w");
  if (common_basis(wp_t, "w'") != k) throw BasisMismatch("Majorana series are in different bases");
  check_shapes(thermal, w_t);
  check_mpo_basis(w_anti, k);
  check_mpo_basis(wp_anti, k);

  ExpectationGrid grid;
  grid.label = "greens";
  for (const auto& s : thermal) grid.beta_axis.push_back(s.stamp);
  for (const auto& s : w_t) grid.t_axis.push_back(s.stamp);
  grid.cells.resize(thermal.size() * w_t.size());

  const OperatorMps eb = in_basis(e, k);
  std::vector<OperatorMps> rhos(thermal.size());
  std::vector<ScaledValue> dens(thermal.size());
  parallel_for(thermal.size(), threads, [&](std::size_t ib) {
    rhos[ib] = in_basis(thermal[ib].state, k);
    dens[ib] = checked_denominator(rhos[ib], eb);
  });

  const std::size_t nt = w_t.size();
  parallel_for(grid.cells.size(), threads, [&](std::size_t i) {
    const std::size_t ib = i / nt, it = i % nt;
    const auto t = green_terms(rhos[ib], dens[ib], w_t[it].state, wp_t[it].state, w_anti, wp_anti);
    GridCell& c = grid.cells[i];
    c.value = assemble_green(t.ww, t.wpwp, t.wwp, t.wpw);
    c.denom_log = std::log(dens[ib].mantissa.real()) + dens[ib].log_scale;
    c.trunc_thermal = thermal[ib].cumulative_discarded_weight;
    c.trunc_real = w_t[it].cumulative_discarded_weight + wp_t[it].cumulative_discarded_weight;
  });
  return grid;
}

}  // namespace opmps
