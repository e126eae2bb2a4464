#pragma once

// Thermal expectation values and two-time correlators as operator-space inner products:
//
//   <a>_beta        = <<rho|a>> / <<rho|e>>
//   <b a(t)>_beta   = <<rho|B|a(t)>> / <<rho|e>>,   B = left multiplication by b
//   <a(t) b>_beta   = same with right multiplication
//
// rho is evolved in the real basis and transformed to the basis of the Heisenberg
// state before contracting.

#include "opmps/evolution.hpp"
#include "opmps/mps.hpp"
#include "opmps/superoperator.hpp"

#include <string>
#include <vector>

namespace opmps {

class VanishingDenominator : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class StampMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Brings a thermal state into `kind`; a no-op when it already is.
OperatorMps in_basis(const OperatorMps& state, BasisKind kind);

cplx thermal_expectation(const OperatorMps& rho, const OperatorMps& a, const OperatorMps& e);

/// One term of a correlator: coefficient * <<rho|B|a>>. An empty MPO list means B = 1.
struct CorrelatorTerm {
  cplx weight = 1.0;
  MultiplicationMpo mpo;
};

struct Correlator {
  std::string label;
  std::vector<CorrelatorTerm> terms;  // empty: plain <a(t)>
};

/// <b a(t)> (plain) or <b a(t)> + <a(t) b> (anticommutator).
Correlator plain_correlator(const OperatorSum& b, const LocalBasis& basis, std::string label);
Correlator anticommutator(const OperatorSum& b, const LocalBasis& basis, std::string label);
Correlator expectation_only(std::string label);

cplx time_correlation(const OperatorMps& rho, const MultiplicationMpo& b, const OperatorMps& a_t, const OperatorMps& e);

struct GridCell {
  cplx value = 0.0;
  double denom_log = 0.0;  // log <<rho|e>>, including log scales
  double trunc_thermal = 0.0;
  double trunc_real = 0.0;
};

struct ExpectationGrid {
  std::string label;
  std::vector<double> beta_axis;
  std::vector<double> t_axis;
  std::vector<GridCell> cells;  // beta-major

  const GridCell& at(std::size_t ib, std::size_t it) const { return cells.at(ib * t_axis.size() + it); }
  GridCell& at(std::size_t ib, std::size_t it) { return cells.at(ib * t_axis.size() + it); }
};

/// Every (beta, t) cell of `corr` evaluated against the given snapshots. The denominator
/// is computed once per beta. `threads` > 1 evaluates cells concurrently; the result
/// does not depend on it.
ExpectationGrid evaluate_grid(const std::vector<Snapshot>& thermal, const std::vector<Snapshot>& heisenberg,
                              const Correlator& corr, const OperatorMps& e, unsigned threads = 1);

struct GreenFunctionSeries {
  double beta = 0.0;
  std::vector<double> t_axis;
  std::vector<cplx> values;
  // <{x, y(t)}> for (x, y) = (w, w), (w', w'), (w, w'), (w', w)
  std::vector<cplx> ww, wpwp, wwp, wpw;
};

/// G(t) = -(i/4)[<{w,w(t)}> + <{w',w'(t)}>] - (1/4)[<{w,w'(t)}> - <{w',w(t)}>]
cplx assemble_green(cplx ww, cplx wpwp, cplx wwp, cplx wpw);

/// Green's function at one temperature from the two Majorana snapshot series.
GreenFunctionSeries greens_function(const Snapshot& rho, const std::vector<Snapshot>& w_t,
                                    const std::vector<Snapshot>& wp_t, const Correlator& w_anti,
                                    const Correlator& wp_anti, const OperatorMps& e);

/// The Green's function over a beta grid, as an ExpectationGrid.
ExpectationGrid greens_grid(const std::vector<Snapshot>& thermal, const std::vector<Snapshot>& w_t,
                            const std::vector<Snapshot>& wp_t, const Correlator& w_anti, const Correlator& wp_anti,
                            const OperatorMps& e, unsigned threads = 1);

}  // namespace opmps
