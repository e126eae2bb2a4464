#pragma once

// Trotterized gate evolution of operator-space MPS.
//
// Thermal:    |rho(beta)>> = exp(-beta chi)|e>>,  gates exp(-step * chi_bond)
// Heisenberg: |a(t)>>      = exp(t G)|a>>,        gates exp(step * G_bond), orthogonal
//
// Bonds are split into two groups, A = {0, 2, 4, ...} and B = {1, 3, ...}. Order 2 applies
// A(step/2) B(step) A(step/2); order 1 applies A(step) B(step).

#include "opmps/mps.hpp"
#include "opmps/superoperator.hpp"

#include <limits>
#include <string>
#include <vector>

namespace opmps {

enum class Direction { imaginary, real };

const char* to_string(Direction d);

struct TrotterSchedule {
  int order = 2;
  double step = 0.01;
  Direction direction = Direction::real;
  BasisKind basis_kind = BasisKind::hermitian;
  std::size_t n = 0;
  int d = 2;
  std::vector<std::size_t> group_a;  // bonds 0, 2, 4, ...
  std::vector<std::size_t> group_b;  // bonds 1, 3, 5, ...
  std::vector<DenseTensor> full_gates;  // per bond
  std::vector<DenseTensor> half_gates;  // per bond; empty for order 1
};

TrotterSchedule build_schedule(const SuperMap& generator, double step, int order, Direction direction);

/// The sequence of (bond, gate) applications making up one step, in application order.
std::vector<std::pair<std::size_t, const DenseTensor*>> step_sequence(const TrotterSchedule& schedule);

class EvolutionAbort : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct EvolutionConfig {
  std::size_t max_rank = 256;
  double weight_tol = 1e-12;
  double step = 0.01;
  double total = 0.0;                 // beta_max or t_max
  std::vector<double> snapshot_points;  // sorted, multiples of step
  std::size_t osee_cut = 0;           // 0 selects the symmetric cut n/2
  // Log every k-th step (snapshot points and the final step are always logged). Between
  // logged steps of an order-2 schedule the trailing and leading A half-steps are merged.
  std::size_t log_every = 1;
  // Abort when a single truncation forced by max_rank discards more than this weight.
  double abort_weight = std::numeric_limits<double>::infinity();

  /// Throws std::invalid_argument when the config is inconsistent.
  void validate() const;
};

struct EvolutionRecord {
  double stamp = 0.0;
  std::size_t max_bond = 1;
  double cumulative_discarded_weight = 0.0;
  double osee_bits = 0.0;
  double log_norm = 0.0;
  Arithmetic arithmetic = Arithmetic::real;
};

using EvolutionLog = std::vector<EvolutionRecord>;

struct Snapshot {
  double stamp = 0.0;
  OperatorMps state;
  double cumulative_discarded_weight = 0.0;
};

struct EvolutionResult {
  std::vector<Snapshot> snapshots;
  EvolutionLog log;
  bool aborted = false;
  std::string abort_reason;
};

/// Runs the schedule until config.total, storing a full copy of the state at every
/// snapshot point. Deterministic for a given input. When the abort condition triggers,
/// the snapshots taken so far are returned with `aborted` set.
EvolutionResult evolve(const OperatorMps& initial, const TrotterSchedule& schedule, const EvolutionConfig& config);

}  // namespace opmps
