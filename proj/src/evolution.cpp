#include "opmps/evolution.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <map>

namespace opmps {

const char* to_string(Direction d) { return d == Direction::imaginary ? "imaginary" : "real"; }

TrotterSchedule build_schedule(const SuperMap& generator, double step, int order, Direction direction) {
  if (order != 1 && order != 2) throw std::invalid_argument(fmt::format("build_schedule: order must be 1 or 2, got {}", order));
  if (!(step >= 0.0) || !std::isfinite(step)) throw std::invalid_argument("build_schedule: step must be finite and >= 0");
  if (direction == Direction::imaginary && generator.kind != SuperMapKind::left_multiplication)
    throw std::invalid_argument("build_schedule: imaginary-time evolution needs the left-multiplication map chi");
  if (direction == Direction::real && generator.kind != SuperMapKind::commutator_generator)
    throw std::invalid_argument("build_schedule: real-time evolution needs the commutator generator");
  const auto p2 = static_cast<std::size_t>(generator.phys_dim() * generator.phys_dim());
  for (const auto& b : generator.two_site_blocks)
    if (b.block.rank() != 2 || b.block.extent(0) != p2 || b.block.extent(1) != p2)
      throw std::invalid_argument(
          fmt::format("build_schedule: block on bond {} is not a nearest-neighbour {}x{} block", b.bond, p2, p2));

  TrotterSchedule s;
  s.order = order;
  s.step = step;
  s.direction = direction;
  s.basis_kind = generator.basis.kind;
  s.n = generator.n;
  s.d = generator.d;
  for (std::size_t b = 0; b + 1 < generator.n; ++b) (b % 2 == 0 ? s.group_a : s.group_b).push_back(b);

  const double sign = direction == Direction::imaginary ? -1.0 : 1.0;
  for (const auto& g : bond_generators(generator)) {
    s.full_gates.push_back(matrix_exp(g, sign * step));
    if (order == 2) s.half_gates.push_back(matrix_exp(g, sign * 0.5 * step));
  }
  return s;
}

std::vector<std::pair<std::size_t, const DenseTensor*>> step_sequence(const TrotterSchedule& schedule) {
  std::vector<std::pair<std::size_t, const DenseTensor*>> seq;
  auto push = [&](const std::vector<std::size_t>& group, const std::vector<DenseTensor>& gates) {
    for (auto b : group) seq.emplace_back(b, &gates[b]);
  };
  if (schedule.order == 2) {
    push(schedule.group_a, schedule.half_gates);
    push(schedule.group_b, schedule.full_gates);
    push(schedule.group_a, schedule.half_gates);
  } else {
    push(schedule.group_a, schedule.full_gates);
    push(schedule.group_b, schedule.full_gates);
  }
  return seq;
}

namespace {

long long step_index(double point, double step) {
  const long long k = std::llround(point / step);
  if (std::abs(point - static_cast<double>(k) * step) > 1e-12 * std::max(1.0, std::abs(point)))
    throw std::invalid_argument(fmt::format("evolution: point {} is not a multiple of the step {}", point, step));
  return k;
}

}  // namespace

void EvolutionConfig::validate() const {
  if (max_rank == 0) throw std::invalid_argument("evolution: max_rank must be positive");
  if (log_every == 0) throw std::invalid_argument("evolution: log_every must be positive");
  if (!(weight_tol >= 0.0)) throw std::invalid_argument("evolution: weight_tol must be nonnegative");
  if (!(step > 0.0) || !std::isfinite(step)) throw std::invalid_argument("evolution: step must be positive");
  if (!(total >= 0.0) || !std::isfinite(total)) throw std::invalid_argument("evolution: total extent must be >= 0");
  step_index(total, step);
  if (!std::is_sorted(snapshot_points.begin(), snapshot_points.end()))
    throw std::invalid_argument("evolution: snapshot points must be sorted");
  for (double p : snapshot_points) {
    if (p < 0.0 || p > total + 1e-12 * std::max(1.0, total))
      throw std::invalid_argument(fmt::format("evolution: snapshot point {} outside [0, {}]", p, total));
    step_index(p, step);
  }
}

EvolutionResult evolve(const OperatorMps& initial, const TrotterSchedule& schedule, const EvolutionConfig& config) {
  config.validate();
  if (std::abs(config.step - schedule.step) > 1e-15 * std::max(1.0, schedule.step))
    throw std::invalid_argument("evolve: config step does not match the schedule step");
  if (initial.size() != schedule.n || initial.d() != schedule.d)
    throw ShapeError("evolve: initial state shape does not match the schedule");
  if (initial.basis_kind() != schedule.basis_kind)
    throw BasisMismatch(fmt::format("evolve: initial state is in the {} basis, generator in the {} basis",
                                    to_string(initial.basis_kind()), to_string(schedule.basis_kind)));
  const std::size_t n = initial.size();
  const std::size_t cut = config.osee_cut == 0 ? symmetric_cut(n) : config.osee_cut;
  if (cut == 0 || cut >= n) throw std::invalid_argument("evolve: osee cut outside the chain");

  const long long steps = step_index(config.total, config.step);
  std::map<long long, double> wanted;
  for (double p : config.snapshot_points) wanted.emplace(step_index(p, config.step), p);

  EvolutionResult result;
  OperatorMps state = initial;
  state.canonicalize_in_place(0);
  double cumulative = 0.0;

  auto record = [&](long long k) {
    EvolutionRecord r;
    r.stamp = static_cast<double>(k) * config.step;
    r.max_bond = state.max_bond_dimension();
    r.cumulative_discarded_weight = cumulative;
    r.arithmetic = state.arithmetic();
    if (n > 1) {
      double s = 0.0;
      for (double l : state.schmidt_values_in_place(cut)) {
        const double w = l * l;
        if (w > 0.0) s -= w * std::log2(w);
      }
      r.osee_bits = std::max(0.0, s);
    }
    r.log_norm = state.log_scale();
    result.log.push_back(r);
    if (auto it = wanted.find(k); it != wanted.end()) result.snapshots.push_back({it->second, state, cumulative});
  };

  record(0);
  using Sweep = std::vector<std::pair<std::size_t, const DenseTensor*>>;
  auto make_sweep = [&](const std::vector<std::size_t>& group, const std::vector<DenseTensor>& gates) {
    Sweep sw;
    for (auto b : group) sw.emplace_back(b, &gates[b]);
    return sw;
  };
  const bool order2 = schedule.order == 2;
  const Sweep a_half = order2 ? make_sweep(schedule.group_a, schedule.half_gates) : Sweep{};
  const Sweep a_full = make_sweep(schedule.group_a, schedule.full_gates);
  const Sweep b_full = make_sweep(schedule.group_b, schedule.full_gates);

  // Bonds inside a group commute, so each sweep runs in whichever direction starts next
  // to the current canonical centre.
  auto run_sweep = [&](const Sweep& sweep, long long k) {
    const bool ascending = state.center().value_or(0) <= n / 2;
    for (std::size_t g = 0; g < sweep.size(); ++g) {
      const auto& [bond, gate] = ascending ? sweep[g] : sweep[sweep.size() - 1 - g];
      bool capped = false;
      const double w = state.apply_gate_in_place(bond, *gate, config.max_rank, config.weight_tol,
                                                 ascending ? Side::right : Side::left, &capped);
      cumulative += w;
      if (capped && w > config.abort_weight) {
        result.aborted = true;
        result.abort_reason = fmt::format(
            "bond dimension cap {} reached at step {} (bond {}) with discarded weight {:.3e} above the abort "
            "threshold {:.3e}",
            config.max_rank, k, bond, w, config.abort_weight);
        return false;
      }
    }
    return true;
  };

  // With order 2, the trailing A half-step of an unlogged step is merged into the
  // leading one of the next step.
  bool pending_half = false;
  for (long long k = 1; k <= steps; ++k) {
    const bool logged = k == steps || k % static_cast<long long>(config.log_every) == 0 || wanted.count(k) > 0;
    if (order2) {
      if (!run_sweep(pending_half ? a_full : a_half, k)) return result;
      if (!run_sweep(b_full, k)) return result;
      pending_half = !logged;
      if (logged && !run_sweep(a_half, k)) return result;
    } else {
      if (!run_sweep(a_full, k) || !run_sweep(b_full, k)) return result;
    }
    if (logged) record(k);
  }
  return result;
}

}  // namespace opmps
