#include "opmps/pipeline.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace opmps {

namespace {

std::string stamp_text(double v) { return fmt::format("{}", v); }

std::string num(double v) { return fmt::format("{:.17g}", v); }

LocalBasis thermal_basis() { return make_basis(2, BasisKind::real); }
LocalBasis heisenberg_basis() { return make_basis(2, BasisKind::hermitian); }

const EvolutionRecord& record_at(const EvolutionLog& log, double stamp, double step) {
  for (const auto& r : log)
    if (std::abs(r.stamp - stamp) <= 1e-9 * step) return r;
  throw std::logic_error(fmt::format("no log record at stamp {}", stamp));
}

// Removes files a previous run of this leg left behind.
void clear_leg_dir(const fs::path& dir, const char* prefix) {
  fs::create_directories(dir);
  for (const auto& entry : fs::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    if ((name.rfind(prefix, 0) == 0 && entry.path().extension() == ".omps") || name == "manifest.json" ||
        name == "log.csv")
      fs::remove(entry.path());
  }
}

Manifest persist_leg(const fs::path& dir, const EvolutionResult& r, double step, const char* prefix, StampKind kind,
                     Manifest m, const char* stamp_column) {
  clear_leg_dir(dir, prefix);
  for (const auto& s : r.snapshots) {
    const std::string file = fmt::format("{}{}.omps", prefix, stamp_text(s.stamp));
    const auto bytes = encode_snapshot(s.state, kind, s.stamp);
    const std::string blob(bytes.begin(), bytes.end());
    write_file_atomic(dir / file, blob);
    const auto& rec = record_at(r.log, s.stamp, step);
    m.snapshots.push_back({s.stamp, file, sha256_hex(blob), s.cumulative_discarded_weight, rec.max_bond, rec.log_norm});
  }
  m.aborted = r.aborted;
  m.abort_reason = r.abort_reason;
  write_file_atomic(dir / "log.csv", log_csv(r.log, stamp_column));
  write_manifest(dir / "manifest.json", m);
  return m;
}

void check_manifest(const Manifest& m, const RunConfig& cfg, const std::string& what) {
  if (m.model_signature != cfg.model_signature)
    throw IncompatibleInputs(fmt::format("{} was produced for model {} but the config describes {}", what,
                                         m.model_signature, cfg.model_signature));
  if (m.n != cfg.n() || m.d != 2)
    throw IncompatibleInputs(fmt::format("{} has n={} d={}, the config needs n={} d=2", what, m.n, m.d, cfg.n()));
  if (m.aborted)
    throw IncompatibleInputs(fmt::format("{} is from an aborted evolution ({})", what, m.abort_reason));
  if (m.snapshots.empty()) throw IncompatibleInputs(fmt::format("{} lists no snapshots", what));
}

const std::vector<Snapshot>& series(const std::vector<std::pair<std::string, std::vector<Snapshot>>>& sets,
                                    const std::string& label) {
  for (const auto& [l, s] : sets)
    if (l == label) return s;
  throw IncompatibleInputs(fmt::format("no heisenberg snapshots for operator '{}'", label));
}

std::vector<std::string> needed_labels(const RunConfig& cfg) {
  std::set<std::string> out;
  for (const auto& o : cfg.observables) {
    if (o.kind == ObservableConfig::Kind::greens) {
      out.insert(o.w);
      out.insert(o.wp);
    } else {
      out.insert(o.a);
    }
  }
  return {out.begin(), out.end()};
}

DenseOperator dense_of(const OperatorSpec& spec, const RunConfig& cfg) {
  return dense_operator(resolve_operator(spec, cfg));
}

cplx dense_anticommutator(const ThermalOracle& o, const DenseOperator& b, const DenseOperator& a, double beta,
                          double t) {
  return o.expectation(a, b, beta, t) + o.expectation_right(a, b, beta, t);
}

struct Deviation {
  double max = 0.0;
  double beta = 0.0;
  double t = 0.0;
  double trunc = 0.0;
};

Deviation compare_with_oracle(const RunConfig& cfg, const ObservableConfig& obs, const ExpectationGrid& g,
                              const ThermalOracle& oracle) {
  Deviation d;
  for (std::size_t ib = 0; ib < g.beta_axis.size(); ++ib)
    for (std::size_t it = 0; it < g.t_axis.size(); ++it) {
      const GridCell& c = g.at(ib, it);
      const double dev = std::abs(c.value - oracle_value(cfg, obs, oracle, g.beta_axis[ib], g.t_axis[it]));
      d.trunc = std::max(d.trunc, c.trunc_thermal + c.trunc_real);
      if (!(dev <= d.max)) {
        d.max = dev;
        d.beta = g.beta_axis[ib];
        d.t = g.t_axis[it];
      }
    }
  return d;
}

std::vector<ExpectationGrid> grids_in_memory(const RunConfig& cfg, unsigned threads) {
  const auto thermal = evolve_thermal(cfg, cfg.thermal);
  if (thermal.aborted) throw EvolutionAbort("thermal leg aborted: " + thermal.abort_reason);
  std::vector<std::pair<std::string, std::vector<Snapshot>>> heis;
  for (const auto& label : needed_labels(cfg)) {
    auto r = evolve_heisenberg(cfg, cfg.heisenberg, cfg.heisenberg_operator(label).spec);
    if (r.aborted) throw EvolutionAbort(fmt::format("heisenberg leg '{}' aborted: {}", label, r.abort_reason));
    heis.emplace_back(label, std::move(r.snapshots));
  }
  std::vector<ExpectationGrid> out;
  for (const auto& o : cfg.observables) out.push_back(evaluate_observable(cfg, o, thermal.snapshots, heis, threads));
  return out;
}

std::vector<std::vector<std::string>> read_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IncompatibleInputs(fmt::format("cannot read '{}'", path.string()));
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    rows.push_back(std::move(cells));
  }
  return rows;
}

std::size_t column(const std::vector<std::string>& header, const std::string& name, const fs::path& path) {
  const auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) throw IncompatibleInputs(fmt::format("'{}' has no column '{}'", path.string(), name));
  return static_cast<std::size_t>(it - header.begin());
}

}  // namespace

fs::path thermal_dir(const fs::path& out) { return out / "thermal"; }
fs::path heisenberg_dir(const fs::path& out, const std::string& label) { return out / "heisenberg" / label; }
fs::path grid_path(const fs::path& out, const std::string& label) {
  return out / "grids" / fmt::format("grid_{}.csv", label);
}

EvolutionConfig evolution_config(const RunConfig& cfg, const LegConfig& leg) {
  EvolutionConfig c;
  c.max_rank = cfg.max_bond;
  c.weight_tol = cfg.weight_tol;
  c.abort_weight = cfg.abort_weight;
  c.step = leg.step;
  c.total = leg.total;
  c.snapshot_points = leg.snapshots;
  c.log_every = leg.log_every;
  return c;
}

EvolutionResult evolve_thermal(const RunConfig& cfg, const LegConfig& leg) {
  const LocalBasis basis = thermal_basis();
  const auto schedule = build_schedule(build_chi(hamiltonian(cfg), basis), leg.step, leg.order, Direction::imaginary);
  return evolve(identity_state(cfg.n(), basis), schedule, evolution_config(cfg, leg));
}

EvolutionResult evolve_heisenberg(const RunConfig& cfg, const LegConfig& leg, const OperatorSpec& op) {
  const LocalBasis basis = heisenberg_basis();
  const auto schedule =
      build_schedule(build_commutator_generator(hamiltonian(cfg), basis), leg.step, leg.order, Direction::real);
  return evolve(operator_state(op, cfg, basis), schedule, evolution_config(cfg, leg));
}

LegResult run_thermal(const RunConfig& cfg, const fs::path& out) {
  LegResult res;
  res.evolution = evolve_thermal(cfg, cfg.thermal);
  Manifest m;
  m.leg = "thermal";
  m.n = cfg.n();
  m.basis = BasisKind::real;
  m.model_signature = cfg.model_signature;
  res.manifest = persist_leg(thermal_dir(out), res.evolution, cfg.thermal.step, "beta_", StampKind::beta, m, "beta");
  if (res.evolution.aborted) throw EvolutionAbort("thermal leg aborted: " + res.evolution.abort_reason);
  return res;
}

std::vector<LegResult> run_heisenberg(const RunConfig& cfg, const fs::path& out) {
  std::vector<LegResult> results;
  std::vector<std::string> aborted;
  for (const auto& op : cfg.operators) {
    LegResult res;
    res.evolution = evolve_heisenberg(cfg, cfg.heisenberg, op.spec);
    Manifest m;
    m.leg = "heisenberg";
    m.label = op.label;
    m.n = cfg.n();
    m.basis = BasisKind::hermitian;
    m.model_signature = cfg.model_signature;
    m.operator_signature = op.spec.signature;
    res.manifest = persist_leg(heisenberg_dir(out, op.label), res.evolution, cfg.heisenberg.step, "t_", StampKind::t, m, "t");
    if (res.evolution.aborted) aborted.push_back(fmt::format("'{}': {}", op.label, res.evolution.abort_reason));
    results.push_back(std::move(res));
  }
  if (!aborted.empty()) {
    std::string msg = "heisenberg leg aborted";
    for (const auto& a : aborted) msg += "; " + a;
    throw EvolutionAbort(msg);
  }
  return results;
}

ExpectationGrid evaluate_observable(const RunConfig& cfg, const ObservableConfig& obs,
                                    const std::vector<Snapshot>& thermal,
                                    const std::vector<std::pair<std::string, std::vector<Snapshot>>>& heisenberg,
                                    unsigned threads) {
  const LocalBasis basis = heisenberg_basis();
  const OperatorMps e = identity_state(cfg.n(), basis);
  ExpectationGrid g;
  switch (obs.kind) {
    case ObservableConfig::Kind::expectation:
      g = evaluate_grid(thermal, series(heisenberg, obs.a), expectation_only(obs.label), e, threads);
      break;
    case ObservableConfig::Kind::plain:
      g = evaluate_grid(thermal, series(heisenberg, obs.a), plain_correlator(resolve_operator(*obs.b, cfg), basis, obs.label),
                        e, threads);
      break;
    case ObservableConfig::Kind::anticommutator:
      g = evaluate_grid(thermal, series(heisenberg, obs.a), anticommutator(resolve_operator(*obs.b, cfg), basis, obs.label),
                        e, threads);
      break;
    case ObservableConfig::Kind::greens: {
      const auto w = anticommutator(resolve_operator(cfg.heisenberg_operator(obs.w).spec, cfg), basis, "w");
      const auto wp = anticommutator(resolve_operator(cfg.heisenberg_operator(obs.wp).spec, cfg), basis, "wp");
      g = greens_grid(thermal, series(heisenberg, obs.w), series(heisenberg, obs.wp), w, wp, e, threads);
      break;
    }
  }
  g.label = obs.label;
  return g;
}

std::vector<ExpectationGrid> run_correlate(const RunConfig& cfg, const fs::path& out, unsigned threads) {
  if (cfg.observables.empty()) throw ConfigError("config: correlate needs at least one observable");
  const fs::path tdir = thermal_dir(out);
  const Manifest tm = read_manifest(tdir / "manifest.json");
  check_manifest(tm, cfg, "thermal manifest");
  if (tm.basis != BasisKind::real || tm.leg != "thermal")
    throw IncompatibleInputs("thermal manifest does not describe a thermal leg in the real basis");
  const auto thermal = load_manifest_snapshots(tdir, tm);

  std::vector<std::pair<std::string, std::vector<Snapshot>>> heis;
  for (const auto& label : needed_labels(cfg)) {
    const fs::path dir = heisenberg_dir(out, label);
    const Manifest hm = read_manifest(dir / "manifest.json");
    check_manifest(hm, cfg, fmt::format("heisenberg manifest '{}'", label));
    if (hm.basis != BasisKind::hermitian || hm.leg != "heisenberg" || hm.label != label)
      throw IncompatibleInputs(fmt::format("heisenberg manifest '{}' does not describe that operator leg", label));
    if (hm.operator_signature != cfg.heisenberg_operator(label).spec.signature)
      throw IncompatibleInputs(fmt::format("heisenberg leg '{}' was run for operator {} but the config now says {}", label,
                                           hm.operator_signature, cfg.heisenberg_operator(label).spec.signature));
    heis.emplace_back(label, load_manifest_snapshots(dir, hm));
  }

  std::vector<ExpectationGrid> grids;
  for (const auto& o : cfg.observables) {
    grids.push_back(evaluate_observable(cfg, o, thermal, heis, threads));
    write_grid_csv(grid_path(out, o.label), grids.back());
  }
  return grids;
}

cplx oracle_value(const RunConfig& cfg, const ObservableConfig& obs, const ThermalOracle& oracle, double beta, double t) {
  switch (obs.kind) {
    case ObservableConfig::Kind::expectation:
      return oracle.expectation(dense_of(cfg.heisenberg_operator(obs.a).spec, cfg), std::nullopt, beta, t);
    case ObservableConfig::Kind::plain:
      return oracle.expectation(dense_of(cfg.heisenberg_operator(obs.a).spec, cfg), dense_of(*obs.b, cfg), beta, t);
    case ObservableConfig::Kind::anticommutator:
      return dense_anticommutator(oracle, dense_of(*obs.b, cfg), dense_of(cfg.heisenberg_operator(obs.a).spec, cfg), beta, t);
    case ObservableConfig::Kind::greens: {
      const DenseOperator w = dense_of(cfg.heisenberg_operator(obs.w).spec, cfg);
      const DenseOperator wp = dense_of(cfg.heisenberg_operator(obs.wp).spec, cfg);
      return assemble_green(dense_anticommutator(oracle, w, w, beta, t), dense_anticommutator(oracle, wp, wp, beta, t),
                            dense_anticommutator(oracle, w, wp, beta, t), dense_anticommutator(oracle, wp, w, beta, t));
    }
  }
  throw std::logic_error("oracle_value: unhandled kind");
}

bool ValidationReport::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const ValidationCheck& c) { return c.passed; });
}

std::string ValidationReport::text() const {
  std::string s;
  for (const auto& c : checks) {
    s += fmt::format("{} {}: max |deviation| {:.3e} at beta={} t={} (tolerance {:.1e})\n", c.passed ? "PASS" : "FAIL",
                     c.observable, c.max_deviation, c.beta_at_max, c.t_at_max, c.tolerance);
    if (!c.diagnosis.empty()) s += "  " + c.diagnosis + "\n";
  }
  s += passed() ? "overall: PASS\n" : "overall: FAIL\n";
  return s;
}

ValidationReport run_validate(const RunConfig& cfg, const fs::path& out, std::optional<double> tolerance_override,
                              unsigned threads) {
  check_oracle_cap(cfg.n());
  if (cfg.observables.empty()) throw ConfigError("config: validate needs at least one observable");
  const double tol = tolerance_override.value_or(cfg.validate_tolerance);
  if (!(tol > 0.0)) throw ConfigError("config: validation tolerance must be positive");

  const ThermalOracle oracle(dense_hamiltonian(hamiltonian(cfg)));
  const auto grids = grids_in_memory(cfg, threads);

  ValidationReport report;
  std::vector<std::size_t> failed;
  for (std::size_t i = 0; i < cfg.observables.size(); ++i) {
    const Deviation d = compare_with_oracle(cfg, cfg.observables[i], grids[i], oracle);
    report.checks.push_back({cfg.observables[i].label, d.max, d.beta, d.t, tol, d.max <= tol, {}});
    if (d.max > tol) {
      failed.push_back(i);
      if (d.trunc > 0.1 * tol)
        report.checks.back().diagnosis = fmt::format("truncation discarded up to {:.2e} of weight; raise max_bond or "
                                                     "lower weight_tol", d.trunc);
    }
  }

  // Step-halving rerun: an order-2 Trotter error drops about fourfold.
  if (!failed.empty()) {
    RunConfig fine = cfg;
    fine.thermal.step /= 2;
    fine.heisenberg.step /= 2;
    fine.thermal.log_every *= 2;
    fine.heisenberg.log_every *= 2;
    const auto fine_grids = grids_in_memory(fine, threads);
    for (std::size_t i : failed) {
      auto& c = report.checks[i];
      const double halved = compare_with_oracle(cfg, cfg.observables[i], fine_grids[i], oracle).max;
      const double ratio = c.max_deviation / std::max(halved, 1e-300);
      const std::string cause =
          ratio > 2.5 ? fmt::format("Trotter step error: halving the step lowers the deviation to {:.3e} (ratio {:.2f}, "
                                    "order-2 convergence gives 4); reduce the step",
                                    halved, ratio)
                      : fmt::format("halving the step gives {:.3e} (ratio {:.2f}); not explained by the Trotter step",
                                    halved, ratio);
      c.diagnosis = c.diagnosis.empty() ? cause : c.diagnosis + "; " + cause;
    }
  }

  write_file_atomic(out / "validate" / "report.txt", report.text());
  return report;
}

std::vector<fs::path> run_report(const RunConfig& cfg, const fs::path& out) {
  std::vector<fs::path> written;
  const fs::path rdir = out / "report";
  auto emit = [&](const fs::path& p, const std::string& body) {
    write_file_atomic(p, body);
    written.push_back(p);
  };

  auto log_columns = [&](const fs::path& log, const char* stamp, const std::string& title) {
    const auto rows = read_csv(log);
    if (rows.empty()) throw IncompatibleInputs(fmt::format("'{}' is empty", log.string()));
    const std::size_t cs = column(rows[0], stamp, log), co = column(rows[0], "osee_bits", log),
                      cb = column(rows[0], "max_bond", log), cw = column(rows[0], "cum_discarded_weight", log);
    std::string body = fmt::format("# {}\n# {} osee_bits max_bond cum_discarded_weight\n", title, stamp);
    for (std::size_t i = 1; i < rows.size(); ++i)
      body += fmt::format("{} {} {} {}\n", rows[i].at(cs), rows[i].at(co), rows[i].at(cb), rows[i].at(cw));
    return body;
  };

  if (fs::exists(thermal_dir(out) / "log.csv"))
    emit(rdir / "osee_beta.dat", log_columns(thermal_dir(out) / "log.csv", "beta", "thermal leg OSEE"));
  for (const auto& op : cfg.operators) {
    const fs::path log = heisenberg_dir(out, op.label) / "log.csv";
    if (fs::exists(log))
      emit(rdir / fmt::format("osee_t_{}.dat", op.label), log_columns(log, "t", fmt::format("heisenberg leg '{}' OSEE", op.label)));
  }

  for (const auto& o : cfg.observables) {
    const fs::path grid = grid_path(out, o.label);
    if (!fs::exists(grid)) continue;
    const auto rows = read_csv(grid);
    if (rows.empty()) continue;
    const std::size_t cb = column(rows[0], "beta", grid), ct = column(rows[0], "t", grid),
                      cr = column(rows[0], "value_re", grid), ci = column(rows[0], "value_im", grid);
    // One block per beta, separated by two blank lines (gnuplot `index`).
    std::string body = fmt::format("# observable '{}'\n# t value_re value_im\n", o.label);
    std::string current;
    for (std::size_t i = 1; i < rows.size(); ++i) {
      if (rows[i].at(cb) != current) {
        if (!current.empty()) body += "\n\n";
        current = rows[i].at(cb);
        body += fmt::format("# beta={}\n", current);
      }
      body += fmt::format("{} {} {}\n", rows[i].at(ct), rows[i].at(cr), rows[i].at(ci));
    }
    emit(rdir / fmt::format("grid_{}.dat", o.label), body);
  }
  if (written.empty()) throw IncompatibleInputs(fmt::format("nothing to report under '{}'", out.string()));
  return written;
}

std::string grid_csv(const ExpectationGrid& g) {
  std::string s = "beta,t,value_re,value_im,denom_log,trunc_weight_thermal,trunc_weight_real\n";
  std::vector<std::size_t> bi(g.beta_axis.size()), ti(g.t_axis.size());
  for (std::size_t i = 0; i < bi.size(); ++i) bi[i] = i;
  for (std::size_t i = 0; i < ti.size(); ++i) ti[i] = i;
  std::stable_sort(bi.begin(), bi.end(), [&](auto a, auto b) { return g.beta_axis[a] < g.beta_axis[b]; });
  std::stable_sort(ti.begin(), ti.end(), [&](auto a, auto b) { return g.t_axis[a] < g.t_axis[b]; });
  for (std::size_t ib : bi)
    for (std::size_t it : ti) {
      const GridCell& c = g.at(ib, it);
      s += fmt::format("{},{},{},{},{},{},{}\n", num(g.beta_axis[ib]), num(g.t_axis[it]), num(c.value.real()),
                       num(c.value.imag()), num(c.denom_log), num(c.trunc_thermal), num(c.trunc_real));
    }
  return s;
}

void write_grid_csv(const fs::path& path, const ExpectationGrid& g) { write_file_atomic(path, grid_csv(g)); }

std::string log_csv(const EvolutionLog& log, const char* stamp_column) {
  std::string s = fmt::format("{},max_bond,cum_discarded_weight,osee_bits,log_norm\n", stamp_column);
  for (const auto& r : log)
    s += fmt::format("{},{},{},{},{}\n", num(r.stamp), r.max_bond, num(r.cumulative_discarded_weight), num(r.osee_bits),
                     num(r.log_norm));
  return s;
}

}  // namespace opmps
