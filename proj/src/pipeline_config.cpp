#include "opmps/pipeline.hpp"

#include <fmt/format.h>
#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

namespace opmps {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& where, const std::string& what) {
  throw ConfigError(fmt::format("config: {}: {}", where, what));
}

void allow_keys(const json& j, const std::string& where, std::initializer_list<const char*> keys) {
  if (!j.is_object()) fail(where, "expected an object");
  for (const auto& [k, v] : j.items()) {
    if (std::none_of(keys.begin(), keys.end(), [&](const char* a) { return k == a; }))
      fail(where, fmt::format("unknown key '{}'", k));
  }
}

const json& need(const json& j, const std::string& where, const char* key) {
  if (!j.contains(key)) fail(where, fmt::format("missing key '{}'", key));
  return j.at(key);
}

double number(const json& j, const std::string& where) {
  if (!j.is_number()) fail(where, "expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) fail(where, "expected a finite number");
  return v;
}

std::size_t count(const json& j, const std::string& where) {
  if (!j.is_number_integer() || j.get<long long>() < 0) fail(where, "expected a nonnegative integer");
  return j.get<std::size_t>();
}

std::string text(const json& j, const std::string& where) {
  if (!j.is_string()) fail(where, "expected a string");
  return j.get<std::string>();
}

std::vector<double> numbers(const json& j, const std::string& where) {
  if (!j.is_array()) fail(where, "expected an array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(number(j[i], fmt::format("{}[{}]", where, i)));
  return out;
}

OperatorSpec parse_operator(const json& j, const std::string& where) {
  if (!j.is_object()) fail(where, "expected an operator object");
  const std::string kind = text(need(j, where, "kind"), where + ".kind");
  OperatorSpec s;
  s.signature = j.dump();
  if (kind == "identity") {
    allow_keys(j, where, {"kind"});
    s.kind = OperatorSpec::Kind::identity;
  } else if (kind == "current") {
    allow_keys(j, where, {"kind", "bond"});
    s.kind = OperatorSpec::Kind::current;
    if (j.contains("bond")) s.site = count(j["bond"], where + ".bond");
  } else if (kind == "current_total") {
    allow_keys(j, where, {"kind"});
    s.kind = OperatorSpec::Kind::current_total;
  } else if (kind == "majorana_w" || kind == "majorana_wp") {
    allow_keys(j, where, {"kind", "site"});
    s.kind = kind == "majorana_w" ? OperatorSpec::Kind::majorana_w : OperatorSpec::Kind::majorana_wp;
    if (j.contains("site")) s.site = count(j["site"], where + ".site");
  } else if (kind == "hamiltonian") {
    allow_keys(j, where, {"kind"});
    s.kind = OperatorSpec::Kind::hamiltonian;
  } else if (kind == "product") {
    allow_keys(j, where, {"kind", "coefficient", "factors"});
    s.kind = OperatorSpec::Kind::product;
    if (j.contains("coefficient")) {
      const auto& c = j["coefficient"];
      if (c.is_array()) {
        if (c.size() != 2) fail(where + ".coefficient", "expected [re, im]");
        s.coefficient = cplx(number(c[0], where + ".coefficient[0]"), number(c[1], where + ".coefficient[1]"));
      } else {
        s.coefficient = number(c, where + ".coefficient");
      }
    }
    const auto& f = need(j, where, "factors");
    if (!f.is_array() || f.empty()) fail(where + ".factors", "expected a nonempty array of [site, op]");
    for (std::size_t i = 0; i < f.size(); ++i) {
      const std::string w = fmt::format("{}.factors[{}]", where, i);
      if (!f[i].is_array() || f[i].size() != 2) fail(w, "expected [site, op]");
      const std::string name = text(f[i][1], w + "[1]");
      try {
        named_local_operator(name);
      } catch (const std::invalid_argument& e) {
        fail(w, e.what());
      }
      s.factors.emplace_back(count(f[i][0], w + "[0]"), name);
    }
  } else {
    fail(where + ".kind", fmt::format("unknown operator kind '{}'", kind));
  }
  return s;
}

LegConfig parse_leg(const json& j, const std::string& where, const char* total_key, bool with_operators) {
  if (with_operators)
    allow_keys(j, where, {"step", total_key, "snapshots", "order", "log_every", "operators"});
  else
    allow_keys(j, where, {"step", total_key, "snapshots", "order", "log_every"});
  LegConfig leg;
  leg.step = number(need(j, where, "step"), where + ".step");
  leg.total = number(need(j, where, total_key), fmt::format("{}.{}", where, total_key));
  if (j.contains("snapshots")) leg.snapshots = numbers(j["snapshots"], where + ".snapshots");
  if (leg.snapshots.empty()) leg.snapshots = {leg.total};
  std::sort(leg.snapshots.begin(), leg.snapshots.end());
  if (std::adjacent_find(leg.snapshots.begin(), leg.snapshots.end()) != leg.snapshots.end())
    fail(where + ".snapshots", "duplicate snapshot points");
  if (j.contains("order")) {
    const auto o = count(j["order"], where + ".order");
    if (o != 1 && o != 2) fail(where + ".order", "Trotter order must be 1 or 2");
    leg.order = static_cast<int>(o);
  }
  if (j.contains("log_every")) leg.log_every = count(j["log_every"], where + ".log_every");
  EvolutionConfig probe;
  probe.step = leg.step;
  probe.total = leg.total;
  probe.snapshot_points = leg.snapshots;
  probe.log_every = leg.log_every;
  try {
    probe.validate();
  } catch (const std::invalid_argument& e) {
    fail(where, e.what());
  }
  return leg;
}

bool valid_label(const std::string& s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-'; });
}

}  // namespace

Matrix<cplx> named_local_operator(const std::string& name) {
  if (name == "x") return pauli::x();
  if (name == "y") return pauli::y();
  if (name == "z") return pauli::z();
  if (name == "+") return pauli::plus();
  if (name == "-") return pauli::minus();
  if (name == "n") return occupation();
  if (name == "1") return pauli::identity();
  throw std::invalid_argument(fmt::format("unknown local operator '{}' (expected one of x y z + - n 1)", name));
}

const HeisenbergOperator& RunConfig::heisenberg_operator(const std::string& label) const {
  for (const auto& op : operators)
    if (op.label == label) return op;
  throw ConfigError(fmt::format("config: no heisenberg operator labelled '{}'", label));
}

RunConfig parse_config(const std::string& source) {
  json j;
  try {
    j = json::parse(source);
  } catch (const json::parse_error& e) {
    throw ConfigError(fmt::format("config: not valid JSON: {}", e.what()));
  }
  allow_keys(j, "top level",
             {"model", "basis", "truncation", "thermal", "heisenberg", "observables", "output", "validate",
              "deterministic"});
  RunConfig cfg;

  const auto& m = need(j, "top level", "model");
  const std::string kind = text(need(m, "model", "kind"), "model.kind");
  if (kind == "xxz") {
    allow_keys(m, "model", {"kind", "n", "delta"});
    cfg.model = ModelKind::xxz;
    cfg.xxz.n = count(need(m, "model", "n"), "model.n");
    cfg.xxz.delta = number(need(m, "model", "delta"), "model.delta");
    if (cfg.xxz.n < 2) fail("model.n", "need at least 2 sites");
  } else if (kind == "siam") {
    allow_keys(m, "model", {"kind", "n", "tau", "taus", "u", "eps_f"});
    cfg.model = ModelKind::siam;
    const std::size_t n = count(need(m, "model", "n"), "model.n");
    if (n < 2 || n % 2 != 0) fail("model.n", "the impurity chain needs an even number of sites >= 2");
    const double u = number(need(m, "model", "u"), "model.u");
    const double eps = number(need(m, "model", "eps_f"), "model.eps_f");
    if (m.contains("tau") == m.contains("taus")) fail("model", "give exactly one of 'tau' or 'taus'");
    if (m.contains("tau")) {
      cfg.siam = SiamChain::uniform(n, number(m["tau"], "model.tau"), u, eps);
    } else {
      cfg.siam = SiamChain{n, numbers(m["taus"], "model.taus"), u, eps};
    }
    try {
      cfg.siam.validate();
    } catch (const std::invalid_argument& e) {
      fail("model", e.what());
    }
  } else {
    fail("model.kind", fmt::format("unknown model '{}' (expected xxz or siam)", kind));
  }
  cfg.model_signature = m.dump();

  if (j.contains("basis")) {
    const auto& b = j["basis"];
    allow_keys(b, "basis", {"thermal", "heisenberg"});
    if (b.contains("thermal") && text(b["thermal"], "basis.thermal") != "real")
      fail("basis.thermal", "the thermal leg runs in the real basis (its generator is real only there)");
    if (b.contains("heisenberg") && text(b["heisenberg"], "basis.heisenberg") != "hermitian")
      fail("basis.heisenberg", "the heisenberg leg runs in the hermitian basis (its generator is real only there)");
  }

  if (j.contains("truncation")) {
    const auto& t = j["truncation"];
    allow_keys(t, "truncation", {"max_bond", "weight_tol", "abort_weight"});
    if (t.contains("max_bond")) cfg.max_bond = count(t["max_bond"], "truncation.max_bond");
    if (t.contains("weight_tol")) cfg.weight_tol = number(t["weight_tol"], "truncation.weight_tol");
    if (t.contains("abort_weight")) cfg.abort_weight = number(t["abort_weight"], "truncation.abort_weight");
    if (cfg.max_bond == 0) fail("truncation.max_bond", "must be positive");
    if (cfg.weight_tol < 0.0) fail("truncation.weight_tol", "must be nonnegative");
    if (!(cfg.abort_weight >= 0.0)) fail("truncation.abort_weight", "must be nonnegative");
  }

  cfg.thermal = parse_leg(need(j, "top level", "thermal"), "thermal", "beta_max", false);
  const auto& h = need(j, "top level", "heisenberg");
  cfg.heisenberg = parse_leg(h, "heisenberg", "t_max", true);
  const auto& ops = need(h, "heisenberg", "operators");
  if (!ops.is_array() || ops.empty()) fail("heisenberg.operators", "expected a nonempty array");
  std::set<std::string> labels;
  for (std::size_t i = 0; i < ops.size(); ++i) {
    const std::string w = fmt::format("heisenberg.operators[{}]", i);
    allow_keys(ops[i], w, {"label", "operator"});
    HeisenbergOperator op{text(need(ops[i], w, "label"), w + ".label"), parse_operator(need(ops[i], w, "operator"), w + ".operator")};
    if (!valid_label(op.label)) fail(w + ".label", "labels use letters, digits, '_' and '-'");
    if (!labels.insert(op.label).second) fail(w + ".label", fmt::format("duplicate label '{}'", op.label));
    cfg.operators.push_back(std::move(op));
  }

  if (j.contains("observables")) {
    const auto& obs = j["observables"];
    if (!obs.is_array()) fail("observables", "expected an array");
    std::set<std::string> seen;
    for (std::size_t i = 0; i < obs.size(); ++i) {
      const std::string w = fmt::format("observables[{}]", i);
      allow_keys(obs[i], w, {"label", "kind", "a", "b", "w", "wp"});
      ObservableConfig o;
      o.label = text(need(obs[i], w, "label"), w + ".label");
      if (!valid_label(o.label)) fail(w + ".label", "labels use letters, digits, '_' and '-'");
      if (!seen.insert(o.label).second) fail(w + ".label", fmt::format("duplicate label '{}'", o.label));
      const std::string k = text(need(obs[i], w, "kind"), w + ".kind");
      auto known = [&](const std::string& key) {
        const std::string l = text(need(obs[i], w, key.c_str()), w + "." + key);
        if (!labels.count(l)) fail(w + "." + key, fmt::format("no heisenberg operator labelled '{}'", l));
        return l;
      };
      if (k == "expectation") {
        o.kind = ObservableConfig::Kind::expectation;
        o.a = known("a");
      } else if (k == "plain" || k == "anticommutator") {
        o.kind = k == "plain" ? ObservableConfig::Kind::plain : ObservableConfig::Kind::anticommutator;
        o.a = known("a");
        o.b = parse_operator(need(obs[i], w, "b"), w + ".b");
      } else if (k == "greens") {
        o.kind = ObservableConfig::Kind::greens;
        o.w = known("w");
        o.wp = known("wp");
      } else {
        fail(w + ".kind", fmt::format("unknown observable kind '{}' (expected expectation, plain, anticommutator "
                                      "or greens)", k));
      }
      cfg.observables.push_back(std::move(o));
    }
  }

  if (j.contains("output")) {
    allow_keys(j["output"], "output", {"dir"});
    if (j["output"].contains("dir")) cfg.out_dir = text(j["output"]["dir"], "output.dir");
  }
  if (j.contains("validate")) {
    allow_keys(j["validate"], "validate", {"tolerance"});
    if (j["validate"].contains("tolerance")) cfg.validate_tolerance = number(j["validate"]["tolerance"], "validate.tolerance");
    if (!(cfg.validate_tolerance > 0.0)) fail("validate.tolerance", "must be positive");
  }
  if (j.contains("deterministic")) {
    if (!j["deterministic"].is_boolean()) fail("deterministic", "expected true or false");
    cfg.deterministic = j["deterministic"].get<bool>();
    if (!cfg.deterministic) fail("deterministic", "only deterministic runs are supported");
  }

  // Resolve every operator once so range errors surface as config errors.
  for (const auto& op : cfg.operators) {
    try {
      resolve_operator(op.spec, cfg);
    } catch (const std::invalid_argument& e) {
      fail(fmt::format("heisenberg operator '{}'", op.label), e.what());
    }
  }
  for (const auto& o : cfg.observables) {
    if (!o.b) continue;
    try {
      resolve_operator(*o.b, cfg);
    } catch (const std::invalid_argument& e) {
      fail(fmt::format("observable '{}'", o.label), e.what());
    }
  }
  return cfg;
}

RunConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(fmt::format("config: cannot read '{}'", path.string()));
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

HamiltonianTerms hamiltonian(const RunConfig& cfg) {
  return cfg.model == ModelKind::xxz ? xxz_terms(cfg.xxz) : siam_terms(cfg.siam);
}

OperatorSum resolve_operator(const OperatorSpec& spec, const RunConfig& cfg) {
  const std::size_t n = cfg.n();
  auto impurity = [&]() -> std::size_t {
    if (spec.site) return *spec.site;
    if (cfg.model == ModelKind::siam) return cfg.siam.up_impurity();
    throw std::invalid_argument("Majorana operators on the xxz chain need an explicit 'site'");
  };
  switch (spec.kind) {
    case OperatorSpec::Kind::identity:
      return {ProductOperator{n, 2, 1.0, {}}};
    case OperatorSpec::Kind::current:
      return spin_current_operator(spec.site.value_or(n / 2 - 1), n);
    case OperatorSpec::Kind::current_total:
      return total_current_operator(n);
    case OperatorSpec::Kind::majorana_w: {
      const std::size_t s = impurity();
      if (s >= n) throw std::invalid_argument(fmt::format("Majorana site {} outside the chain", s));
      return {MajoranaPair{s}.w(n)};
    }
    case OperatorSpec::Kind::majorana_wp: {
      const std::size_t s = impurity();
      if (s >= n) throw std::invalid_argument(fmt::format("Majorana site {} outside the chain", s));
      return {MajoranaPair{s}.w_prime(n)};
    }
    case OperatorSpec::Kind::hamiltonian:
      return hamiltonian_operator_sum(hamiltonian(cfg), make_basis(2, BasisKind::hermitian));
    case OperatorSpec::Kind::product: {
      ProductOperator p{n, 2, spec.coefficient, {}};
      for (const auto& [site, name] : spec.factors) {
        if (site >= n) throw std::invalid_argument(fmt::format("product factor on site {} outside the chain", site));
        p.factors.emplace_back(site, named_local_operator(name));
      }
      return {p};
    }
  }
  throw std::logic_error("resolve_operator: unhandled kind");
}

OperatorMps operator_state(const OperatorSpec& spec, const RunConfig& cfg, const LocalBasis& basis) {
  const OperatorSum terms = resolve_operator(spec, cfg);
  if (terms.size() == 1) return product_operator_state(terms.front(), basis);
  if (spec.kind == OperatorSpec::Kind::current) return spin_current_state(spec.site.value_or(cfg.n() / 2 - 1), cfg.n(), basis);
  return operator_sum_state(terms, basis);
}

}  // namespace opmps
