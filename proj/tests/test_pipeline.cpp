#include "opmps/pipeline.hpp"

#include <gtest/gtest.h>
#include <json.hpp>

#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>

#include <unistd.h>

using namespace opmps;
using nlohmann::json;

namespace {

const LocalBasis kHerm = make_basis(2, BasisKind::hermitian);
const LocalBasis kReal = make_basis(2, BasisKind::real);

json base_config(std::size_t n = 4) {
  json j = json::parse(R"({
    "model": {"kind": "xxz", "n": 4, "delta": 1.0},
    "truncation": {"max_bond": 64, "weight_tol": 1e-14},
    "thermal": {"step": 0.05, "beta_max": 0.5, "snapshots": [0, 0.25, 0.5]},
    "heisenberg": {"step": 0.05, "t_max": 0.5, "snapshots": [0, 0.25, 0.5],
                   "operators": [{"label": "j", "operator": {"kind": "current"}}]},
    "observables": [{"label": "jj", "kind": "plain", "a": "j", "b": {"kind": "current"}}],
    "validate": {"tolerance": 1e-3}
  })");
  j["model"]["n"] = n;
  return j;
}

RunConfig parse(const json& j) { return parse_config(j.dump()); }

// A scratch directory removed at scope exit.
struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("opmps_" + tag + "_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::map<std::string, std::string> tree(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) out[fs::relative(e.path(), root).string()] = slurp(e.path());
  return out;
}

double coefficient_distance(const OperatorMps& x, const OperatorMps& y) {
  return (to_dense_coefficients(x) - to_dense_coefficients(y)).norm();
}

void expect_config_error(const json& j, const std::string& fragment) {
  try {
    parse(j);
    ADD_FAILURE() << "accepted: " << j.dump();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find(fragment), std::string::npos) << e.what();
  }
}

int run_cli(const std::string& args) {
  const int status = std::system((std::string(OPMPS_CLI) + " " + args + " >/dev/null 2>&1").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(Config, ParsesSampleConfig) {
  const RunConfig cfg = load_config(fs::path(OPMPS_SOURCE_DIR) / "configs" / "xxz_n6.json");
  EXPECT_EQ(cfg.n(), 6u);
  EXPECT_EQ(cfg.thermal.log_every, 5u);
  EXPECT_EQ(cfg.operators.size(), 1u);
  EXPECT_EQ(cfg.observables.size(), 2u);
  EXPECT_EQ(cfg.validate_tolerance, 1e-4);
}

TEST(Config, Defaults) {
  const RunConfig cfg = parse(base_config());
  EXPECT_EQ(cfg.thermal.order, 2);
  EXPECT_EQ(cfg.heisenberg.log_every, 1u);
  EXPECT_TRUE(cfg.deterministic);
  // The default current bond straddles the middle cut.
  const OperatorSum j = resolve_operator(cfg.operators[0].spec, cfg);
  const OperatorSum want = spin_current_operator(1, 4);
  ASSERT_EQ(j.size(), want.size());
  for (std::size_t k = 0; k < j.size(); ++k) EXPECT_EQ(j[k].factors[0].first, want[k].factors[0].first);
}

TEST(Config, SiamModelAndMajoranaDefaults) {
  json j = base_config();
  j["model"] = {{"kind", "siam"}, {"n", 6}, {"tau", 0.5}, {"u", 1.0}, {"eps_f", -0.5}};
  j["heisenberg"]["operators"] = {{{"label", "w"}, {"operator", {{"kind", "majorana_w"}}}},
                                  {{"label", "wp"}, {"operator", {{"kind", "majorana_wp"}}}}};
  j["observables"] = {{{"label", "G"}, {"kind", "greens"}, {"w", "w"}, {"wp", "wp"}}};
  const RunConfig cfg = parse(j);
  EXPECT_EQ(cfg.model, ModelKind::siam);
  EXPECT_EQ(cfg.siam.taus, (std::vector<double>{0.5, 0.5, 0.0, 0.5, 0.5}));
  const OperatorSum w = resolve_operator(cfg.operators[0].spec, cfg);
  ASSERT_EQ(w.size(), 1u);
  EXPECT_EQ(w[0].factors.back().first, 2u);
}

TEST(Config, Rejections) {
  json j = base_config();
  j["colour"] = 1;
  expect_config_error(j, "unknown key 'colour'");

  j = base_config();
  j["model"]["n"] = 1;
  expect_config_error(j, "model");

  j = base_config();
  j["model"] = {{"kind", "siam"}, {"n", 5}, {"tau", 0.5}, {"u", 1.0}, {"eps_f", -0.5}};
  expect_config_error(j, "model");

  j = base_config();
  j["model"] = {{"kind", "siam"}, {"n", 4}, {"tau", 0.5}, {"taus", {0.5, 0.0, 0.5}}, {"u", 1.0}, {"eps_f", -0.5}};
  expect_config_error(j, "tau");

  j = base_config();
  j["thermal"]["snapshots"] = {0, 0.33};
  expect_config_error(j, "thermal");

  j = base_config();
  j["thermal"]["snapshots"] = {0.25, 0.25};
  expect_config_error(j, "thermal");

  j = base_config();
  j["heisenberg"]["operators"].push_back({{"label", "j"}, {"operator", {{"kind", "identity"}}}});
  expect_config_error(j, "duplicate");

  j = base_config();
  j["observables"][0]["a"] = "nope";
  expect_config_error(j, "nope");

  j = base_config();
  j["heisenberg"]["operators"][0]["operator"] = {{"kind", "current"}, {"bond", 3}};
  expect_config_error(j, "bond");

  j = base_config();
  j["heisenberg"]["operators"][0]["operator"] = {{"kind", "product"}, {"factors", {{7, "z"}}}};
  expect_config_error(j, "heisenberg");

  j = base_config();
  j["heisenberg"]["operators"][0]["operator"] = {{"kind", "product"}, {"factors", {{0, "q"}}}};
  expect_config_error(j, "q");

  j = base_config();
  j["heisenberg"]["operators"][0]["operator"] = {{"kind", "majorana_w"}};
  expect_config_error(j, "site");

  j = base_config();
  j["heisenberg"]["operators"][0]["label"] = "has space";
  expect_config_error(j, "label");

  j = base_config();
  j["basis"] = {{"thermal", "hermitian"}};
  expect_config_error(j, "basis");

  j = base_config();
  j["deterministic"] = false;
  expect_config_error(j, "deterministic");

  j = base_config();
  j["validate"]["tolerance"] = 0.0;
  expect_config_error(j, "tolerance");

  EXPECT_THROW(parse_config("{not json"), ConfigError);
  EXPECT_THROW(load_config("/nonexistent/config.json"), ConfigError);
}

TEST(Config, ProductOperatorCoefficients) {
  json j = base_config();
  j["heisenberg"]["operators"][0]["operator"] = {
      {"kind", "product"}, {"coefficient", {0.0, 2.0}}, {"factors", {{0, "+"}, {3, "n"}}}};
  const RunConfig cfg = parse(j);
  const OperatorSum p = resolve_operator(cfg.operators[0].spec, cfg);
  ASSERT_EQ(p.size(), 1u);
  EXPECT_EQ(p[0].coefficient, cplx(0.0, 2.0));
  EXPECT_EQ(p[0].factor_at(0), pauli::plus());
  EXPECT_EQ(p[0].factor_at(3), occupation());
}

TEST(Snapshot, RoundTripIsBitExact) {
  const OperatorMps real = product_operator_state({4, 2, 0.7, {{1, pauli::z()}, {2, pauli::x()}}}, kReal);
  const OperatorMps cplx_state = product_operator_state({4, 2, cplx(0.3, -1.1), {{0, pauli::y()}}}, kHerm);
  for (const auto* s : {&real, &cplx_state}) {
    const std::vector<char> bytes = encode_snapshot(*s, StampKind::t, 0.125);
    const StoredSnapshot back = decode_snapshot(bytes);
    EXPECT_EQ(back.kind, StampKind::t);
    EXPECT_EQ(back.stamp, 0.125);
    EXPECT_EQ(back.state.basis_kind(), s->basis_kind());
    EXPECT_EQ(back.state.is_real(), s->is_real());
    EXPECT_EQ(encode_snapshot(back.state, StampKind::t, 0.125), bytes);
    EXPECT_EQ(coefficient_distance(back.state, *s), 0.0);
  }
}

TEST(Snapshot, RejectsDamagedFiles) {
  const std::vector<char> good = encode_snapshot(identity_state(3, kReal), StampKind::beta, 0.0);
  auto bad = good;
  bad[0] = 'X';
  EXPECT_THROW(decode_snapshot(bad), SnapshotFormatError);
  bad = good;
  bad[4] = 2;  // version
  EXPECT_THROW(decode_snapshot(bad), SnapshotFormatError);
  bad = good;
  bad.pop_back();
  EXPECT_THROW(decode_snapshot(bad), SnapshotFormatError);
  bad = good;
  bad.push_back(0);
  EXPECT_THROW(decode_snapshot(bad), SnapshotFormatError);
}

TEST(Snapshot, Sha256KnownValue) {
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Pipeline, ZeroBetaAndIdentityLegsAreTheIdentity) {
  TempDir dir("identity");
  json j = base_config();
  j["thermal"] = {{"step", 0.05}, {"beta_max", 0.0}};
  j["heisenberg"]["operators"] = {{{"label", "one"}, {"operator", {{"kind", "identity"}}}}};
  j["observables"] = {{{"label", "ones"}, {"kind", "plain"}, {"a", "one"}, {"b", {{"kind", "identity"}}}}};
  const RunConfig cfg = parse(j);
  const LegResult th = run_thermal(cfg, dir.path);
  ASSERT_EQ(th.manifest.snapshots.size(), 1u);
  const auto loaded = load_manifest_snapshots(thermal_dir(dir.path), th.manifest);
  EXPECT_EQ(coefficient_distance(loaded[0].state, identity_state(4, kReal)), 0.0);
  const auto legs = run_heisenberg(cfg, dir.path);
  const auto hs = load_manifest_snapshots(heisenberg_dir(dir.path, "one"), legs[0].manifest);
  for (const auto& s : hs) EXPECT_LT(coefficient_distance(s.state, identity_state(4, kHerm)), 1e-12);
  const auto grids = run_correlate(cfg, dir.path, 1);
  ASSERT_EQ(grids.size(), 1u);
  for (const auto& c : grids[0].cells) EXPECT_NEAR(std::abs(c.value - 1.0), 0.0, 1e-12);
}

TEST(Pipeline, TwoSiteCurrentCorrelationAtInfiniteTemperature) {
  TempDir dir("n2");
  json j = base_config(2);
  const RunConfig cfg = parse(j);
  run_thermal(cfg, dir.path);
  run_heisenberg(cfg, dir.path);
  const auto grids = run_correlate(cfg, dir.path, 1);
  EXPECT_NEAR(std::abs(grids[0].at(0, 0).value - 0.5), 0.0, 1e-14);
  const ThermalOracle oracle(dense_hamiltonian(hamiltonian(cfg)));
  const DenseOperator jd = dense_operator(spin_current_operator(0, 2));
  for (std::size_t it = 0; it < grids[0].t_axis.size(); ++it)
    EXPECT_NEAR(std::abs(grids[0].at(0, it).value - oracle.expectation(jd, jd, 0.0, grids[0].t_axis[it])), 0.0, 1e-12);
  const std::string csv = slurp(grid_path(dir.path, "jj"));
  EXPECT_EQ(csv.substr(0, csv.find('\n')),
            "beta,t,value_re,value_im,denom_log,trunc_weight_thermal,trunc_weight_real");
}

TEST(Pipeline, IncompatibleInputsAreRejected) {
  TempDir dir("incompatible");
  const RunConfig cfg = parse(base_config());
  EXPECT_THROW(run_correlate(cfg, dir.path, 1), IncompatibleInputs);
  run_thermal(cfg, dir.path);
  run_heisenberg(cfg, dir.path);
  EXPECT_NO_THROW(run_correlate(cfg, dir.path, 1));

  json other = base_config();
  other["model"]["delta"] = 0.5;
  EXPECT_THROW(run_correlate(parse(other), dir.path, 1), IncompatibleInputs);

  json moved = base_config();
  moved["heisenberg"]["operators"][0]["operator"] = {{"kind", "current"}, {"bond", 0}};
  moved["observables"][0]["b"] = {{"kind", "current"}, {"bond", 0}};
  EXPECT_THROW(run_correlate(parse(moved), dir.path, 1), IncompatibleInputs);

  // A snapshot edited after the manifest was written.
  const Manifest m = read_manifest(thermal_dir(dir.path) / "manifest.json");
  const fs::path victim = thermal_dir(dir.path) / m.snapshots.back().file;
  save_snapshot(victim, identity_state(4, kReal), StampKind::beta, m.snapshots.back().stamp);
  EXPECT_THROW(run_correlate(cfg, dir.path, 1), SnapshotFormatError);
}

TEST(Pipeline, LegsAreDecoupled) {
  TempDir dir("decoupled");
  const RunConfig cfg = parse(base_config());
  run_thermal(cfg, dir.path);
  run_heisenberg(cfg, dir.path);
  const auto before = tree(heisenberg_dir(dir.path, "j"));
  json longer = base_config();
  longer["thermal"] = {{"step", 0.05}, {"beta_max", 1.0}, {"snapshots", {0, 0.5, 1.0}}};
  const RunConfig cfg2 = parse(longer);
  run_thermal(cfg2, dir.path);
  EXPECT_EQ(tree(heisenberg_dir(dir.path, "j")), before);
  const auto grids = run_correlate(cfg2, dir.path, 1);
  EXPECT_EQ(grids[0].beta_axis, (std::vector<double>{0.0, 0.5, 1.0}));
  // Hashes listed in the heisenberg manifest still verify.
  const Manifest hm = read_manifest(heisenberg_dir(dir.path, "j") / "manifest.json");
  for (const auto& e : hm.snapshots) EXPECT_EQ(sha256_file(heisenberg_dir(dir.path, "j") / e.file), e.sha256);
}

TEST(Pipeline, RerunsAreByteIdentical) {
  TempDir a("det_a"), b("det_b");
  const RunConfig cfg = parse(base_config());
  for (const auto* d : {&a, &b}) {
    run_thermal(cfg, d->path);
    run_heisenberg(cfg, d->path);
    run_correlate(cfg, d->path, d == &a ? 1u : 3u);
  }
  const auto ta = tree(a.path), tb = tree(b.path);
  EXPECT_GE(ta.size(), 9u);
  EXPECT_EQ(ta, tb);
}

TEST(Pipeline, FusedLoggingMatchesPerStepLogging) {
  json j = base_config(6);
  j["truncation"]["weight_tol"] = 0.0;
  j["thermal"] = {{"step", 0.01}, {"beta_max", 1.0}, {"snapshots", {0.5, 1.0}}};
  const RunConfig every = parse(j);
  j["thermal"]["log_every"] = 7;
  const RunConfig fused = parse(j);
  const auto x = evolve_thermal(every, every.thermal), y = evolve_thermal(fused, fused.thermal);
  ASSERT_EQ(x.snapshots.size(), y.snapshots.size());
  for (std::size_t k = 0; k < x.snapshots.size(); ++k) {
    const double scale = to_dense_coefficients(x.snapshots[k].state).norm();
    EXPECT_LT(coefficient_distance(x.snapshots[k].state, y.snapshots[k].state) / scale, 1e-12);
  }
  EXPECT_LT(y.log.size(), x.log.size());
}

TEST(Pipeline, ThermalOseeNondecreasingInBeta) {
  json j = base_config(8);
  j["thermal"] = {{"step", 0.01}, {"beta_max", 1.0}, {"snapshots", {0.5, 1.0}}, {"log_every", 10}};
  const RunConfig cfg = parse(j);
  const EvolutionResult r = evolve_thermal(cfg, cfg.thermal);
  ASSERT_EQ(r.snapshots.size(), 2u);
  const double s_half = osee(r.snapshots[0].state, 4), s_one = osee(r.snapshots[1].state, 4);
  EXPECT_GT(s_half, 0.0);
  EXPECT_GT(s_one, s_half);
  // Not monotone step by step at this size: the exact curve peaks near beta = 0.9.
  const ThermalOracle oracle(dense_hamiltonian(xxz_terms({8, 1.0})));
  EXPECT_NEAR(s_half, exact_osee(oracle.boltzmann(0.5), 4), 1e-3);
  EXPECT_NEAR(s_one, exact_osee(oracle.boltzmann(1.0), 4), 1e-3);
}

TEST(Pipeline, AbortPersistsPartialLeg) {
  TempDir dir("abort");
  json j = base_config(6);
  j["truncation"] = {{"max_bond", 2}, {"weight_tol", 0.0}, {"abort_weight", 1e-12}};
  const RunConfig cfg = parse(j);
  EXPECT_THROW(run_thermal(cfg, dir.path), EvolutionAbort);
  const Manifest m = read_manifest(thermal_dir(dir.path) / "manifest.json");
  EXPECT_TRUE(m.aborted);
  EXPECT_FALSE(m.abort_reason.empty());
}

TEST(Validate, PassesAndDiagnosesTrotterError) {
  TempDir dir("validate");
  json j = base_config(4);
  j["thermal"] = {{"step", 0.005}, {"beta_max", 1.0}, {"snapshots", {0, 1.0}}};
  j["heisenberg"]["step"] = 0.005;
  j["heisenberg"]["t_max"] = 1.0;
  j["heisenberg"]["snapshots"] = {0, 1.0};
  const ValidationReport ok = run_validate(parse(j), dir.path, 1e-4, 1);
  EXPECT_TRUE(ok.passed()) << ok.text();
  EXPECT_TRUE(fs::exists(dir.path / "validate" / "report.txt"));

  j["thermal"]["step"] = 0.25;
  j["heisenberg"]["step"] = 0.25;
  const ValidationReport bad = run_validate(parse(j), dir.path, 1e-4, 1);
  EXPECT_FALSE(bad.passed());
  EXPECT_NE(bad.checks[0].diagnosis.find("Trotter"), std::string::npos) << bad.text();
  EXPECT_NE(bad.text().find("overall: FAIL"), std::string::npos);
}

TEST(Report, WritesColumnFiles) {
  TempDir dir("report");
  const RunConfig cfg = parse(base_config());
  run_thermal(cfg, dir.path);
  run_heisenberg(cfg, dir.path);
  run_correlate(cfg, dir.path, 1);
  const auto files = run_report(cfg, dir.path);
  EXPECT_TRUE(fs::exists(dir.path / "report" / "osee_beta.dat"));
  EXPECT_TRUE(fs::exists(dir.path / "report" / "osee_t_j.dat"));
  EXPECT_TRUE(fs::exists(dir.path / "report" / "grid_jj.dat"));
  EXPECT_EQ(files.size(), 3u);
}

TEST(Cli, ExitCodes) {
  TempDir dir("cli");
  const fs::path good = dir.path / "good.json", big = dir.path / "big.json", broken = dir.path / "broken.json";
  json fine = base_config();
  fine["thermal"]["step"] = 0.01;
  fine["heisenberg"]["step"] = 0.01;
  std::ofstream(good) << fine.dump();
  std::ofstream(big) << base_config(10).dump();
  std::ofstream(broken) << "{\"model\": 3}";
  const std::string out = " --out " + (dir.path / "run").string();
  EXPECT_EQ(run_cli("correlate --config " + good.string() + out), exit_incompatible);
  EXPECT_EQ(run_cli("thermal --config " + good.string() + out), exit_ok);
  EXPECT_EQ(run_cli("heisenberg --config " + good.string() + out), exit_ok);
  EXPECT_EQ(run_cli("correlate --config " + good.string() + out + " --threads 2"), exit_ok);
  EXPECT_EQ(run_cli("report --config " + good.string() + out), exit_ok);
  EXPECT_EQ(run_cli("validate --config " + good.string() + out), exit_ok);
  EXPECT_EQ(run_cli("validate --config " + good.string() + out + " --tolerance-override 1e-14"), exit_check_failed);
  EXPECT_EQ(run_cli("validate --config " + good.string() + out + " --tolerance-override -1"), exit_config);
  EXPECT_EQ(run_cli("validate --config " + big.string() + out), exit_oracle_cap);
  EXPECT_EQ(run_cli("thermal --config " + broken.string() + out), exit_config);
  EXPECT_EQ(run_cli("thermal"), exit_config);
  EXPECT_EQ(run_cli("launch --config " + good.string()), exit_config);

  json aborting = base_config(6);
  aborting["truncation"] = {{"max_bond", 2}, {"weight_tol", 0.0}, {"abort_weight", 1e-12}};
  const fs::path ab = dir.path / "abort.json";
  std::ofstream(ab) << aborting.dump();
  EXPECT_EQ(run_cli("thermal --config " + ab.string() + out + "_abort"), exit_abort);
  EXPECT_EQ(run_cli("correlate --config " + ab.string() + out + "_abort"), exit_incompatible);
}
