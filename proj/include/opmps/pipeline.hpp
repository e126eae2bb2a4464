#pragma once

// File-level pipeline behind the command line tool: configuration, snapshot files,
// manifests, and the thermal / heisenberg / correlate / validate / report stages.
//
// Output layout under the run directory:
//   thermal/manifest.json, thermal/log.csv, thermal/beta_<stamp>.omps
//   heisenberg/<label>/manifest.json, .../log.csv, .../t_<stamp>.omps
//   grids/grid_<label>.csv
//   validate/report.txt
//   report/*.dat

#include "opmps/ed.hpp"
#include "opmps/evolution.hpp"
#include "opmps/models.hpp"
#include "opmps/observables.hpp"

#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace opmps {

namespace fs = std::filesystem;

// Exit codes of the command line tool.
enum ExitCode : int {
  exit_ok = 0,
  exit_check_failed = 1,
  exit_config = 2,
  exit_abort = 3,
  exit_incompatible = 4,
  exit_oracle_cap = 5,
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IncompatibleInputs : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SnapshotFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Configuration

enum class ModelKind { xxz, siam };

struct OperatorSpec {
  enum class Kind { identity, current, current_total, majorana_w, majorana_wp, hamiltonian, product };
  Kind kind = Kind::identity;
  std::optional<std::size_t> site;  // bond for current, impurity site for Majoranas
  cplx coefficient = 1.0;
  std::vector<std::pair<std::size_t, std::string>> factors;  // product: site, one of x y z + - n 1
  std::string signature;  // canonical text of the spec as configured
};

struct LegConfig {
  double step = 0.01;
  double total = 0.0;
  std::vector<double> snapshots;
  int order = 2;
  std::size_t log_every = 1;
};

struct HeisenbergOperator {
  std::string label;
  OperatorSpec spec;
};

struct ObservableConfig {
  enum class Kind { expectation, plain, anticommutator, greens };
  std::string label;
  Kind kind = Kind::plain;
  std::string a;                   // heisenberg label (expectation, plain, anticommutator)
  std::optional<OperatorSpec> b;   // plain, anticommutator
  std::string w, wp;               // heisenberg labels of the two Majorana series (greens)
};

struct RunConfig {
  ModelKind model = ModelKind::xxz;
  XxzModel xxz;
  SiamChain siam;
  std::string model_signature;  // canonical text of the model section

  std::size_t max_bond = 256;
  double weight_tol = 1e-12;
  double abort_weight = std::numeric_limits<double>::infinity();

  LegConfig thermal;
  LegConfig heisenberg;
  std::vector<HeisenbergOperator> operators;
  std::vector<ObservableConfig> observables;

  std::string out_dir = "out";
  double validate_tolerance = 1e-4;
  bool deterministic = true;

  std::size_t n() const { return model == ModelKind::xxz ? xxz.n : siam.n; }
  const HeisenbergOperator& heisenberg_operator(const std::string& label) const;
};

/// Parses and validates a JSON config; every problem is reported as ConfigError.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const fs::path& path);

HamiltonianTerms hamiltonian(const RunConfig& cfg);
OperatorSum resolve_operator(const OperatorSpec& spec, const RunConfig& cfg);
OperatorMps operator_state(const OperatorSpec& spec, const RunConfig& cfg, const LocalBasis& basis);
Matrix<cplx> named_local_operator(const std::string& name);

// ---------------------------------------------------------------------------
// Snapshot files
//
// Little-endian: "OMPS", u32 version, u32 n, u32 d^2, u8 arithmetic (0 real, 1 complex),
// u8 basis (0 hermitian, 1 real), u8 stamp kind (0 beta, 1 t), f64 stamp, f64 log_scale,
// i32 centre (-1 when unset), u32 x (n + 1) bond extents, then the site tensors in
// row-major (left, physical, right) order as f64 (complex: re, im).

inline constexpr std::uint32_t kSnapshotVersion = 1;

enum class StampKind : std::uint8_t { beta = 0, t = 1 };

struct StoredSnapshot {
  OperatorMps state;
  StampKind kind = StampKind::beta;
  double stamp = 0.0;
};

std::vector<char> encode_snapshot(const OperatorMps& state, StampKind kind, double stamp);
StoredSnapshot decode_snapshot(const std::vector<char>& bytes);
/// Writes via a temporary file and rename.
void write_file_atomic(const fs::path& path, const std::string& bytes);
void save_snapshot(const fs::path& path, const OperatorMps& state, StampKind kind, double stamp);
StoredSnapshot load_snapshot(const fs::path& path);
std::string sha256_hex(const std::string& bytes);
std::string sha256_file(const fs::path& path);

// ---------------------------------------------------------------------------
// Manifests

struct ManifestEntry {
  double stamp = 0.0;
  std::string file;
  std::string sha256;
  double cum_discarded_weight = 0.0;
  std::size_t max_bond = 1;
  double log_norm = 0.0;
};

struct Manifest {
  std::string leg;    // "thermal" or "heisenberg"
  std::string label;  // operator label for heisenberg legs
  std::size_t n = 0;
  int d = 2;
  BasisKind basis = BasisKind::real;
  std::string model_signature;
  std::string operator_signature;  // heisenberg legs only
  bool aborted = false;
  std::string abort_reason;
  std::vector<ManifestEntry> snapshots;
};

void write_manifest(const fs::path& path, const Manifest& m);
Manifest read_manifest(const fs::path& path);
/// Loads every snapshot listed, checking hashes.
std::vector<Snapshot> load_manifest_snapshots(const fs::path& dir, const Manifest& m);

// ---------------------------------------------------------------------------
// Stages

struct LegResult {
  Manifest manifest;
  EvolutionResult evolution;
};

fs::path thermal_dir(const fs::path& out);
fs::path heisenberg_dir(const fs::path& out, const std::string& label);
fs::path grid_path(const fs::path& out, const std::string& label);

EvolutionConfig evolution_config(const RunConfig& cfg, const LegConfig& leg);

/// In-memory legs (no files).
EvolutionResult evolve_thermal(const RunConfig& cfg, const LegConfig& leg);
EvolutionResult evolve_heisenberg(const RunConfig& cfg, const LegConfig& leg, const OperatorSpec& op);

/// Evolve and persist. Throws EvolutionAbort after writing the partial outputs.
LegResult run_thermal(const RunConfig& cfg, const fs::path& out);
std::vector<LegResult> run_heisenberg(const RunConfig& cfg, const fs::path& out);

/// Evaluates every configured observable from the files under `out`.
std::vector<ExpectationGrid> run_correlate(const RunConfig& cfg, const fs::path& out, unsigned threads);

/// Evaluates one observable from in-memory snapshot sets keyed by heisenberg label.
ExpectationGrid evaluate_observable(const RunConfig& cfg, const ObservableConfig& obs,
                                    const std::vector<Snapshot>& thermal,
                                    const std::vector<std::pair<std::string, std::vector<Snapshot>>>& heisenberg,
                                    unsigned threads);

struct ValidationCheck {
  std::string observable;
  double max_deviation = 0.0;
  double beta_at_max = 0.0;
  double t_at_max = 0.0;
  double tolerance = 0.0;
  bool passed = false;
  std::string diagnosis;
};

struct ValidationReport {
  std::vector<ValidationCheck> checks;
  bool passed() const;
  std::string text() const;
};

/// Dense oracle value of one cell.
cplx oracle_value(const RunConfig& cfg, const ObservableConfig& obs, const ThermalOracle& oracle, double beta,
                  double t);

/// Runs both legs in memory and compares every grid cell with the dense oracle.
ValidationReport run_validate(const RunConfig& cfg, const fs::path& out, std::optional<double> tolerance_override,
                              unsigned threads);

/// Gnuplot-ready column files from logs and grids.
std::vector<fs::path> run_report(const RunConfig& cfg, const fs::path& out);

void write_grid_csv(const fs::path& path, const ExpectationGrid& g);
std::string grid_csv(const ExpectationGrid& g);
std::string log_csv(const EvolutionLog& log, const char* stamp_column);

}  // namespace opmps
