#include "opmps/pipeline.hpp"

#include <fmt/format.h>
#include <json.hpp>
#include <openssl/evp.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace opmps {

static_assert(std::endian::native == std::endian::little, "snapshot files are written in host order");

namespace {

constexpr char kMagic[4] = {'O', 'M', 'P', 'S'};

class Writer {
 public:
  template <class T>
  void put(T v) {
    const auto* p = reinterpret_cast<const char*>(&v);
    bytes.insert(bytes.end(), p, p + sizeof(T));
  }
  std::vector<char> bytes;
};

class Reader {
 public:
  explicit Reader(const std::vector<char>& b) : bytes_(b) {}
  template <class T>
  T get(const char* what) {
    if (pos_ + sizeof(T) > bytes_.size())
      throw SnapshotFormatError(fmt::format("snapshot truncated while reading {}", what));
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  bool at_end() const { return pos_ == bytes_.size(); }

 private:
  const std::vector<char>& bytes_;
  std::size_t pos_ = 0;
};

std::string read_all(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SnapshotFormatError(fmt::format("cannot read '{}'", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const char* basis_name(BasisKind k) { return k == BasisKind::real ? "real" : "hermitian"; }

BasisKind basis_from_name(const std::string& s) {
  if (s == "real") return BasisKind::real;
  if (s == "hermitian") return BasisKind::hermitian;
  throw SnapshotFormatError(fmt::format("manifest: unknown basis '{}'", s));
}

}  // namespace

std::vector<char> encode_snapshot(const OperatorMps& state, StampKind kind, double stamp) {
  Writer w;
  for (char c : kMagic) w.put(c);
  const bool complex = !state.is_real();
  w.put<std::uint32_t>(kSnapshotVersion);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(state.size()));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(state.phys_dim()));
  w.put<std::uint8_t>(complex ? 1 : 0);
  w.put<std::uint8_t>(state.basis_kind() == BasisKind::real ? 1 : 0);
  w.put<std::uint8_t>(static_cast<std::uint8_t>(kind));
  w.put<double>(stamp);
  w.put<double>(state.log_scale());
  w.put<std::int32_t>(state.center() ? static_cast<std::int32_t>(*state.center()) : -1);
  for (std::size_t b : state.bond_dimensions()) w.put<std::uint32_t>(static_cast<std::uint32_t>(b));
  for (const auto& site : state.sites()) {
    if (complex) {
      const DenseTensor c = site.as_complex();
      for (const cplx& v : c.values<cplx>()) {
        w.put<double>(v.real());
        w.put<double>(v.imag());
      }
    } else {
      for (double v : site.values<double>()) w.put<double>(v);
    }
  }
  return std::move(w.bytes);
}

StoredSnapshot decode_snapshot(const std::vector<char>& bytes) {
  Reader r(bytes);
  for (char c : kMagic)
    if (r.get<char>("magic") != c) throw SnapshotFormatError("not a snapshot file (bad magic)");
  const auto version = r.get<std::uint32_t>("version");
  if (version != kSnapshotVersion)
    throw SnapshotFormatError(fmt::format("unsupported snapshot version {} (this build reads {})", version, kSnapshotVersion));
  const auto n = r.get<std::uint32_t>("n");
  const auto d2 = r.get<std::uint32_t>("d^2");
  const auto arith = r.get<std::uint8_t>("arithmetic");
  const auto basis = r.get<std::uint8_t>("basis");
  const auto kind = r.get<std::uint8_t>("stamp kind");
  int d = 0;
  while (static_cast<std::uint32_t>(d * d) < d2) ++d;
  if (n == 0 || d < 2 || static_cast<std::uint32_t>(d * d) != d2) throw SnapshotFormatError("bad snapshot shape header");
  if (arith > 1 || basis > 1 || kind > 1) throw SnapshotFormatError("bad snapshot flag byte");
  StoredSnapshot out;
  out.kind = static_cast<StampKind>(kind);
  out.stamp = r.get<double>("stamp");
  const double log_scale = r.get<double>("log_scale");
  const auto centre = r.get<std::int32_t>("centre");
  std::vector<std::size_t> bonds(n + 1);
  for (auto& b : bonds) b = r.get<std::uint32_t>("bond extents");
  if (bonds.front() != 1 || bonds.back() != 1) throw SnapshotFormatError("outer bond extents must be 1");
  std::vector<DenseTensor> sites;
  for (std::uint32_t i = 0; i < n; ++i) {
    const Shape shape{bonds[i], d2, bonds[i + 1]};
    const std::size_t count = shape_size(shape);
    if (arith == 1) {
      std::vector<cplx> v(count);
      for (auto& x : v) {
        const double re = r.get<double>("tensor data");
        x = cplx(re, r.get<double>("tensor data"));
      }
      sites.emplace_back(shape, std::move(v));
    } else {
      std::vector<double> v(count);
      for (auto& x : v) x = r.get<double>("tensor data");
      sites.emplace_back(shape, std::move(v));
    }
  }
  if (!r.at_end()) throw SnapshotFormatError("trailing bytes after snapshot data");
  out.state = OperatorMps(d, basis == 1 ? BasisKind::real : BasisKind::hermitian, std::move(sites), log_scale);
  if (centre >= 0) {
    if (static_cast<std::uint32_t>(centre) >= n) throw SnapshotFormatError("centre outside the chain");
    out.state.set_center(static_cast<std::size_t>(centre));
  }
  return out;
}

void write_file_atomic(const fs::path& path, const std::string& bytes) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error(fmt::format("cannot write '{}'", tmp.string()));
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw std::runtime_error(fmt::format("write to '{}' failed", tmp.string()));
  }
  fs::rename(tmp, path);
}

void save_snapshot(const fs::path& path, const OperatorMps& state, StampKind kind, double stamp) {
  const auto bytes = encode_snapshot(state, kind, stamp);
  write_file_atomic(path, std::string(bytes.begin(), bytes.end()));
}

StoredSnapshot load_snapshot(const fs::path& path) {
  const std::string s = read_all(path);
  return decode_snapshot(std::vector<char>(s.begin(), s.end()));
}

std::string sha256_hex(const std::string& bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("sha256 failed");
  std::string out;
  for (unsigned i = 0; i < len; ++i) out += fmt::format("{:02x}", md[i]);
  return out;
}

std::string sha256_file(const fs::path& path) { return sha256_hex(read_all(path)); }

void write_manifest(const fs::path& path, const Manifest& m) {
  nlohmann::ordered_json j;
  j["leg"] = m.leg;
  if (!m.label.empty()) j["label"] = m.label;
  j["n"] = m.n;
  j["d"] = m.d;
  j["basis"] = basis_name(m.basis);
  j["model_signature"] = m.model_signature;
  if (!m.operator_signature.empty()) j["operator_signature"] = m.operator_signature;
  j["aborted"] = m.aborted;
  j["abort_reason"] = m.abort_reason;
  j["snapshots"] = nlohmann::ordered_json::array();
  for (const auto& e : m.snapshots) {
    nlohmann::ordered_json s;
    s["stamp"] = e.stamp;
    s["file"] = e.file;
    s["sha256"] = e.sha256;
    s["cum_discarded_weight"] = e.cum_discarded_weight;
    s["max_bond"] = e.max_bond;
    s["log_norm"] = e.log_norm;
    j["snapshots"].push_back(s);
  }
  write_file_atomic(path, j.dump(2) + "\n");
}

Manifest read_manifest(const fs::path& path) {
  if (!fs::exists(path)) throw IncompatibleInputs(fmt::format("missing manifest '{}'", path.string()));
  Manifest m;
  try {
    const auto j = nlohmann::json::parse(read_all(path));
    m.leg = j.at("leg").get<std::string>();
    m.label = j.value("label", "");
    m.n = j.at("n").get<std::size_t>();
    m.d = j.at("d").get<int>();
    m.basis = basis_from_name(j.at("basis").get<std::string>());
    m.model_signature = j.at("model_signature").get<std::string>();
    m.operator_signature = j.value("operator_signature", "");
    m.aborted = j.at("aborted").get<bool>();
    m.abort_reason = j.at("abort_reason").get<std::string>();
    for (const auto& s : j.at("snapshots")) {
      ManifestEntry e;
      e.stamp = s.at("stamp").get<double>();
      e.file = s.at("file").get<std::string>();
      e.sha256 = s.at("sha256").get<std::string>();
      e.cum_discarded_weight = s.at("cum_discarded_weight").get<double>();
      e.max_bond = s.at("max_bond").get<std::size_t>();
      e.log_norm = s.at("log_norm").get<double>();
      m.snapshots.push_back(std::move(e));
    }
  } catch (const nlohmann::json::exception& e) {
    throw SnapshotFormatError(fmt::format("malformed manifest '{}': {}", path.string(), e.what()));
  }
  return m;
}

std::vector<Snapshot> load_manifest_snapshots(const fs::path& dir, const Manifest& m) {
  std::vector<Snapshot> out;
  for (const auto& e : m.snapshots) {
    const fs::path p = dir / e.file;
    const std::string bytes = read_all(p);
    if (sha256_hex(bytes) != e.sha256)
      throw SnapshotFormatError(fmt::format("'{}' does not match the hash in its manifest", p.string()));
    StoredSnapshot s = decode_snapshot(std::vector<char>(bytes.begin(), bytes.end()));
    if (s.stamp != e.stamp)
      throw SnapshotFormatError(fmt::format("'{}' carries stamp {} but the manifest lists {}", p.string(), s.stamp, e.stamp));
    if (s.state.size() != m.n || s.state.d() != m.d || s.state.basis_kind() != m.basis)
      throw SnapshotFormatError(fmt::format("'{}' disagrees with its manifest header", p.string()));
    out.push_back(Snapshot{s.stamp, std::move(s.state), e.cum_discarded_weight});
  }
  return out;
}

}  // namespace opmps
