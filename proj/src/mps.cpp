#include "opmps/mps.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>

namespace opmps {

namespace {

using Index = Eigen::Index;

Index idx(std::size_t v) { return static_cast<Index>(v); }

template <class T>
Eigen::Map<const RowMatrix<T>> view(const DenseTensor& t, std::size_t rows, std::size_t cols) {
  return Eigen::Map<const RowMatrix<T>>(t.values<T>().data(), idx(rows), idx(cols));
}

template <class T>
DenseTensor site_tensor(const RowMatrix<T>& m, std::size_t left, std::size_t phys, std::size_t right) {
  return DenseTensor({left, phys, right}, std::vector<T>(m.data(), m.data() + m.size()));
}

template <class T>
DenseTensor site_tensor(const Matrix<T>& m, std::size_t left, std::size_t phys, std::size_t right) {
  return site_tensor<T>(RowMatrix<T>(m), left, phys, right);
}

void promote_together(DenseTensor& a, DenseTensor& b) {
  if (a.is_real() != b.is_real()) {
    a = a.as_complex();
    b = b.as_complex();
  }
}

// M (p x p) acting on the physical index of a (Dl, p, Dr) tensor.
template <class T>
RowMatrix<T> apply_physical(const Matrix<T>& m, const DenseTensor& a) {
  const std::size_t dl = a.extent(0), p = a.extent(1), dr = a.extent(2);
  RowMatrix<T> out(idx(dl * p), idx(dr));
  const T* src = a.values<T>().data();
  for (std::size_t l = 0; l < dl; ++l) {
    Eigen::Map<const RowMatrix<T>> slice(src + l * p * dr, idx(p), idx(dr));
    out.middleRows(idx(l * p), idx(p)) = m * slice;
  }
  return out;
}

void check_compatible(const OperatorMps& x, const OperatorMps& y, const char* who) {
  if (x.size() != y.size() || x.d() != y.d())
    throw ShapeError(fmt::format("{}: incompatible states (n={}, d={}) vs (n={}, d={})", who, x.size(), x.d(),
                                 y.size(), y.d()));
  if (x.basis_kind() != y.basis_kind())
    throw BasisMismatch(fmt::format("{}: basis mismatch ({} vs {}); transform one state first", who,
                                    to_string(x.basis_kind()), to_string(y.basis_kind())));
}

}  // namespace

cplx ratio(const ScaledValue& a, const ScaledValue& b) {
  if (b.mantissa == cplx(0.0)) throw std::domain_error("ratio: vanishing denominator");
  return a.mantissa / b.mantissa * std::exp(a.log_scale - b.log_scale);
}

OperatorMps::OperatorMps(int d, BasisKind basis_kind, std::vector<DenseTensor> sites, double log_scale)
    : d_(d), basis_kind_(basis_kind), sites_(std::move(sites)), log_scale_(log_scale) {
  if (sites_.empty()) throw ShapeError("OperatorMps: need at least one site");
  const auto p = static_cast<std::size_t>(d * d);
  for (std::size_t i = 0; i < sites_.size(); ++i) {
    const auto& t = sites_[i];
    if (t.rank() != 3 || t.extent(1) != p)
      throw ShapeError(fmt::format("OperatorMps: site {} has shape {}, expected (Dl, {}, Dr)", i,
                                   shape_string(t.shape()), p));
    if (i > 0 && sites_[i - 1].extent(2) != t.extent(0))
      throw ShapeError(fmt::format("OperatorMps: bond mismatch between sites {} and {}", i - 1, i));
  }
  if (sites_.front().extent(0) != 1 || sites_.back().extent(2) != 1)
    throw ShapeError("OperatorMps: boundary bonds must have extent 1");
  if (!std::isfinite(log_scale_)) throw std::domain_error("OperatorMps: log_scale must be finite");
}

Arithmetic OperatorMps::arithmetic() const {
  for (const auto& t : sites_)
    if (!t.is_real()) return Arithmetic::complex;
  return Arithmetic::real;
}

std::vector<std::size_t> OperatorMps::bond_dimensions() const {
  std::vector<std::size_t> b;
  b.reserve(sites_.size() + 1);
  b.push_back(sites_.front().extent(0));
  for (const auto& t : sites_) b.push_back(t.extent(2));
  return b;
}

std::size_t OperatorMps::max_bond_dimension() const {
  auto b = bond_dimensions();
  return *std::max_element(b.begin(), b.end());
}

void OperatorMps::move_center_right(std::size_t i) {
  promote_together(sites_[i], sites_[i + 1]);
  auto run = [&](auto tag) {
    using T = decltype(tag);
    const auto& a = sites_[i];
    const std::size_t dl = a.extent(0), p = a.extent(1), dr = a.extent(2);
    auto [q, r] = thin_qr<T>(Matrix<T>(view<T>(a, dl * p, dr)));
    const auto& b = sites_[i + 1];
    const std::size_t pb = b.extent(1), drb = b.extent(2);
    Matrix<T> nb = r * view<T>(b, dr, pb * drb);
    const auto k = static_cast<std::size_t>(q.cols());
    sites_[i] = site_tensor<T>(q, dl, p, k);
    sites_[i + 1] = site_tensor<T>(nb, k, pb, drb);
  };
  if (sites_[i].is_real())
    run(double{});
  else
    run(cplx{});
  center_ = i + 1;
}

void OperatorMps::move_center_left(std::size_t i) {
  promote_together(sites_[i - 1], sites_[i]);
  auto run = [&](auto tag) {
    using T = decltype(tag);
    const auto& a = sites_[i];
    const std::size_t dl = a.extent(0), p = a.extent(1), dr = a.extent(2);
    // a = L Q with orthonormal rows: a^dagger = Q' R.
    auto [q, r] = thin_qr<T>(Matrix<T>(view<T>(a, dl, p * dr).adjoint()));
    const auto k = static_cast<std::size_t>(q.cols());
    const auto& b = sites_[i - 1];
    const std::size_t dlb = b.extent(0), pb = b.extent(1);
    Matrix<T> nb = view<T>(b, dlb * pb, dl) * r.adjoint();
    sites_[i] = site_tensor<T>(Matrix<T>(q.adjoint()), k, p, dr);
    sites_[i - 1] = site_tensor<T>(nb, dlb, pb, k);
  };
  if (sites_[i].is_real())
    run(double{});
  else
    run(cplx{});
  center_ = i - 1;
}

void OperatorMps::normalize_center() {
  if (!center_) return;
  auto& t = sites_[*center_];
  const double nu = t.frobenius_norm();
  if (!(nu > 0.0) || !std::isfinite(nu)) return;
  if (t.is_real())
    for (auto& v : t.values<double>()) v /= nu;
  else
    for (auto& v : t.values<cplx>()) v /= nu;
  log_scale_ += std::log(nu);
}

void OperatorMps::canonicalize_in_place(std::size_t site) {
  if (site >= sites_.size()) throw std::out_of_range(fmt::format("canonicalize: site {} outside chain", site));
  if (!center_) {
    for (std::size_t i = 0; i < site; ++i) move_center_right(i);
    for (std::size_t i = sites_.size() - 1; i > site; --i) move_center_left(i);
  } else {
    while (*center_ < site) move_center_right(*center_);
    while (*center_ > site) move_center_left(*center_);
  }
  center_ = site;
  normalize_center();
}

double OperatorMps::apply_gate_in_place(std::size_t bond, const DenseTensor& gate, std::size_t max_rank,
                                        double weight_tol, Side absorb, bool* rank_capped) {
  if (bond + 1 >= sites_.size()) throw std::out_of_range(fmt::format("apply_two_site_gate: bond {} outside chain", bond));
  const auto p = static_cast<std::size_t>(phys_dim());
  if (gate.rank() != 2 || gate.extent(0) != p * p || gate.extent(1) != p * p)
    throw ShapeError(fmt::format("apply_two_site_gate: gate has shape {}, expected ({}, {})",
                                 shape_string(gate.shape()), p * p, p * p));
  if (!center_ || (*center_ != bond && *center_ != bond + 1))
    canonicalize_in_place(center_ && *center_ > bond + 1 ? bond + 1 : bond);

  promote_together(sites_[bond], sites_[bond + 1]);
  const bool real = sites_[bond].is_real() && gate.is_real();
  if (!real) {
    sites_[bond] = sites_[bond].as_complex();
    sites_[bond + 1] = sites_[bond + 1].as_complex();
  }

  double discarded = 0.0;
  auto run = [&](auto tag) {
    using T = decltype(tag);
    const auto& a = sites_[bond];
    const auto& b = sites_[bond + 1];
    const std::size_t dl = a.extent(0), dm = a.extent(2), dr = b.extent(2);
    RowMatrix<T> theta = view<T>(a, dl * p, dm) * view<T>(b, dm, p * dr);
    // theta is (dl, p*p, dr) in memory; apply the gate slice by slice.
    const DenseTensor g = gate.as<T>();
    Eigen::Map<const RowMatrix<T>> gm(g.values<T>().data(), idx(p * p), idx(p * p));
    Matrix<T> updated(idx(dl * p), idx(p * dr));
    {
      RowMatrix<T> tmp(idx(dl * p), idx(p * dr));
      for (std::size_t l = 0; l < dl; ++l) {
        Eigen::Map<const RowMatrix<T>> slice(theta.data() + l * p * p * dr, idx(p * p), idx(dr));
        Eigen::Map<RowMatrix<T>> out(tmp.data() + l * p * p * dr, idx(p * p), idx(dr));
        out.noalias() = gm * slice;
      }
      updated = tmp;
    }
    auto f = svd_truncate_matrix<T>(updated, max_rank, weight_tol);
    discarded = f.discarded_weight;
    if (rank_capped) *rank_capped = f.discarded_weight > weight_tol;
    const double kept = f.singular_values.norm();
    Vector<double> s = f.singular_values;
    if (kept > 0.0 && std::isfinite(kept)) {
      s /= kept;
      log_scale_ += std::log(kept);
    }
    const auto k = static_cast<std::size_t>(s.size());
    if (absorb == Side::right) {
      sites_[bond] = site_tensor<T>(f.left, dl, p, k);
      sites_[bond + 1] = site_tensor<T>(Matrix<T>(s.cast<T>().asDiagonal() * f.right), k, p, dr);
      center_ = bond + 1;
    } else {
      sites_[bond] = site_tensor<T>(Matrix<T>(f.left * s.cast<T>().asDiagonal()), dl, p, k);
      sites_[bond + 1] = site_tensor<T>(f.right, k, p, dr);
      center_ = bond;
    }
  };
  if (real)
    run(double{});
  else
    run(cplx{});
  return discarded;
}

std::vector<double> OperatorMps::schmidt_values_in_place(std::size_t cut) {
  if (cut == 0 || cut >= sites_.size())
    throw std::out_of_range(fmt::format("schmidt spectrum: cut {} must lie in [1, {}]", cut, sites_.size() - 1));
  canonicalize_in_place(cut);
  const auto& c = sites_[cut];
  const std::size_t dl = c.extent(0), p = c.extent(1), dr = c.extent(2);
  Vector<double> sv;
  if (c.is_real())
    sv = singular_values<double>(Matrix<double>(view<double>(c, dl, p * dr)));
  else
    sv = singular_values<cplx>(Matrix<cplx>(view<cplx>(c, dl, p * dr)));
  const double norm = sv.norm();
  std::vector<double> out(sv.data(), sv.data() + sv.size());
  if (norm > 0.0)
    for (auto& v : out) v /= norm;
  return out;
}

double OperatorMps::compress_in_place(std::size_t max_rank, double weight_tol) {
  const std::size_t n = sites_.size();
  canonicalize_in_place(n - 1);
  double total = 0.0;
  for (std::size_t i = n - 1; i > 0; --i) {
    promote_together(sites_[i - 1], sites_[i]);
    auto run = [&](auto tag) {
      using T = decltype(tag);
      const auto& a = sites_[i];
      const std::size_t dl = a.extent(0), p = a.extent(1), dr = a.extent(2);
      auto f = svd_truncate_matrix<T>(Matrix<T>(view<T>(a, dl, p * dr)), max_rank, weight_tol);
      total += f.discarded_weight;
      const auto k = static_cast<std::size_t>(f.singular_values.size());
      const auto& b = sites_[i - 1];
      const std::size_t dlb = b.extent(0), pb = b.extent(1);
      Matrix<T> nb = view<T>(b, dlb * pb, dl) * (f.left * f.singular_values.template cast<T>().asDiagonal());
      sites_[i] = site_tensor<T>(f.right, k, p, dr);
      sites_[i - 1] = site_tensor<T>(nb, dlb, pb, k);
    };
    if (sites_[i].is_real())
      run(double{});
    else
      run(cplx{});
    center_ = i - 1;
  }
  normalize_center();
  return total;
}

OperatorMps identity_state(std::size_t n, const LocalBasis& basis) {
  if (n == 0) throw std::invalid_argument("identity_state: need at least one site");
  const auto p = static_cast<std::size_t>(basis.size());
  std::vector<DenseTensor> sites;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> v(p, 0.0);
    v[0] = 1.0;
    sites.emplace_back(Shape{1, p, 1}, std::move(v));
  }
  return OperatorMps(basis.d, basis.kind, std::move(sites));
}

OperatorMps product_operator_state(std::size_t n, std::span<const std::pair<std::size_t, Matrix<cplx>>> factors,
                                   const LocalBasis& basis, const std::optional<StringOperator>& string) {
  if (n == 0) throw std::invalid_argument("product_operator_state: need at least one site");
  for (const auto& [site, op] : factors) {
    if (site >= n)
      throw std::invalid_argument(fmt::format("product_operator_state: factor on site {} outside chain of {}", site, n));
    if (op.rows() != basis.d || op.cols() != basis.d)
      throw ShapeError("product_operator_state: factor dimension does not match basis");
  }
  if (string && (string->first > string->last || string->last >= n))
    throw std::invalid_argument("product_operator_state: string range outside chain");

  const auto p = static_cast<std::size_t>(basis.size());
  std::vector<DenseTensor> sites;
  double log_scale = 0.0;
  for (std::size_t s = 0; s < n; ++s) {
    Matrix<cplx> op = Matrix<cplx>::Identity(basis.d, basis.d);
    if (string && s >= string->first && s <= string->last) op = string->op;
    for (const auto& [site, f] : factors)
      if (site == s) op = (op * f).eval();
    Vector<cplx> c = expand_local(op, basis);
    const double nu = c.norm();
    if (nu > 0.0) {
      c /= nu;
      log_scale += std::log(nu);
    }
    DenseTensor t(Shape{1, p, 1}, std::vector<cplx>(c.data(), c.data() + c.size()));
    sites.push_back(t.demoted_if_real(1e-14));
  }
  return OperatorMps(basis.d, basis.kind, std::move(sites), log_scale);
}

OperatorMps product_operator_state(const ProductOperator& p, const LocalBasis& basis) {
  p.validate();
  if (p.d != basis.d) throw ShapeError("product_operator_state: operator d does not match basis");
  auto state = product_operator_state(p.n, p.factors, basis);
  if (p.coefficient == cplx(1.0)) return state;
  const double mag = std::abs(p.coefficient);
  std::vector<DenseTensor> sites = state.sites();
  const cplx phase = mag > 0.0 ? p.coefficient / mag : cplx(0.0);
  if (phase.imag() == 0.0) {
    if (sites[0].is_real())
      for (auto& v : sites[0].values<double>()) v *= phase.real();
    else
      for (auto& v : sites[0].values<cplx>()) v *= phase.real();
  } else {
    sites[0] = sites[0].as_complex();
    for (auto& v : sites[0].values<cplx>()) v *= phase;
  }
  const double log_scale = state.log_scale() + (mag > 0.0 ? std::log(mag) : 0.0);
  return OperatorMps(p.d, basis.kind, std::move(sites), log_scale);
}

OperatorMps operator_sum_state(const OperatorSum& terms, const LocalBasis& basis, double weight_tol) {
  if (terms.empty()) throw std::invalid_argument("operator_sum_state: empty sum");
  OperatorMps acc = product_operator_state(terms.front(), basis);
  if (terms.size() == 1) return acc;
  for (std::size_t k = 1; k < terms.size(); ++k) acc = mps_add(acc, product_operator_state(terms[k], basis));
  acc.compress_in_place(std::numeric_limits<std::size_t>::max(), weight_tol);
  return acc;
}

namespace {

// Left environment sweep of <<x| M |y>> where `apply` optionally maps y's site tensors.
template <class T, class Apply>
T transfer(const OperatorMps& x, const OperatorMps& y, Apply&& apply) {
  RowMatrix<T> env = RowMatrix<T>::Ones(1, 1);
  const std::size_t p = static_cast<std::size_t>(x.phys_dim());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const DenseTensor ax = x.site(i).as<T>();
    const DenseTensor ay = apply(i, y.site(i).as<T>());
    const std::size_t dlx = ax.extent(0), drx = ax.extent(2), dly = ay.extent(0), dry = ay.extent(2);
    RowMatrix<T> t1 = env * view<T>(ay, dly, p * dry);  // (dlx, p*dry)
    Eigen::Map<const RowMatrix<T>> t1r(t1.data(), idx(dlx * p), idx(dry));
    env = view<T>(ax, dlx * p, drx).adjoint() * t1r;
  }
  return env(0, 0);
}

}  // namespace

ScaledValue inner_scaled(const OperatorMps& x, const OperatorMps& y) {
  check_compatible(x, y, "inner");
  auto identity = [](std::size_t, DenseTensor t) { return t; };
  ScaledValue v;
  v.log_scale = x.log_scale() + y.log_scale();
  if (x.is_real() && y.is_real())
    v.mantissa = transfer<double>(x, y, identity);
  else
    v.mantissa = transfer<cplx>(x, y, identity);
  return v;
}

cplx inner(const OperatorMps& x, const OperatorMps& y) { return inner_scaled(x, y).value(); }

ScaledValue sandwich_scaled(const OperatorMps& x, const MultiplicationMpo& mpo, const OperatorMps& y) {
  check_compatible(x, y, "sandwich");
  if (mpo.n != x.size() || mpo.d != x.d()) throw ShapeError("sandwich: MPO shape does not match states");
  if (mpo.basis_kind != y.basis_kind())
    throw BasisMismatch("sandwich: MPO basis does not match state basis; transform first");
  ScaledValue v;
  v.log_scale = x.log_scale() + y.log_scale();
  for (const auto& term : mpo.terms) {
    auto apply = [&](std::size_t i, DenseTensor t) {
      const std::size_t dl = t.extent(0), p = t.extent(1), dr = t.extent(2);
      RowMatrix<cplx> r = apply_physical<cplx>(term.blocks[i].complex_matrix(), t);
      return site_tensor<cplx>(r, dl, p, dr);
    };
    v.mantissa += term.coefficient * transfer<cplx>(x, y, apply);
  }
  return v;
}

std::pair<OperatorMps, double> apply_two_site_gate(OperatorMps state, std::size_t bond, const DenseTensor& gate,
                                                   std::size_t max_rank, double weight_tol) {
  const double w = state.apply_gate_in_place(bond, gate, max_rank, weight_tol);
  return {std::move(state), w};
}

OperatorMps canonicalize(OperatorMps state, std::size_t center) {
  state.canonicalize_in_place(center);
  return state;
}

SchmidtSpectrum schmidt_spectrum(const OperatorMps& state, std::size_t cut) {
  OperatorMps copy = state;
  return {cut, copy.schmidt_values_in_place(cut)};
}

double osee(const OperatorMps& state, std::size_t cut) {
  double s = 0.0;
  for (double l : schmidt_spectrum(state, cut).values) {
    const double w = l * l;
    if (w > 0.0) s -= w * std::log2(w);
  }
  return std::max(0.0, s);
}

OperatorMps transform_basis(const OperatorMps& state, const BasisTransform& transform) {
  if (transform.d != state.d()) throw ShapeError("transform_basis: transform dimension does not match state");
  if (transform.from != state.basis_kind())
    throw BasisMismatch(fmt::format("transform_basis: state is in the {} basis, transform starts from {}",
                                    to_string(state.basis_kind()), to_string(transform.from)));
  std::vector<DenseTensor> sites;
  sites.reserve(state.size());
  const bool real = state.is_real() && transform.is_real();
  for (const auto& t : state.sites()) {
    const std::size_t dl = t.extent(0), p = t.extent(1), dr = t.extent(2);
    if (real)
      sites.push_back(site_tensor<double>(apply_physical<double>(transform.matrix.real(), t), dl, p, dr));
    else
      sites.push_back(site_tensor<cplx>(apply_physical<cplx>(transform.matrix, t.as_complex()), dl, p, dr));
  }
  OperatorMps out(state.d(), transform.to, std::move(sites), state.log_scale());
  out.set_center(state.center());
  return out;
}

OperatorMps apply_mpo(const OperatorMps& state, const MultiplicationMpo& mpo) {
  if (mpo.n != state.size() || mpo.d != state.d()) throw ShapeError("apply_mpo: MPO shape does not match state");
  if (mpo.basis_kind != state.basis_kind()) throw BasisMismatch("apply_mpo: MPO basis does not match state basis");
  if (mpo.terms.empty()) throw std::invalid_argument("apply_mpo: empty MPO");
  std::optional<OperatorMps> acc;
  for (const auto& term : mpo.terms) {
    std::vector<DenseTensor> sites;
    sites.reserve(state.size());
    for (std::size_t i = 0; i < state.size(); ++i) {
      const auto& t = state.site(i);
      const auto& blk = term.blocks[i];
      const std::size_t dl = t.extent(0), p = t.extent(1), dr = t.extent(2);
      if (t.is_real() && blk.is_real())
        sites.push_back(site_tensor<double>(apply_physical<double>(blk.matrix<double>(), t), dl, p, dr));
      else
        sites.push_back(site_tensor<cplx>(apply_physical<cplx>(blk.complex_matrix(), t.as_complex()), dl, p, dr));
    }
    double log_scale = state.log_scale();
    const double mag = std::abs(term.coefficient);
    if (term.coefficient != cplx(1.0)) {
      const cplx phase = mag > 0.0 ? term.coefficient / mag : cplx(0.0);
      if (phase.imag() == 0.0 && sites[0].is_real()) {
        for (auto& v : sites[0].values<double>()) v *= phase.real();
      } else {
        sites[0] = sites[0].as_complex();
        for (auto& v : sites[0].values<cplx>()) v *= phase;
      }
      if (mag > 0.0) log_scale += std::log(mag);
    }
    OperatorMps mapped(state.d(), state.basis_kind(), std::move(sites), log_scale);
    acc = acc ? mps_add(*acc, mapped) : std::move(mapped);
  }
  return *acc;
}

OperatorMps mps_add(const OperatorMps& x, const OperatorMps& y) {
  check_compatible(x, y, "mps_add");
  const double common = std::max(x.log_scale(), y.log_scale());
  const double fx = std::exp(x.log_scale() - common), fy = std::exp(y.log_scale() - common);
  const bool real = x.is_real() && y.is_real();
  const std::size_t n = x.size();
  std::vector<DenseTensor> sites;
  sites.reserve(n);
  auto run = [&](auto tag) {
    using T = decltype(tag);
    for (std::size_t i = 0; i < n; ++i) {
      const DenseTensor a = x.site(i).as<T>();
      const DenseTensor b = y.site(i).as<T>();
      const std::size_t p = a.extent(1);
      const std::size_t al = a.extent(0), ar = a.extent(2), bl = b.extent(0), br = b.extent(2);
      const bool first = i == 0, last = i + 1 == n;
      const std::size_t dl = first ? 1 : al + bl;
      const std::size_t dr = last ? 1 : ar + br;
      std::vector<T> out(dl * p * dr, T{});
      auto va = a.values<T>();
      auto vb = b.values<T>();
      const T sa = first ? T(fx) : T(1.0);
      const T sb = first ? T(fy) : T(1.0);
      for (std::size_t l = 0; l < al; ++l)
        for (std::size_t s = 0; s < p; ++s)
          for (std::size_t r = 0; r < ar; ++r) out[(l * p + s) * dr + r] += sa * va[(l * p + s) * ar + r];
      const std::size_t ol = first ? 0 : al, orr = last ? 0 : ar;
      for (std::size_t l = 0; l < bl; ++l)
        for (std::size_t s = 0; s < p; ++s)
          for (std::size_t r = 0; r < br; ++r)
            out[((ol + l) * p + s) * dr + orr + r] += sb * vb[(l * p + s) * br + r];
      sites.emplace_back(Shape{dl, p, dr}, std::move(out));
    }
  };
  if (real)
    run(double{});
  else
    run(cplx{});
  return OperatorMps(x.d(), x.basis_kind(), std::move(sites), common);
}

OperatorMps compress(OperatorMps state, std::size_t max_rank, double weight_tol, double* discarded) {
  const double w = state.compress_in_place(max_rank, weight_tol);
  if (discarded) *discarded = w;
  return state;
}

Vector<cplx> to_dense_coefficients(const OperatorMps& state) {
  const std::size_t p = static_cast<std::size_t>(state.phys_dim());
  RowMatrix<cplx> acc = RowMatrix<cplx>::Ones(1, 1);
  std::size_t rows = 1;
  for (const auto& t : state.sites()) {
    const DenseTensor c = t.as_complex();
    const std::size_t dl = c.extent(0), dr = c.extent(2);
    RowMatrix<cplx> next = acc * view<cplx>(c, dl, p * dr);
    rows *= p;
    acc = Eigen::Map<const RowMatrix<cplx>>(next.data(), idx(rows), idx(dr));
  }
  return Vector<cplx>(acc.col(0)) * std::exp(state.log_scale());
}

}  // namespace opmps
