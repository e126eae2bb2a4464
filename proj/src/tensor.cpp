#include "opmps/tensor.hpp"

#include <fmt/format.h>

#include <unsupported/Eigen/MatrixFunctions>

#include <complex>
#define lapack_complex_float std::complex<float>
#define lapack_complex_double std::complex<double>
#include <lapacke.h>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace opmps {

std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& shape) { return fmt::format("({})", fmt::join(shape, ", ")); }

namespace {

void check_extents(const Shape& shape) {
  for (auto e : shape)
    if (e == 0) throw ShapeError("DenseTensor: extents must be positive, got " + shape_string(shape));
}

template <class T>
std::vector<std::size_t> strides_of(const Shape& shape) {
  std::vector<std::size_t> strides(shape.size(), 1);
  for (std::size_t k = shape.size(); k-- > 1;) strides[k - 1] = strides[k] * shape[k];
  return strides;
}

template <class T>
std::vector<T> permute_values(std::span<const T> in, const Shape& shape, std::span<const std::size_t> order) {
  const std::size_t rank = shape.size();
  Shape out_shape(rank);
  for (std::size_t k = 0; k < rank; ++k) out_shape[k] = shape[order[k]];
  auto in_strides = strides_of<T>(shape);
  std::vector<std::size_t> gather(rank);
  for (std::size_t k = 0; k < rank; ++k) gather[k] = in_strides[order[k]];

  std::vector<T> out(in.size());
  std::vector<std::size_t> idx(rank, 0);
  std::size_t src = 0;
  for (std::size_t dst = 0; dst < out.size(); ++dst) {
    out[dst] = in[src];
    for (std::size_t k = rank; k-- > 0;) {
      ++idx[k];
      src += gather[k];
      if (idx[k] < out_shape[k]) break;
      src -= gather[k] * idx[k];
      idx[k] = 0;
    }
  }
  return out;
}

}  // namespace

DenseTensor::DenseTensor(Shape shape, Arithmetic arithmetic) : shape_(std::move(shape)) {
  check_extents(shape_);
  const auto n = shape_size(shape_);
  if (arithmetic == Arithmetic::real)
    data_ = std::vector<double>(n, 0.0);
  else
    data_ = std::vector<cplx>(n, cplx{});
}

DenseTensor::DenseTensor(Shape shape, std::vector<double> values) : shape_(std::move(shape)), data_(std::move(values)) {
  check_extents(shape_);
  if (std::get<0>(data_).size() != shape_size(shape_))
    throw ShapeError("DenseTensor: element count does not match shape " + shape_string(shape_));
}

DenseTensor::DenseTensor(Shape shape, std::vector<cplx> values) : shape_(std::move(shape)), data_(std::move(values)) {
  check_extents(shape_);
  if (std::get<1>(data_).size() != shape_size(shape_))
    throw ShapeError("DenseTensor: element count does not match shape " + shape_string(shape_));
}

DenseTensor DenseTensor::identity(std::size_t n, Arithmetic arithmetic) {
  DenseTensor t({n, n}, arithmetic);
  for (std::size_t i = 0; i < n; ++i) {
    if (arithmetic == Arithmetic::real)
      t.values<double>()[i * n + i] = 1.0;
    else
      t.values<cplx>()[i * n + i] = 1.0;
  }
  return t;
}

DenseTensor DenseTensor::from_matrix(const Matrix<double>& m) {
  RowMatrix<double> r = m;
  return DenseTensor({static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols())},
                     std::vector<double>(r.data(), r.data() + r.size()));
}

DenseTensor DenseTensor::from_matrix(const Matrix<cplx>& m) {
  RowMatrix<cplx> r = m;
  return DenseTensor({static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols())},
                     std::vector<cplx>(r.data(), r.data() + r.size()));
}

std::size_t DenseTensor::extent(std::size_t axis) const {
  if (axis >= shape_.size()) throw ShapeError(fmt::format("DenseTensor: axis {} out of range for rank {}", axis, rank()));
  return shape_[axis];
}

std::size_t DenseTensor::size() const { return shape_size(shape_); }

cplx DenseTensor::at(std::span<const std::size_t> index) const {
  if (index.size() != rank()) throw ShapeError("DenseTensor::at: index rank mismatch");
  std::size_t offset = 0;
  for (std::size_t k = 0; k < rank(); ++k) {
    if (index[k] >= shape_[k]) throw ShapeError("DenseTensor::at: index out of range");
    offset = offset * shape_[k] + index[k];
  }
  return is_real() ? cplx(std::get<0>(data_)[offset]) : std::get<1>(data_)[offset];
}

DenseTensor DenseTensor::as_complex() const {
  if (!is_real()) return *this;
  const auto& v = std::get<0>(data_);
  return DenseTensor(shape_, std::vector<cplx>(v.begin(), v.end()));
}

DenseTensor DenseTensor::demoted_if_real(double tol) const {
  if (is_real() || max_abs_imag() > tol) return *this;
  const auto& v = std::get<1>(data_);
  std::vector<double> re(v.size());
  std::transform(v.begin(), v.end(), re.begin(), [](cplx z) { return z.real(); });
  return DenseTensor(shape_, std::move(re));
}

DenseTensor DenseTensor::reshaped(Shape shape) const& {
  DenseTensor copy = *this;
  return std::move(copy).reshaped(std::move(shape));
}

DenseTensor DenseTensor::reshaped(Shape shape) && {
  check_extents(shape);
  if (shape_size(shape) != size())
    throw ShapeError(fmt::format("DenseTensor: cannot reshape {} to {}", shape_string(shape_), shape_string(shape)));
  shape_ = std::move(shape);
  return std::move(*this);
}

DenseTensor DenseTensor::permuted(std::span<const std::size_t> order) const {
  if (order.size() != rank()) throw ShapeError("DenseTensor::permuted: order rank mismatch");
  std::vector<bool> seen(rank(), false);
  for (auto a : order) {
    if (a >= rank() || seen[a]) throw ShapeError("DenseTensor::permuted: order is not a permutation");
    seen[a] = true;
  }
  Shape out_shape(rank());
  for (std::size_t k = 0; k < rank(); ++k) out_shape[k] = shape_[order[k]];
  if (is_real()) return DenseTensor(out_shape, permute_values<double>(values<double>(), shape_, order));
  return DenseTensor(out_shape, permute_values<cplx>(values<cplx>(), shape_, order));
}

DenseTensor DenseTensor::conj() const {
  if (is_real()) return *this;
  auto v = std::get<1>(data_);
  for (auto& z : v) z = std::conj(z);
  return DenseTensor(shape_, std::move(v));
}

double DenseTensor::max_abs_imag() const {
  if (is_real()) return 0.0;
  double m = 0.0;
  for (auto z : std::get<1>(data_)) m = std::max(m, std::abs(z.imag()));
  return m;
}

double DenseTensor::frobenius_norm() const {
  double s = 0.0;
  if (is_real())
    for (auto x : std::get<0>(data_)) s += x * x;
  else
    for (auto z : std::get<1>(data_)) s += std::norm(z);
  return std::sqrt(s);
}

template <class T>
Matrix<T> DenseTensor::matrix() const {
  if (rank() != 2) throw ShapeError("DenseTensor::matrix: tensor is not rank-2 " + shape_string(shape_));
  auto v = values<T>();
  return Eigen::Map<const RowMatrix<T>>(v.data(), static_cast<Eigen::Index>(shape_[0]),
                                        static_cast<Eigen::Index>(shape_[1]));
}
template Matrix<double> DenseTensor::matrix<double>() const;
template Matrix<cplx> DenseTensor::matrix<cplx>() const;

Matrix<cplx> DenseTensor::complex_matrix() const {
  if (is_real()) return matrix<double>().cast<cplx>();
  return matrix<cplx>();
}

namespace {

template <class T>
DenseTensor contract_impl(const DenseTensor& a, const DenseTensor& b, std::span<const AxisPair> pairs) {
  std::vector<bool> a_paired(a.rank(), false), b_paired(b.rank(), false);
  std::vector<std::size_t> a_order, b_order;
  Shape out_shape;
  std::size_t inner = 1;
  for (auto [ia, ib] : pairs) {
    if (ia >= a.rank() || ib >= b.rank())
      throw ShapeError(fmt::format("contract: axis pair ({}, {}) out of range", ia, ib));
    if (a_paired[ia] || b_paired[ib]) throw ShapeError("contract: axis paired twice");
    if (a.extent(ia) != b.extent(ib))
      throw ShapeError(fmt::format("contract: extent mismatch {} vs {} on pair ({}, {})", a.extent(ia), b.extent(ib),
                                   ia, ib));
    a_paired[ia] = b_paired[ib] = true;
    inner *= a.extent(ia);
  }
  std::size_t a_free = 1, b_free = 1;
  for (std::size_t k = 0; k < a.rank(); ++k)
    if (!a_paired[k]) {
      a_order.push_back(k);
      out_shape.push_back(a.extent(k));
      a_free *= a.extent(k);
    }
  for (auto [ia, ib] : pairs) {
    a_order.push_back(ia);
    b_order.push_back(ib);
  }
  for (std::size_t k = 0; k < b.rank(); ++k)
    if (!b_paired[k]) {
      b_order.push_back(k);
      out_shape.push_back(b.extent(k));
      b_free *= b.extent(k);
    }

  const DenseTensor ap = a.as<T>().permuted(a_order);
  const DenseTensor bp = b.as<T>().permuted(b_order);
  auto av = ap.values<T>();
  auto bv = bp.values<T>();
  using M = RowMatrix<T>;
  Eigen::Map<const M> am(av.data(), static_cast<Eigen::Index>(a_free), static_cast<Eigen::Index>(inner));
  Eigen::Map<const M> bm(bv.data(), static_cast<Eigen::Index>(inner), static_cast<Eigen::Index>(b_free));
  M r = am * bm;
  if (out_shape.empty()) out_shape.push_back(1);
  return DenseTensor(std::move(out_shape), std::vector<T>(r.data(), r.data() + r.size()));
}

}  // namespace

DenseTensor contract(const DenseTensor& a, const DenseTensor& b, std::span<const AxisPair> paired_axes) {
  if (a.is_real() && b.is_real()) return contract_impl<double>(a, b, paired_axes);
  return contract_impl<cplx>(a, b, paired_axes);
}

DenseTensor matmul(const DenseTensor& a, const DenseTensor& b) {
  if (a.rank() != 2 || b.rank() != 2) throw ShapeError("matmul: operands must be rank-2");
  return contract(a, b, {{1, 0}});
}

std::size_t truncation_rank(std::span<const double> s, std::size_t max_rank, double weight_tol,
                            double* discarded_weight) {
  if (max_rank == 0) throw std::invalid_argument("truncation_rank: max_rank must be positive");
  if (weight_tol < 0.0) throw std::invalid_argument("truncation_rank: weight_tol must be nonnegative");
  const std::size_t full = s.size();
  double total = 0.0;
  for (auto x : s) total += x * x;
  if (full == 0) {
    if (discarded_weight) *discarded_weight = 0.0;
    return 0;
  }
  if (total == 0.0) {
    if (discarded_weight) *discarded_weight = 0.0;
    return 1;
  }
  // tail[k] = sum_{i >= k} s_i^2
  std::vector<double> tail(full + 1, 0.0);
  for (std::size_t i = full; i-- > 0;) tail[i] = tail[i + 1] + s[i] * s[i];
  std::size_t k = 1;
  while (k < full && tail[k] / total > weight_tol) ++k;
  k = std::min(k, max_rank);
  const double floor = kDegeneracyTol * s[0];
  while (k < full && s[k - 1] > floor && s[k - 1] - s[k] <= floor) ++k;
  if (discarded_weight) *discarded_weight = std::clamp(tail[k] / total, 0.0, 1.0);
  return k;
}

namespace {

// Thin SVD through LAPACK: divide and conquer first, QR iteration if that fails to converge.
template <class T>
struct RawSvd {
  Matrix<T> u;
  Vector<double> s;
  Matrix<T> vt;
};

lapack_int lapack_gesdd(char jobz, Matrix<double>& a, Vector<double>& s, Matrix<double>& u, Matrix<double>& vt) {
  return LAPACKE_dgesdd(LAPACK_COL_MAJOR, jobz, a.rows(), a.cols(), a.data(), a.rows(), s.data(), u.data(),
                        std::max<lapack_int>(1, u.rows()), vt.data(), std::max<lapack_int>(1, vt.rows()));
}
lapack_int lapack_gesdd(char jobz, Matrix<cplx>& a, Vector<double>& s, Matrix<cplx>& u, Matrix<cplx>& vt) {
  return LAPACKE_zgesdd(LAPACK_COL_MAJOR, jobz, a.rows(), a.cols(), a.data(), a.rows(), s.data(), u.data(),
                        std::max<lapack_int>(1, u.rows()), vt.data(), std::max<lapack_int>(1, vt.rows()));
}
lapack_int lapack_gesvd(char job, Matrix<double>& a, Vector<double>& s, Matrix<double>& u, Matrix<double>& vt) {
  std::vector<double> superb(static_cast<std::size_t>(std::max<Eigen::Index>(1, s.size())));
  return LAPACKE_dgesvd(LAPACK_COL_MAJOR, job, job, a.rows(), a.cols(), a.data(), a.rows(), s.data(), u.data(),
                        std::max<lapack_int>(1, u.rows()), vt.data(), std::max<lapack_int>(1, vt.rows()),
                        superb.data());
}
lapack_int lapack_gesvd(char job, Matrix<cplx>& a, Vector<double>& s, Matrix<cplx>& u, Matrix<cplx>& vt) {
  std::vector<double> superb(static_cast<std::size_t>(std::max<Eigen::Index>(1, s.size())));
  return LAPACKE_zgesvd(LAPACK_COL_MAJOR, job, job, a.rows(), a.cols(), a.data(), a.rows(), s.data(), u.data(),
                        std::max<lapack_int>(1, u.rows()), vt.data(), std::max<lapack_int>(1, vt.rows()),
                        superb.data());
}

template <class T>
RawSvd<T> lapack_svd(const Matrix<T>& m, bool vectors) {
  if (!m.allFinite())
    throw SvdError(fmt::format("svd: {}x{} input contains non-finite entries", m.rows(), m.cols()));
  const Eigen::Index k = std::min(m.rows(), m.cols());
  RawSvd<T> r;
  r.s.resize(k);
  if (vectors) {
    r.u.resize(m.rows(), k);
    r.vt.resize(k, m.cols());
  } else {
    r.u.resize(1, 1);
    r.vt.resize(1, 1);
  }
  Matrix<T> a = m;
  lapack_int info = lapack_gesdd(vectors ? 'S' : 'N', a, r.s, r.u, r.vt);
  if (info > 0) {
    a = m;
    info = lapack_gesvd(vectors ? 'S' : 'N', a, r.s, r.u, r.vt);
  }
  if (info != 0)
    throw SvdError(fmt::format("svd: LAPACK did not converge on {}x{} matrix (info {}, frobenius norm {:.6g}, "
                               "largest singular value estimate {:.6g})",
                               m.rows(), m.cols(), info, m.norm(), r.s.size() > 0 ? r.s(0) : 0.0));
  return r;
}

}  // namespace

template <class T>
Vector<double> singular_values(const Matrix<T>& m) {
  return lapack_svd<T>(m, false).s;
}
template Vector<double> singular_values(const Matrix<double>&);
template Vector<double> singular_values(const Matrix<cplx>&);

template <class T>
MatrixFactorization<T> svd_truncate_matrix(const Matrix<T>& m, std::size_t max_rank, double weight_tol) {
  RawSvd<T> svd = lapack_svd<T>(m, true);
  const Vector<double>& sv = svd.s;
  std::span<const double> s(sv.data(), static_cast<std::size_t>(sv.size()));
  MatrixFactorization<T> out;
  const auto k = static_cast<Eigen::Index>(truncation_rank(s, max_rank, weight_tol, &out.discarded_weight));
  out.total_weight = sv.squaredNorm();
  out.left = svd.u.leftCols(k);
  out.singular_values = sv.head(k);
  out.right = svd.vt.topRows(k);
  return out;
}
template MatrixFactorization<double> svd_truncate_matrix(const Matrix<double>&, std::size_t, double);
template MatrixFactorization<cplx> svd_truncate_matrix(const Matrix<cplx>&, std::size_t, double);

TruncatedFactorization svd_truncate(const DenseTensor& m, std::size_t max_rank, double weight_tol) {
  if (m.rank() != 2) throw ShapeError("svd_truncate: input must be rank-2, got " + shape_string(m.shape()));
  auto pack = [](auto&& f) {
    TruncatedFactorization t;
    t.left_factor = DenseTensor::from_matrix(f.left);
    t.right_factor = DenseTensor::from_matrix(f.right);
    t.singular_values.assign(f.singular_values.data(), f.singular_values.data() + f.singular_values.size());
    t.discarded_weight = f.discarded_weight;
    return t;
  };
  if (m.is_real()) return pack(svd_truncate_matrix<double>(m.matrix<double>(), max_rank, weight_tol));
  return pack(svd_truncate_matrix<cplx>(m.matrix<cplx>(), max_rank, weight_tol));
}

template <class T>
std::pair<Matrix<T>, Matrix<T>> thin_qr(const Matrix<T>& m) {
  const Eigen::Index k = std::min(m.rows(), m.cols());
  Eigen::HouseholderQR<Matrix<T>> qr(m);
  Matrix<T> q = qr.householderQ() * Matrix<T>::Identity(m.rows(), k);
  Matrix<T> r = qr.matrixQR().topRows(k).template triangularView<Eigen::Upper>();
  for (Eigen::Index i = 0; i < k; ++i) {
    const T d = r(i, i);
    const double a = std::abs(d);
    if (a == 0.0) continue;
    const T phase = d / a;
    r.row(i) /= phase;
    q.col(i) *= phase;
  }
  return {std::move(q), std::move(r)};
}
template std::pair<Matrix<double>, Matrix<double>> thin_qr(const Matrix<double>&);
template std::pair<Matrix<cplx>, Matrix<cplx>> thin_qr(const Matrix<cplx>&);

OrthogonalFactorization orthogonal_factor(const DenseTensor& m, Side side) {
  if (m.rank() != 2) throw ShapeError("orthogonal_factor: input must be rank-2, got " + shape_string(m.shape()));
  auto run = [&](auto tag) -> OrthogonalFactorization {
    using T = decltype(tag);
    const Matrix<T> a = m.matrix<T>();
    if (side == Side::left) {
      auto [q, r] = thin_qr<T>(a);
      return {DenseTensor::from_matrix(q), DenseTensor::from_matrix(r)};
    }
    // m = L Q with Q having orthonormal rows: m^dagger = Q' R, L = R^dagger, Q = Q'^dagger.
    auto [q, r] = thin_qr<T>(a.adjoint());
    return {DenseTensor::from_matrix(Matrix<T>(q.adjoint())), DenseTensor::from_matrix(Matrix<T>(r.adjoint()))};
  };
  if (m.is_real()) return run(double{});
  return run(cplx{});
}

namespace {

constexpr double kSymmetryTol = 1e-12;

template <class T>
DenseTensor checked(Matrix<T> r) {
  if (!r.allFinite()) throw NumericalOverflow("matrix_exp: result overflowed (scale too large for generator)");
  return DenseTensor::from_matrix(r);
}

Matrix<cplx> exp_hermitian(const Matrix<cplx>& h, cplx scale) {
  Eigen::SelfAdjointEigenSolver<Matrix<cplx>> es(h);
  if (es.info() != Eigen::Success) throw std::runtime_error("matrix_exp: eigendecomposition failed");
  Vector<cplx> f = (scale * es.eigenvalues().cast<cplx>()).array().exp();
  return es.eigenvectors() * f.asDiagonal() * es.eigenvectors().adjoint();
}

}  // namespace

DenseTensor matrix_exp(const DenseTensor& g, double scale) {
  if (g.rank() != 2 || g.extent(0) != g.extent(1))
    throw ShapeError("matrix_exp: generator must be square, got " + shape_string(g.shape()));
  if (!g.is_real()) return matrix_exp(g, cplx(scale));
  const Matrix<double> m = g.matrix<double>();
  const double norm = std::max(1.0, m.norm());
  if ((m - m.transpose()).norm() <= kSymmetryTol * norm) {
    Eigen::SelfAdjointEigenSolver<Matrix<double>> es(0.5 * (m + m.transpose()));
    if (es.info() != Eigen::Success) throw std::runtime_error("matrix_exp: eigendecomposition failed");
    Vector<double> f = (scale * es.eigenvalues()).array().exp();
    return checked<double>(es.eigenvectors() * f.asDiagonal() * es.eigenvectors().transpose());
  }
  if ((m + m.transpose()).norm() <= kSymmetryTol * norm) {
    // i*m is hermitian; exp(scale*m) = exp(-i*scale*(i*m)) is real orthogonal.
    const Matrix<cplx> h = cplx(0, 1) * (0.5 * (m - m.transpose())).cast<cplx>();
    return checked<double>(exp_hermitian(h, cplx(0, -scale)).real());
  }
  return checked<double>((scale * m).exp());
}

DenseTensor matrix_exp(const DenseTensor& g, cplx scale) {
  if (g.rank() != 2 || g.extent(0) != g.extent(1))
    throw ShapeError("matrix_exp: generator must be square, got " + shape_string(g.shape()));
  if (g.is_real() && scale.imag() == 0.0) return matrix_exp(g, scale.real());
  const Matrix<cplx> m = g.complex_matrix();
  const double norm = std::max(1.0, m.norm());
  if ((m - m.adjoint()).norm() <= kSymmetryTol * norm)
    return checked<cplx>(exp_hermitian(0.5 * (m + m.adjoint()), scale));
  if ((m + m.adjoint()).norm() <= kSymmetryTol * norm)
    return checked<cplx>(exp_hermitian(cplx(0, 1) * 0.5 * (m - m.adjoint()), cplx(0, -1) * scale));
  return checked<cplx>((scale * m).exp());
}

}  // namespace opmps
