#include "opmps/ed.hpp"

#include <Eigen/Eigenvalues>
#include <unsupported/Eigen/KroneckerProduct>
#include <fmt/format.h>

#include <cmath>

namespace opmps {

namespace {

std::size_t ipow(std::size_t b, std::size_t e) {
  std::size_t r = 1;
  while (e--) r *= b;
  return r;
}

Matrix<cplx> eye(std::size_t dim) { return Matrix<cplx>::Identity(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim)); }

// Interleaved vectorization: local index i_k * d + j_k per site, site 0 most significant.
std::vector<cplx> interleave(const DenseOperator& x) {
  const std::size_t d = static_cast<std::size_t>(x.d), n = x.n, q = d * d;
  std::vector<cplx> v(ipow(q, n));
  const std::size_t dim = x.dim();
  for (std::size_t I = 0; I < dim; ++I)
    for (std::size_t J = 0; J < dim; ++J) {
      std::size_t idx = 0, ri = I, rj = J, place = 1;
      for (std::size_t k = 0; k < n; ++k) {  // from the least significant site
        idx += ((ri % d) * d + (rj % d)) * place;
        ri /= d;
        rj /= d;
        place *= q;
      }
      v[idx] = x.matrix(static_cast<Eigen::Index>(I), static_cast<Eigen::Index>(J));
    }
  return v;
}

DenseOperator deinterleave(const std::vector<cplx>& v, std::size_t n, int d_) {
  const std::size_t d = static_cast<std::size_t>(d_), q = d * d, dim = ipow(d, n);
  DenseOperator x{n, d_, Matrix<cplx>::Zero(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim))};
  for (std::size_t idx = 0; idx < v.size(); ++idx) {
    std::size_t I = 0, J = 0, r = idx, place = 1;
    for (std::size_t k = 0; k < n; ++k) {
      const std::size_t s = r % q;
      I += (s / d) * place;
      J += (s % d) * place;
      r /= q;
      place *= d;
    }
    x.matrix(static_cast<Eigen::Index>(I), static_cast<Eigen::Index>(J)) = v[idx];
  }
  return x;
}

// out[l, mu, r] = sum_s m(mu, s) v[l, s, r] on every site.
std::vector<cplx> apply_local_everywhere(std::vector<cplx> v, std::size_t n, const Matrix<cplx>& m) {
  const std::size_t q = static_cast<std::size_t>(m.rows());
  std::vector<cplx> out(v.size());
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t left = ipow(q, k), right = ipow(q, n - k - 1);
    for (std::size_t l = 0; l < left; ++l)
      for (std::size_t mu = 0; mu < q; ++mu)
        for (std::size_t r = 0; r < right; ++r) {
          cplx acc = 0.0;
          for (std::size_t s = 0; s < q; ++s)
            acc += m(static_cast<Eigen::Index>(mu), static_cast<Eigen::Index>(s)) * v[(l * q + s) * right + r];
          out[(l * q + mu) * right + r] = acc;
        }
    std::swap(v, out);
  }
  return v;
}

}  // namespace

void check_oracle_cap(std::size_t n) {
  if (n > kOracleSiteCap)
    throw OracleCapExceeded(fmt::format("dense oracle is limited to n <= {} sites, requested n = {}", kOracleSiteCap, n));
}

Matrix<cplx> embed(const Matrix<cplx>& op, std::size_t site, std::size_t n, int d) {
  if (site >= n) throw std::invalid_argument(fmt::format("embed: site {} outside chain of {}", site, n));
  const std::size_t dd = static_cast<std::size_t>(d);
  return Eigen::kroneckerProduct(Eigen::kroneckerProduct(eye(ipow(dd, site)), op).eval(), eye(ipow(dd, n - site - 1)))
      .eval();
}

Matrix<cplx> embed_bond(const Matrix<cplx>& op, std::size_t bond, std::size_t n, int d) {
  if (bond + 1 >= n) throw std::invalid_argument(fmt::format("embed_bond: bond {} outside chain of {}", bond, n));
  const std::size_t dd = static_cast<std::size_t>(d);
  return Eigen::kroneckerProduct(Eigen::kroneckerProduct(eye(ipow(dd, bond)), op).eval(), eye(ipow(dd, n - bond - 2)))
      .eval();
}

DenseOperator dense_hamiltonian(const HamiltonianTerms& h) {
  h.validate();
  check_oracle_cap(h.n);
  const auto dim = static_cast<Eigen::Index>(ipow(static_cast<std::size_t>(h.d), h.n));
  DenseOperator out{h.n, h.d, Matrix<cplx>::Zero(dim, dim)};
  for (const auto& t : h.one_site_terms) out.matrix += embed(t.op, t.site, h.n, h.d);
  for (const auto& t : h.two_site_terms) out.matrix += embed_bond(t.op, t.bond, h.n, h.d);
  const double asym = (out.matrix - out.matrix.adjoint()).cwiseAbs().maxCoeff();
  if (asym > 1e-12 * std::max(1.0, out.matrix.cwiseAbs().maxCoeff()))
    throw std::invalid_argument(fmt::format("dense_hamiltonian: terms are not hermitian (deviation {:.3e})", asym));
  return out;
}

DenseOperator dense_operator(const ProductOperator& p) {
  p.validate();
  check_oracle_cap(p.n);
  Matrix<cplx> m = Matrix<cplx>::Identity(1, 1);
  for (std::size_t s = 0; s < p.n; ++s) m = Eigen::kroneckerProduct(m, p.factor_at(s)).eval();
  return {p.n, p.d, p.coefficient * m};
}

DenseOperator dense_operator(const OperatorSum& s) {
  if (s.empty()) throw std::invalid_argument("dense_operator: empty operator sum");
  DenseOperator out = dense_operator(s.front());
  for (std::size_t k = 1; k < s.size(); ++k) {
    const auto term = dense_operator(s[k]);
    if (term.n != out.n || term.d != out.d) throw ShapeError("dense_operator: terms on different chains");
    out.matrix += term.matrix;
  }
  return out;
}

ThermalOracle::ThermalOracle(const DenseOperator& h) : n_(h.n), d_(h.d) {
  check_oracle_cap(h.n);
  Eigen::SelfAdjointEigenSolver<Matrix<cplx>> es(h.matrix);
  if (es.info() != Eigen::Success) throw std::runtime_error("ThermalOracle: eigendecomposition failed");
  v_ = es.eigenvectors();
  evals_ = es.eigenvalues();
  residual_ = (h.matrix * v_ - v_ * evals_.cast<cplx>().asDiagonal()).cwiseAbs().maxCoeff();
  if (residual_ > 1e-10 * std::max(1.0, h.matrix.cwiseAbs().maxCoeff()))
    throw std::runtime_error(fmt::format("ThermalOracle: eigendecomposition residual {:.3e} above 1e-10", residual_));
}

cplx ThermalOracle::correlate(const DenseOperator& a, const DenseOperator* b, bool b_left, double beta, double t) const {
  const auto dim = v_.rows();
  if (a.matrix.rows() != dim || (b && b->matrix.rows() != dim))
    throw ShapeError("ThermalOracle: operator dimension does not match the Hamiltonian");
  const Vector<double> shifted = evals_.array() - evals_.minCoeff();
  const Vector<double> w = (-beta * shifted.array()).exp();
  const double z = w.sum();
  const Matrix<cplx> ap = v_.adjoint() * a.matrix * v_;
  const cplx i(0.0, 1.0);
  cplx acc = 0.0;
  if (!b) {
    for (Eigen::Index m = 0; m < dim; ++m) acc += w(m) * ap(m, m);
    return acc / z;
  }
  const Matrix<cplx> bp = v_.adjoint() * b->matrix * v_;
  // a(t)'_{mn} = exp(i (l_m - l_n) t) a'_{mn}
  for (Eigen::Index m = 0; m < dim; ++m) {
    if (w(m) == 0.0) continue;
    cplx row = 0.0;
    for (Eigen::Index k = 0; k < dim; ++k) {
      if (b_left)  // (b a(t))_{mm} = b'_{mk} a(t)'_{km}
        row += bp(m, k) * ap(k, m) * std::exp(i * (evals_(k) - evals_(m)) * t);
      else  // (a(t) b)_{mm} = a(t)'_{mk} b'_{km}
        row += ap(m, k) * std::exp(i * (evals_(m) - evals_(k)) * t) * bp(k, m);
    }
    acc += w(m) * row;
  }
  return acc / z;
}

cplx ThermalOracle::expectation(const DenseOperator& a, const std::optional<DenseOperator>& b, double beta,
                                double t) const {
  return correlate(a, b ? &*b : nullptr, true, beta, t);
}

cplx ThermalOracle::expectation_right(const DenseOperator& a, const DenseOperator& b, double beta, double t) const {
  return correlate(a, &b, false, beta, t);
}

DenseOperator ThermalOracle::heisenberg(const DenseOperator& a, double t) const {
  const cplx i(0.0, 1.0);
  const Vector<cplx> ph = (i * t * evals_.cast<cplx>()).array().exp();
  const Matrix<cplx> u = v_ * ph.asDiagonal() * v_.adjoint();
  return {n_, d_, u * a.matrix * u.adjoint()};
}

DenseOperator ThermalOracle::boltzmann(double beta) const {
  const Vector<cplx> w = (-beta * evals_.array()).exp().cast<cplx>();
  return {n_, d_, v_ * w.asDiagonal() * v_.adjoint()};
}

cplx exact_thermal_expectation(const DenseOperator& h, const DenseOperator& a, const std::optional<DenseOperator>& b,
                               double beta, double t) {
  return ThermalOracle(h).expectation(a, b, beta, t);
}

double exact_osee(const DenseOperator& x, std::size_t bond) {
  check_oracle_cap(x.n);
  if (bond == 0 || bond >= x.n) throw std::invalid_argument(fmt::format("exact_osee: cut {} outside chain", bond));
  const auto v = interleave(x);
  const std::size_t q = static_cast<std::size_t>(x.d * x.d);
  const auto rows = static_cast<Eigen::Index>(ipow(q, bond));
  const auto cols = static_cast<Eigen::Index>(ipow(q, x.n - bond));
  const Eigen::Map<const Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> m(v.data(), rows, cols);
  const Vector<double> s = singular_values<cplx>(Matrix<cplx>(m));
  const double total = s.squaredNorm();
  if (total == 0.0) throw std::invalid_argument("exact_osee: zero operator");
  double h = 0.0;
  for (Eigen::Index k = 0; k < s.size(); ++k) {
    const double p = s(k) * s(k) / total;
    if (p > 0.0) h -= p * std::log2(p);
  }
  return std::max(0.0, h);
}

Vector<cplx> operator_coefficients(const DenseOperator& x, const LocalBasis& basis) {
  check_oracle_cap(x.n);
  if (basis.d != x.d) throw std::invalid_argument("operator_coefficients: basis d mismatch");
  const int d = x.d, q = d * d;
  Matrix<cplx> m(q, q);
  for (int mu = 0; mu < q; ++mu)
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) m(mu, i * d + j) = std::conj(basis[mu](i, j)) / static_cast<double>(d);
  const auto v = apply_local_everywhere(interleave(x), x.n, m);
  return Eigen::Map<const Vector<cplx>>(v.data(), static_cast<Eigen::Index>(v.size()));
}

DenseOperator operator_from_coefficients(const Vector<cplx>& c, std::size_t n, const LocalBasis& basis) {
  check_oracle_cap(n);
  const int d = basis.d, q = d * d;
  if (static_cast<std::size_t>(c.size()) != ipow(static_cast<std::size_t>(q), n))
    throw ShapeError("operator_from_coefficients: coefficient count does not match d^(2n)");
  Matrix<cplx> m(q, q);
  for (int mu = 0; mu < q; ++mu)
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) m(i * d + j, mu) = basis[mu](i, j);
  const auto v = apply_local_everywhere(std::vector<cplx>(c.data(), c.data() + c.size()), n, m);
  return deinterleave(v, n, d);
}

cplx free_fermion_green(const Matrix<double>& h, std::size_t site, double t) {
  if (h.rows() != h.cols() || site >= static_cast<std::size_t>(h.rows()))
    throw std::invalid_argument("free_fermion_green: bad hopping matrix or site");
  Eigen::SelfAdjointEigenSolver<Matrix<double>> es(h);
  const auto s = static_cast<Eigen::Index>(site);
  cplx acc = 0.0;
  for (Eigen::Index k = 0; k < h.rows(); ++k) {
    const double u = es.eigenvectors()(s, k);
    acc += u * u * std::exp(cplx(0.0, -es.eigenvalues()(k) * t));
  }
  return cplx(0.0, -1.0) * acc;
}

cplx exact_green(const ThermalOracle& oracle, const DenseOperator& f, double beta, double t) {
  const DenseOperator fd{f.n, f.d, f.matrix.adjoint()};
  return cplx(0.0, -1.0) * (oracle.expectation(f, fd, beta, t) + oracle.expectation_right(f, fd, beta, t));
}

}  // namespace opmps
