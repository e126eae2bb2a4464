#include "opmps/basis.hpp"

#include <unsupported/Eigen/KroneckerProduct>
#include <fmt/format.h>

#include <cmath>

namespace opmps {

const char* to_string(BasisKind kind) { return kind == BasisKind::hermitian ? "hermitian" : "real"; }

BasisKind basis_kind_from_string(const std::string& s) {
  if (s == "hermitian") return BasisKind::hermitian;
  if (s == "real") return BasisKind::real;
  throw std::invalid_argument("unknown basis kind '" + s + "'");
}

namespace pauli {
Matrix<cplx> identity() { return Matrix<cplx>::Identity(2, 2); }
Matrix<cplx> x() {
  Matrix<cplx> m(2, 2);
  m << 0, 1, 1, 0;
  return m;
}
Matrix<cplx> y() {
  Matrix<cplx> m(2, 2);
  m << 0, cplx(0, -1), cplx(0, 1), 0;
  return m;
}
Matrix<cplx> z() {
  Matrix<cplx> m(2, 2);
  m << 1, 0, 0, -1;
  return m;
}
Matrix<cplx> plus() { return 0.5 * (x() + cplx(0, 1) * y()); }
Matrix<cplx> minus() { return 0.5 * (x() - cplx(0, 1) * y()); }
}  // namespace pauli

namespace {

std::vector<Matrix<cplx>> hermitian_elements(int d) {
  switch (d) {
    case 2:
      return {pauli::identity(), pauli::x(), pauli::y(), pauli::z()};
    case 3: {
      // Gell-Mann matrices scaled by sqrt(3/2) so that d^-1 tr(g^2) = 1.
      const cplx i(0, 1);
      std::vector<Matrix<cplx>> g(9, Matrix<cplx>::Zero(3, 3));
      g[0] = Matrix<cplx>::Identity(3, 3);
      g[1](0, 1) = g[1](1, 0) = 1;
      g[2](0, 1) = -i;
      g[2](1, 0) = i;
      g[3](0, 0) = 1;
      g[3](1, 1) = -1;
      g[4](0, 2) = g[4](2, 0) = 1;
      g[5](0, 2) = -i;
      g[5](2, 0) = i;
      g[6](1, 2) = g[6](2, 1) = 1;
      g[7](1, 2) = -i;
      g[7](2, 1) = i;
      g[8](0, 0) = g[8](1, 1) = 1.0 / std::sqrt(3.0);
      g[8](2, 2) = -2.0 / std::sqrt(3.0);
      const double c = std::sqrt(1.5);
      for (int k = 1; k < 9; ++k) g[static_cast<std::size_t>(k)] *= c;
      return g;
    }
    case 4: {
      const std::vector<Matrix<cplx>> s = {pauli::identity(), pauli::x(), pauli::y(), pauli::z()};
      std::vector<Matrix<cplx>> out;
      for (const auto& a : s)
        for (const auto& b : s) out.push_back(Eigen::kroneckerProduct(a, b).eval());
      return out;
    }
    default:
      throw UnsupportedDimension(fmt::format("make_basis: unsupported local dimension d={} (supported: 2, 3, 4)", d));
  }
}

}  // namespace

LocalBasis make_basis(int d, BasisKind kind) {
  LocalBasis basis{d, kind, hermitian_elements(d)};
  if (kind == BasisKind::real) {
    // Purely imaginary hermitian elements are antisymmetric; -i times them is real.
    for (auto& p : basis.elements)
      if (p.real().cwiseAbs().maxCoeff() == 0.0) p = (cplx(0, -1) * p).eval();
  }
  return basis;
}

BasisTransform change_of_basis(const LocalBasis& from, const LocalBasis& to) {
  if (from.d != to.d)
    throw ShapeError(fmt::format("change_of_basis: dimension mismatch d={} vs d={}", from.d, to.d));
  const int n = from.size();
  BasisTransform t{from.d, from.kind, to.kind, Matrix<cplx>(n, n)};
  for (int mu = 0; mu < n; ++mu)
    for (int nu = 0; nu < n; ++nu) t.matrix(mu, nu) = (to[mu].adjoint() * from[nu]).trace() / double(from.d);
  // Entries are traces of products of 0/±1/±i matrices for d = 2, 4; clean rounding noise.
  for (Eigen::Index k = 0; k < t.matrix.size(); ++k) {
    cplx& z = t.matrix.data()[k];
    if (std::abs(z.real()) < 1e-15) z.real(0.0);
    if (std::abs(z.imag()) < 1e-15) z.imag(0.0);
  }
  return t;
}

Vector<cplx> expand_local(const Matrix<cplx>& op, const LocalBasis& basis) {
  if (op.rows() != basis.d || op.cols() != basis.d)
    throw ShapeError(fmt::format("expand_local: operator is {}x{}, basis has d={}", op.rows(), op.cols(), basis.d));
  Vector<cplx> c(basis.size());
  for (int nu = 0; nu < basis.size(); ++nu) c(nu) = (basis[nu].adjoint() * op).trace() / double(basis.d);
  return c;
}

Matrix<cplx> reconstruct_local(const Vector<cplx>& coefficients, const LocalBasis& basis) {
  if (coefficients.size() != basis.size()) throw ShapeError("reconstruct_local: coefficient count mismatch");
  Matrix<cplx> op = Matrix<cplx>::Zero(basis.d, basis.d);
  for (int nu = 0; nu < basis.size(); ++nu) op += coefficients(nu) * basis[nu];
  return op;
}

}  // namespace opmps
