#pragma once

// Orthonormal local operator bases under <a|b> = d^-1 tr(a^dagger b).
//
// Element 0 is always the identity. For d = 2 the hermitian basis is
// {1, sx, sy, sz} and the real basis is {1, sx, -i sy, sz}.

#include "opmps/tensor.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace opmps {

enum class BasisKind : std::uint8_t { hermitian = 0, real = 1 };

const char* to_string(BasisKind kind);
BasisKind basis_kind_from_string(const std::string& s);

class UnsupportedDimension : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct LocalBasis {
  int d = 2;
  BasisKind kind = BasisKind::hermitian;
  std::vector<Matrix<cplx>> elements;  // d^2 operators, each d x d

  int size() const { return d * d; }
  const Matrix<cplx>& operator[](int i) const { return elements[static_cast<std::size_t>(i)]; }
};

LocalBasis make_basis(int d, BasisKind kind);

// Coefficient map between two bases of the same d: T_{mu nu} = d^-1 tr(q_mu^dagger p_nu)
// sends coefficients in `from` (p) to coefficients in `to` (q).
struct BasisTransform {
  int d = 2;
  BasisKind from = BasisKind::hermitian;
  BasisKind to = BasisKind::hermitian;
  Matrix<cplx> matrix;

  bool is_real() const { return matrix.imag().cwiseAbs().maxCoeff() == 0.0; }
};

BasisTransform change_of_basis(const LocalBasis& from, const LocalBasis& to);

/// c_nu = d^-1 tr(p_nu^dagger op).
Vector<cplx> expand_local(const Matrix<cplx>& op, const LocalBasis& basis);

/// sum_nu c_nu p_nu.
Matrix<cplx> reconstruct_local(const Vector<cplx>& coefficients, const LocalBasis& basis);

namespace pauli {
Matrix<cplx> identity();
Matrix<cplx> x();
Matrix<cplx> y();
Matrix<cplx> z();
Matrix<cplx> plus();   // (x + i y) / 2
Matrix<cplx> minus();  // (x - i y) / 2
}  // namespace pauli

}  // namespace opmps
