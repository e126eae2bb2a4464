#include "opmps/models.hpp"

#include <unsupported/Eigen/KroneckerProduct>
#include <fmt/format.h>

#include <cmath>

namespace opmps {

namespace {

Matrix<cplx> kron(const Matrix<cplx>& a, const Matrix<cplx>& b) { return Eigen::kroneckerProduct(a, b).eval(); }

}  // namespace

HamiltonianTerms xxz_terms(const XxzModel& model) {
  if (model.n < 2) throw std::invalid_argument(fmt::format("xxz_terms: need n >= 2, got {}", model.n));
  HamiltonianTerms h{model.n, 2, {}, {}};
  const Matrix<cplx> bond = kron(pauli::x(), pauli::x()) + kron(pauli::y(), pauli::y()) +
                            model.delta * kron(pauli::z(), pauli::z());
  for (std::size_t b = 0; b + 1 < model.n; ++b) h.two_site_terms.push_back({b, bond});
  return h;
}

SiamChain SiamChain::uniform(std::size_t n, double tau, double u, double eps_f) {
  SiamChain c{n, std::vector<double>(n > 0 ? n - 1 : 0, tau), u, eps_f};
  if (n >= 2) c.taus[n / 2 - 1] = 0.0;
  return c;
}

void SiamChain::validate() const {
  if (n < 2 || n % 2 != 0) throw std::invalid_argument(fmt::format("SiamChain: n must be even and >= 2, got {}", n));
  if (taus.size() != n - 1)
    throw std::invalid_argument(fmt::format("SiamChain: expected {} hoppings, got {}", n - 1, taus.size()));
  const std::size_t j = junction_bond();
  if (taus[j] != 0.0)
    throw std::invalid_argument(fmt::format("SiamChain: junction hopping (bond {}) must be 0, got {}", j, taus[j]));
  if (n >= 4 && taus[j - 1] != taus[j + 1])
    throw std::invalid_argument(fmt::format("SiamChain: hybridizations must match on both sides ({} vs {})",
                                            taus[j - 1], taus[j + 1]));
}

Matrix<cplx> occupation() { return pauli::minus() * pauli::plus(); }

HamiltonianTerms siam_terms(const SiamChain& model) {
  model.validate();
  HamiltonianTerms h{model.n, 2, {}, {}};
  const Matrix<cplx> hop = kron(pauli::plus(), pauli::minus()) + kron(pauli::minus(), pauli::plus());
  const Matrix<cplx> nn = kron(occupation(), occupation());
  for (std::size_t b = 0; b + 1 < model.n; ++b) {
    if (b == model.junction_bond())
      h.two_site_terms.push_back({b, model.u * nn});
    else
      h.two_site_terms.push_back({b, model.taus[b] * hop});
  }
  h.one_site_terms.push_back({model.up_impurity(), model.eps_f * occupation()});
  h.one_site_terms.push_back({model.down_impurity(), model.eps_f * occupation()});
  return h;
}

OperatorSum spin_current_operator(std::size_t m, std::size_t n) {
  if (m + 1 >= n) throw std::invalid_argument(fmt::format("spin current: bond {} outside chain of {}", m, n));
  return {ProductOperator{n, 2, 0.5, {{m, pauli::x()}, {m + 1, pauli::y()}}},
          ProductOperator{n, 2, -0.5, {{m, pauli::y()}, {m + 1, pauli::x()}}}};
}

OperatorSum total_current_operator(std::size_t n) {
  OperatorSum out;
  for (std::size_t m = 0; m + 1 < n; ++m) {
    auto j = spin_current_operator(m, n);
    out.insert(out.end(), j.begin(), j.end());
  }
  return out;
}

OperatorMps spin_current_state(std::size_t m, std::size_t n, const LocalBasis& basis) {
  const auto terms = spin_current_operator(m, n);
  return mps_add(product_operator_state(terms[0], basis), product_operator_state(terms[1], basis));
}

OperatorMps total_current_state(std::size_t n, const LocalBasis& basis) {
  return operator_sum_state(total_current_operator(n), basis);
}

ProductOperator jordan_wigner_annihilator(std::size_t site, std::size_t n) {
  if (site >= n) throw std::invalid_argument(fmt::format("jordan_wigner_annihilator: site {} outside chain", site));
  ProductOperator f{n, 2, 1.0, {}};
  for (std::size_t j = 0; j < site; ++j) f.factors.emplace_back(j, pauli::z());
  f.factors.emplace_back(site, pauli::plus());
  return f;
}

ProductOperator MajoranaPair::w(std::size_t n) const {
  if (site >= n) throw std::invalid_argument("MajoranaPair: impurity site outside chain");
  ProductOperator p{n, 2, 1.0, {}};
  for (std::size_t j = 0; j < site; ++j) p.factors.emplace_back(j, pauli::z());
  p.factors.emplace_back(site, pauli::x());
  return p;
}

ProductOperator MajoranaPair::w_prime(std::size_t n) const {
  if (site >= n) throw std::invalid_argument("MajoranaPair: impurity site outside chain");
  ProductOperator p{n, 2, -1.0, {}};
  for (std::size_t j = 0; j < site; ++j) p.factors.emplace_back(j, pauli::z());
  p.factors.emplace_back(site, pauli::y());
  return p;
}

std::pair<OperatorMps, OperatorMps> majorana_states(const MajoranaPair& pair, std::size_t n, const LocalBasis& basis) {
  return {product_operator_state(pair.w(n), basis), product_operator_state(pair.w_prime(n), basis)};
}

OperatorSum hamiltonian_operator_sum(const HamiltonianTerms& h, const LocalBasis& basis) {
  h.validate();
  if (basis.d != h.d) throw std::invalid_argument("hamiltonian_operator_sum: basis d mismatch");
  OperatorSum out;
  for (const auto& t : h.one_site_terms) {
    const Vector<cplx> c = expand_local(t.op, basis);
    for (int mu = 0; mu < basis.size(); ++mu)
      if (std::abs(c(mu)) > 1e-15) out.push_back(ProductOperator{h.n, h.d, c(mu), {{t.site, basis[mu]}}});
  }
  for (const auto& t : h.two_site_terms) {
    const double dim = static_cast<double>(h.d * h.d);
    for (int mu = 0; mu < basis.size(); ++mu)
      for (int nu = 0; nu < basis.size(); ++nu) {
        const cplx c = (kron(basis[mu], basis[nu]).adjoint() * t.op).trace() / dim;
        if (std::abs(c) > 1e-15)
          out.push_back(ProductOperator{h.n, h.d, c, {{t.bond, basis[mu]}, {t.bond + 1, basis[nu]}}});
      }
  }
  if (out.empty()) out.push_back(ProductOperator{h.n, h.d, 0.0, {}});
  return out;
}

}  // namespace opmps
