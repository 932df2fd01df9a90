#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <span>

#include "pinncw/common.hpp"
#include "pinncw/jet.hpp"
#include "pinncw/tape.hpp"

namespace pinncw {

// Scalar context: how to turn literals into the scalar type. S = double gives
// the fast evaluation path (neighbor residuals, finite-difference oracles);
// S = ad::Var records onto a tape for parameter gradients. Problem residuals
// and hard constraints are written once against this interface.
template <class S>
struct ScalarCtx;

template <>
struct ScalarCtx<double> {
  double make(double v) const { return v; }
};

template <>
struct ScalarCtx<ad::Var> {
  ad::Tape* tape = nullptr;
  ad::Var make(double v) const { return tape->constant(v); }
};

namespace detail {
inline int sym_index(int i, int j) {  // i <= j
  return j * (j + 1) / 2 + i;
}
}  // namespace detail

// Truncated second-order jet of a scalar quantity with respect to up to D
// input coordinates. `mask` tracks which components are populated; binary
// operations propagate the intersection. The request validation guarantees
// closure (a hessian entry implies both gradients, a gradient implies the
// value), so masked chain rules never read an absent component.
template <class S, int D>
struct Jet2 {
  static constexpr int HS = D * (D + 1) / 2;
  S v{};
  std::array<S, D> g{};
  std::array<S, HS> h{};
  uint32_t mask = 0;

  static constexpr uint32_t value_bit = 1u;
  static constexpr uint32_t grad_bit(int k) { return 2u << k; }
  static constexpr uint32_t hess_bit(int i, int j) {
    return (2u << D) << detail::sym_index(i, j);
  }
  static constexpr uint32_t full_mask() {
    uint32_t m = value_bit;
    for (int k = 0; k < D; ++k) m |= grad_bit(k);
    for (int j = 0; j < D; ++j)
      for (int i = 0; i <= j; ++i) m |= hess_bit(i, j);
    return m;
  }

  bool has_grad(int k) const { return (mask & grad_bit(k)) != 0; }
  bool has_hess(int i, int j) const {
    if (i > j) std::swap(i, j);
    return (mask & hess_bit(i, j)) != 0;
  }

  const S& value() const { return v; }
  const S& grad(int k) const {
    check(has_grad(k), "Jet2: gradient component not populated");
    return g[k];
  }
  const S& hess(int i, int j) const {
    if (i > j) std::swap(i, j);
    check(has_hess(i, j), "Jet2: hessian component not populated");
    return h[detail::sym_index(i, j)];
  }
};

template <class S, int D>
Jet2<S, D> constant_jet(const ScalarCtx<S>& ctx, double c) {
  Jet2<S, D> r;
  r.v = ctx.make(c);
  for (int k = 0; k < D; ++k) r.g[k] = ctx.make(0.0);
  for (int q = 0; q < Jet2<S, D>::HS; ++q) r.h[q] = ctx.make(0.0);
  r.mask = Jet2<S, D>::full_mask();
  return r;
}

template <class S, int D>
Jet2<S, D> coordinate_jet(const ScalarCtx<S>& ctx, double value, int coord) {
  Jet2<S, D> r = constant_jet<S, D>(ctx, value);
  r.g[coord] = ctx.make(1.0);
  return r;
}

template <class S, int D>
std::array<Jet2<S, D>, D> coordinate_jets(const ScalarCtx<S>& ctx,
                                          const double* x) {
  std::array<Jet2<S, D>, D> out;
  for (int k = 0; k < D; ++k) out[k] = coordinate_jet<S, D>(ctx, x[k], k);
  return out;
}

// ---- arithmetic -----------------------------------------------------------

template <class S, int D>
Jet2<S, D> operator+(const Jet2<S, D>& a, const Jet2<S, D>& b) {
  Jet2<S, D> r;
  r.mask = a.mask & b.mask;
  r.v = a.v + b.v;
  for (int k = 0; k < D; ++k)
    if (r.has_grad(k)) r.g[k] = a.g[k] + b.g[k];
  for (int j = 0; j < D; ++j)
    for (int i = 0; i <= j; ++i)
      if (r.has_hess(i, j)) {
        const int q = detail::sym_index(i, j);
        r.h[q] = a.h[q] + b.h[q];
      }
  return r;
}

template <class S, int D>
Jet2<S, D> operator-(const Jet2<S, D>& a, const Jet2<S, D>& b) {
  Jet2<S, D> r;
  r.mask = a.mask & b.mask;
  r.v = a.v - b.v;
  for (int k = 0; k < D; ++k)
    if (r.has_grad(k)) r.g[k] = a.g[k] - b.g[k];
  for (int j = 0; j < D; ++j)
    for (int i = 0; i <= j; ++i)
      if (r.has_hess(i, j)) {
        const int q = detail::sym_index(i, j);
        r.h[q] = a.h[q] - b.h[q];
      }
  return r;
}

template <class S, int D>
Jet2<S, D> operator-(const Jet2<S, D>& a) {
  Jet2<S, D> r;
  r.mask = a.mask;
  r.v = -a.v;
  for (int k = 0; k < D; ++k)
    if (r.has_grad(k)) r.g[k] = -a.g[k];
  for (int j = 0; j < D; ++j)
    for (int i = 0; i <= j; ++i)
      if (r.has_hess(i, j)) {
        const int q = detail::sym_index(i, j);
        r.h[q] = -a.h[q];
      }
  return r;
}

template <class S, int D>
Jet2<S, D> operator*(const Jet2<S, D>& a, const Jet2<S, D>& b) {
  Jet2<S, D> r;
  r.mask = a.mask & b.mask;
  r.v = a.v * b.v;
  for (int k = 0; k < D; ++k)
    if (r.has_grad(k)) r.g[k] = a.g[k] * b.v + a.v * b.g[k];
  for (int j = 0; j < D; ++j)
    for (int i = 0; i <= j; ++i)
      if (r.has_hess(i, j)) {
        const int q = detail::sym_index(i, j);
        r.h[q] = a.h[q] * b.v + a.g[i] * b.g[j] + a.g[j] * b.g[i] +
                 a.v * b.h[q];
      }
  return r;
}

// Quotient rule, second order: with q = a/b,
//   q_i  = (a_i - q b_i) / b
//   q_ij = (a_ij - q b_ij - q_i b_j - q_j b_i) / b
template <class S, int D>
Jet2<S, D> operator/(const Jet2<S, D>& a, const Jet2<S, D>& b) {
  Jet2<S, D> r;
  r.mask = a.mask & b.mask;
  r.v = a.v / b.v;
  for (int k = 0; k < D; ++k)
    if (r.has_grad(k)) r.g[k] = (a.g[k] - r.v * b.g[k]) / b.v;
  for (int j = 0; j < D; ++j)
    for (int i = 0; i <= j; ++i)
      if (r.has_hess(i, j)) {
        const int q = detail::sym_index(i, j);
        r.h[q] = (a.h[q] - r.v * b.h[q] - r.g[i] * b.g[j] - r.g[j] * b.g[i]) /
                 b.v;
      }
  return r;
}

// Mixed scalar forms (constants neither narrow the mask nor add derivatives).
template <class S, int D>
Jet2<S, D> operator*(const Jet2<S, D>& a, double c) {
  Jet2<S, D> r;
  r.mask = a.mask;
  r.v = a.v * c;
  for (int k = 0; k < D; ++k)
    if (r.has_grad(k)) r.g[k] = a.g[k] * c;
  for (int j = 0; j < D; ++j)
    for (int i = 0; i <= j; ++i)
      if (r.has_hess(i, j)) {
        const int q = detail::sym_index(i, j);
        r.h[q] = a.h[q] * c;
      }
  return r;
}
template <class S, int D>
Jet2<S, D> operator*(double c, const Jet2<S, D>& a) {
  return a * c;
}
template <class S, int D>
Jet2<S, D> operator/(const Jet2<S, D>& a, double c) {
  return a * (1.0 / c);
}
template <class S, int D>
Jet2<S, D> operator+(const Jet2<S, D>& a, double c) {
  Jet2<S, D> r = a;
  r.v = a.v + c;
  return r;
}
template <class S, int D>
Jet2<S, D> operator+(double c, const Jet2<S, D>& a) {
  return a + c;
}
template <class S, int D>
Jet2<S, D> operator-(const Jet2<S, D>& a, double c) {
  return a + (-c);
}
template <class S, int D>
Jet2<S, D> operator-(double c, const Jet2<S, D>& a) {
  return (-a) + c;
}

// Unary C^2 function with supplied value/first/second derivative at a.v.
template <class S, int D>
Jet2<S, D> unary_jet(const Jet2<S, D>& a, S f, S fp, S fpp) {
  Jet2<S, D> r;
  r.mask = a.mask;
  r.v = f;
  for (int k = 0; k < D; ++k)
    if (r.has_grad(k)) r.g[k] = fp * a.g[k];
  for (int j = 0; j < D; ++j)
    for (int i = 0; i <= j; ++i)
      if (r.has_hess(i, j)) {
        const int q = detail::sym_index(i, j);
        r.h[q] = fpp * a.g[i] * a.g[j] + fp * a.h[q];
      }
  return r;
}

template <class S, int D>
Jet2<S, D> sin(const Jet2<S, D>& a) {
  using std::cos;
  using std::sin;
  S s = sin(a.v), c = cos(a.v);
  return unary_jet(a, s, c, -s);
}
template <class S, int D>
Jet2<S, D> cos(const Jet2<S, D>& a) {
  using std::cos;
  using std::sin;
  S c = cos(a.v), s = sin(a.v);
  return unary_jet(a, c, -s, -c);
}
template <class S, int D>
Jet2<S, D> exp(const Jet2<S, D>& a) {
  using std::exp;
  S e = exp(a.v);
  return unary_jet(a, e, e, e);
}

// ---- bridges from network evaluations --------------------------------------

// Raw network output as a Jet2, double path (from batched components).
template <int D>
Jet2<double, D> raw_jet(const JetComponents& c, const JetRequest& req, int pt,
                        int out = 0) {
  Jet2<double, D> r;
  r.mask = Jet2<double, D>::value_bit;
  r.v = c.value(out, pt);
  for (int k = 0; k < req.n_dirs(); ++k) {
    r.g[req.dirs[k]] = c.grad[k](out, pt);
    r.mask |= Jet2<double, D>::grad_bit(req.dirs[k]);
  }
  for (int q = 0; q < req.n_pairs(); ++q) {
    auto [i, j] = req.pairs[q];
    r.h[detail::sym_index(i, j)] = c.hess[q](out, pt);
    r.mask |= Jet2<double, D>::hess_bit(i, j);
  }
  return r;
}

// Raw network output as a Jet2 of tape leaves.
template <int D>
Jet2<ad::Var, D> raw_jet(ad::Tape& tape, int block, int pt, int out = 0) {
  const JetRequest& req = tape.block_request(block);
  Jet2<ad::Var, D> r;
  r.mask = Jet2<ad::Var, D>::value_bit;
  r.v = tape.value_leaf(block, pt, out);
  for (int k = 0; k < req.n_dirs(); ++k) {
    r.g[req.dirs[k]] = tape.grad_leaf(block, pt, req.dirs[k], out);
    r.mask |= Jet2<ad::Var, D>::grad_bit(req.dirs[k]);
  }
  for (int q = 0; q < req.n_pairs(); ++q) {
    auto [i, j] = req.pairs[q];
    r.h[detail::sym_index(i, j)] = tape.hess_leaf(block, pt, i, j, out);
    r.mask |= Jet2<ad::Var, D>::hess_bit(i, j);
  }
  return r;
}

// Analytic jets (for oracles and exact-solution residual checks).
template <int D>
Jet2<double, D> analytic_jet(double value, const std::array<double, D>& grad,
                             const std::array<double, Jet2<double, D>::HS>& hess) {
  Jet2<double, D> r;
  r.v = value;
  r.g = grad;
  r.h = hess;
  r.mask = Jet2<double, D>::full_mask();
  return r;
}

}  // namespace pinncw
