#pragma once

#include <array>
#include <cmath>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "pinncw/common.hpp"
#include "pinncw/jet2.hpp"
#include "pinncw/quadrature.hpp"
#include "pinncw/rng.hpp"

namespace pinncw {

inline constexpr double kPi = 3.141592653589793238462643383279502884;

struct Box {
  Vec lo, hi;
  int dim() const { return (int)lo.size(); }
  bool contains(const double* x) const {
    for (int k = 0; k < dim(); ++k)
      if (x[k] < lo[k] || x[k] > hi[k]) return false;
    return true;
  }
};

enum class Region { Interior, Boundary, Initial };

// One auxiliary loss term: weight * mean((prediction - target)^2) over a
// fixed point set, predicting with network `net`'s constrained output.
struct FixedLossData {
  std::string name;
  int net = 0;
  Mat points;
  Vec targets;
  double weight = 1.0;
};

struct FixedLossParams {
  int n_boundary = 0;        // boundary sample count (per edge for poisson-inv)
  int n_observations = 0;
  double lambda_boundary = 1.0;
  double lambda_observation = 1.0;
  double observation_noise_var = 0.01;
};

// ---- generic box/region sampling -------------------------------------------

inline Mat sample_interior(const Box& box, int n, Rng& rng) {
  const int d = box.dim();
  Mat pts(d, n);
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < d; ++k) pts(k, i) = rng.uniform(box.lo[k], box.hi[k]);
  return pts;
}

// Uniform over the faces obtained by pinning one of `face_dims` at either
// bound; faces are chosen proportionally to their surface measure.
inline Mat sample_faces(const Box& box, std::span<const int> face_dims, int n,
                        Rng& rng) {
  const int d = box.dim();
  check(!face_dims.empty(), "sample_faces: no face dimensions");
  std::vector<double> area;
  double total = 0.0;
  for (int fd : face_dims) {
    double a = 1.0;
    for (int k = 0; k < d; ++k)
      if (k != fd) a *= box.hi[k] - box.lo[k];
    area.push_back(a);
    total += a;
  }
  Mat pts(d, n);
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform() * 2.0 * total;  // face dim + side together
    double acc = 0.0;
    int fd = face_dims[0];
    bool high = false;
    for (std::size_t f = 0; f < face_dims.size(); ++f) {
      if (u < acc + 2.0 * area[f]) {
        fd = face_dims[f];
        high = (u - acc) >= area[f];
        break;
      }
      acc += 2.0 * area[f];
    }
    for (int k = 0; k < d; ++k)
      pts(k, i) = (k == fd) ? (high ? box.hi[k] : box.lo[k])
                            : rng.uniform(box.lo[k], box.hi[k]);
  }
  return pts;
}

// ---- problems ---------------------------------------------------------------
//
// Each problem defines, against the Jet2/ScalarCtx interface:
//   constrain_jet       raw network jet -> constrained prediction jet
//   residual_constrained  constrained jets -> PDE residual
//   predict_from_raw    raw network value -> constrained prediction value
// The trainer instantiates these with S = ad::Var (loss graph) and
// S = double (neighbor residuals, oracles), so both paths share one source.

// Heat equation with a high-frequency solution: u_t = u_xx / (400 pi^2) on
// t,x in [0,1]^2, boundary and initial conditions enforced exactly by the
// output transform; exact solution e^{-t} sin(20 pi x).
struct Heat1d {
  static constexpr int kDim = 2;  // (t, x)
  static constexpr int kNets = 1;

  const char* name() const { return "heat1d"; }
  std::array<const char*, 2> coord_names() const { return {"t", "x"}; }
  bool time_dependent() const { return true; }
  Box box() const { return {Vec::Zero(2), Vec::Ones(2)}; }
  int n_fields() const { return 1; }
  const char* field_name(int) const { return "u"; }
  bool has_exact() const { return true; }

  NetworkConfig default_net(int) const { return {2, 1, 4, 80}; }

  JetRequest residual_request(int) const { return {2, {0, 1}, {{1, 1}}}; }

  template <class S>
  Jet2<S, 2> constrain_jet(const ScalarCtx<S>& ctx,
                           const std::array<Jet2<S, 2>, 2>& c,
                           const Jet2<S, 2>& raw, int) const {
    (void)ctx;
    return c[0] * c[1] * (1.0 - c[1]) * raw + sin(c[1] * (20.0 * kPi));
  }

  template <class S>
  S residual_constrained(const ScalarCtx<S>&, const double*,
                         std::span<const Jet2<S, 2>> u) const {
    return u[0].grad(0) - u[0].hess(1, 1) * (1.0 / (400.0 * kPi * kPi));
  }

  template <class S>
  S predict_from_raw(const ScalarCtx<S>& ctx, const double* x, S raw,
                     int) const {
    const double t = x[0], xx = x[1];
    S s = ctx.make(std::sin(20.0 * kPi * xx));
    return raw * (t * xx * (1.0 - xx)) + s;
  }

  double exact(const double* x, int = 0) const {
    return std::exp(-x[0]) * std::sin(20.0 * kPi * x[1]);
  }

  std::vector<FixedLossData> make_fixed_losses(uint64_t, const FixedLossParams&) const {
    return {};  // all conditions are hard-enforced
  }
};

// Klein-Gordon equation u_tt - laplace(u) + u^2 = f on [0,1]^2 in space; the
// time horizon is configurable. The initial condition is hard-enforced via
// u = t*net + x + y; spatial boundary values enter as a weighted data loss.
struct KleinGordon2d {
  static constexpr int kDim = 3;  // (t, x, y)
  static constexpr int kNets = 1;

  double t_max = 10.0;

  const char* name() const { return "kg2d"; }
  std::array<const char*, 3> coord_names() const { return {"t", "x", "y"}; }
  bool time_dependent() const { return true; }
  Box box() const {
    Vec lo = Vec::Zero(3), hi = Vec::Ones(3);
    hi[0] = t_max;
    return {lo, hi};
  }
  int n_fields() const { return 1; }
  const char* field_name(int) const { return "u"; }
  bool has_exact() const { return true; }

  NetworkConfig default_net(int) const { return {3, 1, 4, 80}; }

  JetRequest residual_request(int) const {
    return {3, {0, 1, 2}, {{0, 0}, {1, 1}, {2, 2}}};
  }

  template <class S>
  Jet2<S, 3> constrain_jet(const ScalarCtx<S>&,
                           const std::array<Jet2<S, 3>, 3>& c,
                           const Jet2<S, 3>& raw, int) const {
    return c[0] * raw + c[1] + c[2];
  }

  template <class S>
  S residual_constrained(const ScalarCtx<S>& ctx, const double* x,
                         std::span<const Jet2<S, 3>> u) const {
    S lap = u[0].hess(1, 1) + u[0].hess(2, 2);
    return u[0].hess(0, 0) - lap + sqr_s(u[0].value()) - ctx.make(source(x));
  }

  template <class S>
  S predict_from_raw(const ScalarCtx<S>&, const double* x, S raw, int) const {
    return raw * x[0] + (x[1] + x[2]);
  }

  double exact(const double* x, int = 0) const {
    return (x[1] + x[2]) * std::cos(x[0]) + x[1] * x[2] * std::sin(x[0]);
  }

  // u_tt = -u and laplace(u) = 0 for the exact solution, so f = u^2 - u.
  double source(const double* x) const {
    const double u = exact(x);
    return u * u - u;
  }

  std::vector<FixedLossData> make_fixed_losses(
      uint64_t run_seed, const FixedLossParams& p) const {
    check(p.n_boundary >= 1, "kg2d: boundary sample count must be >= 1");
    Rng rng(derive_seed(run_seed, Stream::Boundary));
    const std::array<int, 2> dims = {1, 2};
    FixedLossData loss;
    loss.name = "boundary";
    loss.net = 0;
    loss.points = sample_faces(box(), dims, p.n_boundary, rng);
    loss.targets = Vec(p.n_boundary);
    for (int i = 0; i < p.n_boundary; ++i)
      loss.targets[i] = exact(loss.points.col(i).data());
    loss.weight = p.lambda_boundary;
    return {loss};
  }

 private:
  template <class S>
  static S sqr_s(const S& v) {
    return v * v;
  }
};

// Viscous Burgers equation u_t + u u_x = (0.01/pi) u_xx on t in [0,1],
// x in [-1,1], with u(0,x) = -sin(pi x) and homogeneous boundaries. The
// default transform t(x-1)^2*net - sin(pi x) matches the benchmark as
// printed; the `symmetric` variant t(1-x^2)*net - sin(pi x) pins both ends.
struct Burgers1d {
  static constexpr int kDim = 2;  // (t, x)
  static constexpr int kNets = 1;
  static constexpr double kNu = 0.01 / kPi;

  bool symmetric_constraint = false;
  GaussHermite quad = gauss_hermite(128);

  const char* name() const { return "burgers1d"; }
  std::array<const char*, 2> coord_names() const { return {"t", "x"}; }
  bool time_dependent() const { return true; }
  Box box() const {
    Vec lo(2), hi(2);
    lo << 0.0, -1.0;
    hi << 1.0, 1.0;
    return {lo, hi};
  }
  int n_fields() const { return 1; }
  const char* field_name(int) const { return "u"; }
  bool has_exact() const { return true; }

  NetworkConfig default_net(int) const { return {2, 1, 7, 20}; }

  JetRequest residual_request(int) const { return {2, {0, 1}, {{1, 1}}}; }

  template <class S>
  Jet2<S, 2> constrain_jet(const ScalarCtx<S>&,
                           const std::array<Jet2<S, 2>, 2>& c,
                           const Jet2<S, 2>& raw, int) const {
    Jet2<S, 2> shape = symmetric_constraint
                           ? c[0] * (1.0 - c[1] * c[1])
                           : c[0] * (c[1] - 1.0) * (c[1] - 1.0);
    return shape * raw - sin(c[1] * kPi);
  }

  template <class S>
  S residual_constrained(const ScalarCtx<S>&, const double*,
                         std::span<const Jet2<S, 2>> u) const {
    return u[0].grad(0) + u[0].value() * u[0].grad(1) - u[0].hess(1, 1) * kNu;
  }

  template <class S>
  S predict_from_raw(const ScalarCtx<S>& ctx, const double* x, S raw,
                     int) const {
    const double t = x[0], xx = x[1];
    const double shape =
        symmetric_constraint ? t * (1.0 - xx * xx) : t * (xx - 1.0) * (xx - 1.0);
    return raw * shape - ctx.make(std::sin(kPi * xx));
  }

  double exact(const double* x, int = 0) const {
    return reference(x[0], x[1]);
  }

  // Cole-Hopf closed form evaluated by Gauss-Hermite quadrature:
  //   u(t,x) = -int sin(pi(x-e)) f(x-e) exp(-e^2/4vt) de
  //           / int f(x-e) exp(-e^2/4vt) de,   f(y) = exp(-cos(pi y)/(2 pi v)).
  // Substituting e = sqrt(4vt) s absorbs the Gaussian into the quadrature
  // weights; exponents are shifted by their maximum before exponentiation
  // (the shift cancels in the ratio).
  double reference(double t, double x) const {
    if (t <= 0.0) return -std::sin(kPi * x);
    const int n = (int)quad.nodes.size();
    const double scale = 2.0 * std::sqrt(kNu * t);
    const double inv2pinu = 1.0 / (2.0 * kPi * kNu);
    double max_phi = -std::numeric_limits<double>::infinity();
    std::vector<double> phi(n), eta(n);
    for (int i = 0; i < n; ++i) {
      eta[i] = scale * quad.nodes[i];
      phi[i] = -std::cos(kPi * (x - eta[i])) * inv2pinu;
      max_phi = std::max(max_phi, phi[i]);
    }
    double num = 0.0, den = 0.0;
    for (int i = 0; i < n; ++i) {
      const double w = quad.weights[i] * std::exp(phi[i] - max_phi);
      num += w * std::sin(kPi * (x - eta[i]));
      den += w;
    }
    return -num / den;
  }

  std::vector<FixedLossData> make_fixed_losses(uint64_t, const FixedLossParams&) const {
    return {};  // conditions are hard-enforced by the output transform
  }
};

// Inverse Poisson problem -div(a grad u) = f on [0,1]^2: two networks learn
// u and the spatially varying coefficient a from noisy interior observations
// of u plus boundary pinning of a (required for uniqueness).
struct PoissonInverse2d {
  static constexpr int kDim = 2;  // (x, y)
  static constexpr int kNets = 2;

  const char* name() const { return "poisson-inv"; }
  std::array<const char*, 2> coord_names() const { return {"x", "y"}; }
  bool time_dependent() const { return false; }
  Box box() const { return {Vec::Zero(2), Vec::Ones(2)}; }
  int n_fields() const { return 2; }
  const char* field_name(int f) const { return f == 0 ? "u" : "a"; }
  bool has_exact() const { return true; }

  NetworkConfig default_net(int) const { return {2, 1, 4, 50}; }

  JetRequest residual_request(int net) const {
    if (net == 0) return {2, {0, 1}, {{0, 0}, {1, 1}}};  // u: grads + laplacian
    return {2, {0, 1}, {}};                              // a: value + grads
  }

  template <class S>
  Jet2<S, 2> constrain_jet(const ScalarCtx<S>&,
                           const std::array<Jet2<S, 2>, 2>&,
                           const Jet2<S, 2>& raw, int) const {
    return raw;  // no hard constraints in the inverse setup
  }

  // r = -(a_x u_x + a_y u_y + a (u_xx + u_yy)) - f
  template <class S>
  S residual_constrained(const ScalarCtx<S>& ctx, const double* x,
                         std::span<const Jet2<S, 2>> jets) const {
    const Jet2<S, 2>& u = jets[0];
    const Jet2<S, 2>& a = jets[1];
    S flux = a.grad(0) * u.grad(0) + a.grad(1) * u.grad(1) +
             a.value() * (u.hess(0, 0) + u.hess(1, 1));
    return -flux - ctx.make(source(x));
  }

  template <class S>
  S predict_from_raw(const ScalarCtx<S>&, const double*, S raw, int) const {
    return raw;
  }

  double exact(const double* x, int field) const {
    return field == 0 ? exact_u(x[0], x[1]) : exact_a(x[0], x[1]);
  }

  static double exact_u(double x, double y) {
    return std::sin(kPi * x) * std::sin(kPi * y);
  }
  static double denom(double x, double y) {
    return 1.0 + x * x + y * y + (x - 1.0) * (x - 1.0) + (y - 1.0) * (y - 1.0);
  }
  static double exact_a(double x, double y) { return 1.0 / denom(x, y); }

  static double source(const double* p) {
    const double x = p[0], y = p[1];
    const double d = denom(x, y);
    const double sx = std::sin(kPi * x), sy = std::sin(kPi * y);
    const double cx = std::cos(kPi * x), cy = std::cos(kPi * y);
    return 2.0 * kPi * kPi * sx * sy / d +
           2.0 * kPi * ((2.0 * x - 1.0) * cx * sy + (2.0 * y - 1.0) * cy * sx) /
               (d * d);
  }

  // Observations of u (noisy, frozen at construction) plus exact boundary
  // values of a at n_boundary evenly spaced points per edge.
  std::vector<FixedLossData> make_fixed_losses(
      uint64_t run_seed, const FixedLossParams& p) const {
    check(p.n_observations >= 1, "poisson-inv: need observation points");
    check(p.n_boundary >= 1, "poisson-inv: need boundary points per edge");
    std::vector<FixedLossData> losses;

    {
      Rng obs_rng(derive_seed(run_seed, Stream::Observation));
      Rng noise_rng(derive_seed(run_seed, Stream::Noise));
      FixedLossData obs;
      obs.name = "observation";
      obs.net = 0;
      obs.points = sample_interior(box(), p.n_observations, obs_rng);
      obs.targets = Vec(p.n_observations);
      const double sigma = std::sqrt(p.observation_noise_var);
      for (int i = 0; i < p.n_observations; ++i)
        obs.targets[i] = exact_u(obs.points(0, i), obs.points(1, i)) +
                         sigma * noise_rng.normal();
      obs.weight = p.lambda_observation;
      losses.push_back(std::move(obs));
    }

    {
      const int m = p.n_boundary;
      FixedLossData bnd;
      bnd.name = "coefficient_boundary";
      bnd.net = 1;
      bnd.points = Mat(2, 4 * m);
      int col = 0;
      for (int edge = 0; edge < 4; ++edge)
        for (int i = 0; i < m; ++i, ++col) {
          const double s = m == 1 ? 0.5 : (double)i / (m - 1);
          switch (edge) {
            case 0: bnd.points.col(col) << s, 0.0; break;
            case 1: bnd.points.col(col) << s, 1.0; break;
            case 2: bnd.points.col(col) << 0.0, s; break;
            default: bnd.points.col(col) << 1.0, s; break;
          }
        }
      bnd.targets = Vec(4 * m);
      for (int i = 0; i < 4 * m; ++i)
        bnd.targets[i] = exact_a(bnd.points(0, i), bnd.points(1, i));
      bnd.weight = p.lambda_boundary;
      losses.push_back(std::move(bnd));
    }
    return losses;
  }
};

// ---- registry ----------------------------------------------------------------

struct ProblemOptions {
  double kg_t_max = 10.0;
  bool burgers_symmetric_constraint = false;
};

using Problem =
    std::variant<Heat1d, KleinGordon2d, Burgers1d, PoissonInverse2d>;

inline Problem make_problem(const std::string& name,
                            const ProblemOptions& opt = {}) {
  if (name == "heat1d") return Heat1d{};
  if (name == "kg2d") return KleinGordon2d{opt.kg_t_max};
  if (name == "burgers1d") return Burgers1d{opt.burgers_symmetric_constraint};
  if (name == "poisson-inv") return PoissonInverse2d{};
  fail("unknown problem: " + name);
}

inline std::vector<std::string> problem_names() {
  return {"heat1d", "kg2d", "burgers1d", "poisson-inv"};
}

// Region sampler shared by training set construction and tests; deterministic
// in the seed.
template <class P>
Mat sample_uniform(const P& prob, int n, Region region, uint64_t seed) {
  check(n >= 1, "sample_uniform: n must be >= 1");
  Rng rng(seed);
  const Box b = prob.box();
  switch (region) {
    case Region::Interior:
      return sample_interior(b, n, rng);
    case Region::Boundary: {
      std::vector<int> dims;
      for (int k = prob.time_dependent() ? 1 : 0; k < b.dim(); ++k)
        dims.push_back(k);
      return sample_faces(b, dims, n, rng);
    }
    case Region::Initial: {
      check(prob.time_dependent(),
            std::string("sample_uniform: initial region undefined for ") +
                prob.name());
      Mat pts = sample_interior(b, n, rng);
      pts.row(0).setConstant(b.lo[0]);
      return pts;
    }
  }
  fail("sample_uniform: unreachable");
}

inline Mat sample_uniform(const Problem& prob, int n, Region region,
                          uint64_t seed) {
  return std::visit(
      [&](const auto& p) { return sample_uniform(p, n, region, seed); }, prob);
}

}  // namespace pinncw
