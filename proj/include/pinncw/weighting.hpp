#pragma once

#include <cmath>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "pinncw/common.hpp"
#include "pinncw/numeric.hpp"
#include "pinncw/problems.hpp"
#include "pinncw/rng.hpp"
#include "pinncw/tape.hpp"

namespace pinncw {

enum class Scheme { Uniform, SA, RBA, CW, CWP, CWPFix };

inline const char* scheme_name(Scheme s) {
  switch (s) {
    case Scheme::Uniform: return "uniform";
    case Scheme::SA: return "sa";
    case Scheme::RBA: return "rba";
    case Scheme::CW: return "cw";
    case Scheme::CWP: return "cwp";
    case Scheme::CWPFix: return "cwp-fix";
  }
  return "?";
}

inline Scheme parse_scheme(const std::string& name) {
  for (Scheme s : {Scheme::Uniform, Scheme::SA, Scheme::RBA, Scheme::CW,
                   Scheme::CWP, Scheme::CWPFix})
    if (name == scheme_name(s)) return s;
  fail("unknown scheme: " + name);
}

inline bool is_cw_family(Scheme s) {
  return s == Scheme::CW || s == Scheme::CWP || s == Scheme::CWPFix;
}
inline bool scheme_resamples(Scheme s) {
  return s == Scheme::CWP || s == Scheme::CWPFix;
}

struct WeightConfig {
  Scheme scheme = Scheme::Uniform;
  double eta_lambda = 1e-3;  // dual step size (CW family and RBA decay)
  double eta_star = 1e-3;    // RBA residual scale; bound is eta_star/eta_lambda
  int neighbors = 4;         // M, samples per smoothing neighborhood
  double epsilon = 0.01;     // neighborhood radius
  double sa_lr = 0.01;       // SA ascent rate

  void validate() const {
    check(eta_lambda > 0.0 && eta_lambda < 1.0,
          "eta_lambda must be in (0, 1)");
    check(eta_star > 0.0, "eta_star must be positive");
    check(neighbors >= 0, "neighbor count must be >= 0");
    check(epsilon > 0.0, "epsilon must be positive");
    check(sa_lr > 0.0, "sa_lr must be positive");
  }
};

struct WeightState {
  WeightConfig cfg;
  Vec lambdas;

  static WeightState init(const WeightConfig& cfg, int n_points) {
    cfg.validate();
    check(n_points >= 1, "WeightState: need at least one point");
    WeightState s;
    s.cfg = cfg;
    double v = 1.0;
    if (is_cw_family(cfg.scheme)) v = 1.0 / n_points;
    if (cfg.scheme == Scheme::RBA) v = 0.0;
    s.lambdas = Vec::Constant(n_points, v);
    return s;
  }
};

// Residual magnitudes smoothed over sampled neighborhoods:
//   rbar_i = (|r(x_i)| + sum_j |r(x_ij)|) / (M + 1)
// Neighbor locations and residuals are retained so resampling can reuse them
// without further evaluations.
struct SmoothedResiduals {
  Vec values;          // rbar, length n
  Mat neighbor_points; // dim x (n*M), neighbors of point i in columns [i*M, (i+1)*M)
  Vec neighbor_abs;    // |r| at neighbors, length n*M
  Vec center_abs;      // |r| at the points, length n
  int m = 0;
  long iteration = -1;
};

namespace detail {
// One draw, uniform on the epsilon-ball around `center` intersected with the
// box; rejection on the box with a hard cap (only degenerate geometry can
// exhaust it).
inline void draw_in_ball(const double* center, double eps, const Box& box,
                         Rng& rng, double* out) {
  const int d = box.dim();
  for (int attempt = 0; attempt < 1000; ++attempt) {
    double norm2 = 0.0;
    for (int k = 0; k < d; ++k) {
      out[k] = rng.normal();
      norm2 += out[k] * out[k];
    }
    const double r =
        eps * std::pow(rng.uniform(), 1.0 / d) / std::sqrt(norm2);
    for (int k = 0; k < d; ++k) out[k] = center[k] + r * out[k];
    if (box.contains(out)) return;
  }
  fail("smooth_residuals: ball sampling failed 1000 consecutive times");
}
}  // namespace detail

// Core smoothing pass. `batch_residuals` maps a (dim x k) point matrix to k
// signed residuals. Neighborhoods are centered on `centers` (== points except
// under the fixed-neighborhood resampling variant). Each point draws from its
// own (seed, iteration, index)-derived substream, so results are independent
// of point order and stable under any evaluation parallelism.
template <class BatchFn>
SmoothedResiduals smooth_residuals_batch(BatchFn&& batch_residuals,
                                         const Mat& points, const Mat& centers,
                                         int m, double eps, const Box& box,
                                         uint64_t neighbor_seed, long iteration,
                                         const Vec& center_residuals) {
  check(m >= 0, "smooth_residuals: M must be >= 0");
  check(eps > 0.0, "smooth_residuals: epsilon must be positive");
  const int n = (int)points.cols();
  check(centers.cols() == n, "smooth_residuals: centers/points size mismatch");
  check(center_residuals.size() == n,
        "smooth_residuals: center residual size mismatch");

  SmoothedResiduals out;
  out.m = m;
  out.iteration = iteration;
  out.center_abs = center_residuals.cwiseAbs();
  if (m == 0) {
    out.values = out.center_abs;
    out.neighbor_points = Mat(points.rows(), 0);
    out.neighbor_abs = Vec(0);
    return out;
  }

  out.neighbor_points = Mat(points.rows(), (long)n * m);
  for (int i = 0; i < n; ++i) {
    Rng rng(derive_seed(neighbor_seed, Stream::Neighbors, (uint64_t)iteration,
                        (uint64_t)i));
    for (int j = 0; j < m; ++j)
      detail::draw_in_ball(centers.col(i).data(), eps, box, rng,
                           out.neighbor_points.col((long)i * m + j).data());
  }
  out.neighbor_abs = batch_residuals(out.neighbor_points).cwiseAbs();

  out.values = Vec(n);
  for (int i = 0; i < n; ++i) {
    double acc = out.center_abs[i];
    for (int j = 0; j < m; ++j) acc += out.neighbor_abs[(long)i * m + j];
    out.values[i] = acc / (m + 1);
  }
  return out;
}

// Point-wise convenience form: evaluates the center residuals itself and
// centers the neighborhoods on the points.
inline SmoothedResiduals smooth_residuals(
    const std::function<double(const double*)>& residual_fn, const Mat& points,
    int m, double eps, const Box& box, uint64_t seed, long iteration = 0) {
  const int n = (int)points.cols();
  Vec center(n);
  for (int i = 0; i < n; ++i) center[i] = residual_fn(points.col(i).data());
  auto batch = [&](const Mat& pts) {
    Vec r(pts.cols());
    for (int i = 0; i < pts.cols(); ++i) r[i] = residual_fn(pts.col(i).data());
    return r;
  };
  return smooth_residuals_batch(batch, points, points, m, eps, box, seed,
                                iteration, center);
}

// lambda_i <- (1 - eta) lambda_i + eta * rbar_i / sum_j rbar_j.
// The normalizer is an exactly rounded sum, so the update is independent of
// point ordering; a convex combination of two unit-sum vectors keeps
// sum(lambda) = 1 without renormalization. All-zero rbar leaves the state
// unchanged (returns false for the caller to log).
inline bool update_cw(WeightState& state, const SmoothedResiduals& smoothed) {
  check(is_cw_family(state.cfg.scheme), "update_cw: wrong scheme");
  check(smoothed.values.size() == state.lambdas.size(),
        "update_cw: size mismatch");
  const double total = exact_sum(smoothed.values);
  check(total >= 0.0 && std::isfinite(total),
        "update_cw: invalid smoothed residuals");
  if (total == 0.0) return false;
  const double eta = state.cfg.eta_lambda;
  state.lambdas = (1.0 - eta) * state.lambdas +
                  (eta / total) * smoothed.values;
  return true;
}

// lambda_i <- (1 - eta_lambda) lambda_i + eta_star * |r_i| / max_j |r_j|,
// keeping every weight in (0, eta_star/eta_lambda].
inline bool update_rba(WeightState& state, const Vec& residuals) {
  check(state.cfg.scheme == Scheme::RBA, "update_rba: wrong scheme");
  check(residuals.size() == state.lambdas.size(), "update_rba: size mismatch");
  const double mx = residuals.cwiseAbs().maxCoeff();
  check(std::isfinite(mx), "update_rba: non-finite residuals");
  if (mx == 0.0) return false;
  state.lambdas = (1.0 - state.cfg.eta_lambda) * state.lambdas +
                  (state.cfg.eta_star / mx) * residuals.cwiseAbs();
  return true;
}

// Gradient ascent on sum_i lambda_i r_i^2 in lambda: lambda_i += sa_lr * r_i^2,
// floored at a small positive value.
inline bool update_sa(WeightState& state, const Vec& residuals) {
  check(state.cfg.scheme == Scheme::SA, "update_sa: wrong scheme");
  check(residuals.size() == state.lambdas.size(), "update_sa: size mismatch");
  state.lambdas =
      (state.lambdas + state.cfg.sa_lr * residuals.array().square().matrix())
          .cwiseMax(1e-12);
  return true;
}

// sum_i lambda_i r_i^2 with the weights as constants: no gradient flows
// through lambda, matching the alternating descent/ascent structure.
inline ad::Var weighted_residual_loss(std::span<const ad::Var> residuals,
                                      const Vec& lambdas) {
  check((long)residuals.size() == lambdas.size(),
        "weighted_residual_loss: length mismatch");
  check(!residuals.empty(), "weighted_residual_loss: empty residual set");
  return residuals[0].tape->weighted_sum_sq(
      residuals,
      std::span<const double>(lambdas.data(), (std::size_t)lambdas.size()));
}

}  // namespace pinncw
