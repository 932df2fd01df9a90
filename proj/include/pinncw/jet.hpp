#pragma once

#include <algorithm>
#include <utility>
#include <vector>

#include "pinncw/common.hpp"
#include "pinncw/mlp.hpp"
#include "pinncw/numeric.hpp"

namespace pinncw {

// Which input derivatives a network evaluation must produce. Keeping the set
// minimal matters: each direction/pair adds a full GEMM per layer, and the
// PDE residuals only ever need a few Hessian entries.
struct JetRequest {
  int dim = 0;
  std::vector<int> dirs;                   // strictly increasing, in [0, dim)
  std::vector<std::pair<int, int>> pairs;  // (a,b) with a<=b, both in dirs

  static JetRequest value_only(int dim) { return {dim, {}, {}}; }

  static JetRequest full(int dim) {
    JetRequest r;
    r.dim = dim;
    for (int k = 0; k < dim; ++k) r.dirs.push_back(k);
    for (int a = 0; a < dim; ++a)
      for (int b = a; b < dim; ++b) r.pairs.emplace_back(a, b);
    return r;
  }

  int n_dirs() const { return (int)dirs.size(); }
  int n_pairs() const { return (int)pairs.size(); }
  int comps_per_output() const { return 1 + n_dirs() + n_pairs(); }

  int dir_index(int coord) const {
    auto it = std::find(dirs.begin(), dirs.end(), coord);
    check(it != dirs.end(), "JetRequest: direction not requested");
    return (int)(it - dirs.begin());
  }
  int pair_index(int a, int b) const {
    if (a > b) std::swap(a, b);
    auto it = std::find(pairs.begin(), pairs.end(), std::make_pair(a, b));
    check(it != pairs.end(), "JetRequest: hessian entry not requested");
    return (int)(it - pairs.begin());
  }

  void validate() const {
    check(dim >= 1, "JetRequest: dim must be >= 1");
    for (std::size_t i = 0; i < dirs.size(); ++i) {
      check(dirs[i] >= 0 && dirs[i] < dim, "JetRequest: direction out of range");
      check(i == 0 || dirs[i] > dirs[i - 1], "JetRequest: dirs must increase");
    }
    for (auto [a, b] : pairs) {
      check(a <= b, "JetRequest: pair must be ordered");
      check(std::find(dirs.begin(), dirs.end(), a) != dirs.end() &&
                std::find(dirs.begin(), dirs.end(), b) != dirs.end(),
            "JetRequest: pair components must be requested directions");
    }
  }
};

// Batched outputs: value is (output_dim x n); grad[k] / hess[p] follow the
// request's ordering, each (output_dim x n).
struct JetComponents {
  Mat value;
  std::vector<Mat> grad;
  std::vector<Mat> hess;
};

struct JetAdjoints {
  Mat value;  // empty matrices mean zero seed
  std::vector<Mat> grad;
  std::vector<Mat> hess;
};

// Saved forward state for the reverse pass. Per hidden layer we keep the
// post-activation values T and the pre-activation derivative streams U
// (gradients) and V (hessian entries, absent for layer 0 where they vanish).
struct JetWorkspace {
  JetRequest req;
  Mat inputs;
  std::vector<Mat> t;               // [hidden_layers]
  std::vector<std::vector<Mat>> u;  // [hidden_layers][n_dirs]
  std::vector<std::vector<Mat>> v;  // [hidden_layers][n_pairs] (layer 0 empty)
};

// Exact forward propagation of (value, requested first derivatives, requested
// second derivatives) with respect to the network inputs. tanh chain rules:
// a = tanh(z), s1 = 1-a^2, s2 = -2*a*s1;
//   da_k  = s1 .* dz_k
//   da_km = s2 .* dz_k .* dz_m + s1 .* dz_km
inline JetComponents jet_forward(const NetworkConfig& cfg, const Vec& params,
                                 const Mat& points, const JetRequest& req,
                                 JetWorkspace* save = nullptr) {
  cfg.validate();
  req.validate();
  check(req.dim == cfg.input_dim, "jet_forward: request dim mismatch");
  check(params.size() == cfg.param_count(),
        "jet_forward: parameter size mismatch");
  check(points.rows() == cfg.input_dim, "jet_forward: input dimension");
  check(points.allFinite(), "jet_forward: non-finite input");

  const int n = (int)points.cols();
  const int g = req.n_dirs();
  const int p = req.n_pairs();
  const int H = cfg.hidden_layers;

  if (save) {
    save->req = req;
    save->inputs = points;
    save->t.assign(H, Mat());
    save->u.assign(H, {});
    save->v.assign(H, {});
  }

  Mat a = points;
  std::vector<Mat> ga(g), ha(p);  // post-activation derivative streams

  for (int l = 0; l <= H; ++l) {
    const auto w = weight_view(cfg, params, l);
    Mat z = (w * a).colwise() + bias_view(cfg, params, l);
    std::vector<Mat> uz(g), vz(p);
    if (l == 0) {
      for (int k = 0; k < g; ++k)
        uz[k] = w.col(req.dirs[k]).replicate(1, n);  // seed grads are one-hot
      // seed hessians are zero: vz stays empty, handled below
    } else {
      for (int k = 0; k < g; ++k) uz[k] = w * ga[k];
      for (int q = 0; q < p; ++q) vz[q] = w * ha[q];
    }

    if (l == H) {  // affine output layer
      JetComponents out;
      out.value = std::move(z);
      out.grad = std::move(uz);
      out.hess.resize(p);
      for (int q = 0; q < p; ++q)
        out.hess[q] = (l == 0 && vz[q].size() == 0)
                          ? Mat::Zero(cfg.output_dim, n)
                          : std::move(vz[q]);
      return out;
    }

    Mat t = tanh_fast(z.array()).matrix();
    Arr s1 = 1.0 - t.array().square();
    Arr s2 = -2.0 * t.array() * s1;
    std::vector<Mat> gt(g), ht(p);
    for (int k = 0; k < g; ++k) gt[k] = (s1 * uz[k].array()).matrix();
    for (int q = 0; q < p; ++q) {
      const int i = req.dir_index(req.pairs[q].first);
      const int j = req.dir_index(req.pairs[q].second);
      Arr cross = s2 * uz[i].array() * uz[j].array();
      if (l > 0) cross += s1 * vz[q].array();
      ht[q] = cross.matrix();
    }
    if (save) {
      save->t[l] = t;
      save->u[l] = std::move(uz);
      if (l > 0) save->v[l] = std::move(vz);
    }
    a = std::move(t);
    ga = std::move(gt);
    ha = std::move(ht);
  }
  fail("jet_forward: unreachable");
}

// Reverse pass: given adjoints of the requested output components, accumulate
// the gradient with respect to the flat parameter vector into `grad_accum`.
// Walks the jet recursion backwards layer by layer; all reductions have a
// fixed order so results are bit-reproducible.
inline void jet_backward(const NetworkConfig& cfg, const Vec& params,
                         const JetWorkspace& ws, const JetAdjoints& seed,
                         Vec& grad_accum) {
  const JetRequest& req = ws.req;
  const int n = (int)ws.inputs.cols();
  const int g = req.n_dirs();
  const int p = req.n_pairs();
  const int H = cfg.hidden_layers;
  check(grad_accum.size() == cfg.param_count(),
        "jet_backward: gradient accumulator size mismatch");

  auto seeded = [&](const Mat& m, int rows) -> Mat {
    return m.size() == 0 ? Mat::Zero(rows, n) : m;
  };

  // Adjoints of the current layer's pre-activation streams (z, u_k, v_q).
  Mat zb = seeded(seed.value, cfg.output_dim);
  std::vector<Mat> ub(g), vb(p);
  for (int k = 0; k < g; ++k)
    ub[k] = seeded(k < (int)seed.grad.size() ? seed.grad[k] : Mat(),
                   cfg.output_dim);
  for (int q = 0; q < p; ++q)
    vb[q] = seeded(q < (int)seed.hess.size() ? seed.hess[q] : Mat(),
                   cfg.output_dim);

  for (int l = H; l >= 0; --l) {
    const auto w = weight_view(cfg, params, l);
    Eigen::Map<RowMajorMat> wg(grad_accum.data() + cfg.weight_offset(l),
                               cfg.layer_rows(l), cfg.layer_cols(l));
    Eigen::Map<Vec> bg(grad_accum.data() + cfg.bias_offset(l),
                       cfg.layer_rows(l));

    if (l == 0) {
      wg.noalias() += zb * ws.inputs.transpose();
      for (int k = 0; k < g; ++k)
        wg.col(req.dirs[k]) += ub[k].rowwise().sum();
      // hessian seeds at the input are zero: no weight contribution
      bg += zb.rowwise().sum();
      break;
    }

    // Previous layer's post-activation streams (recomputed from saved state).
    const Mat& tp = ws.t[l - 1];
    Arr s1 = 1.0 - tp.array().square();
    Arr s2 = -2.0 * tp.array() * s1;
    const std::vector<Mat>& up = ws.u[l - 1];
    const std::vector<Mat>* vp = (l - 1 > 0) ? &ws.v[l - 1] : nullptr;

    wg.noalias() += zb * tp.transpose();
    for (int k = 0; k < g; ++k) {
      Mat gprev = (s1 * up[k].array()).matrix();
      wg.noalias() += ub[k] * gprev.transpose();
    }
    for (int q = 0; q < p; ++q) {
      const int i = req.dir_index(req.pairs[q].first);
      const int j = req.dir_index(req.pairs[q].second);
      Arr hprev = s2 * up[i].array() * up[j].array();
      if (vp) hprev += s1 * (*vp)[q].array();
      wg.noalias() += vb[q] * hprev.matrix().transpose();
    }
    bg += zb.rowwise().sum();

    // Push adjoints through W to the previous layer's post-activation values.
    Mat apb = w.transpose() * zb;
    std::vector<Mat> gpb(g), hpb(p);
    for (int k = 0; k < g; ++k) gpb[k] = w.transpose() * ub[k];
    for (int q = 0; q < p; ++q) hpb[q] = w.transpose() * vb[q];

    // Reverse the activation chain of layer l-1.
    Arr s1b = Arr::Zero(tp.rows(), n);
    Arr s2b = Arr::Zero(tp.rows(), n);
    std::vector<Mat> ubp(g), vbp(p);
    for (int k = 0; k < g; ++k) {
      s1b += gpb[k].array() * up[k].array();
      ubp[k] = (s1 * gpb[k].array()).matrix();
    }
    for (int q = 0; q < p; ++q) {
      const int i = req.dir_index(req.pairs[q].first);
      const int j = req.dir_index(req.pairs[q].second);
      if (vp) s1b += hpb[q].array() * (*vp)[q].array();
      s2b += hpb[q].array() * up[i].array() * up[j].array();
      ubp[i].array() += s2 * up[j].array() * hpb[q].array();
      ubp[j].array() += s2 * up[i].array() * hpb[q].array();
      vbp[q] = (s1 * hpb[q].array()).matrix();
    }
    Arr tb = apb.array() - 2.0 * tp.array() * s1b +
             (6.0 * tp.array().square() - 2.0) * s2b;
    zb = (tb * s1).matrix();
    ub = std::move(ubp);
    vb = std::move(vbp);
  }
}

// Exact derivatives of the network outputs at a single point: value (per
// output), gradient (output x input) and symmetric Hessian (input x input per
// output).
struct InputJet {
  Vec value;
  Mat gradient;
  std::vector<Mat> hessian;
};

inline InputJet input_jet(const NetworkConfig& cfg, const Vec& params,
                          const Vec& point) {
  check(point.size() == cfg.input_dim, "input_jet: point dimension");
  const JetRequest req = JetRequest::full(cfg.input_dim);
  JetComponents c = jet_forward(cfg, params, point, req, nullptr);
  InputJet jet;
  jet.value = c.value.col(0);
  jet.gradient = Mat::Zero(cfg.output_dim, cfg.input_dim);
  for (int k = 0; k < req.n_dirs(); ++k)
    jet.gradient.col(req.dirs[k]) = c.grad[k].col(0);
  jet.hessian.assign(cfg.output_dim, Mat::Zero(cfg.input_dim, cfg.input_dim));
  for (int q = 0; q < req.n_pairs(); ++q) {
    auto [a, b] = req.pairs[q];
    for (int out = 0; out < cfg.output_dim; ++out) {
      jet.hessian[out](a, b) = c.hess[q](out, 0);
      jet.hessian[out](b, a) = c.hess[q](out, 0);
    }
  }
  return jet;
}

}  // namespace pinncw
