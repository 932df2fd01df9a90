#pragma once

#include <charconv>
#include <cmath>
#include <fstream>
#include <string>
#include <vector>

#include "pinncw/common.hpp"
#include "pinncw/jet2.hpp"
#include "pinncw/mlp.hpp"
#include "pinncw/problems.hpp"

namespace pinncw {

// Shortest round-trip decimal rendering of a double; keeps CSV output stable
// under byte comparison across identical runs.
inline std::string format_double(double v) {
  char buf[40];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline double rel_l2(const Vec& pred, const Vec& truth) {
  check(pred.size() == truth.size() && pred.size() > 0,
        "rel_l2: size mismatch or empty");
  const double denom = truth.norm();
  check(denom > 0.0, "rel_l2: zero-norm reference");
  return (pred - truth).norm() / denom;
}

inline double l_inf(const Vec& pred, const Vec& truth) {
  check(pred.size() == truth.size(), "l_inf: size mismatch");
  return (pred - truth).cwiseAbs().maxCoeff();
}

struct FieldMetrics {
  double rel_l2 = 0.0;
  double l_inf = 0.0;
};

struct TrainingRecord {
  long iteration = 0;
  double loss_total = 0.0;
  double loss_residual = 0.0;
  double loss_fixed = 0.0;
  std::vector<FieldMetrics> fields;
  double lr = 0.0;
  double wall_ms = 0.0;  // reported separately; never part of history.csv
};

// Held-out evaluation points with exact/reference values, drawn from a seed
// stream disjoint from every training stream.
struct TestSet {
  Mat points;
  std::vector<Vec> truth;  // one vector per field
};

template <class P>
TestSet make_test_set(const P& prob, int n, uint64_t run_seed) {
  TestSet ts;
  ts.points = sample_uniform(prob, n, Region::Interior,
                             derive_seed(run_seed, Stream::TestSet));
  ts.truth.resize(prob.n_fields());
  for (int f = 0; f < prob.n_fields(); ++f) {
    ts.truth[f] = Vec(n);
    for (int i = 0; i < n; ++i)
      ts.truth[f][i] = prob.exact(ts.points.col(i).data(), f);
  }
  return ts;
}

// Constrained prediction of field `f` (field f is produced by network f).
template <class P>
Vec predict_field(const P& prob, const NetworkConfig& cfg, const Vec& params,
                  const Mat& points, int field) {
  Mat raw = forward(cfg, params, points);
  ScalarCtx<double> ctx;
  Vec out(points.cols());
  for (long i = 0; i < points.cols(); ++i)
    out[i] = prob.predict_from_raw(ctx, points.col(i).data(), raw(0, i), field);
  return out;
}

template <class P>
std::vector<FieldMetrics> evaluate(const P& prob,
                                   const std::vector<NetworkConfig>& cfgs,
                                   const std::vector<Vec>& params,
                                   const TestSet& test) {
  check((int)cfgs.size() == prob.kNets && params.size() == cfgs.size(),
        "evaluate: network count mismatch");
  std::vector<FieldMetrics> out(prob.n_fields());
  for (int f = 0; f < prob.n_fields(); ++f) {
    Vec pred = predict_field(prob, cfgs[f], params[f], test.points, f);
    out[f].rel_l2 = rel_l2(pred, test.truth[f]);
    out[f].l_inf = l_inf(pred, test.truth[f]);
  }
  return out;
}

// Regular grid export: one row per node with coordinates, prediction, truth
// (when an exact/reference solution exists) and absolute error per field.
template <class P>
void export_field_grid(const P& prob, const std::vector<NetworkConfig>& cfgs,
                       const std::vector<Vec>& params,
                       const std::vector<int>& counts,
                       const std::string& path) {
  const Box b = prob.box();
  check((int)counts.size() == b.dim(), "export_field_grid: counts per dim");
  long total = 1;
  for (int c : counts) {
    check(c >= 1, "export_field_grid: counts must be >= 1");
    total *= c;
  }
  Mat pts(b.dim(), total);
  std::vector<int> idx(b.dim(), 0);
  for (long col = 0; col < total; ++col) {
    for (int k = 0; k < b.dim(); ++k) {
      const double s = counts[k] == 1 ? 0.5 : (double)idx[k] / (counts[k] - 1);
      pts(k, col) = b.lo[k] + s * (b.hi[k] - b.lo[k]);
    }
    for (int k = b.dim() - 1; k >= 0; --k) {
      if (++idx[k] < counts[k]) break;
      idx[k] = 0;
    }
  }

  std::ofstream out(path);
  check(out.good(), "export_field_grid: cannot open " + path);
  auto names = prob.coord_names();
  for (int k = 0; k < b.dim(); ++k) out << (k ? "," : "") << names[k];
  for (int f = 0; f < prob.n_fields(); ++f) {
    const std::string fn = prob.field_name(f);
    out << "," << fn << "_pred";
    if (prob.has_exact()) out << "," << fn << "_true," << fn << "_abs_err";
  }
  out << "\n";

  std::vector<Vec> preds(prob.n_fields());
  for (int f = 0; f < prob.n_fields(); ++f)
    preds[f] = predict_field(prob, cfgs[f], params[f], pts, f);
  for (long col = 0; col < total; ++col) {
    for (int k = 0; k < b.dim(); ++k)
      out << (k ? "," : "") << format_double(pts(k, col));
    for (int f = 0; f < prob.n_fields(); ++f) {
      out << "," << format_double(preds[f][col]);
      if (prob.has_exact()) {
        const double tr = prob.exact(pts.col(col).data(), f);
        out << "," << format_double(tr) << ","
            << format_double(std::abs(preds[f][col] - tr));
      }
    }
    out << "\n";
  }
  check(out.good(), "export_field_grid: write failed for " + path);
}

}  // namespace pinncw
