#pragma once

#include "pinncw/common.hpp"
#include "pinncw/weighting.hpp"

namespace pinncw {

// Residual training points plus the neighborhood centers used for smoothing.
// Under the re-centering variant the centers track the points; under the
// fixed variant they stay at the original locations forever.
struct CollocationSet {
  Mat points;
  Mat centers;
  long last_resample_iter = 0;

  static CollocationSet init(Mat pts) {
    CollocationSet s;
    s.centers = pts;
    s.points = std::move(pts);
    return s;
  }
};

inline bool should_resample(long iter, long k, Scheme scheme) {
  check(k >= 1, "should_resample: K must be >= 1");
  return scheme_resamples(scheme) && iter > 0 && iter % k == 0;
}

// Replace each point by the highest-|residual| candidate among itself and its
// drawn neighbors (ties keep the incumbent; otherwise the lowest candidate
// index wins). Consumes the residuals already computed by the smoothing pass
// in the same iteration, so resampling adds no function evaluations; stale
// smoothing data is rejected. Weights are per-index and untouched: they carry
// over to replacement points.
inline void resample(CollocationSet& set, const SmoothedResiduals& smoothed,
                     Scheme scheme, long iter) {
  check(scheme_resamples(scheme), "resample: scheme does not resample");
  check(smoothed.iteration == iter,
        "resample: smoothed residuals are stale (iteration mismatch)");
  const int n = (int)set.points.cols();
  check(smoothed.center_abs.size() == n, "resample: size mismatch");

  for (int i = 0; i < n; ++i) {
    double best = smoothed.center_abs[i];
    int best_j = -1;
    for (int j = 0; j < smoothed.m; ++j) {
      const double r = smoothed.neighbor_abs[(long)i * smoothed.m + j];
      if (r > best) {
        best = r;
        best_j = j;
      }
    }
    if (best_j >= 0) {
      set.points.col(i) = smoothed.neighbor_points.col((long)i * smoothed.m + best_j);
      if (scheme == Scheme::CWP) set.centers.col(i) = set.points.col(i);
    }
  }
  set.last_resample_iter = iter;
}

}  // namespace pinncw
