#pragma once

#include <cmath>

#include "pinncw/common.hpp"

namespace pinncw {

struct LrSchedule {
  double lr0 = 1e-3;
  double decay_factor = 1.0;
  long decay_every = 1000;
  double lr_floor = 0.0;  // 0 disables the floor

  void validate() const {
    check(lr0 > 0.0, "lr0 must be positive");
    check(decay_factor > 0.0 && decay_factor <= 1.0,
          "decay_factor must be in (0, 1]");
    check(decay_every >= 1, "decay_every must be >= 1");
    check(lr_floor >= 0.0, "lr_floor must be >= 0");
  }
};

// Staircase exponential decay with an optional floor:
// max(lr_floor, lr0 * decay_factor^floor(iter / decay_every)).
inline double lr_at(const LrSchedule& s, long iter) {
  check(iter >= 0, "lr_at: iter must be >= 0");
  const double lr =
      s.lr0 * std::pow(s.decay_factor, (double)(iter / s.decay_every));
  return std::max(s.lr_floor, lr);
}

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  Vec first_moment;
  Vec second_moment;
  long step_count = 0;

  static AdamState init(long n) {
    return {Vec::Zero(n), Vec::Zero(n), 0};
  }
};

// Canonical bias-corrected Adam update (epsilon outside the square root).
inline void adam_step(Vec& params, const Vec& grad, AdamState& state,
                      double lr, const AdamConfig& cfg = {}) {
  check(params.size() == grad.size() &&
            params.size() == state.first_moment.size(),
        "adam_step: shape mismatch");
  check(grad.allFinite(), "adam_step: non-finite gradient");
  state.step_count += 1;
  state.first_moment =
      cfg.beta1 * state.first_moment + (1.0 - cfg.beta1) * grad;
  state.second_moment = cfg.beta2 * state.second_moment +
                        (1.0 - cfg.beta2) * grad.array().square().matrix();
  const double c1 = 1.0 - std::pow(cfg.beta1, (double)state.step_count);
  const double c2 = 1.0 - std::pow(cfg.beta2, (double)state.step_count);
  params.array() -= lr * (state.first_moment.array() / c1) /
                    ((state.second_moment.array() / c2).sqrt() + cfg.eps);
}

}  // namespace pinncw
