#pragma once

#include <array>
#include <chrono>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pinncw/common.hpp"
#include "pinncw/jet2.hpp"
#include "pinncw/metrics.hpp"
#include "pinncw/optimizer.hpp"
#include "pinncw/problems.hpp"
#include "pinncw/resampling.hpp"
#include "pinncw/tape.hpp"
#include "pinncw/weighting.hpp"

namespace pinncw {

struct TrainConfig {
  long iterations = 1000;
  LrSchedule lr;
  AdamConfig adam;
  long weight_update_stride = 1;  // 0 disables dual updates entirely
  long resample_every = 200;      // 0 disables resampling
  long checkpoint_every = 100;
  long collocation_snapshot_every = 0;  // 0: only initial + final (if any)
  long weight_snapshot_every = 0;

  void validate() const {
    check(iterations >= 1, "TrainConfig: iterations must be >= 1");
    lr.validate();
    check(weight_update_stride >= 0, "TrainConfig: stride must be >= 0");
    check(resample_every >= 0, "TrainConfig: resample_every must be >= 0");
    check(checkpoint_every >= 1, "TrainConfig: checkpoint_every must be >= 1");
  }
};

struct SamplingConfig {
  int n_f = 1000;
  int test_points = 90000;
  FixedLossParams fixed;
};

struct WeightSnapshot {
  long iteration = 0;
  Mat points;
  Vec lambdas;
};

struct TrainResult {
  std::vector<NetworkConfig> nets;
  std::vector<Vec> params;
  std::vector<TrainingRecord> history;
  CollocationSet colloc;
  Mat initial_points;
  WeightState weights{};
  std::vector<std::pair<long, Mat>> colloc_snapshots;
  std::vector<WeightSnapshot> weight_snapshots;
  long degenerate_weight_updates = 0;
  bool diverged = false;
  std::string divergence_note;
  long iterations_run = 0;
  double total_wall_ms = 0.0;

  const TrainingRecord& final_record() const {
    check(!history.empty(), "TrainResult: empty history");
    return history.back();
  }
};

// Signed PDE residuals on a point batch through the plain double path (no
// tape); used for neighborhood smoothing and as the oracle-side evaluator in
// tests.
template <class P>
Vec residual_batch(const P& prob, const std::vector<NetworkConfig>& nets,
                   const std::vector<Vec>& params, const Mat& pts) {
  ScalarCtx<double> ctx;
  std::array<JetComponents, P::kNets> comps;
  for (int i = 0; i < P::kNets; ++i)
    comps[i] = jet_forward(nets[i], params[i], pts, prob.residual_request(i));
  Vec r(pts.cols());
  for (long pt = 0; pt < pts.cols(); ++pt) {
    const double* x = pts.col(pt).data();
    auto coords = coordinate_jets<double, P::kDim>(ctx, x);
    std::array<Jet2<double, P::kDim>, P::kNets> cons;
    for (int i = 0; i < P::kNets; ++i)
      cons[i] = prob.constrain_jet(
          ctx, coords, raw_jet<P::kDim>(comps[i], prob.residual_request(i), pt),
          i);
    r[pt] = prob.residual_constrained(
        ctx, x, std::span<const Jet2<double, P::kDim>>(cons));
  }
  return r;
}

namespace detail {

// Per-iteration loss graph: residual variables at the collocation points plus
// one fused term per fixed loss, all evaluated at the current parameters.
template <class P>
struct LossGraphState {
  ad::Tape tape;
  std::vector<ad::Var> residual_vars;
  Vec residual_values;
  std::vector<ad::Var> fixed_terms;
  std::vector<int> param_ids;
  bool fresh = false;

  void build(const P& prob, const std::vector<NetworkConfig>& nets,
             const std::vector<Vec>& params, const Mat& points,
             const std::vector<FixedLossData>& fixed) {
    tape.clear();
    param_ids.clear();
    for (int i = 0; i < P::kNets; ++i)
      param_ids.push_back(tape.register_params(nets[i], params[i]));

    std::array<int, P::kNets> blocks;
    for (int i = 0; i < P::kNets; ++i)
      blocks[i] =
          tape.eval_jets(param_ids[i], points, prob.residual_request(i));

    ScalarCtx<ad::Var> ctx{&tape};
    const long n = points.cols();
    residual_vars.assign((std::size_t)n, {});
    residual_values = Vec(n);
    for (long pt = 0; pt < n; ++pt) {
      const double* x = points.col(pt).data();
      auto coords = coordinate_jets<ad::Var, P::kDim>(ctx, x);
      std::array<Jet2<ad::Var, P::kDim>, P::kNets> cons;
      for (int i = 0; i < P::kNets; ++i)
        cons[i] = prob.constrain_jet(
            ctx, coords, raw_jet<P::kDim>(tape, blocks[i], (int)pt), i);
      residual_vars[pt] = prob.residual_constrained(
          ctx, x, std::span<const Jet2<ad::Var, P::kDim>>(cons));
      residual_values[pt] = tape.value(residual_vars[pt]);
    }

    fixed_terms.clear();
    for (const auto& fl : fixed) {
      const int blk = tape.eval_jets(param_ids[fl.net], fl.points,
                                     JetRequest::value_only(P::kDim));
      const long m = fl.points.cols();
      std::vector<ad::Var> diffs((std::size_t)m);
      for (long i = 0; i < m; ++i)
        diffs[i] = prob.predict_from_raw(ctx, fl.points.col(i).data(),
                                         tape.value_leaf(blk, (int)i),
                                         fl.net) -
                   fl.targets[i];
      const std::vector<double> coefs((std::size_t)m, fl.weight / (double)m);
      fixed_terms.push_back(tape.weighted_sum_sq(diffs, coefs));
    }
    fresh = true;
  }
};

}  // namespace detail

// Alternating descent/ascent training loop:
//   1. assemble the weighted residual + fixed losses at the current
//      parameters, with the point weights held constant,
//   2. Adam step on all networks,
//   3. re-evaluate residuals at the updated parameters and apply the
//      scheme's weight update (smoothed over sampled neighborhoods for the
//      convolution family),
//   4. on schedule, move collocation points to their highest-residual
//      neighborhood candidates,
//   5. on the checkpoint cadence, record losses and test metrics.
// The post-step evaluation doubles as the next iteration's loss graph, so
// each iteration costs one graph build, one reverse sweep and (for the
// convolution family) M forward residual evaluations per point.
template <class P>
TrainResult train(const P& prob, const std::vector<NetworkConfig>& nets,
                  const WeightConfig& wcfg, const TrainConfig& tcfg,
                  const SamplingConfig& scfg, uint64_t seed) {
  tcfg.validate();
  wcfg.validate();
  check((int)nets.size() == P::kNets, "train: network count mismatch");
  check(scfg.n_f >= 1, "train: need at least one collocation point");

  const auto t_start = std::chrono::steady_clock::now();
  TrainResult res;
  res.nets = nets;
  for (int i = 0; i < P::kNets; ++i) {
    nets[i].validate();
    check(nets[i].input_dim == P::kDim, "train: network input dim mismatch");
    res.params.push_back(
        init_params(nets[i], derive_seed(seed, Stream::ParamInit, i)));
  }

  res.colloc = CollocationSet::init(sample_uniform(
      prob, scfg.n_f, Region::Interior, derive_seed(seed, Stream::Collocation)));
  res.initial_points = res.colloc.points;
  const std::vector<FixedLossData> fixed =
      prob.make_fixed_losses(seed, scfg.fixed);
  res.weights = WeightState::init(wcfg, scfg.n_f);
  const TestSet test = make_test_set(prob, scfg.test_points, seed);
  const Box box = prob.box();

  std::vector<AdamState> adam;
  for (int i = 0; i < P::kNets; ++i)
    adam.push_back(AdamState::init(nets[i].param_count()));

  detail::LossGraphState<P> graph;
  const bool dual_enabled =
      tcfg.weight_update_stride > 0 && wcfg.scheme != Scheme::Uniform;

  auto snapshot = [&](long iter) {
    if (tcfg.collocation_snapshot_every > 0 &&
        (iter == 0 || iter == tcfg.iterations ||
         iter % tcfg.collocation_snapshot_every == 0))
      res.colloc_snapshots.emplace_back(iter, res.colloc.points);
    if (tcfg.weight_snapshot_every > 0 &&
        (iter == 0 || iter == tcfg.iterations ||
         iter % tcfg.weight_snapshot_every == 0))
      res.weight_snapshots.push_back(
          {iter, res.colloc.points, res.weights.lambdas});
  };
  snapshot(0);

  auto checkpoint_clock = std::chrono::steady_clock::now();
  for (long iter = 1; iter <= tcfg.iterations; ++iter) {
    if (!graph.fresh)
      graph.build(prob, nets, res.params, res.colloc.points, fixed);

    // ---- primal step ----
    ad::Var loss_var =
        weighted_residual_loss(graph.residual_vars, res.weights.lambdas);
    const double loss_residual = graph.tape.value(loss_var);
    double loss_fixed = 0.0;
    for (ad::Var term : graph.fixed_terms) {
      loss_var = loss_var + term;
      loss_fixed += graph.tape.value(term);
    }
    const double loss_total = graph.tape.value(loss_var);
    if (!std::isfinite(loss_total)) {
      res.diverged = true;
      res.divergence_note =
          "non-finite loss at iteration " + std::to_string(iter);
      break;
    }
    const double lr = lr_at(tcfg.lr, iter - 1);
    try {
      auto grads = graph.tape.param_gradient(loss_var);
      for (int i = 0; i < P::kNets; ++i)
        adam_step(res.params[i], grads[i], adam[i], lr, tcfg.adam);
    } catch (const error& e) {
      res.diverged = true;
      res.divergence_note = std::string(e.what()) + " at iteration " +
                            std::to_string(iter);
      break;
    }
    graph.fresh = false;

    // ---- dual step at the updated parameters ----
    const bool stride_hit =
        dual_enabled && iter % tcfg.weight_update_stride == 0;
    const bool resample_due = tcfg.resample_every >= 1 &&
                              should_resample(iter, tcfg.resample_every,
                                              wcfg.scheme);
    SmoothedResiduals smoothed;
    if (stride_hit || resample_due) {
      graph.build(prob, nets, res.params, res.colloc.points, fixed);
      if (is_cw_family(wcfg.scheme)) {
        auto batch_fn = [&](const Mat& pts) {
          return residual_batch(prob, nets, res.params, pts);
        };
        smoothed = smooth_residuals_batch(
            batch_fn, res.colloc.points, res.colloc.centers, wcfg.neighbors,
            wcfg.epsilon, box, derive_seed(seed, Stream::Neighbors), iter,
            graph.residual_values);
        if (stride_hit && !update_cw(res.weights, smoothed))
          res.degenerate_weight_updates += 1;
      } else if (wcfg.scheme == Scheme::RBA) {
        if (!update_rba(res.weights, graph.residual_values))
          res.degenerate_weight_updates += 1;
      } else if (wcfg.scheme == Scheme::SA) {
        update_sa(res.weights, graph.residual_values);
      }
    }

    if (resample_due) {
      resample(res.colloc, smoothed, wcfg.scheme, iter);
      graph.fresh = false;  // points moved; jets must be re-evaluated
    }

    // ---- bookkeeping ----
    if (iter % tcfg.checkpoint_every == 0 || iter == tcfg.iterations) {
      TrainingRecord rec;
      rec.iteration = iter;
      rec.loss_total = loss_total;
      rec.loss_residual = loss_residual;
      rec.loss_fixed = loss_fixed;
      rec.fields = evaluate(prob, nets, res.params, test);
      rec.lr = lr;
      const auto now = std::chrono::steady_clock::now();
      rec.wall_ms =
          std::chrono::duration<double, std::milli>(now - checkpoint_clock)
              .count();
      checkpoint_clock = now;
      res.history.push_back(std::move(rec));
    }
    snapshot(iter);
    res.iterations_run = iter;
  }

  res.total_wall_ms = std::chrono::duration<double, std::milli>(
                          std::chrono::steady_clock::now() - t_start)
                          .count();
  return res;
}

inline TrainResult train(const Problem& prob,
                         const std::vector<NetworkConfig>& nets,
                         const WeightConfig& wcfg, const TrainConfig& tcfg,
                         const SamplingConfig& scfg, uint64_t seed) {
  return std::visit(
      [&](const auto& p) { return train(p, nets, wcfg, tcfg, scfg, seed); },
      prob);
}

}  // namespace pinncw
