#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <span>
#include <utility>
#include <vector>

#include "pinncw/common.hpp"
#include "pinncw/jet.hpp"
#include "pinncw/mlp.hpp"

namespace pinncw::ad {

// Reverse-mode tape over scalars. Network evaluations enter as blocks of
// leaf variables produced by the batched jet engine; everything downstream
// (hard-constraint transforms, residual operators, loss reductions) is
// recorded as ordinary scalar nodes. Values are computed eagerly at record
// time, which lets the builder fold constants and drop no-op terms.
//
// backward() sweeps the scalar nodes in reverse creation order, then hands
// each jet block's accumulated component adjoints to the jet engine's
// reverse pass to obtain parameter gradients.

enum class Op : uint8_t {
  Const,
  JetLeaf,
  Add,
  Sub,
  Mul,
  Div,
  Neg,
  Sin,
  Cos,
  Exp,
  Tanh,
  Sqr,
  WeightedSumSq,  // sum_i c_i * x_i^2 over an argument range
  LinComb,        // sum_i c_i * x_i   over an argument range
};

class Tape;

struct Var {
  Tape* tape = nullptr;
  int32_t idx = -1;
  bool valid() const { return tape != nullptr && idx >= 0; }
};

class Tape {
 public:
  // ---- parameter registration -------------------------------------------
  // Each trainable parameter vector participating in a loss must be
  // registered exactly once before evaluating networks against it.
  int register_params(const NetworkConfig& cfg, const Vec& params) {
    check(params.size() == cfg.param_count(),
          "Tape: parameter size mismatch at registration");
    for (const auto& p : params_)
      check(p.values != &params,
            "Tape: parameter vector registered more than once");
    params_.push_back({cfg, &params});
    return (int)params_.size() - 1;
  }

  // ---- network evaluation -------------------------------------------------
  struct JetBlock {
    int param_id = -1;
    JetRequest req;
    JetComponents out;
    JetWorkspace ws;
    int32_t first_leaf = -1;
    int n = 0;
  };

  // Evaluates jets for a batch of points (one per column) and exposes every
  // requested component of every point as a leaf variable.
  int eval_jets(int param_id, const Mat& points, const JetRequest& req) {
    check(param_id >= 0 && param_id < (int)params_.size(),
          "Tape: jet evaluation against unregistered parameters");
    const auto& pb = params_[param_id];
    JetBlock blk;
    blk.param_id = param_id;
    blk.req = req;
    blk.out = jet_forward(pb.cfg, *pb.values, points, req, &blk.ws);
    blk.n = (int)points.cols();
    blk.first_leaf = (int32_t)nodes_.size();
    const int comps = req.comps_per_output() * pb.cfg.output_dim;
    const int total = comps * blk.n;
    nodes_.reserve(nodes_.size() + total);
    for (int pt = 0; pt < blk.n; ++pt)
      for (int out = 0; out < pb.cfg.output_dim; ++out) {
        push(Op::JetLeaf, -1, -1, blk.out.value(out, pt));
        for (int k = 0; k < req.n_dirs(); ++k)
          push(Op::JetLeaf, -1, -1, blk.out.grad[k](out, pt));
        for (int q = 0; q < req.n_pairs(); ++q)
          push(Op::JetLeaf, -1, -1, blk.out.hess[q](out, pt));
      }
    blocks_.push_back(std::move(blk));
    return (int)blocks_.size() - 1;
  }

  // Leaf accessors (out = output row of the network).
  Var value_leaf(int block, int pt, int out = 0) {
    return leaf(block, pt, out, 0);
  }
  Var grad_leaf(int block, int pt, int coord, int out = 0) {
    const auto& b = blocks_[block];
    return leaf(block, pt, out, 1 + b.req.dir_index(coord));
  }
  Var hess_leaf(int block, int pt, int ca, int cb, int out = 0) {
    const auto& b = blocks_[block];
    return leaf(block, pt, out,
                1 + b.req.n_dirs() + b.req.pair_index(ca, cb));
  }
  const JetRequest& block_request(int block) const {
    return blocks_[block].req;
  }

  // ---- scalar ops ---------------------------------------------------------
  Var constant(double v) { return {this, push(Op::Const, -1, -1, v)}; }

  Var add(Var x, Var y) {
    if (is_const(x) && is_const(y)) return constant(val(x) + val(y));
    if (is_const(x, 0.0)) return y;
    if (is_const(y, 0.0)) return x;
    return {this, push(Op::Add, x.idx, y.idx, val(x) + val(y))};
  }
  Var sub(Var x, Var y) {
    if (is_const(x) && is_const(y)) return constant(val(x) - val(y));
    if (is_const(y, 0.0)) return x;
    if (is_const(x, 0.0)) return neg(y);
    return {this, push(Op::Sub, x.idx, y.idx, val(x) - val(y))};
  }
  Var mul(Var x, Var y) {
    if (is_const(x) && is_const(y)) return constant(val(x) * val(y));
    if (is_const(x, 0.0) || is_const(y, 0.0)) return constant(0.0);
    if (is_const(x, 1.0)) return y;
    if (is_const(y, 1.0)) return x;
    return {this, push(Op::Mul, x.idx, y.idx, val(x) * val(y))};
  }
  Var div(Var x, Var y) {
    if (is_const(x) && is_const(y)) return constant(val(x) / val(y));
    if (is_const(y, 1.0)) return x;
    if (is_const(x, 0.0)) return constant(0.0);
    return {this, push(Op::Div, x.idx, y.idx, val(x) / val(y))};
  }
  Var neg(Var x) {
    if (is_const(x)) return constant(-val(x));
    return {this, push(Op::Neg, x.idx, -1, -val(x))};
  }
  Var sin(Var x) {
    if (is_const(x)) return constant(std::sin(val(x)));
    return {this, push(Op::Sin, x.idx, -1, std::sin(val(x)))};
  }
  Var cos(Var x) {
    if (is_const(x)) return constant(std::cos(val(x)));
    return {this, push(Op::Cos, x.idx, -1, std::cos(val(x)))};
  }
  Var exp(Var x) {
    if (is_const(x)) return constant(std::exp(val(x)));
    return {this, push(Op::Exp, x.idx, -1, std::exp(val(x)))};
  }
  Var tanh(Var x) {
    if (is_const(x)) return constant(tanh_fast_scalar(val(x)));
    return {this, push(Op::Tanh, x.idx, -1, tanh_fast_scalar(val(x)))};
  }
  Var sqr(Var x) {
    if (is_const(x)) return constant(val(x) * val(x));
    return {this, push(Op::Sqr, x.idx, -1, val(x) * val(x))};
  }

  // sum_i coefs[i] * xs[i]^2 as a single fused node (the workhorse for
  // weighted residual and data losses). Coefficients are constants: no
  // gradient flows through them.
  Var weighted_sum_sq(std::span<const Var> xs, std::span<const double> coefs) {
    check(xs.size() == coefs.size(), "weighted_sum_sq: length mismatch");
    return nary(Op::WeightedSumSq, xs, coefs);
  }
  Var lin_comb(std::span<const Var> xs, std::span<const double> coefs) {
    check(xs.size() == coefs.size(), "lin_comb: length mismatch");
    return nary(Op::LinComb, xs, coefs);
  }

  double value(Var x) const { return val(x); }

  // ---- reverse sweep ------------------------------------------------------
  // Returns the gradient of `root` with respect to each registered parameter
  // vector, keyed by registration id.
  std::map<int, Vec> param_gradient(Var root) {
    check(root.tape == this, "param_gradient: variable from another tape");
    check(std::isfinite(val(root)), "param_gradient: non-finite loss value");
    adj_.assign(nodes_.size(), 0.0);
    adj_[root.idx] = 1.0;
    for (int32_t i = root.idx; i >= 0; --i) {
      const Node& nd = nodes_[i];
      const double a = adj_[i];
      if (a == 0.0 && nd.op != Op::JetLeaf) continue;
      switch (nd.op) {
        case Op::Const:
        case Op::JetLeaf:
          break;
        case Op::Add:
          adj_[nd.a] += a;
          adj_[nd.b] += a;
          break;
        case Op::Sub:
          adj_[nd.a] += a;
          adj_[nd.b] -= a;
          break;
        case Op::Mul:
          adj_[nd.a] += a * val_[nd.b];
          adj_[nd.b] += a * val_[nd.a];
          break;
        case Op::Div:
          adj_[nd.a] += a / val_[nd.b];
          adj_[nd.b] -= a * val_[i] / val_[nd.b];
          break;
        case Op::Neg:
          adj_[nd.a] -= a;
          break;
        case Op::Sin:
          adj_[nd.a] += a * std::cos(val_[nd.a]);
          break;
        case Op::Cos:
          adj_[nd.a] -= a * std::sin(val_[nd.a]);
          break;
        case Op::Exp:
          adj_[nd.a] += a * val_[i];
          break;
        case Op::Tanh:
          adj_[nd.a] += a * (1.0 - val_[i] * val_[i]);
          break;
        case Op::Sqr:
          adj_[nd.a] += a * 2.0 * val_[nd.a];
          break;
        case Op::WeightedSumSq:
          for (int32_t k = 0; k < nd.b; ++k) {
            const int32_t arg = args_[nd.a + k];
            adj_[arg] += a * 2.0 * coefs_[nd.a + k] * val_[arg];
          }
          break;
        case Op::LinComb:
          for (int32_t k = 0; k < nd.b; ++k)
            adj_[args_[nd.a + k]] += a * coefs_[nd.a + k];
          break;
      }
    }

    std::map<int, Vec> grads;
    for (const auto& pb : params_)
      grads.emplace((int)(&pb - params_.data()),
                    Vec::Zero(pb.cfg.param_count()));
    for (const auto& blk : blocks_) {
      const auto& pb = params_[blk.param_id];
      const int dout = pb.cfg.output_dim;
      JetAdjoints seed;
      seed.value = Mat::Zero(dout, blk.n);
      seed.grad.assign(blk.req.n_dirs(), Mat::Zero(dout, blk.n));
      seed.hess.assign(blk.req.n_pairs(), Mat::Zero(dout, blk.n));
      const int comps = blk.req.comps_per_output();
      int32_t leaf = blk.first_leaf;
      for (int pt = 0; pt < blk.n; ++pt)
        for (int out = 0; out < dout; ++out) {
          seed.value(out, pt) = adj_[leaf++];
          for (int k = 0; k < blk.req.n_dirs(); ++k)
            seed.grad[k](out, pt) = adj_[leaf++];
          for (int q = 0; q < blk.req.n_pairs(); ++q)
            seed.hess[q](out, pt) = adj_[leaf++];
        }
      (void)comps;
      jet_backward(pb.cfg, *pb.values, blk.ws, seed, grads[blk.param_id]);
    }
    return grads;
  }

  // Keeps allocated capacity; parameter registrations are dropped.
  void clear() {
    nodes_.clear();
    val_.clear();
    adj_.clear();
    args_.clear();
    coefs_.clear();
    blocks_.clear();
    params_.clear();
  }

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Op op;
    int32_t a = -1;
    int32_t b = -1;
  };
  struct ParamBlock {
    NetworkConfig cfg;
    const Vec* values;
  };

  int32_t push(Op op, int32_t a, int32_t b, double v) {
    nodes_.push_back({op, a, b});
    val_.push_back(v);
    return (int32_t)nodes_.size() - 1;
  }

  Var nary(Op op, std::span<const Var> xs, std::span<const double> coefs) {
    const int32_t off = (int32_t)args_.size();
    double total = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      check(xs[i].tape == this, "Tape: variable from another tape");
      args_.push_back(xs[i].idx);
      coefs_.push_back(coefs[i]);
      const double x = val(xs[i]);
      total += op == Op::WeightedSumSq ? coefs[i] * x * x : coefs[i] * x;
    }
    Node nd{op, off, (int32_t)xs.size()};
    nodes_.push_back(nd);
    val_.push_back(total);
    return {this, (int32_t)nodes_.size() - 1};
  }

  Var leaf(int block, int pt, int out, int comp_in_point) const {
    const auto& b = blocks_[block];
    const int comps = b.req.comps_per_output();
    const int dout = params_[b.param_id].cfg.output_dim;
    check(pt >= 0 && pt < b.n && out >= 0 && out < dout,
          "Tape: leaf index out of range");
    return {const_cast<Tape*>(this),
            b.first_leaf + (pt * dout + out) * comps + comp_in_point};
  }

  double val(Var x) const {
    check(x.tape == this && x.idx >= 0, "Tape: invalid variable");
    return val_[x.idx];
  }
  bool is_const(Var x) const { return nodes_[x.idx].op == Op::Const; }
  bool is_const(Var x, double v) const {
    return is_const(x) && val_[x.idx] == v;
  }

  std::vector<Node> nodes_;
  std::vector<double> val_, adj_;
  std::vector<int32_t> args_;
  std::vector<double> coefs_;
  std::vector<JetBlock> blocks_;
  std::vector<ParamBlock> params_;
};

// Operator sugar so the problem templates read like the formulas they encode.
inline Var operator+(Var x, Var y) { return x.tape->add(x, y); }
inline Var operator-(Var x, Var y) { return x.tape->sub(x, y); }
inline Var operator*(Var x, Var y) { return x.tape->mul(x, y); }
inline Var operator/(Var x, Var y) { return x.tape->div(x, y); }
inline Var operator-(Var x) { return x.tape->neg(x); }
inline Var operator+(Var x, double c) { return x + x.tape->constant(c); }
inline Var operator+(double c, Var x) { return x.tape->constant(c) + x; }
inline Var operator-(Var x, double c) { return x - x.tape->constant(c); }
inline Var operator-(double c, Var x) { return x.tape->constant(c) - x; }
inline Var operator*(Var x, double c) { return x * x.tape->constant(c); }
inline Var operator*(double c, Var x) { return x.tape->constant(c) * x; }
inline Var operator/(Var x, double c) { return x / x.tape->constant(c); }
inline Var operator/(double c, Var x) { return x.tape->constant(c) / x; }
inline Var sin(Var x) { return x.tape->sin(x); }
inline Var cos(Var x) { return x.tape->cos(x); }
inline Var exp(Var x) { return x.tape->exp(x); }
inline Var tanh(Var x) { return x.tape->tanh(x); }
inline Var sqr(Var x) { return x.tape->sqr(x); }

}  // namespace pinncw::ad
