#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "pinncw/common.hpp"
#include "pinncw/numeric.hpp"
#include "pinncw/rng.hpp"

namespace pinncw {

enum class Activation { Tanh };

inline const char* activation_name(Activation a) {
  (void)a;
  return "tanh";
}

// Fully connected network: `hidden_layers` tanh layers of `hidden_width`
// units followed by an affine output layer.
struct NetworkConfig {
  int input_dim = 1;
  int output_dim = 1;
  int hidden_layers = 1;
  int hidden_width = 1;
  Activation activation = Activation::Tanh;

  void validate() const {
    check(input_dim >= 1 && output_dim >= 1 && hidden_layers >= 1 &&
              hidden_width >= 1,
          "NetworkConfig: all dimensions must be >= 1");
  }

  // Number of affine maps (hidden layers plus the output layer).
  int layer_count() const { return hidden_layers + 1; }

  int layer_rows(int l) const {
    return l == hidden_layers ? output_dim : hidden_width;
  }
  int layer_cols(int l) const { return l == 0 ? input_dim : hidden_width; }

  // Flat parameter layout, frozen for checkpoint portability: for each layer
  // in order, the weight matrix in row-major order followed by the bias.
  long weight_offset(int l) const {
    long off = 0;
    for (int i = 0; i < l; ++i)
      off += (long)layer_rows(i) * layer_cols(i) + layer_rows(i);
    return off;
  }
  long bias_offset(int l) const {
    return weight_offset(l) + (long)layer_rows(l) * layer_cols(l);
  }
  long param_count() const { return weight_offset(layer_count()); }

  bool operator==(const NetworkConfig&) const = default;
};

using ParamVector = Vec;

inline Eigen::Map<const RowMajorMat> weight_view(const NetworkConfig& cfg,
                                                 const Vec& params, int l) {
  return {params.data() + cfg.weight_offset(l), cfg.layer_rows(l),
          cfg.layer_cols(l)};
}
inline Eigen::Map<const Vec> bias_view(const NetworkConfig& cfg,
                                       const Vec& params, int l) {
  return {params.data() + cfg.bias_offset(l), cfg.layer_rows(l)};
}
inline Eigen::Map<RowMajorMat> weight_view(const NetworkConfig& cfg,
                                           Vec& params, int l) {
  return {params.data() + cfg.weight_offset(l), cfg.layer_rows(l),
          cfg.layer_cols(l)};
}
inline Eigen::Map<Vec> bias_view(const NetworkConfig& cfg, Vec& params,
                                 int l) {
  return {params.data() + cfg.bias_offset(l), cfg.layer_rows(l)};
}

// Glorot-uniform weights (bound sqrt(6/(fan_in+fan_out))), zero biases.
// Identical (config, seed) pairs produce bit-identical vectors.
inline Vec init_params(const NetworkConfig& cfg, uint64_t seed) {
  cfg.validate();
  Vec params = Vec::Zero(cfg.param_count());
  Rng rng(seed);
  for (int l = 0; l < cfg.layer_count(); ++l) {
    const int rows = cfg.layer_rows(l), cols = cfg.layer_cols(l);
    const double bound = std::sqrt(6.0 / (rows + cols));
    double* w = params.data() + cfg.weight_offset(l);
    for (long i = 0; i < (long)rows * cols; ++i)
      w[i] = bound * (2.0 * rng.uniform() - 1.0);
    // biases stay zero
  }
  return params;
}

// Plain batched forward pass (values only); one point per column. Built on
// the fixed-accumulation-order kernel, so a point's output is bit-identical
// whether it is evaluated alone or anywhere inside a batch.
inline Mat forward(const NetworkConfig& cfg, const Vec& params,
                   const Mat& inputs) {
  cfg.validate();
  check(params.size() == cfg.param_count(), "forward: parameter size mismatch");
  check(inputs.rows() == cfg.input_dim, "forward: input dimension mismatch");
  check(inputs.allFinite(), "forward: non-finite input");
  Mat a = inputs, z;
  for (int l = 0; l < cfg.layer_count(); ++l) {
    matmul_forward(params.data() + cfg.weight_offset(l), cfg.layer_rows(l),
                   cfg.layer_cols(l), a, z);
    z.colwise() += bias_view(cfg, params, l);
    if (l < cfg.hidden_layers) {
      tanh_fast_inplace(z.data(), z.size());
      std::swap(a, z);
    } else {
      a = std::move(z);
    }
  }
  return a;
}

// Checkpoint format: text header (magic line, then the NetworkConfig fields
// in decimal) followed by the raw parameter doubles, little-endian.
inline constexpr const char* kCheckpointMagic = "PINNCW1";

static_assert(std::endian::native == std::endian::little,
              "checkpoint writer assumes a little-endian host");

inline void save_checkpoint(const std::string& path, const NetworkConfig& cfg,
                            const Vec& params) {
  check(params.size() == cfg.param_count(),
        "save_checkpoint: parameter size mismatch");
  std::ofstream out(path, std::ios::binary);
  check(out.good(), "save_checkpoint: cannot open " + path);
  out << kCheckpointMagic << "\n"
      << cfg.input_dim << " " << cfg.output_dim << " " << cfg.hidden_layers
      << " " << cfg.hidden_width << " " << activation_name(cfg.activation)
      << "\n";
  out.write(reinterpret_cast<const char*>(params.data()),
            (std::streamsize)params.size() * 8);
  check(out.good(), "save_checkpoint: write failed for " + path);
}

inline std::pair<NetworkConfig, Vec> load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  check(in.good(), "load_checkpoint: cannot open " + path);
  std::string magic;
  std::getline(in, magic);
  check(magic == kCheckpointMagic, "load_checkpoint: bad magic in " + path);
  NetworkConfig cfg;
  std::string act;
  in >> cfg.input_dim >> cfg.output_dim >> cfg.hidden_layers >>
      cfg.hidden_width >> act;
  check(in.good() && act == "tanh", "load_checkpoint: bad header in " + path);
  in.ignore(1);  // newline before the binary block
  cfg.validate();
  Vec params(cfg.param_count());
  in.read(reinterpret_cast<char*>(params.data()),
          (std::streamsize)params.size() * 8);
  check(in.gcount() == (std::streamsize)params.size() * 8,
        "load_checkpoint: truncated parameter block in " + path);
  check(params.allFinite(), "load_checkpoint: non-finite parameters");
  return {cfg, std::move(params)};
}

}  // namespace pinncw
