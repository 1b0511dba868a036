#pragma once

#include "tna/random.hpp"
#include "tna/tensor.hpp"

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace tna {

struct NamedParameter {
  std::string name;
  Tensor tensor;
};

/// Layer input features. std::nullopt stands for the identity matrix X = I,
/// which lets the first layer compute A_hat * W without materializing X.
using Features = std::optional<Tensor>;

// ---- initialization ---------------------------------------------------------

double glorot_bound(std::size_t fan_in, std::size_t fan_out);
/// Uniform in [-b, b] with b = sqrt(6 / (rows + cols)).
Tensor glorot_uniform(std::size_t rows, std::size_t cols, Rng& rng);
Tensor zeros_parameter(std::size_t rows, std::size_t cols);
Tensor ones_parameter(std::size_t rows, std::size_t cols);

// ---- GCN ------------------------------------------------------------------------

struct GcnLayer {
  Tensor weight;  // d_in x d_out, no bias

  static GcnLayer init(std::size_t d_in, std::size_t d_out, Rng& rng);
  std::size_t input_dim() const { return weight.rows(); }
  std::size_t output_dim() const { return weight.cols(); }
  void collect(const std::string& prefix, std::vector<NamedParameter>& out) const;
};

/// A_hat * H * W without the nonlinearity.
Tensor gcn_propagate(const GcnLayer& layer, const SparseMatrix& adjacency, const Features& h);
/// ReLU(A_hat * H * W).
Tensor gcn_forward(const GcnLayer& layer, const SparseMatrix& adjacency, const Features& h);
/// Dense-adjacency form of gcn_forward.
Tensor gcn_forward(const GcnLayer& layer, const Tensor& adjacency, const Tensor& h);

// ---- GRU ----------------------------------------------------------------------

struct GruCell {
  Tensor input_update, input_reset, input_candidate;     // U_u, U_r, U_h
  Tensor hidden_update, hidden_reset, hidden_candidate;  // W_u, W_r, W_h
  Tensor bias_update, bias_reset, bias_candidate;        // 1 x d

  static GruCell init(std::size_t dim, Rng& rng);
  /// All-zero cell; tests and hand evaluations start from here.
  static GruCell zeros(std::size_t dim);
  std::size_t dim() const { return input_update.rows(); }
  void collect(const std::string& prefix, std::vector<NamedParameter>& out) const;
};

/// One recurrence step applied row-wise (vertices are the batch dimension):
///   u = sigmoid(x U_u + h W_u + b_u)
///   r = sigmoid(x U_r + h W_r + b_r)
///   c = tanh(x U_h + (r * h) W_h + b_h)
///   h' = (1 - u) * h + u * c
Tensor gru_step(const GruCell& cell, const Tensor& x, const Tensor& h_prev);

// ---- TNA block ----------------------------------------------------------------------

struct LayerNormParams {
  Tensor gain;  // 1 x d
  Tensor bias;  // 1 x d

  static LayerNormParams init(std::size_t dim);
};

struct TnaBlock {
  GcnLayer gcn;
  GruCell gru;
  std::optional<LayerNormParams> ln_gcn;  // present iff layer norm is enabled
  std::optional<LayerNormParams> ln_gru;
  Tensor skip_weight;  // 2*d_out x d_out, defined iff the skip layer is enabled
  Tensor skip_bias;    // 1 x d_out
  double leaky_slope = kDefaultLeakySlope;

  static TnaBlock init(std::size_t d_in, std::size_t d_out, bool use_layer_norm, bool use_skip, double leaky_slope,
                       Rng& rng);

  bool use_layer_norm() const { return ln_gcn.has_value(); }
  bool use_skip() const { return skip_weight.defined(); }
  std::size_t output_dim() const { return gcn.output_dim(); }
  void collect(const std::string& prefix, std::vector<NamedParameter>& out) const;
};

struct BlockOutput {
  Tensor output;  // H_out, input to the next layer
  Tensor hidden;  // H_GRU, carried to the next snapshot
};

/// GCN -> [LN] -> GRU -> [LN], then leaky_relu(concat(H_gcn, H_gru) W_s + b)
/// when the skip layer is enabled, otherwise H_gru.
BlockOutput tna_block_forward(const TnaBlock& block, const SparseMatrix& adjacency, const Features& h_in,
                              const Tensor& h_prev);

}  // namespace tna
