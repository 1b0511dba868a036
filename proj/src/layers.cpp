#include "tna/layers.hpp"

#include "tna/errors.hpp"

#include <fmt/format.h>

#include <cmath>

namespace tna {

double glorot_bound(std::size_t fan_in, std::size_t fan_out) {
  return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

Tensor glorot_uniform(std::size_t rows, std::size_t cols, Rng& rng) {
  const double b = glorot_bound(rows, cols);
  std::uniform_real_distribution<double> dist(-b, b);
  Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
  return Tensor::leaf(std::move(m));
}

Tensor zeros_parameter(std::size_t rows, std::size_t cols) { return Tensor::zeros(rows, cols, true); }

Tensor ones_parameter(std::size_t rows, std::size_t cols) {
  return Tensor::leaf(Matrix::Ones(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols)));
}

// ---- GCN ------------------------------------------------------------------------

GcnLayer GcnLayer::init(std::size_t d_in, std::size_t d_out, Rng& rng) { return {glorot_uniform(d_in, d_out, rng)}; }

void GcnLayer::collect(const std::string& prefix, std::vector<NamedParameter>& out) const {
  out.push_back({prefix + ".weight", weight});
}

Tensor gcn_propagate(const GcnLayer& layer, const SparseMatrix& adjacency, const Features& h) {
  if (!h) {
    if (static_cast<std::size_t>(adjacency.cols()) != layer.input_dim()) {
      throw ShapeError(fmt::format("gcn: identity features of size {} do not match weight {}", adjacency.cols(),
                                   layer.weight.shape_string()));
    }
    return spmm(adjacency, layer.weight);
  }
  // (A_hat H) W and A_hat (H W) agree; the latter keeps the sparse product narrow.
  return spmm(adjacency, matmul(*h, layer.weight));
}

Tensor gcn_forward(const GcnLayer& layer, const SparseMatrix& adjacency, const Features& h) {
  return relu(gcn_propagate(layer, adjacency, h));
}

Tensor gcn_forward(const GcnLayer& layer, const Tensor& adjacency, const Tensor& h) {
  return relu(matmul(matmul(adjacency, h), layer.weight));
}

// ---- GRU ----------------------------------------------------------------------

GruCell GruCell::init(std::size_t dim, Rng& rng) {
  GruCell c;
  c.input_update = glorot_uniform(dim, dim, rng);
  c.input_reset = glorot_uniform(dim, dim, rng);
  c.input_candidate = glorot_uniform(dim, dim, rng);
  c.hidden_update = glorot_uniform(dim, dim, rng);
  c.hidden_reset = glorot_uniform(dim, dim, rng);
  c.hidden_candidate = glorot_uniform(dim, dim, rng);
  c.bias_update = zeros_parameter(1, dim);
  c.bias_reset = zeros_parameter(1, dim);
  c.bias_candidate = zeros_parameter(1, dim);
  return c;
}

GruCell GruCell::zeros(std::size_t dim) {
  GruCell c;
  for (Tensor* t : {&c.input_update, &c.input_reset, &c.input_candidate, &c.hidden_update, &c.hidden_reset,
                    &c.hidden_candidate}) {
    *t = zeros_parameter(dim, dim);
  }
  for (Tensor* t : {&c.bias_update, &c.bias_reset, &c.bias_candidate}) *t = zeros_parameter(1, dim);
  return c;
}

void GruCell::collect(const std::string& prefix, std::vector<NamedParameter>& out) const {
  out.push_back({prefix + ".input_update", input_update});
  out.push_back({prefix + ".input_reset", input_reset});
  out.push_back({prefix + ".input_candidate", input_candidate});
  out.push_back({prefix + ".hidden_update", hidden_update});
  out.push_back({prefix + ".hidden_reset", hidden_reset});
  out.push_back({prefix + ".hidden_candidate", hidden_candidate});
  out.push_back({prefix + ".bias_update", bias_update});
  out.push_back({prefix + ".bias_reset", bias_reset});
  out.push_back({prefix + ".bias_candidate", bias_candidate});
}

Tensor gru_step(const GruCell& cell, const Tensor& x, const Tensor& h_prev) {
  if (x.cols() != cell.dim() || h_prev.cols() != cell.dim() || x.rows() != h_prev.rows()) {
    throw ShapeError(fmt::format("gru_step: input {} and hidden {} do not fit a cell of width {}", x.shape_string(),
                                 h_prev.shape_string(), cell.dim()));
  }
  auto gate = [&](const Tensor& u, const Tensor& w, const Tensor& b, const Tensor& h) {
    return add_row(add(matmul(x, u), matmul(h, w)), b);
  };
  Tensor update = sigmoid(gate(cell.input_update, cell.hidden_update, cell.bias_update, h_prev));
  Tensor reset = sigmoid(gate(cell.input_reset, cell.hidden_reset, cell.bias_reset, h_prev));
  Tensor candidate = tanh(gate(cell.input_candidate, cell.hidden_candidate, cell.bias_candidate, hadamard(reset, h_prev)));
  // (1 - u) * h + u * c == h + u * (c - h)
  return add(h_prev, hadamard(update, sub(candidate, h_prev)));
}

// ---- TNA block ----------------------------------------------------------------------

LayerNormParams LayerNormParams::init(std::size_t dim) { return {ones_parameter(1, dim), zeros_parameter(1, dim)}; }

TnaBlock TnaBlock::init(std::size_t d_in, std::size_t d_out, bool use_layer_norm, bool use_skip, double leaky_slope,
                        Rng& rng) {
  TnaBlock b;
  b.gcn = GcnLayer::init(d_in, d_out, rng);
  b.gru = GruCell::init(d_out, rng);
  if (use_layer_norm) {
    b.ln_gcn = LayerNormParams::init(d_out);
    b.ln_gru = LayerNormParams::init(d_out);
  }
  if (use_skip) {
    b.skip_weight = glorot_uniform(2 * d_out, d_out, rng);
    b.skip_bias = zeros_parameter(1, d_out);
  }
  b.leaky_slope = leaky_slope;
  return b;
}

void TnaBlock::collect(const std::string& prefix, std::vector<NamedParameter>& out) const {
  gcn.collect(prefix + ".gcn", out);
  gru.collect(prefix + ".gru", out);
  if (ln_gcn) {
    out.push_back({prefix + ".ln_gcn.gain", ln_gcn->gain});
    out.push_back({prefix + ".ln_gcn.bias", ln_gcn->bias});
    out.push_back({prefix + ".ln_gru.gain", ln_gru->gain});
    out.push_back({prefix + ".ln_gru.bias", ln_gru->bias});
  }
  if (use_skip()) {
    out.push_back({prefix + ".skip.weight", skip_weight});
    out.push_back({prefix + ".skip.bias", skip_bias});
  }
}

BlockOutput tna_block_forward(const TnaBlock& block, const SparseMatrix& adjacency, const Features& h_in,
                              const Tensor& h_prev) {
  Tensor h_gcn = gcn_forward(block.gcn, adjacency, h_in);
  if (block.ln_gcn) h_gcn = layer_norm(h_gcn, block.ln_gcn->gain, block.ln_gcn->bias);
  Tensor h_gru = gru_step(block.gru, h_gcn, h_prev);
  if (block.ln_gru) h_gru = layer_norm(h_gru, block.ln_gru->gain, block.ln_gru->bias);
  if (!block.use_skip()) return {h_gru, h_gru};
  Tensor mixed = add_row(matmul(concat_cols(h_gcn, h_gru), block.skip_weight), block.skip_bias);
  return {leaky_relu(mixed, block.leaky_slope), h_gru};
}

}  // namespace tna
