#include "tna/tensor.hpp"

#include "tna/errors.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <unordered_set>

namespace tna {

namespace detail {

void Node::accumulate(const Matrix& g) {
  if (grad.size() == 0) {
    grad = g;
  } else {
    grad += g;
  }
}

}  // namespace detail

namespace {

std::string shape_of(const Matrix& m) { return fmt::format("[{}x{}]", m.rows(), m.cols()); }

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError(fmt::format("{}: shape mismatch {} vs {}", op, a.shape_string(), b.shape_string()));
  }
}

}  // namespace

Tensor Tensor::leaf(Matrix value, bool requires_grad) {
  auto node = std::make_shared<detail::Node>();
  node->value = std::move(value);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::constant(Matrix value) { return leaf(std::move(value), false); }

Tensor Tensor::zeros(std::size_t rows, std::size_t cols, bool requires_grad) {
  return leaf(Matrix::Zero(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols)), requires_grad);
}

std::size_t Tensor::rows() const { return static_cast<std::size_t>(node_->value.rows()); }
std::size_t Tensor::cols() const { return static_cast<std::size_t>(node_->value.cols()); }
const Matrix& Tensor::value() const { return node_->value; }

Matrix& Tensor::mutable_value() {
  if (!node_->is_leaf) {
    throw StateError("mutable_value: only leaf tensors may be modified in place");
  }
  return node_->value;
}

bool Tensor::requires_grad() const { return node_->requires_grad; }
bool Tensor::has_grad() const { return node_->grad.size() != 0; }

const Matrix& Tensor::grad() const {
  if (!has_grad()) {
    throw StateError("grad: tensor " + shape_string() + " has no gradient");
  }
  return node_->grad;
}

void Tensor::zero_grad() { node_->grad.resize(0, 0); }

double Tensor::item() const {
  if (rows() != 1 || cols() != 1) {
    throw ContractError("item: tensor " + shape_string() + " is not a scalar");
  }
  return node_->value(0, 0);
}

std::string Tensor::shape_string() const { return shape_of(node_->value); }

Tensor make_result(Matrix value, std::vector<Tensor> inputs, std::function<void(const Matrix&)> backward_rule) {
  auto node = std::make_shared<detail::Node>();
  node->value = std::move(value);
  node->is_leaf = false;
  for (const auto& in : inputs) {
    if (in.requires_grad()) node->requires_grad = true;
  }
  if (node->requires_grad) {
    node->inputs.reserve(inputs.size());
    for (auto& in : inputs) node->inputs.push_back(in.node());
    node->backward_rule = std::move(backward_rule);
  }
  return Tensor(std::move(node));
}

void accumulate_grad(const Tensor& t, const Matrix& g) {
  if (t.requires_grad()) t.node()->accumulate(g);
}

// ---- products -------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows()) {
    throw ShapeError(fmt::format("matmul: inner dimensions differ, {} x {}", a.shape_string(), b.shape_string()));
  }
  Matrix out = a.value() * b.value();
  return make_result(std::move(out), {a, b}, [a, b](const Matrix& g) {
    if (a.requires_grad()) accumulate_grad(a, g * b.value().transpose());
    if (b.requires_grad()) accumulate_grad(b, a.value().transpose() * g);
  });
}

Tensor spmm(const SparseMatrix& s, const Tensor& b) {
  if (static_cast<std::size_t>(s.cols()) != b.rows()) {
    throw ShapeError(fmt::format("spmm: inner dimensions differ, [{}x{}] x {}", s.rows(), s.cols(), b.shape_string()));
  }
  Matrix out = s * b.value();
  // The sparse operand is captured by pointer; callers keep it alive for the
  // lifetime of the record (snapshots own their adjacency).
  const SparseMatrix* sp = &s;
  return make_result(std::move(out), {b}, [sp, b](const Matrix& g) {
    accumulate_grad(b, Matrix(sp->transpose() * g));
  });
}

Tensor transpose(const Tensor& a) {
  Matrix out = a.value().transpose();
  return make_result(std::move(out), {a}, [a](const Matrix& g) { accumulate_grad(a, g.transpose()); });
}

// ---- elementwise ----------------------------------------------------------

Tensor elementwise(Unary op, const Tensor& a, double slope) {
  const auto x = a.value().array();
  switch (op) {
    case Unary::kSigmoid: {
      Matrix y = (1.0 / (1.0 + (-x).exp())).matrix();
      Matrix yc = y;
      return make_result(std::move(y), {a}, [a, yc = std::move(yc)](const Matrix& g) {
        accumulate_grad(a, (g.array() * yc.array() * (1.0 - yc.array())).matrix());
      });
    }
    case Unary::kTanh: {
      Matrix y = x.tanh().matrix();
      Matrix yc = y;
      return make_result(std::move(y), {a}, [a, yc = std::move(yc)](const Matrix& g) {
        accumulate_grad(a, (g.array() * (1.0 - yc.array().square())).matrix());
      });
    }
    case Unary::kRelu: {
      Matrix y = x.max(0.0).matrix();
      return make_result(std::move(y), {a}, [a](const Matrix& g) {
        accumulate_grad(a, (a.value().array() > 0.0).select(g.array(), 0.0).matrix());
      });
    }
    case Unary::kLeakyRelu: {
      Matrix y = (x > 0.0).select(x, slope * x).matrix();
      return make_result(std::move(y), {a}, [a, slope](const Matrix& g) {
        accumulate_grad(a, (a.value().array() > 0.0).select(g.array(), slope * g.array()).matrix());
      });
    }
    case Unary::kExp: {
      Matrix y = x.exp().matrix();
      Matrix yc = y;
      return make_result(std::move(y), {a}, [a, yc = std::move(yc)](const Matrix& g) {
        accumulate_grad(a, (g.array() * yc.array()).matrix());
      });
    }
  }
  throw ContractError("elementwise: unknown unary op");
}

Tensor elementwise(Binary op, const Tensor& a, const Tensor& b) {
  switch (op) {
    case Binary::kAdd:
      require_same_shape("add", a, b);
      return make_result(a.value() + b.value(), {a, b}, [a, b](const Matrix& g) {
        accumulate_grad(a, g);
        accumulate_grad(b, g);
      });
    case Binary::kSub:
      require_same_shape("sub", a, b);
      return make_result(a.value() - b.value(), {a, b}, [a, b](const Matrix& g) {
        accumulate_grad(a, g);
        if (b.requires_grad()) accumulate_grad(b, -g);
      });
    case Binary::kHadamard:
      require_same_shape("hadamard", a, b);
      return make_result(a.value().cwiseProduct(b.value()), {a, b}, [a, b](const Matrix& g) {
        if (a.requires_grad()) accumulate_grad(a, g.cwiseProduct(b.value()));
        if (b.requires_grad()) accumulate_grad(b, g.cwiseProduct(a.value()));
      });
  }
  throw ContractError("elementwise: unknown binary op");
}

Tensor add(const Tensor& a, const Tensor& b) { return elementwise(Binary::kAdd, a, b); }
Tensor sub(const Tensor& a, const Tensor& b) { return elementwise(Binary::kSub, a, b); }
Tensor hadamard(const Tensor& a, const Tensor& b) { return elementwise(Binary::kHadamard, a, b); }
Tensor sigmoid(const Tensor& a) { return elementwise(Unary::kSigmoid, a); }
Tensor tanh(const Tensor& a) { return elementwise(Unary::kTanh, a); }
Tensor relu(const Tensor& a) { return elementwise(Unary::kRelu, a); }
Tensor leaky_relu(const Tensor& a, double slope) { return elementwise(Unary::kLeakyRelu, a, slope); }
Tensor exp(const Tensor& a) { return elementwise(Unary::kExp, a); }

Tensor add_scalar(const Tensor& a, double c) {
  Matrix out = (a.value().array() + c).matrix();
  return make_result(std::move(out), {a}, [a](const Matrix& g) { accumulate_grad(a, g); });
}

Tensor scale(const Tensor& a, double c) {
  return make_result(a.value() * c, {a}, [a, c](const Matrix& g) { accumulate_grad(a, g * c); });
}

Tensor clamp(const Tensor& a, double lo, double hi) {
  Matrix out = a.value().array().max(lo).min(hi).matrix();
  return make_result(std::move(out), {a}, [a, lo, hi](const Matrix& g) {
    const auto x = a.value().array();
    accumulate_grad(a, ((x >= lo) && (x <= hi)).select(g.array(), 0.0).matrix());
  });
}

Tensor add_row(const Tensor& a, const Tensor& row) {
  if (row.rows() != 1 || row.cols() != a.cols()) {
    throw ShapeError(fmt::format("add_row: cannot broadcast {} over {}", row.shape_string(), a.shape_string()));
  }
  Matrix out = a.value().rowwise() + row.value().row(0);
  return make_result(std::move(out), {a, row}, [a, row](const Matrix& g) {
    accumulate_grad(a, g);
    if (row.requires_grad()) accumulate_grad(row, g.colwise().sum());
  });
}

// ---- structure and reductions ----------------------------------------------

Tensor concat_cols(const Tensor& a, const Tensor& b) {
  if (a.rows() != b.rows()) {
    throw ShapeError(fmt::format("concat_cols: row counts differ, {} vs {}", a.shape_string(), b.shape_string()));
  }
  const auto p = static_cast<Eigen::Index>(a.cols());
  const auto q = static_cast<Eigen::Index>(b.cols());
  Matrix out(a.value().rows(), p + q);
  out.leftCols(p) = a.value();
  out.rightCols(q) = b.value();
  return make_result(std::move(out), {a, b}, [a, b, p, q](const Matrix& g) {
    if (a.requires_grad()) accumulate_grad(a, g.leftCols(p));
    if (b.requires_grad()) accumulate_grad(b, g.rightCols(q));
  });
}

Tensor sum(const Tensor& a) {
  Matrix out(1, 1);
  out(0, 0) = a.value().sum();
  return make_result(std::move(out), {a}, [a](const Matrix& g) {
    accumulate_grad(a, Matrix::Constant(a.value().rows(), a.value().cols(), g(0, 0)));
  });
}

Tensor sum_squares(const Tensor& a) {
  Matrix out(1, 1);
  out(0, 0) = a.value().squaredNorm();
  return make_result(std::move(out), {a}, [a](const Matrix& g) { accumulate_grad(a, a.value() * (2.0 * g(0, 0))); });
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
  if (x.cols() < 1) throw ShapeError("layer_norm: input has no columns");
  if (gain.rows() != 1 || gain.cols() != x.cols() || bias.rows() != 1 || bias.cols() != x.cols()) {
    throw ShapeError(fmt::format("layer_norm: affine {} / {} does not match input {}", gain.shape_string(),
                                 bias.shape_string(), x.shape_string()));
  }
  if (!(eps > 0.0)) throw ContractError("layer_norm: eps must be positive");

  const Matrix& xv = x.value();
  const auto d = static_cast<double>(xv.cols());
  Eigen::VectorXd mean = xv.rowwise().mean();
  Matrix centered = xv.colwise() - mean;
  Eigen::VectorXd inv_std = ((centered.array().square().rowwise().sum() / d) + eps).rsqrt().matrix();
  Matrix xhat = centered.array().colwise() * inv_std.array();
  Matrix out = (xhat.array().rowwise() * gain.value().row(0).array()).rowwise() + bias.value().row(0).array();

  return make_result(std::move(out), {x, gain, bias},
                     [x, gain, bias, xhat = std::move(xhat), inv_std = std::move(inv_std), d](const Matrix& g) {
                       if (gain.requires_grad()) accumulate_grad(gain, g.cwiseProduct(xhat).colwise().sum());
                       if (bias.requires_grad()) accumulate_grad(bias, g.colwise().sum());
                       if (!x.requires_grad()) return;
                       Matrix dxhat = g.array().rowwise() * gain.value().row(0).array();
                       Eigen::VectorXd mean_dxhat = dxhat.rowwise().sum() / d;
                       Eigen::VectorXd mean_dxhat_xhat = dxhat.cwiseProduct(xhat).rowwise().sum() / d;
                       Matrix dx = (dxhat.colwise() - mean_dxhat) - (xhat.array().colwise() * mean_dxhat_xhat.array()).matrix();
                       accumulate_grad(x, (dx.array().colwise() * inv_std.array()).matrix());
                     });
}

// ---- reverse pass -----------------------------------------------------------

void backward(const Tensor& loss) {
  if (!loss.defined()) throw ContractError("backward: undefined loss");
  if (loss.rows() != 1 || loss.cols() != 1) {
    throw ContractError("backward: loss must be a 1x1 scalar, got " + loss.shape_string());
  }
  const auto& root = loss.node();
  if (root->consumed) {
    throw StateError("backward: record already consumed; rebuild the forward pass before calling again");
  }
  if (!root->requires_grad) return;

  // Iterative post-order DFS produces a topological order of the record.
  // Owning order: releasing a processed node's inputs must not free nodes
  // that are still pending.
  std::vector<std::shared_ptr<detail::Node>> order;
  std::unordered_set<detail::Node*> visited;
  std::vector<std::pair<std::shared_ptr<detail::Node>, std::size_t>> stack{{root, 0}};
  visited.insert(root.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (node->consumed && node != root) {
      throw StateError("backward: record reuses a node from an already consumed record");
    }
    if (next < node->inputs.size()) {
      std::shared_ptr<detail::Node> child = node->inputs[next++];
      if (child->requires_grad && !child->is_leaf && visited.insert(child.get()).second) {
        stack.emplace_back(std::move(child), 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  root->grad = Matrix::Ones(1, 1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::Node* node = it->get();
    if (node->grad.size() != 0 && node->backward_rule) node->backward_rule(node->grad);
    node->consumed = true;
    node->backward_rule = nullptr;
    node->inputs.clear();
    node->grad.resize(0, 0);
  }
}

}  // namespace tna
