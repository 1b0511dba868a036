#pragma once

// Dense 2-D tensors with reverse-mode automatic differentiation.
//
// A Tensor is a cheap handle to a node of the computation record. Leaves are
// created with Tensor::leaf / Tensor::constant; every op below records a new
// node whose backward rule accumulates into its inputs. backward() walks the
// record in reverse topological order exactly once.

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace tna {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

namespace detail {
struct Node;
}

class Tensor {
 public:
  Tensor() = default;

  /// Trainable or otherwise gradient-tracked leaf.
  static Tensor leaf(Matrix value, bool requires_grad = true);
  /// Leaf that never receives a gradient.
  static Tensor constant(Matrix value);
  static Tensor zeros(std::size_t rows, std::size_t cols, bool requires_grad = false);

  bool defined() const noexcept { return node_ != nullptr; }
  std::size_t rows() const;
  std::size_t cols() const;
  std::size_t size() const { return rows() * cols(); }

  const Matrix& value() const;
  /// Mutable access for optimizers and finite-difference probes; leaves only.
  Matrix& mutable_value();

  bool requires_grad() const;
  bool has_grad() const;
  const Matrix& grad() const;
  void zero_grad();

  /// Scalar value of a 1x1 tensor.
  double item() const;

  std::string shape_string() const;

  const std::shared_ptr<detail::Node>& node() const { return node_; }

 private:
  friend Tensor make_result(Matrix value, std::vector<Tensor> inputs,
                            std::function<void(const Matrix&)> backward_rule);
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

  std::shared_ptr<detail::Node> node_;
};

namespace detail {

struct Node {
  Matrix value;
  Matrix grad;  // empty until the first accumulation
  bool requires_grad = false;
  bool is_leaf = true;
  bool consumed = false;  // set once backward has run through this node
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(const Matrix&)> backward_rule;

  void accumulate(const Matrix& g);
};

}  // namespace detail

/// Records an op output. The backward rule receives dL/d(output) and must
/// accumulate into the inputs (via accumulate_grad) that require gradients.
Tensor make_result(Matrix value, std::vector<Tensor> inputs,
                   std::function<void(const Matrix&)> backward_rule);
void accumulate_grad(const Tensor& t, const Matrix& g);

// ---- products -------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b);
/// Constant sparse matrix times tensor; the sparse operand carries no gradient.
Tensor spmm(const SparseMatrix& s, const Tensor& b);
Tensor transpose(const Tensor& a);

// ---- elementwise ----------------------------------------------------------

enum class Unary { kSigmoid, kTanh, kRelu, kLeakyRelu, kExp };
enum class Binary { kAdd, kSub, kHadamard };

inline constexpr double kDefaultLeakySlope = 0.01;

Tensor elementwise(Unary op, const Tensor& a, double slope = kDefaultLeakySlope);
Tensor elementwise(Binary op, const Tensor& a, const Tensor& b);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor hadamard(const Tensor& a, const Tensor& b);
Tensor sigmoid(const Tensor& a);
Tensor tanh(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor leaky_relu(const Tensor& a, double slope = kDefaultLeakySlope);
Tensor exp(const Tensor& a);

/// a + c * 1 elementwise.
Tensor add_scalar(const Tensor& a, double c);
Tensor scale(const Tensor& a, double c);
Tensor clamp(const Tensor& a, double lo, double hi);
/// Adds a 1 x cols row vector to every row of a.
Tensor add_row(const Tensor& a, const Tensor& row);

// ---- structure and reductions ----------------------------------------------

Tensor concat_cols(const Tensor& a, const Tensor& b);
/// Sum of all entries as a 1x1 tensor.
Tensor sum(const Tensor& a);
/// Sum of squared entries as a 1x1 tensor.
Tensor sum_squares(const Tensor& a);

inline constexpr double kLayerNormEps = 1e-5;

/// Per-row normalization to zero mean and unit (population) variance,
/// followed by the affine map x * gain + bias.
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias,
                  double eps = kLayerNormEps);

// ---- reverse pass -----------------------------------------------------------

/// Populates gradients of every requires_grad leaf reachable from the scalar
/// loss. A record may be walked once; a second call throws StateError.
void backward(const Tensor& loss);

}  // namespace tna
