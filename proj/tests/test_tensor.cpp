#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "support.hpp"
#include "tna/errors.hpp"
#include "tna/tensor.hpp"

#include <cmath>

using namespace tna;
using tna::testing::gradient_error;
using tna::testing::random_matrix;

namespace {

Matrix mat(std::initializer_list<std::initializer_list<double>> rows) {
  Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.begin()->size()));
  Eigen::Index i = 0;
  for (const auto& r : rows) {
    Eigen::Index j = 0;
    for (double v : r) m(i, j++) = v;
    ++i;
  }
  return m;
}

}  // namespace

TEST_CASE("matmul values") {
  const Matrix m = mat({{1.5, -2.0}, {0.25, 4.0}});
  const Tensor eye = Tensor::constant(Matrix::Identity(2, 2));
  CHECK(matmul(eye, Tensor::constant(m)).value() == m);
  CHECK(matmul(Tensor::constant(m), eye).value() == m);

  const Tensor out = matmul(Tensor::constant(mat({{1, 2}, {3, 4}})), Tensor::constant(mat({{1}, {1}})));
  CHECK(out.value() == mat({{3}, {7}}));
}

TEST_CASE("matmul shape mismatch names both shapes") {
  const Tensor a = Tensor::zeros(2, 3);
  const Tensor b = Tensor::zeros(2, 3);
  try {
    matmul(a, b);
    FAIL("expected ShapeError");
  } catch (const ShapeError& e) {
    const std::string what = e.what();
    CHECK(what.find("[2x3]") != std::string::npos);
  }
}

TEST_CASE("matmul gradient of sum is the column sums of b") {
  std::mt19937_64 rng(1);
  Tensor a = Tensor::leaf(random_matrix(3, 4, rng));
  Tensor b = Tensor::leaf(random_matrix(4, 2, rng));
  backward(sum(matmul(a, b)));
  const Eigen::RowVectorXd col = b.value().rowwise().sum().transpose();
  for (Eigen::Index i = 0; i < 3; ++i) CHECK((a.grad().row(i) - col).norm() < 1e-14);
  CHECK(gradient_error([&] { return sum(matmul(a, b)); }, {a, b}) < 1e-6);
}

TEST_CASE("elementwise values") {
  CHECK(sigmoid(Tensor::constant(mat({{0}}))).item() == 0.5);
  CHECK(leaky_relu(Tensor::constant(mat({{-1}})), 0.01).item() == doctest::Approx(-0.01).epsilon(1e-15));
  CHECK(leaky_relu(Tensor::constant(mat({{-1}}))).item() == doctest::Approx(-0.01).epsilon(1e-15));
  CHECK(relu(Tensor::constant(mat({{-2, 3}}))).value() == mat({{0, 3}}));
  CHECK(tanh(Tensor::constant(mat({{1}}))).item() == doctest::Approx(std::tanh(1.0)));
  CHECK(exp(Tensor::constant(mat({{1}}))).item() == doctest::Approx(std::exp(1.0)));

  Tensor x = Tensor::leaf(mat({{0}}));
  backward(sum(sigmoid(x)));
  CHECK(x.grad()(0, 0) == doctest::Approx(0.25).epsilon(1e-15));
}

TEST_CASE("elementwise binary ops check shapes") {
  CHECK_THROWS_AS(add(Tensor::zeros(2, 2), Tensor::zeros(2, 3)), ShapeError);
  CHECK_THROWS_AS(hadamard(Tensor::zeros(1, 2), Tensor::zeros(2, 1)), ShapeError);
  CHECK_THROWS_AS(add_row(Tensor::zeros(2, 2), Tensor::zeros(1, 3)), ShapeError);
}

TEST_CASE("sigmoid stays finite for large inputs") {
  const Tensor s = sigmoid(Tensor::constant(mat({{-800, 800}})));
  CHECK(s.value()(0, 0) >= 0.0);
  CHECK(s.value()(0, 1) == 1.0);
  CHECK(s.value().allFinite());
}

TEST_CASE("concat_cols") {
  const Matrix a = mat({{1}, {2}});
  CHECK(concat_cols(Tensor::constant(a), Tensor::zeros(2, 0)).value() == a);
  CHECK(concat_cols(Tensor::constant(a), Tensor::constant(mat({{3}, {4}}))).value() == mat({{1, 3}, {2, 4}}));
  CHECK_THROWS_AS(concat_cols(Tensor::zeros(2, 1), Tensor::zeros(3, 1)), ShapeError);

  std::mt19937_64 rng(2);
  Tensor p = Tensor::leaf(random_matrix(3, 2, rng));
  Tensor q = Tensor::leaf(random_matrix(3, 3, rng));
  const Tensor w = Tensor::constant(random_matrix(3, 5, rng));
  CHECK(gradient_error([&] { return sum_squares(hadamard(concat_cols(p, q), w)); }, {p, q}) < 1e-6);
}

TEST_CASE("layer_norm") {
  const Tensor g = Tensor::constant(Matrix::Ones(1, 3));
  const Tensor b = Tensor::constant(Matrix::Zero(1, 3));
  const Tensor flat = layer_norm(Tensor::constant(mat({{2, 2, 2}})), g, b);
  CHECK(flat.value().cwiseAbs().maxCoeff() == 0.0);

  const Tensor g2 = Tensor::constant(Matrix::Ones(1, 2));
  const Tensor b2 = Tensor::constant(Matrix::Zero(1, 2));
  const Tensor unit = layer_norm(Tensor::constant(mat({{1, -1}})), g2, b2, 1e-300);
  CHECK(unit.value()(0, 0) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(unit.value()(0, 1) == doctest::Approx(-1.0).epsilon(1e-15));

  std::mt19937_64 rng(3);
  const Tensor x = Tensor::constant(random_matrix(5, 6, rng, -30.0, 30.0));
  const Matrix y = layer_norm(x, Tensor::constant(Matrix::Ones(1, 6)), Tensor::constant(Matrix::Zero(1, 6))).value();
  for (Eigen::Index i = 0; i < y.rows(); ++i) {
    const double mean = y.row(i).mean();
    const double var = (y.row(i).array() - mean).square().mean();
    CHECK(std::abs(mean) <= 1e-10);
    CHECK(std::abs(var - 1.0) <= 1e-6);
  }
}

TEST_CASE("layer_norm gradient on a random 3x4 input") {
  std::mt19937_64 rng(4);
  Tensor x = Tensor::leaf(random_matrix(3, 4, rng));
  Tensor gain = Tensor::leaf(random_matrix(1, 4, rng, 0.5, 1.5));
  Tensor bias = Tensor::leaf(random_matrix(1, 4, rng));
  const Tensor w = Tensor::constant(random_matrix(3, 4, rng));
  CHECK(gradient_error([&] { return sum(hadamard(layer_norm(x, gain, bias), w)); }, {x, gain, bias}) < 1e-5);
}

TEST_CASE("backward contracts") {
  Tensor x = Tensor::leaf(mat({{1, 2}, {3, 4}}));
  backward(sum(x));
  CHECK(x.grad() == Matrix::Ones(2, 2));

  Tensor y = Tensor::leaf(mat({{3}}));
  backward(sum(hadamard(y, y)));
  CHECK(y.grad()(0, 0) == 6.0);

  CHECK_THROWS_AS(backward(matmul(x, x)), ContractError);

  Tensor z = Tensor::leaf(mat({{1}}));
  const Tensor loss = sum_squares(z);
  backward(loss);
  CHECK_THROWS_AS(backward(loss), StateError);
}

TEST_CASE("shared subexpressions accumulate") {
  Tensor x = Tensor::leaf(mat({{2}}));
  const Tensor s = sigmoid(x);
  backward(sum(add(s, hadamard(s, x))));
  const double sv = 1.0 / (1.0 + std::exp(-2.0));
  const double ds = sv * (1 - sv);
  CHECK(x.grad()(0, 0) == doctest::Approx(ds + ds * 2.0 + sv).epsilon(1e-14));
}

TEST_CASE("every differentiable op matches finite differences over 100 random trials") {
  std::mt19937_64 rng(5);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    Tensor a = Tensor::leaf(random_matrix(3, 4, rng, -2.0, 2.0));
    Tensor b = Tensor::leaf(random_matrix(3, 4, rng, -2.0, 2.0));
    Tensor m = Tensor::leaf(random_matrix(4, 2, rng));
    Tensor row = Tensor::leaf(random_matrix(1, 4, rng));
    Tensor gain = Tensor::leaf(random_matrix(1, 4, rng, 0.5, 1.5));
    const Tensor w = Tensor::constant(random_matrix(3, 2, rng));
    auto f = [&]() {
      Tensor h = add(hadamard(sigmoid(a), tanh(b)), sub(leaky_relu(b, 0.2), scale(exp(scale(a, 0.3)), 0.5)));
      h = add_row(add_scalar(clamp(h, -5.0, 5.0), 0.1), row);
      h = layer_norm(h, gain, row);
      Tensor out = matmul(relu(add_scalar(h, 0.3)), m);
      out = concat_cols(out, transpose(matmul(transpose(m), transpose(a))));
      return add(sum(out), add(sum_squares(out), sum(hadamard(matmul(h, m), w))));
    };
    worst = std::max(worst, gradient_error(f, {a, b, m, row, gain}));
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("sparse product matches the dense product") {
  std::mt19937_64 rng(6);
  SparseMatrix s(4, 4);
  s.insert(0, 1) = 0.5;
  s.insert(1, 0) = 0.5;
  s.insert(2, 2) = 1.0;
  s.insert(3, 1) = -0.25;
  s.makeCompressed();
  Tensor b = Tensor::leaf(random_matrix(4, 3, rng));
  const Matrix dense = Matrix(s);
  CHECK((spmm(s, b).value() - dense * b.value()).norm() < 1e-15);
  CHECK(gradient_error([&] { return sum_squares(spmm(s, b)); }, {b}) < 1e-6);
  CHECK_THROWS_AS(spmm(s, Tensor::zeros(3, 3)), ShapeError);
}

TEST_CASE("replay is deterministic") {
  auto run = [] {
    std::mt19937_64 rng(7);
    Tensor a = Tensor::leaf(random_matrix(6, 6, rng));
    Tensor b = Tensor::leaf(random_matrix(6, 3, rng));
    const Tensor loss = sum_squares(tanh(matmul(a, b)));
    backward(loss);
    return std::pair{loss.item(), a.grad()};
  };
  const auto [l1, g1] = run();
  const auto [l2, g2] = run();
  CHECK(l1 == l2);
  CHECK(g1 == g2);
}

TEST_CASE("mutable_value is limited to leaves") {
  Tensor x = Tensor::leaf(mat({{1}}));
  Tensor y = scale(x, 2.0);
  CHECK_NOTHROW(x.mutable_value());
  CHECK_THROWS_AS(y.mutable_value(), StateError);
  CHECK_THROWS_AS(Tensor::zeros(2, 2).item(), ContractError);
}
