#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "tna/errors.hpp"
#include "tna/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

using namespace tna;

namespace {

// Closed-form parameter count of one T layer.
std::size_t block_count(std::size_t d_in, std::size_t d, bool ln, bool sc) {
  return d_in * d + 6 * d * d + 3 * d + (ln ? 4 * d : 0) + (sc ? 2 * d * d + d : 0);
}

std::size_t count_for(const std::string& preset, std::size_t n) {
  Rng rng(0);
  return count_parameters(build_model(ModelConfig::preset(preset), n, rng));
}

std::vector<Snapshot> random_sequence(std::size_t n, std::size_t steps, double p, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution coin(p);
  std::vector<Snapshot> out;
  std::vector<Edge> edges;
  for (std::size_t t = 0; t < steps; ++t) {
    for (Vertex u = 0; u < n; ++u)
      for (Vertex v = u + 1; v < n; ++v)
        if (coin(rng)) edges.emplace_back(u, v);
    out.emplace_back(n, edges);
  }
  return out;
}

}  // namespace

TEST_CASE("parameter counts") {
  CHECK(count_for("tna", 3783) == block_count(3783, 32, true, true) + block_count(32, 16, true, true) + 2 * 16 * 16);
  CHECK(count_for("tna", 3783) == 132704);
  CHECK(count_for("TTV/LN/SC", 1899) == 72416);
  CHECK(count_for("ttv_ln_sc", 7115) == 239328);
  CHECK(count_for("GGV", 3783) == 3783 * 32 + 32 * 16 + 2 * 16 * 16);
  CHECK(count_for("GGG", 3783) == 3783 * 32 + 32 * 16 + 16 * 16);

  Rng rng(0);
  ModelConfig single;
  single.layer_spec = "G";
  single.dims = {32};
  single.use_layer_norm = single.use_skip = false;
  CHECK(count_parameters(build_model(single, 3783, rng)) == 121056);
}

TEST_CASE("parameter count does not depend on sequence length") {
  Rng rng(1);
  const Model m = build_model(ModelConfig::canonical(), 10, rng);
  const auto before = count_parameters(m);
  forward_sequence(m, random_sequence(10, 5, 0.3, 2), false, nullptr);
  CHECK(count_parameters(m) == before);
}

TEST_CASE("preset grammar") {
  CHECK(ModelConfig::preset("tna").name() == "TTV/LN/SC");
  CHECK(ModelConfig::preset("ttv_ln").name() == "TTV/LN");
  CHECK(ModelConfig::preset("TGV").name() == "TGV");
  CHECK_THROWS_AS(ModelConfig::preset("TVT"), ConfigError);

  Rng rng(3);
  const Model ggg = build_model(ModelConfig::preset("GGG"), 10, rng);
  CHECK(ggg.layers.size() == 3);
  CHECK_FALSE(ggg.head_mu.has_value());
  for (const auto& layer : ggg.layers) CHECK(std::holds_alternative<GcnLayer>(layer));

  ModelConfig bad = ModelConfig::canonical();
  bad.dims = {32};
  CHECK_THROWS_AS(build_model(bad, 10, rng), ConfigError);
  bad = ModelConfig::canonical();
  bad.embedding_dim = 8;
  CHECK_THROWS_AS(build_model(bad, 10, rng), ConfigError);
  bad = ModelConfig::canonical();
  bad.layer_spec = "TVT";
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("every ablation preset runs forward") {
  const auto graphs = random_sequence(12, 3, 0.25, 4);
  for (const char* name : {"GGG", "GGV", "TGV", "TTV", "TTV/LN", "TTV/LN/SC"}) {
    Rng rng(5);
    const Model m = build_model(ModelConfig::preset(name), 12, rng);
    const auto steps = forward_sequence(m, graphs, true, &rng);
    REQUIRE(steps.size() == 3);
    for (const auto& s : steps) {
      CHECK(s.mu.rows() == 12);
      CHECK(s.mu.cols() == 16);
      CHECK(s.z.value().allFinite());
      if (m.config.variational()) CHECK(s.log_sigma.cols() == 16);
    }
  }
}

TEST_CASE("forward modes") {
  const auto graphs = random_sequence(9, 3, 0.3, 6);
  Rng rng(7);
  const Model m = build_model(ModelConfig::canonical(), 9, rng);

  for (const auto& s : forward_sequence(m, graphs, false, nullptr)) CHECK(s.z.value() == s.mu.value());

  Rng a(8), b(8);
  const auto za = forward_sequence(m, graphs, true, &a);
  const auto zb = forward_sequence(m, graphs, true, &b);
  for (std::size_t t = 0; t < za.size(); ++t) CHECK(za[t].z.value() == zb[t].z.value());

  CHECK_THROWS_AS(forward_sequence(m, graphs, true, nullptr), ContractError);
  CHECK_THROWS_AS(forward_sequence(m, random_sequence(8, 1, 0.3, 1), false, nullptr), ShapeError);

  // A hugely negative log-sigma head is clamped and the noise term vanishes.
  Model quiet = m;
  quiet.head_log_sigma = GcnLayer{Tensor::leaf(Matrix::Constant(16, 16, -1e6))};
  Rng c(9);
  const auto steps = forward_sequence(quiet, graphs, true, &c);
  for (const auto& s : steps) {
    CHECK(s.log_sigma.value().maxCoeff() >= kLogSigmaMin);
    CHECK((s.z.value() - s.mu.value()).cwiseAbs().maxCoeff() < 1e-3);
  }
  CHECK(embed_last(m, graphs) == forward_sequence(m, graphs, false, nullptr).back().mu.value());
}

TEST_CASE("decoder") {
  const Matrix p0 = decode(Tensor::constant(Matrix::Zero(4, 3))).value();
  CHECK((p0.array() == 0.5).all());

  Matrix z = Matrix::Zero(2, 2);
  z(0, 0) = z(1, 0) = 1.0;
  CHECK(decode(Tensor::constant(z)).value()(0, 1) == doctest::Approx(0.73106).epsilon(1e-5));

  std::mt19937_64 rng(10);
  std::normal_distribution<double> n(0, 2);
  Matrix r(7, 4);
  for (Eigen::Index i = 0; i < r.size(); ++i) r.data()[i] = n(rng);
  const Matrix p = decode(Tensor::constant(r)).value();
  CHECK((p - p.transpose()).cwiseAbs().maxCoeff() == 0.0);
  CHECK(p.minCoeff() > 0.0);
  CHECK(p.maxCoeff() < 1.0);
}

TEST_CASE("permutation equivariance of the deterministic forward pass") {
  for (std::uint64_t trial = 0; trial < 5; ++trial) {
    const std::size_t n = 8;
    const auto graphs = random_sequence(n, 3, 0.3, 100 + trial);
    std::vector<Vertex> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::mt19937_64 prng(200 + trial);
    std::shuffle(perm.begin(), perm.end(), prng);

    std::vector<Snapshot> permuted;
    for (const auto& s : graphs) {
      std::vector<Edge> e;
      for (const Edge& x : s.edges()) e.emplace_back(perm[x.u], perm[x.v]);
      permuted.emplace_back(n, e);
    }
    Rng rng(300 + trial);
    const Model m = build_model(ModelConfig::canonical(), n, rng);
    // Identity features travel with their vertices: row i of the first weight moves to perm[i].
    Model pm = m;
    auto& first = std::get<TnaBlock>(pm.layers[0]);
    Matrix w(first.gcn.weight.value().rows(), first.gcn.weight.value().cols());
    for (std::size_t i = 0; i < n; ++i) w.row(perm[i]) = first.gcn.weight.value().row(i);
    first.gcn.weight = Tensor::leaf(w);

    const auto a = forward_sequence(m, graphs, false, nullptr);
    const auto b = forward_sequence(pm, permuted, false, nullptr);
    for (std::size_t t = 0; t < a.size(); ++t) {
      double worst = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        worst = std::max(worst, (a[t].mu.value().row(i) - b[t].mu.value().row(perm[i])).cwiseAbs().maxCoeff());
      }
      CHECK(worst < 1e-10);
    }
  }
}

TEST_CASE("checkpoint round trip is bit-exact") {
  Rng rng(11);
  const Model m = build_model(ModelConfig::preset("TTV/LN"), 15, rng);
  std::stringstream first;
  save_checkpoint(first, m);
  const Model back = load_checkpoint(first);
  CHECK(back.config.name() == m.config.name());
  const auto pa = m.parameters();
  const auto pb = back.parameters();
  REQUIRE(pa.size() == pb.size());
  for (std::size_t k = 0; k < pa.size(); ++k) {
    CHECK(pa[k].name == pb[k].name);
    CHECK(pa[k].tensor.value() == pb[k].tensor.value());
  }
  std::stringstream second;
  save_checkpoint(second, back);
  CHECK(first.str() == second.str());

  std::istringstream junk("not a checkpoint");
  CHECK_THROWS_AS(load_checkpoint(junk), ContractError);
}

TEST_CASE("same seed builds identical parameters") {
  Rng a(12), b(12);
  const auto pa = build_model(ModelConfig::canonical(), 20, a).parameters();
  const auto pb = build_model(ModelConfig::canonical(), 20, b).parameters();
  for (std::size_t k = 0; k < pa.size(); ++k) CHECK(pa[k].tensor.value() == pb[k].tensor.value());
}
