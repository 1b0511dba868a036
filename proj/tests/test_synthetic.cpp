#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "tna/errors.hpp"
#include "tna/synthetic.hpp"

#include <cmath>
#include <set>

using namespace tna;

namespace {

double degree_variance(const Snapshot& s) {
  const double n = static_cast<double>(s.vertex_count());
  double mean = 0.0, sq = 0.0;
  for (Vertex v = 0; v < s.vertex_count(); ++v) {
    const double d = static_cast<double>(s.degree(v));
    mean += d;
    sq += d * d;
  }
  mean /= n;
  return sq / n - mean * mean;
}

Snapshot star(std::size_t n) {
  std::vector<Edge> edges;
  for (Vertex v = 1; v < n; ++v) edges.emplace_back(0, v);
  return Snapshot(n, edges);
}

}  // namespace

TEST_CASE("sbm migration and determinism") {
  SbmConfig c;
  c.vertex_count = 300;
  c.snapshots = 6;
  c.seed = 61;
  const SbmSequence a = generate_sbm(c);
  const SbmSequence b = generate_sbm(c);
  CHECK(a.graph == b.graph);
  CHECK(a.labels == b.labels);
  CHECK(a.graph.length() == 6);
  CHECK(a.graph.vertex_count() == 300);
  CHECK(a.graph.granularity_label() == "sbm");
  for (std::size_t t = 1; t < a.labels.size(); ++t) {
    std::size_t changed = 0;
    for (std::size_t v = 0; v < 300; ++v) changed += a.labels[t][v] != a.labels[t - 1][v] ? 1 : 0;
    CHECK(changed == 20);
  }
  std::size_t counts[3] = {0, 0, 0};
  for (auto l : a.labels[0]) ++counts[l];
  CHECK(counts[0] == 100);
  CHECK(counts[1] == 100);
  CHECK(counts[2] == 100);
}

TEST_CASE("sbm with degenerate probabilities gives disjoint cliques") {
  SbmConfig c;
  c.vertex_count = 30;
  c.snapshots = 3;
  c.migrators_per_step = 4;
  c.p_intra = 1.0;
  c.p_inter = 0.0;
  const SbmSequence s = generate_sbm(c);
  for (std::size_t t = 1; t <= 3; ++t) {
    const auto& labels = s.labels[t - 1];
    std::size_t expected = 0;
    for (std::size_t k = 0; k < 3; ++k) {
      const auto size = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), k));
      expected += size * (size - 1) / 2;
    }
    CHECK(s.graph.at(t).edge_count() == expected);
    for (const Edge& e : s.graph.at(t).edges()) CHECK(labels[e.u] == labels[e.v]);
  }
}

TEST_CASE("sbm intra-community density is binomially concentrated") {
  SbmConfig c;
  c.vertex_count = 600;
  c.snapshots = 2;
  c.seed = 62;
  const SbmSequence s = generate_sbm(c);
  for (std::size_t t = 1; t <= 2; ++t) {
    const auto& labels = s.labels[t - 1];
    double intra_pairs = 0.0;
    for (std::size_t k = 0; k < 3; ++k) {
      const auto size = static_cast<double>(std::count(labels.begin(), labels.end(), k));
      intra_pairs += size * (size - 1) / 2;
    }
    double intra_edges = 0.0;
    for (const Edge& e : s.graph.at(t).edges()) intra_edges += labels[e.u] == labels[e.v] ? 1.0 : 0.0;
    const double mean = intra_pairs * c.p_intra;
    const double sd = std::sqrt(intra_pairs * c.p_intra * (1 - c.p_intra));
    CHECK(std::abs(intra_edges - mean) <= 3 * sd);
  }
}

TEST_CASE("sbm validation") {
  SbmConfig c;
  c.p_inter = 0.02;  // above p_intra
  CHECK_THROWS_AS(generate_sbm(c), ConfigError);
  c = SbmConfig{};
  c.migrators_per_step = 4000;
  CHECK_THROWS_AS(generate_sbm(c), ConfigError);
  c = SbmConfig{};
  c.p_intra = 1.5;
  CHECK_THROWS_AS(generate_sbm(c), ConfigError);
}

TEST_CASE("rewire step invariants") {
  Rng rng(63);
  const Snapshot s = star(40);
  CHECK(rewire_step(s, 0, rng) == s);
  for (int k = 0; k < 20; ++k) {
    const Snapshot r = rewire_step(s, 10, rng);
    CHECK(r.edge_count() == s.edge_count());
    CHECK(r.vertex_count() == s.vertex_count());
    std::set<Edge> unique(r.edges().begin(), r.edges().end());
    CHECK(unique.size() == r.edge_count());
    for (const Edge& e : r.edges()) CHECK(e.u != e.v);
  }
  CHECK_THROWS_AS(rewire_step(s, 40, rng), ContractError);

  std::vector<Edge> all;
  for (Vertex u = 0; u < 5; ++u)
    for (Vertex v = u + 1; v < 5; ++v) all.emplace_back(u, v);
  CHECK_THROWS_AS(rewire_step(Snapshot(5, all), 1, rng), DegenerateInputError);
}

TEST_CASE("rewiring a star drifts toward the random-graph degree variance") {
  const std::size_t n = 60;
  RewireConfig c;
  c.source = star(n);
  c.snapshots = 80;
  c.edges_rewired_per_step = 5;
  c.seed = 64;
  const TemporalGraph g = generate_rewire(c);
  CHECK(g.length() == 80);
  CHECK(g.at(1) == c.source);
  for (std::size_t t = 1; t <= g.length(); ++t) CHECK(g.at(t).edge_count() == n - 1);

  // Reference: direct G(n, m) draws with the same edge count.
  Rng rng(65);
  std::uniform_int_distribution<Vertex> vertex(0, static_cast<Vertex>(n - 1));
  double er = 0.0;
  const int draws = 200;
  for (int k = 0; k < draws; ++k) {
    std::set<Edge> edges;
    while (edges.size() < n - 1) {
      const Vertex a = vertex(rng), b = vertex(rng);
      if (a != b) edges.emplace(a, b);
    }
    er += degree_variance(Snapshot(n, {edges.begin(), edges.end()}));
  }
  er /= draws;

  const double start = degree_variance(g.at(1));
  const double middle = degree_variance(g.at(10));
  const double end = degree_variance(g.at(80));
  CHECK(middle < start);
  CHECK(end < middle);
  CHECK(std::abs(end - er) < 0.5 * er);

  CHECK(generate_rewire(c) == g);
  RewireConfig bad = c;
  bad.edges_rewired_per_step = n;
  CHECK_THROWS_AS(generate_rewire(bad), ConfigError);
}
