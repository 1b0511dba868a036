#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "tna/errors.hpp"
#include "tna/graph.hpp"

#include <cmath>
#include <random>
#include <sstream>

using namespace tna;

namespace {

// 2004-04-15 and 2004-05-03 (UTC), a month apart at calendar granularity.
constexpr std::int64_t kApril = 1082023200;
constexpr std::int64_t kMay = 1083578400;
constexpr std::int64_t kDay = 86400;

Matrix dense(const Snapshot& s) { return normalize_adjacency(s).value(); }

}  // namespace

TEST_CASE("normalized adjacency") {
  CHECK(dense(Snapshot(1, {})) == Matrix::Ones(1, 1));
  CHECK((dense(Snapshot(2, {{0, 1}})).array() - 0.5).abs().maxCoeff() < 1e-15);

  const Matrix path = dense(Snapshot(3, {{0, 1}, {1, 2}}));
  // Degrees with self-loops are 2, 3, 2.
  CHECK(path(0, 1) == doctest::Approx(1.0 / std::sqrt(6.0)).epsilon(1e-15));
  CHECK(path(0, 1) == doctest::Approx(0.40825).epsilon(1e-5));
  CHECK(path(0, 0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(path(1, 1) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK(path(0, 2) == 0.0);
}

TEST_CASE("normalized adjacency is symmetric and isolated rows are identity rows") {
  std::mt19937_64 rng(11);
  std::bernoulli_distribution coin(0.3);
  std::vector<Edge> edges;
  for (Vertex u = 0; u < 12; ++u) {
    for (Vertex v = u + 1; v < 12; ++v) {
      if (u != 5 && v != 5 && coin(rng)) edges.emplace_back(u, v);
    }
  }
  const Matrix a = dense(Snapshot(12, edges));
  CHECK((a - a.transpose()).cwiseAbs().maxCoeff() == 0.0);
  CHECK(a.minCoeff() >= 0.0);
  CHECK(a.maxCoeff() <= 1.0);
  CHECK(a.row(5) == Matrix::Identity(12, 12).row(5));
}

TEST_CASE("identity features") {
  const Snapshot s(3, {{0, 1}});
  const Matrix x = identity_features(s).value();
  CHECK(x == Matrix::Identity(3, 3));
  CHECK(x.rowwise().sum() == Matrix::Ones(3, 1));
  Matrix w(3, 2);
  w << 1, 2, 3, 4, 5, 6;
  CHECK(x * w == w);
}

TEST_CASE("snapshot validation and dedup") {
  CHECK_THROWS_AS(Snapshot(3, {{1, 1}}), ContractError);
  CHECK_THROWS_AS(Snapshot(3, {{0, 3}}), ContractError);
  const Snapshot s(4, {{2, 1}, {1, 2}, {0, 3}});
  CHECK(s.edge_count() == 2);
  CHECK(s.edges().front() == Edge(0, 3));
  CHECK(s.has_edge(2, 1));
  CHECK_FALSE(s.has_edge(0, 1));
  CHECK(s.degree(1) == 1);
}

TEST_CASE("new edges") {
  const TemporalGraph g({Snapshot(3, {{0, 1}}), Snapshot(3, {{0, 1}, {1, 2}}), Snapshot(3, {{0, 1}, {1, 2}})}, "x");
  CHECK(new_edges(g, 2) == std::vector<Edge>{{1, 2}});
  CHECK(new_edges(g, 3).empty());
  CHECK_THROWS_AS(new_edges(g, 1), ContractError);
  CHECK_THROWS_AS(new_edges(g, 4), ContractError);
}

TEST_CASE("temporal graph access") {
  const TemporalGraph g({Snapshot(2, {}), Snapshot(2, {{0, 1}})}, "weekly");
  CHECK(g.length() == 2);
  CHECK(g.at(2).edge_count() == 1);
  CHECK_THROWS_AS(g.at(0), ContractError);
  CHECK(g.prefix(1).length() == 1);
  CHECK_THROWS_AS(TemporalGraph({Snapshot(2, {}), Snapshot(3, {})}, "x"), ContractError);
}

TEST_CASE("ingest: two consecutive months") {
  std::istringstream in("0 1 " + std::to_string(kApril) + "\n1 2 " + std::to_string(kMay) + "\n");
  IngestOptions opt;
  opt.granularity = Granularity::month();
  opt.min_snapshots = 2;
  const TemporalGraph g = ingest_edge_list(in, opt);
  CHECK(g.length() == 2);
  CHECK(g.vertex_count() == 3);
  CHECK(g.granularity_label() == "monthly");
  CHECK(g.at(1).edges() == std::vector<Edge>{{0, 1}});
  CHECK(g.at(2).edges() == std::vector<Edge>{{0, 1}, {1, 2}});
}

TEST_CASE("ingest: fewer than three non-empty snapshots is an error by default") {
  std::istringstream in("0 1 " + std::to_string(kApril) + "\n1 2 " + std::to_string(kMay) + "\n");
  CHECK_THROWS_AS(ingest_edge_list(in, IngestOptions{}), ContractError);
}

TEST_CASE("ingest: weekly buckets, comments, commas, re-indexing, symmetrization") {
  // 2004-04-15 is a Thursday; +4 days is Monday of the next week.
  std::ostringstream text;
  text << "# header\n% konect style\n";
  text << "100," << 7 << "," << kApril << "\n";
  text << "7,100," << kApril + kDay << "\n";  // reverse direction, same week
  text << "7,55," << kApril + 4 * kDay << "\n";
  text << "\n";
  text << "55,100," << kApril + 18 * kDay << "\n";  // one empty week in between
  std::istringstream in(text.str());
  IngestOptions opt;
  opt.granularity = Granularity::week();
  const TemporalGraph g = ingest_edge_list(in, opt);
  CHECK(g.vertex_count() == 3);  // ids 7, 55, 100 -> 0, 1, 2
  CHECK(g.length() == 4);
  CHECK(g.at(1).edges() == std::vector<Edge>{{0, 2}});
  CHECK(g.at(2).edges() == std::vector<Edge>{{0, 1}, {0, 2}});
  CHECK(g.at(3) == g.at(2));
  CHECK(g.at(4).edge_count() == 3);
  for (std::size_t t = 2; t <= g.length(); ++t) {
    for (const Edge& e : g.at(t - 1).edges()) CHECK(g.at(t).has_edge(e.u, e.v));
  }
}

TEST_CASE("ingest: fixed-count buckets and column schema") {
  std::istringstream in("5 0 1 9\n5 1 2 8\n5 2 3 7\n5 3 4 6\n5 4 0 5\n5 1 3 4\n");
  IngestOptions opt;
  opt.schema = {1, 2, 3};
  opt.granularity = Granularity::fixed_count(3);
  const TemporalGraph g = ingest_edge_list(in, opt);
  CHECK(g.length() == 3);
  CHECK(g.granularity_label() == "count3");
  CHECK(g.at(1).edge_count() == 2);
  CHECK(g.at(3).edge_count() == 6);
}

TEST_CASE("ingest: bad rows report their line") {
  std::istringstream in("# c\n0 1 100\n0 x 200\n");
  try {
    ingest_edge_list(in, IngestOptions{});
    FAIL("expected IngestionError");
  } catch (const IngestionError& e) {
    CHECK(e.line() == 3);
  }
  std::istringstream short_row("0 1\n");
  CHECK_THROWS_AS(ingest_edge_list(short_row, IngestOptions{}), IngestionError);
  std::istringstream bad_time("0 1 abc\n");
  CHECK_THROWS_AS(ingest_edge_list(bad_time, IngestOptions{}), IngestionError);
}

TEST_CASE("granularity parsing") {
  CHECK(Granularity::parse("week").kind == Granularity::Kind::kWeek);
  CHECK(Granularity::parse("monthly").kind == Granularity::Kind::kMonth);
  CHECK(Granularity::parse("count:5").buckets == 5);
  CHECK_THROWS_AS(Granularity::parse("fortnight"), ConfigError);
}

TEST_CASE("snapshot container round trip") {
  std::mt19937_64 rng(12);
  std::uniform_int_distribution<Vertex> v(0, 19);
  std::vector<Snapshot> snaps;
  std::vector<Edge> edges;
  for (int t = 0; t < 4; ++t) {
    for (int k = 0; k < 10; ++k) {
      const Vertex a = v(rng), b = v(rng);
      if (a != b) edges.emplace_back(a, b);
    }
    snaps.emplace_back(20, edges);
  }
  const TemporalGraph g(snaps, "monthly");
  std::stringstream first;
  write_snapshots(first, g);
  const TemporalGraph back = read_snapshots(first);
  CHECK(back == g);
  std::stringstream second;
  write_snapshots(second, back);
  CHECK(second.str() == first.str());

  std::istringstream broken("3 1 x\n1 2\n0 1\n");
  CHECK_THROWS_AS(read_snapshots(broken), IngestionError);
}
