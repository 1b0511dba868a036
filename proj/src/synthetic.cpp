#include "tna/synthetic.hpp"

#include "tna/errors.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <numeric>
#include <unordered_set>

namespace tna {

void SbmConfig::validate() const {
  if (vertex_count < 2) throw ConfigError("sbm: need at least 2 vertices");
  if (communities < 1 || communities > vertex_count) throw ConfigError("sbm: communities must lie in 1..|V|");
  if (snapshots < 1) throw ConfigError("sbm: need at least one snapshot");
  if (migrators_per_step > vertex_count) throw ConfigError("sbm: migrators_per_step exceeds |V|");
  if (migrators_per_step > 0 && communities < 2) throw ConfigError("sbm: migration needs at least 2 communities");
  if (!(p_inter >= 0.0 && p_inter < p_intra && p_intra <= 1.0)) {
    throw ConfigError(fmt::format("sbm: need 0 <= p_inter < p_intra <= 1, got p_inter={} p_intra={}", p_inter, p_intra));
  }
}

SbmSequence generate_sbm(const SbmConfig& config) {
  config.validate();
  Rng rng(config.seed);
  const std::size_t n = config.vertex_count;
  const std::size_t k = config.communities;

  std::vector<std::uint32_t> labels(n);
  for (std::size_t v = 0; v < n; ++v) labels[v] = static_cast<std::uint32_t>(v * k / n);

  std::vector<std::size_t> order(n);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  SbmSequence out;
  std::vector<Snapshot> snapshots;
  for (std::size_t t = 0; t < config.snapshots; ++t) {
    if (t > 0) {
      std::iota(order.begin(), order.end(), 0);
      for (std::size_t m = 0; m < config.migrators_per_step; ++m) {
        std::uniform_int_distribution<std::size_t> pick(m, n - 1);
        std::swap(order[m], order[pick(rng)]);
        std::uniform_int_distribution<std::uint32_t> shift(1, static_cast<std::uint32_t>(k - 1));
        const std::size_t v = order[m];
        labels[v] = static_cast<std::uint32_t>((labels[v] + shift(rng)) % k);
      }
    }
    std::vector<Edge> edges;
    for (Vertex u = 0; u < n; ++u) {
      for (Vertex v = u + 1; v < n; ++v) {
        const double p = labels[u] == labels[v] ? config.p_intra : config.p_inter;
        if (unit(rng) < p) edges.emplace_back(u, v);
      }
    }
    snapshots.emplace_back(n, std::move(edges));
    out.labels.push_back(labels);
  }
  out.graph = TemporalGraph(std::move(snapshots), "sbm");
  return out;
}

void RewireConfig::validate() const {
  if (snapshots < 1) throw ConfigError("rewire: need at least one snapshot");
  if (edges_rewired_per_step > source.edge_count()) {
    throw ConfigError(fmt::format("rewire: {} edges per step exceeds |E|={}", edges_rewired_per_step, source.edge_count()));
  }
}

Snapshot rewire_step(const Snapshot& g, std::size_t edges_rewired_per_step, Rng& rng) {
  const std::size_t m = g.edge_count();
  if (edges_rewired_per_step > m) {
    throw ContractError(fmt::format("rewire: {} edges per step exceeds |E|={}", edges_rewired_per_step, m));
  }
  if (edges_rewired_per_step == 0) return g;
  const std::uint64_t n = g.vertex_count();
  const std::uint64_t free_pairs = n * (n - 1) / 2 - m;
  if (free_pairs < edges_rewired_per_step) {
    throw DegenerateInputError(fmt::format("rewire: only {} free pairs for {} replacements", free_pairs,
                                           edges_rewired_per_step));
  }

  std::vector<Edge> edges = g.edges();
  for (std::size_t k = 0; k < edges_rewired_per_step; ++k) {
    std::uniform_int_distribution<std::size_t> pick(k, m - 1);
    std::swap(edges[k], edges[pick(rng)]);
  }
  std::vector<Edge> kept(edges.begin() + static_cast<std::ptrdiff_t>(edges_rewired_per_step), edges.end());

  std::uniform_int_distribution<Vertex> vertex(0, static_cast<Vertex>(n - 1));
  std::unordered_set<std::uint64_t> added;
  while (added.size() < edges_rewired_per_step) {
    const Vertex a = vertex(rng);
    const Vertex b = vertex(rng);
    if (a == b) continue;
    Edge e(a, b);
    if (g.has_edge(e.u, e.v)) continue;
    if (added.insert((static_cast<std::uint64_t>(e.u) << 32) | e.v).second) kept.push_back(e);
  }
  return Snapshot(g.vertex_count(), std::move(kept));
}

TemporalGraph generate_rewire(const RewireConfig& config) {
  config.validate();
  Rng rng(config.seed);
  std::vector<Snapshot> snapshots{config.source};
  for (std::size_t t = 1; t < config.snapshots; ++t) {
    snapshots.push_back(rewire_step(snapshots.back(), config.edges_rewired_per_step, rng));
  }
  return TemporalGraph(std::move(snapshots), "rewire");
}

}  // namespace tna
