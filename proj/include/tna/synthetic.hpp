#pragma once

#include "tna/graph.hpp"
#include "tna/random.hpp"

#include <cstdint>
#include <vector>

namespace tna {

/// Evolving stochastic block model. Defaults give mean degree about 10 with
/// mostly intra-community edges.
struct SbmConfig {
  std::size_t vertex_count = 3000;
  std::size_t communities = 3;
  std::size_t snapshots = 30;
  std::size_t migrators_per_step = 20;
  double p_intra = 0.01;
  double p_inter = 0.0005;
  std::uint64_t seed = 0;

  void validate() const;
};

struct SbmSequence {
  TemporalGraph graph;
  std::vector<std::vector<std::uint32_t>> labels;  // community of each vertex, per snapshot
};

/// Labels start as an even contiguous split. Before every snapshot after the
/// first, migrators_per_step distinct vertices each move to a different
/// community chosen uniformly. Each snapshot is an independent edge draw given
/// the labels.
SbmSequence generate_sbm(const SbmConfig& config);

struct RewireConfig {
  Snapshot source;
  std::size_t snapshots = 10;
  std::size_t edges_rewired_per_step = 100;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Erdos rewiring: removes edges_rewired_per_step uniformly chosen edges and
/// adds as many uniformly chosen pairs that were not edges before the step.
/// Edge and vertex counts are preserved.
Snapshot rewire_step(const Snapshot& g, std::size_t edges_rewired_per_step, Rng& rng);

/// G_1 is the source graph; G_{t+1} = rewire_step(G_t).
TemporalGraph generate_rewire(const RewireConfig& config);

}  // namespace tna
