#pragma once

#include "tna/tensor.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

namespace tna {

using Vertex = std::uint32_t;

/// Unordered vertex pair stored with u < v.
struct Edge {
  Vertex u = 0;
  Vertex v = 0;

  Edge() = default;
  Edge(Vertex a, Vertex b) : u(a < b ? a : b), v(a < b ? b : a) {}

  friend auto operator<=>(const Edge&, const Edge&) = default;
};

/// One graph of a temporal sequence over a fixed vertex universe. Immutable;
/// copies share storage.
class Snapshot {
 public:
  Snapshot() : Snapshot(0, {}) {}
  /// Duplicate pairs collapse; self-loops and out-of-range endpoints throw ContractError.
  Snapshot(std::size_t vertex_count, std::vector<Edge> edges);

  std::size_t vertex_count() const { return data_->vertex_count; }
  std::size_t edge_count() const { return data_->edges.size(); }
  /// Sorted ascending.
  const std::vector<Edge>& edges() const { return data_->edges; }
  bool has_edge(Vertex a, Vertex b) const;
  std::size_t degree(Vertex v) const { return data_->degree[v]; }

  /// D^-1/2 (A + I) D^-1/2 with D the degree matrix of A + I.
  const SparseMatrix& normalized_adjacency() const { return data_->normalized; }

  friend bool operator==(const Snapshot& a, const Snapshot& b) {
    return a.vertex_count() == b.vertex_count() && a.edges() == b.edges();
  }

 private:
  struct Data {
    std::size_t vertex_count = 0;
    std::vector<Edge> edges;
    std::vector<std::size_t> degree;
    SparseMatrix normalized;
  };
  std::shared_ptr<const Data> data_;
};

/// Dense copy of the normalized adjacency.
Tensor normalize_adjacency(const Snapshot& s);
/// Identity feature matrix X = I of size |V|.
Tensor identity_features(const Snapshot& s);

class TemporalGraph {
 public:
  TemporalGraph() = default;
  /// All snapshots must share one vertex count.
  TemporalGraph(std::vector<Snapshot> snapshots, std::string granularity_label);

  std::size_t length() const { return snapshots_.size(); }
  std::size_t vertex_count() const { return snapshots_.empty() ? 0 : snapshots_.front().vertex_count(); }
  const std::string& granularity_label() const { return granularity_; }

  /// 1-based access: at(1) is G_1.
  const Snapshot& at(std::size_t t) const;
  const std::vector<Snapshot>& snapshots() const { return snapshots_; }

  /// G_1..G_count as a new sequence.
  TemporalGraph prefix(std::size_t count) const;

  friend bool operator==(const TemporalGraph&, const TemporalGraph&) = default;

 private:
  std::vector<Snapshot> snapshots_;
  std::string granularity_;
};

/// E_t \ E_{t-1} for 2 <= t <= T (1-based).
std::vector<Edge> new_edges(const TemporalGraph& g, std::size_t t);

// ---- ingestion ----------------------------------------------------------------

struct ColumnSchema {
  std::size_t source = 0;
  std::size_t target = 1;
  std::size_t timestamp = 2;
};

struct Granularity {
  enum class Kind { kWeek, kMonth, kFixedCount };
  Kind kind = Kind::kMonth;
  std::size_t buckets = 0;  // kFixedCount only

  static Granularity week() { return {Kind::kWeek, 0}; }
  static Granularity month() { return {Kind::kMonth, 0}; }
  static Granularity fixed_count(std::size_t n) { return {Kind::kFixedCount, n}; }

  /// "weekly", "monthly" or "count<n>".
  std::string label() const;
  static Granularity parse(const std::string& text);
};

struct IngestOptions {
  ColumnSchema schema;
  Granularity granularity;
  bool directed_input = true;
  std::size_t min_snapshots = 3;
};

/// Reads a delimited timestamped edge list into cumulative snapshots.
///
/// Vertex ids are re-indexed densely in ascending raw-id order. Calendar
/// periods are UTC months or Monday-start weeks; leading empty periods are
/// dropped. Lines starting with '#' or '%' are comments.
TemporalGraph ingest_edge_list(std::istream& in, const IngestOptions& options);
TemporalGraph ingest_edge_list(const std::filesystem::path& path, const IngestOptions& options);

// ---- snapshot container --------------------------------------------------------

void write_snapshots(std::ostream& out, const TemporalGraph& g);
void write_snapshots(const std::filesystem::path& path, const TemporalGraph& g);
TemporalGraph read_snapshots(std::istream& in);
TemporalGraph read_snapshots(const std::filesystem::path& path);

/// Plain "i j" edge list (one pair per line, '#'/'%' comments) as one snapshot.
Snapshot read_static_edge_list(const std::filesystem::path& path);

}  // namespace tna
