#include "tna/graph.hpp"

#include "tna/errors.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string_view>

namespace tna {

// ---- Snapshot -------------------------------------------------------------------

Snapshot::Snapshot(std::size_t vertex_count, std::vector<Edge> edges) {
  auto data = std::make_shared<Data>();
  data->vertex_count = vertex_count;
  for (const Edge& e : edges) {
    if (e.u == e.v) throw ContractError(fmt::format("snapshot: self-loop on vertex {}", e.u));
    if (e.v >= vertex_count) {
      throw ContractError(fmt::format("snapshot: edge ({}, {}) outside vertex range {}", e.u, e.v, vertex_count));
    }
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());

  data->degree.assign(vertex_count, 0);
  for (const Edge& e : edges) {
    ++data->degree[e.u];
    ++data->degree[e.v];
  }

  std::vector<double> inv_sqrt(vertex_count);
  for (std::size_t i = 0; i < vertex_count; ++i) {
    inv_sqrt[i] = 1.0 / std::sqrt(static_cast<double>(data->degree[i] + 1));
  }
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(vertex_count + 2 * edges.size());
  for (std::size_t i = 0; i < vertex_count; ++i) {
    const auto k = static_cast<int>(i);
    triplets.emplace_back(k, k, inv_sqrt[i] * inv_sqrt[i]);
  }
  for (const Edge& e : edges) {
    const double w = inv_sqrt[e.u] * inv_sqrt[e.v];
    triplets.emplace_back(static_cast<int>(e.u), static_cast<int>(e.v), w);
    triplets.emplace_back(static_cast<int>(e.v), static_cast<int>(e.u), w);
  }
  data->normalized.resize(static_cast<Eigen::Index>(vertex_count), static_cast<Eigen::Index>(vertex_count));
  data->normalized.setFromTriplets(triplets.begin(), triplets.end());
  data->normalized.makeCompressed();

  data->edges = std::move(edges);
  data_ = std::move(data);
}

bool Snapshot::has_edge(Vertex a, Vertex b) const {
  if (a == b) return false;
  return std::binary_search(data_->edges.begin(), data_->edges.end(), Edge(a, b));
}

Tensor normalize_adjacency(const Snapshot& s) { return Tensor::constant(Matrix(s.normalized_adjacency())); }

Tensor identity_features(const Snapshot& s) {
  const auto n = static_cast<Eigen::Index>(s.vertex_count());
  return Tensor::constant(Matrix::Identity(n, n));
}

// ---- TemporalGraph ----------------------------------------------------------------

TemporalGraph::TemporalGraph(std::vector<Snapshot> snapshots, std::string granularity_label)
    : snapshots_(std::move(snapshots)), granularity_(std::move(granularity_label)) {
  for (const auto& s : snapshots_) {
    if (s.vertex_count() != snapshots_.front().vertex_count()) {
      throw ContractError(fmt::format("temporal graph: vertex counts differ ({} vs {})", s.vertex_count(),
                                      snapshots_.front().vertex_count()));
    }
  }
  if (granularity_.empty() || granularity_.find_first_of(" \t\n") != std::string::npos) {
    throw ContractError("temporal graph: granularity label must be a single non-empty token");
  }
}

const Snapshot& TemporalGraph::at(std::size_t t) const {
  if (t < 1 || t > snapshots_.size()) {
    throw ContractError(fmt::format("snapshot index {} outside 1..{}", t, snapshots_.size()));
  }
  return snapshots_[t - 1];
}

TemporalGraph TemporalGraph::prefix(std::size_t count) const {
  if (count > snapshots_.size()) {
    throw ContractError(fmt::format("prefix of length {} exceeds T={}", count, snapshots_.size()));
  }
  return TemporalGraph({snapshots_.begin(), snapshots_.begin() + static_cast<std::ptrdiff_t>(count)}, granularity_);
}

std::vector<Edge> new_edges(const TemporalGraph& g, std::size_t t) {
  if (t < 2 || t > g.length()) {
    throw ContractError(fmt::format("new_edges: t={} outside 2..{}", t, g.length()));
  }
  const auto& cur = g.at(t).edges();
  const auto& prev = g.at(t - 1).edges();
  std::vector<Edge> out;
  std::set_difference(cur.begin(), cur.end(), prev.begin(), prev.end(), std::back_inserter(out));
  return out;
}

// ---- ingestion ------------------------------------------------------------------

std::string Granularity::label() const {
  switch (kind) {
    case Kind::kWeek:
      return "weekly";
    case Kind::kMonth:
      return "monthly";
    case Kind::kFixedCount:
      return fmt::format("count{}", buckets);
  }
  return "unknown";
}

Granularity Granularity::parse(const std::string& text) {
  if (text == "week" || text == "weekly") return week();
  if (text == "month" || text == "monthly") return month();
  std::string_view rest = text;
  for (std::string_view prefix : {"count:", "count", "fixed:"}) {
    if (rest.starts_with(prefix)) {
      rest.remove_prefix(prefix.size());
      std::size_t n = 0;
      auto [ptr, ec] = std::from_chars(rest.data(), rest.data() + rest.size(), n);
      if (ec == std::errc() && ptr == rest.data() + rest.size() && n > 0) return fixed_count(n);
      break;
    }
  }
  throw ConfigError("unknown granularity '" + text + "' (expected week, month or count:<n>)");
}

namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  const bool comma = line.find(',') != std::string_view::npos;
  std::size_t i = 0;
  while (i < line.size()) {
    if (comma) {
      std::size_t j = line.find(',', i);
      if (j == std::string_view::npos) j = line.size();
      std::string_view f = line.substr(i, j - i);
      while (!f.empty() && std::isspace(static_cast<unsigned char>(f.front()))) f.remove_prefix(1);
      while (!f.empty() && std::isspace(static_cast<unsigned char>(f.back()))) f.remove_suffix(1);
      out.push_back(f);
      i = j + 1;
      if (j == line.size()) break;
    } else {
      while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
      if (i >= line.size()) break;
      std::size_t j = i;
      while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
      out.push_back(line.substr(i, j - i));
      i = j;
    }
  }
  return out;
}

bool is_blank_or_comment(std::string_view line) {
  for (char c : line) {
    if (std::isspace(static_cast<unsigned char>(c))) continue;
    return c == '#' || c == '%';
  }
  return true;
}

template <typename T>
bool parse_number(std::string_view text, T& out) {
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
  return ec == std::errc() && ptr == text.data() + text.size();
}

struct RawEdge {
  std::int64_t source;
  std::int64_t target;
  std::int64_t time;
};

std::int64_t period_of(std::int64_t unix_seconds, Granularity::Kind kind) {
  using namespace std::chrono;
  const auto days = floor<std::chrono::days>(sys_seconds{seconds{unix_seconds}});
  if (kind == Granularity::Kind::kMonth) {
    const year_month_day ymd{days};
    return static_cast<std::int64_t>(static_cast<int>(ymd.year())) * 12 +
           static_cast<std::int64_t>(static_cast<unsigned>(ymd.month())) - 1;
  }
  // 1970-01-01 was a Thursday; shifting by 3 days makes weeks start on Monday.
  const std::int64_t d = days.time_since_epoch().count();
  const std::int64_t shifted = d + 3;
  return shifted >= 0 ? shifted / 7 : -((-shifted + 6) / 7);
}

}  // namespace

TemporalGraph ingest_edge_list(std::istream& in, const IngestOptions& options) {
  const ColumnSchema& schema = options.schema;
  const std::size_t needed = std::max({schema.source, schema.target, schema.timestamp}) + 1;

  std::vector<RawEdge> raw;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (is_blank_or_comment(line)) continue;
    const auto fields = split_fields(line);
    if (fields.size() < needed) {
      throw IngestionError(fmt::format("expected at least {} columns, found {}", needed, fields.size()), line_no);
    }
    RawEdge e{};
    if (!parse_number(fields[schema.source], e.source) || !parse_number(fields[schema.target], e.target)) {
      throw IngestionError("vertex ids must be integers", line_no);
    }
    if (!parse_number(fields[schema.timestamp], e.time)) {
      double t = 0.0;
      if (!parse_number(fields[schema.timestamp], t) || !std::isfinite(t)) {
        throw IngestionError(fmt::format("unparseable timestamp '{}'", fields[schema.timestamp]), line_no);
      }
      e.time = static_cast<std::int64_t>(std::floor(t));
    }
    raw.push_back(e);
  }
  if (raw.empty()) throw ContractError("ingest: no edges in input");

  std::vector<std::int64_t> ids;
  ids.reserve(2 * raw.size());
  for (const auto& e : raw) {
    ids.push_back(e.source);
    ids.push_back(e.target);
  }
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  auto index_of = [&ids](std::int64_t id) {
    return static_cast<Vertex>(std::lower_bound(ids.begin(), ids.end(), id) - ids.begin());
  };

  std::stable_sort(raw.begin(), raw.end(), [](const RawEdge& a, const RawEdge& b) { return a.time < b.time; });

  // Bucket index per raw edge, relative to the first non-empty period.
  std::vector<std::size_t> bucket(raw.size());
  std::size_t buckets = 0;
  if (options.granularity.kind == Granularity::Kind::kFixedCount) {
    const std::size_t n = options.granularity.buckets;
    if (n == 0) throw ConfigError("ingest: fixed_count granularity needs n >= 1");
    if (n > raw.size()) throw ContractError("ingest: more buckets than edges");
    for (std::size_t k = 0; k < raw.size(); ++k) bucket[k] = k * n / raw.size();
    buckets = n;
  } else {
    const std::int64_t first = period_of(raw.front().time, options.granularity.kind);
    for (std::size_t k = 0; k < raw.size(); ++k) {
      bucket[k] = static_cast<std::size_t>(period_of(raw[k].time, options.granularity.kind) - first);
    }
    buckets = bucket.back() + 1;
  }

  std::vector<Snapshot> snapshots;
  snapshots.reserve(buckets);
  std::vector<Edge> cumulative;
  std::size_t k = 0;
  for (std::size_t b = 0; b < buckets; ++b) {
    for (; k < raw.size() && bucket[k] == b; ++k) {
      const Vertex u = index_of(raw[k].source);
      const Vertex v = index_of(raw[k].target);
      if (u != v) cumulative.emplace_back(u, v);
    }
    Snapshot s(ids.size(), cumulative);
    cumulative = s.edges();
    snapshots.push_back(std::move(s));
  }

  std::vector<bool> seen(buckets, false);
  for (std::size_t b : bucket) seen[b] = true;
  const auto non_empty = static_cast<std::size_t>(std::count(seen.begin(), seen.end(), true));
  if (non_empty < options.min_snapshots) {
    throw ContractError(fmt::format("ingest: {} non-empty snapshots, at least {} required", non_empty,
                                    options.min_snapshots));
  }
  return TemporalGraph(std::move(snapshots), options.granularity.label());
}

TemporalGraph ingest_edge_list(const std::filesystem::path& path, const IngestOptions& options) {
  std::ifstream in(path);
  if (!in) throw std::ios_base::failure("cannot open " + path.string());
  return ingest_edge_list(in, options);
}

// ---- snapshot container ------------------------------------------------------------

void write_snapshots(std::ostream& out, const TemporalGraph& g) {
  out << g.vertex_count() << ' ' << g.length() << ' ' << g.granularity_label() << '\n';
  for (std::size_t t = 1; t <= g.length(); ++t) {
    const auto& s = g.at(t);
    out << t << ' ' << s.edge_count() << '\n';
    for (const Edge& e : s.edges()) out << e.u << ' ' << e.v << '\n';
  }
}

void write_snapshots(const std::filesystem::path& path, const TemporalGraph& g) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::ios_base::failure("cannot write " + path.string());
  write_snapshots(out, g);
  if (!out) throw std::ios_base::failure("write failed: " + path.string());
}

TemporalGraph read_snapshots(std::istream& in) {
  std::size_t line_no = 0;
  std::string line;
  auto next_fields = [&]() {
    while (std::getline(in, line)) {
      ++line_no;
      if (!is_blank_or_comment(line)) return split_fields(line);
    }
    throw IngestionError("unexpected end of snapshot file", line_no + 1);
  };
  auto count_field = [&](std::string_view f) {
    std::size_t v = 0;
    if (!parse_number(f, v)) throw IngestionError(fmt::format("expected a count, found '{}'", f), line_no);
    return v;
  };

  auto header = next_fields();
  if (header.size() != 3) throw IngestionError("header must be '|V| T granularity'", line_no);
  const std::size_t n = count_field(header[0]);
  const std::size_t length = count_field(header[1]);
  std::string label(header[2]);

  std::vector<Snapshot> snapshots;
  snapshots.reserve(length);
  for (std::size_t t = 1; t <= length; ++t) {
    auto head = next_fields();
    if (head.size() != 2 || count_field(head[0]) != t) {
      throw IngestionError(fmt::format("expected snapshot header for t={}", t), line_no);
    }
    const std::size_t m = count_field(head[1]);
    std::vector<Edge> edges;
    edges.reserve(m);
    for (std::size_t k = 0; k < m; ++k) {
      auto f = next_fields();
      if (f.size() != 2) throw IngestionError("expected an 'i j' pair", line_no);
      const std::size_t i = count_field(f[0]);
      const std::size_t j = count_field(f[1]);
      if (i >= n || j >= n || i == j) throw IngestionError(fmt::format("invalid edge ({}, {})", i, j), line_no);
      edges.emplace_back(static_cast<Vertex>(i), static_cast<Vertex>(j));
    }
    snapshots.emplace_back(n, std::move(edges));
  }
  return TemporalGraph(std::move(snapshots), std::move(label));
}

TemporalGraph read_snapshots(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::ios_base::failure("cannot open " + path.string());
  return read_snapshots(in);
}

Snapshot read_static_edge_list(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::ios_base::failure("cannot open " + path.string());
  std::vector<std::pair<std::int64_t, std::int64_t>> raw;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (is_blank_or_comment(line)) continue;
    const auto f = split_fields(line);
    std::int64_t a = 0, b = 0;
    if (f.size() < 2 || !parse_number(f[0], a) || !parse_number(f[1], b)) {
      throw IngestionError("expected two integer vertex ids", line_no);
    }
    raw.emplace_back(a, b);
  }
  std::vector<std::int64_t> ids;
  for (auto [a, b] : raw) {
    ids.push_back(a);
    ids.push_back(b);
  }
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  auto index_of = [&ids](std::int64_t id) {
    return static_cast<Vertex>(std::lower_bound(ids.begin(), ids.end(), id) - ids.begin());
  };
  std::vector<Edge> edges;
  for (auto [a, b] : raw) {
    if (a != b) edges.emplace_back(index_of(a), index_of(b));
  }
  return Snapshot(ids.size(), std::move(edges));
}

}  // namespace tna
