#include "tna/metrics.hpp"

#include "tna/errors.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>
#include <unordered_set>

namespace tna {

namespace {

void require_non_empty(std::span<const double> pos, std::span<const double> neg, const char* what) {
  if (pos.empty() || neg.empty()) {
    throw ContractError(fmt::format("{}: needs at least one positive and one negative score ({} / {})", what,
                                    pos.size(), neg.size()));
  }
}

double logistic(double x) {
  const double e = std::exp(-std::abs(x));
  return x >= 0.0 ? 1.0 / (1.0 + e) : e / (1.0 + e);
}

std::uint64_t pair_key(const Edge& e) { return (static_cast<std::uint64_t>(e.u) << 32) | e.v; }

/// Sorted union of the edge sets.
std::vector<Edge> merged_edges(std::span<const Snapshot> snapshots) {
  std::vector<Edge> out;
  for (const auto& s : snapshots) {
    std::vector<Edge> next;
    next.reserve(out.size() + s.edge_count());
    std::set_union(out.begin(), out.end(), s.edges().begin(), s.edges().end(), std::back_inserter(next));
    out = std::move(next);
  }
  return out;
}

std::vector<Edge> sample_excluding(std::size_t vertex_count, const std::vector<Edge>& excluded, std::size_t n,
                                   Rng& rng) {
  const std::uint64_t nv = vertex_count;
  const std::uint64_t total = nv < 2 ? 0 : nv * (nv - 1) / 2;
  const std::uint64_t available = total - excluded.size();
  if (available < n) {
    throw DegenerateInputError(fmt::format("cannot sample {} non-edges; only {} exist", n, available));
  }
  auto is_excluded = [&excluded](const Edge& e) { return std::binary_search(excluded.begin(), excluded.end(), e); };

  std::vector<Edge> out;
  out.reserve(n);
  if (available <= 4 * static_cast<std::uint64_t>(n)) {
    // Dense regime: enumerate the candidates and take a partial shuffle.
    std::vector<Edge> candidates;
    candidates.reserve(available);
    for (Vertex u = 0; u < vertex_count; ++u) {
      for (Vertex v = u + 1; v < vertex_count; ++v) {
        Edge e(u, v);
        if (!is_excluded(e)) candidates.push_back(e);
      }
    }
    for (std::size_t k = 0; k < n; ++k) {
      std::uniform_int_distribution<std::size_t> pick(k, candidates.size() - 1);
      std::swap(candidates[k], candidates[pick(rng)]);
      out.push_back(candidates[k]);
    }
    return out;
  }
  std::uniform_int_distribution<Vertex> vertex(0, static_cast<Vertex>(vertex_count - 1));
  std::unordered_set<std::uint64_t> chosen;
  while (out.size() < n) {
    const Vertex a = vertex(rng);
    const Vertex b = vertex(rng);
    if (a == b) continue;
    Edge e(a, b);
    if (is_excluded(e) || !chosen.insert(pair_key(e)).second) continue;
    out.push_back(e);
  }
  return out;
}

}  // namespace

double auc(std::span<const double> pos, std::span<const double> neg) {
  require_non_empty(pos, neg, "auc");
  struct Item {
    double score;
    bool positive;
  };
  std::vector<Item> items;
  items.reserve(pos.size() + neg.size());
  for (double s : pos) items.push_back({s, true});
  for (double s : neg) items.push_back({s, false});
  std::sort(items.begin(), items.end(), [](const Item& a, const Item& b) { return a.score < b.score; });

  // Sum of (1-based, tie-averaged) ranks of the positives, doubled to stay integral.
  double twice_rank_sum = 0.0;
  for (std::size_t i = 0; i < items.size();) {
    std::size_t j = i;
    std::size_t pos_in_group = 0;
    while (j < items.size() && items[j].score == items[i].score) {
      pos_in_group += items[j].positive ? 1 : 0;
      ++j;
    }
    // Ranks i+1..j average to (i + 1 + j) / 2.
    twice_rank_sum += static_cast<double>(pos_in_group) * static_cast<double>(i + 1 + j);
    i = j;
  }
  const double np = static_cast<double>(pos.size());
  const double nn = static_cast<double>(neg.size());
  const double u = twice_rank_sum / 2.0 - np * (np + 1.0) / 2.0;
  return u / (np * nn);
}

PrecisionScores average_precision(std::span<const double> pos, std::span<const double> neg, double threshold) {
  require_non_empty(pos, neg, "average_precision");
  const std::size_t total = pos.size() + neg.size();
  auto score = [&](std::size_t k) { return k < pos.size() ? pos[k] : neg[k - pos.size()]; };
  std::vector<std::size_t> order(total);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return score(a) > score(b); });

  PrecisionScores out;
  std::size_t hits = 0;
  double precision_sum = 0.0;
  for (std::size_t rank = 0; rank < total; ++rank) {
    if (order[rank] < pos.size()) {
      ++hits;
      precision_sum += static_cast<double>(hits) / static_cast<double>(rank + 1);
    }
  }
  out.ap = precision_sum / static_cast<double>(pos.size());

  const auto tp = std::count_if(pos.begin(), pos.end(), [threshold](double s) { return s > threshold; });
  const auto fp = std::count_if(neg.begin(), neg.end(), [threshold](double s) { return s > threshold; });
  out.threshold_precision = tp + fp == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
  return out;
}

MetricsRecord compute_metrics(std::span<const double> pos, std::span<const double> neg) {
  MetricsRecord m;
  m.auc = auc(pos, neg);
  const auto p = average_precision(pos, neg);
  m.ap = p.ap;
  m.threshold_precision = p.threshold_precision;
  m.n_pos = pos.size();
  m.n_neg = neg.size();
  return m;
}

// ---- evaluation sets -------------------------------------------------------------

std::vector<Edge> sample_non_edges(const Snapshot& exclude, std::size_t n, Rng& rng) {
  return sample_excluding(exclude.vertex_count(), exclude.edges(), n, rng);
}

std::optional<EvalSet> build_new_edge_evalset(const TemporalGraph& g, std::size_t t, Rng& rng) {
  EvalSet es;
  es.positives = new_edges(g, t);
  if (es.positives.empty()) return std::nullopt;
  const Snapshot both[] = {g.at(t), g.at(t - 1)};
  es.negatives = sample_excluding(g.vertex_count(), merged_edges(both), es.positives.size(), rng);
  return es;
}

EvalSet build_full_graph_evalset(const TemporalGraph& g, std::size_t t, Rng& rng, std::size_t cap) {
  const Snapshot& s = g.at(t);
  if (s.edge_count() == 0) throw DegenerateInputError(fmt::format("full-graph evaluation: G_{} has no edges", t));
  if (cap == 0) throw ContractError("full-graph evaluation: cap must be positive");
  std::vector<Edge> pool = s.edges();
  const std::size_t n = std::min(cap, pool.size());
  EvalSet es;
  es.positives.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    std::uniform_int_distribution<std::size_t> pick(k, pool.size() - 1);
    std::swap(pool[k], pool[pick(rng)]);
    es.positives.push_back(pool[k]);
  }
  es.negatives = sample_non_edges(s, n, rng);
  return es;
}

std::vector<double> pair_scores(const Matrix& embedding, std::span<const Edge> pairs) {
  std::vector<double> out;
  out.reserve(pairs.size());
  const auto rows = static_cast<std::size_t>(embedding.rows());
  for (const Edge& e : pairs) {
    if (e.v >= rows) throw ContractError(fmt::format("score: vertex {} outside embedding of {} rows", e.v, rows));
    out.push_back(logistic(embedding.row(e.u).dot(embedding.row(e.v))));
  }
  return out;
}

MetricsRecord score_evalset(const Matrix& embedding, const EvalSet& es) {
  const auto pos = pair_scores(embedding, es.positives);
  const auto neg = pair_scores(embedding, es.negatives);
  return compute_metrics(pos, neg);
}

// ---- autoregressive rollout -----------------------------------------------------

Snapshot binarize_prediction(const Matrix& embedding, const Binarize& rule, std::size_t k) {
  const auto n = static_cast<Vertex>(embedding.rows());
  std::vector<Edge> edges;
  if (rule.kind == Binarize::Kind::kThreshold) {
    for (Vertex u = 0; u < n; ++u) {
      for (Vertex v = u + 1; v < n; ++v) {
        if (logistic(embedding.row(u).dot(embedding.row(v))) > rule.threshold) edges.emplace_back(u, v);
      }
    }
    return Snapshot(n, std::move(edges));
  }

  // Keep the k best pairs; the heap top is the worst kept pair.
  struct Scored {
    double score;
    Edge edge;
  };
  auto worse = [](const Scored& a, const Scored& b) {
    return a.score != b.score ? a.score > b.score : a.edge < b.edge;
  };
  std::priority_queue<Scored, std::vector<Scored>, decltype(worse)> heap(worse);
  if (k > 0) {
    for (Vertex u = 0; u < n; ++u) {
      for (Vertex v = u + 1; v < n; ++v) {
        Scored s{logistic(embedding.row(u).dot(embedding.row(v))), Edge(u, v)};
        if (heap.size() < k) {
          heap.push(s);
        } else if (worse(s, heap.top())) {
          heap.pop();
          heap.push(s);
        }
      }
    }
  }
  while (!heap.empty()) {
    edges.push_back(heap.top().edge);
    heap.pop();
  }
  return Snapshot(n, std::move(edges));
}

std::vector<RolloutStep> rollout(const Model& model, const TemporalGraph& g, std::size_t start_t, std::size_t horizon,
                                 const Binarize& rule, std::uint64_t seed) {
  if (start_t < 1 || horizon < 1 || start_t + horizon > g.length()) {
    throw ContractError(fmt::format("rollout: start {} + horizon {} must stay within 1..{}", start_t, horizon, g.length()));
  }
  std::vector<Snapshot> inputs(g.snapshots().begin(), g.snapshots().begin() + static_cast<std::ptrdiff_t>(start_t));
  const std::size_t keep = g.at(start_t).edge_count();
  std::vector<RolloutStep> steps;
  for (std::size_t k = 1; k <= horizon; ++k) {
    const std::size_t t = start_t + k;
    const Matrix embedding = embed_last(model, inputs);
    RolloutStep step;
    step.t = t;
    Rng eval_rng(derive_seed(seed, t, kEvalStream));
    if (auto es = build_new_edge_evalset(g, t, eval_rng)) {
      step.metrics = score_evalset(embedding, *es);
    } else {
      step.skipped = true;
    }
    steps.push_back(step);
    if (k < horizon) inputs.push_back(binarize_prediction(embedding, rule, keep));
  }
  return steps;
}

}  // namespace tna
