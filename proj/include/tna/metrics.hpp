#pragma once

#include "tna/graph.hpp"
#include "tna/model.hpp"
#include "tna/random.hpp"

#include <optional>
#include <span>
#include <vector>

namespace tna {

struct EvalSet {
  std::vector<Edge> positives;
  std::vector<Edge> negatives;
};

struct MetricsRecord {
  double auc = 0.0;
  double ap = 0.0;
  double threshold_precision = 0.0;
  std::size_t n_pos = 0;
  std::size_t n_neg = 0;
};

/// Mann-Whitney estimate: share of (pos, neg) pairs with pos > neg, ties 1/2.
double auc(std::span<const double> pos, std::span<const double> neg);

struct PrecisionScores {
  double ap = 0.0;                   // ranking average precision
  double threshold_precision = 0.0;  // TP / (TP + FP) at score > threshold
};

inline constexpr double kDecisionThreshold = 0.5;

/// Ranking average precision over the descending-score order (ties keep input
/// order, positives before negatives) and the precision of the rule
/// score > threshold. With no predicted positives the precision is 0.
PrecisionScores average_precision(std::span<const double> pos, std::span<const double> neg,
                                  double threshold = kDecisionThreshold);

MetricsRecord compute_metrics(std::span<const double> pos, std::span<const double> neg);

// ---- evaluation sets -------------------------------------------------------------

/// n pairs drawn uniformly without replacement among non-self pairs absent
/// from `exclude`. Throws DegenerateInputError when fewer than n exist.
std::vector<Edge> sample_non_edges(const Snapshot& exclude, std::size_t n, Rng& rng);

/// Positives E_t \ E_{t-1}; an equal number of negatives absent from E_t and
/// E_{t-1}. Returns std::nullopt (skip) when G_t has no new edges.
std::optional<EvalSet> build_new_edge_evalset(const TemporalGraph& g, std::size_t t, Rng& rng);

inline constexpr std::size_t kFullGraphCap = 10000;

/// Balanced sample of up to `cap` edges of G_t and as many non-edges.
EvalSet build_full_graph_evalset(const TemporalGraph& g, std::size_t t, Rng& rng, std::size_t cap = kFullGraphCap);

/// sigmoid(z_i . z_j) per pair.
std::vector<double> pair_scores(const Matrix& embedding, std::span<const Edge> pairs);
MetricsRecord score_evalset(const Matrix& embedding, const EvalSet& es);

// ---- autoregressive rollout -----------------------------------------------------

struct Binarize {
  enum class Kind { kThreshold, kTopK };
  Kind kind = Kind::kThreshold;
  double threshold = kDecisionThreshold;

  static Binarize at_threshold(double tau) { return {Kind::kThreshold, tau}; }
  static Binarize top_k() { return {Kind::kTopK, kDecisionThreshold}; }
};

/// Turns decoded scores into a snapshot: pairs with sigmoid(z_i . z_j) > tau,
/// or the `k` highest-scoring pairs for top-k (ties to the lower pair index).
Snapshot binarize_prediction(const Matrix& embedding, const Binarize& rule, std::size_t k);

struct RolloutStep {
  std::size_t t = 0;  // true snapshot being predicted
  bool skipped = false;
  MetricsRecord metrics;
};

/// Starting from a model trained on G_1..G_{start_t}: predict G_{start_t+1}
/// from the mu of the last input, then repeatedly feed the binarized
/// prediction back as the next input. Step k scores the new edges of the true
/// G_{start_t+k}. Evaluation sets use derive_seed(seed, t, kEvalStream).
std::vector<RolloutStep> rollout(const Model& model, const TemporalGraph& g, std::size_t start_t, std::size_t horizon,
                                 const Binarize& rule, std::uint64_t seed);

}  // namespace tna
