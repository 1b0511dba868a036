#pragma once

#include "tna/graph.hpp"
#include "tna/metrics.hpp"
#include "tna/model.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace tna {

/// KL normalisation: 1/|V| (per vertex) or 1/|V|^2 (per adjacency entry,
/// the same scale as the reconstruction term).
enum class KlScale { kPerVertex, kPerPair };

KlScale parse_kl_scale(const std::string& text);
std::string to_string(KlScale scale);

struct TrainConfig {
  double learning_rate = 0.001;
  std::size_t epochs = 200;
  double l2_lambda = 1e-5;
  double rmsprop_decay = 0.99;
  double rmsprop_eps = 1e-8;
  std::uint64_t seed = 0;
  KlScale kl_scale = KlScale::kPerPair;

  void validate() const;
};

struct LossBreakdown {
  double reconstruction = 0.0;
  double kl = 0.0;
  double l2 = 0.0;
  double total = 0.0;
};

// ---- losses ---------------------------------------------------------------------

/// Positive-class weight (|V|^2 - n_pos) / n_pos of a target adjacency whose
/// diagonal counts as positive.
double positive_weight(const Snapshot& target);

/// Weighted binary cross-entropy of a dense probability matrix against the
/// target adjacency (diagonal set to 1), scaled by 1/|V|^2. The weight
/// defaults to positive_weight(target).
double reconstruction_loss(const Tensor& probabilities, const Snapshot& target,
                           std::optional<double> pos_weight = std::nullopt);

/// Same quantity as reconstruction_loss(decode(z), target) computed from the
/// logits z_i . z_j in row blocks, differentiable with respect to z. Never
/// materializes the |V| x |V| matrix.
Tensor reconstruction_loss_from_embedding(const Tensor& z, const Snapshot& target,
                                          std::optional<double> pos_weight = std::nullopt);

/// (1/|V|) sum 1/2 (mu^2 + sigma^2 - 1 - log sigma^2).
Tensor kl_loss(const Tensor& mu, const Tensor& log_sigma);

/// lambda * sum of squares of every parameter element.
Tensor l2_loss(std::span<const NamedParameter> parameters, double lambda);

// ---- optimizer ------------------------------------------------------------------

/// s <- rho s + (1 - rho) g^2;  theta <- theta - lr g / (sqrt(s) + eps)
class RmsProp {
 public:
  RmsProp(std::vector<NamedParameter> parameters, double learning_rate, double decay, double eps);

  /// Throws StateError if any parameter lacks a gradient.
  void step();
  void zero_grad();

 private:
  std::vector<NamedParameter> params_;
  std::vector<Matrix> square_avg_;
  double lr_;
  double decay_;
  double eps_;
};

// ---- training -------------------------------------------------------------------

/// Builds the summed sequence objective for one forward pass over graphs:
/// step s decodes Z_s against graphs[s + 1].
struct SequenceObjective {
  Tensor total;
  LossBreakdown breakdown;
};
SequenceObjective sequence_objective(const Model& model, std::span<const Snapshot> graphs, double l2_lambda,
                                     bool sample, Rng* rng, KlScale kl_scale = KlScale::kPerPair);

using EpochCallback = std::function<void(std::size_t epoch, const LossBreakdown&)>;

struct TrainResult {
  std::vector<LossBreakdown> history;  // one entry per epoch
};

/// Full-batch training on G_1..G_{n} (n >= 2): every epoch resets the
/// recurrent state, encodes G_1..G_{n-1}, sums the per-step objectives and
/// applies one RMSProp update.
TrainResult train_on_sequence(Model& model, std::span<const Snapshot> graphs, const TrainConfig& config,
                              const EpochCallback& on_epoch = {});

// ---- rolling evaluation ---------------------------------------------------------

enum class EvalMode { kNewEdges, kFullGraph };

struct HarnessOptions {
  double fraction = 1.0;     // leading share of the target list to evaluate
  std::size_t workers = 1;
  std::size_t full_graph_cap = 10000;
  EvalMode mode = EvalMode::kNewEdges;
  /// Restricts evaluation to these targets when non-empty (order irrelevant).
  std::vector<std::size_t> targets;
  /// Called with every trained model (from worker threads when workers > 1).
  std::function<void(std::size_t t, const Model& model)> on_trained;
};

struct TargetResult {
  std::size_t t = 0;
  bool skipped = false;  // no new edges in G_t
  MetricsRecord metrics;
  std::size_t parameter_count = 0;
  std::vector<LossBreakdown> history;
};

struct HarnessSummary {
  std::vector<TargetResult> targets;  // ascending t
  double mean_auc = 0.0;
  double std_auc = 0.0;
  double mean_ap = 0.0;
  double std_ap = 0.0;
  std::size_t evaluated = 0;
  std::size_t parameter_count = 0;
};

/// Targets t = 3..T in order, truncated to ceil(fraction * count).
std::vector<std::size_t> harness_targets(std::size_t length, double fraction);

struct TrainedModel {
  Model model;
  std::vector<LossBreakdown> history;
};

/// Fresh model for target t, trained on G_1..G_{t-1} with seeds derived from
/// (train_config.seed, t).
TrainedModel train_for_target(const TemporalGraph& g, std::size_t t, const ModelConfig& model_config,
                              const TrainConfig& train_config);

/// Trains and evaluates a single target: fresh model, training on
/// G_1..G_{t-1}, scoring of G_t from the mu of G_{t-1}.
TargetResult evaluate_target(const TemporalGraph& g, std::size_t t, const ModelConfig& model_config,
                             const TrainConfig& train_config, const HarnessOptions& options);

/// For every target t >= 3 trains a fresh model on G_1..G_{t-1} and scores G_t.
/// Mean and (population) standard deviation are over non-skipped targets.
HarnessSummary rolling_harness(const TemporalGraph& g, const ModelConfig& model_config,
                                  const TrainConfig& train_config, const HarnessOptions& options = {});

}  // namespace tna
