#include "tna/training.hpp"

#include "tna/errors.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

namespace tna {

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
  if (!(l2_lambda >= 0.0)) throw ConfigError("l2_lambda must be non-negative");
  if (!(rmsprop_decay >= 0.0 && rmsprop_decay < 1.0)) throw ConfigError("rmsprop_decay must lie in [0, 1)");
  if (!(rmsprop_eps > 0.0)) throw ConfigError("rmsprop_eps must be positive");
}

// ---- losses ---------------------------------------------------------------------

namespace {

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }
double logistic(double x) {
  const double e = std::exp(-std::abs(x));
  return x >= 0.0 ? 1.0 / (1.0 + e) : e / (1.0 + e);
}

std::size_t positive_count(const Snapshot& target) { return 2 * target.edge_count() + target.vertex_count(); }

}  // namespace

double positive_weight(const Snapshot& target) {
  const double n = static_cast<double>(target.vertex_count());
  const auto n_pos = positive_count(target);
  if (n_pos == 0) throw DegenerateInputError("reconstruction: target has no positive entries");
  return (n * n - static_cast<double>(n_pos)) / static_cast<double>(n_pos);
}

double reconstruction_loss(const Tensor& probabilities, const Snapshot& target, std::optional<double> pos_weight) {
  const std::size_t n = target.vertex_count();
  if (probabilities.rows() != n || probabilities.cols() != n) {
    throw ShapeError(fmt::format("reconstruction_loss: probabilities {} vs {} vertices", probabilities.shape_string(), n));
  }
  const double w = pos_weight.value_or(positive_weight(target));
  const Matrix& p = probabilities.value();
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const auto pij = p(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      const bool positive = i == j || target.has_edge(static_cast<Vertex>(i), static_cast<Vertex>(j));
      total += positive ? -w * std::log(pij) : -std::log1p(-pij);
    }
  }
  return total / static_cast<double>(n * n);
}

Tensor reconstruction_loss_from_embedding(const Tensor& z, const Snapshot& target, std::optional<double> pos_weight) {
  const std::size_t n = target.vertex_count();
  if (z.rows() != n) {
    throw ShapeError(fmt::format("reconstruction_loss: embedding {} vs {} vertices", z.shape_string(), n));
  }
  const double w = pos_weight.value_or(positive_weight(target));
  const Matrix& zv = z.value();
  const Eigen::Index rows = zv.rows();
  Matrix dz = Matrix::Zero(rows, zv.cols());

  // Dense part: every entry as a negative, softplus(x), derivative sigmoid(x).
  // Only blocks on or above the diagonal are formed; the logits are symmetric.
  using Block = Eigen::Array<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  constexpr Eigen::Index kBlock = 128;
  double dense = 0.0;
  Matrix logits;
  Block e;
  Block u;
  Matrix sig;
  for (Eigen::Index i0 = 0; i0 < rows; i0 += kBlock) {
    const Eigen::Index bi = std::min(kBlock, rows - i0);
    const auto zi = zv.middleRows(i0, bi);
    for (Eigen::Index j0 = i0; j0 < rows; j0 += kBlock) {
      const Eigen::Index bj = std::min(kBlock, rows - j0);
      const auto zj = zv.middleRows(j0, bj);
      logits.noalias() = zi * zj.transpose();
      const auto x = logits.array();
      e = (-x.abs()).exp();
      u = 1.0 + e;
      // log1p(e) from the vectorized log with one correction term.
      const double block_sum = (x.max(0.0) + u.log() - ((u - 1.0) - e) / u).sum();
      dense += (i0 == j0 ? 1.0 : 2.0) * block_sum;
      sig = ((x >= 0.0).select(Block::Ones(bi, bj), e) / u).matrix();
      dz.middleRows(i0, bi).noalias() += sig * zj;
      if (j0 != i0) dz.middleRows(j0, bj).noalias() += sig.transpose() * zi;
    }
  }

  // Positive entries: replace softplus(x) by w * softplus(-x).
  double positive = 0.0;
  auto correct = [&](Eigen::Index i, Eigen::Index j, double multiplicity) {
    const double x = zv.row(i).dot(zv.row(j));
    const double s = logistic(x);
    positive += multiplicity * ((w - 1.0) * softplus(-x) - x);
    const double g = -w * (1.0 - s) - s;
    if (i == j) {
      dz.row(i) += g * zv.row(i);
    } else {
      dz.row(i) += g * zv.row(j);
      dz.row(j) += g * zv.row(i);
    }
  };
  for (Eigen::Index i = 0; i < rows; ++i) correct(i, i, 1.0);
  for (const Edge& edge : target.edges()) correct(edge.u, edge.v, 2.0);

  const double norm = 1.0 / (static_cast<double>(n) * static_cast<double>(n));
  dz *= 2.0 * norm;
  Matrix value(1, 1);
  value(0, 0) = (dense + positive) * norm;
  return make_result(std::move(value), {z}, [z, dz = std::move(dz)](const Matrix& g) { accumulate_grad(z, dz * g(0, 0)); });
}

Tensor kl_loss(const Tensor& mu, const Tensor& log_sigma) {
  if (mu.rows() != log_sigma.rows() || mu.cols() != log_sigma.cols()) {
    throw ShapeError(fmt::format("kl_loss: mu {} vs log_sigma {}", mu.shape_string(), log_sigma.shape_string()));
  }
  const double n = static_cast<double>(mu.rows());
  const double count = static_cast<double>(mu.size());
  // sum(mu^2) + sum(exp(2 log_sigma)) - count - 2 sum(log_sigma)
  Tensor variance_sum = sum(exp(scale(log_sigma, 2.0)));
  Tensor log_variance_sum = scale(sum(log_sigma), 2.0);
  Tensor inner = add_scalar(sub(add(sum_squares(mu), variance_sum), log_variance_sum), -count);
  return scale(inner, 0.5 / n);
}

Tensor l2_loss(std::span<const NamedParameter> parameters, double lambda) {
  Tensor total = Tensor::zeros(1, 1);
  for (const auto& p : parameters) total = add(total, sum_squares(p.tensor));
  return scale(total, lambda);
}

// ---- optimizer ------------------------------------------------------------------

RmsProp::RmsProp(std::vector<NamedParameter> parameters, double learning_rate, double decay, double eps)
    : params_(std::move(parameters)), lr_(learning_rate), decay_(decay), eps_(eps) {
  square_avg_.reserve(params_.size());
  for (const auto& p : params_) square_avg_.push_back(Matrix::Zero(p.tensor.value().rows(), p.tensor.value().cols()));
}

void RmsProp::step() {
  for (const auto& p : params_) {
    if (!p.tensor.has_grad()) throw StateError("rmsprop: parameter '" + p.name + "' has no gradient");
  }
  for (std::size_t k = 0; k < params_.size(); ++k) {
    Tensor& t = params_[k].tensor;
    const auto g = t.grad().array();
    auto s = square_avg_[k].array();
    s = decay_ * s + (1.0 - decay_) * g.square();
    t.mutable_value().array() -= lr_ * g / (s.sqrt() + eps_);
  }
}

void RmsProp::zero_grad() {
  for (auto& p : params_) p.tensor.zero_grad();
}

// ---- training -------------------------------------------------------------------

KlScale parse_kl_scale(const std::string& text) {
  if (text == "per-vertex" || text == "per_vertex") return KlScale::kPerVertex;
  if (text == "per-pair" || text == "per_pair") return KlScale::kPerPair;
  throw ConfigError("unknown kl scale '" + text + "' (expected per-vertex or per-pair)");
}

std::string to_string(KlScale scale) { return scale == KlScale::kPerVertex ? "per-vertex" : "per-pair"; }

SequenceObjective sequence_objective(const Model& model, std::span<const Snapshot> graphs, double l2_lambda,
                                     bool sample, Rng* rng, KlScale kl_scale) {
  if (graphs.size() < 2) throw ContractError("training needs at least 2 snapshots");
  const auto steps = forward_sequence(model, graphs.first(graphs.size() - 1), sample, rng);

  Tensor recon = Tensor::zeros(1, 1);
  Tensor kl = Tensor::zeros(1, 1);
  for (std::size_t s = 0; s < steps.size(); ++s) {
    recon = add(recon, reconstruction_loss_from_embedding(steps[s].z, graphs[s + 1]));
    if (steps[s].log_sigma.defined()) kl = add(kl, kl_loss(steps[s].mu, steps[s].log_sigma));
  }
  if (kl_scale == KlScale::kPerPair) kl = scale(kl, 1.0 / static_cast<double>(model.vertex_count));
  const auto params = model.parameters();
  Tensor l2 = l2_loss(params, l2_lambda);

  SequenceObjective out;
  out.total = add(add(recon, kl), l2);
  out.breakdown = {recon.item(), kl.item(), l2.item(), out.total.item()};
  return out;
}

TrainResult train_on_sequence(Model& model, std::span<const Snapshot> graphs, const TrainConfig& config,
                              const EpochCallback& on_epoch) {
  config.validate();
  if (graphs.size() < 2) throw ContractError(fmt::format("training needs at least 2 snapshots, got {}", graphs.size()));
  RmsProp optimizer(model.parameters(), config.learning_rate, config.rmsprop_decay, config.rmsprop_eps);
  Rng rng(config.seed);
  TrainResult result;
  result.history.reserve(config.epochs);
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    optimizer.zero_grad();
    SequenceObjective objective = sequence_objective(model, graphs, config.l2_lambda, true, &rng, config.kl_scale);
    backward(objective.total);
    optimizer.step();
    result.history.push_back(objective.breakdown);
    if (on_epoch) on_epoch(epoch, objective.breakdown);
  }
  optimizer.zero_grad();
  return result;
}

// ---- rolling evaluation ---------------------------------------------------------

std::vector<std::size_t> harness_targets(std::size_t length, double fraction) {
  if (length < 3) throw ContractError(fmt::format("rolling evaluation needs T >= 3, got {}", length));
  if (!(fraction > 0.0 && fraction <= 1.0)) throw ConfigError("fraction must lie in (0, 1]");
  const std::size_t all = length - 2;
  const auto keep = std::clamp<std::size_t>(static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(all) - 1e-9)),
                                            1, all);
  std::vector<std::size_t> out;
  for (std::size_t t = 3; t < 3 + keep; ++t) out.push_back(t);
  return out;
}

TrainedModel train_for_target(const TemporalGraph& g, std::size_t t, const ModelConfig& model_config,
                              const TrainConfig& train_config) {
  if (t < 2 || t > g.length()) throw ContractError(fmt::format("target t={} outside 2..{}", t, g.length()));
  Rng model_rng(derive_seed(train_config.seed, t, kModelStream));
  TrainedModel out{build_model(model_config, g.vertex_count(), model_rng), {}};
  TrainConfig tc = train_config;
  tc.seed = derive_seed(train_config.seed, t, kTrainStream);
  out.history = train_on_sequence(out.model, std::span(g.snapshots()).first(t - 1), tc).history;
  return out;
}

TargetResult evaluate_target(const TemporalGraph& g, std::size_t t, const ModelConfig& model_config,
                             const TrainConfig& train_config, const HarnessOptions& options) {
  TargetResult r;
  r.t = t;
  Rng eval_rng(derive_seed(train_config.seed, t, kEvalStream));
  std::optional<EvalSet> es;
  if (options.mode == EvalMode::kNewEdges) {
    es = build_new_edge_evalset(g, t, eval_rng);
    if (!es) {
      r.skipped = true;
      return r;
    }
  } else {
    es = build_full_graph_evalset(g, t, eval_rng, options.full_graph_cap);
  }
  TrainedModel trained = train_for_target(g, t, model_config, train_config);
  r.parameter_count = count_parameters(trained.model);
  if (options.on_trained) options.on_trained(t, trained.model);
  r.history = std::move(trained.history);
  const Matrix embedding = embed_last(trained.model, std::span(g.snapshots()).first(t - 1));
  r.metrics = score_evalset(embedding, *es);
  return r;
}

HarnessSummary rolling_harness(const TemporalGraph& g, const ModelConfig& model_config,
                                  const TrainConfig& train_config, const HarnessOptions& options) {
  model_config.validate();
  train_config.validate();
  std::vector<std::size_t> targets = options.targets;
  if (targets.empty()) {
    targets = harness_targets(g.length(), options.fraction);
  } else {
    std::sort(targets.begin(), targets.end());
    targets.erase(std::unique(targets.begin(), targets.end()), targets.end());
    for (auto t : targets) {
      if (t < 3 || t > g.length()) throw ContractError(fmt::format("target t={} outside 3..{}", t, g.length()));
    }
  }

  HarnessSummary summary;
  summary.targets.resize(targets.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&]() {
    for (std::size_t k = next++; k < targets.size(); k = next++) {
      try {
        summary.targets[k] = evaluate_target(g, targets[k], model_config, train_config, options);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const std::size_t workers = std::clamp<std::size_t>(options.workers, 1, targets.size());
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);

  std::vector<double> aucs, aps;
  for (const auto& r : summary.targets) {
    if (r.skipped) continue;
    aucs.push_back(r.metrics.auc);
    aps.push_back(r.metrics.ap);
    summary.parameter_count = r.parameter_count;
  }
  auto mean_std = [](const std::vector<double>& v) {
    if (v.empty()) return std::pair{0.0, 0.0};
    double m = 0.0;
    for (double x : v) m += x;
    m /= static_cast<double>(v.size());
    double var = 0.0;
    for (double x : v) var += (x - m) * (x - m);
    return std::pair{m, std::sqrt(var / static_cast<double>(v.size()))};
  };
  std::tie(summary.mean_auc, summary.std_auc) = mean_std(aucs);
  std::tie(summary.mean_ap, summary.std_ap) = mean_std(aps);
  summary.evaluated = aucs.size();
  if (summary.parameter_count == 0) {
    Rng rng(0);
    summary.parameter_count = count_parameters(build_model(model_config, g.vertex_count(), rng));
  }
  return summary;
}

}  // namespace tna
