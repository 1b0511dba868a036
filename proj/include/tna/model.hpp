#pragma once

#include "tna/graph.hpp"
#include "tna/layers.hpp"
#include "tna/tensor.hpp"

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace tna {

/// Architecture description in the ablation grammar: a sequence of G (GCN
/// layer) and T (TNA block) letters, optionally terminated by V (variational
/// sampling through two GCN heads).
struct ModelConfig {
  std::string layer_spec = "TTV";
  bool use_layer_norm = true;
  bool use_skip = true;
  std::vector<std::size_t> dims{32, 16};
  std::size_t embedding_dim = 16;
  double leaky_slope = kDefaultLeakySlope;

  /// TTV with layer norm and skip connections, widths 32/16.
  static ModelConfig canonical();
  /// Accepts "GGG", "GGV", "TGV", "TTV", "TTV/LN", "TTV/LN/SC" (also written
  /// with '_' separators, any case) and "tna" for the canonical model.
  static ModelConfig preset(const std::string& name);

  /// Throws ConfigError on inconsistent settings.
  void validate() const;
  bool variational() const { return !layer_spec.empty() && layer_spec.back() == 'V'; }
  std::size_t layer_count() const { return layer_spec.size() - (variational() ? 1 : 0); }
  /// e.g. "TTV/LN/SC".
  std::string name() const;
};

using ModelLayer = std::variant<GcnLayer, TnaBlock>;

struct Model {
  ModelConfig config;
  std::size_t vertex_count = 0;
  std::vector<ModelLayer> layers;
  std::optional<GcnLayer> head_mu;
  std::optional<GcnLayer> head_log_sigma;

  std::vector<NamedParameter> parameters() const;
};

Model build_model(const ModelConfig& config, std::size_t vertex_count, Rng& rng);

std::size_t count_parameters(const Model& model);

/// Recurrent hidden matrices, one per T layer. Undefined entries mean zeros.
struct SequenceState {
  std::vector<Tensor> hidden;

  static SequenceState zeros(const Model& model);
};

struct StepOutput {
  Tensor mu;
  Tensor log_sigma;  // undefined for non-variational configs
  Tensor z;
};

inline constexpr double kLogSigmaMin = -10.0;
inline constexpr double kLogSigmaMax = 10.0;

/// Encodes one snapshot, advancing the recurrent state.
StepOutput forward_step(const Model& model, const Snapshot& snapshot, SequenceState& state, bool sample, Rng* rng);

/// Encodes the snapshots in order from a zeroed state. With sample set,
/// Z = mu + eps * exp(log_sigma) with eps ~ N(0, 1) drawn from rng; otherwise
/// Z = mu.
std::vector<StepOutput> forward_sequence(const Model& model, std::span<const Snapshot> graphs, bool sample,
                                         Rng* rng);

/// Deterministic embedding (mu) of the last snapshot of the sequence.
Matrix embed_last(const Model& model, std::span<const Snapshot> graphs);

/// sigmoid(Z Z^T); dense, parameter-free.
Tensor decode(const Tensor& z);

// ---- checkpoints ----------------------------------------------------------------

/// Text container: config, vertex count and every parameter as hexfloat
/// values keyed by layer path. Round trips are bit-exact.
void save_checkpoint(std::ostream& out, const Model& model);
void save_checkpoint(const std::filesystem::path& path, const Model& model);
Model load_checkpoint(std::istream& in);
Model load_checkpoint(const std::filesystem::path& path);

}  // namespace tna
