#include "tna/model.hpp"

#include "tna/errors.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

namespace tna {

// ---- config ---------------------------------------------------------------------

ModelConfig ModelConfig::canonical() { return ModelConfig{}; }

ModelConfig ModelConfig::preset(const std::string& name) {
  std::string key;
  for (char c : name) key.push_back(c == '_' ? '/' : static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
  if (key == "TNA") key = "TTV/LN/SC";

  ModelConfig c;
  c.use_layer_norm = false;
  c.use_skip = false;
  if (key == "GGG") {
    c.layer_spec = "GGG";
    c.dims = {32, 16, 16};
  } else if (key == "GGV" || key == "TGV" || key == "TTV") {
    c.layer_spec = key;
  } else if (key == "TTV/LN") {
    c.layer_spec = "TTV";
    c.use_layer_norm = true;
  } else if (key == "TTV/LN/SC") {
    c.layer_spec = "TTV";
    c.use_layer_norm = true;
    c.use_skip = true;
  } else {
    throw ConfigError("unknown model preset '" + name + "'");
  }
  c.embedding_dim = c.dims.back();
  return c;
}

void ModelConfig::validate() const {
  if (layer_spec.empty()) throw ConfigError("layer_spec is empty");
  for (std::size_t i = 0; i < layer_spec.size(); ++i) {
    const char c = layer_spec[i];
    const bool last = i + 1 == layer_spec.size();
    if (c == 'V' && !last) throw ConfigError("layer_spec: V must be the final letter in '" + layer_spec + "'");
    if (c != 'G' && c != 'T' && c != 'V') {
      throw ConfigError(fmt::format("layer_spec: unknown layer '{}' in '{}'", c, layer_spec));
    }
  }
  if (layer_count() == 0) throw ConfigError("layer_spec needs at least one G or T layer");
  if (dims.size() != layer_count()) {
    throw ConfigError(fmt::format("dims has {} entries but layer_spec '{}' has {} layers", dims.size(), layer_spec,
                                  layer_count()));
  }
  if (std::find(dims.begin(), dims.end(), 0) != dims.end()) throw ConfigError("layer widths must be positive");
  if (variational() && embedding_dim != dims.back()) {
    throw ConfigError(fmt::format("embedding_dim {} must equal the last layer width {}", embedding_dim, dims.back()));
  }
  if (!(leaky_slope >= 0.0)) throw ConfigError("leaky_slope must be non-negative");
}

std::string ModelConfig::name() const {
  std::string n = layer_spec;
  if (use_layer_norm) n += "/LN";
  if (use_skip) n += "/SC";
  return n;
}

// ---- model ------------------------------------------------------------------------

std::vector<NamedParameter> Model::parameters() const {
  std::vector<NamedParameter> out;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const std::string prefix = fmt::format("layer{}", i);
    std::visit([&](const auto& layer) { layer.collect(prefix, out); }, layers[i]);
  }
  if (head_mu) head_mu->collect("head_mu", out);
  if (head_log_sigma) head_log_sigma->collect("head_log_sigma", out);
  return out;
}

Model build_model(const ModelConfig& config, std::size_t vertex_count, Rng& rng) {
  config.validate();
  if (vertex_count == 0) throw ConfigError("model needs at least one vertex");
  Model m;
  m.config = config;
  m.vertex_count = vertex_count;
  std::size_t d_in = vertex_count;
  for (std::size_t i = 0; i < config.layer_count(); ++i) {
    const std::size_t d_out = config.dims[i];
    if (config.layer_spec[i] == 'G') {
      m.layers.emplace_back(GcnLayer::init(d_in, d_out, rng));
    } else {
      m.layers.emplace_back(TnaBlock::init(d_in, d_out, config.use_layer_norm, config.use_skip, config.leaky_slope, rng));
    }
    d_in = d_out;
  }
  if (config.variational()) {
    m.head_mu = GcnLayer::init(d_in, config.embedding_dim, rng);
    m.head_log_sigma = GcnLayer::init(d_in, config.embedding_dim, rng);
  }
  return m;
}

std::size_t count_parameters(const Model& model) {
  std::size_t n = 0;
  for (const auto& p : model.parameters()) n += p.tensor.size();
  return n;
}

SequenceState SequenceState::zeros(const Model& model) {
  SequenceState s;
  s.hidden.resize(model.layers.size());
  return s;
}

StepOutput forward_step(const Model& model, const Snapshot& snapshot, SequenceState& state, bool sample, Rng* rng) {
  if (snapshot.vertex_count() != model.vertex_count) {
    throw ShapeError(fmt::format("forward: snapshot has {} vertices, model expects {}", snapshot.vertex_count(),
                                 model.vertex_count));
  }
  if (state.hidden.size() != model.layers.size()) state.hidden.resize(model.layers.size());
  const SparseMatrix& adj = snapshot.normalized_adjacency();

  Features h;  // identity at layer 0
  const std::size_t n_layers = model.layers.size();
  for (std::size_t i = 0; i < n_layers; ++i) {
    if (const auto* gcn = std::get_if<GcnLayer>(&model.layers[i])) {
      const bool linear_output = !model.config.variational() && i + 1 == n_layers;
      h = linear_output ? gcn_propagate(*gcn, adj, h) : gcn_forward(*gcn, adj, h);
    } else {
      const auto& block = std::get<TnaBlock>(model.layers[i]);
      Tensor& hidden = state.hidden[i];
      if (!hidden.defined()) hidden = Tensor::zeros(model.vertex_count, block.output_dim());
      BlockOutput out = tna_block_forward(block, adj, h, hidden);
      hidden = out.hidden;
      h = out.output;
    }
  }

  StepOutput step;
  if (!model.config.variational()) {
    step.mu = *h;
    step.z = *h;
    return step;
  }
  step.mu = gcn_propagate(*model.head_mu, adj, h);
  step.log_sigma = clamp(gcn_propagate(*model.head_log_sigma, adj, h), kLogSigmaMin, kLogSigmaMax);
  if (!sample) {
    step.z = step.mu;
    return step;
  }
  if (rng == nullptr) throw ContractError("forward: sampling requires a random generator");
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix eps(step.mu.value().rows(), step.mu.value().cols());
  for (Eigen::Index k = 0; k < eps.size(); ++k) eps.data()[k] = normal(*rng);
  step.z = add(step.mu, hadamard(Tensor::constant(std::move(eps)), exp(step.log_sigma)));
  return step;
}

std::vector<StepOutput> forward_sequence(const Model& model, std::span<const Snapshot> graphs, bool sample,
                                         Rng* rng) {
  if (graphs.empty()) throw ContractError("forward_sequence: no snapshots");
  SequenceState state = SequenceState::zeros(model);
  std::vector<StepOutput> out;
  out.reserve(graphs.size());
  for (const auto& g : graphs) out.push_back(forward_step(model, g, state, sample, rng));
  return out;
}

Matrix embed_last(const Model& model, std::span<const Snapshot> graphs) {
  if (graphs.empty()) throw ContractError("embed_last: no snapshots");
  SequenceState state = SequenceState::zeros(model);
  Matrix mu;
  for (const auto& g : graphs) mu = forward_step(model, g, state, false, nullptr).mu.value();
  return mu;
}

Tensor decode(const Tensor& z) { return sigmoid(matmul(z, transpose(z))); }

// ---- checkpoints ----------------------------------------------------------------

namespace {

std::string hex(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::hex);
  if (ec != std::errc()) throw StateError("checkpoint: cannot format value");
  return std::string(buf, ptr);
}

double parse_hex(const std::string& text) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v, std::chars_format::hex);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw ContractError("checkpoint: bad value '" + text + "'");
  }
  return v;
}

template <typename T>
T expect_field(std::istream& in, const std::string& key) {
  std::string k;
  T value{};
  if (!(in >> k) || k != key || !(in >> value)) throw ContractError("checkpoint: expected field '" + key + "'");
  return value;
}

}  // namespace

void save_checkpoint(std::ostream& out, const Model& model) {
  const ModelConfig& c = model.config;
  out << "tna-checkpoint 1\n";
  out << "layer_spec " << c.layer_spec << '\n';
  out << "layer_norm " << (c.use_layer_norm ? 1 : 0) << '\n';
  out << "skip " << (c.use_skip ? 1 : 0) << '\n';
  out << "dims " << c.dims.size();
  for (auto d : c.dims) out << ' ' << d;
  out << '\n';
  out << "embedding_dim " << c.embedding_dim << '\n';
  out << "leaky_slope " << hex(c.leaky_slope) << '\n';
  out << "vertices " << model.vertex_count << '\n';
  const auto params = model.parameters();
  out << "parameters " << params.size() << '\n';
  for (const auto& p : params) {
    const Matrix& v = p.tensor.value();
    out << "param " << p.name << ' ' << v.rows() << ' ' << v.cols() << '\n';
    for (Eigen::Index i = 0; i < v.rows(); ++i) {
      for (Eigen::Index j = 0; j < v.cols(); ++j) out << (j ? " " : "") << hex(v(i, j));
      out << '\n';
    }
  }
}

void save_checkpoint(const std::filesystem::path& path, const Model& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::ios_base::failure("cannot write " + path.string());
  save_checkpoint(out, model);
}

Model load_checkpoint(std::istream& in) {
  std::string magic;
  int version = 0;
  if (!(in >> magic >> version) || magic != "tna-checkpoint" || version != 1) {
    throw ContractError("checkpoint: not a version 1 checkpoint");
  }
  ModelConfig c;
  c.layer_spec = expect_field<std::string>(in, "layer_spec");
  c.use_layer_norm = expect_field<int>(in, "layer_norm") != 0;
  c.use_skip = expect_field<int>(in, "skip") != 0;
  const auto n_dims = expect_field<std::size_t>(in, "dims");
  c.dims.resize(n_dims);
  for (auto& d : c.dims) {
    if (!(in >> d)) throw ContractError("checkpoint: bad dims");
  }
  c.embedding_dim = expect_field<std::size_t>(in, "embedding_dim");
  c.leaky_slope = parse_hex(expect_field<std::string>(in, "leaky_slope"));
  const auto vertices = expect_field<std::size_t>(in, "vertices");
  const auto n_params = expect_field<std::size_t>(in, "parameters");

  Rng rng(0);
  Model model = build_model(c, vertices, rng);
  std::map<std::string, Tensor> by_name;
  for (auto& p : model.parameters()) by_name.emplace(p.name, p.tensor);
  if (by_name.size() != n_params) {
    throw ContractError(fmt::format("checkpoint: {} parameters stored, config implies {}", n_params, by_name.size()));
  }
  for (std::size_t k = 0; k < n_params; ++k) {
    std::string tag, name;
    Eigen::Index rows = 0, cols = 0;
    if (!(in >> tag >> name >> rows >> cols) || tag != "param") throw ContractError("checkpoint: bad parameter header");
    auto it = by_name.find(name);
    if (it == by_name.end()) throw ContractError("checkpoint: unknown parameter '" + name + "'");
    Matrix& v = it->second.mutable_value();
    if (v.rows() != rows || v.cols() != cols) {
      throw ShapeError(fmt::format("checkpoint: parameter {} is [{}x{}], model expects [{}x{}]", name, rows, cols,
                                   v.rows(), v.cols()));
    }
    std::string text;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      if (!(in >> text)) throw ContractError("checkpoint: truncated values for " + name);
      v.data()[i] = parse_hex(text);
    }
  }
  return model;
}

Model load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::ios_base::failure("cannot open " + path.string());
  return load_checkpoint(in);
}

}  // namespace tna
