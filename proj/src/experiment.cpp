#include "tna/experiment.hpp"

#include "tna/errors.hpp"

#include <fmt/format.h>
#include <json.hpp>

#include <cmath>
#include <cstdlib>
#include <fstream>

namespace tna {

RunMode parse_run_mode(const std::string& text) {
  if (text == "new-edges") return RunMode::kNewEdges;
  if (text == "full-graph") return RunMode::kFullGraph;
  if (text == "rollout") return RunMode::kRollout;
  throw ConfigError("unknown mode '" + text + "' (expected new-edges, full-graph or rollout)");
}

std::string to_string(RunMode mode) {
  switch (mode) {
    case RunMode::kNewEdges:
      return "new-edges";
    case RunMode::kFullGraph:
      return "full-graph";
    case RunMode::kRollout:
      return "rollout";
  }
  return "unknown";
}

std::size_t rollout_start(std::size_t length, double train_fraction) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw ConfigError("train_fraction must lie in (0, 1)");
  return std::max<std::size_t>(2, static_cast<std::size_t>(std::floor(train_fraction * static_cast<double>(length))));
}

void ExperimentConfig::validate(const TemporalGraph& g) const {
  model.validate();
  train.validate();
  if (workers < 1) throw ConfigError("workers must be at least 1");
  if (g.length() < 3) throw ConfigError(fmt::format("dataset has T={} snapshots; at least 3 are required", g.length()));
  if (mode == RunMode::kRollout) {
    const std::size_t start = rollout_start(g.length(), train_fraction);
    if (horizon < 1) throw ConfigError("horizon must be at least 1");
    if (start + horizon > g.length()) {
      throw ConfigError(fmt::format("rollout from t={} with horizon {} overruns T={}", start, horizon, g.length()));
    }
  } else {
    if (!(fraction > 0.0 && fraction <= 1.0)) throw ConfigError("fraction must lie in (0, 1]");
  }
  if (binarize.kind == Binarize::Kind::kThreshold && !(binarize.threshold >= 0.0 && binarize.threshold <= 1.0)) {
    throw ConfigError("binarize threshold must lie in [0, 1]");
  }
}

namespace {

std::string num(double v) { return fmt::format("{:.17g}", v); }

void write_text(const std::filesystem::path& path, const std::string& text, std::vector<std::filesystem::path>& written) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::ios_base::failure("cannot write " + path.string());
  out << text;
  if (!out) throw std::ios_base::failure("write failed: " + path.string());
  written.push_back(path);
}

std::string training_log(const std::vector<LossBreakdown>& history) {
  std::string s = "epoch,reconstruction,kl,l2,total\n";
  for (std::size_t e = 0; e < history.size(); ++e) {
    const auto& b = history[e];
    s += fmt::format("{},{},{},{},{}\n", e + 1, num(b.reconstruction), num(b.kl), num(b.l2), num(b.total));
  }
  return s;
}

nlohmann::ordered_json metrics_json(const ExperimentConfig& c, std::size_t t, const MetricsRecord& m) {
  nlohmann::ordered_json j;
  j["dataset"] = c.dataset;
  j["config"] = c.model.name();
  j["t"] = t;
  j["auc"] = m.auc;
  j["ap"] = m.ap;
  j["threshold_precision"] = m.threshold_precision;
  j["n_pos"] = m.n_pos;
  j["n_neg"] = m.n_neg;
  return j;
}

}  // namespace

ExperimentReport run_experiment(const TemporalGraph& g, const ExperimentConfig& config) {
  config.validate(g);
  ExperimentReport report;
  report.mode = config.mode;
  const bool write = !config.output_dir.empty();
  if (write) std::filesystem::create_directories(config.output_dir);

  nlohmann::ordered_json summary;
  summary["dataset"] = config.dataset;
  summary["config"] = config.model.name();
  summary["mode"] = to_string(config.mode);
  summary["seed"] = config.train.seed;
  summary["epochs"] = config.train.epochs;
  summary["learning_rate"] = config.train.learning_rate;
  summary["kl_scale"] = to_string(config.train.kl_scale);

  if (config.mode == RunMode::kRollout) {
    const std::size_t start = rollout_start(g.length(), config.train_fraction);
    report.rollout_start = start;
    TrainedModel trained = train_for_target(g, start + 1, config.model, config.train);
    report.parameter_count = count_parameters(trained.model);
    report.rollout_history = trained.history;
    report.rollout = rollout(trained.model, g, start, config.horizon, config.binarize, config.train.seed);

    summary["parameter_count"] = report.parameter_count;
    summary["train_until"] = start;
    summary["horizon"] = config.horizon;
    nlohmann::ordered_json steps = nlohmann::ordered_json::array();
    std::string csv = "step,t,auc,ap\n";
    for (std::size_t k = 0; k < report.rollout.size(); ++k) {
      const auto& s = report.rollout[k];
      if (s.skipped) {
        csv += fmt::format("{},{},nan,nan\n", k + 1, s.t);
        continue;
      }
      csv += fmt::format("{},{},{},{}\n", k + 1, s.t, num(s.metrics.auc), num(s.metrics.ap));
      auto j = metrics_json(config, s.t, s.metrics);
      j["step"] = k + 1;
      steps.push_back(j);
    }
    summary["steps"] = steps;
    if (write) {
      write_text(config.output_dir / "rollout.csv", csv, report.written);
      write_text(config.output_dir / fmt::format("train_t{}.csv", start + 1), training_log(report.rollout_history),
                 report.written);
      if (config.save_checkpoints) {
        const auto path = config.output_dir / fmt::format("checkpoint_t{}.ckpt", start + 1);
        save_checkpoint(path, trained.model);
        report.written.push_back(path);
      }
    }
  } else {
    HarnessOptions options;
    options.fraction = config.fraction;
    options.workers = config.workers;
    options.full_graph_cap = config.full_graph_cap;
    options.mode = config.mode == RunMode::kFullGraph ? EvalMode::kFullGraph : EvalMode::kNewEdges;
    if (write && config.save_checkpoints) {
      options.on_trained = [dir = config.output_dir](std::size_t t, const Model& model) {
        save_checkpoint(dir / fmt::format("checkpoint_t{}.ckpt", t), model);
      };
    }
    report.harness = rolling_harness(g, config.model, config.train, options);
    report.parameter_count = report.harness.parameter_count;

    std::string csv = "t,auc,ap\n";
    nlohmann::ordered_json per_t = nlohmann::ordered_json::array();
    for (const auto& r : report.harness.targets) {
      if (r.skipped) continue;
      csv += fmt::format("{},{},{}\n", r.t, num(r.metrics.auc), num(r.metrics.ap));
      per_t.push_back(metrics_json(config, r.t, r.metrics));
    }
    csv += fmt::format("mean,{},{}\n", num(report.harness.mean_auc), num(report.harness.mean_ap));
    summary["fraction"] = config.fraction;
    summary["parameter_count"] = report.parameter_count;
    summary["evaluated"] = report.harness.evaluated;
    summary["mean_auc"] = report.harness.mean_auc;
    summary["std_auc"] = report.harness.std_auc;
    summary["mean_ap"] = report.harness.mean_ap;
    summary["std_ap"] = report.harness.std_ap;
    summary["targets"] = per_t;
    if (write) {
      write_text(config.output_dir / "metrics.csv", csv, report.written);
      for (const auto& r : report.harness.targets) {
        if (r.skipped) continue;
        write_text(config.output_dir / fmt::format("train_t{}.csv", r.t), training_log(r.history), report.written);
      }
    }
  }
  if (write) write_text(config.output_dir / "summary.json", summary.dump(2) + "\n", report.written);
  return report;
}

const std::vector<DatasetSpec>& known_datasets() {
  static const std::vector<DatasetSpec> specs = [] {
    std::vector<DatasetSpec> v;
    // KONECT rows: source target weight unix-time.
    IngestOptions uci;
    uci.schema = {0, 1, 3};
    uci.granularity = Granularity::week();
    v.push_back({"uci", {"out.opsahl-ucsocial", "opsahl-ucsocial.txt", "uci.edges"}, uci});
    // SNAP rows: source,target,rating,unix-time.
    IngestOptions btc;
    btc.schema = {0, 1, 3};
    btc.granularity = Granularity::month();
    v.push_back({"bitcoina", {"soc-sign-bitcoinalpha.csv", "bitcoina.edges"}, btc});
    return v;
  }();
  return specs;
}

std::filesystem::path default_data_dir() {
  const char* env = std::getenv("TNA_DATA_DIR");
  return env != nullptr && *env != '\0' ? std::filesystem::path(env) : std::filesystem::path("data");
}

std::optional<TemporalGraph> load_named_dataset(const std::string& name, const std::filesystem::path& data_dir) {
  const auto ready = data_dir / (name + ".snapshots");
  if (std::filesystem::is_regular_file(ready)) return read_snapshots(ready);
  for (const auto& known : known_datasets()) {
    if (known.name != name) continue;
    for (const auto& file : known.files) {
      const auto raw = data_dir / file;
      if (std::filesystem::is_regular_file(raw)) return ingest_edge_list(raw, known.options);
    }
  }
  return std::nullopt;
}

}  // namespace tna
