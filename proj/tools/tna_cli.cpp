// tna: ingest temporal edge lists, generate synthetic sequences, and run
// new-edge, full-graph and rollout experiments.
//
// Exit codes: 0 success, 1 runtime failure, 2 usage or validation error.

#include "tna/errors.hpp"
#include "tna/experiment.hpp"
#include "tna/synthetic.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>

namespace {

using namespace tna;

constexpr int kRuntimeFailure = 1;
constexpr int kUsageError = 2;

/// Raised for problems found before any work starts.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::filesystem::path default_output_dir() {
  const char* env = std::getenv("TNA_OUTPUT_DIR");
  return env != nullptr && *env != '\0' ? std::filesystem::path(env) : std::filesystem::path("tna-out");
}

void print_graph_summary(const TemporalGraph& g) {
  std::cout << fmt::format("|V|={} T={} granularity={}\n", g.vertex_count(), g.length(), g.granularity_label());
  std::cout << "t,edges,new_edges\n";
  for (std::size_t t = 1; t <= g.length(); ++t) {
    const std::size_t fresh = t == 1 ? g.at(1).edge_count() : new_edges(g, t).size();
    std::cout << fmt::format("{},{},{}\n", t, g.at(t).edge_count(), fresh);
  }
}

// ---- ingest -----------------------------------------------------------------------

struct IngestArgs {
  std::string input;
  std::string output;
  std::string granularity = "month";
  std::vector<std::size_t> columns{0, 1, 2};
  std::size_t min_snapshots = 3;
};

int cmd_ingest(const IngestArgs& a) {
  if (!std::filesystem::is_regular_file(a.input)) throw UsageError("input file not found: " + a.input);
  if (a.columns.size() != 3) throw UsageError("--columns takes source,target,timestamp indices");
  IngestOptions opt;
  opt.schema = {a.columns[0], a.columns[1], a.columns[2]};
  opt.granularity = Granularity::parse(a.granularity);
  opt.min_snapshots = a.min_snapshots;
  const TemporalGraph g = ingest_edge_list(std::filesystem::path(a.input), opt);
  write_snapshots(std::filesystem::path(a.output), g);
  print_graph_summary(g);
  std::cout << "wrote " << a.output << '\n';
  return 0;
}

// ---- synth ------------------------------------------------------------------------

int cmd_synth_sbm(const SbmConfig& c, const std::string& output) {
  const SbmSequence s = generate_sbm(c);
  write_snapshots(std::filesystem::path(output), s.graph);
  std::cout << fmt::format("sbm |V|={} T={} communities={} migrators={}\n", c.vertex_count, c.snapshots,
                           c.communities, c.migrators_per_step);
  std::cout << "wrote " << output << '\n';
  return 0;
}

struct RewireArgs {
  std::string seed_graph;
  std::size_t stand_in_vertices = 2000;
  RewireConfig config;
  std::string output;
};

int cmd_synth_rewire(RewireArgs a) {
  if (!a.seed_graph.empty()) {
    if (!std::filesystem::is_regular_file(a.seed_graph)) throw UsageError("seed graph not found: " + a.seed_graph);
    a.config.source = read_static_edge_list(a.seed_graph);
  } else {
    // Stand-in source graph: one SBM draw.
    SbmConfig s;
    s.vertex_count = a.stand_in_vertices;
    s.snapshots = 1;
    s.seed = a.config.seed;
    a.config.source = generate_sbm(s).graph.at(1);
  }
  const TemporalGraph g = generate_rewire(a.config);
  write_snapshots(std::filesystem::path(a.output), g);
  std::cout << fmt::format("rewire |V|={} |E|={} T={} per_step={}\n", g.vertex_count(), g.at(1).edge_count(),
                           g.length(), a.config.edges_rewired_per_step);
  std::cout << "wrote " << a.output << '\n';
  return 0;
}

// ---- run --------------------------------------------------------------------------

struct RunArgs {
  std::string preset = "tna";
  std::string dataset;
  std::string mode = "new-edges";
  double fraction = 1.0;
  double train_fraction = 0.7;
  std::size_t horizon = 5;
  std::string binarize = "threshold:0.5";
  std::size_t workers = 1;
  std::uint64_t seed = 0;
  std::size_t epochs = 200;
  double learning_rate = 0.001;
  double l2_lambda = 1e-5;
  std::string kl_scale = "per-pair";
  std::string output;
  bool checkpoints = false;
  std::string data_dir;
};

Binarize parse_binarize(const std::string& text) {
  if (text == "topk" || text == "top-k") return Binarize::top_k();
  if (text.rfind("threshold:", 0) == 0) {
    try {
      return Binarize::at_threshold(std::stod(text.substr(10)));
    } catch (const std::exception&) {
    }
  }
  throw UsageError("--binarize expects threshold:<tau> or topk, got '" + text + "'");
}

/// Config-file values; only keys present in the file override the defaults.
void apply_config_file(const std::string& path, RunArgs& a) {
  std::ifstream in(path);
  if (!in) throw UsageError("config file not found: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw UsageError(fmt::format("config file {}: {}", path, e.what()));
  }
  if (!j.is_object()) throw UsageError("config file must hold a JSON object");
  for (const auto& [key, value] : j.items()) {
    try {
      if (key == "config" || key == "ablation" || key == "model") a.preset = value.get<std::string>();
      else if (key == "dataset") a.dataset = value.get<std::string>();
      else if (key == "mode") a.mode = value.get<std::string>();
      else if (key == "fraction") a.fraction = value.get<double>();
      else if (key == "train_fraction") a.train_fraction = value.get<double>();
      else if (key == "horizon") a.horizon = value.get<std::size_t>();
      else if (key == "binarize") a.binarize = value.get<std::string>();
      else if (key == "workers") a.workers = value.get<std::size_t>();
      else if (key == "seed") a.seed = value.get<std::uint64_t>();
      else if (key == "epochs") a.epochs = value.get<std::size_t>();
      else if (key == "learning_rate") a.learning_rate = value.get<double>();
      else if (key == "l2_lambda") a.l2_lambda = value.get<double>();
      else if (key == "kl_scale") a.kl_scale = value.get<std::string>();
      else if (key == "output") a.output = value.get<std::string>();
      else if (key == "checkpoints") a.checkpoints = value.get<bool>();
      else if (key == "data_dir") a.data_dir = value.get<std::string>();
      else throw UsageError("config file: unknown key '" + key + "'");
    } catch (const nlohmann::json::exception&) {
      throw UsageError("config file: wrong type for '" + key + "'");
    }
  }
}

TemporalGraph resolve_dataset(const RunArgs& a) {
  if (a.dataset.empty()) throw UsageError("--dataset is required");
  if (std::filesystem::is_regular_file(a.dataset)) return read_snapshots(std::filesystem::path(a.dataset));
  if (a.dataset == "sbm") {
    SbmConfig c;
    c.seed = a.seed;
    return generate_sbm(c).graph;
  }
  const auto dir = a.data_dir.empty() ? default_data_dir() : std::filesystem::path(a.data_dir);
  if (auto g = load_named_dataset(a.dataset, dir)) return *g;
  throw UsageError(fmt::format("dataset '{}' is neither a snapshot file nor available in {}", a.dataset, dir.string()));
}

std::string dataset_label(const std::string& dataset) {
  const std::filesystem::path p(dataset);
  return std::filesystem::is_regular_file(p) ? p.stem().string() : dataset;
}

int cmd_run(const RunArgs& a) {
  ExperimentConfig c;
  try {
    c.model = ModelConfig::preset(a.preset);
    c.mode = parse_run_mode(a.mode);
    c.train.kl_scale = parse_kl_scale(a.kl_scale);
  } catch (const ConfigError& e) {
    throw UsageError(e.what());
  }
  c.train.epochs = a.epochs;
  c.train.learning_rate = a.learning_rate;
  c.train.l2_lambda = a.l2_lambda;
  c.train.seed = a.seed;
  c.fraction = a.fraction;
  c.train_fraction = a.train_fraction;
  c.horizon = a.horizon;
  c.binarize = parse_binarize(a.binarize);
  c.workers = a.workers;
  c.dataset = dataset_label(a.dataset);
  c.output_dir = a.output.empty() ? default_output_dir() : std::filesystem::path(a.output);
  c.save_checkpoints = a.checkpoints;

  const TemporalGraph g = resolve_dataset(a);
  try {
    c.validate(g);
  } catch (const ConfigError& e) {
    throw UsageError(e.what());
  }

  std::cout << fmt::format("dataset={} |V|={} T={} config={} mode={} seed={}\n", c.dataset, g.vertex_count(),
                           g.length(), c.model.name(), to_string(c.mode), c.train.seed);
  const ExperimentReport r = run_experiment(g, c);
  std::cout << fmt::format("parameters={}\n", r.parameter_count);
  if (c.mode == RunMode::kRollout) {
    std::cout << fmt::format("trained on G_1..G_{}\n", r.rollout_start);
    for (std::size_t k = 0; k < r.rollout.size(); ++k) {
      const auto& s = r.rollout[k];
      if (s.skipped) {
        std::cout << fmt::format("step {} t={} skipped (no new edges)\n", k + 1, s.t);
      } else {
        std::cout << fmt::format("step {} t={} auc={:.4f} ap={:.4f}\n", k + 1, s.t, s.metrics.auc, s.metrics.ap);
      }
    }
  } else {
    const auto& h = r.harness;
    for (const auto& t : h.targets) {
      if (t.skipped) std::cout << fmt::format("t={} skipped (no new edges)\n", t.t);
    }
    std::cout << fmt::format("targets={} auc={:.3f}+-{:.3f} ap={:.3f}+-{:.3f}\n", h.evaluated, h.mean_auc,
                             h.std_auc, h.mean_ap, h.std_ap);
  }
  std::cout << "wrote " << c.output_dir.string() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Temporal neighbourhood aggregation for dynamic link prediction"};
  app.require_subcommand(1);

  IngestArgs ingest;
  auto* ing = app.add_subcommand("ingest", "Cut a timestamped edge list into cumulative snapshots");
  ing->add_option("input", ingest.input, "Delimited edge list (source, target, unix time)")->required();
  ing->add_option("-o,--output", ingest.output, "Snapshot file to write")->required();
  ing->add_option("-g,--granularity", ingest.granularity, "week, month or count:<n>")->capture_default_str();
  ing->add_option("--columns", ingest.columns, "Source, target and timestamp column indices")
      ->delimiter(',')
      ->expected(3);
  ing->add_option("--min-snapshots", ingest.min_snapshots, "Fewest non-empty snapshots accepted")
      ->capture_default_str();

  auto* synth = app.add_subcommand("synth", "Generate a synthetic snapshot sequence");
  synth->require_subcommand(1);
  SbmConfig sbm;
  std::string sbm_out;
  auto* sb = synth->add_subcommand("sbm", "Evolving stochastic block model");
  sb->add_option("--n", sbm.vertex_count, "Vertices")->capture_default_str();
  sb->add_option("--k", sbm.communities, "Communities")->capture_default_str();
  sb->add_option("--t", sbm.snapshots, "Snapshots")->capture_default_str();
  sb->add_option("--migrators", sbm.migrators_per_step, "Vertices switching community per step")->capture_default_str();
  sb->add_option("--p-intra", sbm.p_intra, "Edge probability inside a community")->capture_default_str();
  sb->add_option("--p-inter", sbm.p_inter, "Edge probability across communities")->capture_default_str();
  sb->add_option("--seed", sbm.seed, "Random seed")->capture_default_str();
  sb->add_option("-o,--output", sbm_out, "Snapshot file to write")->required();

  RewireArgs rewire;
  auto* rw = synth->add_subcommand("rewire", "Erdos rewiring of a source graph");
  rw->add_option("--seed-graph", rewire.seed_graph, "Static 'i j' edge list; default is a stand-in SBM draw");
  rw->add_option("--stand-in-n", rewire.stand_in_vertices, "Vertices of the stand-in source graph")
      ->capture_default_str();
  rw->add_option("--t", rewire.config.snapshots, "Snapshots")->capture_default_str();
  rw->add_option("--per-step", rewire.config.edges_rewired_per_step, "Edges rewired per step")->capture_default_str();
  rw->add_option("--seed", rewire.config.seed, "Random seed")->capture_default_str();
  rw->add_option("-o,--output", rewire.output, "Snapshot file to write")->required();

  RunArgs run;
  std::string config_file;
  auto* rn = app.add_subcommand("run", "Train and evaluate");
  auto* preset = rn->add_option("--config", run.preset, "Model preset: tna, ttv_ln_sc, ttv_ln, ttv, tgv, ggv, ggg");
  auto* ablation = rn->add_option("--ablation", run.preset, "Same as --config, in ablation notation (e.g. GGG)");
  preset->excludes(ablation);
  std::vector<CLI::Option*> flags{
      preset,
      ablation,
      rn->add_option("--dataset", run.dataset, "Snapshot file, 'sbm', or a dataset name looked up in the data dir"),
      rn->add_option("--mode", run.mode, "new-edges, full-graph or rollout"),
      rn->add_option("--fraction", run.fraction, "Leading share of targets to evaluate"),
      rn->add_option("--train-fraction", run.train_fraction, "Rollout history share"),
      rn->add_option("--horizon", run.horizon, "Rollout steps"),
      rn->add_option("--binarize", run.binarize, "Rollout feedback rule: threshold:<tau> or topk"),
      rn->add_option("--workers", run.workers, "Parallel target trainings"),
      rn->add_option("--seed", run.seed, "Random seed"),
      rn->add_option("--epochs", run.epochs, "Training epochs per model"),
      rn->add_option("--lr", run.learning_rate, "RMSProp learning rate"),
      rn->add_option("--l2", run.l2_lambda, "L2 regularization scale"),
      rn->add_option("--kl-scale", run.kl_scale, "KL normalisation: per-pair (1/|V|^2) or per-vertex (1/|V|)"),
      rn->add_option("-o,--output", run.output, "Output directory (default $TNA_OUTPUT_DIR or ./tna-out)"),
      rn->add_flag("--checkpoints", run.checkpoints, "Save every trained model"),
      rn->add_option("--data-dir", run.data_dir, "Raw dataset directory (default $TNA_DATA_DIR or ./data)"),
  };
  rn->add_option("--config-file", config_file, "JSON file of run settings; flags take precedence");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kUsageError;
  }

  try {
    if (ing->parsed()) return cmd_ingest(ingest);
    if (sb->parsed()) return cmd_synth_sbm(sbm, sbm_out);
    if (rw->parsed()) return cmd_synth_rewire(rewire);
    if (rn->parsed()) {
      if (!config_file.empty()) {
        // Flags beat the file: remember them, load the file, then restore.
        const RunArgs from_flags = run;
        std::vector<bool> given;
        for (auto* f : flags) given.push_back(f->count() > 0);
        apply_config_file(config_file, run);
        RunArgs merged = run;
        const std::vector<std::function<void()>> restore{
            [&] { merged.preset = from_flags.preset; },         [&] { merged.preset = from_flags.preset; },
            [&] { merged.dataset = from_flags.dataset; },       [&] { merged.mode = from_flags.mode; },
            [&] { merged.fraction = from_flags.fraction; },     [&] { merged.train_fraction = from_flags.train_fraction; },
            [&] { merged.horizon = from_flags.horizon; },       [&] { merged.binarize = from_flags.binarize; },
            [&] { merged.workers = from_flags.workers; },       [&] { merged.seed = from_flags.seed; },
            [&] { merged.epochs = from_flags.epochs; },         [&] { merged.learning_rate = from_flags.learning_rate; },
            [&] { merged.l2_lambda = from_flags.l2_lambda; },   [&] { merged.kl_scale = from_flags.kl_scale; },
            [&] { merged.output = from_flags.output; },
            [&] { merged.checkpoints = from_flags.checkpoints; }, [&] { merged.data_dir = from_flags.data_dir; },
        };
        for (std::size_t k = 0; k < flags.size(); ++k) {
          if (given[k]) restore[k]();
        }
        run = merged;
      }
      return cmd_run(run);
    }
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsageError;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsageError;
  } catch (const IngestionError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsageError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntimeFailure;
  }
  return kUsageError;
}
