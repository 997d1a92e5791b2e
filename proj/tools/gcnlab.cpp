#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "gcnlab/gcnlab.hpp"

namespace fs = std::filesystem;
using namespace gcnlab;

namespace {

constexpr int kUsageError = 2;
constexpr int kRuntimeError = 1;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

const std::map<std::string, InitKind> kInitNames{{"glorot", InitKind::glorot_uniform},
                                                 {"iso", InitKind::iso_uniform},
                                                 {"iso-gauss", InitKind::iso_gaussian},
                                                 {"iso-ortho", InitKind::iso_orthogonal}};
const std::map<std::string, SkipMode> kSkipNames{{"none", SkipMode::none},
                                                 {"residual", SkipMode::residual},
                                                 {"initial", SkipMode::initial},
                                                 {"jumping", SkipMode::jumping},
                                                 {"dynamic", SkipMode::dynamic}};
const std::map<std::string, SkipSource> kSourceNames{{"first", SkipSource::first_layer_output},
                                                     {"prev", SkipSource::previous_layer}};

struct Options {
  std::string dataset;
  std::string out;
  int depth = 2;
  std::uint64_t seed = 1;
  std::vector<int> layers;
  std::vector<std::uint64_t> seeds{1};
  std::vector<Index> widths{64};
  std::string init = "glorot";
  std::string skip = "none";
  std::string source = "first";
  int jobs = 1;
  TrainConfig config;
};

void add_dataset(CLI::App* cmd, Options& o) {
  cmd->add_option("--dataset", o.dataset,
                  "bundle directory or synth:<kind>:<nodes>[,key=value...]")
      ->required();
}

void add_model_flags(CLI::App* cmd, Options& o, bool with_init_and_skip) {
  TrainConfig& c = o.config;
  cmd->add_option("--hidden", c.hidden_dim, "hidden width")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  if (with_init_and_skip) {
    cmd->add_option("--init", o.init, "weight initializer")
        ->check(CLI::IsMember({"glorot", "iso", "iso-gauss", "iso-ortho"}))
        ->capture_default_str();
    cmd->add_option("--skip", o.skip, "skip-connection mode")
        ->check(CLI::IsMember({"none", "residual", "initial", "jumping", "dynamic"}))
        ->capture_default_str();
  }
  cmd->add_option("--alpha", c.alpha, "skip ratio")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  cmd->add_option("--p-threshold", c.p_threshold, "gradient-flow drop threshold for dynamic skips")
      ->capture_default_str();
  cmd->add_option("--skip-source", o.source, "dynamic skip source")
      ->check(CLI::IsMember({"first", "prev"}))
      ->capture_default_str();
  cmd->add_option("--dropout", c.dropout, "dropout rate")->capture_default_str();
}

void add_training_flags(CLI::App* cmd, Options& o) {
  TrainConfig& c = o.config;
  cmd->add_option("--lr", c.lr, "Adam learning rate")->capture_default_str();
  cmd->add_option("--weight-decay", c.weight_decay, "L2 weight decay")->capture_default_str();
  cmd->add_option("--epochs", c.epochs, "training epochs")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd->add_option("--eval-stride", c.eval_stride, "evaluate every n epochs")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd->add_option("--energy-stride", c.energy_stride, "log Dirichlet energy every n epochs, 0 = off")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
}

void finish_config(Options& o) {
  o.config.init = kInitNames.at(o.init);
  o.config.skip_mode = kSkipNames.at(o.skip);
  o.config.skip_source = kSourceNames.at(o.source);
  o.config.num_layers = o.depth;
  o.config.seed = o.seed;
  try {
    o.config.validate();
  } catch (const ConfigError& e) {
    throw UsageError(e.what());
  }
}

GraphBundle open_or_usage(const std::string& ref) {
  try {
    return open_dataset(ref);
  } catch (const ConfigError& e) {
    throw UsageError(e.what());
  }
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw LoadError("cannot create output directory " + dir.string());
  }
}

int cmd_train(Options& o) {
  finish_config(o);
  const GraphBundle graph = open_or_usage(o.dataset);
  const fs::path out = o.out.empty() ? fs::path("runs/train") : fs::path(o.out);
  ensure_dir(out);
  const TrainResult r = train(graph, o.config);
  write_metrics_jsonl(r, out / "metrics.jsonl");
  save_checkpoint(r.model, out / "checkpoint.bin");
  for (const auto& w : r.warnings) std::cerr << "warning: " << w << '\n';
  std::printf("test_acc=%.4f best_val_epoch=%d\n", r.test_accuracy, r.best_val_epoch);
  return 0;
}

struct Moments {
  double mean = 0.0;
  double std = 0.0;
};

Moments moments(const std::vector<double>& xs) {
  Moments m;
  for (double x : xs) m.mean += x;
  m.mean /= static_cast<double>(xs.size());
  for (double x : xs) m.std += (x - m.mean) * (x - m.mean);
  m.std = xs.size() > 1 ? std::sqrt(m.std / static_cast<double>(xs.size() - 1)) : 0.0;
  return m;
}

int cmd_sweep(Options& o) {
  if (o.layers.empty()) throw UsageError("--layers needs at least one depth");
  if (o.seeds.empty()) throw UsageError("--seed needs at least one seed");
  for (int d : o.layers) {
    if (d < 1) throw UsageError("depths must be >= 1");
  }
  finish_config(o);
  const GraphBundle graph = open_or_usage(o.dataset);
  const fs::path out = o.out.empty() ? fs::path("runs/sweep") : fs::path(o.out);
  ensure_dir(out);

  std::ofstream csv(out / "summary.csv", std::ios::binary | std::ios::trunc);
  if (!csv) throw LoadError("cannot write " + (out / "summary.csv").string());
  csv << "layers,init,skip,runs,test_acc_mean,test_acc_std,val_acc_mean,val_acc_std\n";
  csv.flush();

  for (int depth : o.layers) {
    for (const char* init : {"glorot", "iso"}) {
      for (const char* skip : {"none", "dynamic"}) {
        TrainConfig c = o.config;
        c.num_layers = depth;
        c.init = kInitNames.at(init);
        c.skip_mode = kSkipNames.at(skip);
        const std::string cell = "L" + std::to_string(depth) + "-" + init + "-" + skip;
        const fs::path dir = out / cell;
        ensure_dir(dir);
        const auto results = run_seeds(graph, c, o.seeds, o.jobs);
        std::vector<double> test, val;
        for (std::size_t k = 0; k < results.size(); ++k) {
          write_metrics_jsonl(results[k], dir / ("seed" + std::to_string(o.seeds[k]) + ".jsonl"));
          test.push_back(results[k].test_accuracy);
          val.push_back(results[k].best_val_accuracy);
        }
        const Moments t = moments(test), v = moments(val);
        char row[256];
        std::snprintf(row, sizeof row, "%d,%s,%s,%zu,%.6f,%.6f,%.6f,%.6f\n", depth, init, skip,
                      results.size(), t.mean, t.std, v.mean, v.std);
        csv << row;
        csv.flush();
        std::printf("%-20s test_acc=%.4f +- %.4f\n", cell.c_str(), t.mean, t.std);
        std::fflush(stdout);
      }
    }
  }
  return 0;
}

int cmd_inspect(Options& o) {
  const GraphBundle graph = open_or_usage(o.dataset);
  const DegreeSums s = degree_sum_statistics(graph);
  std::printf("nodes=%ld\n", static_cast<long>(graph.num_nodes()));
  std::printf("features=%ld\n", static_cast<long>(graph.num_features()));
  std::printf("classes=%d\n", graph.num_classes());
  std::printf("edges_directed=%ld\n", static_cast<long>(graph.num_directed_edges()));
  std::printf("edges_undirected=%ld\n", static_cast<long>(graph.num_undirected_edges()));
  std::printf("S1=%.17g\n", s.s1);
  std::printf("S2=%.17g\n", s.s2);
  std::printf("iso_magnitude=%.17g\n", iso_magnitude(graph));
  for (Index w : o.widths) {
    if (w < 1) throw UsageError("widths must be >= 1");
    std::printf("out_dim=%ld iso_uniform_bound=%.17g iso_variance=%.17g\n", static_cast<long>(w),
                iso_uniform_bound(graph, w), iso_variance(graph, w));
  }
  return 0;
}

int cmd_energy_probe(Options& o, int probe_epochs) {
  finish_config(o);
  const GraphBundle graph = open_or_usage(o.dataset);
  const auto op = build_propagation_operator(graph);
  ModelState model;
  if (probe_epochs > 0) {
    TrainConfig c = o.config;
    c.epochs = probe_epochs;
    c.energy_stride = 0;
    model = train(graph, c).model;
  } else {
    ModelOptions opt{o.config.skip_mode, o.config.alpha, o.config.skip_source, o.config.bias};
    model = build_model({o.config.num_layers, graph.num_features(), o.config.hidden_dim,
                         graph.num_classes()},
                        {o.config.init, o.config.seed}, graph, opt);
  }
  const auto fwd = gcn_forward(model, op, graph.features());
  const EnergyReport e = energy_report(fwd.tape, fwd.logits, graph);
  for (std::size_t l = 0; l < e.per_layer.size(); ++l) {
    std::printf("layer=%zu energy=%.17g\n", l + 1, e.per_layer[l]);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"gcnlab: deep GCN training with isometric initialization and gradient-guided rewiring"};
  app.require_subcommand(1);
  app.get_formatter()->column_width(36);

  Options o;
  int probe_epochs = 0;
  const int cores = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));

  auto* train_cmd = app.add_subcommand("train", "train one model and write metrics + checkpoint");
  add_dataset(train_cmd, o);
  train_cmd->add_option("--layers", o.depth, "number of GCN layers")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  add_model_flags(train_cmd, o, true);
  add_training_flags(train_cmd, o);
  train_cmd->add_option("--seed", o.seed, "random seed")->capture_default_str();
  train_cmd->add_option("--out", o.out, "output directory (default runs/train)");

  auto* sweep_cmd = app.add_subcommand(
      "sweep", "depth x seed x {glorot, iso} x {none, dynamic} grid with a CSV summary");
  add_dataset(sweep_cmd, o);
  sweep_cmd->add_option("--layers", o.layers, "depths, comma separated")
      ->delimiter(',')
      ->required()
      ->expected(0, CLI::detail::expected_max_vector_size);
  add_model_flags(sweep_cmd, o, false);
  add_training_flags(sweep_cmd, o);
  sweep_cmd->add_option("--seed", o.seeds, "seeds, comma separated")
      ->delimiter(',')
      ->default_str("1");
  sweep_cmd->add_option("--out", o.out, "output directory (default runs/sweep)");
  sweep_cmd->add_option("--jobs", o.jobs, "parallel runs")
      ->check(CLI::PositiveNumber)
      ->default_val(cores)
      ->capture_default_str();

  auto* inspect_cmd = app.add_subcommand("inspect", "graph statistics and isometric bounds");
  add_dataset(inspect_cmd, o);
  inspect_cmd->add_option("--hidden", o.widths, "output widths C' to report bounds for")
      ->delimiter(',')
      ->default_str("64");

  auto* probe_cmd = app.add_subcommand(
      "energy-probe", "per-layer Dirichlet energy at initialization or after training");
  add_dataset(probe_cmd, o);
  probe_cmd->add_option("--layers", o.depth, "number of GCN layers")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  add_model_flags(probe_cmd, o, true);
  probe_cmd->add_option("--lr", o.config.lr, "Adam learning rate")->capture_default_str();
  probe_cmd->add_option("--weight-decay", o.config.weight_decay, "L2 weight decay")
      ->capture_default_str();
  probe_cmd->add_option("--epochs", probe_epochs, "epochs to train before probing, 0 = at init")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  probe_cmd->add_option("--seed", o.seed, "random seed")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsageError;
  }

  try {
    if (*train_cmd) return cmd_train(o);
    if (*sweep_cmd) return cmd_sweep(o);
    if (*inspect_cmd) return cmd_inspect(o);
    if (*probe_cmd) return cmd_energy_probe(o, probe_epochs);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kUsageError;
  } catch (const LoadError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntimeError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntimeError;
  }
  return kUsageError;
}
