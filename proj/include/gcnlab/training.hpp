#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gcnlab/autodiff.hpp"
#include "gcnlab/diagnostics.hpp"
#include "gcnlab/graph.hpp"
#include "gcnlab/model.hpp"
#include "gcnlab/rewiring.hpp"

namespace gcnlab {

struct TrainConfig {
  double lr = 0.005;
  double weight_decay = 5e-4;
  int epochs = 1500;
  Index hidden_dim = 64;
  Index num_layers = 2;
  InitKind init = InitKind::glorot_uniform;
  SkipMode skip_mode = SkipMode::none;
  double alpha = 0.1;
  double p_threshold = 0.5;
  SkipSource skip_source = SkipSource::first_layer_output;
  double dropout = 0.5;
  std::uint64_t seed = 1;
  int eval_stride = 1;
  // 0 disables energy logging.
  int energy_stride = 10;
  double flow_p = 2.0;
  bool bias = false;

  // Throws ConfigError naming the first invalid field.
  void validate() const;
};

struct AdamParams {
  double lr = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
};

struct AdamMoments {
  Matrix m;
  Matrix v;
};

/// One Adam update of `weights` at step t >= 1. Weight decay is added to the
/// gradient as an L2 term before the moment update.
void adam_step(Matrix& weights, const Matrix& grad, AdamMoments& moments, std::int64_t t,
               const AdamParams& params);

// Adam over every weight (with decay) and bias (without) of a model.
class AdamOptimizer {
 public:
  AdamOptimizer(const ModelState& model, const AdamParams& params);
  void step(ModelState& model, const GradientSet& grads);
  std::int64_t steps_taken() const { return t_; }

 private:
  AdamParams params_;
  std::vector<AdamMoments> weight_moments_;
  std::vector<AdamMoments> bias_moments_;
  std::int64_t t_ = 0;
};

struct Evaluation {
  double loss = 0.0;
  double accuracy = 0.0;
};

// Argmax ties resolve to the lowest class index.
double accuracy(const Matrix& logits, std::span<const int> labels,
                std::span<const Index> split);

Evaluation evaluate_logits(const Matrix& logits, std::span<const int> labels,
                           std::span<const Index> split);

// Eval-mode forward pass followed by loss and accuracy on `split`.
Evaluation evaluate(const ModelState& model, const GraphBundle& graph,
                    std::span<const Index> split);

struct MetricsRecord {
  int epoch = 0;
  double train_loss = 0.0;
  std::optional<double> val_loss;
  std::optional<double> val_accuracy;
  std::optional<double> test_accuracy;
  FlowReport flow;
  std::optional<EnergyReport> energy;
  std::vector<SkipEvent> skip_events;
};

struct TrainResult {
  // Snapshot taken at the epoch of best validation accuracy (earliest on ties).
  ModelState model;
  std::vector<MetricsRecord> history;
  int best_val_epoch = -1;
  double best_val_accuracy = 0.0;
  double test_accuracy = 0.0;
  std::vector<SkipEvent> skip_events;
  std::vector<std::string> warnings;
};

/// Full-batch transductive training. Every epoch runs a train-mode forward
/// and backward pass on the train split, records gradient flow, updates the
/// rewiring state (dynamic mode: baseline at epoch 0, rule afterwards), takes
/// an Adam step and, at the configured strides, evaluates and logs Dirichlet
/// energies from an eval-mode pass with the updated weights.
TrainResult train(const GraphBundle& graph, const TrainConfig& config);

// Independent runs differing only in seed. Runs are spread over `jobs`
// threads; results come back in seed order.
std::vector<TrainResult> run_seeds(const GraphBundle& graph, const TrainConfig& config,
                                   std::span<const std::uint64_t> seeds, int jobs = 1);

// One JSON object per line. Layer numbers in the output are 1-based.
std::string metrics_json_line(const MetricsRecord& record);
std::string summary_json_line(const TrainResult& result);
void write_metrics_jsonl(const TrainResult& result, const std::filesystem::path& path);

}  // namespace gcnlab
