#include "gcnlab/training.hpp"

#include <atomic>
#include <cmath>
#include <fstream>
#include <thread>

#include "json.hpp"

namespace gcnlab {

void TrainConfig::validate() const {
  auto fail = [](const std::string& what) { throw ConfigError(what); };
  if (!(lr > 0.0)) fail("lr must be > 0");
  if (weight_decay < 0.0) fail("weight_decay must be >= 0");
  if (epochs < 1) fail("epochs must be >= 1");
  if (num_layers < 1) fail("num_layers must be >= 1");
  if (hidden_dim < 1) fail("hidden_dim must be >= 1");
  if (alpha < 0.0 || alpha > 1.0) fail("alpha must lie in [0, 1]");
  if (p_threshold < 0.0 || p_threshold >= 1.0) fail("p_threshold must lie in [0, 1)");
  if (dropout < 0.0 || dropout >= 1.0) fail("dropout must lie in [0, 1)");
  if (eval_stride < 1) fail("eval_stride must be >= 1");
  if (energy_stride < 0) fail("energy_stride must be >= 0");
  if (!(flow_p >= 1.0)) fail("flow norm order must be >= 1");
}

void adam_step(Matrix& weights, const Matrix& grad, AdamMoments& moments, std::int64_t t,
               const AdamParams& params) {
  if (t < 1) throw ConfigError("Adam step counter starts at 1");
  if (grad.rows() != weights.rows() || grad.cols() != weights.cols()) {
    throw DimensionError("gradient " + shape_str(grad.rows(), grad.cols()) +
                         " does not match weight " + shape_str(weights.rows(), weights.cols()));
  }
  if (moments.m.size() == 0) {
    moments.m = Matrix::Zero(weights.rows(), weights.cols());
    moments.v = Matrix::Zero(weights.rows(), weights.cols());
  }
  const double c1 = 1.0 - std::pow(params.beta1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(params.beta2, static_cast<double>(t));
  auto m = moments.m.array();
  auto v = moments.v.array();
  if (params.weight_decay != 0.0) {
    const Matrix g = grad + params.weight_decay * weights;
    m = params.beta1 * m + (1.0 - params.beta1) * g.array();
    v = params.beta2 * v + (1.0 - params.beta2) * g.array().square();
  } else {
    m = params.beta1 * m + (1.0 - params.beta1) * grad.array();
    v = params.beta2 * v + (1.0 - params.beta2) * grad.array().square();
  }
  weights.array() -= params.lr * (m / c1) / ((v / c2).sqrt() + params.eps);
}

AdamOptimizer::AdamOptimizer(const ModelState& model, const AdamParams& params)
    : params_(params),
      weight_moments_(model.weights.size()),
      bias_moments_(model.biases.size()) {}

void AdamOptimizer::step(ModelState& model, const GradientSet& grads) {
  if (grads.weights.size() != model.weights.size() ||
      grads.biases.size() != model.biases.size()) {
    throw DimensionError("gradient set does not match model");
  }
  ++t_;
  for (std::size_t l = 0; l < model.weights.size(); ++l) {
    adam_step(model.weights[l], grads.weights[l], weight_moments_[l], t_, params_);
  }
  AdamParams no_decay = params_;
  no_decay.weight_decay = 0.0;
  for (std::size_t l = 0; l < model.biases.size(); ++l) {
    Matrix b = model.biases[l];
    adam_step(b, grads.biases[l], bias_moments_[l], t_, no_decay);
    model.biases[l] = b.col(0);
  }
}

double accuracy(const Matrix& logits, std::span<const int> labels,
                std::span<const Index> split) {
  if (split.empty()) throw ConfigError("accuracy over an empty split");
  Index correct = 0;
  for (Index node : split) {
    Index best = 0;
    for (Index k = 1; k < logits.rows(); ++k) {
      if (logits(k, node) > logits(best, node)) best = k;
    }
    correct += best == labels[node];
  }
  return static_cast<double>(correct) / static_cast<double>(split.size());
}

Evaluation evaluate_logits(const Matrix& logits, std::span<const int> labels,
                           std::span<const Index> split) {
  return {softmax_cross_entropy(logits, labels, split).loss, accuracy(logits, labels, split)};
}

Evaluation evaluate(const ModelState& model, const GraphBundle& graph,
                    std::span<const Index> split) {
  if (split.empty()) throw ConfigError("evaluation over an empty split");
  const auto op = build_propagation_operator(graph);
  const auto fwd = gcn_forward(model, op, graph.features());
  return evaluate_logits(fwd.logits, graph.labels(), split);
}

TrainResult train(const GraphBundle& graph, const TrainConfig& config) {
  config.validate();
  const Splits& splits = graph.splits();
  if (splits.train.empty() || splits.val.empty() || splits.test.empty()) {
    throw ConfigError("training needs non-empty train, val and test splits");
  }
  const auto op = build_propagation_operator(graph);
  const auto features = std::make_shared<const FeatureInput>(graph.features());
  const auto& labels = graph.labels();

  Rng rng(config.seed);
  ModelShape shape{config.num_layers, graph.num_features(), config.hidden_dim,
                   graph.num_classes()};
  ModelOptions options{config.skip_mode, config.alpha, config.skip_source, config.bias};
  ModelState model = build_model(shape, config.init, graph, rng, options);
  model.init = {config.init, config.seed};

  const bool dynamic = config.skip_mode == SkipMode::dynamic;
  RewiringState rewiring;
  if (dynamic) {
    rewiring = make_rewiring_state(config.num_layers, config.alpha, config.p_threshold,
                                   config.skip_source);
  }

  AdamOptimizer adam(model, {config.lr, 0.9, 0.999, 1e-8, config.weight_decay});
  TrainResult result;
  result.history.reserve(static_cast<std::size_t>(config.epochs));

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    MetricsRecord rec;
    rec.epoch = epoch;

    auto fwd = gcn_forward(model, op, features, {Mode::train, config.dropout, &rng});
    if (model.num_layers() > 1) model.layer1_cache = fwd.tape.layer1_output();
    const LossResult loss = softmax_cross_entropy(fwd.logits, labels, splits.train);
    const GradientSet grads = gcn_backward(model, op, fwd.tape, loss.dlogits);
    rec.train_loss = loss.loss;
    rec.flow = gradient_flow(grads, config.flow_p);

    if (dynamic) {
      if (!rewiring.baseline_recorded) {
        rewiring = record_baseline(std::move(rewiring), rec.flow);
      } else {
        const std::size_t before = rewiring.activation_log.size();
        rewiring = update_skips(std::move(rewiring), rec.flow, epoch);
        rec.skip_events.assign(rewiring.activation_log.begin() + static_cast<std::ptrdiff_t>(before),
                               rewiring.activation_log.end());
        model.skip_flags = rewiring.active;
      }
    }

    adam.step(model, grads);

    const bool last = epoch + 1 == config.epochs;
    const bool do_eval = epoch % config.eval_stride == 0 || last;
    const bool do_energy =
        config.energy_stride > 0 && (epoch % config.energy_stride == 0 || last);
    if (do_eval || do_energy) {
      const auto eval = gcn_forward(model, op, features);
      if (do_eval) {
        const Evaluation val = evaluate_logits(eval.logits, labels, splits.val);
        rec.val_loss = val.loss;
        rec.val_accuracy = val.accuracy;
        rec.test_accuracy = accuracy(eval.logits, labels, splits.test);
        if (result.best_val_epoch < 0 || val.accuracy > result.best_val_accuracy) {
          result.best_val_epoch = epoch;
          result.best_val_accuracy = val.accuracy;
          result.test_accuracy = *rec.test_accuracy;
          result.model = model;
        }
      }
      if (do_energy) rec.energy = energy_report(eval.tape, eval.logits, graph);
    }
    result.history.push_back(std::move(rec));
  }
  result.skip_events = rewiring.activation_log;
  result.warnings = rewiring.warnings;
  return result;
}

std::vector<TrainResult> run_seeds(const GraphBundle& graph, const TrainConfig& config,
                                   std::span<const std::uint64_t> seeds, int jobs) {
  std::vector<TrainResult> results(seeds.size());
  std::vector<std::exception_ptr> errors(seeds.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < seeds.size(); i = next++) {
      try {
        TrainConfig c = config;
        c.seed = seeds[i];
        results[i] = train(graph, c);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const int threads = std::max(1, std::min<int>(jobs, static_cast<int>(seeds.size())));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return results;
}

namespace {

nlohmann::json event_json(const SkipEvent& e) {
  return {{"epoch", e.epoch}, {"layer", e.layer + 1}, {"baseline", e.baseline},
          {"flow", e.flow}};
}

nlohmann::json optional_json(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

}  // namespace

std::string metrics_json_line(const MetricsRecord& r) {
  nlohmann::json j;
  j["epoch"] = r.epoch;
  j["train_loss"] = r.train_loss;
  j["val_loss"] = optional_json(r.val_loss);
  j["val_accuracy"] = optional_json(r.val_accuracy);
  j["test_accuracy"] = optional_json(r.test_accuracy);
  j["flow"] = {{"p", r.flow.p}, {"per_layer", r.flow.per_layer}, {"mean", r.flow.mean_flow}};
  j["energy"] = r.energy ? nlohmann::json(r.energy->per_layer) : nlohmann::json(nullptr);
  auto events = nlohmann::json::array();
  for (const auto& e : r.skip_events) events.push_back(event_json(e));
  j["skip_events"] = events;
  return j.dump();
}

std::string summary_json_line(const TrainResult& result) {
  auto events = nlohmann::json::array();
  for (const auto& e : result.skip_events) events.push_back(event_json(e));
  nlohmann::json j = {{"summary", true},
                      {"epochs", result.history.size()},
                      {"best_val_epoch", result.best_val_epoch},
                      {"best_val_accuracy", result.best_val_accuracy},
                      {"test_accuracy", result.test_accuracy},
                      {"skip_events", events}};
  return j.dump();
}

void write_metrics_jsonl(const TrainResult& result, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw LoadError("cannot write metrics file " + path.string());
  for (const auto& r : result.history) os << metrics_json_line(r) << '\n';
  os << summary_json_line(result) << '\n';
  if (!os) throw LoadError("failed writing metrics file " + path.string());
}

}  // namespace gcnlab
