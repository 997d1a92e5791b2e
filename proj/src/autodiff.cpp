#include "gcnlab/autodiff.hpp"

#include <cmath>

namespace gcnlab {

ReluResult relu(const Matrix& x) {
  return {x.cwiseMax(0.0), x.array() > 0.0};
}

LossResult softmax_cross_entropy(const Matrix& logits, std::span<const int> labels,
                                 std::span<const Index> index_set) {
  if (index_set.empty()) throw ConfigError("cross-entropy over an empty node set");
  if (static_cast<Index>(labels.size()) != logits.cols()) {
    throw DimensionError("label count does not match logit columns");
  }
  const Index classes = logits.rows();
  const double scale = 1.0 / static_cast<double>(index_set.size());
  LossResult out;
  out.dlogits = Matrix::Zero(classes, logits.cols());
  for (Index node : index_set) {
    if (node < 0 || node >= logits.cols()) {
      throw DimensionError("node index " + std::to_string(node) + " out of range");
    }
    const int y = labels[node];
    if (y < 0 || y >= classes) {
      throw DimensionError("label " + std::to_string(y) + " outside [0, " +
                           std::to_string(classes) + ")");
    }
    const auto col = logits.col(node);
    const double top = col.maxCoeff();
    const Vector shifted_exp = (col.array() - top).exp().matrix();
    const double total = shifted_exp.sum();
    out.loss += (top + std::log(total) - col(y)) * scale;
    auto grad = out.dlogits.col(node);
    grad += shifted_exp * (scale / total);
    grad(y) -= scale;
  }
  return out;
}

FeatureInput::FeatureInput(const Matrix& features, double sparse_threshold)
    : rows_(features.rows()), cols_(features.cols()) {
  Index nnz = 0;
  for (Index k = 0; k < features.size(); ++k) nnz += features.data()[k] != 0.0;
  sparse_flag_ = static_cast<double>(nnz) <
                 sparse_threshold * static_cast<double>(features.size());
  if (!sparse_flag_) {
    dense_ = features;
    return;
  }
  sparse_.resize(rows_, cols_);
  sparse_.reserve(nnz);
  for (Index j = 0; j < cols_; ++j) {
    sparse_.startVec(j);
    for (Index i = 0; i < rows_; ++i) {
      const double v = features(i, j);
      if (v != 0.0) sparse_.insertBack(i, j) = v;
    }
  }
  sparse_.finalize();
}

Matrix FeatureInput::left_multiply(const Matrix& w) const {
  if (w.cols() != rows_) {
    throw DimensionError("weight " + shape_str(w.rows(), w.cols()) +
                         " cannot multiply features " + shape_str(rows_, cols_));
  }
  if (sparse_flag_) return w * sparse_;
  return w * dense_;
}

Matrix FeatureInput::right_multiply_transposed(const Matrix& g) const {
  if (sparse_flag_) return g * sparse_.transpose();
  return g * dense_.transpose();
}

FeatureInput FeatureInput::dropped(double rate, Rng& rng) const {
  FeatureInput out = *this;
  std::bernoulli_distribution keep(1.0 - rate);
  const double scale = 1.0 / (1.0 - rate);
  if (sparse_flag_) {
    double* values = out.sparse_.valuePtr();
    for (Index k = 0; k < out.sparse_.nonZeros(); ++k) {
      values[k] = keep(rng) ? values[k] * scale : 0.0;
    }
  } else {
    double* values = out.dense_.data();
    for (Index k = 0; k < out.dense_.size(); ++k) {
      if (values[k] != 0.0) values[k] = keep(rng) ? values[k] * scale : 0.0;
    }
  }
  return out;
}

Matrix skip_source_term(double alpha, SkipSource source, const TapeCache& tape,
                        Index layer) {
  if (layer < 1) throw DimensionError("layer 1 has no upstream skip source");
  if (static_cast<Index>(tape.outputs.size()) < layer) {
    throw StateError("tape does not yet hold the output feeding layer " +
                     std::to_string(layer + 1));
  }
  const Matrix& src = source == SkipSource::first_layer_output
                          ? tape.outputs.front()
                          : tape.outputs[static_cast<std::size_t>(layer - 1)];
  return alpha * src;
}

namespace {

// Entries that are already zero keep multiplier `scale`; they carry no value
// and skipping their draw keeps the generator stream independent of sparsity.
Matrix dropout_mask(const Matrix& input, double rate, Rng& rng) {
  std::bernoulli_distribution keep(1.0 - rate);
  const double scale = 1.0 / (1.0 - rate);
  Matrix mask(input.rows(), input.cols());
  for (Index k = 0; k < input.size(); ++k) {
    mask.data()[k] = (input.data()[k] == 0.0 || keep(rng)) ? scale : 0.0;
  }
  return mask;
}

void check_model_against(const ModelState& model, const PropagationOperator& op,
                         Index feature_rows, Index feature_cols) {
  model.validate();
  if (feature_rows != model.input_dim()) {
    throw DimensionError("features have " + std::to_string(feature_rows) +
                         " channels, model expects " + std::to_string(model.input_dim()));
  }
  if (feature_cols != op.size()) {
    throw DimensionError("features cover " + std::to_string(feature_cols) +
                         " nodes, operator has " + std::to_string(op.size()));
  }
}

bool uses_static_mix(const ModelState& model, Index layer) {
  return (model.skip_mode == SkipMode::residual || model.skip_mode == SkipMode::initial) &&
         model.skip_flags[static_cast<std::size_t>(layer)];
}

bool uses_dynamic_skip(const ModelState& model, Index layer) {
  return model.skip_mode == SkipMode::dynamic &&
         model.skip_flags[static_cast<std::size_t>(layer)];
}

bool uses_jumping(const ModelState& model, Index layer) {
  return model.skip_mode == SkipMode::jumping && layer >= 1 &&
         layer + 1 == model.num_layers();
}

}  // namespace

ForwardResult gcn_forward(const ModelState& model, const PropagationOperator& op,
                          std::shared_ptr<const FeatureInput> features,
                          const ForwardOptions& options) {
  check_model_against(model, op, features->rows(), features->cols());
  const bool drop = options.mode == Mode::train && options.dropout > 0.0;
  if (drop && options.rng == nullptr) {
    throw ConfigError("train-mode dropout needs a random generator");
  }
  if (options.dropout < 0.0 || options.dropout >= 1.0) {
    throw ConfigError("dropout rate must lie in [0, 1)");
  }

  const Index L = model.num_layers();
  ForwardResult result;
  TapeCache& tape = result.tape;
  tape.mode = options.mode;
  tape.dropout = drop ? options.dropout : 0.0;
  tape.skip_flags = model.skip_flags;
  tape.inputs.resize(static_cast<std::size_t>(L));
  if (drop) tape.dropout_masks.resize(static_cast<std::size_t>(L));

  for (Index l = 0; l < L; ++l) {
    const auto li = static_cast<std::size_t>(l);
    const Matrix& w = model.weights[li];
    Matrix z;
    if (l == 0) {
      tape.first_input =
          drop ? std::make_shared<const FeatureInput>(features->dropped(options.dropout, *options.rng))
               : features;
      z = spmm(op, tape.first_input->left_multiply(w));
    } else {
      Matrix input = uses_jumping(model, l)
                         ? apply_static_skip(SkipMode::jumping, model.alpha,
                                             std::span(tape.outputs).first(li - 1),
                                             tape.outputs.back())
                         : tape.outputs.back();
      if (drop) {
        tape.dropout_masks[li] = dropout_mask(input, options.dropout, *options.rng);
        input.array() *= tape.dropout_masks[li].array();
      }
      tape.inputs[li] = std::move(input);
      z = spmm(op, w * tape.inputs[li]);
    }
    if (model.has_bias()) z.colwise() += model.biases[li];
    if (uses_dynamic_skip(model, l)) {
      const Matrix term = skip_source_term(model.alpha, model.skip_source, tape, l);
      if (term.rows() != z.rows()) {
        throw DimensionError("skip into layer " + std::to_string(l + 1) + " has width " +
                             std::to_string(term.rows()) + ", layer outputs " +
                             std::to_string(z.rows()));
      }
      z += term;
    }
    if (l + 1 == L) {
      result.logits = std::move(z);
      break;
    }
    ReluResult act = relu(z);
    tape.relu_masks.push_back(std::move(act.mask));
    if (uses_static_mix(model, l)) {
      tape.outputs.push_back(
          apply_static_skip(model.skip_mode, model.alpha, tape.outputs, act.value));
    } else {
      tape.outputs.push_back(std::move(act.value));
    }
  }
  return result;
}

ForwardResult gcn_forward(const ModelState& model, const PropagationOperator& op,
                          const Matrix& features, const ForwardOptions& options) {
  return gcn_forward(model, op, std::make_shared<const FeatureInput>(features), options);
}

GradientSet gcn_backward(const ModelState& model, const PropagationOperator& op,
                         const TapeCache& tape, const Matrix& dlogits) {
  const Index L = model.num_layers();
  if (tape.num_layers() != L || static_cast<Index>(tape.outputs.size()) != L - 1 ||
      tape.first_input == nullptr) {
    throw StateError("tape was not recorded for this model");
  }
  if (tape.skip_flags != model.skip_flags) {
    throw StateError("tape skip flags differ from the model's");
  }
  if (dlogits.rows() != model.output_dim() || dlogits.cols() != op.size()) {
    throw DimensionError("dlogits is " + shape_str(dlogits.rows(), dlogits.cols()) +
                         ", expected " + shape_str(model.output_dim(), op.size()));
  }

  GradientSet grads;
  grads.weights.resize(static_cast<std::size_t>(L));
  if (model.has_bias()) grads.biases.resize(static_cast<std::size_t>(L));

  // dH[k]: gradient with respect to hidden output k, accumulated from every
  // later layer that reads it. Complete by the time layer k is processed.
  std::vector<Matrix> dH(static_cast<std::size_t>(L - 1));
  for (Index k = 0; k + 1 < L; ++k) {
    dH[k] = Matrix::Zero(tape.outputs[k].rows(), tape.outputs[k].cols());
  }

  Matrix dz = dlogits;
  for (Index l = L - 1; l >= 0; --l) {
    const auto li = static_cast<std::size_t>(l);
    if (l + 1 < L) {
      if (uses_static_mix(model, l)) {
        const std::size_t target = model.skip_mode == SkipMode::residual ? li - 1 : 0;
        dH[target] += model.alpha * dH[li];
        dz = (1.0 - model.alpha) * dH[li];
      } else {
        dz = dH[li];
      }
      dz.array() *= tape.relu_masks[li].cast<double>();
    }
    if (uses_dynamic_skip(model, l)) {
      const std::size_t src = model.skip_source == SkipSource::first_layer_output ? 0 : li - 1;
      dH[src] += model.alpha * dz;
    }
    if (model.has_bias()) grads.biases[li] = dz.rowwise().sum();

    const Matrix g = spmm(op, dz);
    if (l == 0) {
      grads.weights[0] = tape.first_input->right_multiply_transposed(g);
      break;
    }
    grads.weights[li].noalias() = g * tape.inputs[li].transpose();
    Matrix d_input = model.weights[li].transpose() * g;
    if (!tape.dropout_masks.empty()) d_input.array() *= tape.dropout_masks[li].array();
    if (uses_jumping(model, l)) {
      const double share = 1.0 / static_cast<double>(L - 1);
      for (auto& d : dH) d += share * d_input;
    } else {
      dH[li - 1] += d_input;
    }
  }
  return grads;
}

}  // namespace gcnlab
