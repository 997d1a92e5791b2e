#pragma once

#include <memory>
#include <span>
#include <vector>

#include <Eigen/SparseCore>

#include "gcnlab/common.hpp"
#include "gcnlab/graph.hpp"
#include "gcnlab/model.hpp"

namespace gcnlab {

using Mask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;
using SparseMatrix = Eigen::SparseMatrix<double, Eigen::ColMajor>;

struct ReluResult {
  Matrix value;
  Mask mask;  // true exactly where the input was > 0
};

ReluResult relu(const Matrix& x);

struct LossResult {
  double loss = 0.0;
  Matrix dlogits;
};

// Mean cross-entropy of column-wise softmax over `index_set`. The gradient is
// zero outside the set and already carries the 1/|index_set| factor.
LossResult softmax_cross_entropy(const Matrix& logits, std::span<const int> labels,
                                 std::span<const Index> index_set);

// Input features prepared once per graph. Mostly-zero inputs (bag-of-words
// citation features) are multiplied in sparse form.
class FeatureInput {
 public:
  FeatureInput() = default;
  explicit FeatureInput(const Matrix& features, double sparse_threshold = 0.2);

  Index rows() const { return rows_; }
  Index cols() const { return cols_; }
  bool is_sparse() const { return sparse_flag_; }
  const Matrix& dense() const { return dense_; }
  const SparseMatrix& sparse() const { return sparse_; }

  // W * X for a weight with rows() columns.
  Matrix left_multiply(const Matrix& w) const;
  // G * X^T.
  Matrix right_multiply_transposed(const Matrix& g) const;

  // Inverted dropout over the stored entries. One Bernoulli draw per nonzero
  // entry, in column-major order, so the dense and sparse forms consume the
  // generator identically.
  FeatureInput dropped(double rate, Rng& rng) const;

 private:
  Index rows_ = 0;
  Index cols_ = 0;
  bool sparse_flag_ = false;
  Matrix dense_;
  SparseMatrix sparse_;
};

enum class Mode { train, eval };

struct ForwardOptions {
  Mode mode = Mode::eval;
  double dropout = 0.0;
  Rng* rng = nullptr;  // required when mode == train and dropout > 0
};

// Everything the backward pass needs from one forward pass.
struct TapeCache {
  Mode mode = Mode::eval;
  double dropout = 0.0;
  // Layer-1 input after dropout; shared with the caller when nothing was dropped.
  std::shared_ptr<const FeatureInput> first_input;
  // inputs[l] is the (dropped) input of layer l for l >= 1; inputs[0] is empty.
  std::vector<Matrix> inputs;
  // Dropout multipliers (0 or 1/(1-rate)) for layers l >= 1; empty without dropout.
  std::vector<Matrix> dropout_masks;
  // outputs[l] = X^{(l+1)}: activation of hidden layer l after any static skip.
  std::vector<Matrix> outputs;
  std::vector<Mask> relu_masks;
  std::vector<bool> skip_flags;

  Index num_layers() const { return static_cast<Index>(skip_flags.size()); }
  const Matrix& layer1_output() const { return outputs.front(); }
};

struct ForwardResult {
  Matrix logits;
  TapeCache tape;
};

struct GradientSet {
  std::vector<Matrix> weights;
  std::vector<Vector> biases;  // empty for bias-free models

  Index num_layers() const { return static_cast<Index>(weights.size()); }
};

// alpha times the skip source for `layer` (0-based), read from a tape that
// already holds the hidden outputs preceding that layer.
Matrix skip_source_term(double alpha, SkipSource source, const TapeCache& tape,
                        Index layer);

/// Full-graph forward pass.
///
/// Layer l computes W_l D_l A_hat (+ bias), where D_l is the layer input after
/// dropout. When a dynamic skip is active for l, alpha times the skip source
/// is added before the ReLU. Static residual/initial skips mix the activation
/// with an earlier output after the ReLU, and jumping feeds the classifier the
/// mean of all hidden outputs. The last layer has no activation.
ForwardResult gcn_forward(const ModelState& model, const PropagationOperator& op,
                          std::shared_ptr<const FeatureInput> features,
                          const ForwardOptions& options = {});

ForwardResult gcn_forward(const ModelState& model, const PropagationOperator& op,
                          const Matrix& features, const ForwardOptions& options = {});

// Exact gradients of the loss with respect to every weight, given the
// gradient of the loss with respect to the logits.
GradientSet gcn_backward(const ModelState& model, const PropagationOperator& op,
                         const TapeCache& tape, const Matrix& dlogits);

}  // namespace gcnlab
