#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "gcnlab/common.hpp"
#include "gcnlab/graph.hpp"
#include "gcnlab/init.hpp"

namespace gcnlab {

enum class SkipMode { none, residual, initial, jumping, dynamic };

// Where a dynamic skip draws from: the first layer's activation (default) or
// the input of the receiving layer.
enum class SkipSource { first_layer_output, previous_layer };

std::string_view to_string(SkipMode mode);
std::optional<SkipMode> parse_skip_mode(std::string_view name);
std::string_view to_string(SkipSource source);
std::optional<SkipSource> parse_skip_source(std::string_view name);

struct ModelShape {
  Index num_layers = 2;
  Index input_dim = 0;
  Index hidden_dim = 64;
  Index num_classes = 0;
};

struct ModelState {
  // weights[l] maps layer l's input width to its output width (out x in).
  std::vector<Matrix> weights;
  // Empty unless the model was built with biases.
  std::vector<Vector> biases;
  SkipMode skip_mode = SkipMode::none;
  double alpha = 0.0;
  SkipSource skip_source = SkipSource::first_layer_output;
  // One flag per layer; index 0 is never set.
  std::vector<bool> skip_flags;
  // Most recent first-layer activation seen in a forward pass.
  Matrix layer1_cache;
  InitScheme init;

  Index num_layers() const { return static_cast<Index>(weights.size()); }
  bool has_bias() const { return !biases.empty(); }
  Index input_dim() const { return weights.front().cols(); }
  Index output_dim() const { return weights.back().rows(); }

  // Throws DimensionError when shapes do not chain or flags are inconsistent.
  void validate() const;
};

struct ModelOptions {
  SkipMode skip_mode = SkipMode::none;
  double alpha = 0.0;
  SkipSource skip_source = SkipSource::first_layer_output;
  bool bias = false;
};

// Layers are initialized in order from one generator seeded by scheme.seed.
ModelState build_model(const ModelShape& shape, const InitScheme& scheme,
                       const GraphBundle& graph, const ModelOptions& options = {});

// Same, drawing from a caller-owned generator.
ModelState build_model(const ModelShape& shape, InitKind kind,
                       const GraphBundle& graph, Rng& rng,
                       const ModelOptions& options = {});

// Layer index (0-based) range that may receive a skip: every hidden layer
// after the first. The classifier layer is excluded because its width is K.
bool skip_eligible(Index layer, Index num_layers);

/// Combines a freshly computed layer output with earlier ones.
///   residual: (1 - alpha) * current + alpha * history.back()
///   initial:  (1 - alpha) * current + alpha * history.front()
///   jumping:  mean of history and current
/// `history` holds the earlier (already combined) hidden outputs in order.
Matrix apply_static_skip(SkipMode mode, double alpha, std::span<const Matrix> history,
                         const Matrix& current);

// Checkpoint container: 8-byte magic "GCNLCKP1", u64 little-endian header
// length, UTF-8 JSON header, then each weight (and bias, when present) as
// row-major little-endian float64 in layer order.
void save_checkpoint(const ModelState& model, const std::filesystem::path& path);
ModelState load_checkpoint(const std::filesystem::path& path);

}  // namespace gcnlab
