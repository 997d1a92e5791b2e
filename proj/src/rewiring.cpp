#include "gcnlab/rewiring.hpp"

#include <algorithm>

namespace gcnlab {

Index RewiringState::num_active() const {
  return static_cast<Index>(std::count(active.begin(), active.end(), true));
}

RewiringState make_rewiring_state(Index num_layers, double alpha, double p_threshold,
                                  SkipSource source, bool final_layer_eligible) {
  if (num_layers < 1) throw ConfigError("rewiring needs at least one layer");
  if (alpha < 0.0 || alpha > 1.0) throw ConfigError("alpha must lie in [0, 1]");
  if (p_threshold < 0.0 || p_threshold >= 1.0) {
    throw ConfigError("p_threshold must lie in [0, 1)");
  }
  RewiringState s;
  s.alpha = alpha;
  s.p_threshold = p_threshold;
  s.skip_source = source;
  s.active.assign(static_cast<std::size_t>(num_layers), false);
  s.eligible.assign(static_cast<std::size_t>(num_layers), false);
  for (Index l = 1; l < num_layers; ++l) {
    s.eligible[l] = l + 1 < num_layers || final_layer_eligible;
  }
  return s;
}

RewiringState record_baseline(RewiringState state, const FlowReport& flow) {
  if (state.baseline_recorded) throw StateError("rewiring baseline already recorded");
  if (static_cast<Index>(flow.per_layer.size()) != state.num_layers()) {
    throw DimensionError("flow report has " + std::to_string(flow.per_layer.size()) +
                         " layers, rewiring state has " +
                         std::to_string(state.num_layers()));
  }
  state.baseline_flow = flow.per_layer;
  state.baseline_recorded = true;
  for (Index l = 0; l < state.num_layers(); ++l) {
    if (state.eligible[l] && state.baseline_flow[l] == 0.0) {
      state.warnings.push_back("layer " + std::to_string(l + 1) +
                               " has zero baseline gradient flow; its skip can never trigger");
    }
  }
  return state;
}

RewiringState update_skips(RewiringState state, const FlowReport& flow, int epoch) {
  if (!state.baseline_recorded) throw StateError("rewiring baseline not recorded");
  if (static_cast<Index>(flow.per_layer.size()) != state.num_layers()) {
    throw DimensionError("flow report length does not match rewiring state");
  }
  for (Index l = 0; l < state.num_layers(); ++l) {
    if (!state.eligible[l] || state.active[l]) continue;
    const double threshold = state.p_threshold * state.baseline_flow[l];
    if (flow.per_layer[l] < threshold) {
      state.active[l] = true;
      state.activation_log.push_back({epoch, l, state.baseline_flow[l], flow.per_layer[l]});
    }
  }
  return state;
}

Matrix skip_term(const RewiringState& state, const TapeCache& tape, Index layer) {
  if (layer < 0 || layer >= state.num_layers() || !state.active[layer]) {
    throw StateError("skip_term requested for inactive layer " + std::to_string(layer + 1));
  }
  return skip_source_term(state.alpha, state.skip_source, tape, layer);
}

}  // namespace gcnlab
