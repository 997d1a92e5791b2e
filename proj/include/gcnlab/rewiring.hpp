#pragma once

#include <string>
#include <vector>

#include "gcnlab/autodiff.hpp"
#include "gcnlab/diagnostics.hpp"
#include "gcnlab/model.hpp"

namespace gcnlab {

struct SkipEvent {
  int epoch = 0;
  Index layer = 0;  // 0-based
  double baseline = 0.0;
  double flow = 0.0;
};

// Gradient-guided rewiring: a layer whose gradient norm falls below
// p_threshold times its value after the first step gets a skip connection,
// and keeps it for the rest of the run.
struct RewiringState {
  std::vector<double> baseline_flow;
  bool baseline_recorded = false;
  std::vector<bool> active;
  // Layers the rule may switch on. Layer 0 is never eligible.
  std::vector<bool> eligible;
  double alpha = 0.1;
  double p_threshold = 0.5;
  SkipSource skip_source = SkipSource::first_layer_output;
  std::vector<SkipEvent> activation_log;
  std::vector<std::string> warnings;

  Index num_layers() const { return static_cast<Index>(active.size()); }
  Index num_active() const;
};

// Every layer after the first is eligible, except the classifier unless
// `final_layer_eligible` is set (only meaningful when widths allow it).
RewiringState make_rewiring_state(Index num_layers, double alpha, double p_threshold,
                                  SkipSource source = SkipSource::first_layer_output,
                                  bool final_layer_eligible = false);

// Throws StateError if a baseline was already recorded. A zero baseline is
// kept but noted in `warnings`: that layer can never trigger.
RewiringState record_baseline(RewiringState state, const FlowReport& flow);

// Throws StateError if no baseline was recorded.
RewiringState update_skips(RewiringState state, const FlowReport& flow, int epoch);

// alpha times the configured skip source for an active layer.
Matrix skip_term(const RewiringState& state, const TapeCache& tape, Index layer);

}  // namespace gcnlab
