#pragma once

#include <vector>

#include "gcnlab/autodiff.hpp"
#include "gcnlab/common.hpp"
#include "gcnlab/graph.hpp"

namespace gcnlab {

struct FlowReport {
  std::vector<double> per_layer;  // ||g_l||_p of each flattened weight gradient
  double mean_flow = 0.0;
  double p = 2.0;
};

struct EnergyReport {
  std::vector<double> per_layer;
};

// Entrywise p-norm per layer and their mean across layers.
FlowReport gradient_flow(const GradientSet& grads, double p = 2.0);

// Dirichlet energy against the augmented normalized Laplacian:
//   1/2 * sum over ordered edges (i, j) of
//         || x_i / sqrt(1 + d_i) - x_j / sqrt(1 + d_j) ||^2
double dirichlet_energy(const Matrix& x, const GraphBundle& graph);

// Same quantity as Tr(X L X^T), L = D~^{-1/2} (D - A) D~^{-1/2}.
double dirichlet_energy_trace(const Matrix& x, const GraphBundle& graph);

// Energy of every hidden output in `tape` followed by the logits.
EnergyReport energy_report(const TapeCache& tape, const Matrix& logits,
                           const GraphBundle& graph);

}  // namespace gcnlab
