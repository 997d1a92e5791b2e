#include "gcnlab/diagnostics.hpp"

#include <cmath>

namespace gcnlab {

FlowReport gradient_flow(const GradientSet& grads, double p) {
  if (grads.weights.empty()) throw ConfigError("gradient flow of an empty gradient set");
  if (!(p >= 1.0)) throw ConfigError("norm order p must be >= 1");
  FlowReport report;
  report.p = p;
  double sum = 0.0;
  for (const auto& g : grads.weights) {
    double norm = 0.0;
    if (p == 2.0) {
      norm = g.norm();
    } else if (p == 1.0) {
      norm = g.cwiseAbs().sum();
    } else {
      norm = std::pow(g.array().abs().pow(p).sum(), 1.0 / p);
    }
    report.per_layer.push_back(norm);
    sum += norm;
  }
  report.mean_flow = sum / static_cast<double>(report.per_layer.size());
  return report;
}

namespace {

void check_columns(const Matrix& x, const GraphBundle& graph) {
  if (x.cols() != graph.num_nodes()) {
    throw DimensionError("energy input has " + std::to_string(x.cols()) +
                         " columns, graph has " + std::to_string(graph.num_nodes()) +
                         " nodes");
  }
}

}  // namespace

double dirichlet_energy(const Matrix& x, const GraphBundle& graph) {
  check_columns(x, graph);
  const Index n = graph.num_nodes();
  Vector inv_sqrt(n);
  for (Index i = 0; i < n; ++i) {
    inv_sqrt(i) = 1.0 / std::sqrt(static_cast<double>(graph.degree(i) + 1));
  }
  double total = 0.0;
  for (Index i = 0; i < n; ++i) {
    for (Index j : graph.neighbors(i)) {
      total += (x.col(i) * inv_sqrt(i) - x.col(j) * inv_sqrt(j)).squaredNorm();
    }
  }
  return 0.5 * total;
}

double dirichlet_energy_trace(const Matrix& x, const GraphBundle& graph) {
  check_columns(x, graph);
  const Index n = graph.num_nodes();
  // Tr(X L X^T) = sum_{i,j} L_ij <x_i, x_j>
  double total = 0.0;
  for (Index i = 0; i < n; ++i) {
    const double di = static_cast<double>(graph.degree(i));
    total += di / (di + 1.0) * x.col(i).squaredNorm();
    for (Index j : graph.neighbors(i)) {
      const double dj = static_cast<double>(graph.degree(j));
      total -= x.col(i).dot(x.col(j)) / std::sqrt((di + 1.0) * (dj + 1.0));
    }
  }
  return total;
}

EnergyReport energy_report(const TapeCache& tape, const Matrix& logits,
                           const GraphBundle& graph) {
  EnergyReport report;
  for (const auto& h : tape.outputs) report.per_layer.push_back(dirichlet_energy(h, graph));
  report.per_layer.push_back(dirichlet_energy(logits, graph));
  return report;
}

}  // namespace gcnlab
