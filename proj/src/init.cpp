#include "gcnlab/init.hpp"

#include <cmath>

#include <Eigen/QR>

namespace gcnlab {

std::string_view to_string(InitKind kind) {
  switch (kind) {
    case InitKind::glorot_uniform: return "glorot";
    case InitKind::iso_uniform: return "iso";
    case InitKind::iso_gaussian: return "iso-gauss";
    case InitKind::iso_orthogonal: return "iso-ortho";
  }
  return "?";
}

std::optional<InitKind> parse_init_kind(std::string_view name) {
  if (name == "glorot" || name == "glorot_uniform") return InitKind::glorot_uniform;
  if (name == "iso" || name == "iso_uniform") return InitKind::iso_uniform;
  if (name == "iso-gauss" || name == "iso_gaussian") return InitKind::iso_gaussian;
  if (name == "iso-ortho" || name == "iso_orthogonal") return InitKind::iso_orthogonal;
  return std::nullopt;
}

double iso_magnitude(const GraphBundle& graph) {
  const double n = static_cast<double>(graph.num_nodes());
  return n * n / degree_sum_statistics(graph).s2;
}

double iso_variance(const GraphBundle& graph, Index out_dim) {
  if (out_dim < 1) throw ConfigError("output dimension must be >= 1");
  return iso_magnitude(graph) / static_cast<double>(out_dim);
}

double iso_uniform_bound(const GraphBundle& graph, Index out_dim) {
  return std::sqrt(3.0 * iso_variance(graph, out_dim));
}

double glorot_bound(Index in_dim, Index out_dim) {
  return std::sqrt(6.0 / static_cast<double>(in_dim + out_dim));
}

namespace {

Matrix uniform_matrix(Index rows, Index cols, double bound, Rng& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  Matrix w(rows, cols);
  for (Index k = 0; k < w.size(); ++k) w.data()[k] = dist(rng);
  return w;
}

Matrix gaussian_matrix(Index rows, Index cols, double stddev, Rng& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  Matrix w(rows, cols);
  for (Index k = 0; k < w.size(); ++k) w.data()[k] = dist(rng);
  return w;
}

}  // namespace

Matrix initialize(Index out_dim, Index in_dim, InitKind kind,
                  const GraphBundle& graph, Rng& rng) {
  if (out_dim < 1 || in_dim < 1) {
    throw ConfigError("weight shape " + shape_str(out_dim, in_dim) + " is empty");
  }
  switch (kind) {
    case InitKind::glorot_uniform:
      return uniform_matrix(out_dim, in_dim, glorot_bound(in_dim, out_dim), rng);
    case InitKind::iso_uniform:
      return uniform_matrix(out_dim, in_dim, iso_uniform_bound(graph, out_dim), rng);
    case InitKind::iso_gaussian:
      return gaussian_matrix(out_dim, in_dim,
                             std::sqrt(iso_variance(graph, out_dim)), rng);
    case InitKind::iso_orthogonal: {
      if (out_dim < in_dim) {
        throw ConfigError("iso-ortho needs out_dim >= in_dim for orthogonal columns, got " +
                          shape_str(out_dim, in_dim));
      }
      Matrix draw = gaussian_matrix(out_dim, in_dim, 1.0, rng);
      Eigen::HouseholderQR<Matrix> qr(draw);
      Matrix q = qr.householderQ() * Matrix::Identity(out_dim, in_dim);
      q *= std::sqrt(iso_magnitude(graph));
      return q;
    }
  }
  throw ConfigError("unknown init kind");
}

Matrix initialize(Index out_dim, Index in_dim, const InitScheme& scheme,
                  const GraphBundle& graph) {
  Rng rng(scheme.seed);
  return initialize(out_dim, in_dim, scheme.kind, graph, rng);
}

}  // namespace gcnlab
