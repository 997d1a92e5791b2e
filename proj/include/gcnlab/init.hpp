#pragma once

#include <optional>
#include <string_view>

#include "gcnlab/common.hpp"
#include "gcnlab/graph.hpp"

namespace gcnlab {

enum class InitKind { glorot_uniform, iso_uniform, iso_gaussian, iso_orthogonal };

struct InitScheme {
  InitKind kind = InitKind::glorot_uniform;
  std::uint64_t seed = 1;
};

std::string_view to_string(InitKind kind);
std::optional<InitKind> parse_init_kind(std::string_view name);

// Target squared column norm N^2 / sum_{i,j}(d_i + 1)(d_j + 1).
double iso_magnitude(const GraphBundle& graph);

// Half-width b of U[-b, b] with per-entry variance N^2 / (C' * S2).
double iso_uniform_bound(const GraphBundle& graph, Index out_dim);

// Per-entry variance shared by the isometric uniform and Gaussian draws.
double iso_variance(const GraphBundle& graph, Index out_dim);

double glorot_bound(Index in_dim, Index out_dim);

/// Draws an out_dim x in_dim weight matrix. Entries are consumed from `rng`
/// in column-major order, so a run that initializes layers in sequence from
/// one generator is reproducible from its seed alone.
///
/// iso_orthogonal draws a Gaussian matrix, orthonormalizes its columns and
/// rescales each to squared norm iso_magnitude(graph); it throws ConfigError
/// when out_dim < in_dim since the columns cannot then be orthogonal.
Matrix initialize(Index out_dim, Index in_dim, InitKind kind,
                  const GraphBundle& graph, Rng& rng);

// Convenience form seeding a fresh generator from the scheme.
Matrix initialize(Index out_dim, Index in_dim, const InitScheme& scheme,
                  const GraphBundle& graph);

}  // namespace gcnlab
