#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include "gcnlab/graph.hpp"

namespace gcnlab {

// Canonical on-disk bundle: a directory holding
//   manifest.json          counts, source directedness, file names + SHA-256
//   edges.tsv              "i<TAB>j" per line, zero-based, read as undirected
//   features.csv           N rows x C comma-separated reals
//   labels.txt             one integer per line
//   split_{train,val,test}.txt  one node index per line
// All UTF-8, LF line endings, no header rows.
struct BundleFile {
  std::string path;
  std::string sha256;
};

struct BundleManifest {
  std::string name;
  Index num_nodes = 0;
  Index num_features = 0;
  int num_classes = 0;
  bool directed_source = false;
  std::optional<Index> num_edges_directed;
  std::optional<Index> num_edges_undirected;
  BundleFile edges;
  BundleFile features;
  BundleFile labels;
  BundleFile split_train;
  BundleFile split_val;
  BundleFile split_test;
};

std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);

BundleManifest read_manifest(const std::filesystem::path& dir);

// Throws LoadError on missing files, checksum or count mismatches, malformed
// lines and out-of-range indices.
GraphBundle load_bundle(const std::filesystem::path& dir);

// Writes the bundle and its manifest. Features are written in shortest
// round-trip decimal form, so loading gives back identical values.
BundleManifest save_bundle(const GraphBundle& graph, const std::filesystem::path& dir,
                           std::string_view name, bool directed_source = false);

enum class SyntheticKind { ring, path, star, erdos_renyi, stochastic_block };

std::optional<SyntheticKind> parse_synthetic_kind(std::string_view name);

struct SyntheticParams {
  Index num_nodes = 16;
  double edge_prob = 0.1;      // erdos_renyi
  int num_blocks = 2;          // stochastic_block (also the class count there)
  double p_in = 0.3;           // stochastic_block
  double p_out = 0.02;         // stochastic_block
  Index num_features = 8;
  int num_classes = 2;         // ignored for stochastic_block
  double feature_signal = 1.0; // class-centroid scale added to N(0, 1) noise
  double train_fraction = 0.3;
  double val_fraction = 0.2;
};

/// Deterministic test graph. Labels are the community for stochastic_block
/// and node_index % num_classes otherwise; features are a per-class Gaussian
/// centroid times feature_signal plus unit Gaussian noise; splits come from a
/// seeded shuffle.
GraphBundle generate_synthetic(SyntheticKind kind, const SyntheticParams& params,
                               std::uint64_t seed);

/// Opens a dataset reference: a bundle directory, or a synthetic spec
///   synth:<kind>:<nodes>[,key=value...]
/// with kind in {ring, path, star, er, sbm} and keys p, blocks, p_in, p_out,
/// features, classes, signal, train, val, seed.
GraphBundle open_dataset(std::string_view ref);

}  // namespace gcnlab
