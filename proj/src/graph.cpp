#include "gcnlab/graph.hpp"

#include <algorithm>
#include <cmath>

namespace gcnlab {

namespace {

void check_index_set(const std::vector<Index>& set, Index n, const char* name,
                     std::vector<char>& owner, char tag) {
  for (Index i : set) {
    if (i < 0 || i >= n) {
      throw DimensionError(std::string("split '") + name + "' index " +
                           std::to_string(i) + " out of range [0, " +
                           std::to_string(n) + ")");
    }
    if (owner[i] != 0) {
      throw ConfigError(std::string("split '") + name + "' index " +
                        std::to_string(i) +
                        (owner[i] == tag ? " is repeated" : " overlaps another split"));
    }
    owner[i] = tag;
  }
}

}  // namespace

GraphBundle GraphBundle::from_edges(Index num_nodes, std::span<const Edge> edges,
                                    Matrix features, std::vector<int> labels,
                                    Splits splits, int num_classes) {
  if (num_nodes < 1) throw ConfigError("graph needs at least one node");
  if (features.cols() != num_nodes) {
    throw DimensionError("features have " + std::to_string(features.cols()) +
                         " columns, expected one per node (" +
                         std::to_string(num_nodes) + ")");
  }
  if (static_cast<Index>(labels.size()) != num_nodes) {
    throw DimensionError("label count " + std::to_string(labels.size()) +
                         " != node count " + std::to_string(num_nodes));
  }

  std::vector<std::vector<Index>> adjacency(static_cast<std::size_t>(num_nodes));
  for (const auto& [a, b] : edges) {
    if (a < 0 || a >= num_nodes || b < 0 || b >= num_nodes) {
      throw DimensionError("edge (" + std::to_string(a) + ", " + std::to_string(b) +
                           ") out of range for " + std::to_string(num_nodes) +
                           " nodes");
    }
    if (a == b) continue;
    adjacency[a].push_back(b);
    adjacency[b].push_back(a);
  }

  GraphBundle g;
  g.num_nodes_ = num_nodes;
  g.row_offsets_.assign(static_cast<std::size_t>(num_nodes) + 1, 0);
  g.degrees_.resize(static_cast<std::size_t>(num_nodes));
  for (Index i = 0; i < num_nodes; ++i) {
    auto& row = adjacency[i];
    std::sort(row.begin(), row.end());
    row.erase(std::unique(row.begin(), row.end()), row.end());
    g.degrees_[i] = static_cast<Index>(row.size());
    g.row_offsets_[i + 1] = g.row_offsets_[i] + g.degrees_[i];
  }
  g.col_indices_.reserve(static_cast<std::size_t>(g.row_offsets_.back()));
  for (auto& row : adjacency) {
    g.col_indices_.insert(g.col_indices_.end(), row.begin(), row.end());
  }

  int max_label = -1;
  for (int y : labels) {
    if (y < 0) throw ConfigError("negative label " + std::to_string(y));
    max_label = std::max(max_label, y);
  }
  if (num_classes == 0) num_classes = max_label + 1;
  if (max_label >= num_classes) {
    throw ConfigError("label " + std::to_string(max_label) + " outside [0, " +
                      std::to_string(num_classes) + ")");
  }

  std::vector<char> owner(static_cast<std::size_t>(num_nodes), 0);
  check_index_set(splits.train, num_nodes, "train", owner, 1);
  check_index_set(splits.val, num_nodes, "val", owner, 2);
  check_index_set(splits.test, num_nodes, "test", owner, 3);

  g.num_classes_ = num_classes;
  g.features_ = std::move(features);
  g.labels_ = std::move(labels);
  g.splits_ = std::move(splits);
  return g;
}

std::vector<Edge> GraphBundle::edge_list() const {
  std::vector<Edge> out;
  out.reserve(static_cast<std::size_t>(num_undirected_edges()));
  for (Index i = 0; i < num_nodes_; ++i) {
    for (Index j : neighbors(i)) {
      if (i < j) out.emplace_back(i, j);
    }
  }
  return out;
}

PropagationOperator build_propagation_operator(const GraphBundle& graph) {
  const Index n = graph.num_nodes();
  PropagationOperator op;
  op.size_ = n;
  op.row_offsets_.assign(static_cast<std::size_t>(n) + 1, 0);
  op.col_indices_.reserve(static_cast<std::size_t>(graph.num_directed_edges() + n));
  op.values_.reserve(op.col_indices_.capacity());

  std::vector<double> inv_sqrt(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    inv_sqrt[i] = 1.0 / std::sqrt(static_cast<double>(graph.degree(i) + 1));
  }

  for (Index i = 0; i < n; ++i) {
    bool diagonal_done = false;
    auto emit_diagonal = [&] {
      op.col_indices_.push_back(i);
      op.values_.push_back(1.0 / static_cast<double>(graph.degree(i) + 1));
      diagonal_done = true;
    };
    for (Index j : graph.neighbors(i)) {
      if (!diagonal_done && j > i) emit_diagonal();
      op.col_indices_.push_back(j);
      op.values_.push_back(inv_sqrt[i] * inv_sqrt[j]);
    }
    if (!diagonal_done) emit_diagonal();
    op.row_offsets_[i + 1] = static_cast<Index>(op.col_indices_.size());
  }
  return op;
}

Matrix PropagationOperator::to_dense() const {
  Matrix dense = Matrix::Zero(size_, size_);
  for (Index i = 0; i < size_; ++i) {
    for (Index k = row_offsets_[i]; k < row_offsets_[i + 1]; ++k) {
      dense(i, col_indices_[k]) = values_[k];
    }
  }
  return dense;
}

DegreeSums degree_sum_statistics(const GraphBundle& graph) {
  unsigned __int128 s1 = 0;
  for (Index d : graph.degrees()) s1 += static_cast<unsigned __int128>(d + 1);
  const unsigned __int128 s2 = s1 * s1;
  return {static_cast<double>(s1), static_cast<double>(s2)};
}

Matrix spmm(const PropagationOperator& op, const Matrix& dense) {
  if (dense.cols() != op.size()) {
    throw DimensionError("spmm: dense operand is " +
                         shape_str(dense.rows(), dense.cols()) + ", operator is " +
                         shape_str(op.size(), op.size()));
  }
  Matrix out(dense.rows(), dense.cols());
  const auto& offsets = op.row_offsets();
  const auto& cols = op.col_indices();
  const auto& vals = op.values();
  // Column j of the result only reads row j of the operator, so columns are
  // independent and written exactly once.
  for (Index j = 0; j < op.size(); ++j) {
    auto out_col = out.col(j);
    out_col.setZero();
    for (Index k = offsets[j]; k < offsets[j + 1]; ++k) {
      out_col.noalias() += vals[k] * dense.col(cols[k]);
    }
  }
  return out;
}

}  // namespace gcnlab
