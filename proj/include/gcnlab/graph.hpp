#pragma once

#include <span>
#include <utility>
#include <vector>

#include "gcnlab/common.hpp"

namespace gcnlab {

struct Splits {
  std::vector<Index> train;
  std::vector<Index> val;
  std::vector<Index> test;
};

using Edge = std::pair<Index, Index>;

// Immutable simple undirected graph with node features, labels and a
// transductive split. Edges are stored in CSR form with both directions
// present and column indices sorted within each row.
class GraphBundle {
 public:
  // Symmetrizes and de-duplicates `edges`; self-loops are dropped. If
  // num_classes is 0 it is inferred as max(label) + 1.
  static GraphBundle from_edges(Index num_nodes, std::span<const Edge> edges,
                                Matrix features, std::vector<int> labels,
                                Splits splits, int num_classes = 0);

  Index num_nodes() const { return num_nodes_; }
  Index num_features() const { return features_.rows(); }
  int num_classes() const { return num_classes_; }

  // Number of stored ordered pairs (each undirected edge counts twice).
  Index num_directed_edges() const {
    return static_cast<Index>(col_indices_.size());
  }
  Index num_undirected_edges() const { return num_directed_edges() / 2; }

  const std::vector<Index>& row_offsets() const { return row_offsets_; }
  const std::vector<Index>& col_indices() const { return col_indices_; }
  std::span<const Index> neighbors(Index node) const {
    return {col_indices_.data() + row_offsets_[node],
            col_indices_.data() + row_offsets_[node + 1]};
  }
  const std::vector<Index>& degrees() const { return degrees_; }
  Index degree(Index node) const { return degrees_[node]; }

  const Matrix& features() const { return features_; }
  const std::vector<int>& labels() const { return labels_; }
  const Splits& splits() const { return splits_; }

  // Undirected edge list with i < j, in CSR order.
  std::vector<Edge> edge_list() const;

 private:
  GraphBundle() = default;

  Index num_nodes_ = 0;
  int num_classes_ = 0;
  std::vector<Index> row_offsets_;
  std::vector<Index> col_indices_;
  std::vector<Index> degrees_;
  Matrix features_;
  std::vector<int> labels_;
  Splits splits_;
};

// Symmetrically normalized self-looped adjacency
//   D~^{-1/2} (A + I) D~^{-1/2},  D~ = D + I
// stored as CSR with sorted columns (the diagonal is an explicit entry).
class PropagationOperator {
 public:
  Index size() const { return size_; }
  const std::vector<Index>& row_offsets() const { return row_offsets_; }
  const std::vector<Index>& col_indices() const { return col_indices_; }
  const std::vector<double>& values() const { return values_; }
  Index nnz() const { return static_cast<Index>(values_.size()); }

  Matrix to_dense() const;

  friend PropagationOperator build_propagation_operator(const GraphBundle&);

 private:
  Index size_ = 0;
  std::vector<Index> row_offsets_;
  std::vector<Index> col_indices_;
  std::vector<double> values_;
};

PropagationOperator build_propagation_operator(const GraphBundle& graph);

struct DegreeSums {
  double s1 = 0;  // sum_i (d_i + 1)
  double s2 = 0;  // sum_{i,j} (d_i + 1)(d_j + 1)
};

// S2 is evaluated as S1^2 in integer arithmetic.
DegreeSums degree_sum_statistics(const GraphBundle& graph);

// dense * A_hat, i.e. every output column j mixes the input columns of j's
// neighbourhood. Relies on A_hat being symmetric.
Matrix spmm(const PropagationOperator& op, const Matrix& dense);

}  // namespace gcnlab
