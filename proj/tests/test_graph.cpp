#include "doctest.h"

#include "oracles.hpp"

using namespace gcnlab;
using namespace gcnlab::testing;

TEST_CASE("propagation operator on tiny graphs") {
  SUBCASE("single node is the 1x1 identity") {
    const auto op = build_propagation_operator(single_node()).to_dense();
    CHECK(op.rows() == 1);
    CHECK(op(0, 0) == 1.0);
  }
  SUBCASE("one edge gives all entries 1/2") {
    const auto op = build_propagation_operator(two_nodes()).to_dense();
    CHECK((op.array() - 0.5).abs().maxCoeff() < 1e-15);
  }
  SUBCASE("triangle gives all entries 1/3") {
    const auto op = build_propagation_operator(triangle()).to_dense();
    CHECK((op.array() - 1.0 / 3.0).abs().maxCoeff() < 1e-15);
  }
}

TEST_CASE("propagation operator structure") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto g = random_graph(20, 0.2, 3, 2, seed);
    const auto op = build_propagation_operator(g);
    const Matrix dense = op.to_dense();
    CHECK((dense - dense.transpose()).cwiseAbs().maxCoeff() == 0.0);
    CHECK((dense - dense_propagation(g)).cwiseAbs().maxCoeff() < 1e-15);
    for (Index i = 0; i < g.num_nodes(); ++i) {
      CHECK(dense(i, i) == doctest::Approx(1.0 / (g.degree(i) + 1)).epsilon(1e-15));
      // Columns sorted within each row.
      for (Index k = op.row_offsets()[i] + 1; k < op.row_offsets()[i + 1]; ++k) {
        CHECK(op.col_indices()[k - 1] < op.col_indices()[k]);
      }
    }
    CHECK(dense.maxCoeff() <= 1.0);
    CHECK(((dense.array() == 0.0) || (dense.array() > 0.0)).all());
  }
}

TEST_CASE("spectrum lies in (-1, 1] and row sums are one on regular graphs") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto g = random_graph(24, 0.15, 2, 2, seed);
    const Eigen::SelfAdjointEigenSolver<Matrix> eig(build_propagation_operator(g).to_dense());
    CHECK(eig.eigenvalues().maxCoeff() <= 1.0 + 1e-12);
    CHECK(eig.eigenvalues().minCoeff() > -1.0);
    CHECK(eig.eigenvalues().maxCoeff() == doctest::Approx(1.0).epsilon(1e-12));
  }
  // ring and complete graphs are regular
  std::vector<Edge> ring, complete;
  for (Index i = 0; i < 9; ++i) ring.emplace_back(i, (i + 1) % 9);
  for (Index i = 0; i < 6; ++i)
    for (Index j = i + 1; j < 6; ++j) complete.emplace_back(i, j);
  for (const auto& g : {graph_from(9, ring), graph_from(6, complete), triangle()}) {
    const Vector sums = build_propagation_operator(g).to_dense().rowwise().sum();
    CHECK((sums.array() - 1.0).abs().maxCoeff() < 1e-14);
  }
  // irregular graphs: a star's leaves sum below one and its hub above
  const auto star = graph_from(5, {{0, 1}, {0, 2}, {0, 3}, {0, 4}});
  const Vector sums = build_propagation_operator(star).to_dense().rowwise().sum();
  CHECK(sums(1) == doctest::Approx(0.5 + 1.0 / std::sqrt(10.0)).epsilon(1e-15));
  CHECK(sums(0) == doctest::Approx(0.2 + 4.0 / std::sqrt(10.0)).epsilon(1e-15));
}

TEST_CASE("isolated node keeps only its self-loop") {
  const auto g = graph_from(3, {{0, 1}});
  const auto op = build_propagation_operator(g).to_dense();
  CHECK(op(2, 2) == 1.0);
  CHECK(op.row(2).sum() == 1.0);
}

TEST_CASE("degree sum statistics") {
  SUBCASE("ring of four") {
    const auto s = degree_sum_statistics(ring4());
    CHECK(s.s1 == 12.0);
    CHECK(s.s2 == 144.0);
    CHECK(literal_s2(ring4()) == 144u);
  }
  SUBCASE("single node") {
    const auto s = degree_sum_statistics(single_node());
    CHECK(s.s1 == 1.0);
    CHECK(s.s2 == 1.0);
  }
  SUBCASE("two nodes") {
    const auto s = degree_sum_statistics(two_nodes());
    CHECK(s.s1 == 4.0);
    CHECK(s.s2 == 16.0);
    CHECK(literal_s2(two_nodes()) == 16u);
  }
  SUBCASE("factorized S2 equals the literal double sum") {
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
      const auto g = random_graph(1 + static_cast<Index>(seed * 3), 0.3, 1, 1, seed);
      CHECK(degree_sum_statistics(g).s2 == static_cast<double>(literal_s2(g)));
    }
  }
}

TEST_CASE("spmm") {
  SUBCASE("identity features on the two-node graph") {
    const auto op = build_propagation_operator(two_nodes());
    CHECK((spmm(op, Matrix::Identity(2, 2)).array() - 0.5).abs().maxCoeff() < 1e-15);
  }
  SUBCASE("zero in, zero out") {
    const auto op = build_propagation_operator(triangle());
    CHECK(spmm(op, Matrix::Zero(4, 3)).isZero(0.0));
  }
  SUBCASE("matches the dense product") {
    Rng rng(3);
    std::normal_distribution<double> gauss;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const Index n = 1 + static_cast<Index>((seed * 7) % 64);
      const auto g = random_graph(n, 0.2, 1, 1, seed);
      Matrix x(5, n);
      for (Index k = 0; k < x.size(); ++k) x.data()[k] = gauss(rng);
      const Matrix expected = x * dense_propagation(g);
      CHECK((spmm(build_propagation_operator(g), x) - expected).cwiseAbs().maxCoeff() < 1e-12);
    }
  }
  SUBCASE("linear in its dense argument") {
    const auto g = random_graph(12, 0.3, 1, 1, 5);
    const auto op = build_propagation_operator(g);
    const Matrix a = Matrix::Random(3, 12), b = Matrix::Random(3, 12);
    CHECK((spmm(op, 2.0 * a - b) - (2.0 * spmm(op, a) - spmm(op, b))).cwiseAbs().maxCoeff() < 1e-14);
  }
  SUBCASE("dimension mismatch throws") {
    const auto op = build_propagation_operator(triangle());
    CHECK_THROWS_AS(spmm(op, Matrix::Zero(2, 4)), DimensionError);
  }
}

TEST_CASE("graph bundle construction") {
  SUBCASE("duplicate and reversed edges collapse") {
    const auto g = graph_from(3, {{0, 1}, {1, 0}, {0, 1}, {1, 2}});
    CHECK(g.degrees() == std::vector<Index>{1, 2, 1});
    CHECK(g.num_undirected_edges() == 2);
    CHECK(g.num_directed_edges() == 4);
  }
  SUBCASE("self-loops are not stored") {
    const auto g = graph_from(2, {{0, 0}, {0, 1}});
    CHECK(g.degrees() == std::vector<Index>{1, 1});
  }
  SUBCASE("symmetric storage and degree sum") {
    const auto g = random_graph(30, 0.2, 1, 1, 9);
    Index total = 0;
    for (Index i = 0; i < g.num_nodes(); ++i) {
      total += g.degree(i);
      CHECK(static_cast<Index>(g.neighbors(i).size()) == g.degree(i));
      for (Index j : g.neighbors(i)) {
        const auto back = g.neighbors(j);
        CHECK(std::find(back.begin(), back.end(), i) != back.end());
      }
    }
    CHECK(total == 2 * g.num_undirected_edges());
  }
  SUBCASE("invalid inputs") {
    const Matrix x = Matrix::Zero(1, 3);
    CHECK_THROWS_AS(GraphBundle::from_edges(3, std::vector<Edge>{{0, 3}}, x, {0, 0, 0}, {}),
                    DimensionError);
    CHECK_THROWS_AS(GraphBundle::from_edges(3, {}, Matrix::Zero(1, 2), {0, 0, 0}, {}),
                    DimensionError);
    Splits overlap;
    overlap.train = {0, 1};
    overlap.test = {1};
    CHECK_THROWS_AS(GraphBundle::from_edges(3, {}, x, {0, 0, 0}, overlap), ConfigError);
    CHECK_THROWS_AS(GraphBundle::from_edges(3, {}, x, {0, 2, 0}, {}, 2), ConfigError);
  }
}
