#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "segia/defense.hpp"
#include "segia/error.hpp"
#include "segia/graph.hpp"

using namespace segia;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("segia_graph_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

void write(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

AttributedGraph tiny(std::size_t n, std::vector<Edge> edges) {
  Matrix x(n, 2, 1.0);
  std::vector<int> labels(n, 0);
  return AttributedGraph::build(Topology(n, edges), x, labels, {}, {}, 1);
}

}  // namespace

TEST_CASE("topology canonicalizes edges") {
  std::vector<std::string> warnings;
  Topology t(4, std::vector<Edge>{{1, 0}, {0, 1}, {2, 2}, {3, 2}}, &warnings);
  CHECK(t.n_edges() == 2);
  CHECK(t.edges()[0] == Edge{0, 1});
  CHECK(t.edges()[1] == Edge{2, 3});
  CHECK(warnings.size() == 1);
  CHECK(t.has_edge(1, 0));
  CHECK_FALSE(t.has_edge(2, 2));
  CHECK(t.degree(2) == 1);
  CHECK_THROWS_AS(Topology(2, std::vector<Edge>{{0, 5}}), ValidationError);
}

TEST_CASE("load_graph reads the triangle and reports malformed input") {
  const auto dir = scratch("load");
  const auto files = GraphFiles::in(dir);
  write(files.edges, "src,dst\n0,1\n1,2\n0,2\n0,1\n0,0\n");
  write(files.features, "1.0,0.5\n-2,3\n0.25,1e-3\n");
  write(files.labels, "node,label\n0,0\n1,1\n2,0\n");
  write(files.splits, R"({"labeled": [0, 1], "targets": [2]})");
  const auto g = load_graph(files);
  CHECK(g.n_nodes() == 3);
  CHECK(g.n_edges() == 3);
  CHECK(g.n_classes() == 2);
  CHECK(g.warnings().size() == 1);
  CHECK(g.features()(1, 0) == -2.0);
  CHECK(g.feature_range()[0] == FeatureBounds{-2.0, 1.0});

  SUBCASE("malformed row names the line") {
    write(files.edges, "src,dst\n0,1\n1,x\n");
    try {
      load_graph(files);
      FAIL("expected a parse error");
    } catch (const ParseError& e) {
      CHECK(std::string(e.what()).find(":3") != std::string::npos);
    }
  }
  SUBCASE("label outside the declared class count") {
    CHECK_THROWS_AS(load_graph(files, 1), ValidationError);
  }
  SUBCASE("feature width mismatch") {
    write(files.features, "1.0,0.5\n-2\n0.25,1e-3\n");
    CHECK_THROWS_AS(load_graph(files), DimensionError);
  }
}

TEST_CASE("save_graph and load_graph round-trip bit-exactly") {
  std::mt19937_64 rng(5);
  const auto g = oracle::random_graph(30, 4, 3, rng);
  const auto dir = scratch("roundtrip");
  save_graph(g, GraphFiles::in(dir));
  const auto back = load_graph(GraphFiles::in(dir), g.n_classes());
  CHECK(back.topology() == g.topology());
  CHECK(back.features() == g.features());
  CHECK(back.labels() == g.labels());
  CHECK(back.labeled() == g.labeled());
  CHECK(back.targets() == g.targets());
  CHECK(back.fingerprint() == g.fingerprint());
}

TEST_CASE("attributed graph validation") {
  Topology t(3, std::vector<Edge>{{0, 1}});
  Matrix x(3, 2);
  CHECK_THROWS_AS(AttributedGraph::build(t, Matrix(2, 2), {0, 0, 0}, {}, {}), DimensionError);
  CHECK_THROWS_AS(AttributedGraph::build(t, x, {0, 0}, {}, {}), DimensionError);
  CHECK_THROWS_AS(AttributedGraph::build(t, x, {0, 3, 0}, {}, {}, 2), ValidationError);
  CHECK_THROWS_AS(AttributedGraph::build(t, x, {0, 1, 0}, {0}, {0}), ValidationError);
  CHECK_THROWS_AS(AttributedGraph::build(t, x, {0, 1, 0}, {7}, {}), ValidationError);
  x(1, 1) = std::nan("");
  CHECK_THROWS_AS(AttributedGraph::build(t, x, {0, 1, 0}, {}, {}), ValidationError);
}

TEST_CASE("normalized adjacency closed forms") {
  SUBCASE("single edge") {
    const auto a = normalize_adjacency(Topology(2, std::vector<Edge>{{0, 1}})).matrix.to_dense();
    for (double v : a.values()) CHECK(v == doctest::Approx(0.5).epsilon(1e-15));
  }
  SUBCASE("triangle") {
    const auto a = normalize_adjacency(Topology(3, std::vector<Edge>{{0, 1}, {1, 2}, {0, 2}})).matrix;
    for (double v : a.values()) CHECK(std::abs(v - 1.0 / 3.0) < 1e-15);
  }
  SUBCASE("path") {
    const auto adj = normalize_adjacency(Topology(3, std::vector<Edge>{{0, 1}, {1, 2}}));
    CHECK(std::abs(adj.matrix.at(0, 1) - 0.408248290463863) < 1e-12);
    CHECK(adj.degrees == std::vector<double>{2.0, 3.0, 2.0});
  }
}

TEST_CASE("normalized adjacency matches the dense reference on random graphs") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 25; ++trial) {
    const std::size_t n = 2 + static_cast<std::size_t>(trial) * 2;
    const auto t = oracle::random_connected(n, 0.2, rng);
    const auto adj = normalize_adjacency(t);
    CHECK(oracle::max_diff(oracle::normalized(t), adj.matrix.to_dense()) < 1e-12);
    const auto dense = adj.matrix.to_dense();
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        CHECK(dense(i, j) == dense(j, i));
        CHECK(dense(i, j) <= 1.0);
      }
  }
}

TEST_CASE("largest connected component") {
  SUBCASE("sizes 4 and 2") {
    const auto g = tiny(6, {{0, 1}, {1, 2}, {2, 3}, {4, 5}});
    CHECK(largest_connected_component(g).n_nodes() == 4);
  }
  SUBCASE("keeps ascending order and restricts splits") {
    Matrix x(6, 1);
    for (std::size_t u = 0; u < 6; ++u) x(u, 0) = static_cast<double>(u);
    const auto g = AttributedGraph::build(Topology(6, std::vector<Edge>{{1, 3}, {3, 5}, {0, 2}}), x,
                                          {0, 1, 0, 1, 0, 1}, {1, 2}, {5, 0});
    const auto lcc = largest_connected_component(g);
    CHECK(lcc.n_nodes() == 3);
    CHECK(lcc.features()(0, 0) == 1.0);
    CHECK(lcc.features()(2, 0) == 5.0);
    CHECK(lcc.labeled() == std::vector<node_t>{0});
    CHECK(lcc.targets() == std::vector<node_t>{2});
  }
  SUBCASE("connected graph is unchanged and the operation is idempotent") {
    std::mt19937_64 rng(3);
    const auto g = oracle::random_graph(20, 3, 2, rng);
    const auto lcc = largest_connected_component(g);
    CHECK(lcc.fingerprint() == g.fingerprint());
    CHECK(largest_connected_component(lcc).fingerprint() == lcc.fingerprint());
  }
  SUBCASE("empty graph") {
    CHECK_THROWS_AS(largest_connected_component(AttributedGraph{}), ValidationError);
  }
}

TEST_CASE("average degree follows the edges-per-node convention") {
  // Published statistics for the products LCC: N = 10,494, E = 38,872, avg. degree 3.70.
  std::vector<Edge> edges;
  const std::size_t n = 10494, e = 38872;
  for (std::size_t k = 0; edges.size() < e; ++k) {
    const auto u = static_cast<node_t>(k % n);
    const auto v = static_cast<node_t>((k % n + 1 + k / n) % n);
    if (u != v) edges.push_back({std::min(u, v), std::max(u, v)});
  }
  Topology t(n, edges);
  REQUIRE(t.n_edges() == e);
  const auto g = AttributedGraph::build(t, Matrix(n, 1), std::vector<int>(n, 0), {}, {});
  CHECK(std::round(average_degree(g) * 100.0) / 100.0 == 3.70);
}

TEST_CASE("clamp_features") {
  Matrix x = Matrix::from_rows({{25.0, 0.5, -3.0}});
  const std::vector<FeatureBounds> range{{-20.0, 20.0}, {-1.0, 1.0}, {-1.0, 1.0}};
  const auto y = clamp_features(x, range);
  CHECK(y(0, 0) == 20.0);
  CHECK(y(0, 1) == 0.5);
  CHECK(y(0, 2) == -1.0);
  CHECK_THROWS_AS(clamp_features(x, std::vector<FeatureBounds>{{0, 1}}), DimensionError);
}

TEST_CASE("synthetic generator") {
  SyntheticSpec spec;
  SUBCASE("deterministic under seed") {
    CHECK(generate_synthetic(spec).fingerprint() == generate_synthetic(spec).fingerprint());
    SyntheticSpec other = spec;
    other.seed = 1;
    CHECK(generate_synthetic(other).fingerprint() != generate_synthetic(spec).fingerprint());
  }
  SUBCASE("p_out = 0 gives no inter-block edges") {
    SyntheticSpec s = spec;
    s.c = 2;
    s.p_out = 0.0;
    const auto raw = generate_synthetic_raw(s);
    for (const auto& e : raw.topology().edges()) CHECK(raw.labels()[e.u] == raw.labels()[e.v]);
  }
  SUBCASE("intra-block density within three binomial sigmas") {
    const auto raw = generate_synthetic_raw(spec);
    std::size_t intra = 0;
    for (const auto& e : raw.topology().edges()) intra += raw.labels()[e.u] == raw.labels()[e.v];
    const double block = static_cast<double>(spec.n / spec.c);
    const double pairs = static_cast<double>(spec.c) * block * (block - 1.0) / 2.0;
    const double sigma = std::sqrt(pairs * spec.p_in * (1.0 - spec.p_in));
    CHECK(std::abs(static_cast<double>(intra) - pairs * spec.p_in) <= 3.0 * sigma);
  }
  SUBCASE("splits are disjoint, stratified and connected") {
    const auto g = generate_synthetic(spec);
    CHECK(is_connected(g.topology()));
    std::vector<int> per_class(spec.c, 0);
    for (node_t u : g.labeled()) ++per_class[static_cast<std::size_t>(g.labels()[u])];
    for (int k : per_class) CHECK(k >= 1);
    CHECK(g.targets().size() == static_cast<std::size_t>(std::ceil(spec.target_fraction * g.n_nodes())));
  }
  SUBCASE("class separation raises homophily") {
    SyntheticSpec flat = spec;
    flat.class_sep = 0.0;
    auto mean = [](const AttributedGraph& g) {
      const auto p = homophily_profile(g.topology(), g.features());
      double s = 0.0;
      for (double v : p.scores) s += v;
      return s / static_cast<double>(p.scores.size());
    };
    CHECK(mean(generate_synthetic(spec)) > mean(generate_synthetic(flat)));
  }
  SUBCASE("invalid parameters") {
    SyntheticSpec s = spec;
    s.p_out = 0.1;
    s.p_in = 0.05;
    CHECK_THROWS_AS(generate_synthetic(s), ValidationError);
    s = spec;
    s.class_sep = -1.0;
    CHECK_THROWS_AS(generate_synthetic(s), ValidationError);
  }
}
