#include <cmath>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "segia/error.hpp"
#include "segia/surrogate.hpp"

using namespace segia;

namespace {

oracle::Dense rows_of(const Matrix& m) { return oracle::from(m); }

double oracle_labeled_loss(const SurrogateModel& model, const AttributedGraph& g) {
  oracle::Dense z;
  const auto x = rows_of(g.features());
  if (model.variant == Variant::GCN2) {
    z = oracle::gcn2_logits(g.topology(), x, rows_of(model.weights[0]), rows_of(model.weights[1]));
  } else {
    const double eps = model.variant == Variant::PrSGC ? model.epsilon : -1.0;
    z = oracle::sgc_logits(g.topology(), x, rows_of(model.weights[0]), eps);
  }
  double s = 0.0;
  for (node_t u : g.labeled()) s += oracle::cross_entropy(z[u], g.labels()[u]);
  return s / static_cast<double>(g.labeled().size());
}

SurrogateModel random_model(Variant v, std::size_t d, std::size_t c, std::mt19937_64& rng, double eps = -1.0) {
  auto m = SurrogateModel::initial(v, d, c, rng(), eps, 5);
  for (auto& w : m.weights) w = oracle::random_matrix(w.rows(), w.cols(), rng, 0.5);
  return m;
}

}  // namespace

TEST_CASE("cosine similarity examples") {
  const std::vector<double> a{1, 0}, b{0, 1}, c{2, 0}, z{0, 0}, n{-1, 0};
  CHECK(cosine_sim(a, b) == 0.0);
  CHECK(cosine_sim(a, c) == doctest::Approx(1.0));
  CHECK(cosine_sim(a, n) == doctest::Approx(-1.0));
  CHECK(cosine_sim(a, z) == 0.0);
  CHECK_THROWS_AS(cosine_sim(a, std::vector<double>{1.0}), DimensionError);

  std::mt19937_64 rng(2);
  for (int t = 0; t < 20; ++t) {
    std::vector<double> x(6), y(6);
    std::normal_distribution<double> g;
    for (auto& v : x) v = g(rng);
    for (auto& v : y) v = g(rng);
    const double s = cosine_sim(x, y);
    CHECK(std::abs(s - oracle::cosine(x, y)) < 1e-14);
    CHECK(s == doctest::Approx(cosine_sim(y, x)));
    CHECK(std::abs(s) <= 1.0);
    const auto grad = cosine_sim_grad(x, y);
    std::vector<double> numeric(6);
    for (std::size_t i = 0; i < 6; ++i)
      numeric[i] = oracle::central_difference([&] { return oracle::cosine(x, y); }, x[i]);
    CHECK(oracle::relative_error(grad, numeric) < 1e-7);
  }
}

TEST_CASE("pruning mask examples") {
  Topology path(3, std::vector<Edge>{{0, 1}, {1, 2}});
  const Matrix x = Matrix::from_rows({{1, 0}, {1, 1}, {0, 1}});
  SUBCASE("threshold below every similarity keeps everything") {
    const auto p = build_pruning_mask(path, x, -1.0);
    CHECK(p.pruned_edge_count() == 0);
    for (double v : p.mask.values()) CHECK(v == 1.0);
  }
  SUBCASE("0.8 cuts both edges (cos = 0.707)") {
    const auto p = build_pruning_mask(path, x, 0.8);
    CHECK(p.pruned_edge_count() == 2);
    CHECK(p.mask.at(0, 0) == 1.0);
    CHECK(p.mask.at(0, 1) == 0.0);
    CHECK(p.mask.at(1, 2) == 0.0);
  }
  SUBCASE("orthogonal endpoints at threshold 0 are kept") {
    Topology e(2, std::vector<Edge>{{0, 1}});
    const auto p = build_pruning_mask(e, Matrix::from_rows({{1, 0}, {0, 1}}), 0.0);
    CHECK(p.pruned_edge_count() == 0);
    CHECK(build_pruning_mask(e, Matrix::from_rows({{1, 0}, {0, 1}}), 0.01).pruned_edge_count() == 1);
  }
  SUBCASE("threshold outside [-1, 1]") {
    CHECK_THROWS_AS(build_pruning_mask(path, x, 1.5), ValidationError);
  }
  SUBCASE("random graphs match the dense mask") {
    std::mt19937_64 rng(9);
    for (int t = 0; t < 10; ++t) {
      const auto g = oracle::random_graph(20, 4, 2, rng);
      const auto p = build_pruning_mask(g, 0.1);
      CHECK(oracle::max_diff(oracle::mask(g.topology(), rows_of(g.features()), 0.1), p.mask.to_dense()) == 0.0);
    }
  }
}

TEST_CASE("forward logits match the dense reference") {
  std::mt19937_64 rng(21);
  for (int t = 0; t < 10; ++t) {
    const auto g = oracle::random_graph(10 + 4 * t, 5, 3, rng);
    const auto x = rows_of(g.features());
    for (double eps : {-1.0, 0.0, 0.2}) {
      const auto m = random_model(Variant::PrSGC, 5, 3, rng, eps);
      CHECK(oracle::max_diff(oracle::sgc_logits(g.topology(), x, rows_of(m.weights[0]), eps), forward_logits(m, g)) <
            1e-12);
    }
    const auto gcn = random_model(Variant::GCN2, 5, 3, rng);
    CHECK(oracle::max_diff(oracle::gcn2_logits(g.topology(), x, rows_of(gcn.weights[0]), rows_of(gcn.weights[1])),
                           forward_logits(gcn, g)) < 1e-12);
  }
}

TEST_CASE("PrSGC with threshold -1 is SGC") {
  std::mt19937_64 rng(4);
  const auto g = oracle::random_graph(30, 6, 3, rng);
  auto sgc = random_model(Variant::SGC, 6, 3, rng);
  auto pr = sgc;
  pr.variant = Variant::PrSGC;
  pr.epsilon = -1.0;
  CHECK(forward_logits(sgc, g) == forward_logits(pr, g));
}

TEST_CASE("SGC logits are linear in the features") {
  std::mt19937_64 rng(6);
  const auto g = oracle::random_graph(25, 4, 2, rng);
  const auto m = random_model(Variant::SGC, 4, 2, rng);
  const auto x2 = oracle::random_matrix(25, 4, rng);
  Matrix sum = g.features();
  sum += x2;
  sum *= 2.5;
  auto za = forward_logits(m, g.topology(), g.features());
  za += forward_logits(m, g.topology(), x2);
  za *= 2.5;
  CHECK(max_abs_diff(forward_logits(m, g.topology(), sum), za) < 1e-11);
}

TEST_CASE("predictions ignore positive weight scaling and break ties low") {
  std::mt19937_64 rng(8);
  const auto g = oracle::random_graph(25, 4, 3, rng);
  auto m = random_model(Variant::SGC, 4, 3, rng);
  std::vector<node_t> all(25);
  for (node_t u = 0; u < 25; ++u) all[u] = u;
  const auto before = predict(m, g, all);
  m.weights[0] *= 7.0;
  CHECK(predict(m, g, all) == before);

  const Matrix tie = Matrix::from_rows({{1.0, 3.0, 3.0}, {2.0, 2.0, 2.0}});
  CHECK(argmax_rows(tie, std::vector<node_t>{0, 1}) == std::vector<int>{1, 0});
}

TEST_CASE("zero weights give uniform cross-entropy") {
  std::mt19937_64 rng(10);
  const auto g = oracle::random_graph(30, 4, 4, rng);
  const auto m = SurrogateModel::initial(Variant::SGC, 4, 4, 0);
  for (double v : m.weights[0].values()) CHECK(v == 0.0);
  CHECK(loss_on_targets(m, g, g.targets()) ==
        doctest::Approx(static_cast<double>(g.targets().size()) * std::log(4.0)).epsilon(1e-12));
  CHECK(training_loss(m, g) == doctest::Approx(std::log(4.0)).epsilon(1e-12));
}

TEST_CASE("softmax cross-entropy is stable") {
  const std::vector<double> z{1000.0, 0.0, -1000.0};
  const auto ce = softmax_cross_entropy(z, 0);
  CHECK(std::isfinite(ce.loss));
  CHECK(ce.loss == doctest::Approx(0.0));
  CHECK(softmax_cross_entropy(z, 2).loss == doctest::Approx(2000.0));
  double s = 0.0;
  for (double v : ce.grad) s += v;
  CHECK(std::abs(s) < 1e-12);
}

TEST_CASE("training gradients match finite differences") {
  std::mt19937_64 rng(12);
  for (Variant v : {Variant::SGC, Variant::PrSGC, Variant::GCN2}) {
    const auto g = oracle::random_graph(18, 4, 3, rng);
    auto m = random_model(v, 4, 3, rng, v == Variant::PrSGC ? 0.0 : -1.0);
    const auto grads = training_gradient(m, g);
    for (std::size_t l = 0; l < m.weights.size(); ++l) {
      std::vector<double> analytic = grads[l].values(), numeric(analytic.size());
      for (std::size_t i = 0; i < numeric.size(); ++i)
        numeric[i] =
            oracle::central_difference([&] { return oracle_labeled_loss(m, g); }, m.weights[l].values()[i], 1e-6);
      CAPTURE(to_string(v));
      CHECK(oracle::relative_error(analytic, numeric) < 1e-6);
    }
  }
}

TEST_CASE("training") {
  SyntheticSpec spec;
  spec.n = 200;
  const auto g = generate_synthetic(spec);
  SUBCASE("loss is non-increasing for the linear variants") {
    for (Variant v : {Variant::SGC, Variant::PrSGC}) {
      SurrogateModel m;
      m.variant = v;
      m.epsilon = v == Variant::PrSGC ? 0.1 : -1.0;
      const auto r = train(m, g, {0.2, 100, 0});
      for (std::size_t e = 1; e < r.losses.size(); ++e) CHECK(r.losses[e] <= r.losses[e - 1] + 1e-12);
      CHECK(r.final_loss < std::log(static_cast<double>(g.n_classes())));
      CHECK(r.step <= 0.2);
      CHECK(r.model.trained_on == g.fingerprint());
    }
  }
  SUBCASE("zero epochs returns the initial model") {
    SurrogateModel m;
    m.variant = Variant::GCN2;
    const auto r = train(m, g, {0.2, 0, 5});
    CHECK(r.losses.size() == 1);
    CHECK(r.model.weights == SurrogateModel::initial(Variant::GCN2, g.n_features(), g.n_classes(), 5).weights);
  }
  SUBCASE("a class without labeled nodes is rejected") {
    std::vector<node_t> labeled;
    for (node_t u : g.labeled())
      if (g.labels()[u] != 0) labeled.push_back(u);
    const auto h =
        AttributedGraph::build(g.topology(), g.features(), g.labels(), labeled, g.targets(), g.n_classes());
    CHECK_THROWS_AS(train(SurrogateModel{}, h, {}), PreconditionError);
  }
}

TEST_CASE("separable two-class graph is learned") {
  SyntheticSpec spec;
  spec.n = 200;
  spec.c = 2;
  spec.d = 4;
  spec.p_in = 0.08;
  spec.p_out = 0.002;
  spec.class_sep = 3.0;
  spec.labeled_fraction = 0.2;
  const auto g = generate_synthetic(spec);
  const auto r = train(SurrogateModel{}, g, {});
  std::vector<node_t> all(g.n_nodes());
  for (node_t u = 0; u < all.size(); ++u) all[u] = u;
  const auto pred = predict(r.model, g, all);
  std::size_t hit = 0;
  for (node_t u : all) hit += pred[u] == g.labels()[u];
  CHECK(static_cast<double>(hit) / static_cast<double>(all.size()) >= 0.95);
}

TEST_CASE("model checkpoint round-trips") {
  std::mt19937_64 rng(14);
  for (Variant v : {Variant::SGC, Variant::PrSGC, Variant::GCN2}) {
    auto m = random_model(v, 4, 3, rng, v == Variant::PrSGC ? 0.25 : -1.0);
    m.trained_on = 12345;
    const auto back = model_from_json(nlohmann::json::parse(to_json(m).dump()));
    CHECK(back.variant == m.variant);
    CHECK(back.epsilon == m.epsilon);
    CHECK(back.weights == m.weights);
    CHECK(back.trained_on == m.trained_on);
  }
  CHECK_THROWS_AS(model_from_json(nlohmann::json::parse(R"({"variant": "SGC"})")), ParseError);
  CHECK(parse_variant("prsgc") == Variant::PrSGC);
  CHECK_THROWS_AS(parse_variant("mlp"), ValidationError);
}

TEST_CASE("models reject mismatched graphs") {
  std::mt19937_64 rng(15);
  const auto g = oracle::random_graph(12, 4, 3, rng);
  const auto m = SurrogateModel::initial(Variant::SGC, 5, 3, 0);
  CHECK_THROWS_AS(forward_logits(m, g), DimensionError);
}
