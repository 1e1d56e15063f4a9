#include <doctest.h>

#include <cmath>
#include <random>

#include "kle/error.hpp"
#include "kle/kernels.hpp"
#include "support.hpp"

using namespace kle;
using kle::testing::laplacian_of;
using kle::testing::oracle_expm;
using kle::testing::oracle_normalize;
using kle::testing::oracle_vne;

namespace {

SemanticGraph graph_of(const Eigen::MatrixXd& w) { return SemanticGraph(SymMatrix(w), NodeKind::Answers); }

Eigen::MatrixXd two_node(double weight) {
  Eigen::MatrixXd w(2, 2);
  w << 0, weight, weight, 0;
  return w;
}

Eigen::MatrixXd complete(Eigen::Index n) {
  Eigen::MatrixXd w = Eigen::MatrixXd::Constant(n, n, 2.0);
  w.diagonal().setZero();
  return w;
}

}  // namespace

TEST_CASE("heat kernel worked examples") {
  const SymMatrix l(laplacian_of(two_node(1.0)));
  const auto k = heat_kernel(l, 0.3);
  CHECK(std::abs(k(0, 0) - 0.7744) < 1e-4);
  CHECK(std::abs(k(0, 0) - (1 + std::exp(-0.6)) / 2) < 1e-12);
  CHECK(std::abs(k(0, 1) - (1 - std::exp(-0.6)) / 2) < 1e-12);

  const auto tiny = heat_kernel(l, 1e-12);
  CHECK((tiny.matrix() - Eigen::MatrixXd::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-10);

  const auto edgeless = heat_kernel(SymMatrix::zeros(4), 7.0);
  CHECK((edgeless.matrix() - Eigen::MatrixXd::Identity(4, 4)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("heat kernel matches scaling-and-squaring expm and stays entrywise nonnegative") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 40; ++trial) {
    const Eigen::Index n = 2 + trial % 10;
    const Eigen::MatrixXd w = kle::testing::random_weights(rng, n, 0.5, 2.0);
    const Eigen::MatrixXd l = laplacian_of(w);
    const double t = 0.05 + 0.1 * (trial % 7);
    const auto k = heat_kernel(SymMatrix(l), t);
    CHECK((k.matrix() - oracle_expm(-t * l)).cwiseAbs().maxCoeff() < 1e-9);
    CHECK(k.matrix().minCoeff() > -1e-12);
  }
}

TEST_CASE("Matern kernel worked examples") {
  const double kappa = std::sqrt(2.0);
  const auto k = matern_kernel(SymMatrix(laplacian_of(two_node(1.0))), 1.0, kappa);
  Eigen::MatrixXd expected(2, 2);
  expected << 2.0 / 3, 1.0 / 3, 1.0 / 3, 2.0 / 3;
  CHECK((k.matrix() - expected).cwiseAbs().maxCoeff() < 1e-12);

  const auto id = matern_kernel(SymMatrix::zeros(3), 1.0, kappa);
  CHECK((id.matrix() - Eigen::MatrixXd::Identity(3, 3)).cwiseAbs().maxCoeff() < 1e-12);

  for (auto [nu, kap] : {std::pair{0.5, 1.0}, {2.0, 0.7}, {3.0, 2.0}}) {
    const auto e = matern_kernel(SymMatrix::zeros(3), nu, kap);
    const double d = std::pow(2 * nu / (kap * kap), -nu);
    CHECK((e.matrix() - d * Eigen::MatrixXd::Identity(3, 3)).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("Matern shape is the kernel up to a positive scale") {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::Index n = 2 + trial % 8;
    const SymMatrix l(laplacian_of(kle::testing::random_weights(rng, n, 0.6, 2.0)));
    const double nu = 0.5 + trial % 4;
    const double kappa = 0.5 + 0.25 * (trial % 5);
    const Eigen::MatrixXd a = matern_kernel(l, nu, kappa).matrix();
    const Eigen::MatrixXd b = matern_kernel_shape(l, nu, kappa).matrix();
    const double scale = std::pow(2 * nu / (kappa * kappa), nu);
    CHECK((a * scale - b).cwiseAbs().maxCoeff() < 1e-9 * b.cwiseAbs().maxCoeff());
  }
}

TEST_CASE("Matern approaches heat for large nu") {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::Index n = 2 + trial % 11;
    const auto g = graph_of(kle::testing::random_weights(rng, n, 0.5, 2.0));
    const auto m = build_kernel(g, KernelConfig::matern(200.0, 1.0));
    const auto h = build_kernel(g, KernelConfig::heat(0.5));
    CHECK((m.matrix.matrix().matrix() - h.matrix.matrix().matrix()).cwiseAbs().maxCoeff() < 1e-2);
  }
}

TEST_CASE("se_block kernel") {
  SUBCASE("probs (0.5, 0.25, 0.25), sizes (2, 1, 1)") {
    const Clustering c({0, 0, 1, 2});
    const std::vector<double> p{0.5, 0.25, 0.25};
    const auto k = se_block_kernel(c, p);
    CHECK(std::abs(von_neumann_entropy(k.matrix) - 1.0397207708399179) < 1e-6);
    CHECK(k.matrix.matrix()(0, 1) == 0.25);
    CHECK(k.matrix.matrix()(0, 2) == 0.0);
    CHECK(k.node_kind == NodeKind::Answers);
  }
  SUBCASE("single cluster") {
    const std::vector<double> p{1.0};
    const auto k = se_block_kernel(Clustering({0, 0, 0}), p);
    CHECK(std::abs(von_neumann_entropy(k.matrix)) < 1e-12);
  }
  SUBCASE("uniform singletons") {
    const std::vector<double> p(5, 0.2);
    const auto k = se_block_kernel(Clustering({0, 1, 2, 3, 4}), p);
    CHECK(std::abs(von_neumann_entropy(k.matrix) - std::log(5.0)) < 1e-12);
  }
  SUBCASE("interleaved members") {
    const std::vector<double> p{0.7, 0.3};
    const auto k = se_block_kernel(Clustering({0, 1, 0, 1, 0}), p);
    CHECK(k.matrix.matrix()(0, 2) == doctest::Approx(0.7 / 3));
    CHECK(k.matrix.matrix()(1, 3) == doctest::Approx(0.15));
    CHECK(k.matrix.matrix()(0, 1) == 0.0);
    CHECK(k.block_order == std::vector<std::size_t>{0, 2, 4, 1, 3});
    CHECK(std::abs(von_neumann_entropy(k.matrix) - shannon_entropy(p)) < 1e-12);
  }
  SUBCASE("errors") {
    const std::vector<double> bad{0.6, 0.6};
    CHECK_THROWS_AS(se_block_kernel(Clustering({0, 1}), bad), Error);
    const std::vector<double> short_p{1.0};
    CHECK_THROWS_AS(se_block_kernel(Clustering({0, 1}), short_p), Error);
  }
}

TEST_CASE("se_block VNE recovers Shannon entropy on random instances") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + static_cast<std::size_t>(trial % 12);
    const Clustering c(kle::testing::random_assignment(rng, n));
    const auto p = kle::testing::random_probs(rng, c.num_clusters());
    const auto k = se_block_kernel(c, p);
    CHECK(std::abs(von_neumann_entropy(k.matrix) - shannon_entropy(p)) <= 1e-9);
    CHECK(std::abs(oracle_vne(k.matrix.matrix().matrix()) - shannon_entropy(p)) <= 1e-9);
  }
}

TEST_CASE("combine_kernels") {
  const DensityMatrix a(SymMatrix::diagonal(std::vector<double>{1.0, 0.0}));
  const DensityMatrix b(SymMatrix::diagonal(std::vector<double>{0.0, 1.0}));
  const std::vector<DensityMatrix> ks{a, b};
  const auto first = combine_kernels(ks, std::vector<double>{1.0, 0.0});
  CHECK(first.matrix().matrix() == a.matrix().matrix());
  const auto half = combine_kernels(ks, std::vector<double>{0.5, 0.5});
  CHECK(half.matrix()(0, 0) == 0.5);
  CHECK(half.matrix()(1, 1) == 0.5);
  CHECK_THROWS_AS(combine_kernels(ks, std::vector<double>{0.7, 0.7}), Error);
  CHECK_THROWS_AS(combine_kernels(ks, std::vector<double>{1.0}), Error);
  const DensityMatrix c3(SymMatrix(Eigen::MatrixXd(Eigen::MatrixXd::Identity(3, 3) / 3.0)));
  const std::vector<DensityMatrix> mixed{a, c3};
  CHECK_THROWS_AS(combine_kernels(mixed, std::vector<double>{0.5, 0.5}), Error);
}

TEST_CASE("build_kernel worked examples") {
  SUBCASE("edgeless heat is I/n") {
    for (Eigen::Index n : {1, 2, 5, 9}) {
      const auto k = build_kernel(graph_of(Eigen::MatrixXd::Zero(n, n)), KernelConfig::heat(1.3));
      CHECK((k.matrix.matrix().matrix() - Eigen::MatrixXd::Identity(n, n) / double(n)).cwiseAbs().maxCoeff() <
            1e-15);
      CHECK(std::abs(von_neumann_entropy(k.matrix) - std::log(double(n))) < 1e-12);
    }
  }
  SUBCASE("complete graph collapses for large t") {
    const auto k = build_kernel(graph_of(complete(6)), KernelConfig::heat(20.0));
    CHECK(von_neumann_entropy(k.matrix) < 1e-3);
  }
  SUBCASE("two-node normalized heat") {
    const auto k = build_kernel(graph_of(two_node(1.0)), KernelConfig::heat(0.3));
    const double off = (1 - std::exp(-0.6)) / (1 + std::exp(-0.6)) / 2;
    CHECK(k.matrix.matrix()(0, 0) == 0.5);
    CHECK(std::abs(k.matrix.matrix()(0, 1) - off) < 1e-12);
    CHECK(std::abs(k.matrix.matrix()(0, 1) - 0.1457) < 1e-3);
  }
  SUBCASE("full kernel with alpha 0 is the SE block kernel") {
    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 20; ++trial) {
      const std::size_t n = 2 + static_cast<std::size_t>(trial % 9);
      const Clustering c(kle::testing::random_assignment(rng, n));
      const auto p = kle::testing::random_probs(rng, c.num_clusters());
      const auto g = graph_of(kle::testing::random_weights(rng, Eigen::Index(n), 0.5, 2.0));
      const auto k = build_kernel(g, KernelConfig::full(0.0, 0.3), ClusterContext{&c, p});
      CHECK(std::abs(von_neumann_entropy(k.matrix) - shannon_entropy(p)) < 1e-9);
    }
  }
  SUBCASE("full kernel with alpha 1 is the normalized heat kernel") {
    std::mt19937_64 rng(6);
    const auto w = kle::testing::random_weights(rng, 7, 0.5, 2.0);
    const Clustering c({0, 1, 1, 2, 0, 3, 3});
    const std::vector<double> p{0.4, 0.3, 0.2, 0.1};
    const auto k = build_kernel(graph_of(w), KernelConfig::full(1.0, 0.3), ClusterContext{&c, p});
    const Eigen::MatrixXd expected = oracle_normalize(oracle_expm(-0.3 * laplacian_of(w)));
    CHECK((k.matrix.matrix().matrix() - expected).cwiseAbs().maxCoeff() < 1e-10);
  }
  SUBCASE("full kernel mixes the normalized components") {
    std::mt19937_64 rng(7);
    const auto w = kle::testing::random_weights(rng, 5, 0.7, 2.0);
    const Clustering c({0, 0, 1, 1, 2});
    const std::vector<double> p{0.5, 0.3, 0.2};
    const auto k = build_kernel(graph_of(w), KernelConfig::full(0.25, 0.3), ClusterContext{&c, p});
    Eigen::MatrixXd se = Eigen::MatrixXd::Zero(5, 5);
    se.block(0, 0, 2, 2).setConstant(0.25);
    se.block(2, 2, 2, 2).setConstant(0.15);
    se(4, 4) = 0.2;
    const Eigen::MatrixXd expected = 0.25 * oracle_normalize(oracle_expm(-0.3 * laplacian_of(w))) + 0.75 * se;
    CHECK((k.matrix.matrix().matrix() - expected).cwiseAbs().maxCoeff() < 1e-10);
  }
  SUBCASE("normalizing after combining mixes the raw components") {
    std::mt19937_64 rng(10);
    const auto w = kle::testing::random_weights(rng, 5, 0.7, 2.0);
    const Clustering c({0, 1, 0, 2, 2});
    const std::vector<double> p{0.6, 0.1, 0.3};
    auto cfg = KernelConfig::full(0.4, 0.3);
    cfg.normalize_after_combining = true;
    const auto k = build_kernel(graph_of(w), cfg, ClusterContext{&c, p});
    Eigen::MatrixXd se = Eigen::MatrixXd::Zero(5, 5);
    for (int i = 0; i < 5; ++i)
      for (int j = 0; j < 5; ++j)
        if (c.cluster_of(i) == c.cluster_of(j)) se(i, j) = p[c.cluster_of(i)] / double(c.sizes()[c.cluster_of(i)]);
    const Eigen::MatrixXd expected = oracle_normalize(0.4 * oracle_expm(-0.3 * laplacian_of(w)) + 0.6 * se);
    CHECK((k.matrix.matrix().matrix() - expected).cwiseAbs().maxCoeff() < 1e-10);
  }
  SUBCASE("se_block requires a clustering") {
    CHECK_THROWS_AS(build_kernel(graph_of(two_node(1.0)), KernelConfig::se_block()), Error);
  }
}

TEST_CASE("normalized kernels are density matrices with unit diagonal scaled by 1/n") {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 30; ++trial) {
    const Eigen::Index n = 1 + trial % 12;
    const auto g = graph_of(kle::testing::random_weights(rng, n, 0.4, 2.0));
    for (const auto& cfg : {KernelConfig::heat(0.7), KernelConfig::heat(0.7, true), KernelConfig::matern(1.5, 1.2),
                            KernelConfig::matern(3.0, 0.8, true)}) {
      const auto k = build_kernel(g, cfg);
      CHECK(std::abs(k.matrix.matrix().trace() - 1.0) < 1e-12);
      for (Eigen::Index i = 0; i < n; ++i) CHECK(k.matrix.matrix()(i, i) == 1.0 / double(n));
      const double h = von_neumann_entropy(k.matrix);
      CHECK(h >= 0.0);
      CHECK(h <= std::log(double(n)) + 1e-12);
      CHECK(std::abs(h - oracle_vne(k.matrix.matrix().matrix())) < 1e-9);
    }
  }
}

TEST_CASE("invalid kernel parameters") {
  const SymMatrix l(laplacian_of(two_node(1.0)));
  CHECK_THROWS_AS(heat_kernel(l, 0.0), Error);
  CHECK_THROWS_AS(heat_kernel(l, -1.0), Error);
  CHECK_THROWS_AS(matern_kernel(l, 0.0, 1.0), Error);
  CHECK_THROWS_AS(matern_kernel(l, 1.0, -1.0), Error);
  try {
    heat_kernel(l, -0.5);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InvalidLengthscale);
  }
  try {
    matern_kernel(l, -1.0, 1.0);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InvalidParams);
  }
  auto cfg = KernelConfig::full(1.5);
  CHECK_THROWS_AS(cfg.validate(), Error);
  CHECK(KernelConfig::full().needs_clustering());
  CHECK_FALSE(KernelConfig::heat().needs_clustering());
  CHECK(KernelConfig::matern(2.0, 0.4).lengthscale() == 0.4);
  CHECK(KernelConfig::heat(0.9).lengthscale() == 0.9);
}
