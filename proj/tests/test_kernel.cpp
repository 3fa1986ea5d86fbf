#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "kernel.hpp"
#include "linalg.hpp"
#include "test_utils.hpp"

using namespace dgpc;
using dgpc::testing::random_kernel;
using dgpc::testing::random_points;
using dgpc::testing::random_spd;

TEST_CASE("seard at zero distance returns the signal variance") {
  KernelParams p;
  p.signal_variance = 2.5;
  p.length_scales = Eigen::Vector2d(0.3, 4.0);
  p.noise_variance = 0.1;
  const Eigen::Vector2d z(1.0, -2.0);
  CHECK(seard(p, z, z) == doctest::Approx(2.5).epsilon(1e-15));
}

TEST_CASE("seard is symmetric in its arguments") {
  Rng rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    const KernelParams p = random_kernel(rng, 3);
    const Eigen::VectorXd a = rng.normal_vector(3);
    const Eigen::VectorXd b = rng.normal_vector(3);
    CHECK(seard(p, a, b) == doctest::Approx(seard(p, b, a)).epsilon(1e-15));
  }
}

TEST_CASE("seard unit example exp(-1)") {
  KernelParams p;
  p.signal_variance = 1.0;
  p.length_scales = Eigen::Vector2d(1.0, 1.0);
  p.noise_variance = 0.1;
  const Eigen::Vector2d z(0.0, 0.0), z2(1.0, 1.0);
  CHECK(seard(p, z, z2) == doctest::Approx(std::exp(-1.0)).epsilon(1e-12));
}

TEST_CASE("seard rejects dimension mismatch") {
  KernelParams p;
  p.signal_variance = 1.0;
  p.length_scales = Eigen::Vector2d(1.0, 1.0);
  p.noise_variance = 0.1;
  const Eigen::Vector3d z3(0.0, 0.0, 0.0);
  const Eigen::Vector2d z2(0.0, 0.0);
  CHECK_THROWS_AS(seard(p, z3, z2), std::invalid_argument);
}

TEST_CASE("seard_as_gaussian reproduces the kernel value") {
  Rng rng(11);
  for (int trial = 0; trial < 1000; ++trial) {
    const int dim = 1 + static_cast<int>(rng.uniform_int(0, 3));
    const KernelParams p = random_kernel(rng, dim);
    const Eigen::VectorXd a = rng.normal_vector(dim);
    const Eigen::VectorXd b = rng.normal_vector(dim);
    const auto [c, density] = seard_as_gaussian(p, a, b);
    const double k = seard(p, a, b);
    CHECK(c * density == doctest::Approx(k).epsilon(1e-12));
  }
}

TEST_CASE("seard_as_gaussian normalizer closed forms") {
  KernelParams p1;
  p1.signal_variance = 1.0;
  p1.length_scales = Eigen::VectorXd::Ones(1);
  p1.noise_variance = 0.1;
  const Eigen::VectorXd z = Eigen::VectorXd::Zero(1);
  CHECK(seard_as_gaussian(p1, z, z).first ==
        doctest::Approx(std::sqrt(2.0 * M_PI)).epsilon(1e-14));

  KernelParams p2;
  p2.signal_variance = 4.0;
  p2.length_scales = Eigen::Vector2d(1.0, 2.0);
  p2.noise_variance = 0.1;
  const Eigen::Vector2d z2(0.0, 0.0);
  CHECK(seard_as_gaussian(p2, z2, z2).first ==
        doctest::Approx(4.0 * 2.0 * M_PI * 2.0).epsilon(1e-14));
}

TEST_CASE("gram single point and elementwise agreement") {
  Rng rng(13);
  const KernelParams p = random_kernel(rng, 2);
  const Eigen::MatrixXd single = random_points(rng, 1, 2);
  const Eigen::MatrixXd k1 = gram(p, single, single);
  CHECK(k1.rows() == 1);
  CHECK(k1(0, 0) == doctest::Approx(p.signal_variance).epsilon(1e-15));

  const Eigen::MatrixXd a = random_points(rng, 3, 2);
  const Eigen::MatrixXd b = random_points(rng, 2, 2);
  const Eigen::MatrixXd k = gram(p, a, b);
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 2; ++j) {
      CHECK(k(i, j) == doctest::Approx(seard(p, a.row(i).transpose(),
                                             b.row(j).transpose()))
                           .epsilon(1e-12));
    }
  }
}

TEST_CASE("gram of a point set with itself is symmetric PSD") {
  Rng rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    const KernelParams p = random_kernel(rng, 3);
    const Eigen::MatrixXd a = random_points(rng, 5, 3);
    const Eigen::MatrixXd k = gram(p, a, a);
    CHECK((k - k.transpose()).lpNorm<Eigen::Infinity>() == 0.0);
    CHECK(min_eigenvalue(k) >= -1e-10);
  }
}

TEST_CASE("gram plus default jitter is positive definite") {
  Rng rng(19);
  for (int trial = 0; trial < 20; ++trial) {
    const KernelParams p = random_kernel(rng, 2);
    const Eigen::MatrixXd a =
        dgpc::testing::separated_points(rng, 12, 2, 3.0, 0.05);
    Eigen::MatrixXd k = gram(p, a, a);
    k.diagonal().array() += 1e-10 * p.signal_variance;
    CHECK_NOTHROW(JitteredChol(k, 0.0));
  }
}

TEST_CASE("chol_solve identity and diagonal cases") {
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(3, 3);
  const Eigen::VectorXd b = Eigen::Vector3d(1.0, -2.0, 0.5);
  CHECK((chol_solve(eye, 0.0, b) - b).norm() == doctest::Approx(0.0));

  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(2, 2);
  d(0, 0) = 2.0;
  d(1, 1) = 4.0;
  const Eigen::VectorXd rhs = Eigen::Vector2d(2.0, 4.0);
  const Eigen::MatrixXd sol = chol_solve(d, 0.0, rhs);
  CHECK(sol(0, 0) == doctest::Approx(1.0));
  CHECK(sol(1, 0) == doctest::Approx(1.0));
}

TEST_CASE("chol_solve residual on random SPD systems") {
  Rng rng(23);
  for (int trial = 0; trial < 10; ++trial) {
    const Eigen::MatrixXd m = random_spd(rng, 6);
    const Eigen::MatrixXd inv = chol_solve(m, 0.0, Eigen::MatrixXd::Identity(6, 6));
    CHECK((m * inv - Eigen::MatrixXd::Identity(6, 6)).lpNorm<Eigen::Infinity>() <
          1e-8);
  }
}

TEST_CASE("chol_solve escalates jitter and reports failure on indefinite input") {
  Eigen::MatrixXd nearly = Eigen::MatrixXd::Identity(3, 3);
  nearly(2, 2) = -1e-12;  // tiny negative pivot, rescued by jitter
  CHECK_NOTHROW(chol_solve(nearly, 0.0, Eigen::MatrixXd::Identity(3, 3)));

  Eigen::MatrixXd indefinite = -Eigen::MatrixXd::Identity(3, 3);
  CHECK_THROWS_AS(chol_solve(indefinite, 0.0, Eigen::MatrixXd::Identity(3, 3)),
                  NumericalError);
}

TEST_CASE("seard log-hyperparameter derivatives match finite differences") {
  Rng rng(29);
  for (int trial = 0; trial < 30; ++trial) {
    const int dim = 2;
    const KernelParams p = random_kernel(rng, dim);
    const Eigen::VectorXd a = rng.normal_vector(dim);
    const Eigen::VectorXd b = rng.normal_vector(dim);
    const Eigen::VectorXd grad = seard_log_gradient(p, a, b);

    Eigen::VectorXd v(dim + 2);
    v(0) = std::log(p.signal_variance);
    v.segment(1, dim) = p.length_scales.array().log();
    v(dim + 1) = std::log(p.noise_variance);

    const double h = 1e-6;
    for (int k = 0; k <= dim; ++k) {
      Eigen::VectorXd vp = v, vm = v;
      vp(k) += h;
      vm(k) -= h;
      const KernelParams pp = KernelParams::from_log_vector(vp);
      const KernelParams pm = KernelParams::from_log_vector(vm);
      const double fd = (seard(pp, a, b) - seard(pm, a, b)) / (2.0 * h);
      const double denom = std::max(std::abs(fd), 1e-8);
      CHECK(std::abs(grad(k) - fd) / denom < 1e-5);
    }
  }
}

TEST_CASE("kernel params JSON round trip") {
  KernelParams p;
  p.signal_variance = 1.75;
  p.length_scales = Eigen::Vector3d(0.2, 1.0, 7.5);
  p.noise_variance = 3e-4;
  const nlohmann::json j = p;
  const KernelParams q = j.get<KernelParams>();
  CHECK(q.signal_variance == p.signal_variance);
  CHECK(q.noise_variance == p.noise_variance);
  CHECK((q.length_scales - p.length_scales).norm() == 0.0);
}

TEST_CASE("kernel params validation rejects non-positive values") {
  KernelParams p;
  p.signal_variance = 0.0;
  p.length_scales = Eigen::Vector2d(1.0, 1.0);
  p.noise_variance = 0.1;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  p.signal_variance = 1.0;
  p.length_scales(1) = -2.0;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
}
