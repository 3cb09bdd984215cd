#include <cmath>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "scorelab/dist.hpp"
#include "scorelab/ldr.hpp"
#include "scorelab/rng.hpp"
#include "scorelab/score_net.hpp"

using namespace scorelab;

namespace {

SamplerFn gaussian_sampler(int d) {
  return [d](Rng& rng, double* x) { rng.gaussian_fill(x, d); };
}

JacobianFn const_jacobian(std::vector<double> J) {
  return [J = std::move(J)](const double*, double* out) {
    std::copy(J.begin(), J.end(), out);
  };
}

TwoLayerScoreNet random_net(int d, int m, double scale, uint64_t seed) {
  InitConfig cfg;
  cfg.seed = seed;
  TwoLayerScoreNet net = init_net(d, m, 0, cfg);
  Rng rng(seed + 1);
  for (auto& v : net.a) v = scale * rng.gaussian();
  for (auto& v : net.w) v = scale * rng.gaussian();
  for (auto& v : net.b) v = scale * rng.gaussian();
  return net;
}

}  // namespace

TEST_SUITE("ldr") {

TEST_CASE("region validation") {
  CHECK_THROWS_AS(validate_region({}, 3), std::invalid_argument);
  CHECK_THROWS_AS(validate_region({0, 0}, 3), std::invalid_argument);
  CHECK_THROWS_AS(validate_region({1, 0}, 3), std::invalid_argument);
  CHECK_THROWS_AS(validate_region({3}, 3), std::invalid_argument);
  CHECK_NOTHROW(validate_region({0, 2}, 3));
}

TEST_CASE("identity map is perfectly local") {
  JacobianFn eye = const_jacobian({1, 0, 0, 0, 1, 0, 0, 0, 1});
  for (const std::vector<int>& region :
       {std::vector<int>{0}, std::vector<int>{1, 2}, std::vector<int>{0, 1, 2}}) {
    LdrReport rep = ldr_exact(eye, 3, region, gaussian_sampler(3), 64, 5);
    CHECK(rep.mean == 1.0);
    CHECK(rep.se == 0.0);
    CHECK(rep.n == 64);
    CHECK(rep.skipped == 0);
  }
}

TEST_CASE("hand-computed ratio for a constant jacobian") {
  // J = [[1,2],[3,4]]; region {0}: 1 / (1+4); region {1}: 16 / (9+16)
  JacobianFn j = const_jacobian({1, 2, 3, 4});
  LdrReport r0 = ldr_exact(j, 2, {0}, gaussian_sampler(2), 16, 1);
  CHECK(r0.mean == doctest::Approx(0.2).epsilon(1e-15));
  CHECK(r0.se == 0.0);
  LdrReport r1 = ldr_exact(j, 2, {1}, gaussian_sampler(2), 16, 1);
  CHECK(r1.mean == doctest::Approx(16.0 / 25.0).epsilon(1e-15));
  // saliency: column masses of the region-restricted rows
  CHECK(r0.saliency[0] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(r0.saliency[1] == doctest::Approx(4.0).epsilon(1e-15));
  CHECK(r1.saliency[0] == doctest::Approx(9.0).epsilon(1e-15));
  CHECK(r1.saliency[1] == doctest::Approx(16.0).epsilon(1e-15));

  // a pure swap has no local component at all
  LdrReport swap = ldr_exact(const_jacobian({0, 1, 1, 0}), 2, {0}, gaussian_sampler(2), 8, 1);
  CHECK(swap.mean == 0.0);
}

TEST_CASE("full region always gives ratio one; values stay in range") {
  TwoLayerScoreNet net = random_net(4, 12, 0.6, 88);
  JacobianFn jac = net_jacobian_fn(net);
  LdrReport full = ldr_exact(jac, 4, {0, 1, 2, 3}, gaussian_sampler(4), 100, 3);
  CHECK(full.mean == 1.0);
  for (const std::vector<int>& region :
       {std::vector<int>{0}, std::vector<int>{1, 3}, std::vector<int>{0, 2, 3}}) {
    LdrReport rep = ldr_exact(jac, 4, region, gaussian_sampler(4), 100, 3);
    CHECK(rep.mean >= 0.0);
    CHECK(rep.mean <= 1.0);
    CHECK(rep.se >= 0.0);
  }
}

TEST_CASE("estimator is deterministic in the seed and counts degenerate points") {
  JacobianFn half_dead = [](const double* x, double* J) {
    double v = x[0] >= 0 ? 1.0 : 0.0;
    J[0] = v;
    J[1] = 0;
    J[2] = 0;
    J[3] = v;
  };
  LdrReport a = ldr_exact(half_dead, 2, {0}, gaussian_sampler(2), 200, 9);
  LdrReport b = ldr_exact(half_dead, 2, {0}, gaussian_sampler(2), 200, 9);
  CHECK(a.mean == b.mean);
  CHECK(a.skipped == b.skipped);
  CHECK(a.skipped > 50);   // roughly half the draws hit the dead zone
  CHECK(a.skipped < 150);
  CHECK(a.n + a.skipped == 200);
  CHECK(a.mean == 1.0);  // surviving points are identity rows

  JacobianFn dead = const_jacobian({0, 0, 0, 0});
  CHECK_THROWS_AS(ldr_exact(dead, 2, {0}, gaussian_sampler(2), 8, 1), std::runtime_error);
}

TEST_CASE("saliency at a point matches the exact-report accumulation") {
  TwoLayerScoreNet net = random_net(3, 6, 0.7, 21);
  std::vector<double> x = {0.4, -1.2, 0.7};
  std::vector<double> sal = saliency_at(net_jacobian_fn(net), 3, {0, 2}, x.data());
  std::vector<double> J(9);
  net.input_jacobian(x.data(), J.data());
  for (int k = 0; k < 3; ++k) {
    double expect = J[0 * 3 + k] * J[0 * 3 + k] + J[2 * 3 + k] * J[2 * 3 + k];
    CHECK(sal[k] == doctest::Approx(expect).epsilon(1e-15));
  }
  std::string csv = saliency_csv(sal);
  CHECK(csv.rfind("coordinate,mass\n", 0) == 0);
  int lines = 0;
  for (char c : csv)
    if (c == '\n') ++lines;
  CHECK(lines == 4);
}

TEST_CASE("zeroth-order estimate recovers linear-map ratios") {
  // identity: ratio 1 for any region
  VecFn eye = [](const double* x, double* out) {
    out[0] = x[0];
    out[1] = x[1];
  };
  ZerothOrderReport rep =
      ldr_zeroth_order(eye, 2, {0}, gaussian_sampler(2), 1e-4, 4096, 16, 12);
  CHECK(std::abs(rep.mean - 1.0) < 0.05);
  CHECK_FALSE(rep.warn);
  CHECK(rep.eps == 1e-4);
  CHECK(rep.n_points == 16);
  CHECK(rep.skipped == 0);

  // J = [[1,2],[3,4]], region {0} -> 0.2
  VecFn lin = [](const double* x, double* out) {
    out[0] = x[0] + 2 * x[1];
    out[1] = 3 * x[0] + 4 * x[1];
  };
  ZerothOrderReport rl =
      ldr_zeroth_order(lin, 2, {0}, gaussian_sampler(2), 1e-4, 8192, 16, 12);
  CHECK(std::abs(rl.mean - 0.2) < 0.03);
  CHECK(rl.rel_change < 0.1);
}

TEST_CASE("zeroth-order control pass flags discretization trouble") {
  // f0 = x0 + x1^2 probed at the origin: the isotropic denominator picks up
  // E[d1^4] = 3 eps^4, so the ratio is 1/(1+3 eps^2) and moves with eps
  VecFn curved = [](const double* x, double* out) {
    out[0] = x[0] + x[1] * x[1];
    out[1] = x[1];
  };
  SamplerFn origin = [](Rng&, double* x) { x[0] = x[1] = 0.0; };
  ZerothOrderReport rep = ldr_zeroth_order(curved, 2, {0}, origin, 1.0, 20000, 1, 5);
  CHECK(std::abs(rep.mean - 0.25) < 0.05);
  CHECK(std::abs(rep.mean_eps_halved - 1.0 / 1.75) < 0.05);
  CHECK(rep.rel_change > 0.20);
  CHECK(rep.warn);
}

TEST_CASE("zeroth-order agrees with the exact ratio on a relu network") {
  TwoLayerScoreNet net = random_net(3, 16, 0.5, 4040);
  std::vector<int> region = {0, 1};
  LdrReport exact =
      ldr_exact(net_jacobian_fn(net), 3, region, gaussian_sampler(3), 2000, 77);
  ZerothOrderReport zo = ldr_zeroth_order(net_vec_fn(net), 3, region, gaussian_sampler(3),
                                          1e-4, 2048, 128, 78);
  CHECK(std::abs(zo.mean - exact.mean) <= 0.1);
  CHECK_FALSE(zo.warn);
}

TEST_CASE("union additivity holds under the shared denominator") {
  // identity map: each singleton is perfectly local on its own, which breaks
  // the naive sum (1 >= 1 + 1 is false); the shared normalization repairs it
  JacobianFn eye = const_jacobian({1, 0, 0, 1});
  UnionAdditivityReport rep =
      union_additivity_report(eye, 2, {0}, {1}, gaussian_sampler(2), 32, 5);
  CHECK(rep.lhs_normalized == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(rep.r1_normalized == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(rep.r2_normalized == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(rep.lhs_normalized < rep.r1_normalized + rep.r2_normalized - 0.5);
  CHECK(rep.lhs_shared == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(rep.r1_shared == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(rep.r2_shared == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(rep.shared_holds);

  CHECK_THROWS_AS(union_additivity_report(eye, 2, {0}, {0}, gaussian_sampler(2), 8, 1),
                  std::invalid_argument);
}

TEST_CASE("shared-denominator inequality is pointwise on random networks") {
  for (uint64_t seed : {1ull, 2ull, 3ull, 4ull, 5ull}) {
    TwoLayerScoreNet net = random_net(5, 10, 0.8, seed * 31);
    UnionAdditivityReport rep = union_additivity_report(
        net_jacobian_fn(net), 5, {0, 2}, {1, 4}, gaussian_sampler(5), 50, seed);
    CHECK(rep.shared_holds);
    CHECK(rep.lhs_shared + 1e-12 >= rep.r1_shared + rep.r2_shared);
  }
}

TEST_CASE("adapters wrap the network and the forward sampler") {
  TwoLayerScoreNet net = random_net(2, 4, 0.9, 606);
  std::vector<double> x = {0.3, -0.8}, out1(2), out2(2), J1(4), J2(4);
  net_vec_fn(net)(x.data(), out1.data());
  net.forward(x.data(), out2.data());
  CHECK(out1 == out2);
  net_jacobian_fn(net)(x.data(), J1.data());
  net.input_jacobian(x.data(), J2.data());
  CHECK(J1 == J2);

  PointCloudDensity p;
  p.dim = 2;
  p.points = {1.0, -1.0};
  p.mass = {1.0};
  ForwardSampler fs(p, 0.5);
  Rng r1(12), r2(12);
  std::vector<double> a(2), b(2);
  forward_sampler_fn(fs)(r1, a.data());
  fs.draw(r2, b.data());
  CHECK(a == b);
}

}  // TEST_SUITE
