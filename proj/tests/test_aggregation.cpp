#include <doctest.h>

#include <stdexcept>

#include <cmath>
#include <numeric>
#include <vector>

#include "fedsim/aggregation.hpp"
#include "fedsim/rng.hpp"
#include "support/transport_lp.hpp"

using namespace fedsim;
namespace ag = fedsim::aggregation;
namespace dg = fedsim::datagen;

namespace {

dg::LabelPmf pmf(std::vector<double> mass) { return dg::LabelPmf{std::move(mass)}; }

std::vector<double> random_pmf(int z, Rng& rng) {
  std::vector<double> m(z);
  double sum = 0.0;
  for (double& v : m) {
    v = rng.uniform(0.0, 1.0);
    sum += v;
  }
  for (double& v : m) v /= sum;
  return m;
}

}  // namespace

TEST_CASE("wasserstein_1d hand cases") {
  CHECK(ag::wasserstein_1d(pmf({0.3, 0.7}), pmf({0.3, 0.7})) == 0.0);
  CHECK(ag::wasserstein_1d(pmf({1.0, 0.0}), pmf({0.0, 1.0})) ==
        doctest::Approx(1.0));
  CHECK(ag::wasserstein_1d(pmf({0.5, 0.5}), pmf({0.0, 1.0})) ==
        doctest::Approx(0.5));
  CHECK_THROWS_AS(ag::wasserstein_1d(pmf({1.0}), pmf({0.5, 0.5})),
                  std::domain_error);
}

TEST_CASE("wasserstein closed form equals the transport LP oracle") {
  Rng rng(808);
  for (int trial = 0; trial < 200; ++trial) {
    const int z = 2 + static_cast<int>(rng.uniform_index(4));  // 2..5
    const auto a = random_pmf(z, rng);
    const auto b = random_pmf(z, rng);
    const double closed = ag::wasserstein_1d(pmf(a), pmf(b));
    const double lp = fedsim_test::transport_lp(a, b);
    CHECK(std::abs(closed - lp) < 1e-9);
  }
}

TEST_CASE("compute_weights: symmetry, exclusion, size scaling") {
  const auto g = pmf({0.5, 0.5});
  std::vector<dg::LabelPmf> pmfs{pmf({0.5, 0.5}), pmf({0.5, 0.5})};
  std::vector<std::size_t> sizes{100, 100};
  std::vector<double> sinrs{5.0, 5.0};

  ag::WeightConfig cfg;
  cfg.policy = ag::WeightPolicy::kWasserstein;
  cfg.gamma_th = 1.0;

  // Identical pmfs and sizes, all selected -> uniform.
  auto w = ag::compute_weights(pmfs, g, sizes, sinrs, cfg);
  CHECK(w.values[0] == doctest::Approx(0.5));
  CHECK(w.values[1] == doctest::Approx(0.5));

  // One device below the threshold -> all weight on the other.
  const std::vector<double> mixed_sinrs{5.0, 0.5};
  auto w2 = ag::compute_weights(pmfs, g, sizes, mixed_sinrs, cfg);
  CHECK(w2.values[0] == doctest::Approx(1.0));
  CHECK(w2.values[1] == 0.0);
  CHECK_FALSE(w2.selected[1]);

  // Equal W_k: weights are size-proportional.
  const std::vector<std::size_t> skewed_sizes{100, 300};
  auto w3 = ag::compute_weights(pmfs, g, skewed_sizes, sinrs, cfg);
  CHECK(w3.values[0] == doctest::Approx(0.25));
  CHECK(w3.values[1] == doctest::Approx(0.75));

  // No device selected -> empty-round signal.
  const std::vector<double> weak_sinrs{0.1, 0.2};
  auto none = ag::compute_weights(pmfs, g, sizes, weak_sinrs, cfg);
  CHECK_FALSE(none.any_selected);
}

TEST_CASE("weight ordering follows heterogeneity") {
  const auto g = pmf({0.25, 0.25, 0.25, 0.25});
  std::vector<dg::LabelPmf> pmfs{pmf({0.28, 0.24, 0.24, 0.24}),
                                 pmf({0.4, 0.3, 0.2, 0.1}),
                                 pmf({1.0, 0.0, 0.0, 0.0})};
  std::vector<std::size_t> sizes{50, 50, 50};
  std::vector<double> sinrs{1.0, 1.0, 1.0};
  ag::WeightConfig cfg;
  const auto w = ag::compute_weights(pmfs, g, sizes, sinrs, cfg);
  CHECK(w.values[0] > w.values[1]);
  CHECK(w.values[1] > w.values[2]);
  CHECK(w.values[0] + w.values[1] + w.values[2] == doctest::Approx(1.0));

  // A device at the W floor dominates but every weight stays finite.
  std::vector<dg::LabelPmf> with_floor{pmf({0.25, 0.25, 0.25, 0.25}),
                                       pmf({0.4, 0.3, 0.2, 0.1})};
  std::vector<std::size_t> two_sizes{50, 50};
  std::vector<double> two_sinrs{1.0, 1.0};
  const auto wf = ag::compute_weights(with_floor, g, two_sizes, two_sinrs, cfg);
  CHECK(std::isfinite(wf.values[0]));
  CHECK(wf.values[0] == doctest::Approx(1.0));
}

TEST_CASE("raising the threshold never adds a device") {
  Rng rng(99);
  const auto g = pmf({0.4, 0.3, 0.3});
  std::vector<dg::LabelPmf> pmfs;
  std::vector<std::size_t> sizes;
  std::vector<double> sinrs;
  for (int k = 0; k < 6; ++k) {
    pmfs.push_back(pmf(random_pmf(3, rng)));
    sizes.push_back(20 + rng.uniform_index(100));
    sinrs.push_back(rng.uniform(0.0, 10.0));
  }
  ag::WeightConfig cfg;
  std::size_t prev = 7;
  for (double th : {0.0, 1.0, 2.0, 4.0, 8.0, 16.0}) {
    cfg.gamma_th = th;
    const auto w = ag::compute_weights(pmfs, g, sizes, sinrs, cfg);
    const std::size_t count = w.selected_count();
    CHECK(count <= prev);
    prev = count;
    if (w.any_selected) {
      double sum = 0.0;
      for (std::size_t k = 0; k < w.values.size(); ++k) {
        sum += w.values[k];
        if (!w.selected[k]) CHECK(w.values[k] == 0.0);
      }
      CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("fedavg and angle policies") {
  const auto g = pmf({0.5, 0.5});
  std::vector<dg::LabelPmf> pmfs{pmf({1.0, 0.0}), pmf({0.0, 1.0})};
  std::vector<std::size_t> sizes{100, 300};
  std::vector<double> sinrs{1.0, 1.0};

  ag::WeightConfig fedavg;
  fedavg.policy = ag::WeightPolicy::kFedAvg;
  const auto wf = ag::compute_weights(pmfs, g, sizes, sinrs, fedavg);
  CHECK(wf.values[0] == doctest::Approx(0.25));
  CHECK(wf.values[1] == doctest::Approx(0.75));

  ag::WeightConfig angle;
  angle.policy = ag::WeightPolicy::kAngle;
  std::vector<double> angles{0.0, 1.0471975511965976};  // cos = 1, 0.5
  const auto wa = ag::compute_weights(pmfs, g, sizes, sinrs, angle, angles);
  // scores: 100 * 1, 300 * 0.5 -> 0.4, 0.6
  CHECK(wa.values[0] == doctest::Approx(0.4));
  CHECK(wa.values[1] == doctest::Approx(0.6));

  // All backwards angles -> uniform fallback over selected.
  std::vector<double> backwards{3.0, 3.0};
  const auto wb = ag::compute_weights(pmfs, g, sizes, sinrs, angle, backwards);
  CHECK(wb.values[0] == doctest::Approx(0.5));
  CHECK(wb.values[1] == doctest::Approx(0.5));

  CHECK_THROWS_AS(ag::compute_weights(pmfs, g, sizes, sinrs, angle),
                  std::invalid_argument);
}

TEST_CASE("aggregate and global_update") {
  ag::AggregationWeights w;
  w.values = {0.5, 0.5};
  w.selected = {true, true};
  w.any_selected = true;
  std::vector<std::vector<double>> grads{{1.0, 2.0}, {1.0, 2.0}};
  CHECK(ag::aggregate(grads, w) == std::vector<double>{1.0, 2.0});

  w.values = {1.0, 0.0};
  CHECK(ag::aggregate(grads, w) == grads[0]);

  // Linearity in the gradients.
  std::vector<std::vector<double>> scaled{{2.0, 4.0}, {2.0, 4.0}};
  w.values = {0.3, 0.7};
  const auto a1 = ag::aggregate(grads, w);
  const auto a2 = ag::aggregate(scaled, w);
  CHECK(a2[0] == doctest::Approx(2.0 * a1[0]));
  CHECK(a2[1] == doctest::Approx(2.0 * a1[1]));

  learner::ModelParams params{{1.0, 1.0}};
  ag::global_update(params, std::vector<double>{0.0, 0.0}, 0.1);
  CHECK(params.w == std::vector<double>{1.0, 1.0});
  ag::global_update(params, std::vector<double>{1.0, -1.0}, 0.0);
  CHECK(params.w == std::vector<double>{1.0, 1.0});
  ag::global_update(params, std::vector<double>{1.0, -1.0}, 0.5);
  CHECK(params.w[0] == doctest::Approx(0.5));
  CHECK(params.w[1] == doctest::Approx(1.5));
}

TEST_CASE("ser presets match the Q-function relation") {
  // gamma = Qinv(ser)^2 / 2, frozen from a high-precision evaluation.
  CHECK(ag::ser_to_gamma_th(0.1) == doctest::Approx(0.821187207574908193).epsilon(1e-10));
  CHECK(ag::ser_to_gamma_th(0.01) == doctest::Approx(2.70594721552717055).epsilon(1e-10));
  CHECK(ag::ser_to_gamma_th(0.001) == doctest::Approx(4.77476785304162165).epsilon(1e-10));
  CHECK_THROWS_AS(ag::ser_to_gamma_th(0.6), std::domain_error);
}
