#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "catnas/optimizer.hpp"
#include "catnas/utility.hpp"

using namespace catnas;

TEST_CASE("quantile levels with unit ratios count dominated losses") {
  const auto q = quantile_levels(WeightedBatch::unit({3, 1, 2, 4}));
  CHECK(q == std::vector<double>{0.75, 0.25, 0.5, 1.0});

  const auto tied = quantile_levels(WeightedBatch::unit({2, 2, 2}));
  for (double v : tied) CHECK(v == 1.0);

  WeightedBatch weighted;
  weighted.losses = {1, 2};
  weighted.ratios = {2, 0};
  const auto qw = quantile_levels(weighted);
  CHECK(qw == std::vector<double>{1.0, 1.0});

  CHECK_THROWS_AS(quantile_levels(WeightedBatch{}), std::invalid_argument);
}

TEST_CASE("w uses the closed/open interval convention") {
  const UtilityConfig cfg;
  CHECK(utility_from_quantile(0.25, cfg) == -2.0);
  CHECK(utility_from_quantile(0.5, cfg) == 0.0);
  CHECK(utility_from_quantile(0.75, cfg) == 0.0);
  CHECK(utility_from_quantile(1.0, cfg) == 2.0);
  // Importance-weighted quantiles can exceed 1.
  CHECK(utility_from_quantile(1.7, cfg) == 2.0);
}

TEST_CASE("utilities compose quantiles and w") {
  const UtilityConfig cfg;
  CHECK(utilities(WeightedBatch::unit({3, 1, 5, 9}), cfg) ==
        std::vector<double>{0, -2, 0, 2});
  CHECK(utilities(WeightedBatch::unit({1.5, 0.5}), cfg) == std::vector<double>{2, 0});
  CHECK(utilities(WeightedBatch::unit({42.0}), cfg) == std::vector<double>{2});
}

TEST_CASE("low/high utility counts follow the floor formula for distinct losses") {
  const UtilityConfig cfg;
  SeededRandomSource rng(101);
  for (int lambda = 1; lambda <= 16; ++lambda) {
    std::vector<double> losses(static_cast<std::size_t>(lambda));
    for (double& l : losses) l = rng.next_canonical();
    const auto u = utilities(WeightedBatch::unit(losses), cfg);
    const auto low = std::count(u.begin(), u.end(), cfg.low);
    const auto high = std::count(u.begin(), u.end(), cfg.high);
    CHECK(low == lambda / 4);
    CHECK(high == lambda - (3 * lambda) / 4);
  }
}

TEST_CASE("utilities are invariant under monotone loss transformations") {
  const UtilityConfig cfg;
  SeededRandomSource rng(55);
  for (int rep = 0; rep < 100; ++rep) {
    std::vector<double> losses(8);
    for (double& l : losses) l = 10.0 * rng.next_canonical() - 5.0;
    std::vector<double> mapped = losses;
    for (double& l : mapped) l = std::exp(0.3 * l) + 7.0;
    CHECK(utilities(WeightedBatch::unit(losses), cfg) ==
          utilities(WeightedBatch::unit(mapped), cfg));
  }
}

TEST_CASE("likelihood ratios degenerate to one") {
  Distribution a(RaggedMatrix{{0.8, 0.2}});
  const std::vector<Architecture> samples{{{0}}, {{1}}, {{0}}};
  for (double r : likelihood_ratios({a}, samples, 0)) CHECK(r == 1.0);
  for (double r : likelihood_ratios({a, a, a}, samples, 1)) CHECK(r == 1.0);
}

TEST_CASE("likelihood ratio against a two-component mixture") {
  Distribution a(RaggedMatrix{{0.8, 0.2}});
  Distribution b(RaggedMatrix{{0.2, 0.8}});
  const std::vector<Architecture> samples{{{0}}};
  CHECK(likelihood_ratios({a, b}, samples, 0)[0] == doctest::Approx(1.6));
  CHECK(likelihood_ratios({a, b}, samples, 1)[0] == doctest::Approx(0.4));
}

TEST_CASE("likelihood ratios reject zero mixture mass") {
  Distribution a(RaggedMatrix{{1.0, 0.0}});
  Distribution b(RaggedMatrix{{1.0, 0.0}});
  CHECK_THROWS_AS(likelihood_ratios({a, b}, {Architecture{{1}}}, 0), std::domain_error);
}

TEST_CASE("ratios are invariant under reordering of the other components") {
  Distribution a(RaggedMatrix{{0.7, 0.3}, {0.5, 0.5}});
  Distribution b(RaggedMatrix{{0.1, 0.9}, {0.6, 0.4}});
  Distribution c(RaggedMatrix{{0.4, 0.6}, {0.2, 0.8}});
  const std::vector<Architecture> samples{{{0, 1}}, {{1, 0}}, {{1, 1}}};
  const auto r1 = likelihood_ratios({a, b, c}, samples, 0);
  const auto r2 = likelihood_ratios({a, c, b}, samples, 0);
  for (std::size_t i = 0; i < samples.size(); ++i)
    CHECK(r1[i] == doctest::Approx(r2[i]).epsilon(1e-14));
}

TEST_CASE("mean ratio over mixture samples is close to one") {
  // Unbiasedness of the importance weights under mixture sampling.
  Distribution a(RaggedMatrix{{0.7, 0.3}, {0.4, 0.6}});
  Distribution b(RaggedMatrix{{0.2, 0.8}, {0.9, 0.1}});
  Distribution c(RaggedMatrix{{0.5, 0.5}, {0.3, 0.7}});
  Ensemble ens;
  ens.components = {a, b, c};
  ens.epsilons = {0.0, 0.1, 0.2};
  ens.eta = 0.1;
  ens.theta_min = 1e-3;
  SeededRandomSource rng(2024);
  const auto samples = sample_mixture(ens, 100000, rng);
  for (std::size_t n = 0; n < 3; ++n) {
    const auto r = likelihood_ratios(ens.components, samples, n);
    const double mean = std::accumulate(r.begin(), r.end(), 0.0) / double(r.size());
    CHECK(std::abs(mean - 1.0) < 0.02);
  }
}
