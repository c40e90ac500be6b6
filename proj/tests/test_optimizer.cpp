#include <doctest.h>

#include <cmath>
#include <map>
#include <vector>

#include "catnas/optimizer.hpp"
#include "catnas/table_objective.hpp"

using namespace catnas;

namespace {

Distribution random_dist(const SearchSpace& space, SeededRandomSource& rng) {
  RaggedMatrix probs(space.dims());
  for (std::size_t d = 0; d < space.dims(); ++d) {
    double s = 0.0;
    probs[d].resize(static_cast<std::size_t>(space.cardinality(d)));
    for (double& p : probs[d]) s += (p = 0.05 + rng.next_canonical());
    for (double& p : probs[d]) p /= s;
  }
  return Distribution(std::move(probs));
}

CostModel random_cost(const SearchSpace& space, SeededRandomSource& rng) {
  RaggedMatrix costs(space.dims());
  for (std::size_t d = 0; d < space.dims(); ++d)
    for (int k = 0; k < space.cardinality(d); ++k)
      costs[d].push_back(rng.next_canonical());
  return CostModel(costs);
}

}  // namespace

TEST_CASE("default learning rate and projection floor") {
  SearchSpace space({3, 4});
  CHECK(default_learning_rate(space) == doctest::Approx(1.0 / 7.0));
  CHECK(default_theta_min(space) == doctest::Approx(1.0 / 14.0));
  // The paper-scale spaces: sum K = 180 and 141.
  std::vector<int> cell(36, 5);
  CHECK(default_learning_rate(SearchSpace(cell)) == doctest::Approx(1.0 / 180.0));
  std::vector<int> proxyless(47, 3);
  CHECK(default_learning_rate(SearchSpace(proxyless)) == doctest::Approx(1.0 / 141.0));
}

TEST_CASE("update_single hand-evaluated step") {
  // lambda=2, utilities (0,2); the worse sample picked category 1 on a K=2
  // dimension with theta=(0.5,0.5): theta moves away from category 1.
  SearchSpace space({2});
  CostModel cost(RaggedMatrix{{0, 0}});
  Distribution dist = Distribution::uniform(space);
  const std::vector<Architecture> samples{{{0}}, {{1}}};
  const std::vector<double> losses{0.0, 1.0};
  const RaggedMatrix raw = update_single_raw(dist, samples, losses, cost, 0.0, 0.1);
  CHECK(raw[0][0] == doctest::Approx(0.55));
  CHECK(raw[0][1] == doctest::Approx(0.45));
}

TEST_CASE("all-mid utilities leave the distribution unchanged when eps=0") {
  // lambda=4 with losses placing every sample in the mid band is impossible,
  // but a zero-valued utility table gives an exactly zero likelihood term.
  SearchSpace space({3, 2});
  SeededRandomSource rng(7);
  Distribution dist = random_dist(space, rng);
  CostModel cost = random_cost(space, rng);
  UtilityConfig cfg;
  cfg.low = cfg.mid = cfg.high = 0.0;
  std::vector<Architecture> samples;
  std::vector<double> losses;
  for (int i = 0; i < 4; ++i) {
    samples.push_back(sample(dist, rng));
    losses.push_back(rng.next_canonical());
  }
  const RaggedMatrix raw = update_single_raw(dist, samples, losses, cost, 0.0, 0.1, cfg);
  for (std::size_t d = 0; d < dist.dims(); ++d)
    for (std::size_t k = 0; k < dist.row(d).size(); ++k)
      CHECK(raw[d][k] == doctest::Approx(dist.row(d)[k]).epsilon(1e-15));
}

TEST_CASE("constant per-dimension costs make eps irrelevant") {
  SearchSpace space({3, 2});
  CostModel cost(RaggedMatrix{{4, 4, 4}, {2, 2}});
  SeededRandomSource rng(9);
  Distribution dist = random_dist(space, rng);
  std::vector<Architecture> samples{sample(dist, rng), sample(dist, rng)};
  std::vector<double> losses{0.3, 0.9};
  const RaggedMatrix with_eps = update_single_raw(dist, samples, losses, cost, 0.7, 0.1);
  const RaggedMatrix without = update_single_raw(dist, samples, losses, cost, 0.0, 0.1);
  for (std::size_t d = 0; d < with_eps.size(); ++d)
    for (std::size_t k = 0; k < with_eps[d].size(); ++k)
      CHECK(with_eps[d][k] == doctest::Approx(without[d][k]).epsilon(1e-14));
}

TEST_CASE("pre-projection row sums stay at one") {
  SearchSpace space({4, 3, 5});
  SeededRandomSource rng(13);
  for (int rep = 0; rep < 500; ++rep) {
    Distribution dist = random_dist(space, rng);
    CostModel cost = random_cost(space, rng);
    std::vector<Architecture> samples;
    std::vector<double> losses;
    for (int i = 0; i < 4; ++i) {
      samples.push_back(sample(dist, rng));
      losses.push_back(rng.next_canonical());
    }
    const RaggedMatrix raw =
        update_single_raw(dist, samples, losses, cost, 0.4, 1.0 / 12.0);
    for (const auto& row : raw) {
      double s = 0.0;
      for (double v : row) s += v;
      CHECK(std::abs(s - 1.0) < 1e-12);
    }
  }
}

TEST_CASE("update_is with one component equals update_single") {
  SearchSpace space({3, 2, 4});
  SeededRandomSource rng(17);
  for (int rep = 0; rep < 200; ++rep) {
    Distribution dist = random_dist(space, rng);
    CostModel cost = random_cost(space, rng);
    Ensemble ens;
    ens.components = {dist};
    ens.epsilons = {0.25};
    ens.eta = 1.0 / 9.0;
    ens.theta_min = 1e-3;
    std::vector<Architecture> samples;
    std::vector<double> losses;
    for (int i = 0; i < 3; ++i) {
      samples.push_back(sample(dist, rng));
      losses.push_back(rng.next_canonical());
    }
    const RaggedMatrix single =
        update_single_raw(dist, samples, losses, cost, 0.25, ens.eta);
    const RaggedMatrix is = update_is_raw(ens, samples, losses, cost)[0];
    for (std::size_t d = 0; d < single.size(); ++d)
      for (std::size_t k = 0; k < single[d].size(); ++k)
        CHECK(std::abs(is[d][k] - single[d][k]) < 1e-12);
  }
}

TEST_CASE("identical components receive identical updates") {
  SearchSpace space({2, 3});
  SeededRandomSource rng(19);
  Distribution dist = random_dist(space, rng);
  CostModel cost = random_cost(space, rng);
  Ensemble ens;
  ens.components = {dist, dist};
  ens.epsilons = {0.2, 0.2 + 1e-300};  // effectively equal, formally distinct
  ens.eta = 0.1;
  ens.theta_min = 1e-3;
  std::vector<Architecture> samples{sample(dist, rng), sample(dist, rng)};
  std::vector<double> losses{0.1, 0.7};
  const auto raw = update_is_raw(ens, samples, losses, cost);
  for (std::size_t d = 0; d < raw[0].size(); ++d)
    for (std::size_t k = 0; k < raw[0][d].size(); ++k)
      CHECK(raw[0][d][k] == doctest::Approx(raw[1][d][k]).epsilon(1e-14));
}

TEST_CASE("update_is matches a hand-evaluated two-component step") {
  // D=1, K=2; theta^(1)=(0.8,0.2), theta^(2)=(0.4,0.6); samples h=0 (loss 1.0)
  // and h=1 (loss 2.0); eta=0.1, eps=(0, 0.5), costs (1, 3).
  //
  // Mixture masses: P(h=0)=0.6, P(h=1)=0.4.
  // Component 1 ratios: r = (0.8/0.6, 0.2/0.4) = (4/3, 1/2).
  // Component 2 ratios: r = (0.4/0.6, 0.6/0.4) = (2/3, 3/2).
  // Component 1 quantiles: q1 = r1/2 = 2/3 -> mid(0); q2 = (r1+r2)/2 = 11/12 -> high(2).
  // Component 2 quantiles: q1 = r1/2 = 1/3 -> mid(0); q2 = (r1+r2)/2 = 13/12 -> high(2).
  // Likelihood terms (entry 0): comp1: (1/2)*2*(1/2)*(0-0.8) = -0.4
  //                             comp2: (1/2)*2*(3/2)*(0-0.4) = -0.6
  // Regularization comp2: Q = 0.4*1+0.6*3 = 2.2; (c-Q).theta = (-1.2*0.4, 0.8*0.6).
  // Updates (entry 0): comp1: 0.8 - 0.1*(-0.4) = 0.84
  //                    comp2: 0.4 - 0.1*(-0.6 + 0.5*(-0.48)) = 0.484
  Ensemble ens;
  ens.components = {Distribution(RaggedMatrix{{0.8, 0.2}}),
                    Distribution(RaggedMatrix{{0.4, 0.6}})};
  ens.epsilons = {0.0, 0.5};
  ens.eta = 0.1;
  ens.theta_min = 1e-3;
  CostModel cost(RaggedMatrix{{1, 3}});
  const std::vector<Architecture> samples{{{0}}, {{1}}};
  const std::vector<double> losses{1.0, 2.0};
  const auto raw = update_is_raw(ens, samples, losses, cost);
  CHECK(raw[0][0][0] == doctest::Approx(0.84).epsilon(1e-12));
  CHECK(raw[0][0][1] == doctest::Approx(0.16).epsilon(1e-12));
  CHECK(raw[1][0][0] == doctest::Approx(0.484).epsilon(1e-12));
  CHECK(raw[1][0][1] == doctest::Approx(0.516).epsilon(1e-12));
}

TEST_CASE("mixture sampling realizes the component average") {
  SearchSpace space({2});
  Ensemble ens;
  ens.components = {Distribution(RaggedMatrix{{1.0, 0.0}}),
                    Distribution(RaggedMatrix{{0.0, 1.0}})};
  ens.epsilons = {0.0, 0.1};
  ens.eta = 0.1;
  ens.theta_min = 0.0;
  SeededRandomSource rng(77);
  const auto samples = sample_mixture(ens, 100000, rng);
  int zeros = 0;
  for (const Architecture& a : samples) zeros += (a.choices[0] == 0);
  CHECK(std::abs(zeros / 100000.0 - 0.5) < 0.01);
}

TEST_CASE("mixture joint frequencies match the mixture mass over a small space") {
  SearchSpace space({2, 3});
  SeededRandomSource rng(81);
  Ensemble ens;
  ens.components = {random_dist(space, rng), random_dist(space, rng)};
  ens.epsilons = {0.0, 0.1};
  ens.eta = 0.1;
  ens.theta_min = 0.0;
  SeededRandomSource srng(83);
  const int n = 100000;
  const auto samples = sample_mixture(ens, n, srng);
  std::map<std::vector<int>, int> counts;
  for (const Architecture& a : samples) ++counts[a.choices];
  space.enumerate([&](const Architecture& a) {
    const double mass = 0.5 * (std::exp(log_prob(ens.components[0], a)) +
                               std::exp(log_prob(ens.components[1], a)));
    CHECK(std::abs(counts[a.choices] / double(n) - mass) < 0.01);
  });
}

TEST_CASE("pure regularization pressure moves mass toward the cheap category") {
  SearchSpace space({3});
  CostModel cost(RaggedMatrix{{5, 2, 1}});
  Distribution dist = Distribution::uniform(space);
  UtilityConfig flat;
  flat.low = flat.mid = flat.high = 0.0;  // disable the loss term entirely
  SeededRandomSource rng(91);
  double prev = dist.row(0)[2];
  for (int t = 0; t < 200; ++t) {
    std::vector<Architecture> samples{sample(dist, rng), sample(dist, rng)};
    std::vector<double> losses{1.0, 1.0};
    dist = update_single(dist, samples, losses, cost, 0.5, 0.1, 1e-4, flat);
    CHECK(dist.row(0)[2] >= prev - 1e-15);
    prev = dist.row(0)[2];
  }
  CHECK(prev > 0.9);
}

TEST_CASE("eps=0 update is invariant under affine loss transformations") {
  SearchSpace space({3, 2});
  SeededRandomSource rng(97);
  Distribution dist = random_dist(space, rng);
  CostModel cost = random_cost(space, rng);
  std::vector<Architecture> samples;
  std::vector<double> losses;
  for (int i = 0; i < 6; ++i) {
    samples.push_back(sample(dist, rng));
    losses.push_back(rng.next_canonical());
  }
  std::vector<double> affine = losses;
  for (double& l : affine) l = 3.5 * l - 2.0;
  const RaggedMatrix a = update_single_raw(dist, samples, losses, cost, 0.0, 0.1);
  const RaggedMatrix b = update_single_raw(dist, samples, affine, cost, 0.0, 0.1);
  for (std::size_t d = 0; d < a.size(); ++d)
    for (std::size_t k = 0; k < a[d].size(); ++k) CHECK(a[d][k] == b[d][k]);
}

TEST_CASE("selection pressure concentrates mass on the best category") {
  // Deterministic separable table, eps=0: after 500 iterations the best
  // category's theta exceeds its initial value in every dimension, on
  // average over 20 seeds.
  SearchSpace space({3, 3});
  TableObjective obj;
  obj.losses = {{0.0, 1.0, 2.0}, {2.0, 0.0, 1.0}};
  CostModel cost(RaggedMatrix{{0, 0, 0}, {0, 0, 0}});
  const double eta = default_learning_rate(space);
  std::vector<double> mean_best(2, 0.0);
  for (int seed = 0; seed < 20; ++seed) {
    Distribution dist = Distribution::uniform(space);
    SeededRandomSource rng(1000 + static_cast<std::uint64_t>(seed));
    for (int t = 0; t < 500; ++t) {
      std::vector<Architecture> samples{sample(dist, rng), sample(dist, rng)};
      std::vector<double> losses;
      for (const Architecture& a : samples)
        losses.push_back(obj.deterministic_value(a));
      dist = update_single(dist, samples, losses, cost, 0.0, eta, 1e-3);
    }
    mean_best[0] += dist.row(0)[0] / 20.0;
    mean_best[1] += dist.row(1)[1] / 20.0;
  }
  CHECK(mean_best[0] > 1.0 / 3.0);
  CHECK(mean_best[1] > 1.0 / 3.0);
}

TEST_CASE("step report tracks projection and complexity") {
  SearchSpace space({2});
  CostModel cost(RaggedMatrix{{1, 2}});
  Distribution dist(RaggedMatrix{{0.99, 0.01}});
  StepReport report;
  const std::vector<Architecture> samples{{{1}}, {{0}}};
  const std::vector<double> losses{0.0, 1.0};
  (void)update_single(dist, samples, losses, cost, 0.0, 0.5, 0.05, {}, &report);
  CHECK(report.pre_expected_complexity.size() == 1);
  CHECK(report.post_expected_complexity.size() == 1);
  CHECK(report.projection_triggers >= 1);
  CHECK(report.max_theta_change > 0.0);
  CHECK(report.max_presum_drift < 1e-12);
}
