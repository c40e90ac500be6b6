#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "catnas/cost_model.hpp"
#include "catnas/distribution.hpp"
#include "catnas/utility.hpp"

namespace catnas {

// eta_theta = 1 / sum_d K_d.
inline double default_learning_rate(const SearchSpace& space) {
  return 1.0 / static_cast<double>(space.total_categories());
}

// Default projection floor: half the uniform mass over all categories.
inline double default_theta_min(const SearchSpace& space) {
  return 1.0 / (2.0 * static_cast<double>(space.total_categories()));
}

// N component distributions over one space, each tied to a regularization
// coefficient epsilon_n.
struct Ensemble {
  std::vector<Distribution> components;
  std::vector<double> epsilons;
  double eta;
  double theta_min;

  void validate() const {
    if (components.empty()) throw std::invalid_argument("ensemble needs >= 1 component");
    if (components.size() != epsilons.size())
      throw std::invalid_argument("component/epsilon count mismatch");
    for (double e : epsilons)
      if (!(e >= 0.0)) throw std::invalid_argument("epsilons must be >= 0");
    if (!(eta > 0.0)) throw std::invalid_argument("learning rate must be > 0");
  }
};

struct StepReport {
  std::vector<double> pre_expected_complexity;
  std::vector<double> post_expected_complexity;
  double max_theta_change = 0.0;
  int projection_triggers = 0;
  // Largest |row sum - 1| seen before projection.
  double max_presum_drift = 0.0;
};

namespace detail {

// One component's update, Eq.-style full-vector form:
// theta_d <- theta_d - eta * ( lambda^{-1} sum_i s_i r_i (m_d^(i) - theta_d)
//                              + eps * (c_d - Q_d 1) (.) theta_d ).
// Returns the unprojected parameters.
inline RaggedMatrix update_component_raw(const Distribution& dist,
                                         const std::vector<Architecture>& samples,
                                         const std::vector<double>& utils,
                                         const std::vector<double>& ratios,
                                         const CostModel& cost, double eps,
                                         double eta) {
  const std::size_t lambda = samples.size();
  RaggedMatrix theta = dist.probs();
  const RaggedMatrix reg = nat_grad_expected_complexity(cost, dist);
  for (std::size_t d = 0; d < theta.size(); ++d) {
    auto& row = theta[d];
    std::vector<double> grad(row.size(), 0.0);
    for (std::size_t i = 0; i < lambda; ++i) {
      const double w = utils[i] * ratios[i] / static_cast<double>(lambda);
      const auto k = static_cast<std::size_t>(samples[i].choices[d]);
      for (std::size_t j = 0; j < row.size(); ++j)
        grad[j] += w * ((j == k ? 1.0 : 0.0) - row[j]);
    }
    for (std::size_t j = 0; j < row.size(); ++j)
      row[j] -= eta * (grad[j] + eps * reg[d][j]);
  }
  return theta;
}

inline void note_presum_drift(const RaggedMatrix& theta, StepReport* report) {
  if (!report) return;
  for (const auto& row : theta) {
    double s = 0.0;
    for (double p : row) s += p;
    report->max_presum_drift = std::max(report->max_presum_drift, std::abs(s - 1.0));
  }
}

inline void note_theta_change(const Distribution& before, const Distribution& after,
                              StepReport* report) {
  if (!report) return;
  for (std::size_t d = 0; d < before.dims(); ++d)
    for (std::size_t k = 0; k < before.row(d).size(); ++k)
      report->max_theta_change =
          std::max(report->max_theta_change, std::abs(after.row(d)[k] - before.row(d)[k]));
}

}  // namespace detail

// Unprojected single-distribution step (unit ratios). Exposed for invariant
// checks on pre-projection row sums.
inline RaggedMatrix update_single_raw(const Distribution& dist,
                                      const std::vector<Architecture>& samples,
                                      const std::vector<double>& losses,
                                      const CostModel& cost, double eps, double eta,
                                      const UtilityConfig& cfg = {}) {
  if (samples.empty()) throw std::invalid_argument("need at least one sample");
  if (samples.size() != losses.size())
    throw std::invalid_argument("samples/losses length mismatch");
  if (!(eta > 0.0)) throw std::invalid_argument("learning rate must be > 0");
  for (const Architecture& arch : samples) require_congruent(dist, arch);
  const WeightedBatch batch = WeightedBatch::unit(losses);
  const std::vector<double> utils = utilities(batch, cfg);
  return detail::update_component_raw(dist, samples, utils, batch.ratios, cost, eps, eta);
}

inline Distribution update_single(const Distribution& dist,
                                  const std::vector<Architecture>& samples,
                                  const std::vector<double>& losses,
                                  const CostModel& cost, double eps, double eta,
                                  double theta_min, const UtilityConfig& cfg = {},
                                  StepReport* report = nullptr) {
  if (report) {
    report->pre_expected_complexity.push_back(expected_complexity(cost, dist));
  }
  RaggedMatrix raw = update_single_raw(dist, samples, losses, cost, eps, eta, cfg);
  detail::note_presum_drift(raw, report);
  int clamps = 0;
  Distribution out = project(std::move(raw), theta_min, &clamps);
  if (report) {
    report->projection_triggers += clamps;
    report->post_expected_complexity.push_back(expected_complexity(cost, out));
    detail::note_theta_change(dist, out, report);
  }
  return out;
}

// Unprojected importance-sampled step for all components (Eq.-style update with
// component-specific ratios, utilities, and Q_d). Computed from the pre-step
// ensemble snapshot; commit is synchronous.
inline std::vector<RaggedMatrix> update_is_raw(const Ensemble& ens,
                                               const std::vector<Architecture>& samples,
                                               const std::vector<double>& losses,
                                               const CostModel& cost,
                                               const UtilityConfig& cfg = {}) {
  ens.validate();
  if (samples.empty()) throw std::invalid_argument("need at least one sample");
  if (samples.size() != losses.size())
    throw std::invalid_argument("samples/losses length mismatch");
  for (const Architecture& arch : samples)
    require_congruent(ens.components.front(), arch);
  const auto lp = log_prob_matrix(ens.components, samples);
  std::vector<RaggedMatrix> out;
  out.reserve(ens.components.size());
  for (std::size_t n = 0; n < ens.components.size(); ++n) {
    WeightedBatch batch;
    batch.losses = losses;
    batch.ratios = likelihood_ratios_from_logs(lp, n);
    const std::vector<double> utils = utilities(batch, cfg);
    out.push_back(detail::update_component_raw(ens.components[n], samples, utils,
                                               batch.ratios, cost, ens.epsilons[n],
                                               ens.eta));
  }
  return out;
}

inline Ensemble update_is(const Ensemble& ens, const std::vector<Architecture>& samples,
                          const std::vector<double>& losses, const CostModel& cost,
                          const UtilityConfig& cfg = {}, StepReport* report = nullptr) {
  if (report)
    for (const Distribution& d : ens.components)
      report->pre_expected_complexity.push_back(expected_complexity(cost, d));
  std::vector<RaggedMatrix> raw = update_is_raw(ens, samples, losses, cost, cfg);
  Ensemble next = ens;
  for (std::size_t n = 0; n < raw.size(); ++n) {
    detail::note_presum_drift(raw[n], report);
    int clamps = 0;
    next.components[n] = project(std::move(raw[n]), ens.theta_min, &clamps);
    if (report) {
      report->projection_triggers += clamps;
      report->post_expected_complexity.push_back(
          expected_complexity(cost, next.components[n]));
      detail::note_theta_change(ens.components[n], next.components[n], report);
    }
  }
  return next;
}

// Draws lambda architectures from the uniform mixture of the components.
inline std::vector<Architecture> sample_mixture(const Ensemble& ens, std::size_t lambda,
                                                SeededRandomSource& rng) {
  ens.validate();
  if (lambda == 0) throw std::invalid_argument("lambda must be >= 1");
  std::vector<Architecture> samples;
  samples.reserve(lambda);
  for (std::size_t i = 0; i < lambda; ++i) {
    const auto n = static_cast<std::size_t>(rng.next_below(ens.components.size()));
    samples.push_back(sample(ens.components[n], rng));
  }
  return samples;
}

}  // namespace catnas
