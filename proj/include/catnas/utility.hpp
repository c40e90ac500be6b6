#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "catnas/distribution.hpp"

namespace catnas {

// Quantile-based utility w: {low, mid, high} by loss quantile.
struct UtilityConfig {
  double lower = 0.25;
  double upper = 0.75;
  double low = -2.0;
  double mid = 0.0;
  double high = 2.0;

  void validate() const {
    if (!(0.0 < lower && lower < upper && upper <= 1.0))
      throw std::invalid_argument("utility thresholds need 0 < lower < upper <= 1");
    if (!(low <= mid && mid <= high))
      throw std::invalid_argument("utility values need low <= mid <= high");
  }
};

// A batch of lambda losses with likelihood ratios (all-ones when sampling
// directly from the distribution being updated).
struct WeightedBatch {
  std::vector<double> losses;
  std::vector<double> ratios;

  static WeightedBatch unit(std::vector<double> losses) {
    WeightedBatch b;
    b.ratios.assign(losses.size(), 1.0);
    b.losses = std::move(losses);
    return b;
  }

  void validate() const {
    if (losses.empty()) throw std::invalid_argument("empty batch");
    if (ratios.size() != losses.size())
      throw std::invalid_argument("losses/ratios length mismatch");
    for (double r : ratios)
      if (!(r >= 0.0) || !std::isfinite(r))
        throw std::invalid_argument("ratios must be finite and >= 0");
  }
};

// q_i = lambda^{-1} sum_k r_k * 1{loss_k <= loss_i}.
inline std::vector<double> quantile_levels(const WeightedBatch& batch) {
  batch.validate();
  const std::size_t n = batch.losses.size();
  std::vector<double> q(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (std::size_t k = 0; k < n; ++k)
      if (batch.losses[k] <= batch.losses[i]) acc += batch.ratios[k];
    q[i] = acc / static_cast<double>(n);
  }
  return q;
}

inline double utility_from_quantile(double q, const UtilityConfig& cfg) {
  if (q <= cfg.lower) return cfg.low;
  if (q <= cfg.upper) return cfg.mid;
  return cfg.high;
}

inline std::vector<double> utilities(const WeightedBatch& batch,
                                     const UtilityConfig& cfg) {
  cfg.validate();
  std::vector<double> q = quantile_levels(batch);
  for (double& v : q) v = utility_from_quantile(v, cfg);
  return q;
}

// Caps pathological ratios after near-zero mixture mass.
inline constexpr double kRatioCeiling = 1e6;

// Log-probability of every sample under every component: [component][sample].
inline std::vector<std::vector<double>> log_prob_matrix(
    const std::vector<Distribution>& dists, const std::vector<Architecture>& samples) {
  std::vector<std::vector<double>> lp(dists.size());
  for (std::size_t n = 0; n < dists.size(); ++n) {
    lp[n].reserve(samples.size());
    for (const Architecture& arch : samples) lp[n].push_back(log_prob(dists[n], arch));
  }
  return lp;
}

// Ratios r_i = P_{theta^(n)}(M_i) / (N^{-1} sum_j P_{theta^(j)}(M_i)),
// computed in the log domain with a max shift.
inline std::vector<double> likelihood_ratios_from_logs(
    const std::vector<std::vector<double>>& lp, std::size_t n) {
  const std::size_t num_components = lp.size();
  const std::size_t num_samples = lp.empty() ? 0 : lp[0].size();
  std::vector<double> ratios(num_samples);
  for (std::size_t i = 0; i < num_samples; ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < num_components; ++j) mx = std::max(mx, lp[j][i]);
    if (!std::isfinite(mx))
      throw std::domain_error("sample has zero probability under the mixture");
    double sum = 0.0;
    for (std::size_t j = 0; j < num_components; ++j) sum += std::exp(lp[j][i] - mx);
    // log mixture = mx + log(sum / N)
    const double log_mix = mx + std::log(sum / static_cast<double>(num_components));
    const double r = std::exp(lp[n][i] - log_mix);
    ratios[i] = std::min(r, kRatioCeiling);
  }
  return ratios;
}

inline std::vector<double> likelihood_ratios(const std::vector<Distribution>& dists,
                                             const std::vector<Architecture>& samples,
                                             std::size_t n) {
  if (n >= dists.size()) throw std::invalid_argument("component index out of range");
  return likelihood_ratios_from_logs(log_prob_matrix(dists, samples), n);
}

}  // namespace catnas
