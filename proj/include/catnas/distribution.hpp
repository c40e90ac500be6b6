#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "catnas/random.hpp"
#include "catnas/search_space.hpp"

namespace catnas {

using RaggedMatrix = std::vector<std::vector<double>>;

// Factorized categorical distribution: one probability row per dimension.
class Distribution {
 public:
  explicit Distribution(RaggedMatrix probs) : probs_(std::move(probs)) {
    for (const auto& row : probs_) {
      if (row.size() < 2) throw std::invalid_argument("probability row too short");
      double s = 0.0;
      for (double p : row) {
        if (!(p >= 0.0) || !std::isfinite(p))
          throw std::invalid_argument("probability entries must be finite and >= 0");
        s += p;
      }
      if (std::abs(s - 1.0) > 1e-9)
        throw std::invalid_argument("probability row does not sum to 1");
    }
  }

  static Distribution uniform(const SearchSpace& space) {
    RaggedMatrix probs(space.dims());
    for (std::size_t d = 0; d < space.dims(); ++d)
      probs[d].assign(static_cast<std::size_t>(space.cardinality(d)),
                      1.0 / space.cardinality(d));
    return Distribution(std::move(probs));
  }

  std::size_t dims() const { return probs_.size(); }
  const std::vector<double>& row(std::size_t d) const { return probs_.at(d); }
  const RaggedMatrix& probs() const { return probs_; }

  bool congruent_with(const SearchSpace& space) const {
    if (probs_.size() != space.dims()) return false;
    for (std::size_t d = 0; d < probs_.size(); ++d)
      if (probs_[d].size() != static_cast<std::size_t>(space.cardinality(d)))
        return false;
    return true;
  }

 private:
  RaggedMatrix probs_;
};

inline void require_congruent(const Distribution& dist, const Architecture& arch) {
  if (arch.choices.size() != dist.dims())
    throw std::invalid_argument("architecture/distribution dimension mismatch");
  for (std::size_t d = 0; d < dist.dims(); ++d)
    if (arch.choices[d] < 0 ||
        static_cast<std::size_t>(arch.choices[d]) >= dist.row(d).size())
      throw std::invalid_argument("category index out of range");
}

inline Architecture sample(const Distribution& dist, SeededRandomSource& rng) {
  Architecture arch;
  arch.choices.reserve(dist.dims());
  for (std::size_t d = 0; d < dist.dims(); ++d)
    arch.choices.push_back(static_cast<int>(rng.next_categorical(dist.row(d))));
  return arch;
}

// ln P_theta(M) = sum_d ln theta_{d, h_d}; -inf for zero-probability choices.
inline double log_prob(const Distribution& dist, const Architecture& arch) {
  require_congruent(dist, arch);
  double lp = 0.0;
  for (std::size_t d = 0; d < dist.dims(); ++d) {
    const double p = dist.row(d)[static_cast<std::size_t>(arch.choices[d])];
    if (p == 0.0) return -std::numeric_limits<double>::infinity();
    lp += std::log(p);
  }
  return lp;
}

// Natural gradient of the log-likelihood, full-vector form: row d = m_d - theta_d.
inline RaggedMatrix nat_grad_log_likelihood(const Distribution& dist,
                                            const Architecture& arch) {
  require_congruent(dist, arch);
  RaggedMatrix grad(dist.dims());
  for (std::size_t d = 0; d < dist.dims(); ++d) {
    const auto& row = dist.row(d);
    grad[d].resize(row.size());
    for (std::size_t k = 0; k < row.size(); ++k)
      grad[d][k] = (static_cast<std::size_t>(arch.choices[d]) == k ? 1.0 : 0.0) - row[k];
  }
  return grad;
}

// Inverse of the d-th FIM block: diag(theta_bar) - theta_bar theta_bar^T,
// over the first K_d - 1 probabilities.
inline std::vector<std::vector<double>> fim_inverse_block(const Distribution& dist,
                                                          std::size_t d) {
  const auto& row = dist.row(d);
  for (double p : row)
    if (p <= 0.0 || p >= 1.0)
      throw std::domain_error("FIM block is singular at a degenerate row");
  const std::size_t m = row.size() - 1;
  std::vector<std::vector<double>> inv(m, std::vector<double>(m));
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j)
      inv[i][j] = (i == j ? row[i] : 0.0) - row[i] * row[j];
  return inv;
}

// Per-dimension argmax; ties break to the lowest category index.
inline Architecture most_probable(const Distribution& dist) {
  Architecture arch;
  arch.choices.reserve(dist.dims());
  for (std::size_t d = 0; d < dist.dims(); ++d) {
    const auto& row = dist.row(d);
    std::size_t best = 0;
    for (std::size_t k = 1; k < row.size(); ++k)
      if (row[k] > row[best]) best = k;
    arch.choices.push_back(static_cast<int>(best));
  }
  return arch;
}

// Clamps every entry to >= theta_min, then renormalizes each row to sum 1.
// Accepts slightly drifted rows (entries below zero, sums off by ~1e-6).
inline Distribution project(RaggedMatrix probs, double theta_min,
                            int* clamp_count = nullptr) {
  int clamped = 0;
  for (auto& row : probs) {
    double drift = 0.0;
    for (double p : row) drift += p;
    if (!std::isfinite(drift) || std::abs(drift - 1.0) > 1e-6)
      throw std::domain_error("row drifted too far from the simplex");
    double s = 0.0;
    for (double& p : row) {
      if (p < theta_min) {
        p = theta_min;
        ++clamped;
      }
      s += p;
    }
    for (double& p : row) p /= s;
  }
  if (clamp_count) *clamp_count = clamped;
  return Distribution(std::move(probs));
}

inline Distribution project(const Distribution& dist, double theta_min,
                            int* clamp_count = nullptr) {
  return project(dist.probs(), theta_min, clamp_count);
}

// Shannon entropy (nats) of one probability row.
inline double row_entropy(const Distribution& dist, std::size_t d) {
  double h = 0.0;
  for (double p : dist.row(d))
    if (p > 0.0) h -= p * std::log(p);
  return h;
}

}  // namespace catnas
