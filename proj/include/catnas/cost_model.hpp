#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "catnas/distribution.hpp"
#include "catnas/search_space.hpp"

namespace catnas {

enum class CostNormalization { kRaw, kGlobalMax };

// Per-category complexity costs c_{d,k} (e.g. weight-parameter counts).
class CostModel {
 public:
  explicit CostModel(RaggedMatrix costs,
                     CostNormalization mode = CostNormalization::kRaw)
      : costs_(std::move(costs)), mode_(mode) {
    for (const auto& row : costs_)
      for (double c : row)
        if (!(c >= 0.0) || !std::isfinite(c))
          throw std::invalid_argument("costs must be finite and >= 0");
    if (mode_ == CostNormalization::kGlobalMax) {
      double mx = 0.0;
      for (const auto& row : costs_) for (double c : row) mx = std::max(mx, c);
      if (std::abs(mx - 1.0) > 1e-12)
        throw std::invalid_argument("global-max mode requires max cost == 1");
    }
  }

  std::size_t dims() const { return costs_.size(); }
  const std::vector<double>& row(std::size_t d) const { return costs_.at(d); }
  const RaggedMatrix& costs() const { return costs_; }
  CostNormalization mode() const { return mode_; }

  bool congruent_with(const SearchSpace& space) const {
    if (costs_.size() != space.dims()) return false;
    for (std::size_t d = 0; d < costs_.size(); ++d)
      if (costs_[d].size() != static_cast<std::size_t>(space.cardinality(d)))
        return false;
    return true;
  }

 private:
  RaggedMatrix costs_;
  CostNormalization mode_;
};

inline void require_congruent(const CostModel& cost, const Architecture& arch) {
  if (arch.choices.size() != cost.dims())
    throw std::invalid_argument("architecture/cost dimension mismatch");
  for (std::size_t d = 0; d < cost.dims(); ++d)
    if (arch.choices[d] < 0 ||
        static_cast<std::size_t>(arch.choices[d]) >= cost.row(d).size())
      throw std::invalid_argument("category index out of range");
}

// R(M) = sum_d c_{d, h_d}.
inline double complexity(const CostModel& cost, const Architecture& arch) {
  require_congruent(cost, arch);
  double r = 0.0;
  for (std::size_t d = 0; d < cost.dims(); ++d)
    r += cost.row(d)[static_cast<std::size_t>(arch.choices[d])];
  return r;
}

// E_{P_theta}[R(M)] = sum_d sum_k c_{d,k} theta_{d,k}.
inline double expected_complexity(const CostModel& cost, const Distribution& dist) {
  if (cost.dims() != dist.dims())
    throw std::invalid_argument("cost/distribution dimension mismatch");
  double e = 0.0;
  for (std::size_t d = 0; d < cost.dims(); ++d) {
    const auto& c = cost.row(d);
    const auto& t = dist.row(d);
    if (c.size() != t.size())
      throw std::invalid_argument("cost/distribution row size mismatch");
    for (std::size_t k = 0; k < c.size(); ++k) e += c[k] * t[k];
  }
  return e;
}

// Natural gradient of the expected complexity, full-vector form:
// row d entry k = (c_{d,k} - Q_d) * theta_{d,k},  Q_d = sum_k c_{d,k} theta_{d,k}.
inline RaggedMatrix nat_grad_expected_complexity(const CostModel& cost,
                                                 const Distribution& dist) {
  if (cost.dims() != dist.dims())
    throw std::invalid_argument("cost/distribution dimension mismatch");
  RaggedMatrix grad(cost.dims());
  for (std::size_t d = 0; d < cost.dims(); ++d) {
    const auto& c = cost.row(d);
    const auto& t = dist.row(d);
    if (c.size() != t.size())
      throw std::invalid_argument("cost/distribution row size mismatch");
    double q = 0.0;
    for (std::size_t k = 0; k < c.size(); ++k) q += c[k] * t[k];
    grad[d].resize(c.size());
    for (std::size_t k = 0; k < c.size(); ++k) grad[d][k] = (c[k] - q) * t[k];
  }
  return grad;
}

// Divides every entry by the global maximum; idempotent on normalized models.
inline CostModel normalize_costs(const CostModel& cost) {
  double mx = 0.0;
  for (std::size_t d = 0; d < cost.dims(); ++d)
    for (double c : cost.row(d)) mx = std::max(mx, c);
  if (mx == 0.0) throw std::invalid_argument("cannot normalize an all-zero cost model");
  RaggedMatrix scaled = cost.costs();
  for (auto& row : scaled)
    for (double& c : row) c /= mx;
  return CostModel(std::move(scaled), CostNormalization::kGlobalMax);
}

}  // namespace catnas
