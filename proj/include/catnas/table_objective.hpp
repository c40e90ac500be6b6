#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "catnas/cost_model.hpp"
#include "catnas/random.hpp"
#include "catnas/search_space.hpp"

namespace catnas {

// Deterministic (or Gaussian-noised) table objective: per-dimension losses
// plus optional pairwise couplings. Desk-scale surrogate for a trained loss.
struct TableObjective {
  struct Coupling {
    int dim_a = 0;
    int dim_b = 0;
    int cat_a = 0;
    int cat_b = 0;
    double value = 0.0;
  };

  RaggedMatrix losses;
  std::vector<Coupling> couplings;
  double noise_sigma = 0.0;

  void require_congruent(const Architecture& arch) const {
    if (arch.choices.size() != losses.size())
      throw std::invalid_argument("architecture/table dimension mismatch");
    for (std::size_t d = 0; d < losses.size(); ++d)
      if (arch.choices[d] < 0 ||
          static_cast<std::size_t>(arch.choices[d]) >= losses[d].size())
        throw std::invalid_argument("category index out of range");
  }

  double deterministic_value(const Architecture& arch) const {
    require_congruent(arch);
    double v = 0.0;
    for (std::size_t d = 0; d < losses.size(); ++d)
      v += losses[d][static_cast<std::size_t>(arch.choices[d])];
    for (const Coupling& c : couplings)
      if (arch.choices[static_cast<std::size_t>(c.dim_a)] == c.cat_a &&
          arch.choices[static_cast<std::size_t>(c.dim_b)] == c.cat_b)
        v += c.value;
    return v;
  }
};

inline double table_evaluate(const TableObjective& obj, const Architecture& arch,
                             SeededRandomSource& rng) {
  double v = obj.deterministic_value(arch);
  if (obj.noise_sigma > 0.0) v += obj.noise_sigma * rng.next_gaussian();
  return v;
}

struct ParetoPoint {
  double loss = 0.0;
  double complexity = 0.0;
  Architecture arch;
};

// Exact nondominated set over (deterministic loss, complexity), by full
// enumeration. Minimization in both coordinates.
inline std::vector<ParetoPoint> pareto_front(const SearchSpace& space,
                                             const TableObjective& obj,
                                             const CostModel& cost) {
  space.num_architectures(1'000'000);  // throws if too large
  std::vector<ParetoPoint> all;
  space.enumerate([&](const Architecture& arch) {
    all.push_back({obj.deterministic_value(arch), complexity(cost, arch), arch});
  });
  std::vector<ParetoPoint> front;
  for (const ParetoPoint& p : all) {
    bool dominated = false;
    for (const ParetoPoint& q : all) {
      if (q.loss <= p.loss && q.complexity <= p.complexity &&
          (q.loss < p.loss || q.complexity < p.complexity)) {
        dominated = true;
        break;
      }
    }
    if (!dominated) front.push_back(p);
  }
  return front;
}

}  // namespace catnas
