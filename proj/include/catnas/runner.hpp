#pragma once

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <memory>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "catnas/cost_model.hpp"
#include "catnas/distribution.hpp"
#include "catnas/optimizer.hpp"
#include "catnas/random.hpp"
#include "catnas/search_space.hpp"
#include "catnas/supernet.hpp"
#include "catnas/table_objective.hpp"
#include "catnas/utility.hpp"

namespace catnas {

inline constexpr const char* kCodeVersion = "catnas 0.1.0";

enum class EvaluatorKind { kTable, kSupernet };

struct SupernetSpec {
  std::vector<std::vector<int>> ranks;
  int features = 8;
  int block_width = 4;
  int classes = 3;
  std::size_t dataset_samples = 400;
  double cluster_scale = 2.0;
  double data_noise = 1.0;
  double init_scale = 0.5;
  double weight_step = 0.1;
  std::size_t retrain_budget = 300;
  std::size_t retrain_batch = 32;
  double retrain_step = 0.1;
};

struct RandomSearchSpec {
  std::vector<double> targets;
  double band = 0.05;      // +-5% of each target
  std::size_t budget = 0;  // 0 -> lambda * t_theta
};

struct SearchConfig {
  SearchSpace space;
  RaggedMatrix raw_costs;
  bool normalize = true;

  EvaluatorKind evaluator = EvaluatorKind::kTable;
  TableObjective table;
  SupernetSpec supernet;

  std::size_t lambda = 2;
  std::vector<double> epsilons = {0.0, 0.1, 0.3, 0.5};
  double eta = 0.0;         // <= 0 -> default_learning_rate(space)
  double theta_min = -1.0;  // < 0 -> default_theta_min(space)
  std::size_t t_w = 500;
  std::size_t t_theta = 500;
  std::size_t batch_w = 32;
  std::size_t batch_theta = 32;
  std::uint64_t seed = 1;
  UtilityConfig utility;
  RandomSearchSpec random;
  std::string out_dir;

  explicit SearchConfig(SearchSpace s) : space(std::move(s)) {}

  double effective_eta() const { return eta > 0.0 ? eta : default_learning_rate(space); }
  double effective_theta_min() const {
    return theta_min >= 0.0 ? theta_min : default_theta_min(space);
  }

  CostModel search_cost() const {
    CostModel raw(raw_costs);
    if (!raw.congruent_with(space))
      throw std::invalid_argument("cost table does not match the search space");
    return normalize ? normalize_costs(raw) : raw;
  }

  void validate() const {
    if (lambda < 1) throw std::invalid_argument("lambda must be >= 1");
    if (epsilons.empty()) throw std::invalid_argument("need at least one epsilon");
    for (std::size_t i = 0; i < epsilons.size(); ++i) {
      if (!(epsilons[i] >= 0.0)) throw std::invalid_argument("epsilons must be >= 0");
      for (std::size_t j = i + 1; j < epsilons.size(); ++j)
        if (epsilons[i] == epsilons[j])
          throw std::invalid_argument("epsilons must be distinct");
    }
    utility.validate();
    search_cost();  // validates shape
    if (evaluator == EvaluatorKind::kTable) {
      if (table.losses.size() != space.dims())
        throw std::invalid_argument("loss table does not match the search space");
      for (std::size_t d = 0; d < space.dims(); ++d)
        if (table.losses[d].size() != static_cast<std::size_t>(space.cardinality(d)))
          throw std::invalid_argument("loss table row mismatch");
    }
  }
};

struct TrajectoryRow {
  std::size_t iter = 0;
  std::size_t component = 0;
  double epsilon = 0.0;
  double mean_loss = 0.0;
  double expected_complexity = 0.0;
  std::vector<double> entropies;
};

struct FinalArchitecture {
  double epsilon = 0.0;
  double target = std::numeric_limits<double>::quiet_NaN();  // random search only
  Architecture arch;
  double complexity = 0.0;
  double final_loss = 0.0;
  double final_accuracy = std::numeric_limits<double>::quiet_NaN();
};

struct RunRecord {
  std::string method;
  std::vector<TrajectoryRow> rows;
  std::vector<FinalArchitecture> finals;
  // Final distribution parameters, one entry per component (empty for random
  // search, which has no distribution).
  std::vector<RaggedMatrix> final_thetas;
  std::size_t weight_stage_evals = 0;
  std::size_t theta_stage_evals = 0;
  double wall_seconds = 0.0;
};

namespace detail {

class LossEvaluator {
 public:
  virtual ~LossEvaluator() = default;
  virtual double evaluate(const Architecture& arch) = 0;
  std::size_t calls() const { return calls_; }

 protected:
  std::size_t calls_ = 0;
};

class TableLossEvaluator final : public LossEvaluator {
 public:
  TableLossEvaluator(const TableObjective& obj, std::uint64_t noise_seed)
      : obj_(obj), rng_(noise_seed) {}

  double evaluate(const Architecture& arch) override {
    ++calls_;
    return table_evaluate(obj_, arch, rng_);
  }

 private:
  const TableObjective& obj_;
  SeededRandomSource rng_;
};

class SupernetLossEvaluator final : public LossEvaluator {
 public:
  SupernetLossEvaluator(const ToySupernet& net, const SyntheticDataset& ds)
      : net_(net), ds_(ds) {}

  void set_batch(std::vector<std::size_t> batch) { batch_ = std::move(batch); }

  double evaluate(const Architecture& arch) override {
    ++calls_;
    return supernet_loss(net_, arch, ds_, batch_);
  }

 private:
  const ToySupernet& net_;
  const SyntheticDataset& ds_;
  std::vector<std::size_t> batch_;
};

inline std::vector<std::size_t> draw_batch(const std::vector<std::size_t>& pool,
                                           std::size_t size, SeededRandomSource& rng) {
  std::vector<std::size_t> batch(std::min(size, pool.size()));
  for (std::size_t& b : batch)
    b = pool[static_cast<std::size_t>(rng.next_below(pool.size()))];
  return batch;
}

struct Timer {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
};

inline void log_components(RunRecord& record, std::size_t iter, const Ensemble& ens,
                           const CostModel& cost,
                           const std::vector<double>& component_loss_estimates) {
  for (std::size_t n = 0; n < ens.components.size(); ++n) {
    TrajectoryRow row;
    row.iter = iter;
    row.component = n;
    row.epsilon = ens.epsilons[n];
    row.mean_loss = component_loss_estimates[n];
    row.expected_complexity = expected_complexity(cost, ens.components[n]);
    for (std::size_t d = 0; d < ens.components[n].dims(); ++d)
      row.entropies.push_back(row_entropy(ens.components[n], d));
    record.rows.push_back(std::move(row));
  }
}

inline void require_budget(std::size_t actual, std::size_t expected, const char* what) {
  if (actual != expected)
    throw std::logic_error(std::string("evaluator call accounting mismatch for ") + what);
}

}  // namespace detail

// Shared scaffolding: dataset + supernet construction for weight-bearing runs.
struct RunContext {
  const SearchConfig& cfg;
  CostModel cost;
  std::optional<SyntheticDataset> dataset;
  std::optional<ToySupernet> supernet;

  explicit RunContext(const SearchConfig& config)
      : cfg(config), cost(config.search_cost()) {
    cfg.validate();
    if (cfg.evaluator == EvaluatorKind::kSupernet) {
      dataset = SyntheticDataset::make(derive_seed(cfg.seed, "data"),
                                       cfg.supernet.dataset_samples,
                                       cfg.supernet.features, cfg.supernet.classes,
                                       cfg.supernet.cluster_scale,
                                       cfg.supernet.data_noise);
      supernet.emplace(cfg.space, cfg.supernet.ranks, cfg.supernet.features,
                       cfg.supernet.block_width, cfg.supernet.classes);
    }
  }

  bool weight_bearing() const { return cfg.evaluator == EvaluatorKind::kSupernet; }

  std::unique_ptr<detail::LossEvaluator> make_evaluator(std::uint64_t noise_seed) const {
    if (weight_bearing())
      return std::make_unique<detail::SupernetLossEvaluator>(*supernet, *dataset);
    return std::make_unique<detail::TableLossEvaluator>(cfg.table, noise_seed);
  }

  FinalArchitecture finalize(double epsilon, const Architecture& arch,
                             std::uint64_t retrain_seed) const {
    FinalArchitecture fin;
    fin.epsilon = epsilon;
    fin.arch = arch;
    fin.complexity = complexity(cost, arch);
    if (weight_bearing()) {
      const RetrainResult res =
          retrain(cfg.space, cfg.supernet.ranks, cfg.supernet.features,
                  cfg.supernet.block_width, cfg.supernet.classes, arch, *dataset,
                  cfg.supernet.retrain_budget, cfg.supernet.retrain_batch,
                  cfg.supernet.retrain_step, retrain_seed);
      fin.final_loss = res.val_loss;
      fin.final_accuracy = res.val_accuracy;
    } else {
      fin.final_loss = cfg.table.deterministic_value(arch);
    }
    return fin;
  }
};

// Algorithm: uniform weight stage, then joint update of all components from
// shared mixture samples via importance sampling.
inline RunRecord run_proposed(const SearchConfig& cfg) {
  detail::Timer timer;
  RunContext ctx(cfg);
  RunRecord record;
  record.method = "proposed";

  auto evaluator = ctx.make_evaluator(derive_seed(cfg.seed, "noise"));

  // Stage 1: weight training under uniform architecture sampling.
  if (ctx.weight_bearing()) {
    ctx.supernet->init_weights(derive_seed(cfg.seed, "winit"), cfg.supernet.init_scale);
    SeededRandomSource wrng(derive_seed(cfg.seed, "wstage"));
    const Distribution uniform = Distribution::uniform(cfg.space);
    auto* sn_eval = static_cast<detail::SupernetLossEvaluator*>(evaluator.get());
    for (std::size_t t = 0; t < cfg.t_w; ++t) {
      const auto batch =
          detail::draw_batch(ctx.dataset->weight_indices, cfg.batch_w, wrng);
      std::vector<Architecture> samples;
      for (std::size_t i = 0; i < cfg.lambda; ++i)
        samples.push_back(sample(uniform, wrng));
      // One forward/backward per sampled architecture.
      sn_eval->set_batch(batch);
      for (const Architecture& a : samples) (void)evaluator->evaluate(a);
      supernet_train_step(*ctx.supernet, samples, *ctx.dataset, batch,
                          cfg.supernet.weight_step);
    }
    record.weight_stage_evals = evaluator->calls();
    detail::require_budget(record.weight_stage_evals, cfg.t_w * cfg.lambda,
                           "proposed weight stage");
  }

  // Stage 2: distribution updates from mixture samples.
  Ensemble ens;
  for (std::size_t n = 0; n < cfg.epsilons.size(); ++n)
    ens.components.push_back(Distribution::uniform(cfg.space));
  ens.epsilons = cfg.epsilons;
  ens.eta = cfg.effective_eta();
  ens.theta_min = cfg.effective_theta_min();

  SeededRandomSource trng(derive_seed(cfg.seed, "tstage"));
  SeededRandomSource brng(derive_seed(cfg.seed, "tbatch"));
  const std::size_t pre_theta_calls = evaluator->calls();
  for (std::size_t t = 0; t < cfg.t_theta; ++t) {
    if (ctx.weight_bearing())
      static_cast<detail::SupernetLossEvaluator*>(evaluator.get())
          ->set_batch(detail::draw_batch(ctx.dataset->theta_indices, cfg.batch_theta, brng));
    const std::vector<Architecture> samples = sample_mixture(ens, cfg.lambda, trng);
    std::vector<double> losses;
    for (const Architecture& a : samples) losses.push_back(evaluator->evaluate(a));
    const auto lp = log_prob_matrix(ens.components, samples);
    ens = update_is(ens, samples, losses, ctx.cost, cfg.utility);
    std::vector<double> estimates(ens.components.size(), 0.0);
    for (std::size_t n = 0; n < ens.components.size(); ++n) {
      const auto ratios = likelihood_ratios_from_logs(lp, n);
      for (std::size_t i = 0; i < losses.size(); ++i)
        estimates[n] += ratios[i] * losses[i];
      estimates[n] /= static_cast<double>(losses.size());
    }
    detail::log_components(record, t, ens, ctx.cost, estimates);
  }
  record.theta_stage_evals = evaluator->calls() - pre_theta_calls;
  detail::require_budget(record.theta_stage_evals, cfg.t_theta * cfg.lambda,
                         "proposed theta stage");

  for (std::size_t n = 0; n < ens.components.size(); ++n) {
    record.final_thetas.push_back(ens.components[n].probs());
    record.finals.push_back(ctx.finalize(ens.epsilons[n], most_probable(ens.components[n]),
                                         derive_seed(cfg.seed, "retrain", n)));
  }
  record.wall_seconds = timer.seconds();
  return record;
}

// Baseline: per epsilon, reinitialize W and interleave weight and distribution
// updates for t_theta iterations, sampling from that component alone.
inline RunRecord run_method1(const SearchConfig& cfg) {
  detail::Timer timer;
  RunContext ctx(cfg);
  RunRecord record;
  record.method = "method1";
  const std::size_t iters = cfg.t_theta;

  for (std::size_t n = 0; n < cfg.epsilons.size(); ++n) {
    auto evaluator = ctx.make_evaluator(derive_seed(cfg.seed, "noise", n));
    Distribution dist = Distribution::uniform(cfg.space);
    SeededRandomSource trng(derive_seed(cfg.seed, "tstage", n));
    SeededRandomSource wrng(derive_seed(cfg.seed, "wstage", n));
    SeededRandomSource brng(derive_seed(cfg.seed, "tbatch", n));
    if (ctx.weight_bearing())
      ctx.supernet->init_weights(derive_seed(cfg.seed, "winit", n),
                                 cfg.supernet.init_scale);
    for (std::size_t t = 0; t < iters; ++t) {
      if (ctx.weight_bearing()) {
        auto* sn_eval = static_cast<detail::SupernetLossEvaluator*>(evaluator.get());
        const auto wbatch =
            detail::draw_batch(ctx.dataset->weight_indices, cfg.batch_w, wrng);
        std::vector<Architecture> wsamples;
        for (std::size_t i = 0; i < cfg.lambda; ++i)
          wsamples.push_back(sample(dist, wrng));
        sn_eval->set_batch(wbatch);
        for (const Architecture& a : wsamples) (void)evaluator->evaluate(a);
        supernet_train_step(*ctx.supernet, wsamples, *ctx.dataset, wbatch,
                            cfg.supernet.weight_step);
        sn_eval->set_batch(
            detail::draw_batch(ctx.dataset->theta_indices, cfg.batch_theta, brng));
      }
      std::vector<Architecture> samples;
      for (std::size_t i = 0; i < cfg.lambda; ++i) samples.push_back(sample(dist, trng));
      std::vector<double> losses;
      for (const Architecture& a : samples) losses.push_back(evaluator->evaluate(a));
      dist = update_single(dist, samples, losses, ctx.cost, cfg.epsilons[n],
                           cfg.effective_eta(), cfg.effective_theta_min(), cfg.utility);
      TrajectoryRow row;
      row.iter = t;
      row.component = n;
      row.epsilon = cfg.epsilons[n];
      double mean = 0.0;
      for (double l : losses) mean += l;
      row.mean_loss = mean / static_cast<double>(losses.size());
      row.expected_complexity = expected_complexity(ctx.cost, dist);
      for (std::size_t d = 0; d < dist.dims(); ++d)
        row.entropies.push_back(row_entropy(dist, d));
      record.rows.push_back(std::move(row));
    }
    const std::size_t expected =
        iters * cfg.lambda * (ctx.weight_bearing() ? 2 : 1);
    detail::require_budget(evaluator->calls(), expected, "method1 component");
    if (ctx.weight_bearing())
      record.weight_stage_evals += iters * cfg.lambda;
    record.theta_stage_evals += iters * cfg.lambda;
    record.final_thetas.push_back(dist.probs());
    record.finals.push_back(ctx.finalize(cfg.epsilons[n], most_probable(dist),
                                         derive_seed(cfg.seed, "retrain", n)));
  }
  record.wall_seconds = timer.seconds();
  return record;
}

// Baseline: single uniform weight stage, then an independent distribution
// search per epsilon.
inline RunRecord run_method2(const SearchConfig& cfg) {
  detail::Timer timer;
  RunContext ctx(cfg);
  RunRecord record;
  record.method = "method2";

  if (ctx.weight_bearing()) {
    ctx.supernet->init_weights(derive_seed(cfg.seed, "winit"), cfg.supernet.init_scale);
    auto evaluator = ctx.make_evaluator(0);
    auto* sn_eval = static_cast<detail::SupernetLossEvaluator*>(evaluator.get());
    SeededRandomSource wrng(derive_seed(cfg.seed, "wstage"));
    const Distribution uniform = Distribution::uniform(cfg.space);
    for (std::size_t t = 0; t < cfg.t_w; ++t) {
      const auto batch =
          detail::draw_batch(ctx.dataset->weight_indices, cfg.batch_w, wrng);
      std::vector<Architecture> samples;
      for (std::size_t i = 0; i < cfg.lambda; ++i)
        samples.push_back(sample(uniform, wrng));
      sn_eval->set_batch(batch);
      for (const Architecture& a : samples) (void)evaluator->evaluate(a);
      supernet_train_step(*ctx.supernet, samples, *ctx.dataset, batch,
                          cfg.supernet.weight_step);
    }
    record.weight_stage_evals = evaluator->calls();
    detail::require_budget(record.weight_stage_evals, cfg.t_w * cfg.lambda,
                           "method2 weight stage");
  }

  for (std::size_t n = 0; n < cfg.epsilons.size(); ++n) {
    auto evaluator = ctx.make_evaluator(derive_seed(cfg.seed, "noise", n));
    Distribution dist = Distribution::uniform(cfg.space);
    SeededRandomSource trng(derive_seed(cfg.seed, "tstage", n));
    SeededRandomSource brng(derive_seed(cfg.seed, "tbatch", n));
    for (std::size_t t = 0; t < cfg.t_theta; ++t) {
      if (ctx.weight_bearing())
        static_cast<detail::SupernetLossEvaluator*>(evaluator.get())
            ->set_batch(
                detail::draw_batch(ctx.dataset->theta_indices, cfg.batch_theta, brng));
      std::vector<Architecture> samples;
      for (std::size_t i = 0; i < cfg.lambda; ++i) samples.push_back(sample(dist, trng));
      std::vector<double> losses;
      for (const Architecture& a : samples) losses.push_back(evaluator->evaluate(a));
      dist = update_single(dist, samples, losses, ctx.cost, cfg.epsilons[n],
                           cfg.effective_eta(), cfg.effective_theta_min(), cfg.utility);
      TrajectoryRow row;
      row.iter = t;
      row.component = n;
      row.epsilon = cfg.epsilons[n];
      double mean = 0.0;
      for (double l : losses) mean += l;
      row.mean_loss = mean / static_cast<double>(losses.size());
      row.expected_complexity = expected_complexity(ctx.cost, dist);
      for (std::size_t d = 0; d < dist.dims(); ++d)
        row.entropies.push_back(row_entropy(dist, d));
      record.rows.push_back(std::move(row));
    }
    detail::require_budget(evaluator->calls(), cfg.t_theta * cfg.lambda,
                           "method2 theta stage");
    record.theta_stage_evals += evaluator->calls();
    record.final_thetas.push_back(dist.probs());
    record.finals.push_back(ctx.finalize(cfg.epsilons[n], most_probable(dist),
                                         derive_seed(cfg.seed, "retrain", n)));
  }
  record.wall_seconds = timer.seconds();
  return record;
}

// Baseline: uniform sampling; keeps the best evaluated architecture inside
// each complexity target band.
inline RunRecord run_random_search(const SearchConfig& cfg) {
  detail::Timer timer;
  RunContext ctx(cfg);
  if (ctx.cfg.random.targets.empty())
    throw std::invalid_argument("random search needs complexity targets");
  RunRecord record;
  record.method = "random";

  auto evaluator = ctx.make_evaluator(derive_seed(cfg.seed, "noise"));
  if (ctx.weight_bearing()) {
    ctx.supernet->init_weights(derive_seed(cfg.seed, "winit"), cfg.supernet.init_scale);
    auto* sn_eval = static_cast<detail::SupernetLossEvaluator*>(evaluator.get());
    SeededRandomSource wrng(derive_seed(cfg.seed, "wstage"));
    const Distribution uniform = Distribution::uniform(cfg.space);
    for (std::size_t t = 0; t < cfg.t_w; ++t) {
      const auto batch =
          detail::draw_batch(ctx.dataset->weight_indices, cfg.batch_w, wrng);
      std::vector<Architecture> samples;
      for (std::size_t i = 0; i < cfg.lambda; ++i)
        samples.push_back(sample(uniform, wrng));
      sn_eval->set_batch(batch);
      for (const Architecture& a : samples) (void)evaluator->evaluate(a);
      supernet_train_step(*ctx.supernet, samples, *ctx.dataset, batch,
                          cfg.supernet.weight_step);
    }
    record.weight_stage_evals = evaluator->calls();
  }

  const std::size_t budget =
      cfg.random.budget > 0 ? cfg.random.budget : cfg.lambda * cfg.t_theta;
  SeededRandomSource rng(derive_seed(cfg.seed, "rstage"));
  SeededRandomSource brng(derive_seed(cfg.seed, "tbatch"));
  const Distribution uniform = Distribution::uniform(cfg.space);
  struct Best {
    bool found = false;
    double loss = 0.0;
    Architecture arch;
  };
  std::vector<Best> best(cfg.random.targets.size());
  const std::size_t pre_calls = evaluator->calls();
  for (std::size_t i = 0; i < budget; ++i) {
    if (ctx.weight_bearing())
      static_cast<detail::SupernetLossEvaluator*>(evaluator.get())
          ->set_batch(detail::draw_batch(ctx.dataset->theta_indices, cfg.batch_theta, brng));
    const Architecture arch = sample(uniform, rng);
    const double r = complexity(ctx.cost, arch);
    const double loss = evaluator->evaluate(arch);
    for (std::size_t b = 0; b < cfg.random.targets.size(); ++b) {
      const double target = cfg.random.targets[b];
      if (std::abs(r - target) > cfg.random.band * target) continue;
      if (!best[b].found || loss < best[b].loss) {
        best[b] = {true, loss, arch};
      }
    }
  }
  detail::require_budget(evaluator->calls() - pre_calls, budget, "random search");
  record.theta_stage_evals = budget;

  for (std::size_t b = 0; b < best.size(); ++b) {
    if (!best[b].found)
      throw std::runtime_error("no sampled architecture fell inside complexity band " +
                               std::to_string(cfg.random.targets[b]));
    FinalArchitecture fin =
        ctx.finalize(0.0, best[b].arch, derive_seed(cfg.seed, "retrain", b));
    fin.target = cfg.random.targets[b];
    record.finals.push_back(std::move(fin));
  }
  record.wall_seconds = timer.seconds();
  return record;
}

inline RunRecord run_method(const SearchConfig& cfg, const std::string& method) {
  if (method == "proposed") return run_proposed(cfg);
  if (method == "method1") return run_method1(cfg);
  if (method == "method2") return run_method2(cfg);
  if (method == "random") return run_random_search(cfg);
  throw std::invalid_argument("unknown method: " + method);
}

// --- Config / manifest serialization -------------------------------------

inline nlohmann::json config_to_json(const SearchConfig& cfg) {
  nlohmann::json j;
  nlohmann::json dims = nlohmann::json::array();
  for (std::size_t d = 0; d < cfg.space.dims(); ++d) {
    nlohmann::json dim;
    dim["name"] = cfg.space.dimension_name(d);
    std::vector<std::string> cats;
    for (int k = 0; k < cfg.space.cardinality(d); ++k)
      cats.push_back(cfg.space.category_label(d, k));
    dim["categories"] = cats;
    dim["costs"] = cfg.raw_costs.at(d);
    dims.push_back(dim);
  }
  j["space"]["dimensions"] = dims;
  j["normalize_costs"] = cfg.normalize;
  if (cfg.evaluator == EvaluatorKind::kTable) {
    j["evaluator"]["type"] = "table";
    j["evaluator"]["losses"] = cfg.table.losses;
    nlohmann::json cps = nlohmann::json::array();
    for (const auto& c : cfg.table.couplings)
      cps.push_back({c.dim_a, c.dim_b, c.cat_a, c.cat_b, c.value});
    j["evaluator"]["couplings"] = cps;
    j["evaluator"]["noise_sigma"] = cfg.table.noise_sigma;
  } else {
    j["evaluator"]["type"] = "supernet";
    j["evaluator"]["ranks"] = cfg.supernet.ranks;
    j["evaluator"]["features"] = cfg.supernet.features;
    j["evaluator"]["block_width"] = cfg.supernet.block_width;
    j["evaluator"]["classes"] = cfg.supernet.classes;
    j["evaluator"]["dataset_samples"] = cfg.supernet.dataset_samples;
    j["evaluator"]["cluster_scale"] = cfg.supernet.cluster_scale;
    j["evaluator"]["data_noise"] = cfg.supernet.data_noise;
    j["evaluator"]["init_scale"] = cfg.supernet.init_scale;
    j["evaluator"]["weight_step"] = cfg.supernet.weight_step;
    j["evaluator"]["retrain_budget"] = cfg.supernet.retrain_budget;
    j["evaluator"]["retrain_batch"] = cfg.supernet.retrain_batch;
    j["evaluator"]["retrain_step"] = cfg.supernet.retrain_step;
  }
  j["search"]["lambda"] = cfg.lambda;
  j["search"]["epsilons"] = cfg.epsilons;
  j["search"]["eta"] = cfg.eta;
  j["search"]["theta_min"] = cfg.theta_min;
  j["search"]["t_w"] = cfg.t_w;
  j["search"]["t_theta"] = cfg.t_theta;
  j["search"]["batch_w"] = cfg.batch_w;
  j["search"]["batch_theta"] = cfg.batch_theta;
  j["search"]["seed"] = cfg.seed;
  j["utility"]["lower"] = cfg.utility.lower;
  j["utility"]["upper"] = cfg.utility.upper;
  j["utility"]["low"] = cfg.utility.low;
  j["utility"]["mid"] = cfg.utility.mid;
  j["utility"]["high"] = cfg.utility.high;
  j["random"]["targets"] = cfg.random.targets;
  j["random"]["band"] = cfg.random.band;
  j["random"]["budget"] = cfg.random.budget;
  j["out_dir"] = cfg.out_dir;
  return j;
}

inline SearchConfig config_from_json(const nlohmann::json& j) {
  std::vector<int> cards;
  std::vector<std::string> names;
  std::vector<std::vector<std::string>> labels;
  RaggedMatrix costs;
  for (const auto& dim : j.at("space").at("dimensions")) {
    const auto cats = dim.at("categories").get<std::vector<std::string>>();
    cards.push_back(static_cast<int>(cats.size()));
    names.push_back(dim.value("name", "dim" + std::to_string(names.size())));
    labels.push_back(cats);
    costs.push_back(dim.at("costs").get<std::vector<double>>());
  }
  SearchConfig cfg(SearchSpace(cards, names, labels));
  cfg.raw_costs = std::move(costs);
  cfg.normalize = j.value("normalize_costs", true);

  const auto& ev = j.at("evaluator");
  const std::string type = ev.at("type").get<std::string>();
  if (type == "table") {
    cfg.evaluator = EvaluatorKind::kTable;
    cfg.table.losses = ev.at("losses").get<RaggedMatrix>();
    if (ev.contains("couplings"))
      for (const auto& c : ev.at("couplings"))
        cfg.table.couplings.push_back({c.at(0).get<int>(), c.at(1).get<int>(),
                                       c.at(2).get<int>(), c.at(3).get<int>(),
                                       c.at(4).get<double>()});
    cfg.table.noise_sigma = ev.value("noise_sigma", 0.0);
  } else if (type == "supernet") {
    cfg.evaluator = EvaluatorKind::kSupernet;
    cfg.supernet.ranks = ev.at("ranks").get<std::vector<std::vector<int>>>();
    cfg.supernet.features = ev.value("features", 8);
    cfg.supernet.block_width = ev.value("block_width", 4);
    cfg.supernet.classes = ev.value("classes", 3);
    cfg.supernet.dataset_samples = ev.value("dataset_samples", std::size_t{400});
    cfg.supernet.cluster_scale = ev.value("cluster_scale", 2.0);
    cfg.supernet.data_noise = ev.value("data_noise", 1.0);
    cfg.supernet.init_scale = ev.value("init_scale", 0.5);
    cfg.supernet.weight_step = ev.value("weight_step", 0.1);
    cfg.supernet.retrain_budget = ev.value("retrain_budget", std::size_t{300});
    cfg.supernet.retrain_batch = ev.value("retrain_batch", std::size_t{32});
    cfg.supernet.retrain_step = ev.value("retrain_step", 0.1);
  } else {
    throw std::invalid_argument("unknown evaluator type: " + type);
  }

  if (j.contains("search")) {
    const auto& s = j.at("search");
    cfg.lambda = s.value("lambda", std::size_t{2});
    cfg.epsilons = s.value("epsilons", cfg.epsilons);
    cfg.eta = s.value("eta", 0.0);
    cfg.theta_min = s.value("theta_min", -1.0);
    cfg.t_w = s.value("t_w", std::size_t{500});
    cfg.t_theta = s.value("t_theta", std::size_t{500});
    cfg.batch_w = s.value("batch_w", std::size_t{32});
    cfg.batch_theta = s.value("batch_theta", std::size_t{32});
    cfg.seed = s.value("seed", std::uint64_t{1});
  }
  if (j.contains("utility")) {
    const auto& u = j.at("utility");
    cfg.utility.lower = u.value("lower", 0.25);
    cfg.utility.upper = u.value("upper", 0.75);
    cfg.utility.low = u.value("low", -2.0);
    cfg.utility.mid = u.value("mid", 0.0);
    cfg.utility.high = u.value("high", 2.0);
  }
  if (j.contains("random")) {
    const auto& r = j.at("random");
    cfg.random.targets = r.value("targets", std::vector<double>{});
    cfg.random.band = r.value("band", 0.05);
    cfg.random.budget = r.value("budget", std::size_t{0});
  }
  cfg.out_dir = j.value("out_dir", std::string{});
  return cfg;
}

inline SearchConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read config file: " + path);
  nlohmann::json j;
  in >> j;
  return config_from_json(j);
}

// --- Result emission -------------------------------------------------------

namespace detail {

inline std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace detail

inline std::string trajectory_csv(const RunRecord& record, std::size_t dims) {
  std::ostringstream out;
  out << "iter,component,epsilon,mean_loss,expected_complexity";
  for (std::size_t d = 1; d <= dims; ++d) out << ",entropy_d" << d;
  out << "\n";
  for (const TrajectoryRow& row : record.rows) {
    out << row.iter << "," << row.component << "," << detail::fmt_double(row.epsilon)
        << "," << detail::fmt_double(row.mean_loss) << ","
        << detail::fmt_double(row.expected_complexity);
    for (double h : row.entropies) out << "," << detail::fmt_double(h);
    out << "\n";
  }
  return out.str();
}

inline nlohmann::json finals_to_json(const RunRecord& record, const SearchSpace& space) {
  nlohmann::json out = nlohmann::json::array();
  for (const FinalArchitecture& fin : record.finals) {
    nlohmann::json f;
    f["epsilon"] = fin.epsilon;
    if (!std::isnan(fin.target)) f["target"] = fin.target;
    f["choices"] = fin.arch.choices;
    std::vector<std::string> labels;
    for (std::size_t d = 0; d < space.dims(); ++d)
      labels.push_back(space.category_label(d, fin.arch.choices[d]));
    f["labels"] = labels;
    f["complexity"] = fin.complexity;
    f["loss"] = fin.final_loss;
    if (!std::isnan(fin.final_accuracy)) f["accuracy"] = fin.final_accuracy;
    out.push_back(f);
  }
  return out;
}

// Writes trajectory.csv, final.json, and manifest.json into dir.
inline void emit_results(const RunRecord& record, const SearchConfig& cfg,
                         const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  {
    std::ofstream out(fs::path(dir) / "trajectory.csv", std::ios::binary);
    if (!out) throw std::runtime_error("cannot write to " + dir);
    out << trajectory_csv(record, cfg.space.dims());
  }
  {
    nlohmann::json finals;
    finals["method"] = record.method;
    finals["architectures"] = finals_to_json(record, cfg.space);
    std::ofstream out(fs::path(dir) / "final.json", std::ios::binary);
    out << finals.dump(2) << "\n";
  }
  {
    nlohmann::json manifest;
    manifest["version"] = kCodeVersion;
    manifest["method"] = record.method;
    manifest["seed"] = cfg.seed;
    manifest["config"] = config_to_json(cfg);
    manifest["weight_stage_evals"] = record.weight_stage_evals;
    manifest["theta_stage_evals"] = record.theta_stage_evals;
    manifest["wall_seconds"] = record.wall_seconds;
    std::ofstream out(fs::path(dir) / "manifest.json", std::ios::binary);
    out << manifest.dump(2) << "\n";
  }
}

struct ReplayResult {
  RunRecord record;
  SearchConfig cfg;
};

// Reruns the search recorded in a manifest.
inline ReplayResult replay(const std::string& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw std::runtime_error("cannot read manifest: " + manifest_path);
  nlohmann::json manifest;
  in >> manifest;
  SearchConfig cfg = config_from_json(manifest.at("config"));
  cfg.seed = manifest.at("seed").get<std::uint64_t>();
  RunRecord record = run_method(cfg, manifest.at("method").get<std::string>());
  return {std::move(record), std::move(cfg)};
}

}  // namespace catnas
