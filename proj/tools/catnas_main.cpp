// Command-line front end: run searches, enumerate the exact Pareto front,
// run the gradient/oracle checks, or replay a recorded run.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "catnas/catnas.hpp"

using namespace catnas;

namespace {

struct CommonFlags {
  std::string config_path;
  std::int64_t seed = -1;
  std::vector<double> epsilons;
  std::int64_t lambda = -1;
  std::string out_dir;
};

void add_common(CLI::App* cmd, CommonFlags& flags, bool config_required) {
  auto* opt = cmd->add_option("--config", flags.config_path, "configuration file (JSON)");
  if (config_required) opt->required();
  cmd->add_option("--seed", flags.seed, "override the master seed");
  cmd->add_option("--epsilons", flags.epsilons,
                  "override the regularization strengths")
      ->delimiter(',');
  cmd->add_option("--lambda", flags.lambda, "override the per-iteration sample count");
  cmd->add_option("--out", flags.out_dir, "output directory");
}

SearchConfig apply_overrides(SearchConfig cfg, const CommonFlags& flags) {
  if (flags.seed >= 0) cfg.seed = static_cast<std::uint64_t>(flags.seed);
  if (!flags.epsilons.empty()) cfg.epsilons = flags.epsilons;
  if (flags.lambda > 0) cfg.lambda = static_cast<std::size_t>(flags.lambda);
  if (!flags.out_dir.empty()) cfg.out_dir = flags.out_dir;
  return cfg;
}

int cmd_search(const CommonFlags& flags, const std::string& method) {
  const SearchConfig cfg = apply_overrides(load_config(flags.config_path), flags);
  cfg.validate();
  const RunRecord record = run_method(cfg, method);
  if (!cfg.out_dir.empty()) emit_results(record, cfg, cfg.out_dir);
  std::printf("method: %s\n", record.method.c_str());
  std::printf("evaluations: weight stage %zu, search stage %zu\n",
              record.weight_stage_evals, record.theta_stage_evals);
  std::printf("wall seconds: %.3f\n", record.wall_seconds);
  for (const FinalArchitecture& fin : record.finals) {
    std::string labels;
    for (std::size_t d = 0; d < cfg.space.dims(); ++d) {
      if (d) labels += ",";
      labels += cfg.space.category_label(d, fin.arch.choices[d]);
    }
    if (std::isnan(fin.target))
      std::printf("epsilon %g: [%s] complexity %g loss %g", fin.epsilon, labels.c_str(),
                  fin.complexity, fin.final_loss);
    else
      std::printf("target %g: [%s] complexity %g loss %g", fin.target, labels.c_str(),
                  fin.complexity, fin.final_loss);
    if (!std::isnan(fin.final_accuracy)) std::printf(" accuracy %g", fin.final_accuracy);
    std::printf("\n");
  }
  if (!cfg.out_dir.empty()) std::printf("results written to %s\n", cfg.out_dir.c_str());
  return 0;
}

int cmd_pareto(const CommonFlags& flags) {
  const SearchConfig cfg = apply_overrides(load_config(flags.config_path), flags);
  if (cfg.evaluator != EvaluatorKind::kTable) {
    std::fprintf(stderr, "pareto-oracle needs a table evaluator\n");
    return 1;
  }
  std::vector<ParetoPoint> front = pareto_front(cfg.space, cfg.table, cfg.search_cost());
  std::sort(front.begin(), front.end(), [](const ParetoPoint& a, const ParetoPoint& b) {
    return a.complexity < b.complexity || (a.complexity == b.complexity && a.loss < b.loss);
  });
  std::printf("complexity,loss,architecture\n");
  for (const ParetoPoint& p : front) {
    std::string labels;
    for (std::size_t d = 0; d < cfg.space.dims(); ++d) {
      if (d) labels += "|";
      labels += cfg.space.category_label(d, p.arch.choices[d]);
    }
    std::printf("%.17g,%.17g,%s\n", p.complexity, p.loss, labels.c_str());
  }
  return 0;
}

// Self-contained numerical checks, usable without a config file.
int cmd_gradcheck(std::uint64_t seed) {
  SeededRandomSource rng(seed);
  double worst_fim = 0.0;
  for (int rep = 0; rep < 200; ++rep) {
    std::vector<int> cards;
    const int dims = 1 + static_cast<int>(rng.next_below(4));
    for (int d = 0; d < dims; ++d)
      cards.push_back(2 + static_cast<int>(rng.next_below(4)));
    SearchSpace space(cards);
    RaggedMatrix probs(space.dims());
    RaggedMatrix costs(space.dims());
    for (std::size_t d = 0; d < space.dims(); ++d) {
      double s = 0.0;
      probs[d].resize(static_cast<std::size_t>(space.cardinality(d)));
      for (double& p : probs[d]) s += (p = 0.05 + rng.next_canonical());
      for (double& p : probs[d]) p /= s;
      for (int k = 0; k < space.cardinality(d); ++k)
        costs[d].push_back(10.0 * rng.next_canonical());
    }
    Distribution dist(std::move(probs));
    const RaggedMatrix nat = nat_grad_expected_complexity(CostModel(costs), dist);
    for (std::size_t d = 0; d < space.dims(); ++d) {
      const auto inv = fim_inverse_block(dist, d);
      for (std::size_t i = 0; i < inv.size(); ++i) {
        double v = 0.0;
        for (std::size_t j = 0; j < inv.size(); ++j)
          v += inv[i][j] * (costs[d][j] - costs[d][inv.size()]);
        worst_fim = std::max(worst_fim, std::abs(v - nat[d][i]));
      }
    }
  }
  std::printf("natural-gradient vs FIM-inverse oracle: max |diff| = %.3g\n", worst_fim);

  double worst_fd = 0.0;
  for (int rep = 0; rep < 20; ++rep) {
    SearchSpace space({2, 2});
    ToySupernet net(space, {{1, 2}, {2, 3}}, 5, 3, 3);
    net.init_weights(rng.next_u64());
    const SyntheticDataset ds = SyntheticDataset::make(rng.next_u64(), 8, 5, 3);
    std::vector<std::size_t> batch(ds.x.size());
    for (std::size_t i = 0; i < batch.size(); ++i) batch[i] = i;
    Architecture arch{{static_cast<int>(rng.next_below(2)),
                       static_cast<int>(rng.next_below(2))}};
    const SupernetGradient g = supernet_gradient(net, arch, ds, batch);
    const double h = 1e-5;
    auto check = [&](double* w, double analytic) {
      const double orig = *w;
      *w = orig + h;
      const double up = supernet_loss(net, arch, ds, batch);
      *w = orig - h;
      const double dn = supernet_loss(net, arch, ds, batch);
      *w = orig;
      const double fdg = (up - dn) / (2 * h);
      worst_fd = std::max(worst_fd, std::abs(analytic - fdg) / (1.0 + std::abs(fdg)));
    };
    for (std::size_t d = 0; d < 2; ++d) {
      const auto k = static_cast<std::size_t>(arch.choices[d]);
      auto& op = net.op(d, static_cast<int>(k));
      for (std::size_t i = 0; i < op.u.data.size(); ++i)
        check(&op.u.data[i], g.du[d][k].data[i]);
      for (std::size_t i = 0; i < op.v.data.size(); ++i)
        check(&op.v.data[i], g.dv[d][k].data[i]);
    }
    for (std::size_t i = 0; i < net.classifier().data.size(); ++i)
      check(&net.classifier().data[i], g.dclassifier.data[i]);
  }
  std::printf("weight gradients vs finite differences: max relative error = %.3g\n",
              worst_fd);

  const bool ok = worst_fim < 1e-10 && worst_fd < 1e-5;
  std::printf("%s\n", ok ? "gradcheck passed" : "gradcheck FAILED");
  return ok ? 0 : 1;
}

int cmd_replay(const std::string& manifest, const std::string& out_dir) {
  const ReplayResult rep = replay(manifest);
  std::printf("replayed method %s, %zu trajectory rows, %zu final architectures\n",
              rep.record.method.c_str(), rep.record.rows.size(),
              rep.record.finals.size());
  if (!out_dir.empty()) {
    emit_results(rep.record, rep.cfg, out_dir);
    std::printf("results written to %s\n", out_dir.c_str());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Complexity-regularized categorical architecture search"};
  app.require_subcommand(1);

  CommonFlags search_flags;
  std::string method = "proposed";
  auto* search = app.add_subcommand("search", "run an architecture search");
  add_common(search, search_flags, true);
  search->add_option("--method", method, "proposed|method1|method2|random")
      ->check(CLI::IsMember({"proposed", "method1", "method2", "random"}));

  CommonFlags pareto_flags;
  auto* pareto = app.add_subcommand("pareto-oracle",
                                    "enumerate the exact loss/complexity front");
  add_common(pareto, pareto_flags, true);

  std::uint64_t gradcheck_seed = 1;
  auto* gradcheck =
      app.add_subcommand("gradcheck", "run the gradient and oracle checks");
  gradcheck->add_option("--seed", gradcheck_seed, "seed for the randomized checks");

  std::string manifest_path;
  std::string replay_out;
  auto* rep = app.add_subcommand("replay", "rerun a search from its manifest");
  rep->add_option("--config", manifest_path, "manifest file from a previous run")
      ->required();
  rep->add_option("--out", replay_out, "output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (search->parsed()) return cmd_search(search_flags, method);
    if (pareto->parsed()) return cmd_pareto(pareto_flags);
    if (gradcheck->parsed()) return cmd_gradcheck(gradcheck_seed);
    if (rep->parsed()) return cmd_replay(manifest_path, replay_out);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
