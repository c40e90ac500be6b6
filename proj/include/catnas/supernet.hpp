#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

#include "catnas/cost_model.hpp"
#include "catnas/random.hpp"
#include "catnas/search_space.hpp"

namespace catnas {

struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
};

// Seeded Gaussian-cluster classification data, split into disjoint partitions
// for weight training, distribution updates, and held-out evaluation.
struct SyntheticDataset {
  std::vector<std::vector<double>> x;
  std::vector<int> y;
  int classes = 0;
  std::vector<std::size_t> weight_indices;
  std::vector<std::size_t> theta_indices;
  std::vector<std::size_t> val_indices;

  static SyntheticDataset make(std::uint64_t seed, std::size_t samples, int features,
                               int classes, double cluster_scale = 2.0,
                               double noise = 1.0) {
    SeededRandomSource rng(derive_seed(seed, "dataset"));
    SyntheticDataset ds;
    ds.classes = classes;
    std::vector<std::vector<double>> means(static_cast<std::size_t>(classes));
    for (auto& m : means) {
      m.resize(static_cast<std::size_t>(features));
      for (double& v : m) v = cluster_scale * rng.next_gaussian();
    }
    ds.x.resize(samples);
    ds.y.resize(samples);
    for (std::size_t i = 0; i < samples; ++i) {
      const int c = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(classes)));
      ds.y[i] = c;
      ds.x[i].resize(static_cast<std::size_t>(features));
      for (std::size_t f = 0; f < ds.x[i].size(); ++f)
        ds.x[i][f] = means[static_cast<std::size_t>(c)][f] + noise * rng.next_gaussian();
    }
    // Reproducible shuffle, then 40/40/20 split.
    std::vector<std::size_t> idx(samples);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    for (std::size_t i = samples; i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(rng.next_below(i));
      std::swap(idx[i - 1], idx[j]);
    }
    const std::size_t a = samples * 2 / 5;
    const std::size_t b = samples * 4 / 5;
    ds.weight_indices.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(a));
    ds.theta_indices.assign(idx.begin() + static_cast<std::ptrdiff_t>(a),
                            idx.begin() + static_cast<std::ptrdiff_t>(b));
    ds.val_indices.assign(idx.begin() + static_cast<std::ptrdiff_t>(b), idx.end());
    return ds;
  }
};

// Toy weight-sharing supernetwork. Each category (d,k) owns a low-rank linear
// operation x -> U_{d,k} V_{d,k} x producing a fixed-width block; a shared
// softmax classifier reads the concatenated blocks. Operations differ in rank,
// which is what makes their parameter counts differ.
class ToySupernet {
 public:
  struct OpWeights {
    Matrix u;  // block_width x rank
    Matrix v;  // rank x features
  };

  ToySupernet(const SearchSpace& space, std::vector<std::vector<int>> ranks,
              int features, int block_width, int classes)
      : dims_(space.dims()),
        features_(features),
        block_width_(block_width),
        classes_(classes),
        ranks_(std::move(ranks)) {
    if (ranks_.size() != space.dims())
      throw std::invalid_argument("rank table dimension mismatch");
    ops_.resize(dims_);
    for (std::size_t d = 0; d < dims_; ++d) {
      if (ranks_[d].size() != static_cast<std::size_t>(space.cardinality(d)))
        throw std::invalid_argument("rank table row mismatch");
      for (int r : ranks_[d]) {
        if (r < 1) throw std::invalid_argument("ranks must be >= 1");
        OpWeights w;
        w.u = Matrix(static_cast<std::size_t>(block_width_), static_cast<std::size_t>(r));
        w.v = Matrix(static_cast<std::size_t>(r), static_cast<std::size_t>(features_));
        ops_[d].push_back(std::move(w));
      }
    }
    classifier_ = Matrix(static_cast<std::size_t>(classes_),
                         dims_ * static_cast<std::size_t>(block_width_));
  }

  void init_weights(std::uint64_t seed, double scale = 0.5) {
    SeededRandomSource rng(derive_seed(seed, "weights"));
    for (auto& row : ops_)
      for (OpWeights& op : row) {
        const double fu = scale / std::sqrt(static_cast<double>(op.u.cols));
        for (double& v : op.u.data) v = fu * rng.next_gaussian();
        const double fv = scale / std::sqrt(static_cast<double>(op.v.cols));
        for (double& v : op.v.data) v = fv * rng.next_gaussian();
      }
    const double fc = scale / std::sqrt(static_cast<double>(classifier_.cols));
    for (double& v : classifier_.data) v = fc * rng.next_gaussian();
  }

  std::size_t dims() const { return dims_; }
  int features() const { return features_; }
  int block_width() const { return block_width_; }
  int classes() const { return classes_; }
  const std::vector<std::vector<int>>& ranks() const { return ranks_; }
  OpWeights& op(std::size_t d, int k) { return ops_[d][static_cast<std::size_t>(k)]; }
  const OpWeights& op(std::size_t d, int k) const {
    return ops_[d][static_cast<std::size_t>(k)];
  }
  Matrix& classifier() { return classifier_; }
  const Matrix& classifier() const { return classifier_; }

  // Parameter count of operation (d,k): rank * (block_width + features).
  double op_param_count(std::size_t d, int k) const {
    const int r = ranks_[d][static_cast<std::size_t>(k)];
    return static_cast<double>(r) * (block_width_ + features_);
  }

  CostModel cost_model() const {
    RaggedMatrix costs(dims_);
    for (std::size_t d = 0; d < dims_; ++d)
      for (std::size_t k = 0; k < ranks_[d].size(); ++k)
        costs[d].push_back(op_param_count(d, static_cast<int>(k)));
    return CostModel(std::move(costs));
  }

 private:
  std::size_t dims_;
  int features_;
  int block_width_;
  int classes_;
  std::vector<std::vector<int>> ranks_;
  std::vector<std::vector<OpWeights>> ops_;
  Matrix classifier_;
};

namespace detail {

// Forward pass for one input; returns logits, and per-dim intermediates
// needed by the closed-form gradient.
struct Forward {
  std::vector<std::vector<double>> vx;      // per dim: V x          (rank)
  std::vector<std::vector<double>> blocks;  // per dim: U V x        (block_width)
  std::vector<double> logits;               // classes
};

inline Forward supernet_forward(const ToySupernet& net, const Architecture& arch,
                                std::span<const double> x) {
  Forward f;
  const std::size_t dd = net.dims();
  const auto bw = static_cast<std::size_t>(net.block_width());
  f.vx.resize(dd);
  f.blocks.resize(dd);
  for (std::size_t d = 0; d < dd; ++d) {
    const auto& op = net.op(d, arch.choices[d]);
    f.vx[d].assign(op.v.rows, 0.0);
    for (std::size_t r = 0; r < op.v.rows; ++r)
      for (std::size_t c = 0; c < op.v.cols; ++c) f.vx[d][r] += op.v(r, c) * x[c];
    f.blocks[d].assign(bw, 0.0);
    for (std::size_t i = 0; i < bw; ++i)
      for (std::size_t r = 0; r < op.u.cols; ++r)
        f.blocks[d][i] += op.u(i, r) * f.vx[d][r];
  }
  const auto cc = static_cast<std::size_t>(net.classes());
  f.logits.assign(cc, 0.0);
  const Matrix& cls = net.classifier();
  for (std::size_t c = 0; c < cc; ++c)
    for (std::size_t d = 0; d < dd; ++d)
      for (std::size_t i = 0; i < bw; ++i)
        f.logits[c] += cls(c, d * bw + i) * f.blocks[d][i];
  return f;
}

inline std::vector<double> softmax(const std::vector<double>& z) {
  double mx = z[0];
  for (double v : z) mx = std::max(mx, v);
  std::vector<double> p(z.size());
  double s = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) s += (p[i] = std::exp(z[i] - mx));
  for (double& v : p) v /= s;
  return p;
}

}  // namespace detail

// Mean cross-entropy of the softmax classifier over the batch, using only the
// blocks selected by arch.
inline double supernet_loss(const ToySupernet& net, const Architecture& arch,
                            const SyntheticDataset& ds,
                            std::span<const std::size_t> batch) {
  if (batch.empty()) throw std::invalid_argument("empty batch");
  double total = 0.0;
  for (std::size_t idx : batch) {
    const auto f = detail::supernet_forward(net, arch, ds.x[idx]);
    const auto p = detail::softmax(f.logits);
    const double pc = p[static_cast<std::size_t>(ds.y[idx])];
    total += -std::log(std::max(pc, 1e-300));
  }
  return total / static_cast<double>(batch.size());
}

// Gradient of the mean cross-entropy for one architecture; same layout as the
// supernet weights, zero for non-selected operations.
struct SupernetGradient {
  std::vector<std::vector<Matrix>> du;
  std::vector<std::vector<Matrix>> dv;
  Matrix dclassifier;

  static SupernetGradient zeros_like(const ToySupernet& net) {
    SupernetGradient g;
    g.du.resize(net.dims());
    g.dv.resize(net.dims());
    for (std::size_t d = 0; d < net.dims(); ++d)
      for (std::size_t k = 0; k < net.ranks()[d].size(); ++k) {
        const auto& op = net.op(d, static_cast<int>(k));
        g.du[d].emplace_back(op.u.rows, op.u.cols);
        g.dv[d].emplace_back(op.v.rows, op.v.cols);
      }
    g.dclassifier = Matrix(net.classifier().rows, net.classifier().cols);
    return g;
  }

  void accumulate_scaled(const SupernetGradient& other, double scale) {
    for (std::size_t d = 0; d < du.size(); ++d)
      for (std::size_t k = 0; k < du[d].size(); ++k) {
        for (std::size_t i = 0; i < du[d][k].data.size(); ++i)
          du[d][k].data[i] += scale * other.du[d][k].data[i];
        for (std::size_t i = 0; i < dv[d][k].data.size(); ++i)
          dv[d][k].data[i] += scale * other.dv[d][k].data[i];
      }
    for (std::size_t i = 0; i < dclassifier.data.size(); ++i)
      dclassifier.data[i] += scale * other.dclassifier.data[i];
  }
};

inline SupernetGradient supernet_gradient(const ToySupernet& net,
                                          const Architecture& arch,
                                          const SyntheticDataset& ds,
                                          std::span<const std::size_t> batch) {
  if (batch.empty()) throw std::invalid_argument("empty batch");
  SupernetGradient g = SupernetGradient::zeros_like(net);
  const auto bw = static_cast<std::size_t>(net.block_width());
  const auto cc = static_cast<std::size_t>(net.classes());
  const double inv = 1.0 / static_cast<double>(batch.size());
  const Matrix& cls = net.classifier();
  for (std::size_t idx : batch) {
    const auto f = detail::supernet_forward(net, arch, ds.x[idx]);
    std::vector<double> gz = detail::softmax(f.logits);
    gz[static_cast<std::size_t>(ds.y[idx])] -= 1.0;
    for (double& v : gz) v *= inv;
    for (std::size_t c = 0; c < cc; ++c)
      for (std::size_t d = 0; d < net.dims(); ++d)
        for (std::size_t i = 0; i < bw; ++i)
          g.dclassifier(c, d * bw + i) += gz[c] * f.blocks[d][i];
    for (std::size_t d = 0; d < net.dims(); ++d) {
      const int k = arch.choices[d];
      const auto& op = net.op(d, k);
      std::vector<double> db(bw, 0.0);
      for (std::size_t i = 0; i < bw; ++i)
        for (std::size_t c = 0; c < cc; ++c) db[i] += cls(c, d * bw + i) * gz[c];
      Matrix& du = g.du[d][static_cast<std::size_t>(k)];
      for (std::size_t i = 0; i < bw; ++i)
        for (std::size_t r = 0; r < op.u.cols; ++r) du(i, r) += db[i] * f.vx[d][r];
      // dV = U^T db (outer) x
      Matrix& dv = g.dv[d][static_cast<std::size_t>(k)];
      for (std::size_t r = 0; r < op.u.cols; ++r) {
        double utdb = 0.0;
        for (std::size_t i = 0; i < bw; ++i) utdb += op.u(i, r) * db[i];
        for (std::size_t c = 0; c < dv.cols; ++c) dv(r, c) += utdb * ds.x[idx][c];
      }
    }
  }
  return g;
}

// W <- W - step * lambda^{-1} sum_i grad_W L(M_i, W, batch).
inline void supernet_train_step(ToySupernet& net,
                                const std::vector<Architecture>& samples,
                                const SyntheticDataset& ds,
                                std::span<const std::size_t> batch, double step) {
  if (samples.empty()) throw std::invalid_argument("need at least one sample");
  SupernetGradient total = SupernetGradient::zeros_like(net);
  const double inv = 1.0 / static_cast<double>(samples.size());
  for (const Architecture& arch : samples)
    total.accumulate_scaled(supernet_gradient(net, arch, ds, batch), inv);
  for (std::size_t d = 0; d < net.dims(); ++d)
    for (std::size_t k = 0; k < net.ranks()[d].size(); ++k) {
      auto& op = net.op(d, static_cast<int>(k));
      for (std::size_t i = 0; i < op.u.data.size(); ++i)
        op.u.data[i] -= step * total.du[d][k].data[i];
      for (std::size_t i = 0; i < op.v.data.size(); ++i)
        op.v.data[i] -= step * total.dv[d][k].data[i];
    }
  for (std::size_t i = 0; i < net.classifier().data.size(); ++i)
    net.classifier().data[i] -= step * total.dclassifier.data[i];
}

struct RetrainResult {
  double val_loss = 0.0;
  double val_accuracy = 0.0;
};

inline double supernet_accuracy(const ToySupernet& net, const Architecture& arch,
                                const SyntheticDataset& ds,
                                std::span<const std::size_t> batch) {
  std::size_t hits = 0;
  for (std::size_t idx : batch) {
    const auto f = detail::supernet_forward(net, arch, ds.x[idx]);
    std::size_t best = 0;
    for (std::size_t c = 1; c < f.logits.size(); ++c)
      if (f.logits[c] > f.logits[best]) best = c;
    if (static_cast<int>(best) == ds.y[idx]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(batch.size());
}

// Trains fresh weights for the fixed architecture on the weight+theta
// partitions, then reports held-out metrics on the validation partition.
inline RetrainResult retrain(const SearchSpace& space,
                             const std::vector<std::vector<int>>& ranks, int features,
                             int block_width, int classes, const Architecture& arch,
                             const SyntheticDataset& ds, std::size_t budget,
                             std::size_t batch_size, double step, std::uint64_t seed) {
  space.require(arch);
  ToySupernet net(space, ranks, features, block_width, classes);
  net.init_weights(derive_seed(seed, "retrain-init"));
  std::vector<std::size_t> train = ds.weight_indices;
  train.insert(train.end(), ds.theta_indices.begin(), ds.theta_indices.end());
  SeededRandomSource rng(derive_seed(seed, "retrain-batches"));
  std::vector<std::size_t> batch(std::min(batch_size, train.size()));
  const std::vector<Architecture> fixed{arch};
  for (std::size_t t = 0; t < budget; ++t) {
    for (std::size_t& b : batch)
      b = train[static_cast<std::size_t>(rng.next_below(train.size()))];
    supernet_train_step(net, fixed, ds, batch, step);
  }
  RetrainResult res;
  res.val_loss = supernet_loss(net, arch, ds, ds.val_indices);
  res.val_accuracy = supernet_accuracy(net, arch, ds, ds.val_indices);
  return res;
}

}  // namespace catnas
