#pragma once

#include <cstddef>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace catnas {

// A sampled configuration: one category index per dimension (0-based).
struct Architecture {
  std::vector<int> choices;

  bool operator==(const Architecture&) const = default;
};

// D categorical dimensions with cardinalities K_1..K_D (each >= 2).
class SearchSpace {
 public:
  explicit SearchSpace(std::vector<int> cardinalities,
                       std::vector<std::string> names = {},
                       std::vector<std::vector<std::string>> labels = {})
      : cardinalities_(std::move(cardinalities)),
        names_(std::move(names)),
        labels_(std::move(labels)) {
    if (cardinalities_.empty())
      throw std::invalid_argument("search space needs at least one dimension");
    for (int k : cardinalities_)
      if (k < 2) throw std::invalid_argument("every dimension needs >= 2 categories");
    if (!names_.empty() && names_.size() != cardinalities_.size())
      throw std::invalid_argument("dimension name count mismatch");
    if (!labels_.empty()) {
      if (labels_.size() != cardinalities_.size())
        throw std::invalid_argument("label row count mismatch");
      for (std::size_t d = 0; d < labels_.size(); ++d)
        if (static_cast<int>(labels_[d].size()) != cardinalities_[d])
          throw std::invalid_argument("label count mismatch in dimension " +
                                      std::to_string(d));
    }
  }

  std::size_t dims() const { return cardinalities_.size(); }
  int cardinality(std::size_t d) const { return cardinalities_.at(d); }
  const std::vector<int>& cardinalities() const { return cardinalities_; }

  int total_categories() const {
    int s = 0;
    for (int k : cardinalities_) s += k;
    return s;
  }

  std::string dimension_name(std::size_t d) const {
    return names_.empty() ? "dim" + std::to_string(d) : names_[d];
  }

  std::string category_label(std::size_t d, int k) const {
    return labels_.empty() ? "cat" + std::to_string(k) : labels_[d].at(static_cast<std::size_t>(k));
  }

  int category_index(std::size_t d, const std::string& label) const {
    if (labels_.empty()) {
      if (label.rfind("cat", 0) == 0) return std::stoi(label.substr(3));
      throw std::invalid_argument("unknown category label: " + label);
    }
    const auto& row = labels_.at(d);
    for (std::size_t k = 0; k < row.size(); ++k)
      if (row[k] == label) return static_cast<int>(k);
    throw std::invalid_argument("unknown category label: " + label);
  }

  bool contains(const Architecture& arch) const {
    if (arch.choices.size() != dims()) return false;
    for (std::size_t d = 0; d < dims(); ++d)
      if (arch.choices[d] < 0 || arch.choices[d] >= cardinalities_[d]) return false;
    return true;
  }

  void require(const Architecture& arch) const {
    if (!contains(arch))
      throw std::invalid_argument("architecture does not fit the search space");
  }

  // Total number of architectures; throws if it exceeds the cap.
  std::size_t num_architectures(std::size_t cap = 100'000'000) const {
    std::size_t n = 1;
    for (int k : cardinalities_) {
      n *= static_cast<std::size_t>(k);
      if (n > cap) throw std::runtime_error("search space too large to enumerate");
    }
    return n;
  }

  // Calls fn once for every architecture, in lexicographic order.
  void enumerate(const std::function<void(const Architecture&)>& fn) const {
    Architecture arch;
    arch.choices.assign(dims(), 0);
    while (true) {
      fn(arch);
      std::size_t d = dims();
      while (d > 0) {
        --d;
        if (++arch.choices[d] < cardinalities_[d]) break;
        arch.choices[d] = 0;
        if (d == 0) return;
      }
    }
  }

 private:
  std::vector<int> cardinalities_;
  std::vector<std::string> names_;
  std::vector<std::vector<std::string>> labels_;
};

}  // namespace catnas
