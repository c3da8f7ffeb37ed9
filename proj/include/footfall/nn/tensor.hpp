#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "footfall/error.hpp"

namespace footfall::nn {

struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> s, double fill = 0.0) : shape(std::move(s)) {
    data.assign(numel(shape), fill);
  }

  static std::size_t numel(const std::vector<std::size_t>& s) {
    return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
  }

  std::size_t size() const { return data.size(); }
  double* ptr() { return data.data(); }
  const double* ptr() const { return data.data(); }
  std::span<double> span() { return data; }
  std::span<const double> span() const { return data; }

  friend bool operator==(const Tensor&, const Tensor&) = default;
};

// Ordered collection of named tensors. Gradients share the same layout as the
// parameters they belong to (see zeros_like()).
class ParamSet {
 public:
  struct Entry {
    std::string name;
    Tensor tensor;
    // Fan-in used for U(-1/sqrt(fan_in), 1/sqrt(fan_in)) init; 0 means the
    // tensor keeps its construction value (biases, batch-norm state).
    std::size_t fan_in = 0;
    bool trainable = true;
  };

  std::size_t add(std::string name, std::vector<std::size_t> shape, std::size_t fan_in, bool trainable = true,
                  double fill = 0.0) {
    entries_.push_back({std::move(name), Tensor(std::move(shape), fill), fan_in, trainable});
    return entries_.size() - 1;
  }

  std::size_t size() const { return entries_.size(); }
  Tensor& operator[](std::size_t i) { return entries_[i].tensor; }
  const Tensor& operator[](std::size_t i) const { return entries_[i].tensor; }
  const Entry& entry(std::size_t i) const { return entries_[i]; }
  const std::string& name(std::size_t i) const { return entries_[i].name; }
  bool trainable(std::size_t i) const { return entries_[i].trainable; }

  std::size_t index_of(const std::string& name) const {
    for (std::size_t i = 0; i < entries_.size(); ++i)
      if (entries_[i].name == name) return i;
    throw std::out_of_range("no tensor named '" + name + "'");
  }
  bool contains(const std::string& name) const {
    for (const auto& e : entries_)
      if (e.name == name) return true;
    return false;
  }
  Tensor& at(const std::string& name) { return entries_[index_of(name)].tensor; }
  const Tensor& at(const std::string& name) const { return entries_[index_of(name)].tensor; }

  ParamSet zeros_like() const {
    ParamSet out = *this;
    for (auto& e : out.entries_) std::fill(e.tensor.data.begin(), e.tensor.data.end(), 0.0);
    return out;
  }

  void fill_zero() {
    for (auto& e : entries_) std::fill(e.tensor.data.begin(), e.tensor.data.end(), 0.0);
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& e : entries_) n += e.tensor.size();
    return n;
  }

  auto begin() { return entries_.begin(); }
  auto end() { return entries_.end(); }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }

  friend bool operator==(const ParamSet& a, const ParamSet& b) {
    if (a.entries_.size() != b.entries_.size()) return false;
    for (std::size_t i = 0; i < a.entries_.size(); ++i)
      if (a.entries_[i].name != b.entries_[i].name || !(a.entries_[i].tensor == b.entries_[i].tensor)) return false;
    return true;
  }

 private:
  std::vector<Entry> entries_;
};

// Every tensor with a fan-in is drawn from U(-k, k), k = 1/sqrt(fan_in);
// the rest keep their construction values. Deterministic per seed.
inline void init_params(ParamSet& params, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& e = params.entry(i);
    if (e.fan_in == 0) continue;
    const double k = 1.0 / std::sqrt(static_cast<double>(e.fan_in));
    std::uniform_real_distribution<double> dist(-k, k);
    for (double& v : params[i].data) {
      do {
        v = dist(rng);
      } while (v == -k);
    }
  }
}

inline bool all_finite(std::span<const double> v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

}  // namespace footfall::nn
