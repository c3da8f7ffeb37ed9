#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <type_traits>
#include <vector>

#include "footfall/nn/tensor.hpp"

namespace footfall::testing {

// |a - n| / max(|a|, |n|, floor). The floor keeps entries whose true gradient
// is ~0 from being judged on central-difference round-off alone.
inline double relative_error(double analytic, double numeric, double floor = 1e-5) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

struct GradCheckResult {
  double max_rel = 0.0;
  std::string worst;
  std::size_t checked = 0;
  std::size_t kinks = 0;  // entries re-checked with a smaller step
};

struct NoPattern {
  int operator()() const { return 0; }
};

// Central differences of loss() against `analytic` for trainable entries.
// `every` > 1 checks a strided subset of each tensor (always including its
// first and last element).
//
// For piecewise-linear models pass `pattern`, returning the activation
// pattern (ReLU signs, max-pool winners) of the last loss() call. When the
// +-eps probe changes that pattern the loss is not differentiable inside the
// interval, and the entry is re-probed with eps/10 (down to 1e-7) until the
// pattern holds.
template <class LossFn, class PatternFn = NoPattern>
GradCheckResult check_gradients(nn::ParamSet& params, const nn::ParamSet& analytic, LossFn&& loss,
                                double eps = 1e-4, std::size_t every = 1, PatternFn pattern = {}) {
  GradCheckResult r;
  constexpr bool kHasPattern = !std::is_same_v<PatternFn, NoPattern>;
  loss();
  const auto base = pattern();
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params.trainable(i)) continue;
    auto& data = params[i].data;
    for (std::size_t k = 0; k < data.size(); ++k) {
      if (every > 1 && k % every != 0 && k + 1 != data.size()) continue;
      const double orig = data[k];
      double numeric = 0.0;
      for (double h = eps;; h /= 10) {
        data[k] = orig + h;
        const double lp = loss();
        const bool same_p = !kHasPattern || pattern() == base;
        data[k] = orig - h;
        const double lm = loss();
        const bool same_m = !kHasPattern || pattern() == base;
        data[k] = orig;
        numeric = (lp - lm) / (2 * h);
        if ((same_p && same_m) || h < 1e-7) break;
        if (h == eps) ++r.kinks;
      }
      const double rel = relative_error(analytic[i].data[k], numeric);
      ++r.checked;
      if (rel > r.max_rel) {
        r.max_rel = rel;
        r.worst = params.name(i) + "[" + std::to_string(k) + "] analytic=" + std::to_string(analytic[i].data[k]) +
                  " numeric=" + std::to_string(numeric);
      }
    }
  }
  return r;
}

inline std::vector<double> random_vector(std::size_t n, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

inline std::vector<std::uint8_t> random_labels(std::size_t n, std::uint64_t seed, double p = 0.3) {
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution b(p);
  std::vector<std::uint8_t> v(n);
  for (auto& x : v) x = b(rng) ? 1 : 0;
  return v;
}

class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("footfall_test_" + std::to_string(rd()) + "_" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace footfall::testing
