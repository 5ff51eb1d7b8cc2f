#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace mamex {

/// Raised when caller-supplied data (files, configs, tables) violates a
/// documented invariant. The CLI maps it to exit code 2.
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised for failures that happen while computing (divergence, budget
/// exhaustion, unsupported solver modes). The CLI maps it to exit code 1.
class ComputeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::size_t kDefaultJointCap = 4096;

/// Mixed-radix index over per-agent choice counts. Component 0 is the most
/// significant digit (row-major over agents), so a flattened index orders
/// joint choices lexicographically by agent.
class MixedRadix {
 public:
  MixedRadix() = default;
  explicit MixedRadix(std::vector<std::size_t> sizes,
                      std::size_t cap = static_cast<std::size_t>(-1));

  std::size_t num_components() const { return sizes_.size(); }
  std::size_t size() const { return total_; }
  std::size_t size_of(std::size_t component) const { return sizes_[component]; }
  const std::vector<std::size_t>& sizes() const { return sizes_; }
  std::size_t stride(std::size_t component) const { return strides_[component]; }

  std::size_t encode(std::span<const std::size_t> digits) const;
  std::vector<std::size_t> decode(std::size_t index) const;
  std::size_t digit(std::size_t index, std::size_t component) const {
    return (index / strides_[component]) % sizes_[component];
  }
  /// Replace one digit of `index` with `value`.
  std::size_t with_digit(std::size_t index, std::size_t component,
                         std::size_t value) const {
    return index + (value - digit(index, component)) * strides_[component];
  }
  /// Index of `index` with `component` removed, in the radix of the others.
  std::size_t others_index(std::size_t index, std::size_t component) const;
  /// Number of joint choices of all components but `component`.
  std::size_t others_size(std::size_t component) const {
    return total_ / sizes_[component];
  }

  bool operator==(const MixedRadix&) const = default;

 private:
  std::vector<std::size_t> sizes_;
  std::vector<std::size_t> strides_;
  std::size_t total_ = 0;
};

// Deterministic seeding. Every random draw in the library goes through
// std::mt19937_64 seeded from a value produced by these helpers so that
// results do not depend on std:: distribution implementations.
std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a,
                          std::uint64_t b = 0);

template <typename Engine>
double uniform01(Engine& eng) {
  return static_cast<double>(eng() >> 11) * 0x1.0p-53;
}

template <typename Engine>
std::size_t uniform_index(Engine& eng, std::size_t n) {
  return static_cast<std::size_t>(uniform01(eng) * static_cast<double>(n)) % n;
}

/// Inverse-CDF draw from an unnormalized nonnegative weight vector.
template <typename Engine>
std::size_t sample_categorical(Engine& eng, std::span<const double> weights) {
  double total = 0.0;
  for (double w : weights) total += w;
  const double u = uniform01(eng) * total;
  double acc = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights[i] <= 0.0) continue;
    acc += weights[i];
    last_positive = i;
    if (u < acc) return i;
  }
  return last_positive;
}

/// Lowest index attaining the maximum.
std::size_t argmax_lowest(std::span<const double> values);

/// Runs body(i) for i in [0, n) on up to `threads` workers (0 = hardware).
/// Each index is handled exactly once; callers write to disjoint slots.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body,
                  unsigned threads = 0);

}  // namespace mamex
