#include "mamex/common.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <limits>
#include <mutex>
#include <thread>

namespace mamex {

MixedRadix::MixedRadix(std::vector<std::size_t> sizes, std::size_t cap)
    : sizes_(std::move(sizes)), strides_(sizes_.size(), 1), total_(1) {
  if (sizes_.empty()) throw InputError("MixedRadix: no components");
  for (std::size_t k = sizes_.size(); k-- > 0;) {
    if (sizes_[k] == 0) {
      throw InputError("MixedRadix: component " + std::to_string(k) +
                       " has size 0");
    }
    strides_[k] = total_;
    if (total_ > cap / sizes_[k]) {
      throw InputError("MixedRadix: joint size exceeds cap " +
                       std::to_string(cap));
    }
    total_ *= sizes_[k];
  }
  if (total_ > cap) {
    throw InputError("MixedRadix: joint size " + std::to_string(total_) +
                     " exceeds cap " + std::to_string(cap));
  }
}

std::size_t MixedRadix::encode(std::span<const std::size_t> digits) const {
  if (digits.size() != sizes_.size()) {
    throw InputError("MixedRadix::encode: wrong number of digits");
  }
  std::size_t index = 0;
  for (std::size_t k = 0; k < digits.size(); ++k) {
    if (digits[k] >= sizes_[k]) {
      throw InputError("MixedRadix::encode: digit " + std::to_string(k) +
                       " out of range");
    }
    index += digits[k] * strides_[k];
  }
  return index;
}

std::vector<std::size_t> MixedRadix::decode(std::size_t index) const {
  std::vector<std::size_t> out(sizes_.size());
  for (std::size_t k = 0; k < sizes_.size(); ++k) out[k] = digit(index, k);
  return out;
}

std::size_t MixedRadix::others_index(std::size_t index,
                                     std::size_t component) const {
  std::size_t out = 0;
  for (std::size_t k = 0; k < sizes_.size(); ++k) {
    if (k == component) continue;
    out = out * sizes_[k] + digit(index, k);
  }
  return out;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a,
                          std::uint64_t b) {
  return splitmix64(splitmix64(splitmix64(master) ^ a) ^ (b * 0xD6E8FEB86659FD93ULL));
}

std::size_t argmax_lowest(std::span<const double> values) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body,
                  unsigned threads) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, n));
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        body(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        next = n;
      }
    }
  };
  std::vector<std::jthread> pool;
  pool.reserve(threads);
  for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
  pool.clear();
  if (error) std::rethrow_exception(error);
}

}  // namespace mamex
