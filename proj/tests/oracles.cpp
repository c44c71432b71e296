#include "oracles.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <numeric>
#include <vector>

namespace prefforge::testing {

std::size_t naive_best_candidate(std::span<const double> accuracies,
                                 std::span<const std::size_t> lengths) {
  std::vector<std::size_t> order(accuracies.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) {
                     if (accuracies[a] != accuracies[b])
                       return accuracies[a] > accuracies[b];
                     if (lengths[a] != lengths[b])
                       return lengths[a] < lengths[b];
                     return a < b;
                   });
  return order.front();
}

TempDir::TempDir() {
  static std::atomic<unsigned> counter{0};
  const auto stamp =
      std::chrono::steady_clock::now().time_since_epoch().count();
  path_ = std::filesystem::temp_directory_path() /
          ("prefforge-test-" + std::to_string(stamp) + "-" +
           std::to_string(counter.fetch_add(1)));
  std::filesystem::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);
}

}  // namespace prefforge::testing
