#ifndef PREFFORGE_TESTS_ORACLES_HPP_
#define PREFFORGE_TESTS_ORACLES_HPP_

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>

#include "prefforge/errors.hpp"

namespace prefforge::testing {

// Runs fn and reports the typed error code it threw, if any; lets tests
// assert `error_code_of(...) == Errc::x` in one line.
template <typename Fn>
std::optional<Errc> error_code_of(Fn&& fn) {
  try {
    std::forward<Fn>(fn)();
  } catch (const Error& e) {
    return e.code();
  }
  return std::nullopt;
}

// Independent reference for SFT candidate selection: stable-sort the
// candidate indices by (verification accuracy desc, trace length asc, index
// asc) and take the front. The production code is an argmax scan; the two
// must agree everywhere, ties included.
std::size_t naive_best_candidate(std::span<const double> accuracies,
                                 std::span<const std::size_t> lengths);

// Scratch directory removed on destruction.
class TempDir {
 public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::string file(const std::string& name) const {
    return (path_ / name).string();
  }

 private:
  std::filesystem::path path_;
};

}  // namespace prefforge::testing

#endif  // PREFFORGE_TESTS_ORACLES_HPP_
