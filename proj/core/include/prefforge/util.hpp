#ifndef PREFFORGE_UTIL_HPP_
#define PREFFORGE_UTIL_HPP_

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace prefforge {

// 64-bit FNV-1a; used for content keys and config hashes.
std::uint64_t fnv1a64(std::string_view data) noexcept;

std::string to_hex(std::uint64_t value);

// splitmix64 finalizer; good enough to decorrelate derived seeds.
std::uint64_t mix64(std::uint64_t x) noexcept;

// Deterministic child seed from a base seed plus an index path, so that
// concurrent work items do not depend on scheduling order.
std::uint64_t derive_seed(std::uint64_t base,
                          std::initializer_list<std::uint64_t> path) noexcept;

inline std::mt19937_64 make_rng(std::uint64_t seed) {
  return std::mt19937_64(mix64(seed ^ 0x9e3779b97f4a7c15ull));
}

// Shortest round-trip decimal form; integral doubles print without a
// fraction ("7", not "7.0").
std::string format_double(double value);

std::string trim(std::string_view s);

// Lowercases ASCII and collapses runs of whitespace to single spaces.
std::string normalize_text(std::string_view s);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view content);

// Runs fn(0..n-1) on up to `parallelism` threads. Callers must make fn(i)
// write only to slot i so results are order-independent.
void parallel_for(std::size_t n, int parallelism,
                  const std::function<void(std::size_t)>& fn);

enum class LogLevel { debug = 0, info = 1, warn = 2, error = 3, off = 4 };

// Global level; initialized from PREF_FORGE_LOG when set.
LogLevel log_level() noexcept;
void set_log_level(LogLevel level) noexcept;
void log_message(LogLevel level, std::string_view message);

}  // namespace prefforge

#endif  // PREFFORGE_UTIL_HPP_
