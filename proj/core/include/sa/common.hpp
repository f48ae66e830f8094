#ifndef SA_COMMON_HPP
#define SA_COMMON_HPP

#include <cstdint>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>

namespace sa {

inline constexpr const char* kVersion = "0.1.0";

class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Shape/axis mismatches between tensors or between a tensor and an operator.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Malformed configuration, network specs, CLI arguments.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Corrupt or truncated data files.
class DataError : public Error {
 public:
  using Error::Error;
};

// Raised when the training loss becomes non-finite; carries a state snapshot.
class TrainingDiverged : public Error {
 public:
  TrainingDiverged(const std::string& msg, std::string snapshot)
      : Error(msg), snapshot_(std::move(snapshot)) {}
  const std::string& snapshot() const { return snapshot_; }

 private:
  std::string snapshot_;
};

namespace detail {

inline void format_into(std::ostringstream&) {}

template <typename T, typename... Rest>
void format_into(std::ostringstream& os, const T& head, const Rest&... rest) {
  os << head;
  format_into(os, rest...);
}

}  // namespace detail

template <typename... Args>
std::string strcat(const Args&... args) {
  std::ostringstream os;
  detail::format_into(os, args...);
  return os.str();
}

using Rng = std::mt19937_64;

// Stable mix of a base seed with stream indices, so independent consumers
// (weight init, shuffling per epoch, augmentation) never share a stream.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace sa

#endif  // SA_COMMON_HPP
