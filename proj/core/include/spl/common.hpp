// Shared vocabulary types: object classes, the library error type and a
// portable seeded RNG.
#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace spl {

enum class ObjectClass : int { Vehicle = 0, Pedestrian = 1, Cyclist = 2 };

inline constexpr int kNumClasses = 3;
inline constexpr std::array<ObjectClass, kNumClasses> kAllClasses = {
    ObjectClass::Vehicle, ObjectClass::Pedestrian, ObjectClass::Cyclist};

constexpr int class_index(ObjectClass c) { return static_cast<int>(c); }
std::string_view class_name(ObjectClass c);
std::optional<ObjectClass> class_from_index(int id);
std::optional<ObjectClass> class_from_name(std::string_view name);

enum class ErrorCode {
  InvalidArgument,
  MissingFile,
  MalformedRecord,
  CalibrationInvalid,
  GroundFitFailed,
  InvalidPixelHeight,
  NoValidCluster,
  EmptyObject,
  TooFewPoints,
  TrackTooShort,
  DimMismatch,
  InsufficientMemory,
  FrameMismatch,
  ConfigError,
};

std::string_view error_code_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// splitmix64-seeded xoshiro256**. Distribution code is implemented here rather
// than with <random> distributions so that streams are identical across
// standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0);

  std::uint64_t next_u64();
  // Uniform in [0, 1).
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Uniform integer in [0, n). n must be > 0.
  std::uint64_t below(std::uint64_t n);
  double normal();
  double normal(double mean, double stddev) { return mean + stddev * normal(); }

 private:
  std::array<std::uint64_t, 4> s_{};
  std::optional<double> spare_normal_;
};

}  // namespace spl
