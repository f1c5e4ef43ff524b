#include "spl/common.hpp"

#include <cmath>
#include <numbers>

namespace spl {

std::string_view class_name(ObjectClass c) {
  switch (c) {
    case ObjectClass::Vehicle: return "Vehicle";
    case ObjectClass::Pedestrian: return "Pedestrian";
    case ObjectClass::Cyclist: return "Cyclist";
  }
  return "Unknown";
}

std::optional<ObjectClass> class_from_index(int id) {
  if (id < 0 || id >= kNumClasses) return std::nullopt;
  return static_cast<ObjectClass>(id);
}

std::optional<ObjectClass> class_from_name(std::string_view name) {
  for (auto c : kAllClasses) {
    if (class_name(c) == name) return c;
  }
  return std::nullopt;
}

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::MissingFile: return "MissingFile";
    case ErrorCode::MalformedRecord: return "MalformedRecord";
    case ErrorCode::CalibrationInvalid: return "CalibrationInvalid";
    case ErrorCode::GroundFitFailed: return "GroundFitFailed";
    case ErrorCode::InvalidPixelHeight: return "InvalidPixelHeight";
    case ErrorCode::NoValidCluster: return "NoValidCluster";
    case ErrorCode::EmptyObject: return "EmptyObject";
    case ErrorCode::TooFewPoints: return "TooFewPoints";
    case ErrorCode::TrackTooShort: return "TrackTooShort";
    case ErrorCode::DimMismatch: return "DimMismatch";
    case ErrorCode::InsufficientMemory: return "InsufficientMemory";
    case ErrorCode::FrameMismatch: return "FrameMismatch";
    case ErrorCode::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

namespace {

std::uint64_t splitmix64(std::uint64_t& x) {
  std::uint64_t z = (x += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

}  // namespace

Rng::Rng(std::uint64_t seed) {
  for (auto& word : s_) word = splitmix64(seed);
}

std::uint64_t Rng::next_u64() {
  const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
  const std::uint64_t t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = rotl(s_[3], 45);
  return result;
}

double Rng::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

std::uint64_t Rng::below(std::uint64_t n) {
  // Rejection sampling on the top of the range keeps the result unbiased.
  const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
  std::uint64_t x = next_u64();
  while (x >= limit) x = next_u64();
  return x % n;
}

double Rng::normal() {
  if (spare_normal_) {
    const double v = *spare_normal_;
    spare_normal_.reset();
    return v;
  }
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * std::numbers::pi * u2;
  spare_normal_ = r * std::sin(theta);
  return r * std::cos(theta);
}

}  // namespace spl
