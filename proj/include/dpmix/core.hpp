// Basic aliases, error types and randomness helpers shared by every module.
#ifndef DPMIX_CORE_HPP
#define DPMIX_CORE_HPP

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>

namespace dpmix {

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

using Vec = Vector<double>;
using Mat = Matrix<double>;

using Rng = std::mt19937_64;

// Errors. The CLI maps UsageError and its subclasses to exit code 2 and
// everything else to 1.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct UsageError : Error {
  using Error::Error;
};
struct ShapeError : UsageError {
  using UsageError::UsageError;
};
struct ParseError : UsageError {
  using UsageError::UsageError;
};
struct ArgumentError : Error {
  using Error::Error;
};
struct InvalidModelError : Error {
  using Error::Error;
};
struct InfeasibleError : Error {
  using Error::Error;
};
struct StateError : Error {
  using Error::Error;
};
struct ContractError : Error {
  using Error::Error;
};
struct InsufficientDataError : Error {
  using Error::Error;
};
struct UndersizeError : Error {
  using Error::Error;
};
struct InternalError : Error {
  using Error::Error;
};

// Uniform draw on the open interval (0, 1) from the top 53 bits.
inline double uniform_open01(Rng& rng) {
  for (;;) {
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    if (u > 0.0) return u;
  }
}

inline double standard_normal(Rng& rng) {
  std::normal_distribution<double> nd(0.0, 1.0);
  return nd(rng);
}

inline Vec standard_normal_vector(Eigen::Index d, Rng& rng) {
  Vec z(d);
  for (Eigen::Index i = 0; i < d; ++i) z(i) = standard_normal(rng);
  return z;
}

// Deterministic per-stage seed: FNV-1a over the stage name, mixed with the
// master seed through splitmix64.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t stage_seed(std::uint64_t master, std::string_view stage) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : stage) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return splitmix64(master ^ splitmix64(h));
}

inline Rng stage_rng(std::uint64_t master, std::string_view stage) {
  return Rng(stage_seed(master, stage));
}

}  // namespace dpmix

#endif  // DPMIX_CORE_HPP
