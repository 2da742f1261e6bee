// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace pemnet
{

using cd = std::complex<double>;
using cvec = Eigen::VectorXcd;
using cmat = Eigen::MatrixXcd;
using rvec = Eigen::VectorXd;
using rmat = Eigen::MatrixXd;

using Rng = std::mt19937_64;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kSpeedOfLight = 299792458.0;
inline constexpr int kUnknownGrid = -1;

struct Point
{
    double x = 0.0;
    double y = 0.0;
};

inline double distance(const Point &a, const Point &b)
{
    return std::hypot(a.x - b.x, a.y - b.y);
}

// Raised for malformed configuration or invalid arguments supplied by the user.
class ConfigError : public std::invalid_argument
{
  public:
    using std::invalid_argument::invalid_argument;
};

// Raised when a build or solver step cannot complete.
class RuntimeError : public std::runtime_error
{
  public:
    using std::runtime_error::runtime_error;
};

// SplitMix64 finalizer; used to derive independent per-task seeds from a master seed.
inline std::uint64_t mix_seed(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b = 0)
{
    return mix_seed(mix_seed(mix_seed(master) ^ a) ^ (b + 0x632be59bd9b4e019ULL));
}

inline double uniform01(Rng &rng)
{
    return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

// Circularly-symmetric complex normal with total variance `var`.
inline cd complex_normal(Rng &rng, double var)
{
    std::normal_distribution<double> n(0.0, std::sqrt(var / 2.0));
    const double re = n(rng);
    const double im = n(rng);
    return {re, im};
}

} // namespace pemnet
