#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace sqz {

using cplx = std::complex<double>;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kSqrt2 = std::numbers::sqrt2;

// Quadrature convention used throughout: X = (a + a^dagger)/sqrt(2),
// P = (a - a^dagger)/(i sqrt(2)). Vacuum variance is 1/2.
inline constexpr double kVacuumVariance = 0.5;

// ---------------------------------------------------------------------------
// Error hierarchy. Each maps onto a distinct CLI exit status.

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class MissingData : public Error {
 public:
  using Error::Error;
};

class NumericalFailure : public Error {
 public:
  using Error::Error;
};

/// Raised when an internal consistency check fails (a bug, not bad input).
class InternalDefect : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// ---------------------------------------------------------------------------
// Parallel execution.
//
// Work is split into contiguous static chunks; callers write results into
// pre-sized slots indexed by the work item, so the output never depends on
// the schedule.

void set_thread_count(std::size_t n);
std::size_t thread_count();

void parallel_for(std::size_t n, const std::function<void(std::size_t begin, std::size_t end)>& body);

// ---------------------------------------------------------------------------
// Random streams.
//
// Every independent unit of work (trajectory, dataset cell, ...) draws from its
// own engine seeded by hashing (seed, keys...). Results are reproducible
// regardless of which thread handles the unit.

std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t stream_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> keys);

using Engine = std::mt19937_64;
Engine make_engine(std::uint64_t seed, std::initializer_list<std::uint64_t> keys);

// ---------------------------------------------------------------------------
// Locale-independent numeric text.

/// Scientific notation with 17 significant digits; round-trips exactly.
std::string format_double(double v);
double parse_double(std::string_view text);
std::int64_t parse_int(std::string_view text);
std::uint64_t parse_u64(std::string_view text);

std::string_view trim(std::string_view s);
std::vector<std::string> split(std::string_view s, char delim);
std::vector<double> parse_double_list(std::string_view s);
std::string join_doubles(const std::vector<double>& v);

/// Hex SHA-256 of a byte string.
std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::string& path);

}  // namespace sqz
