#include "sqz/special.hpp"

#include <cmath>
#include <numbers>
#include <vector>

#include "sqz/common.hpp"

namespace sqz {

namespace {
constexpr double kBig = 1e150;
constexpr double kLogBig = 345.38776394910684;  // log(1e150)
}  // namespace

void hermite_functions(double x, std::span<double> out) {
  if (out.empty()) return;
  // psi_0 = pi^{-1/4} e^{-x^2/2}, carried as mantissa * exp(log_scale).
  double log_scale = -0.25 * std::log(kPi) - 0.5 * x * x;
  double prev = 0.0;
  double cur = 1.0;
  out[0] = std::exp(log_scale);
  for (std::size_t n = 0; n + 1 < out.size(); ++n) {
    const double dn = static_cast<double>(n);
    const double next = std::sqrt(2.0 / (dn + 1.0)) * x * cur - std::sqrt(dn / (dn + 1.0)) * prev;
    prev = cur;
    cur = next;
    if (std::abs(cur) > kBig) {
      cur /= kBig;
      prev /= kBig;
      log_scale += kLogBig;
    }
    out[n + 1] = cur * std::exp(log_scale);
  }
}

void laguerre_functions(double x, int k, std::span<double> out) {
  if (out.empty()) return;
  if (k < 0 || x < 0.0) throw InvalidArgument("laguerre_functions: need k >= 0 and x >= 0");
  const double dk = static_cast<double>(k);
  double log_scale;
  if (x == 0.0) {
    if (k > 0) {
      for (auto& v : out) v = 0.0;
      return;
    }
    log_scale = 0.0;
  } else {
    log_scale = 0.5 * (dk * std::log(x) - std::lgamma(dk + 1.0)) - 0.5 * x;
  }
  double prev = 0.0;
  double cur = 1.0;
  out[0] = std::exp(log_scale);
  for (std::size_t m = 0; m + 1 < out.size(); ++m) {
    const double dm = static_cast<double>(m);
    const double next =
        ((2.0 * dm + 1.0 + dk - x) * cur - std::sqrt(dm * (dm + dk)) * prev) / std::sqrt((dm + 1.0) * (dm + 1.0 + dk));
    prev = cur;
    cur = next;
    if (std::abs(cur) > kBig) {
      cur /= kBig;
      prev /= kBig;
      log_scale += kLogBig;
    }
    out[m + 1] = cur * std::exp(log_scale);
  }
}

}  // namespace sqz
