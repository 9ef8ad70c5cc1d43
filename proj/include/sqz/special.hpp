#pragma once

#include <span>

namespace sqz {

/// Harmonic-oscillator eigenfunctions psi_0..psi_{n} at x for the
/// variance-1/2 convention, psi_0(x) = pi^{-1/4} exp(-x^2/2).
/// Uses the normalized three-term recurrence with a running exponent so
/// large orders never overflow.
void hermite_functions(double x, std::span<double> out);

/// Normalized associated Laguerre functions
///   f_m(x) = sqrt(m!/(m+k)!) x^{k/2} e^{-x/2} L_m^{(k)}(x),   m = 0..out.size()-1.
/// |f_m| <= 1; they are the displacement-operator matrix elements that appear in
/// Fock-basis Wigner sums. Evaluated with the normalized recurrence and a
/// log-domain starting value, so factorials never appear.
void laguerre_functions(double x, int k, std::span<double> out);

}  // namespace sqz
