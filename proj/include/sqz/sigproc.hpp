#pragma once

// Delay-axis low-pass (NRM) filtering and shot-stream noise spectra.

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

#include "sqz/common.hpp"
#include "sqz/dataset.hpp"

namespace sqz::sig {

struct DelayTrace {
  std::vector<double> tau;  // fs, uniform
  std::vector<double> values;

  void validate() const;
  double spacing() const { return tau[1] - tau[0]; }
};

enum class FilterEdge { hard, raised_cosine };

struct NrmOptions {
  double cutoff_factor = 1.2;
  FilterEdge edge = FilterEdge::hard;
  /// Raised-cosine roll-off over [cutoff (1 - edge_width), cutoff].
  double edge_width = 0.1;

  void validate() const;
};

/// Samples at each end affected by padding: ceil(5% of the trace).
std::size_t edge_sample_count(std::size_t n);

/// Mean-pads to a power of two, zeroes |omega| > cutoff_factor * omega0 and
/// transforms back. omega0 in rad/fs.
DelayTrace nrm_filter(const DelayTrace& trace, double omega0, const NrmOptions& options = {});

/// Filters every (phi, mode, shot) trace along tau. The result carries
/// filtered = true and the cutoff in its manifest entries.
HomodyneDataset nrm_filter_dataset(const HomodyneDataset& ds, double omega0, const NrmOptions& options = {});

struct WelchOptions {
  std::size_t segment = 256;
  double overlap = 0.5;
  std::string window = "hann";  // hann or rect

  void validate() const;
};

struct SpectrumEstimate {
  std::vector<double> freqs;  // Hz, 0 .. Nyquist
  std::vector<double> psd;    // one-sided, sum(psd) * df = variance
  std::vector<double> rin_db;
  double mean = 0.0;
  WelchOptions options;
  std::size_t segments = 0;

  double df() const { return freqs.size() > 1 ? freqs[1] - freqs[0] : 0.0; }
};

/// Welch-averaged periodogram of a shot stream. Each segment has its mean
/// removed before tapering. RIN = 10 log10(psd / mean^2).
SpectrumEstimate psd(const std::vector<double>& shots, double frame_rate, const WelchOptions& options = {});

/// Mean RIN over bins with lo <= f <= hi.
double band_average_rin(const SpectrumEstimate& spec, double lo, double hi);

/// Delimited text: a comment line echoing the estimator, then freq,psd,rin_db.
void write_spectrum(std::ostream& os, const SpectrumEstimate& spec);

}  // namespace sqz::sig
