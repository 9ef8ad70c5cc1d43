#include "sqz/sigproc.hpp"

#include <unsupported/Eigen/FFT>

#include <bit>
#include <cmath>
#include <limits>
#include <ostream>

#include "sqz/common.hpp"

namespace sqz::sig {

void DelayTrace::validate() const {
  if (tau.size() != values.size()) throw InvalidArgument("trace delay and value counts differ");
  if (tau.size() < 4) throw InvalidArgument("trace needs at least 4 samples");
  const double h = tau[1] - tau[0];
  if (!(h > 0.0)) throw InvalidArgument("delay grid must be increasing");
  for (std::size_t i = 1; i < tau.size(); ++i) {
    const double expected = tau[0] + h * static_cast<double>(i);
    if (std::abs(tau[i] - expected) > 1e-9 * std::max(std::abs(h) * static_cast<double>(i), std::abs(tau[i])))
      throw InvalidArgument("delay grid is not uniform at index " + std::to_string(i));
  }
  for (double v : values)
    if (!std::isfinite(v)) throw InvalidArgument("trace contains non-finite values");
}

void NrmOptions::validate() const {
  if (!(cutoff_factor > 0.0) || !std::isfinite(cutoff_factor)) throw InvalidArgument("cutoff_factor must be positive");
  if (edge == FilterEdge::raised_cosine && !(edge_width > 0.0 && edge_width < 1.0))
    throw InvalidArgument("raised-cosine edge width must lie in (0, 1)");
}

std::size_t edge_sample_count(std::size_t n) { return (n * 5 + 99) / 100; }

namespace {

// Filters already-validated values with spacing h.
void filter_values(const double* in, double* out, std::size_t n, double h, double omega0, const NrmOptions& o,
                   Eigen::FFT<double>& fft, std::vector<double>& padded, std::vector<cplx>& spectrum) {
  const std::size_t n_pad = std::bit_ceil(n);
  double mean = 0.0;
  for (std::size_t i = 0; i < n; ++i) mean += in[i];
  mean /= static_cast<double>(n);
  padded.assign(n_pad, mean);
  std::copy(in, in + n, padded.begin());
  fft.fwd(spectrum, padded);

  const double cut = o.cutoff_factor * omega0;
  const double roll_start = o.edge == FilterEdge::raised_cosine ? cut * (1.0 - o.edge_width) : cut;
  const double d_omega = 2.0 * kPi / (static_cast<double>(n_pad) * h);
  for (std::size_t k = 0; k < n_pad; ++k) {
    const long j = k < n_pad / 2 ? static_cast<long>(k) : static_cast<long>(k) - static_cast<long>(n_pad);
    const double w = std::abs(static_cast<double>(j)) * d_omega;
    double gain = 1.0;
    if (w > cut) {
      gain = 0.0;
    } else if (w > roll_start) {
      gain = 0.5 * (1.0 + std::cos(kPi * (w - roll_start) / (cut - roll_start)));
    }
    spectrum[k] *= gain;
  }
  // Keep the transform real: the Nyquist bin has no partner.
  if (n_pad % 2 == 0) spectrum[n_pad / 2] = spectrum[n_pad / 2].real();
  std::vector<cplx> back;
  fft.inv(back, spectrum);
  for (std::size_t i = 0; i < n; ++i) out[i] = back[i].real();
}

void check_resolution(double h, double omega0) {
  if (!(omega0 > 0.0) || !std::isfinite(omega0)) throw InvalidArgument("carrier frequency must be positive");
  const double per_cycle = 2.0 * kPi / omega0 / h;
  if (per_cycle < 4.0 - 1e-9)
    throw InvalidArgument("delay spacing gives " + format_double(per_cycle) + " samples per optical cycle; need >= 4");
}

}  // namespace

DelayTrace nrm_filter(const DelayTrace& trace, double omega0, const NrmOptions& options) {
  trace.validate();
  options.validate();
  check_resolution(trace.spacing(), omega0);
  DelayTrace out{trace.tau, std::vector<double>(trace.values.size())};
  Eigen::FFT<double> fft;
  std::vector<double> padded;
  std::vector<cplx> spectrum;
  filter_values(trace.values.data(), out.values.data(), trace.values.size(), trace.spacing(), omega0, options, fft,
                padded, spectrum);
  return out;
}

HomodyneDataset nrm_filter_dataset(const HomodyneDataset& ds, double omega0, const NrmOptions& options) {
  ds.validate();
  options.validate();
  DelayTrace grid{ds.tau_grid, std::vector<double>(ds.tau_grid.size(), 0.0)};
  grid.validate();
  const double h = grid.spacing();
  check_resolution(h, omega0);

  HomodyneDataset out = ds;
  const std::size_t n_tau = ds.n_tau();
  const std::size_t n_traces = ds.n_phi() * ds.n_modes() * ds.n_shots;
  // Consecutive trace index runs over (phi, mode, shot), shot fastest.
  parallel_for(n_traces, [&](std::size_t begin, std::size_t end) {
    Eigen::FFT<double> fft;
    std::vector<double> in(n_tau), res(n_tau), padded;
    std::vector<cplx> spectrum;
    for (std::size_t tr = begin; tr < end; ++tr) {
      for (std::size_t t = 0; t < n_tau; ++t) in[t] = ds.samples[t * n_traces + tr];
      filter_values(in.data(), res.data(), n_tau, h, omega0, options, fft, padded, spectrum);
      for (std::size_t t = 0; t < n_tau; ++t) out.samples[t * n_traces + tr] = res[t];
    }
  });
  out.extra["filtered"] = "true";
  out.extra["nrm_cutoff_factor"] = format_double(options.cutoff_factor);
  out.extra["nrm_cutoff_omega"] = format_double(options.cutoff_factor * omega0);
  out.extra["nrm_edge"] = options.edge == FilterEdge::hard ? "hard" : "raised_cosine";
  if (options.edge == FilterEdge::raised_cosine) out.extra["nrm_edge_width"] = format_double(options.edge_width);
  out.extra["nrm_edge_samples"] = std::to_string(edge_sample_count(n_tau));
  return out;
}

void WelchOptions::validate() const {
  if (segment < 8) throw InvalidArgument("Welch segment must be at least 8 samples");
  if (!(overlap >= 0.0 && overlap < 1.0)) throw InvalidArgument("Welch overlap must lie in [0, 1)");
  if (window != "hann" && window != "rect") throw InvalidArgument("unknown window '" + window + "'");
}

SpectrumEstimate psd(const std::vector<double>& shots, double frame_rate, const WelchOptions& options) {
  options.validate();
  if (!(frame_rate > 0.0) || !std::isfinite(frame_rate)) throw InvalidArgument("frame rate must be positive");
  if (shots.size() < 256) throw InvalidArgument("PSD needs at least 256 shots");
  if (shots.size() < options.segment) throw InvalidArgument("fewer shots than one Welch segment");
  for (double v : shots)
    if (!std::isfinite(v)) throw InvalidArgument("shot stream contains non-finite values");

  const std::size_t seg = options.segment;
  const auto hop = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(static_cast<double>(seg) * (1.0 - options.overlap))));
  std::vector<double> win(seg, 1.0);
  if (options.window == "hann")
    for (std::size_t i = 0; i < seg; ++i)
      win[i] = 0.5 - 0.5 * std::cos(2.0 * kPi * static_cast<double>(i) / static_cast<double>(seg));
  double win_power = 0.0;
  for (double w : win) win_power += w * w;

  SpectrumEstimate est;
  est.options = options;
  double mean = 0.0;
  for (double v : shots) mean += v;
  mean /= static_cast<double>(shots.size());
  est.mean = mean;

  const std::size_t n_freq = seg / 2 + 1;
  est.psd.assign(n_freq, 0.0);
  Eigen::FFT<double> fft;
  std::vector<double> buf(seg);
  std::vector<cplx> spec;
  for (std::size_t start = 0; start + seg <= shots.size(); start += hop) {
    double m = 0.0;
    for (std::size_t i = 0; i < seg; ++i) m += shots[start + i];
    m /= static_cast<double>(seg);
    for (std::size_t i = 0; i < seg; ++i) buf[i] = (shots[start + i] - m) * win[i];
    fft.fwd(spec, buf);
    for (std::size_t k = 0; k < n_freq; ++k) {
      const double scale = (k == 0 || (seg % 2 == 0 && k == seg / 2)) ? 1.0 : 2.0;
      est.psd[k] += scale * std::norm(spec[k]) / (frame_rate * win_power);
    }
    ++est.segments;
  }
  for (double& p : est.psd) p /= static_cast<double>(est.segments);

  est.freqs.resize(n_freq);
  for (std::size_t k = 0; k < n_freq; ++k) est.freqs[k] = frame_rate * static_cast<double>(k) / static_cast<double>(seg);

  if (mean == 0.0) throw InvalidArgument("RIN is undefined for a zero-mean stream");
  est.rin_db.resize(n_freq);
  for (std::size_t k = 0; k < n_freq; ++k)
    est.rin_db[k] = est.psd[k] > 0.0 ? 10.0 * std::log10(est.psd[k] / (mean * mean))
                                     : -std::numeric_limits<double>::infinity();
  return est;
}

double band_average_rin(const SpectrumEstimate& spec, double lo, double hi) {
  if (spec.freqs.empty()) throw InvalidArgument("empty spectrum");
  const double nyquist = spec.freqs.back();
  if (!(lo >= 0.0) || !(hi <= nyquist * (1.0 + 1e-12)) || !(hi >= lo))
    throw InvalidArgument("band [" + format_double(lo) + ", " + format_double(hi) + "] outside [0, Nyquist]");
  double acc = 0.0;
  std::size_t count = 0;
  for (std::size_t k = 0; k < spec.freqs.size(); ++k)
    if (spec.freqs[k] >= lo && spec.freqs[k] <= hi) {
      acc += spec.rin_db[k];
      ++count;
    }
  if (count == 0) throw InvalidArgument("band contains no frequency bins");
  return acc / static_cast<double>(count);
}

void write_spectrum(std::ostream& os, const SpectrumEstimate& spec) {
  os << "# welch segment=" << spec.options.segment << " overlap=" << format_double(spec.options.overlap)
     << " window=" << spec.options.window << " segments=" << spec.segments << " mean=" << format_double(spec.mean)
     << '\n';
  os << "freq,psd,rin_db\n";
  for (std::size_t k = 0; k < spec.freqs.size(); ++k)
    os << format_double(spec.freqs[k]) << ',' << format_double(spec.psd[k]) << ',' << format_double(spec.rin_db[k])
       << '\n';
}

}  // namespace sqz::sig
