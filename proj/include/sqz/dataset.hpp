#pragma once

// Shot-resolved homodyne samples and their on-disk formats.

#include <cstddef>
#include <string>
#include <vector>

#include "sqz/binary_io.hpp"

namespace sqz {

/// samples are stored flat in (tau, phi, mode, shot) order, shot fastest.
/// Values are raw difference-signal units; divide by lo_calibration to get
/// quadratures.
struct HomodyneDataset {
  std::vector<double> tau_grid;     // fs
  std::vector<double> phi_grid;     // rad
  std::vector<double> mode_labels;  // nm
  std::size_t n_shots = 0;
  double lo_calibration = 1.0;
  std::vector<double> samples;
  Manifest extra;  // provenance and processing flags carried with the data

  std::size_t n_tau() const { return tau_grid.size(); }
  std::size_t n_phi() const { return phi_grid.size(); }
  std::size_t n_modes() const { return mode_labels.size(); }

  std::size_t index(std::size_t t, std::size_t f, std::size_t m, std::size_t s) const {
    return ((t * n_phi() + f) * n_modes() + m) * n_shots + s;
  }
  double& at(std::size_t t, std::size_t f, std::size_t m, std::size_t s) { return samples[index(t, f, m, s)]; }
  double at(std::size_t t, std::size_t f, std::size_t m, std::size_t s) const { return samples[index(t, f, m, s)]; }

  /// Allocates zeroed samples for the current grids.
  void allocate();
  void validate() const;
};

enum class DataFormat { binary, text };

DataFormat parse_data_format(const std::string& s);
std::string to_string(DataFormat f);

/// Writes <prefix>.manifest plus <prefix>.bin or <prefix>.txt. Returns the
/// paths written.
std::vector<std::string> save_dataset(const std::string& prefix, const HomodyneDataset& ds, DataFormat format);
/// Reads the manifest and whichever record file it declares.
HomodyneDataset load_dataset(const std::string& prefix);

}  // namespace sqz
