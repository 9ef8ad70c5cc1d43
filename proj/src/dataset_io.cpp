#include "sqz/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "sqz/common.hpp"

namespace sqz {

namespace {

constexpr const char* kFormatTag = "sqz-homodyne-1";
constexpr const char* kOrdering = "tau,phi,mode,shot";
constexpr const char* kTextHeader = "tau_idx,phi_idx,mode_idx,shot_idx,value";

// Keys owned by the format itself; everything else round-trips via extra.
const std::set<std::string>& reserved_keys() {
  static const std::set<std::string> keys{"format",   "tau_grid",   "phi_grid",   "mode_labels", "n_shots",
                                          "lo_calibration", "ordering", "byte_order", "encoding", "records"};
  return keys;
}

}  // namespace

void HomodyneDataset::allocate() { samples.assign(n_tau() * n_phi() * n_modes() * n_shots, 0.0); }

void HomodyneDataset::validate() const {
  if (tau_grid.empty()) throw InvalidArgument("dataset has no delay points");
  if (mode_labels.empty()) throw InvalidArgument("dataset has no modes");
  if (n_shots < 2) throw InvalidArgument("dataset needs at least 2 shots per cell");
  if (!(lo_calibration > 0.0) || !std::isfinite(lo_calibration))
    throw InvalidArgument("lo_calibration must be positive and finite");
  std::vector<double> phases;
  for (double f : phi_grid) {
    if (!std::isfinite(f)) throw InvalidArgument("phase grid must be finite");
    phases.push_back(f);
  }
  std::sort(phases.begin(), phases.end());
  phases.erase(std::unique(phases.begin(), phases.end()), phases.end());
  const std::size_t n = phases.size();
  if (n < 8) throw InvalidArgument("dataset needs at least 8 distinct LO phases, got " + std::to_string(n));
  // n phases evenly covering a half turn span pi (n - 1) / n.
  const double span = phases.back() - phases.front();
  if (span < kPi * static_cast<double>(n - 1) / static_cast<double>(n) - 1e-9)
    throw InvalidArgument("LO phases must cover a half turn (span " + format_double(span) + ")");
  if (samples.size() != n_tau() * n_phi() * n_modes() * n_shots)
    throw InvalidArgument("sample count does not match the dataset grids");
  for (double v : samples)
    if (!std::isfinite(v)) throw InvalidArgument("dataset contains non-finite samples");
}

DataFormat parse_data_format(const std::string& s) {
  if (s == "binary") return DataFormat::binary;
  if (s == "text") return DataFormat::text;
  throw ConfigError("unknown data format '" + s + "' (expected binary or text)");
}

std::string to_string(DataFormat f) { return f == DataFormat::binary ? "binary" : "text"; }

std::vector<std::string> save_dataset(const std::string& prefix, const HomodyneDataset& ds, DataFormat format) {
  ds.validate();
  Manifest m = ds.extra;
  for (const auto& k : reserved_keys()) m.erase(k);
  m["format"] = kFormatTag;
  m["tau_grid"] = join_doubles(ds.tau_grid);
  m["phi_grid"] = join_doubles(ds.phi_grid);
  m["mode_labels"] = join_doubles(ds.mode_labels);
  m["n_shots"] = std::to_string(ds.n_shots);
  m["lo_calibration"] = format_double(ds.lo_calibration);
  m["ordering"] = kOrdering;
  m["encoding"] = to_string(format);

  const std::string stem = std::filesystem::path(prefix).filename().string();
  std::vector<std::string> written;
  if (format == DataFormat::binary) {
    m["byte_order"] = "little";
    m["records"] = stem + ".bin";
    const std::string path = prefix + ".bin";
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot write " + path);
    write_f64_le(os, ds.samples);
    written.push_back(path);
  } else {
    m["records"] = stem + ".txt";
    const std::string path = prefix + ".txt";
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot write " + path);
    os << kTextHeader << '\n';
    for (std::size_t t = 0; t < ds.n_tau(); ++t)
      for (std::size_t f = 0; f < ds.n_phi(); ++f)
        for (std::size_t k = 0; k < ds.n_modes(); ++k)
          for (std::size_t s = 0; s < ds.n_shots; ++s)
            os << t << ',' << f << ',' << k << ',' << s << ',' << format_double(ds.at(t, f, k, s)) << '\n';
    if (!os) throw IoError("write failed for " + path);
    written.push_back(path);
  }
  save_manifest(prefix + ".manifest", m);
  written.insert(written.begin(), prefix + ".manifest");
  return written;
}

HomodyneDataset load_dataset(const std::string& prefix) {
  const Manifest m = load_manifest(prefix + ".manifest");
  if (manifest_get(m, "format") != kFormatTag)
    throw InvalidArgument(prefix + ".manifest: unsupported format '" + manifest_get(m, "format") + "'");
  if (manifest_get(m, "ordering") != kOrdering)
    throw InvalidArgument(prefix + ".manifest: unsupported ordering '" + manifest_get(m, "ordering") + "'");

  HomodyneDataset ds;
  ds.tau_grid = parse_double_list(manifest_get(m, "tau_grid"));
  ds.phi_grid = parse_double_list(manifest_get(m, "phi_grid"));
  ds.mode_labels = parse_double_list(manifest_get(m, "mode_labels"));
  ds.n_shots = parse_u64(manifest_get(m, "n_shots"));
  ds.lo_calibration = parse_double(manifest_get(m, "lo_calibration"));
  for (const auto& [k, v] : m)
    if (!reserved_keys().count(k)) ds.extra[k] = v;
  ds.allocate();

  const auto dir = std::filesystem::path(prefix).parent_path();
  const std::string records = (dir / manifest_get(m, "records")).string();
  const std::string encoding = manifest_get(m, "encoding");
  if (encoding == "binary") {
    if (manifest_get(m, "byte_order") != "little") throw InvalidArgument("only little-endian records are supported");
    std::ifstream is(records, std::ios::binary);
    if (!is) throw IoError("cannot read " + records);
    read_f64_le(is, ds.samples);
    if (is.peek() != std::char_traits<char>::eof()) throw InvalidArgument(records + ": trailing bytes after records");
  } else if (encoding == "text") {
    std::ifstream is(records, std::ios::binary);
    if (!is) throw IoError("cannot read " + records);
    std::string line;
    if (!std::getline(is, line) || trim(line) != kTextHeader)
      throw InvalidArgument(records + ": expected header '" + kTextHeader + "'");
    std::vector<char> seen(ds.samples.size(), 0);
    std::size_t lineno = 1;
    while (std::getline(is, line)) {
      ++lineno;
      if (trim(line).empty()) continue;
      const auto cols = split(line, ',');
      if (cols.size() != 5) throw InvalidArgument(records + ":" + std::to_string(lineno) + ": expected 5 columns");
      const auto t = parse_u64(cols[0]), f = parse_u64(cols[1]), k = parse_u64(cols[2]), s = parse_u64(cols[3]);
      if (t >= ds.n_tau() || f >= ds.n_phi() || k >= ds.n_modes() || s >= ds.n_shots)
        throw InvalidArgument(records + ":" + std::to_string(lineno) + ": index out of range");
      const auto idx = ds.index(t, f, k, s);
      ds.samples[idx] = parse_double(cols[4]);
      seen[idx] = 1;
    }
    if (std::find(seen.begin(), seen.end(), 0) != seen.end())
      throw MissingData(records + ": not every (tau, phi, mode, shot) cell is present");
  } else {
    throw InvalidArgument("unknown record encoding '" + encoding + "'");
  }
  ds.validate();
  return ds;
}

}  // namespace sqz
