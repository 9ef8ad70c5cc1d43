#include "sqz/config.hpp"

#include <fstream>
#include <sstream>

#include "sqz/common.hpp"

namespace sqz {

namespace {

struct Default {
  const char* section;
  const char* key;
  const char* value;
};

// The complete set of accepted keys.
constexpr Default kDefaults[] = {
    {"twa", "nz", "128"},
    {"twa", "z_extent", "1"},
    {"twa", "dt", "0.005"},
    {"twa", "t_final", "1"},
    {"twa", "vg", "0"},
    {"twa", "beta2", "0.1"},
    {"twa", "chi_e", "4e-5"},
    {"twa", "n_photons", "10000"},
    {"twa", "shape", "flat"},
    {"twa", "pulse_center", "0.5"},
    {"twa", "pulse_width", "0.05"},
    {"twa", "n_traj", "10000"},
    {"twa", "snapshots", "11"},
    {"twa", "modes", "0"},

    {"state", "kind", "kerr"},
    {"state", "alpha_re", "2"},
    {"state", "alpha_im", "0"},
    {"state", "chi_bar", "0"},
    {"state", "nmax", "0"},
    {"state", "v1", "0.5"},
    {"state", "v2", "0.5"},
    {"state", "theta", "0"},
    {"state", "d1", "0"},
    {"state", "d2", "0"},
    {"state", "mode_labels", "800"},
    {"state", "chi_amplitude", "0"},
    {"state", "chi_period_fs", "2.695"},
    {"state", "chi_phase", "0"},
    {"state", "chi_list", "4,2,0,-4"},
    {"state", "fidelity_chi_list", "0,0.0025,0.005,0.0075,0.01,0.0125,0.015,0.0175,0.02"},

    {"detector", "electronic_noise_sd", "0"},
    {"detector", "hf_amplitude", "0"},
    {"detector", "hf_harmonic", "3"},
    {"detector", "lo_ratio", "40"},
    {"detector", "carrier_period_fs", "2.695"},
    {"detector", "tau_start", "0"},
    {"detector", "tau_step", "0.1684375"},
    {"detector", "n_tau", "64"},
    {"detector", "n_phi", "16"},
    {"detector", "n_shots", "1000"},
    {"detector", "frame_rate", "100"},

    {"tomography", "n_bins", "100"},
    {"tomography", "bin_extent", "0"},
    {"tomography", "grid_extent", "5"},
    {"tomography", "grid_points", "128"},
    {"tomography", "kc", "0"},
    {"tomography", "shot_noise", "0.5"},
    {"tomography", "write_grids", "true"},

    {"sigproc", "enabled", "true"},
    {"sigproc", "cutoff_factor", "1.2"},
    {"sigproc", "edge", "hard"},
    {"sigproc", "edge_width", "0.1"},
    {"sigproc", "segment", "256"},
    {"sigproc", "overlap", "0.5"},
    {"sigproc", "window", "hann"},
    {"sigproc", "band_low", "8"},
    {"sigproc", "band_high", "12"},
    {"sigproc", "rin_tau_index", "0"},
    {"sigproc", "rin_phi_index", "0"},
    {"sigproc", "rin_mode_index", "0"},

    {"output", "seed", "1"},
    {"output", "format", "binary"},
};

}  // namespace

PipelineConfig::PipelineConfig() {
  for (const auto& d : kDefaults) values_[d.section][d.key] = d.value;
}

PipelineConfig PipelineConfig::from_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("cannot read config file " + path);
  return parse(is, path);
}

PipelineConfig PipelineConfig::parse(std::istream& is, const std::string& origin) {
  PipelineConfig cfg;
  std::string line, section;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto where = origin + ":" + std::to_string(lineno);
    std::string_view t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    if (t.front() == '[') {
      if (t.back() != ']') throw ConfigError(where + ": malformed section header");
      section = std::string(trim(t.substr(1, t.size() - 2)));
      if (!cfg.values_.count(section)) throw ConfigError(where + ": unknown section [" + section + "]");
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string_view::npos) throw ConfigError(where + ": expected key = value");
    if (section.empty()) throw ConfigError(where + ": key outside any section");
    std::string_view value = trim(t.substr(eq + 1));
    if (const auto hash = value.find(" #"); hash != std::string_view::npos) value = trim(value.substr(0, hash));
    try {
      cfg.set(section, std::string(trim(t.substr(0, eq))), std::string(value));
    } catch (const ConfigError& e) {
      throw ConfigError(where + ": " + e.what());
    }
  }
  return cfg;
}

void PipelineConfig::set_assignment(const std::string& assignment) {
  const auto eq = assignment.find('=');
  const auto dot = assignment.find('.');
  if (eq == std::string::npos || dot == std::string::npos || dot > eq)
    throw ConfigError("expected section.key=value, got '" + assignment + "'");
  set(std::string(trim(std::string_view(assignment).substr(0, dot))),
      std::string(trim(std::string_view(assignment).substr(dot + 1, eq - dot - 1))),
      std::string(trim(std::string_view(assignment).substr(eq + 1))));
}

void PipelineConfig::set(const std::string& section, const std::string& key, const std::string& value) {
  auto s = values_.find(section);
  if (s == values_.end()) throw ConfigError("unknown section [" + section + "]");
  auto k = s->second.find(key);
  if (k == s->second.end()) throw ConfigError("unknown key '" + key + "' in [" + section + "]");
  k->second = value;
}

const std::string& PipelineConfig::get(const std::string& section, const std::string& key) const {
  auto s = values_.find(section);
  if (s == values_.end()) throw ConfigError("unknown section [" + section + "]");
  auto k = s->second.find(key);
  if (k == s->second.end()) throw ConfigError("unknown key '" + key + "' in [" + section + "]");
  return k->second;
}

namespace {

template <class F>
auto convert(const std::string& section, const std::string& key, const std::string& text, F f) {
  try {
    return f(text);
  } catch (const InvalidArgument& e) {
    throw ConfigError("[" + section + "] " + key + ": " + e.what());
  }
}

}  // namespace

double PipelineConfig::get_double(const std::string& section, const std::string& key) const {
  return convert(section, key, get(section, key), [](const std::string& t) { return parse_double(t); });
}

std::int64_t PipelineConfig::get_int(const std::string& section, const std::string& key) const {
  return convert(section, key, get(section, key), [](const std::string& t) { return parse_int(t); });
}

std::uint64_t PipelineConfig::get_u64(const std::string& section, const std::string& key) const {
  return convert(section, key, get(section, key), [](const std::string& t) { return parse_u64(t); });
}

bool PipelineConfig::get_bool(const std::string& section, const std::string& key) const {
  const auto& v = get(section, key);
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("[" + section + "] " + key + ": expected a boolean, got '" + v + "'");
}

std::vector<double> PipelineConfig::get_doubles(const std::string& section, const std::string& key) const {
  return convert(section, key, get(section, key), [](const std::string& t) { return parse_double_list(t); });
}

std::vector<int> PipelineConfig::get_ints(const std::string& section, const std::string& key) const {
  return convert(section, key, get(section, key), [](const std::string& t) {
    std::vector<int> out;
    for (const auto& tok : split(t, ',')) out.push_back(static_cast<int>(parse_int(trim(tok))));
    return out;
  });
}

void PipelineConfig::write(std::ostream& os) const {
  bool first = true;
  for (const auto& [section, keys] : values_) {
    if (!first) os << '\n';
    first = false;
    os << '[' << section << "]\n";
    for (const auto& [k, v] : keys) os << k << " = " << v << '\n';
  }
}

std::string PipelineConfig::to_string() const {
  std::ostringstream os;
  write(os);
  return os.str();
}

}  // namespace sqz
