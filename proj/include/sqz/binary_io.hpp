#pragma once

#include <istream>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace sqz {

/// Little-endian IEEE-754 doubles regardless of host order.
void write_f64_le(std::ostream& os, std::span<const double> values);
void read_f64_le(std::istream& is, std::span<double> values);

/// Ordered key = value text; '#' starts a comment line.
using Manifest = std::map<std::string, std::string>;

void write_manifest(std::ostream& os, const Manifest& m);
Manifest read_manifest(std::istream& is);
void save_manifest(const std::string& path, const Manifest& m);
Manifest load_manifest(const std::string& path);
const std::string& manifest_get(const Manifest& m, const std::string& key);

}  // namespace sqz
