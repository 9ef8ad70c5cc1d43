#include "sqz/binary_io.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "sqz/common.hpp"

namespace sqz {

namespace {

std::uint64_t to_le(std::uint64_t v) {
  if constexpr (std::endian::native == std::endian::little) {
    return v;
  } else {
    std::uint64_t r = 0;
    for (int i = 0; i < 8; ++i) r |= ((v >> (8 * i)) & 0xFFu) << (8 * (7 - i));
    return r;
  }
}

}  // namespace

void write_f64_le(std::ostream& os, std::span<const double> values) {
  std::vector<std::uint64_t> buf(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) buf[i] = to_le(std::bit_cast<std::uint64_t>(values[i]));
  os.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size() * 8));
  if (!os) throw IoError("binary write failed");
}

void read_f64_le(std::istream& is, std::span<double> values) {
  std::vector<std::uint64_t> buf(values.size());
  is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size() * 8));
  if (is.gcount() != static_cast<std::streamsize>(buf.size() * 8)) throw MissingData("binary record stream truncated");
  for (std::size_t i = 0; i < values.size(); ++i) values[i] = std::bit_cast<double>(to_le(buf[i]));
}

void write_manifest(std::ostream& os, const Manifest& m) {
  for (const auto& [k, v] : m) os << k << " = " << v << '\n';
}

Manifest read_manifest(std::istream& is) {
  Manifest m;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string_view::npos)
      throw InvalidArgument("manifest line " + std::to_string(lineno) + ": expected key = value");
    m[std::string(trim(t.substr(0, eq)))] = std::string(trim(t.substr(eq + 1)));
  }
  return m;
}

void save_manifest(const std::string& path, const Manifest& m) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write " + path);
  write_manifest(os, m);
}

Manifest load_manifest(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot read " + path);
  return read_manifest(is);
}

const std::string& manifest_get(const Manifest& m, const std::string& key) {
  auto it = m.find(key);
  if (it == m.end()) throw MissingData("manifest is missing key '" + key + "'");
  return it->second;
}

}  // namespace sqz
