#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include <unistd.h>

#include "sqz/binary_io.hpp"
#include "sqz/common.hpp"
#include "sqz/config.hpp"
#include "sqz/dataset.hpp"
#include "sqz/wigner_grid.hpp"

using namespace sqz;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() : path(fs::temp_directory_path() / ("sqz_io_" + std::to_string(::getpid()))) { fs::create_directories(path); }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& name) const { return (path / name).string(); }
};

HomodyneDataset small_dataset() {
  HomodyneDataset ds;
  ds.tau_grid = {0.0, 0.25, 0.5};
  for (int f = 0; f < 8; ++f) ds.phi_grid.push_back(kPi * f / 8.0);
  ds.mode_labels = {790.0, 810.0};
  ds.n_shots = 3;
  ds.lo_calibration = std::sqrt(40.0);
  ds.allocate();
  for (std::size_t i = 0; i < ds.samples.size(); ++i) ds.samples[i] = std::sin(0.37 * i) * 1e3 + 1.0 / (i + 3.0);
  ds.extra["synthetic"] = "true";
  ds.extra["note"] = "round trip";
  return ds;
}

}  // namespace

TEST_CASE("datasets round-trip exactly in both encodings") {
  TempDir dir;
  const auto ds = small_dataset();
  for (auto fmt : {DataFormat::binary, DataFormat::text}) {
    CAPTURE(to_string(fmt));
    const auto prefix = dir / ("ds_" + to_string(fmt));
    const auto written = save_dataset(prefix, ds, fmt);
    CHECK(written.size() == 2);
    const auto back = load_dataset(prefix);
    CHECK(back.samples == ds.samples);
    CHECK(back.tau_grid == ds.tau_grid);
    CHECK(back.phi_grid == ds.phi_grid);
    CHECK(back.mode_labels == ds.mode_labels);
    CHECK(back.n_shots == ds.n_shots);
    CHECK(back.lo_calibration == ds.lo_calibration);
    CHECK(back.extra == ds.extra);
  }
  CHECK(parse_data_format("text") == DataFormat::text);
  CHECK_THROWS_AS(parse_data_format("hdf5"), ConfigError);
}

TEST_CASE("damaged dataset files are rejected") {
  TempDir dir;
  const auto ds = small_dataset();
  save_dataset(dir / "b", ds, DataFormat::binary);
  {
    std::ofstream os(dir / "b.bin", std::ios::binary | std::ios::app);
    os.put('x');
  }
  CHECK_THROWS_AS(load_dataset(dir / "b"), InvalidArgument);

  save_dataset(dir / "t", ds, DataFormat::text);
  std::ifstream is(dir / "t.txt");
  std::string all((std::istreambuf_iterator<char>(is)), {});
  is.close();
  const auto last = all.rfind('\n', all.size() - 2);
  std::ofstream(dir / "t.txt") << all.substr(0, last + 1);
  CHECK_THROWS_AS(load_dataset(dir / "t"), MissingData);

  CHECK_THROWS_AS(load_dataset(dir / "absent"), IoError);
}

TEST_CASE("dataset invariants") {
  auto ds = small_dataset();
  CHECK_NOTHROW(ds.validate());
  auto few = ds;
  few.phi_grid.resize(7);
  few.allocate();
  CHECK_THROWS_AS(few.validate(), InvalidArgument);
  auto narrow = ds;
  for (auto& p : narrow.phi_grid) p *= 0.5;
  CHECK_THROWS_AS(narrow.validate(), InvalidArgument);
  auto bad = ds;
  bad.samples[4] = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(bad.validate(), InvalidArgument);
  auto one = ds;
  one.n_shots = 1;
  one.allocate();
  CHECK_THROWS_AS(one.validate(), InvalidArgument);
  CHECK(ds.index(1, 2, 1, 2) == ((1 * 8 + 2) * 2 + 1) * 3 + 2);
}

TEST_CASE("config: defaults, overrides and rejection of unknown keys") {
  PipelineConfig c;
  CHECK(c.get_double("state", "alpha_re") == 2.0);
  CHECK(c.get_u64("output", "seed") == 1);
  std::istringstream text("# comment\n[twa]\nnz = 64   # inline\n[state]\nchi_list = 1, 2.5,-3\n");
  auto p = PipelineConfig::parse(text);
  CHECK(p.get_int("twa", "nz") == 64);
  CHECK(p.get_doubles("state", "chi_list") == std::vector<double>{1.0, 2.5, -3.0});
  p.set_assignment("tomography.write_grids=false");
  CHECK_FALSE(p.get_bool("tomography", "write_grids"));

  std::istringstream bad_key("[twa]\nnzz = 64\n");
  CHECK_THROWS_AS(PipelineConfig::parse(bad_key), ConfigError);
  std::istringstream bad_section("[nope]\n");
  CHECK_THROWS_AS(PipelineConfig::parse(bad_section), ConfigError);
  std::istringstream no_eq("[twa]\nnz 64\n");
  CHECK_THROWS_AS(PipelineConfig::parse(no_eq), ConfigError);
  CHECK_THROWS_AS(c.set_assignment("twa.nz"), ConfigError);
  c.set("twa", "nz", "abc");
  CHECK_THROWS_AS(c.get_int("twa", "nz"), ConfigError);

  // The written document parses back to the same values.
  std::istringstream again(p.to_string());
  CHECK(PipelineConfig::parse(again).to_string() == p.to_string());
}

TEST_CASE("Wigner grid text round trip") {
  WignerGrid w{GridSpec{-3.0, 3.0, -2.0, 4.0, 7, 5}, Eigen::MatrixXd(7, 5)};
  for (int i = 0; i < 7; ++i)
    for (int j = 0; j < 5; ++j) w.values(i, j) = std::exp(-0.1 * i * j) / 3.0 - 1e-300 * j;
  std::stringstream ss;
  write_wigner(ss, w);
  const auto back = read_wigner(ss);
  CHECK(back.grid == w.grid);
  CHECK(back.values == w.values);
  std::stringstream bad("# wigner 2 2 -1 1 -1 1\n1 2\n");
  CHECK_THROWS(read_wigner(bad));
}

TEST_CASE("manifest and binary helpers") {
  Manifest m{{"a", "1"}, {"b key", "x = y"}};
  std::stringstream ss;
  write_manifest(ss, m);
  CHECK(read_manifest(ss) == m);
  CHECK_THROWS(manifest_get(m, "missing"));

  const std::vector<double> v{0.0, -1.5, 1e-310, std::numeric_limits<double>::max()};
  std::stringstream bs;
  write_f64_le(bs, v);
  CHECK(bs.str().size() == 32);
  CHECK(static_cast<unsigned char>(bs.str()[15]) == 0xbf);  // -1.5, most significant byte last
  std::vector<double> back(4);
  read_f64_le(bs, back);
  CHECK(back == v);
}

TEST_CASE("number formatting round-trips") {
  for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, 0.0}) CHECK(parse_double(format_double(v)) == v);
  CHECK(format_double(0.5) == "5.0000000000000000e-01");
  CHECK_THROWS_AS(parse_double("1.0x"), InvalidArgument);
  CHECK(parse_int("-42") == -42);
  CHECK(parse_u64("18446744073709551615") == 18446744073709551615ull);
  CHECK(parse_double_list("1, 2,3") == std::vector<double>{1, 2, 3});
}

TEST_CASE("SHA-256 digests") {
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  TempDir dir;
  std::ofstream(dir / "f") << "abc";
  CHECK(sha256_file(dir / "f") == sha256_hex("abc"));
}

TEST_CASE("random streams are keyed and reproducible") {
  auto a = make_engine(7, {1, 2});
  auto b = make_engine(7, {1, 2});
  auto c = make_engine(7, {2, 1});
  const auto x = a();
  CHECK(x == b());
  CHECK(x != c());
  CHECK(stream_seed(7, {1}) != stream_seed(8, {1}));
}
