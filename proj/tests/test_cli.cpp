#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <unistd.h>

#include "sqz/binary_io.hpp"
#include "sqz/commands.hpp"
#include "sqz/common.hpp"

using namespace sqz;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag)
      : path(fs::temp_directory_path() / ("sqz_cli_" + tag + "_" + std::to_string(::getpid()))) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& name) const { return (path / name).string(); }
};

// Rows of a comma-separated table with a header line.
std::vector<std::map<std::string, std::string>> read_csv(const std::string& path) {
  std::ifstream is(path);
  REQUIRE(is);
  std::string line;
  std::getline(is, line);
  const auto header = split(line, ',');
  std::vector<std::map<std::string, std::string>> rows;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto cols = split(line, ',');
    std::map<std::string, std::string> row;
    for (std::size_t i = 0; i < header.size() && i < cols.size(); ++i) row[header[i]] = cols[i];
    rows.push_back(row);
  }
  return rows;
}

double num(const std::map<std::string, std::string>& row, const std::string& key) { return parse_double(row.at(key)); }

cli::RunOptions options(const std::string& out, std::initializer_list<const char*> overrides) {
  cli::RunOptions o;
  o.out_dir = out;
  for (const char* a : overrides) o.config.set_assignment(a);
  return o;
}

// output.* entries of a run manifest.
std::map<std::string, std::string> output_digests(const std::string& dir) {
  std::map<std::string, std::string> d;
  for (const auto& [k, v] : load_manifest(dir + "/run.manifest"))
    if (k.rfind("output.", 0) == 0 || k == "config_sha256") d[k] = v;
  return d;
}

int run_tool(const std::string& args) {
  const std::string cmd = std::string(SQZ_TOOL) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

const std::initializer_list<const char*> kSmallAcquisition{
    "detector.n_tau=16", "detector.n_phi=8", "detector.n_shots=300", "tomography.grid_points=41",
    "tomography.n_bins=40"};

}  // namespace

TEST_CASE("kerr: coherent point and negativity pattern") {
  TempDir dir("kerr");
  auto o = options(dir / "a", {"state.chi_list=0", "state.fidelity_chi_list=0", "tomography.grid_points=41"});
  cli::run_command("kerr", o);
  const auto rows = read_csv(dir / "a/variances.csv");
  REQUIRE(rows.size() == 1);
  CHECK(std::abs(num(rows[0], "var_x") - 0.5) < 1e-10);
  CHECK(std::abs(num(rows[0], "var_p") - 0.5) < 1e-10);
  CHECK(std::abs(num(rows[0], "var_x_fock") - 0.5) < 1e-10);
  const auto fid = read_csv(dir / "a/fidelity.csv");
  CHECK(num(fid[0], "fidelity") == doctest::Approx(1.0).epsilon(1e-3));

  auto b = options(dir / "b", {"state.chi_list=4,2,0,-4", "state.fidelity_chi_list=0", "tomography.grid_points=61"});
  cli::run_command("kerr", b);
  const auto neg = read_csv(dir / "b/variances.csv");
  REQUIRE(neg.size() == 4);
  CHECK(num(neg[0], "wigner_min") < 0.0);
  CHECK(num(neg[1], "wigner_min") < 0.0);
  CHECK(num(neg[2], "wigner_min") >= -1e-9);
  CHECK(num(neg[3], "wigner_min") < 0.0);
  for (const auto& r : neg) CHECK(num(r, "normalization") == doctest::Approx(1.0).epsilon(1e-3));
  CHECK(fs::exists(dir / "b/wigner/kerr_3.txt"));
}

TEST_CASE("reruns are byte-identical") {
  TempDir dir("rerun");
  for (const char* cmd : {"kerr", "synth"}) {
    CAPTURE(cmd);
    std::vector<std::map<std::string, std::string>> digests;
    for (int threads : {1, 3}) {
      set_thread_count(static_cast<std::size_t>(threads));
      const auto out = dir / (std::string(cmd) + std::to_string(threads));
      auto o = options(out, {"state.chi_list=0.5", "state.fidelity_chi_list=0", "tomography.grid_points=31",
                             "detector.n_tau=8", "detector.n_phi=8", "detector.n_shots=50"});
      cli::run_command(cmd, o);
      digests.push_back(output_digests(out));
    }
    set_thread_count(1);
    CHECK(digests[0] == digests[1]);
    CHECK(digests[0].size() > 1);
  }
}

TEST_CASE("run manifest records inputs, outputs and status") {
  TempDir dir("manifest");
  auto s = options(dir / "s", kSmallAcquisition);
  const auto res = cli::run_command("synth", s);
  const auto m = load_manifest(dir / "s/run.manifest");
  CHECK(m.at("status") == "ok");
  CHECK(m.at("command") == "synth");
  CHECK(m.at("seed") == "1");
  CHECK(m.count("output.dataset.bin") == 1);
  CHECK(m.at("output.dataset.bin") == sha256_file(dir / "s/dataset.bin"));
  CHECK(std::find(res.outputs.begin(), res.outputs.end(), "dataset.manifest") != res.outputs.end());
  const auto ds_manifest = load_manifest(dir / "s/dataset.manifest");
  CHECK(ds_manifest.at("synthetic") == "true");

  auto f = options(dir / "f", kSmallAcquisition);
  f.inputs = {dir / "s/dataset"};
  cli::run_command("filter", f);
  const auto fm = load_manifest(dir / "f/run.manifest");
  CHECK(fm.at("input.0") == dir / "s/dataset");
  CHECK(fm.at("input.0.sha256").size() == 64);
  CHECK(load_manifest(dir / "f/filtered.manifest").at("filtered") == "true");

  auto bad = options(dir / "bad", kSmallAcquisition);
  bad.inputs = {dir / "nowhere"};
  CHECK_THROWS(cli::run_command("filter", bad));
  CHECK(load_manifest(dir / "bad/run.manifest").at("status") == "failed");
}

TEST_CASE("chained commands reproduce the pipeline") {
  TempDir dir("chain");
  const std::initializer_list<const char*> cfg{"detector.n_tau=16", "detector.n_phi=8", "detector.n_shots=300",
                                               "tomography.grid_points=41", "tomography.n_bins=40",
                                               "detector.hf_amplitude=0.3"};
  cli::run_command("pipeline", options(dir / "p", cfg));

  cli::run_command("synth", options(dir / "s", cfg));
  auto f = options(dir / "f", cfg);
  f.inputs = {dir / "s/dataset"};
  cli::run_command("filter", f);
  auto r = options(dir / "r", cfg);
  r.inputs = {dir / "f/filtered"};
  cli::run_command("reconstruct", r);
  auto fit = options(dir / "fit", cfg);
  for (const auto& row : read_csv(dir / "r/reconstruct.csv")) fit.inputs.push_back(dir / ("r/" + row.at("grid")));
  cli::run_command("fit", fit);
  auto c = options(dir / "c", cfg);
  c.inputs = {dir / "f/filtered"};
  cli::run_command("corr", c);
  auto rin = options(dir / "rin", cfg);
  rin.inputs = {dir / "s/dataset", dir / "f/filtered"};
  cli::run_command("rin", rin);

  CHECK(sha256_file(dir / "s/dataset.bin") == sha256_file(dir / "p/dataset.bin"));
  CHECK(sha256_file(dir / "f/filtered.bin") == sha256_file(dir / "p/filtered.bin"));
  CHECK(sha256_file(dir / "c/corr_summary.csv") == sha256_file(dir / "p/corr_summary.csv"));
  CHECK(sha256_file(dir / "rin/rin_report.csv") == sha256_file(dir / "p/rin_report.csv"));
  const auto a = read_csv(dir / "p/fits.csv");
  const auto b = read_csv(dir / "fit/fits.csv");
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].at("tau_idx") == b[i].at("tau_idx"));
    CHECK(a[i].at("v1") == b[i].at("v1"));
    CHECK(a[i].at("theta") == b[i].at("theta"));
  }
}

TEST_CASE("coherent-state pipeline recovers the shot-noise variance") {
  TempDir dir("coh");
  cli::run_command("pipeline", options(dir / "p", {"state.kind=gaussian", "state.v1=0.5", "state.v2=0.5",
                                                   "state.d1=1.5", "detector.n_tau=4", "detector.n_phi=16",
                                                   "detector.n_shots=3000", "sigproc.enabled=false",
                                                   "tomography.grid_points=61"}));
  const auto rows = read_csv(dir / "p/fits.csv");
  REQUIRE(rows.size() == 4);
  for (const auto& r : rows) {
    CHECK(num(r, "v1") == doctest::Approx(0.5).epsilon(0.05));
    CHECK(num(r, "v2") == doctest::Approx(0.5).epsilon(0.05));
    CHECK(r.at("below_uncertainty") == "0");
  }
  const auto rin = read_csv(dir / "p/rin_report.csv");
  CHECK(rin.size() == 1);
  CHECK(rin[0].at("stream") == "raw");
}

TEST_CASE("twa without nonlinearity stays at vacuum noise") {
  TempDir dir("twa");
  cli::run_command("twa", options(dir / "t", {"twa.nz=16", "twa.n_traj=2000", "twa.chi_e=0", "twa.dt=0.01",
                                              "twa.t_final=0.1", "twa.snapshots=3", "twa.modes=-1,0,1"}));
  const auto rows = read_csv(dir / "t/twa_variances.csv");
  REQUIRE(rows.size() == 3);
  const double tol = 4.0 * 0.5 * std::sqrt(2.0 / 2000.0);
  for (const auto& r : rows) {
    CHECK(std::abs(num(r, "var_x_twa") - 0.5) < tol);
    CHECK(std::abs(num(r, "var_p_twa") - 0.5) < tol);
    CHECK(num(r, "var_x_analytic") == doctest::Approx(0.5));
  }
  CHECK(read_csv(dir / "t/eigenvalues.csv").size() == 3);

  auto c = options(dir / "c", {"twa.modes=-1,0,1"});
  c.inputs = {dir / "t/ensemble"};
  cli::run_command("corr", c);
  CHECK(sha256_file(dir / "c/coherency.txt") == sha256_file(dir / "t/coherency.txt"));
}

TEST_CASE("exit codes") {
  TempDir dir("exit");
  CHECK(run_tool("--out " + (dir / "ok") + " --set state.chi_list=0 --set state.fidelity_chi_list=0 "
                 "--set tomography.grid_points=21 kerr") == 0);
  CHECK(run_tool("--out " + (dir / "x") + " --set state.bogus=1 kerr") == 2);
  CHECK(run_tool("--out " + (dir / "x") + " --bogus kerr") == 2);
  CHECK(run_tool("--out " + (dir / "x") + " --format csv kerr") == 2);
  CHECK(run_tool("--out " + (dir / "x") + " filter") == 2);
  CHECK(run_tool("--out " + (dir / "x") + " filter " + (dir / "absent")) == 5);
  // Seven phases cannot be inverted.
  CHECK(run_tool("--out " + (dir / "x") + " --set detector.n_phi=7 --set detector.n_tau=4 --set detector.n_shots=10 "
                 "--set sigproc.enabled=false pipeline") == 3);
  CHECK(run_tool("--out " + (dir / "x") + " --set state.kind=gaussian --set state.v1=0.2 --set state.v2=0.2 synth") == 3);
  {
    std::ofstream cfg(dir / "bad.conf");
    cfg << "[twa]\nnz = 100\n";
  }
  CHECK(run_tool("--out " + (dir / "x") + " --config " + (dir / "bad.conf") + " twa") == 3);

  CHECK(cli::exit_code_for(ConfigError("x")) == 2);
  CHECK(cli::exit_code_for(MissingData("x")) == 3);
  CHECK(cli::exit_code_for(NumericalFailure("x")) == 4);
  CHECK(cli::exit_code_for(IoError("x")) == 5);
  CHECK(cli::exit_code_for(InternalDefect("x")) == 6);
  CHECK(cli::exit_code_for(std::runtime_error("x")) == 1);
}

TEST_CASE("seed and format flags") {
  TempDir dir("flags");
  const std::string common = " --set detector.n_tau=4 --set detector.n_phi=8 --set detector.n_shots=20 synth";
  CHECK(run_tool("--out " + (dir / "a") + " --seed 5 --format text" + common) == 0);
  CHECK(fs::exists(dir / "a/dataset.txt"));
  CHECK(load_manifest(dir / "a/run.manifest").at("seed") == "5");
  CHECK(run_tool("--out " + (dir / "b") + " --seed 6 --threads 2" + common) == 0);
  CHECK(fs::exists(dir / "b/dataset.bin"));
  CHECK(run_tool("--out " + (dir / "c") + " --seed 5 --threads 2 --format text" + common) == 0);
  CHECK(sha256_file(dir / "a/dataset.txt") == sha256_file(dir / "c/dataset.txt"));
}
