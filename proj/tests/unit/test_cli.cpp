#include <doctest.h>

#include <chua/audio.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

#include "commands.hpp"
#include "config.hpp"

namespace fs = std::filesystem;
using namespace chua;
using namespace chua::lab;

namespace {

struct Run {
  int code{};
  std::string out;
  std::string err;
};

Run cli(std::initializer_list<std::string> args) {
  std::vector<std::string> storage{"chua_lab"};
  storage.insert(storage.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& s : storage) argv.push_back(s.c_str());
  std::ostringstream out;
  std::ostringstream err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

fs::path fresh_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("chua_cli_" + name);
  fs::remove_all(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::vector<std::string> lines(const fs::path& p) {
  std::istringstream in(slurp(p));
  std::vector<std::string> out;
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

double metric(const std::string& json, const std::string& key) {
  const auto pos = json.find('"' + key + "\":");
  REQUIRE(pos != std::string::npos);
  return std::stod(json.substr(pos + key.size() + 3));
}

bool same_tree(const fs::path& a, const fs::path& b) {
  std::vector<std::string> names;
  for (const auto& e : fs::directory_iterator(a)) names.push_back(e.path().filename().string());
  std::size_t count = 0;
  for ([[maybe_unused]] const auto& e : fs::directory_iterator(b)) ++count;
  if (count != names.size()) return false;
  return std::ranges::all_of(names, [&](const std::string& n) { return slurp(a / n) == slurp(b / n); });
}

}  // namespace

TEST_CASE("range, list and fraction parsing") {
  const auto r = parse_range("2000:1800:5");
  REQUIRE(r.size() == 41);
  CHECK(r.front() == 2000.0);
  CHECK(r.back() == 1800.0);
  for (std::size_t k = 1; k < r.size(); ++k) CHECK(r[k] < r[k - 1]);
  CHECK(parse_range("1:2:0.5") == std::vector<double>{1.0, 1.5, 2.0});
  CHECK_THROWS_AS((void)parse_range("1:2"), ValidationError);
  CHECK_THROWS_AS((void)parse_range("1:2:0"), ValidationError);
  CHECK(parse_list("2200, 1900,1870") == std::vector<double>{2200.0, 1900.0, 1870.0});
  CHECK_THROWS_AS((void)parse_list("2200,,1900"), ValidationError);
  CHECK(parse_fraction("5%") == doctest::Approx(0.05));
  CHECK(parse_fraction("0.05") == doctest::Approx(0.05));
  CHECK_THROWS_AS((void)parse_fraction("five"), ValidationError);
}

TEST_CASE("experiment config") {
  ExperimentConfig cfg;
  CHECK(cfg.number("r0") == 1800.0);
  CHECK(cfg.circuit() == nominal::circuit(1800.0));
  std::istringstream file("# comment\nr0 = 1700  # trailing\n\ncell_b.r_gnd=3300\n");
  cfg.load(file);
  CHECK(cfg.circuit().r0 == 1700.0);
  CHECK_THROWS_AS(cfg.set("no.such.key", "1"), ValidationError);
  std::istringstream bad("bogus = 3\n");
  CHECK_THROWS_AS(cfg.load(bad), ValidationError);
  std::istringstream malformed("r0 1700\n");
  CHECK_THROWS_AS(cfg.load(malformed), ValidationError);
  CHECK_THROWS_AS(cfg.set_assignment("r0"), ValidationError);

  cfg.set("r0", "0");
  CHECK_THROWS_AS((void)cfg.circuit(), ValidationError);
  cfg.set("r0", "abc");
  CHECK_THROWS_AS((void)cfg.number("r0"), ValidationError);

  ExperimentConfig echo_src;
  echo_src.set("sync.mismatch_c", "0.05");
  echo_src.set("sweep.r0", "2000:1990:5");
  ExperimentConfig copy;
  std::istringstream echoed(echo_src.echo());
  copy.load(echoed);
  CHECK(copy.echo() == echo_src.echo());
  CHECK(copy.sweep_values() == std::vector<double>{2000.0, 1995.0, 1990.0});
  CHECK(copy.sync().slave.c1 == doctest::Approx(1.05 * nominal::kC1));
}

TEST_CASE("config validates typed sections") {
  ExperimentConfig cfg;
  cfg.set("sound.rate", "2000000");
  CHECK_THROWS_AS((void)cfg.synthesis(), ValidationError);
  cfg = {};
  cfg.set("sound.mod", "square");
  CHECK_THROWS_AS((void)cfg.modulation(), ValidationError);
  cfg = {};
  cfg.set("sync.drive", "i_l");
  CHECK_THROWS_AS((void)cfg.sync(), ValidationError);
  cfg = {};
  cfg.set("record_every", "0");
  CHECK_THROWS_AS((void)cfg.simulation(), ValidationError);
  cfg = {};
  cfg.set("cell_a.r_gnd", "-3300");
  CHECK_THROWS_AS((void)cfg.circuit(), ValidationError);
}

TEST_CASE("mismatch flags") {
  ExperimentConfig cfg;
  apply_mismatch(cfg, {"c=5%"});
  CHECK(cfg.number("sync.mismatch_c") == doctest::Approx(0.05));
  apply_mismatch(cfg, {"r0=2%", "l=1%"});
  CHECK(cfg.number("sync.mismatch_r0") == doctest::Approx(0.02));
  apply_mismatch(cfg, {"none"});
  CHECK(cfg.number("sync.mismatch_c") == 0.0);
  CHECK_THROWS_AS(apply_mismatch(cfg, {"q=5%"}), ValidationError);
  CHECK_THROWS_AS(apply_mismatch(cfg, {"c"}), ValidationError);
}

TEST_CASE("simulate writes trajectory and phase CSVs") {
  const auto dir = fresh_dir("simulate");
  const auto run = cli({"simulate", "--out", dir.string(), "--t-end", "0.005"});
  REQUIRE(run.code == 0);
  CHECK(fs::exists(dir / "trajectory.csv"));
  CHECK(fs::exists(dir / "phase.csv"));
  CHECK(fs::exists(dir / "run.cfg"));
  CHECK(run.out.find("r0 = 1800") != std::string::npos);
  CHECK(run.out.find("\"command\": \"simulate\"") != std::string::npos);
  const auto rows = lines(dir / "trajectory.csv");
  CHECK(rows.front() == "t,v_c1,v_c2,i_l");
  CHECK(rows.size() == 5002);
  CHECK(lines(dir / "phase.csv").front() == "v_c1,v_c2");
}

TEST_CASE("simulate in the equilibrium regime ends flat") {
  const auto dir = fresh_dir("simulate_eq");
  REQUIRE(cli({"--out", dir.string(), "--r0", "2200", "--t-end", "0.05", "simulate"}).code == 0);
  const auto rows = lines(dir / "trajectory.csv");
  double lo = 1e9, hi = -1e9;
  for (std::size_t k = rows.size() - 100; k < rows.size(); ++k) {
    const auto comma = rows[k].find(',');
    const double v = std::stod(rows[k].substr(comma + 1));
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  CHECK(hi - lo < 1e-3);
}

TEST_CASE("validation failures exit 1 and leave no files") {
  const auto dir = fresh_dir("invalid");
  auto run = cli({"simulate", "--out", dir.string(), "--r0", "0"});
  CHECK(run.code == 1);
  CHECK_FALSE(fs::exists(dir));
  CHECK(run.err.find("invalid") != std::string::npos);

  CHECK(cli({"simulate", "--out", dir.string(), "--set", "nonsense=1"}).code == 1);
  CHECK(cli({"sound", "--out", dir.string(), "--rate", "2000000"}).code == 1);
  CHECK(cli({"sound", "--out", dir.string(), "--mod", "triangle"}).code == 1);
  CHECK(cli({"sync", "--out", dir.string(), "--mismatch", "x=5%"}).code == 1);
  CHECK(cli({"bogus"}).code == 1);
  CHECK(cli({}).code == 1);
  CHECK_FALSE(fs::exists(dir));
}

TEST_CASE("numerical and I/O failures have their own exit codes") {
  const auto dir = fresh_dir("numerical");
  CHECK(cli({"simulate", "--out", dir.string(), "--dt", "1e-3", "--record-every", "1", "--t-end", "0.1"}).code == 2);
  CHECK_FALSE(fs::exists(dir));
  CHECK(cli({"simulate", "--config", "/nonexistent/file.cfg"}).code == 3);
  CHECK(cli({"simulate", "--out", "/proc/chua_cannot_write", "--t-end", "0.001"}).code == 3);
}

TEST_CASE("sweep of a single value writes one row") {
  const auto dir = fresh_dir("sweep_one");
  const auto run = cli({"sweep", "--out", dir.string(), "--r0-list", "1700"});
  REQUIRE(run.code == 0);
  const auto rows = lines(dir / "sweep.csv");
  REQUIRE(rows.size() == 2);
  CHECK(rows[0] == "r0,regime,n,lambda1,maxima...");
  CHECK(rows[1].rfind("1700,DoubleScroll,,", 0) == 0);
  CHECK(lines(dir / "bifurcation.csv").front() == "r0,maximum_v_c1");
}

TEST_CASE("sweep over a range") {
  const auto dir = fresh_dir("sweep_range");
  const auto run = cli({"sweep", "--out", dir.string(), "--range", "2000:1800:5", "--set", "lyapunov.total=0.05",
                        "--set", "lyapunov.transient=0.02"});
  REQUIRE(run.code == 0);
  const auto rows = lines(dir / "sweep.csv");
  REQUIRE(rows.size() == 42);
  double previous = 1e9;
  for (std::size_t k = 1; k < rows.size(); ++k) {
    const double r0 = std::stod(rows[k]);
    CHECK(r0 < previous);
    previous = r0;
  }
}

TEST_CASE("sweep with every point failing reports a numerical failure") {
  const auto dir = fresh_dir("sweep_fail");
  const auto run = cli({"sweep", "--out", dir.string(), "--r0-list", "1800,1700", "--dt", "1e-3",
                        "--set", "lyapunov.tau=0.002", "--set", "lyapunov.total=0.05", "--set", "lyapunov.transient=0.01"});
  CHECK(run.code == 2);
  CHECK(lines(dir / "sweep.csv").size() == 3);
}

TEST_CASE("sync command") {
  const auto dir = fresh_dir("sync");
  auto run = cli({"sync", "--out", dir.string(), "--mismatch", "none"});
  REQUIRE(run.code == 0);
  CHECK(metric(run.out, "ratio_post") < 1e-3);
  CHECK(lines(dir / "sync.csv").front() == "t,v_y_master,v_y_slave,difference");

  run = cli({"sync", "--out", dir.string(), "--mismatch", "c=5%"});
  REQUIRE(run.code == 0);
  CHECK(metric(run.out, "ratio_post") < 0.1);

  run = cli({"sync", "--out", dir.string(), "--coupling", "resistive", "--r-c", "100", "--t-end", "0.15"});
  CHECK(run.code == 0);
}

TEST_CASE("comm command") {
  const auto dir = fresh_dir("comm");
  auto run = cli({"comm", "--out", dir.string(), "--tone-ratio", "0"});
  REQUIRE(run.code == 0);
  CHECK(metric(run.out, "recovered_ratio") < 1e-3);

  run = cli({"comm", "--out", dir.string()});
  REQUIRE(run.code == 0);
  CHECK(metric(run.out, "correlation") > 0.9);
  CHECK(lines(dir / "recovered.csv").front() == "t,original,recovered");
  CHECK(lines(dir / "channel.csv").front() == "t,value");

  run = cli({"comm", "--out", dir.string(), "--mismatch", "r0=5%"});
  REQUIRE(run.code == 0);
  CHECK(metric(run.out, "correlation") < 0.5);

  run = cli({"comm", "--out", dir.string(), "--tone-ratio", "0.2"});
  CHECK(run.code == 0);
  CHECK(run.err.find("warning") != std::string::npos);

  // A message supplied as a CSV file.
  const auto msg = dir / "message.csv";
  {
    std::ofstream m(msg);
    m << "t,value\n0,0\n0.1,0.01\n0.2,0\n";
  }
  run = cli({"comm", "--out", (dir / "file").string(), "--message", msg.string()});
  CHECK(run.code == 0);
  CHECK(cli({"comm", "--out", (dir / "missing").string(), "--message", (dir / "nope.csv").string()}).code == 3);
}

TEST_CASE("sound command") {
  const auto dir = fresh_dir("sound");
  auto run = cli({"sound", "--out", dir.string(), "--mod", "staircase", "--freq", "100", "--duration", "0.1",
                  "--csv"});
  REQUIRE(run.code == 0);
  std::ifstream wav(dir / "sound.wav", std::ios::binary);
  const auto clip = read_wav(wav);
  CHECK(clip.rate == 44100.0);
  CHECK(clip.samples.size() == 3969);
  CHECK(fs::exists(dir / "sound.csv"));

  run = cli({"sound", "--out", dir.string(), "--mod", "sine", "--freq", "100", "--duration", "0.1", "--wav",
             "sine.wav"});
  REQUIRE(run.code == 0);
  CHECK(fs::file_size(dir / "sine.wav") == 44 + 2 * 3969);

  const auto silent = fresh_dir("sound_silent");
  run = cli({"sound", "--out", silent.string(), "--r0", "2200", "--mod", "sine", "--center", "2200", "--depth", "0",
             "--duration", "0.2"});
  CHECK(run.code == 2);
  CHECK_FALSE(fs::exists(silent));
}

TEST_CASE("runs are deterministic and reproducible from the config echo") {
  const auto a = fresh_dir("det_a");
  const auto b = fresh_dir("det_b");
  const auto c = fresh_dir("det_c");
  REQUIRE(cli({"simulate", "--out", a.string(), "--r0", "1750", "--t-end", "0.01", "--set", "init.v_c1=0.2"}).code == 0);
  REQUIRE(cli({"simulate", "--out", b.string(), "--r0", "1750", "--t-end", "0.01", "--set", "init.v_c1=0.2"}).code == 0);
  CHECK(same_tree(a, b));
  REQUIRE(cli({"simulate", "--out", c.string(), "--config", (a / "run.cfg").string()}).code == 0);
  CHECK(same_tree(a, c));

  const auto s1 = fresh_dir("det_s1");
  const auto s2 = fresh_dir("det_s2");
  REQUIRE(cli({"sound", "--out", s1.string(), "--duration", "0.05"}).code == 0);
  REQUIRE(cli({"sound", "--out", s2.string(), "--config", (s1 / "run.cfg").string()}).code == 0);
  CHECK(same_tree(s1, s2));
}

TEST_CASE("help exits cleanly") {
  const auto run = cli({"--help"});
  CHECK(run.code == 0);
  CHECK(run.out.find("simulate") != std::string::npos);
}
