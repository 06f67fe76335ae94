#include "config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "chua/format.hpp"

namespace chua::lab {

namespace {

struct Entry {
  const char* key;
  const char* value;
};

// Canonical key order and defaults (SI units).
constexpr Entry kDefaults[] = {
    {"l", "0.018"},
    {"c1", "1e-08"},
    {"c2", "1e-07"},
    {"r0", "1800"},
    {"e_sat", "8.3"},
    {"cell_a.r_in", "220"},
    {"cell_a.r_fb", "220"},
    {"cell_a.r_gnd", "2200"},
    {"cell_b.r_in", "22000"},
    {"cell_b.r_fb", "22000"},
    {"cell_b.r_gnd", "3300"},
    {"dt", "1e-07"},
    {"record_every", "10"},
    {"t_end", "0.05"},
    {"init.v_c1", "0.1"},
    {"init.v_c2", "0"},
    {"init.i_l", "0"},
    {"sweep.r0", "2200,1900,1870,1850,1800,1700,1500,1000"},
    {"sweep.refine", "0"},
    {"sweep.jobs", "0"},
    {"lyapunov.d0", "1e-08"},
    {"lyapunov.tau", "0.0001"},
    {"lyapunov.total", "0.4"},
    {"lyapunov.transient", "0.1"},
    {"classifier.lambda_chaos_min", "200"},
    {"classifier.lambda_periodic_max", "50"},
    {"classifier.cluster_tolerance", "0.01"},
    {"classifier.max_period", "16"},
    {"classifier.equilibrium_tolerance", "1"},
    {"classifier.visit_radius", "0.5"},
    {"classifier.min_visits", "5"},
    {"sync.t_sync", "0.1"},
    {"sync.t_end", "0.2"},
    {"sync.settle", "0.02"},
    {"sync.drive", "v_c1"},
    {"sync.coupling", "substitution"},
    {"sync.r_c", "100"},
    {"sync.mismatch_r0", "0"},
    {"sync.mismatch_c", "0"},
    {"sync.mismatch_l", "0"},
    {"slave_init.v_c1", "-0.1"},
    {"slave_init.v_c2", "0.05"},
    {"slave_init.i_l", "0"},
    {"comm.message", ""},
    {"comm.tone_freq", "500"},
    {"comm.tone_ratio", "0.02"},
    {"comm.mask_ratio", "0.05"},
    {"comm.r_inject", "5000"},
    {"sound.mod", "staircase"},
    {"sound.levels", "2000,1800,1600"},
    {"sound.freq", "100"},
    {"sound.center", "1850"},
    {"sound.depth", "150"},
    {"sound.duration", "1"},
    {"sound.rate", "44100"},
    {"sound.node", "v_c1"},
    {"sound.wav", "sound.wav"},
    {"sound.csv", "false"},
};

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

double to_number(std::string_view key, std::string_view text) {
  try {
    return parse_number(text);
  } catch (const DomainError&) {
    throw ValidationError(std::string(key) + ": expected a number, got '" + std::string(text) + "'");
  }
}

}  // namespace

ExperimentConfig::ExperimentConfig() {
  for (const auto& e : kDefaults) values_.emplace(e.key, e.value);
}

void ExperimentConfig::set(std::string_view key, std::string value) {
  auto it = values_.find(key);
  if (it == values_.end()) throw ValidationError("unknown config key '" + std::string(key) + "'");
  it->second = std::string(trim(value));
}

void ExperimentConfig::set_assignment(std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos) {
    throw ValidationError("expected key=value, got '" + std::string(assignment) + "'");
  }
  set(trim(assignment.substr(0, eq)), std::string(trim(assignment.substr(eq + 1))));
}

void ExperimentConfig::load(std::istream& in, std::string_view origin) {
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view view = line;
    if (const auto hash = view.find('#'); hash != std::string_view::npos) view = view.substr(0, hash);
    view = trim(view);
    if (view.empty()) continue;
    try {
      set_assignment(view);
    } catch (const ValidationError& e) {
      throw ValidationError(std::string(origin) + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
}

void ExperimentConfig::load_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config " + path.string());
  load(in, path.string());
}

const std::string& ExperimentConfig::text(std::string_view key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw ValidationError("unknown config key '" + std::string(key) + "'");
  return it->second;
}

double ExperimentConfig::number(std::string_view key) const { return to_number(key, text(key)); }

int ExperimentConfig::integer(std::string_view key) const {
  const double v = number(key);
  if (v != std::floor(v) || std::abs(v) > 1e9) throw ValidationError(std::string(key) + ": expected an integer");
  return static_cast<int>(v);
}

bool ExperimentConfig::flag(std::string_view key) const {
  const auto& v = text(key);
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no" || v.empty()) return false;
  throw ValidationError(std::string(key) + ": expected true/false");
}

std::vector<double> ExperimentConfig::numbers(std::string_view key) const {
  try {
    return parse_list(text(key));
  } catch (const ValidationError& e) {
    throw ValidationError(std::string(key) + ": " + e.what());
  }
}

void ExperimentConfig::echo(std::ostream& out) const {
  for (const auto& e : kDefaults) out << e.key << " = " << values_.find(e.key)->second << '\n';
}

std::string ExperimentConfig::echo() const {
  std::ostringstream out;
  echo(out);
  return out.str();
}

CircuitParams ExperimentConfig::circuit() const { return circuit(number("r0")); }

CircuitParams ExperimentConfig::circuit(double r0) const {
  try {
    const double e_sat = number("e_sat");
    const CellParams a{number("cell_a.r_in"), number("cell_a.r_fb"), number("cell_a.r_gnd"), e_sat};
    const CellParams b{number("cell_b.r_in"), number("cell_b.r_fb"), number("cell_b.r_gnd"), e_sat};
    CircuitParams p{number("l"), number("c1"), number("c2"), r0, build_diode(a, b)};
    p.validate();
    return p;
  } catch (const DomainError& e) {
    throw ValidationError(e.what());
  } catch (const DegenerateModelError& e) {
    throw ValidationError(e.what());
  }
}

SimulationOptions ExperimentConfig::simulation() const {
  SimulationOptions o{number("dt"), integer("record_every"), 0.0};
  if (!(o.dt > 0.0)) throw ValidationError("dt must be > 0");
  if (o.record_every < 1) throw ValidationError("record_every must be >= 1");
  return o;
}

State ExperimentConfig::init() const {
  return {number("init.v_c1"), number("init.v_c2"), number("init.i_l")};
}

ClassifierConfig ExperimentConfig::classifier() const {
  ClassifierConfig c;
  c.lyapunov = {number("lyapunov.d0"), number("lyapunov.tau"), number("lyapunov.total"),
                number("lyapunov.transient"), number("dt")};
  c.lambda_chaos_min = number("classifier.lambda_chaos_min");
  c.lambda_periodic_max = number("classifier.lambda_periodic_max");
  c.cluster_tolerance = number("classifier.cluster_tolerance");
  c.max_period = integer("classifier.max_period");
  c.equilibrium_tolerance = number("classifier.equilibrium_tolerance");
  c.visit_radius = number("classifier.visit_radius");
  c.min_visits = integer("classifier.min_visits");
  const auto& l = c.lyapunov;
  if (!(l.d0 > 0.0 && l.tau >= l.dt && l.total >= l.tau && l.transient >= 0.0)) {
    throw ValidationError("lyapunov settings need d0 > 0, dt <= tau <= total, transient >= 0");
  }
  if (c.max_period < 1 || !(c.cluster_tolerance > 0.0) || c.min_visits < 1) {
    throw ValidationError("classifier settings out of range");
  }
  return c;
}

std::vector<double> ExperimentConfig::sweep_values() const {
  const auto& spec = text("sweep.r0");
  auto values = spec.find(':') != std::string::npos ? parse_range(spec) : parse_list(spec);
  if (values.empty()) throw ValidationError("sweep set is empty");
  for (double r : values) {
    if (!(std::isfinite(r) && r > 0.0)) throw ValidationError("sweep r0 values must be > 0");
  }
  return values;
}

SyncConfig ExperimentConfig::sync() const {
  SyncConfig s{circuit(), circuit()};
  const double mr = number("sync.mismatch_r0");
  const double mc = number("sync.mismatch_c");
  const double ml = number("sync.mismatch_l");
  if (!(mr > -1.0 && mc > -1.0 && ml > -1.0)) throw ValidationError("mismatch must be > -100%");
  s.slave.r0 *= 1.0 + mr;
  s.slave.c1 *= 1.0 + mc;
  s.slave.c2 *= 1.0 + mc;
  s.slave.l *= 1.0 + ml;
  s.t_sync = number("sync.t_sync");
  s.t_end = number("sync.t_end");
  s.settle = number("sync.settle");
  const auto& drive = text("sync.drive");
  if (drive == "v_c1") {
    s.drive = DriveVariable::v_c1;
  } else if (drive == "v_c2") {
    s.drive = DriveVariable::v_c2;
  } else {
    throw ValidationError("sync.drive must be v_c1 or v_c2");
  }
  const auto& coupling = text("sync.coupling");
  if (coupling == "substitution") {
    s.coupling = {CouplingMode::substitution, 0.0};
  } else if (coupling == "resistive") {
    s.coupling = {CouplingMode::resistive, number("sync.r_c")};
  } else {
    throw ValidationError("sync.coupling must be substitution or resistive");
  }
  s.master_init = init();
  s.slave_init = {number("slave_init.v_c1"), number("slave_init.v_c2"), number("slave_init.i_l")};
  const auto sim = simulation();
  s.dt = sim.dt;
  s.record_every = sim.record_every;
  try {
    s.validate();
  } catch (const DomainError& e) {
    throw ValidationError(e.what());
  }
  if (s.settle >= s.t_end - s.t_sync) throw ValidationError("sync.settle must be shorter than t_end - t_sync");
  return s;
}

Modulation ExperimentConfig::modulation() const {
  Modulation m;
  const auto& kind = text("sound.mod");
  if (kind == "staircase") {
    m.kind = Staircase{numbers("sound.levels"), number("sound.freq")};
  } else if (kind == "sine") {
    m.kind = SineSweep{number("sound.center"), number("sound.depth"), number("sound.freq")};
  } else {
    throw ValidationError("sound.mod must be staircase or sine");
  }
  m.duration = number("sound.duration");
  try {
    m.validate();
  } catch (const DomainError& e) {
    throw ValidationError(e.what());
  }
  return m;
}

SynthesisOptions ExperimentConfig::synthesis() const {
  SynthesisOptions o;
  const auto sim = simulation();
  o.dt = sim.dt;
  o.record_every = sim.record_every;
  o.rate = number("sound.rate");
  o.init = init();
  const auto& node = text("sound.node");
  if (node == "v_c1") {
    o.node = OutputNode::v_c1;
  } else if (node == "v_c2") {
    o.node = OutputNode::v_c2;
  } else if (node == "i_l") {
    o.node = OutputNode::i_l;
  } else {
    throw ValidationError("sound.node must be v_c1, v_c2 or i_l");
  }
  const double record_rate = 1.0 / (o.dt * o.record_every);
  if (!(o.rate > 0.0) || o.rate > record_rate) {
    throw ValidationError("sound.rate " + format_number(o.rate) + " Hz exceeds the recording rate " +
                          format_number(record_rate) + " Hz");
  }
  if (number("sound.duration") <= o.transient) throw ValidationError("sound.duration must exceed 10 ms");
  return o;
}

std::vector<double> parse_list(std::string_view spec) {
  std::vector<double> out;
  spec = trim(spec);
  if (spec.empty()) return out;
  std::size_t start = 0;
  for (;;) {
    const auto comma = spec.find(',', start);
    const auto item = trim(spec.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    out.push_back(to_number("list", item));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

std::vector<double> parse_range(std::string_view spec) {
  const auto a = spec.find(':');
  const auto b = a == std::string_view::npos ? a : spec.find(':', a + 1);
  if (b == std::string_view::npos) throw ValidationError("range must be start:stop:step");
  const double start = to_number("range", trim(spec.substr(0, a)));
  const double stop = to_number("range", trim(spec.substr(a + 1, b - a - 1)));
  const double step = std::abs(to_number("range", trim(spec.substr(b + 1))));
  if (!(step > 0.0)) throw ValidationError("range step must be non-zero");
  const double span = std::abs(stop - start);
  const auto count = static_cast<long long>(std::floor(span / step + 1e-9));
  if (count > 1000000) throw ValidationError("range has too many points");
  const double dir = stop >= start ? 1.0 : -1.0;
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(count + 1));
  for (long long k = 0; k <= count; ++k) out.push_back(start + dir * step * static_cast<double>(k));
  return out;
}

double parse_fraction(std::string_view text) {
  text = trim(text);
  if (!text.empty() && text.back() == '%') return to_number("mismatch", trim(text.substr(0, text.size() - 1))) / 100.0;
  return to_number("mismatch", text);
}

}  // namespace chua::lab
