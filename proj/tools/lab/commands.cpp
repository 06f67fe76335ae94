#include "commands.hpp"

#include <chrono>
#include <fstream>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "chua/error.hpp"
#include "chua/format.hpp"

namespace chua::lab {

namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

/// Output files staged in memory and flushed together.
class Outputs {
 public:
  explicit Outputs(fs::path dir) : dir_(std::move(dir)) {}

  void add(const std::string& name, std::string content) { files_.emplace_back(dir_ / name, std::move(content)); }

  void flush(RunReport& report) {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) throw IoError("cannot create output directory " + dir_.string() + ": " + ec.message());
    for (const auto& [path, content] : files_) {
      std::ofstream out(path, std::ios::binary);
      out.write(content.data(), static_cast<std::streamsize>(content.size()));
      if (!out) throw IoError("failed writing " + path.string());
      report.files.push_back(path);
    }
  }

 private:
  fs::path dir_;
  std::vector<std::pair<fs::path, std::string>> files_;
};

RunReport start(std::string command, const ExperimentConfig& cfg) {
  RunReport r;
  r.command = std::move(command);
  r.config_echo = cfg.echo();
  return r;
}

void finish(RunReport& report, Outputs& outputs, Clock::time_point t0) {
  outputs.add("run.cfg", report.config_echo);
  report.elapsed_seconds = std::chrono::duration<double>(Clock::now() - t0).count();
  outputs.flush(report);
}

template <typename Fn>
std::string render(Fn&& fn) {
  std::ostringstream out;
  fn(out);
  return out.str();
}

std::span<const double> tail(const std::vector<double>& v, std::size_t first) {
  return std::span<const double>(v).subspan(std::min(first, v.size()));
}

}  // namespace

std::string RunReport::to_json() const {
  nlohmann::ordered_json j;
  j["command"] = command;
  j["config"] = config_echo;
  j["elapsed_seconds"] = elapsed_seconds;
  j["exit_code"] = exit_code;
  auto& f = j["files"] = nlohmann::json::array();
  for (const auto& p : files) f.push_back(p.string());
  auto& m = j["metrics"] = nlohmann::ordered_json::object();
  for (const auto& [k, v] : metrics) m[k] = v;
  j["warnings"] = warnings;
  return j.dump(2);
}

double RunReport::metric(std::string_view name) const {
  for (const auto& [k, v] : metrics) {
    if (k == name) return v;
  }
  throw DomainError("no metric named " + std::string(name));
}

RunReport cmd_simulate(const ExperimentConfig& cfg, const fs::path& out_dir) {
  const auto t0 = Clock::now();
  auto report = start("simulate", cfg);
  const auto p = cfg.circuit();
  const auto opts = cfg.simulation();
  const double t_end = cfg.number("t_end");
  if (!(t_end > 0.0)) throw ValidationError("t_end must be > 0");
  const auto tr = simulate(p, cfg.init(), t_end, {}, opts);

  Outputs outputs(out_dir);
  outputs.add("trajectory.csv", render([&](std::ostream& o) { write_trajectory_csv(o, tr); }));
  outputs.add("phase.csv", render([&](std::ostream& o) { write_phase_csv(o, tr); }));
  report.metrics = {{"r0", p.r0}, {"t_end", t_end}, {"samples", static_cast<double>(tr.samples.size())},
                    {"final_v_c1", tr.samples.back().v_c1}, {"final_v_c2", tr.samples.back().v_c2}};
  finish(report, outputs, t0);
  return report;
}

RunReport cmd_sweep(const ExperimentConfig& cfg, const fs::path& out_dir) {
  const auto t0 = Clock::now();
  auto report = start("sweep", cfg);
  const auto base = cfg.circuit();
  const auto values = cfg.sweep_values();
  const auto classifier = cfg.classifier();
  const double refine = cfg.number("sweep.refine");
  const int jobs = cfg.integer("sweep.jobs");
  if (jobs < 0) throw ValidationError("sweep.jobs must be >= 0");
  if (refine < 0.0) throw ValidationError("sweep.refine must be >= 0");
  const auto init = cfg.init();

  auto points = sweep_bifurcation(base, values, classifier, init, static_cast<unsigned>(jobs));
  if (refine > 0.0) points = refine_sweep(base, std::move(points), refine, classifier, init, static_cast<unsigned>(jobs));

  std::size_t ok = 0;
  for (const auto& pt : points) {
    if (pt.regime) {
      ++ok;
    } else {
      report.warnings.push_back("r0=" + format_number(pt.r0) + ": " + pt.error);
    }
  }
  Outputs outputs(out_dir);
  outputs.add("sweep.csv", render([&](std::ostream& o) { write_sweep_csv(o, points); }));
  outputs.add("bifurcation.csv", render([&](std::ostream& o) { write_bifurcation_csv(o, points); }));
  report.metrics = {{"points", static_cast<double>(points.size())}, {"classified", static_cast<double>(ok)}};
  report.exit_code = ok > 0 ? 0 : 2;
  finish(report, outputs, t0);
  return report;
}

RunReport cmd_sync(const ExperimentConfig& cfg, const fs::path& out_dir) {
  const auto t0 = Clock::now();
  auto report = start("sync", cfg);
  const auto sc = cfg.sync();
  const auto result = run_synchronization(sc);
  const auto& m = result.metrics;

  Outputs outputs(out_dir);
  outputs.add("sync.csv", render([&](std::ostream& o) { write_sync_csv(o, result); }));
  report.metrics = {{"rms_pre", m.rms_pre},
                    {"rms_post", m.rms_post},
                    {"max_glitch_post", m.max_glitch_post},
                    {"signal_rms", m.signal_rms},
                    {"ratio_pre", m.rms_pre / m.signal_rms},
                    {"ratio_post", m.rms_post / m.signal_rms}};
  finish(report, outputs, t0);
  return report;
}

RunReport cmd_comm(const ExperimentConfig& cfg, const fs::path& out_dir) {
  const auto t0 = Clock::now();
  auto report = start("comm", cfg);
  const auto sc = cfg.sync();
  const double mask_ratio = cfg.number("comm.mask_ratio");
  if (!(mask_ratio > 0.0)) throw ValidationError("comm.mask_ratio must be > 0");
  const double r_inject = cfg.number("comm.r_inject");
  if (!(r_inject > 0.0)) throw ValidationError("comm.r_inject must be > 0");
  const double dt_rec = sc.dt * sc.record_every;

  Waveform message;
  const auto& path = cfg.text("comm.message");
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read message file " + path);
    std::vector<double> times;
    std::vector<double> values;
    read_message_csv(in, times, values);
    message = resample(times, values, dt_rec, sc.t_end);
  } else {
    const double freq = cfg.number("comm.tone_freq");
    const double ratio = cfg.number("comm.tone_ratio");
    if (!(freq > 0.0) || !(ratio >= 0.0)) throw ValidationError("tone needs freq > 0 and ratio >= 0");
    // Tone amplitude is relative to the clean carrier RMS.
    const auto clean = mask_transmit({}, sc, mask_ratio, r_inject);
    message = tone(freq, ratio * rms(clean.drive.values), sc.t_end, dt_rec);
  }
  const auto tx = mask_transmit(message, sc, mask_ratio, r_inject);
  if (tx.over_amplitude) report.warnings.push_back(tx.warning);
  const auto recovered = recover_message(tx.channel, sc, r_inject);

  const auto first = static_cast<std::size_t>(std::ceil((sc.t_sync + sc.settle) / dt_rec - 1e-9));
  std::vector<double> original(recovered.values.size());
  for (std::size_t k = 0; k < original.size(); ++k) original[k] = message.values.empty() ? 0.0 : message.at(recovered.time_at(k));
  const double drive_rms = rms(tail(tx.drive.values, first));
  const double recovered_rms = rms(tail(recovered.values, first));
  std::vector<double> residual(recovered.values.size());
  for (std::size_t k = 0; k < residual.size(); ++k) residual[k] = recovered.values[k] - original[k];

  Outputs outputs(out_dir);
  outputs.add("channel.csv", render([&](std::ostream& o) {
                o << "t,value\n";
                for (std::size_t k = 0; k < tx.channel.values.size(); ++k) {
                  o << format_number(tx.channel.time_at(k)) << ',' << format_number(tx.channel.values[k]) << '\n';
                }
              }));
  outputs.add("recovered.csv", render([&](std::ostream& o) { write_message_csv(o, message, recovered); }));
  report.metrics = {{"drive_rms", drive_rms},
                    {"message_rms", rms(tail(original, first))},
                    {"recovered_rms", recovered_rms},
                    {"recovered_ratio", recovered_rms / drive_rms},
                    {"error_ratio", rms(tail(residual, first)) / drive_rms},
                    {"correlation", correlation(tail(original, first), tail(recovered.values, first))}};
  finish(report, outputs, t0);
  return report;
}

RunReport cmd_sound(const ExperimentConfig& cfg, const fs::path& out_dir) {
  const auto t0 = Clock::now();
  auto report = start("sound", cfg);
  const auto p = cfg.circuit();
  const auto mod = cfg.modulation();
  const auto opts = cfg.synthesis();
  const bool csv = cfg.flag("sound.csv");
  const fs::path wav_name = cfg.text("sound.wav");
  if (wav_name.empty() || wav_name.filename() != wav_name) throw ValidationError("sound.wav must be a file name");
  const auto clip = synthesize(p, mod, opts);

  Outputs outputs(out_dir);
  std::string bytes = render([&](std::ostream& o) { write_wav(clip, o); });
  const auto size = bytes.size();
  outputs.add(wav_name.string(), std::move(bytes));
  if (csv) {
    outputs.add(wav_name.stem().string() + ".csv", render([&](std::ostream& o) {
                  o << "t,value\n";
                  for (std::size_t k = 0; k < clip.samples.size(); ++k) {
                    o << format_number(static_cast<double>(k) / clip.rate) << ',' << format_number(clip.samples[k]) << '\n';
                  }
                }));
  }
  report.metrics = {{"rate", clip.rate}, {"samples", static_cast<double>(clip.samples.size())},
                    {"wav_bytes", static_cast<double>(size)}};
  finish(report, outputs, t0);
  return report;
}

void apply_mismatch(ExperimentConfig& cfg, const std::vector<std::string>& specs) {
  for (const auto& spec : specs) {
    if (spec == "none") {
      cfg.set("sync.mismatch_r0", "0");
      cfg.set("sync.mismatch_c", "0");
      cfg.set("sync.mismatch_l", "0");
      continue;
    }
    const auto eq = spec.find('=');
    if (eq == std::string::npos) throw ValidationError("mismatch must look like c=5%, r0=5% or none");
    const auto what = spec.substr(0, eq);
    const double fraction = parse_fraction(spec.substr(eq + 1));
    if (what == "c") {
      cfg.set("sync.mismatch_c", format_number(fraction));
    } else if (what == "r0") {
      cfg.set("sync.mismatch_r0", format_number(fraction));
    } else if (what == "l") {
      cfg.set("sync.mismatch_l", format_number(fraction));
    } else {
      throw ValidationError("unknown mismatch target '" + what + "'");
    }
  }
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Chua's circuit laboratory: simulate, sweep, sync, comm, sound"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::string out_dir = "out";
  std::vector<std::string> overrides;
  std::optional<double> dt;
  std::optional<double> t_end;
  std::optional<int> record_every;
  std::optional<double> r0;
  app.add_option("--config", config_path, "key = value configuration file");
  app.add_option("--out", out_dir, "output directory");
  app.add_option("--dt", dt, "integration step, s");
  app.add_option("--t-end", t_end, "simulated time, s");
  app.add_option("--record-every", record_every, "record one sample every N steps");
  app.add_option("--set", overrides, "override any config key: key=value");
  app.add_option("--r0", r0, "coupling resistor, ohms");

  auto* simulate_cmd = app.add_subcommand("simulate", "trajectory and phase-space CSV at one r0");

  auto* sweep_cmd = app.add_subcommand("sweep", "regime classification over a list or range of r0");
  std::string r0_list;
  std::string range;
  std::optional<double> refine;
  std::optional<int> jobs;
  sweep_cmd->add_option("--r0-list", r0_list, "comma-separated r0 values");
  sweep_cmd->add_option("--range", range, "start:stop:step in ohms");
  sweep_cmd->add_option("--refine", refine, "bisect skipped route stages down to this spacing, ohms");
  sweep_cmd->add_option("--jobs", jobs, "worker threads (0 = logical cores)");

  auto* sync_cmd = app.add_subcommand("sync", "master/slave synchronization experiment");
  std::vector<std::string> mismatch;
  std::string coupling;
  std::optional<double> r_c;
  for (auto* sub : {sync_cmd}) {
    sub->add_option("--mismatch", mismatch, "none | c=5% | r0=5% | l=5%");
    sub->add_option("--coupling", coupling, "substitution | resistive");
    sub->add_option("--r-c", r_c, "coupling resistor for resistive mode, ohms");
  }

  auto* comm_cmd = app.add_subcommand("comm", "chaotic masking transmission and recovery");
  std::string message;
  std::optional<double> tone_freq;
  std::optional<double> tone_ratio;
  comm_cmd->add_option("--mismatch", mismatch, "none | c=5% | r0=5% | l=5%");
  comm_cmd->add_option("--message", message, "CSV file with t,value rows");
  comm_cmd->add_option("--tone-freq", tone_freq, "built-in tone frequency, Hz");
  comm_cmd->add_option("--tone-ratio", tone_ratio, "tone amplitude relative to drive RMS");

  auto* sound_cmd = app.add_subcommand("sound", "R0-modulated sound synthesis to WAV");
  std::string mod;
  std::string levels;
  std::string node;
  std::string wav;
  std::optional<double> freq;
  std::optional<double> center;
  std::optional<double> depth;
  std::optional<double> duration;
  std::optional<double> rate;
  bool csv = false;
  sound_cmd->add_option("--mod", mod, "staircase | sine");
  sound_cmd->add_option("--freq", freq, "modulation frequency, Hz");
  sound_cmd->add_option("--levels", levels, "staircase levels, comma-separated ohms");
  sound_cmd->add_option("--center", center, "sine center, ohms");
  sound_cmd->add_option("--depth", depth, "sine depth, ohms");
  sound_cmd->add_option("--duration", duration, "clip duration, s");
  sound_cmd->add_option("--rate", rate, "audio sample rate, Hz");
  sound_cmd->add_option("--node", node, "v_c1 | v_c2 | i_l");
  sound_cmd->add_option("--wav", wav, "output WAV file name inside --out");
  sound_cmd->add_flag("--csv", csv, "also dump pre-quantization samples");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? 0 : 1;
  }

  auto* active = app.get_subcommands().front();
  const std::string name = active->get_name();
  try {
    ExperimentConfig cfg;
    if (!config_path.empty()) cfg.load_file(config_path);
    for (const auto& o : overrides) cfg.set_assignment(o);
    auto set_num = [&](const char* key, const auto& v) {
      if (v) cfg.set(key, format_number(static_cast<double>(*v)));
    };
    set_num("dt", dt);
    set_num("record_every", record_every);
    set_num("r0", r0);
    if (name == "simulate") set_num("t_end", t_end);
    if (name == "sync" || name == "comm") set_num("sync.t_end", t_end);
    if (name == "sound") set_num("sound.duration", t_end);
    if (!r0_list.empty()) cfg.set("sweep.r0", r0_list);
    if (!range.empty()) cfg.set("sweep.r0", range);
    set_num("sweep.refine", refine);
    set_num("sweep.jobs", jobs);
    apply_mismatch(cfg, mismatch);
    if (!coupling.empty()) cfg.set("sync.coupling", coupling);
    set_num("sync.r_c", r_c);
    if (!message.empty()) cfg.set("comm.message", message);
    set_num("comm.tone_freq", tone_freq);
    set_num("comm.tone_ratio", tone_ratio);
    if (!mod.empty()) cfg.set("sound.mod", mod);
    if (!levels.empty()) cfg.set("sound.levels", levels);
    if (!node.empty()) cfg.set("sound.node", node);
    if (!wav.empty()) cfg.set("sound.wav", wav);
    if (csv) cfg.set("sound.csv", "true");
    set_num("sound.freq", freq);
    set_num("sound.center", center);
    set_num("sound.depth", depth);
    set_num("sound.duration", duration);
    set_num("sound.rate", rate);

    RunReport report;
    if (active == simulate_cmd) {
      report = cmd_simulate(cfg, out_dir);
    } else if (active == sweep_cmd) {
      report = cmd_sweep(cfg, out_dir);
    } else if (active == sync_cmd) {
      report = cmd_sync(cfg, out_dir);
    } else if (active == comm_cmd) {
      report = cmd_comm(cfg, out_dir);
    } else {
      report = cmd_sound(cfg, out_dir);
    }
    for (const auto& w : report.warnings) err << "warning: " << w << '\n';
    out << report.to_json() << '\n';
    return report.exit_code;
  } catch (const ValidationError& e) {
    err << name << ": invalid configuration: " << e.what() << '\n';
    return 1;
  } catch (const DomainError& e) {
    err << name << ": invalid input: " << e.what() << '\n';
    return 1;
  } catch (const IoError& e) {
    err << name << ": I/O error: " << e.what() << '\n';
    return 3;
  } catch (const Error& e) {
    err << name << ": numerical failure: " << e.what() << '\n';
    return 2;
  }
}

}  // namespace chua::lab
