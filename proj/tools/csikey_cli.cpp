// SPDX-License-Identifier: Apache-2.0
#include <CLI11.hpp>

#include <algorithm>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "csikey/error.hpp"
#include "csikey/experiment.hpp"

using namespace csikey;

namespace {

struct Options {
  ExperimentConfig config;
  std::vector<int> subcarriers;
  bool ht40 = false;
  std::string transport = "in-process";
  std::size_t seed_count = 0;
  std::uint64_t first_seed = 1;
  std::size_t first_block = 0;
  std::string save_traces;
  std::string snr = "";
};

void add_channel(CLI::App& app, Options& o) {
  auto& c = o.config.channel;
  app.add_flag("--ht40", o.ht40, "40 MHz grid at 5.18 GHz with k=8 defaults");
  app.add_option("--snr-db", o.snr, "measurement SNR in dB, or 'inf'");
  app.add_option("--velocity", c.shake_velocity_mps, "shake velocity in m/s (0 for static)");
  app.add_option("--taps", c.num_taps, "multipath taps");
  app.add_option("--delay-spread", c.tap_delay_spread_s, "exponential delay-profile constant in seconds");
  app.add_option("--rtt", c.round_trip_time_s, "packet round-trip time in seconds");
  app.add_option("--interval", c.packet_interval_s, "time between packet cycles in seconds");
  app.add_option("--agc-min", c.agc_gain_min, "lower AGC gain");
  app.add_option("--agc-max", c.agc_gain_max, "upper AGC gain");
  app.add_option("--loss", o.config.sync.loss_probability, "per-message loss on the packet link");
  app.add_flag("--require-eve", o.config.sync.require_eve, "count an exchange only once Eve heard both directions");
  app.add_option("--eve-loss", o.config.sync.eve_loss_probability, "loss probability on Eve's receiver");
}

void add_protocol(CLI::App& app, Options& o) {
  auto& e = o.config.extraction;
  app.add_option("-N,--packets", e.n_packets, "packets per session");
  app.add_option("-k", e.k, "main sub-carriers");
  app.add_option("-q", e.q, "quantization bits");
  app.add_option("-m", e.m, "majority margin");
  app.add_option("--subcarriers", o.subcarriers, "main sub-carrier indices (fixes the layout)")->delimiter(',');
  app.add_option("--rounds", o.config.cascade.rounds, "Cascade rounds");
  app.add_option("--qber", o.config.cascade.qber_estimate, "expected mismatch rate for block sizing");
  app.add_option("--first-block", o.first_block, "override the first-round block size");
  app.add_option("--key-bits", o.config.key_bits, "128 or 256")->check(CLI::IsMember({128u, 256u}));
  app.add_option("--transport", o.transport, "in-process or socket")->check(CLI::IsMember({"in-process", "socket"}));
  app.add_option("--seeds", o.config.seeds, "explicit seed list")->delimiter(',');
  app.add_option("--seed-count", o.seed_count, "use seeds first..first+count-1");
  app.add_option("--first-seed", o.first_seed, "first seed for --seed-count");
  app.add_option("-o,--out", o.config.output_dir, "output directory (CSIKEY_OUT_DIR overrides)");
  app.add_option("-j,--jobs", o.config.jobs, "worker threads (0 = all cores)");
}

void finalize(Options& o) {
  auto& cfg = o.config;
  if (o.ht40) {
    const auto keep = cfg.channel;
    cfg.channel = ChannelModelParams::ht40();
    cfg.channel.shake_velocity_mps = keep.shake_velocity_mps;
    cfg.channel.num_taps = keep.num_taps;
    cfg.channel.tap_delay_spread_s = keep.tap_delay_spread_s;
    cfg.channel.round_trip_time_s = keep.round_trip_time_s;
    cfg.channel.packet_interval_s = keep.packet_interval_s;
    cfg.channel.agc_gain_min = keep.agc_gain_min;
    cfg.channel.agc_gain_max = keep.agc_gain_max;
    if (cfg.extraction.k == ExtractionParams{}.k) {
      const auto n = cfg.extraction.n_packets;
      const auto q = cfg.extraction.q;
      const auto m = cfg.extraction.m;
      cfg.extraction = ExtractionParams::ht40();
      cfg.extraction.n_packets = n;
      cfg.extraction.q = q;
      cfg.extraction.m = m;
    }
  }
  if (!o.snr.empty())
    cfg.channel.snr_db = (o.snr == "inf" || o.snr == "+inf") ? std::numeric_limits<double>::infinity() : std::stod(o.snr);
  if (!o.subcarriers.empty()) {
    cfg.extraction.main_subcarriers = o.subcarriers;
    cfg.extraction.k = o.subcarriers.size();
    cfg.fixed_subcarriers = true;
  }
  if (o.first_block) cfg.cascade.first_block_size = o.first_block;
  cfg.transport = o.transport == "socket" ? Transport::socket : Transport::in_process;
  if (o.seed_count) {
    cfg.seeds.clear();
    for (std::size_t i = 0; i < o.seed_count; ++i) cfg.seeds.push_back(o.first_seed + i);
  }
}

void print_session(const SessionRecord& rec) {
  std::cout << "seed " << rec.seed << ": " << to_string(rec.status);
  if (rec.bob)
    std::cout << "  bmr=" << rec.bob->bob_bmr.value_or(0.0) << " leaked=" << rec.bob->leaked_bits
              << " H=" << rec.bob->min_entropy << " B=" << rec.bob->secure_bits << " sbgr=" << rec.bob->sbgr;
  if (rec.eve) std::cout << " eve=" << rec.eve->raw_bmr;
  if (!rec.message.empty()) std::cout << "  (" << rec.message << ")";
  std::cout << '\n';
}

int run_and_write(const ExperimentConfig& cfg, const std::string& save_traces) {
  cfg.validate();
  const auto dir = resolve_output_dir(cfg);
  const auto records = run_sessions(cfg);
  write_session_files(records, dir);
  if (!save_traces.empty() && cfg.mode == Mode::simulate) {
    std::filesystem::create_directories(save_traces);
    for (auto seed : cfg.seeds) {
      auto p = cfg.channel;
      p.seed = seed;
      const auto t = simulate_session(p, cfg.extraction.n_packets);
      const std::filesystem::path base(save_traces);
      const auto s = std::to_string(seed);
      save_trace(t.alice, base / ("alice_" + s + ".csi"));
      save_trace(t.bob, base / ("bob_" + s + ".csi"));
      save_trace(t.eve_a, base / ("eve_a_" + s + ".csi"));
      save_trace(t.eve_b, base / ("eve_b_" + s + ".csi"));
    }
  }
  bool all_ok = true;
  for (const auto& r : records) {
    print_session(r);
    all_ok = all_ok && r.status == SessionStatus::success;
  }
  std::cout << "reports written to " << dir.string() << '\n';
  return all_ok ? 0 : 2;
}

int report(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw ConfigError("'" + dir.string() + "' is not a directory");
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    const auto name = e.path().filename().string();
    if (name.rfind("session_", 0) == 0 && e.path().extension() == ".json") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  std::map<std::string, std::size_t> statuses;
  double bmr = 0, eve = 0, sbgr = 0, leaked = 0;
  std::size_t counted = 0;
  for (const auto& f : files) {
    std::ifstream in(f);
    const auto j = nlohmann::json::parse(in);
    ++statuses[j.at("status").get<std::string>()];
    if (!j.at("bob").is_null()) {
      const auto& b = j.at("bob");
      bmr += b.at("bob_bmr").get<double>();
      sbgr += b.at("sbgr").get<double>();
      leaked += b.at("leaked_bits").get<double>();
      eve += j.at("eve").is_null() ? 0.0 : j.at("eve").at("bmr").get<double>();
      ++counted;
    }
  }
  nlohmann::json summary = {{"sessions", files.size()}, {"statuses", statuses}};
  if (counted) {
    const double n = static_cast<double>(counted);
    summary["mean_bob_bmr"] = bmr / n;
    summary["mean_eve_bmr"] = eve / n;
    summary["mean_sbgr"] = sbgr / n;
    summary["mean_leaked_bits"] = leaked / n;
  }
  std::cout << summary.dump(2) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"CSI shared-key generation: simulate, replay and sweep sessions"};
  app.require_subcommand(1);
  Options o;

  auto* sim = app.add_subcommand("simulate", "run seeded simulated sessions");
  add_channel(*sim, o);
  add_protocol(*sim, o);
  sim->add_option("--save-traces", o.save_traces, "also write the four simulated traces per seed here");

  auto* rep = app.add_subcommand("replay", "run the protocol on four recorded traces");
  ReplayPaths paths;
  rep->add_option("--alice", paths.alice, "Alice's trace")->required()->check(CLI::ExistingFile);
  rep->add_option("--bob", paths.bob, "Bob's trace")->required()->check(CLI::ExistingFile);
  rep->add_option("--eve-a", paths.eve_a, "Eve's trace toward Alice")->required()->check(CLI::ExistingFile);
  rep->add_option("--eve-b", paths.eve_b, "Eve's trace toward Bob")->required()->check(CLI::ExistingFile);
  add_protocol(*rep, o);

  auto* sw = app.add_subcommand("sweep", "sweep one parameter over seeded sessions");
  std::string parameter;
  std::vector<double> values;
  sw->add_option("--param", parameter, "q, m, k, snr_db, distance or N")->required();
  sw->add_option("--values", values, "values to sweep (may be empty)")->delimiter(',');
  add_channel(*sw, o);
  add_protocol(*sw, o);

  auto* sel = app.add_subcommand("select-subcarriers", "exhaustive min-entropy search for main sub-carriers");
  std::string trace_path;
  SelectionOptions sopt;
  sel->add_option("--trace", trace_path, "training trace (simulated with defaults when omitted)");
  sel->add_option("-k", sopt.k, "sub-carriers to pick");
  sel->add_option("-q", sopt.q, "quantization bits");
  sel->add_option("--min-spacing", sopt.min_spacing, "minimum index distance");
  sel->add_option("--margin", sopt.window_margin, "require the l-m..l+m window inside the trace");
  sel->add_option("-N,--packets", sopt.n_packets, "training packets (0 = all)");
  sel->add_option("--budget", sopt.budget, "maximum subsets scored");
  std::uint64_t sel_seed = 1;
  sel->add_option("--seed", sel_seed, "seed for the simulated training trace");

  auto* rpt = app.add_subcommand("report", "summarise a directory of session reports");
  std::string report_dir;
  rpt->add_option("dir", report_dir, "directory holding session_*.json")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*sim) {
      finalize(o);
      o.config.mode = Mode::simulate;
      return run_and_write(o.config, o.save_traces);
    }
    if (*rep) {
      finalize(o);
      o.config.mode = Mode::replay;
      o.config.replay = paths;
      return run_and_write(o.config, "");
    }
    if (*sw) {
      finalize(o);
      o.config.mode = Mode::simulate;
      o.config.validate();
      const auto result = sweep(o.config, parameter, values);
      const auto dir = resolve_output_dir(o.config);
      std::filesystem::create_directories(dir);
      {
        std::ofstream rows(dir / ("sweep_" + parameter + ".csv"));
        write_sweep_csv(result, rows);
        std::ofstream summary(dir / ("sweep_" + parameter + "_summary.csv"));
        write_summary_csv(result, summary);
        std::ofstream json(dir / ("sweep_" + parameter + ".json"));
        json << to_json(result).dump(2) << '\n';
      }
      write_summary_csv(result, std::cout);
      return 0;
    }
    if (*sel) {
      CsiTrace trace;
      if (trace_path.empty()) {
        ChannelModelParams p;
        p.seed = sel_seed;
        trace = simulate_session(p, 300).alice;
      } else {
        trace = load_trace(trace_path);
      }
      const auto result = select_subcarriers(calibrate(trace), sopt);
      std::cout << nlohmann::json{{"subcarriers", result.subcarriers},
                                  {"min_entropy", result.min_entropy},
                                  {"subsets_scored", result.subsets_scored}}
                       .dump(2)
                << '\n';
      return 0;
    }
    if (*rpt) return report(report_dir);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
