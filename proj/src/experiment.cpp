// SPDX-License-Identifier: Apache-2.0
#include "csikey/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <thread>

#include "csikey/error.hpp"
#include "csikey/seed.hpp"

namespace csikey {

DistanceTable default_distance_table() {
  // Log-distance path loss, exponent 3, anchored at 40 dB for one metre.
  return {{0.5, 44.0}, {1.0, 40.0}, {2.0, 31.0}, {3.0, 25.7}, {5.0, 19.0}, {7.0, 14.6}, {9.0, 11.4}};
}

double distance_to_snr(const DistanceTable& table, double meters) {
  if (table.empty()) throw ConfigError("distance table is empty");
  if (!(meters > 0.0)) throw ConfigError("distance must be > 0");
  if (meters <= table.front().first) return table.front().second;
  if (meters >= table.back().first) return table.back().second;
  for (std::size_t i = 1; i < table.size(); ++i) {
    const auto [d1, s1] = table[i];
    if (meters <= d1) {
      const auto [d0, s0] = table[i - 1];
      const double t = (std::log(meters) - std::log(d0)) / (std::log(d1) - std::log(d0));
      return s0 + t * (s1 - s0);
    }
  }
  return table.back().second;
}

void ExperimentConfig::validate() const {
  if (mode == Mode::replay) {
    if (!replay) throw ConfigError("replay mode needs all four trace files");
    for (const auto* p : {&replay->alice, &replay->bob, &replay->eve_a, &replay->eve_b})
      if (p->empty()) throw ConfigError("replay mode needs all four trace files");
  } else {
    channel.validate();
  }
  cascade.validate();
  if (key_bits != 128 && key_bits != 256) throw ConfigError("key length must be 128 or 256 bits");
  if (seeds.empty()) throw ConfigError("at least one seed is required");
  for (std::size_t i = 1; i < distance_table.size(); ++i)
    if (!(distance_table[i].first > distance_table[i - 1].first))
      throw ConfigError("distance table must be strictly increasing in distance");
}

std::filesystem::path resolve_output_dir(const ExperimentConfig& config) {
  if (const char* env = std::getenv("CSIKEY_OUT_DIR"); env && *env) return env;
  return config.output_dir;
}

namespace {

std::vector<int> row_subcarriers(const ExperimentConfig& config, std::span<const int> available) {
  if (config.fixed_subcarriers) return config.extraction.main_subcarriers;
  try {
    config.extraction.validate(available);
    return config.extraction.main_subcarriers;
  } catch (const ConfigError&) {
    return spread_main_subcarriers(available, config.extraction.k, config.extraction.m);
  }
}

SessionTraces load_replay(const ReplayPaths& paths) {
  return {load_trace(paths.alice), load_trace(paths.bob), load_trace(paths.eve_a), load_trace(paths.eve_b)};
}

template <typename F>
void parallel_for(std::size_t count, unsigned jobs, F&& body) {
  if (jobs == 0) jobs = std::max(1u, std::thread::hardware_concurrency());
  jobs = static_cast<unsigned>(std::min<std::size_t>(jobs, count));
  if (jobs <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> workers;
  for (unsigned w = 0; w < jobs; ++w)
    workers.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) body(i);
    });
}

}  // namespace

SessionRecord run_session(const ExperimentConfig& config, std::uint64_t seed) {
  SessionRecord rec;
  rec.seed = seed;
  rec.extraction = config.extraction;
  try {
    config.validate();
    std::unique_ptr<ChannelSource> source;
    if (config.mode == Mode::simulate) {
      auto params = config.channel;
      params.seed = seed;
      source = std::make_unique<SimulatedChannelSource>(params);
    } else {
      source = std::make_unique<ReplayChannelSource>(load_replay(*config.replay));
    }
    const auto available = source->metadata(Role::alice).subcarriers;
    rec.extraction.main_subcarriers = row_subcarriers(config, available);
    rec.extraction.validate(available);

    auto sync = config.sync;
    sync.seed = mix_seed(seed, 0x73796e63ull);
    sync.session_id = static_cast<std::uint32_t>(seed);
    const auto traces = run_sync_exchange(*source, rec.extraction.n_packets, sync, &rec.transcript);
    rec.sync_transmissions = traces.transmissions;
    rec.sync_retrials = traces.retrials;

    AgreementConfig ac;
    ac.cascade = config.cascade;
    ac.cascade.permutation_seed = mix_seed(seed, 0x7065726dull);
    ac.key_bits = config.key_bits;
    ac.session_id = static_cast<std::uint32_t>(seed);
    ac.transport = config.transport;
    ac.timing = config.timing;
    auto out = run_agreement(traces.traces.alice, traces.traces.bob, rec.extraction, ac);
    for (const auto& e : out.transcript.entries()) rec.transcript.record(e.direction, e.frame);

    auto eve = eve_attack(traces.traces.eve_a, rec.transcript, rec.extraction, out.alice_bits);
    out.alice.eve_bmr_vs_alice = eve.raw_bmr;
    out.bob.eve_bmr_vs_alice = eve.raw_bmr;
    rec.status = out.bob.status;
    rec.message = out.bob.message;
    rec.alice = std::move(out.alice);
    rec.bob = std::move(out.bob);
    rec.eve = std::move(eve);
  } catch (const ConfigError& e) {
    rec.status = SessionStatus::invalid_parameters;
    rec.message = e.what();
  } catch (const ExtractionError& e) {
    rec.status = SessionStatus::invalid_parameters;
    rec.message = e.what();
  } catch (const ProtocolError& e) {
    rec.status = SessionStatus::cascade_failure;
    rec.message = e.what();
  }
  return rec;
}

std::vector<SessionRecord> run_sessions(const ExperimentConfig& config) {
  std::vector<SessionRecord> out(config.seeds.size());
  parallel_for(config.seeds.size(), config.jobs, [&](std::size_t i) { out[i] = run_session(config, config.seeds[i]); });
  return out;
}

namespace {

std::string hex(std::span<const std::uint8_t> bytes) {
  std::ostringstream s;
  for (auto b : bytes) s << std::hex << std::setw(2) << std::setfill('0') << int{b};
  return s.str();
}

template <typename T>
nlohmann::json opt(const std::optional<T>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

}  // namespace

nlohmann::json to_json(const KeyReport& r) {
  return {
      {"party", r.party},
      {"status", std::string(to_string(r.status))},
      {"message", r.message},
      {"key_bits", r.key_bits},
      {"key", r.key ? nlohmann::json(hex(*r.key)) : nlohmann::json(nullptr)},
      {"n_packets", r.n_packets},
      {"k", r.k},
      {"q", r.q},
      {"m", r.m},
      {"raw_bits", r.raw_bits},
      {"leaked_bits", r.leaked_bits},
      {"min_entropy", r.min_entropy},
      {"max_entropy", r.max_entropy},
      {"secure_bits", r.secure_bits},
      {"sbgr", r.sbgr},
      {"bob_bmr", opt(r.bob_bmr)},
      {"eve_bmr_vs_alice", opt(r.eve_bmr_vs_alice)},
      {"corrected_bits", r.corrected_bits},
      {"cascade_rounds", r.cascade_rounds},
      {"parity_requests", r.parity_requests},
      {"hash_counted_as_leakage", r.hash_counted_as_leakage},
      {"timing",
       {{"collection_s", r.timing.collection_s},
        {"reconciliation_s", r.timing.reconciliation_s},
        {"total_s", r.timing.total_s},
        {"wall_clock_s", r.timing.wall_clock_s}}},
  };
}

nlohmann::json to_json(const SessionRecord& rec) {
  nlohmann::json j = {
      {"seed", rec.seed},
      {"status", std::string(to_string(rec.status))},
      {"message", rec.message},
      {"main_subcarriers", rec.extraction.main_subcarriers},
      {"sync", {{"transmissions", rec.sync_transmissions}, {"retrials", rec.sync_retrials}}},
      {"transcript_messages", rec.transcript.size()},
      {"observed_parity_bits", rec.transcript.parity_bits_observed()},
      {"alice", rec.alice ? to_json(*rec.alice) : nlohmann::json(nullptr)},
      {"bob", rec.bob ? to_json(*rec.bob) : nlohmann::json(nullptr)},
  };
  if (rec.eve)
    j["eve"] = {{"bmr", rec.eve->raw_bmr},
                {"bmr_with_parities", rec.eve->bmr},
                {"constraints", rec.eve->constraints},
                {"constraint_rank", rec.eve->constraint_rank},
                {"determined_bits", rec.eve->determined_bits}};
  else
    j["eve"] = nullptr;
  return j;
}

void write_session_files(const std::vector<SessionRecord>& records, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  for (const auto& rec : records) {
    const auto stem = std::to_string(rec.seed);
    std::ofstream out(dir / ("session_" + stem + ".json"));
    if (!out) throw Error("cannot write reports into '" + dir.string() + "'");
    out << to_json(rec).dump(2) << '\n';
    rec.transcript.save(dir / ("transcript_" + stem + ".bin"));
  }
}

ExperimentConfig apply_parameter(ExperimentConfig config, const std::string& parameter, double value) {
  auto as_count = [&](const char* what) {
    if (!(value >= 0.0) || value != std::floor(value))
      throw ConfigError(std::string(what) + " must be a non-negative integer, got " + std::to_string(value));
    return static_cast<std::size_t>(value);
  };
  if (parameter == "q") {
    config.extraction.q = static_cast<unsigned>(as_count("q"));
  } else if (parameter == "m") {
    config.extraction.m = static_cast<unsigned>(as_count("m"));
  } else if (parameter == "k") {
    config.extraction.k = as_count("k");
  } else if (parameter == "snr_db") {
    config.channel.snr_db = value;
  } else if (parameter == "distance") {
    config.channel.snr_db = distance_to_snr(config.distance_table, value);
  } else if (parameter == "N") {
    config.extraction.n_packets = as_count("N");
  } else {
    throw ConfigError("unknown sweep parameter '" + parameter + "' (expected q, m, k, snr_db, distance or N)");
  }
  return config;
}

SweepRow to_row(const std::string& parameter, double value, const SessionRecord& rec) {
  SweepRow row;
  row.parameter = parameter;
  row.value = value;
  row.seed = rec.seed;
  row.status = rec.status;
  row.n_packets = rec.extraction.n_packets;
  row.k = rec.extraction.k;
  row.q = rec.extraction.q;
  row.m = rec.extraction.m;
  if (rec.bob) {
    const auto& r = *rec.bob;
    row.raw_bits = r.raw_bits;
    row.leaked_bits = r.leaked_bits;
    row.bob_bmr = r.bob_bmr.value_or(0.0);
    row.min_entropy = r.min_entropy;
    row.secure_bits = r.secure_bits;
    row.sbgr = r.sbgr;
    row.key_issued = rec.key_issued();
    row.parity_requests = r.parity_requests;
    row.time_to_key_s = r.timing.total_s;
  }
  if (rec.eve) {
    row.eve_bmr = rec.eve->raw_bmr;
    row.eve_bmr_parity = rec.eve->bmr;
  }
  return row;
}

SweepResult sweep(const ExperimentConfig& config, const std::string& parameter, std::span<const double> values) {
  if (std::find(std::begin(kSweepParameters), std::end(kSweepParameters), parameter) == std::end(kSweepParameters))
    throw ConfigError("unknown sweep parameter '" + parameter + "' (expected q, m, k, snr_db, distance or N)");
  SweepResult result;
  result.parameter = parameter;
  result.values.assign(values.begin(), values.end());
  const std::size_t per_value = config.seeds.size();
  result.rows.resize(values.size() * per_value);
  parallel_for(result.rows.size(), config.jobs, [&](std::size_t i) {
    const double v = values[i / per_value];
    const auto seed = config.seeds[i % per_value];
    SessionRecord rec;
    try {
      rec = run_session(apply_parameter(config, parameter, v), seed);
    } catch (const ConfigError& e) {
      rec.seed = seed;
      rec.status = SessionStatus::invalid_parameters;
      rec.message = e.what();
    }
    result.rows[i] = to_row(parameter, v, rec);
  });
  result.aggregates = aggregate(result.rows, values);
  return result;
}

std::vector<SweepAggregate> aggregate(std::span<const SweepRow> rows, std::span<const double> values) {
  std::vector<SweepAggregate> out;
  for (double v : values) {
    SweepAggregate a;
    a.value = v;
    std::vector<const SweepRow*> valid;
    for (const auto& r : rows)
      if (r.value == v) {
        ++a.sessions;
        if (r.status != SessionStatus::invalid_parameters) valid.push_back(&r);
      }
    a.valid = valid.size();
    auto stat = [&](auto field) {
      Stat s;
      if (valid.empty()) return s;
      s.min = s.max = field(*valid.front());
      double sum = 0.0;
      for (const auto* r : valid) {
        const double x = field(*r);
        sum += x;
        s.min = std::min(s.min, x);
        s.max = std::max(s.max, x);
      }
      s.mean = sum / static_cast<double>(valid.size());
      return s;
    };
    if (!valid.empty()) {
      a.success_rate =
          static_cast<double>(std::count_if(valid.begin(), valid.end(), [](const SweepRow* r) { return r->key_issued; })) /
          static_cast<double>(valid.size());
    }
    a.bob_bmr = stat([](const SweepRow& r) { return r.bob_bmr; });
    a.eve_bmr = stat([](const SweepRow& r) { return r.eve_bmr; });
    a.sbgr = stat([](const SweepRow& r) { return r.sbgr; });
    a.leaked_bits = stat([](const SweepRow& r) { return static_cast<double>(r.leaked_bits); });
    a.min_entropy = stat([](const SweepRow& r) { return r.min_entropy; });
    out.push_back(a);
  }
  return out;
}

const std::vector<std::string>& sweep_columns() {
  static const std::vector<std::string> cols = {
      "parameter",   "value",    "seed",           "status",      "n_packets",   "k",
      "q",           "m",        "raw_bits",       "leaked_bits", "bob_bmr",     "eve_bmr",
      "eve_bmr_parity", "min_entropy", "secure_bits", "sbgr",     "key_issued",  "parity_requests",
      "time_to_key_s"};
  return cols;
}

const std::vector<std::string>& summary_columns() {
  static const std::vector<std::string> cols = {
      "parameter",     "value",        "sessions",     "valid",         "success_rate",  "bob_bmr_mean",
      "bob_bmr_min",   "bob_bmr_max",  "eve_bmr_mean", "sbgr_mean",     "sbgr_min",      "sbgr_max",
      "leaked_mean",   "leaked_min",   "leaked_max",   "min_entropy_mean", "min_entropy_min", "min_entropy_max"};
  return cols;
}

namespace {

std::string num(double v) {
  std::ostringstream s;
  s << std::setprecision(10) << v;
  return s.str();
}

void header(std::ostream& out, const std::vector<std::string>& cols) {
  for (std::size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << cols[i];
  out << '\n';
}

}  // namespace

void write_sweep_csv(const SweepResult& result, std::ostream& out) {
  header(out, sweep_columns());
  for (const auto& r : result.rows)
    out << r.parameter << ',' << num(r.value) << ',' << r.seed << ',' << to_string(r.status) << ',' << r.n_packets << ','
        << r.k << ',' << r.q << ',' << r.m << ',' << r.raw_bits << ',' << r.leaked_bits << ',' << num(r.bob_bmr) << ','
        << num(r.eve_bmr) << ',' << num(r.eve_bmr_parity) << ',' << num(r.min_entropy) << ',' << num(r.secure_bits)
        << ',' << num(r.sbgr) << ',' << (r.key_issued ? 1 : 0) << ',' << r.parity_requests << ','
        << num(r.time_to_key_s) << '\n';
}

void write_summary_csv(const SweepResult& result, std::ostream& out) {
  header(out, summary_columns());
  for (const auto& a : result.aggregates)
    out << result.parameter << ',' << num(a.value) << ',' << a.sessions << ',' << a.valid << ',' << num(a.success_rate)
        << ',' << num(a.bob_bmr.mean) << ',' << num(a.bob_bmr.min) << ',' << num(a.bob_bmr.max) << ','
        << num(a.eve_bmr.mean) << ',' << num(a.sbgr.mean) << ',' << num(a.sbgr.min) << ',' << num(a.sbgr.max) << ','
        << num(a.leaked_bits.mean) << ',' << num(a.leaked_bits.min) << ',' << num(a.leaked_bits.max) << ','
        << num(a.min_entropy.mean) << ',' << num(a.min_entropy.min) << ',' << num(a.min_entropy.max) << '\n';
}

nlohmann::json to_json(const SweepResult& result) {
  auto stat = [](const Stat& s) { return nlohmann::json{{"mean", s.mean}, {"min", s.min}, {"max", s.max}}; };
  nlohmann::json aggs = nlohmann::json::array();
  for (const auto& a : result.aggregates)
    aggs.push_back({{"value", a.value},
                    {"sessions", a.sessions},
                    {"valid", a.valid},
                    {"success_rate", a.success_rate},
                    {"bob_bmr", stat(a.bob_bmr)},
                    {"eve_bmr", stat(a.eve_bmr)},
                    {"sbgr", stat(a.sbgr)},
                    {"leaked_bits", stat(a.leaked_bits)},
                    {"min_entropy", stat(a.min_entropy)}});
  return {{"parameter", result.parameter}, {"values", result.values}, {"rows", result.rows.size()}, {"aggregates", aggs}};
}

}  // namespace csikey
