// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "csikey/agreement.hpp"

namespace csikey {

enum class Mode { simulate, replay };

struct ReplayPaths {
  std::filesystem::path alice;
  std::filesystem::path bob;
  std::filesystem::path eve_a;
  std::filesystem::path eve_b;
};

/// Distance in metres -> link SNR in dB, interpolated linearly in log-distance.
using DistanceTable = std::vector<std::pair<double, double>>;
DistanceTable default_distance_table();
double distance_to_snr(const DistanceTable& table, double meters);

struct ExperimentConfig {
  Mode mode = Mode::simulate;
  ChannelModelParams channel;
  std::optional<ReplayPaths> replay;
  ExtractionParams extraction;
  /// When false, main sub-carriers are re-spread whenever a row's (k, m) makes the configured set invalid.
  bool fixed_subcarriers = false;
  CascadeConfig cascade;
  unsigned key_bits = 256;
  Transport transport = Transport::in_process;
  TimingModel timing;
  SyncOptions sync;
  std::vector<std::uint64_t> seeds = {1};
  DistanceTable distance_table = default_distance_table();
  std::filesystem::path output_dir = "results";
  /// Worker threads for seed fan-out; 0 picks the hardware concurrency.
  unsigned jobs = 0;

  /// Throws ConfigError.
  void validate() const;
};

/// CSIKEY_OUT_DIR overrides the configured directory.
std::filesystem::path resolve_output_dir(const ExperimentConfig& config);

struct SessionRecord {
  std::uint64_t seed = 0;
  SessionStatus status = SessionStatus::invalid_parameters;
  std::string message;
  ExtractionParams extraction;
  std::optional<KeyReport> alice;
  std::optional<KeyReport> bob;
  std::optional<EveResult> eve;
  Transcript transcript;
  std::size_t sync_transmissions = 0;
  std::size_t sync_retrials = 0;

  bool key_issued() const { return alice && alice->key.has_value(); }
};

/// One full session for one seed. Configuration problems come back as invalid_parameters.
SessionRecord run_session(const ExperimentConfig& config, std::uint64_t seed);

/// All seeds; seeds run in parallel and come back in seed order.
std::vector<SessionRecord> run_sessions(const ExperimentConfig& config);

nlohmann::json to_json(const KeyReport& report);
nlohmann::json to_json(const SessionRecord& record);

/// Writes session_<seed>.json and transcript_<seed>.bin per record into `dir`.
void write_session_files(const std::vector<SessionRecord>& records, const std::filesystem::path& dir);

inline constexpr const char* kSweepParameters[] = {"q", "m", "k", "snr_db", "distance", "N"};

/// Applies one swept value to a copy of the configuration. Throws ConfigError for unknown names.
ExperimentConfig apply_parameter(ExperimentConfig config, const std::string& parameter, double value);

struct SweepRow {
  std::string parameter;
  double value = 0.0;
  std::uint64_t seed = 0;
  SessionStatus status = SessionStatus::invalid_parameters;
  std::size_t n_packets = 0;
  std::size_t k = 0;
  unsigned q = 0;
  unsigned m = 0;
  std::size_t raw_bits = 0;
  std::size_t leaked_bits = 0;
  double bob_bmr = 0.0;
  double eve_bmr = 0.0;
  double eve_bmr_parity = 0.0;
  double min_entropy = 0.0;
  double secure_bits = 0.0;
  double sbgr = 0.0;
  bool key_issued = false;
  std::size_t parity_requests = 0;
  double time_to_key_s = 0.0;
};

struct Stat {
  double mean = 0.0;
  double min = 0.0;
  double max = 0.0;
};

struct SweepAggregate {
  double value = 0.0;
  std::size_t sessions = 0;
  /// Sessions with parameters that could run at all.
  std::size_t valid = 0;
  double success_rate = 0.0;
  Stat bob_bmr;
  Stat eve_bmr;
  Stat sbgr;
  Stat leaked_bits;
  Stat min_entropy;
};

struct SweepResult {
  std::string parameter;
  std::vector<double> values;
  std::vector<SweepRow> rows;
  std::vector<SweepAggregate> aggregates;
};

SweepRow to_row(const std::string& parameter, double value, const SessionRecord& record);

/// Runs every (value, seed) pair. Throws ConfigError for an unknown parameter.
SweepResult sweep(const ExperimentConfig& config, const std::string& parameter, std::span<const double> values);

/// Aggregates over valid rows only; recomputable from the rows alone.
std::vector<SweepAggregate> aggregate(std::span<const SweepRow> rows, std::span<const double> values);

const std::vector<std::string>& sweep_columns();
const std::vector<std::string>& summary_columns();
void write_sweep_csv(const SweepResult& result, std::ostream& out);
void write_summary_csv(const SweepResult& result, std::ostream& out);
nlohmann::json to_json(const SweepResult& result);

}  // namespace csikey
