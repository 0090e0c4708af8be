// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <complex>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace csikey {

/// One received CSI-bearing packet as reported by the radio.
struct RawObservation {
  std::uint32_t packet_index = 0;
  double timestamp_us = 0.0;
  /// Linear received power, measured before AGC.
  double rss = 0.0;
  /// Post-AGC channel estimate, one entry per sub-carrier.
  std::vector<std::complex<double>> csi;

  friend bool operator==(const RawObservation&, const RawObservation&) = default;
};

struct TraceMetadata {
  std::string role = "alice";
  std::string band = "2.4GHz";
  int channel = 6;
  double bandwidth_hz = 20e6;
  /// Signed sub-carrier indices (e.g. -28..-1, 1..28 for HT20).
  std::vector<int> subcarriers;

  friend bool operator==(const TraceMetadata&, const TraceMetadata&) = default;
};

struct CsiTrace {
  TraceMetadata meta;
  std::vector<RawObservation> packets;

  std::size_t size() const noexcept { return packets.size(); }
  /// Same sub-carrier count everywhere, strictly increasing packet indices, no duplicate sub-carriers.
  /// Throws TraceParseError.
  void validate() const;

  friend bool operator==(const CsiTrace&, const CsiTrace&) = default;
};

struct CalibratedPacket {
  std::uint32_t packet_index = 0;
  double timestamp_us = 0.0;
  double rss = 0.0;
  std::vector<double> amplitudes;
};

struct CalibratedTrace {
  TraceMetadata meta;
  std::vector<CalibratedPacket> packets;

  std::size_t size() const noexcept { return packets.size(); }
  /// Position of sub-carrier `index` in meta.subcarriers, or -1.
  std::ptrdiff_t position_of(int index) const;
  /// Amplitude series of one sub-carrier position over the first `n` packets.
  std::vector<double> column(std::size_t position, std::size_t n) const;
};

/// Undo the unknown AGC gain: amplitude_n = |csi_n| * sqrt(rss / sum_m |csi_m|^2).
/// Throws CalibrationError for rss <= 0 or an all-zero packet.
CalibratedTrace calibrate(const CsiTrace& trace);

/// Multiplies every csi entry by g; rss is left alone (it is measured pre-AGC).
CsiTrace scale_csi(CsiTrace trace, double gain);

enum class TraceFormat { text, binary };

void write_trace_text(const CsiTrace& trace, std::ostream& out);
CsiTrace read_trace_text(std::istream& in);

void write_trace_binary(const CsiTrace& trace, std::ostream& out);
CsiTrace read_trace_binary(std::istream& in);

void save_trace(const CsiTrace& trace, const std::filesystem::path& path, TraceFormat format = TraceFormat::text);
/// Detects the binary form by its magic, otherwise parses text.
CsiTrace load_trace(const std::filesystem::path& path);

}  // namespace csikey
