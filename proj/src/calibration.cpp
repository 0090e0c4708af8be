// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cmath>
#include <string>

#include "csikey/error.hpp"
#include "csikey/trace.hpp"

namespace csikey {

std::ptrdiff_t CalibratedTrace::position_of(int index) const {
  auto it = std::find(meta.subcarriers.begin(), meta.subcarriers.end(), index);
  return it == meta.subcarriers.end() ? -1 : it - meta.subcarriers.begin();
}

std::vector<double> CalibratedTrace::column(std::size_t position, std::size_t n) const {
  n = std::min(n, packets.size());
  std::vector<double> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(packets[i].amplitudes[position]);
  return out;
}

CalibratedTrace calibrate(const CsiTrace& trace) {
  CalibratedTrace out;
  out.meta = trace.meta;
  out.packets.reserve(trace.packets.size());
  for (const auto& p : trace.packets) {
    if (!(p.rss > 0.0))
      throw CalibrationError("packet " + std::to_string(p.packet_index) + ": rss must be > 0", p.packet_index);
    double energy = 0.0;
    for (const auto& c : p.csi) energy += std::norm(c);
    if (!(energy > 0.0))
      throw CalibrationError("packet " + std::to_string(p.packet_index) + ": all-zero CSI", p.packet_index);
    const double factor = std::sqrt(p.rss / energy);
    CalibratedPacket cp{p.packet_index, p.timestamp_us, p.rss, {}};
    cp.amplitudes.reserve(p.csi.size());
    for (const auto& c : p.csi) cp.amplitudes.push_back(std::abs(c) * factor);
    out.packets.push_back(std::move(cp));
  }
  return out;
}

CsiTrace scale_csi(CsiTrace trace, double gain) {
  for (auto& p : trace.packets)
    for (auto& c : p.csi) c *= gain;
  return trace;
}

}  // namespace csikey
