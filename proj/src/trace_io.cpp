// SPDX-License-Identifier: Apache-2.0
#include <array>
#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <string_view>

#include "csikey/error.hpp"
#include "csikey/trace.hpp"

namespace csikey {
namespace {

using Kind = TraceParseError::Kind;

constexpr std::string_view kTextMagic = "CSITRACE";
constexpr std::string_view kTextVersion = "v1";
constexpr std::array<char, 8> kBinaryMagic = {'C', 'S', 'I', 'T', 'R', 'C', 'B', '1'};

std::string format_double(double v) {
  std::array<char, 64> buf{};
  auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), end);
}

template <typename T>
bool parse_number(std::string_view s, T& out) {
  if (s.empty()) return false;
  auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && end == s.data() + s.size();
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    auto pos = s.find(sep, start);
    out.push_back(s.substr(start, pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::vector<std::string_view> tokens(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    if (i >= line.size()) break;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
    out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

void check_token(const std::string& s, const char* field) {
  if (s.empty() || s.find_first_of(" \t\r\n") != std::string::npos)
    throw Error(std::string("trace metadata field '") + field + "' must be a non-empty token without whitespace");
}

// Little-endian primitives for the binary form.
template <typename T>
void put(std::ostream& out, T v) {
  static_assert(std::is_trivially_copyable_v<T>);
  std::array<char, sizeof(T)> b{};
  std::memcpy(b.data(), &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(b.begin(), b.end());
  out.write(b.data(), b.size());
}

template <typename T>
T get(std::istream& in, const char* what, std::ptrdiff_t packet = -1) {
  std::array<char, sizeof(T)> b{};
  if (!in.read(b.data(), b.size()))
    throw TraceParseError(packet < 0 ? Kind::malformed_header : Kind::malformed_packet,
                          std::string("binary trace truncated while reading ") + what, packet);
  if constexpr (std::endian::native == std::endian::big) std::reverse(b.begin(), b.end());
  T v;
  std::memcpy(&v, b.data(), sizeof(T));
  return v;
}

void put_string(std::ostream& out, const std::string& s) {
  put<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_string(std::istream& in, const char* what) {
  const auto n = get<std::uint32_t>(in, what);
  if (n > (1u << 16)) throw TraceParseError(Kind::malformed_header, std::string("implausible length for ") + what);
  std::string s(n, '\0');
  if (!in.read(s.data(), n)) throw TraceParseError(Kind::malformed_header, std::string("binary trace truncated in ") + what);
  return s;
}

}  // namespace

void CsiTrace::validate() const {
  if (std::set<int>(meta.subcarriers.begin(), meta.subcarriers.end()).size() != meta.subcarriers.size())
    throw TraceParseError(Kind::duplicate_subcarrier, "duplicate sub-carrier index in trace metadata");
  for (std::size_t i = 0; i < packets.size(); ++i) {
    const auto& p = packets[i];
    if (p.csi.size() != meta.subcarriers.size())
      throw TraceParseError(Kind::shape_mismatch,
                            "packet " + std::to_string(p.packet_index) + " has " + std::to_string(p.csi.size()) +
                                " sub-carriers, expected " + std::to_string(meta.subcarriers.size()),
                            p.packet_index);
    if (i > 0 && p.packet_index <= packets[i - 1].packet_index)
      throw TraceParseError(Kind::non_monotone_index,
                            "packet index " + std::to_string(p.packet_index) + " does not increase", p.packet_index);
  }
}

void write_trace_text(const CsiTrace& trace, std::ostream& out) {
  trace.validate();
  check_token(trace.meta.role, "role");
  check_token(trace.meta.band, "band");
  out << kTextMagic << ' ' << kTextVersion << ' ' << trace.meta.role << ' ' << trace.meta.band << ' '
      << trace.meta.channel << ' ' << format_double(trace.meta.bandwidth_hz) << ' ';
  for (std::size_t i = 0; i < trace.meta.subcarriers.size(); ++i) out << (i ? "," : "") << trace.meta.subcarriers[i];
  out << '\n';
  for (const auto& p : trace.packets) {
    out << p.packet_index << ' ' << format_double(p.timestamp_us) << ' ' << format_double(p.rss) << ' ';
    for (std::size_t i = 0; i < p.csi.size(); ++i)
      out << (i ? ";" : "") << format_double(p.csi[i].real()) << ',' << format_double(p.csi[i].imag());
    out << '\n';
  }
}

CsiTrace read_trace_text(std::istream& in) {
  CsiTrace trace;
  std::string line;
  if (!std::getline(in, line)) throw TraceParseError(Kind::malformed_header, "empty trace: missing header line");
  const auto head = tokens(line);
  if (head.size() < 6 || head.size() > 7 || head[0] != kTextMagic || head[1] != kTextVersion)
    throw TraceParseError(Kind::malformed_header,
                          "header must be 'CSITRACE v1 <role> <band> <channel> <bandwidth_hz> <subcarrier csv>'");
  trace.meta.role = std::string(head[2]);
  trace.meta.band = std::string(head[3]);
  if (!parse_number(head[4], trace.meta.channel)) throw TraceParseError(Kind::malformed_header, "bad channel number");
  if (!parse_number(head[5], trace.meta.bandwidth_hz)) throw TraceParseError(Kind::malformed_header, "bad bandwidth");
  if (head.size() == 7) {
    for (auto tok : split(head[6], ',')) {
      int idx = 0;
      if (!parse_number(tok, idx)) throw TraceParseError(Kind::malformed_header, "bad sub-carrier index '" + std::string(tok) + "'");
      trace.meta.subcarriers.push_back(idx);
    }
  }
  if (std::set<int>(trace.meta.subcarriers.begin(), trace.meta.subcarriers.end()).size() != trace.meta.subcarriers.size())
    throw TraceParseError(Kind::duplicate_subcarrier, "duplicate sub-carrier index in header");

  std::ptrdiff_t ordinal = 0;
  while (std::getline(in, line)) {
    const auto tok = tokens(line);
    if (tok.empty()) continue;
    RawObservation p;
    if (tok.size() != 4 || !parse_number(tok[0], p.packet_index))
      throw TraceParseError(Kind::malformed_packet, "packet line " + std::to_string(ordinal) + " is malformed", ordinal);
    const auto idx = static_cast<std::ptrdiff_t>(p.packet_index);
    if (!parse_number(tok[1], p.timestamp_us) || !parse_number(tok[2], p.rss))
      throw TraceParseError(Kind::malformed_packet, "packet " + std::to_string(idx) + ": bad timestamp or rss", idx);
    for (auto pair : split(tok[3], ';')) {
      auto parts = split(pair, ',');
      double re = 0.0, im = 0.0;
      if (parts.size() != 2 || !parse_number(parts[0], re) || !parse_number(parts[1], im))
        throw TraceParseError(Kind::malformed_packet, "packet " + std::to_string(idx) + ": bad re,im pair", idx);
      p.csi.emplace_back(re, im);
    }
    if (p.csi.size() != trace.meta.subcarriers.size())
      throw TraceParseError(Kind::shape_mismatch,
                            "packet " + std::to_string(idx) + " has " + std::to_string(p.csi.size()) +
                                " sub-carriers, expected " + std::to_string(trace.meta.subcarriers.size()),
                            idx);
    if (!trace.packets.empty() && p.packet_index <= trace.packets.back().packet_index)
      throw TraceParseError(Kind::non_monotone_index, "packet index " + std::to_string(idx) + " does not increase", idx);
    trace.packets.push_back(std::move(p));
    ++ordinal;
  }
  return trace;
}

void write_trace_binary(const CsiTrace& trace, std::ostream& out) {
  trace.validate();
  out.write(kBinaryMagic.data(), kBinaryMagic.size());
  put_string(out, trace.meta.role);
  put_string(out, trace.meta.band);
  put<std::int32_t>(out, trace.meta.channel);
  put<double>(out, trace.meta.bandwidth_hz);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(trace.meta.subcarriers.size()));
  for (int idx : trace.meta.subcarriers) put<std::int32_t>(out, idx);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(trace.packets.size()));
  for (const auto& p : trace.packets) {
    put<std::uint32_t>(out, p.packet_index);
    put<double>(out, p.timestamp_us);
    put<double>(out, p.rss);
    for (const auto& c : p.csi) {
      put<double>(out, c.real());
      put<double>(out, c.imag());
    }
  }
}

CsiTrace read_trace_binary(std::istream& in) {
  std::array<char, 8> magic{};
  if (!in.read(magic.data(), magic.size()) || magic != kBinaryMagic)
    throw TraceParseError(Kind::malformed_header, "not a binary CSI trace (bad magic)");
  CsiTrace trace;
  trace.meta.role = get_string(in, "role");
  trace.meta.band = get_string(in, "band");
  trace.meta.channel = get<std::int32_t>(in, "channel");
  trace.meta.bandwidth_hz = get<double>(in, "bandwidth");
  const auto nsc = get<std::uint32_t>(in, "sub-carrier count");
  if (nsc > 4096) throw TraceParseError(Kind::malformed_header, "implausible sub-carrier count");
  for (std::uint32_t i = 0; i < nsc; ++i) trace.meta.subcarriers.push_back(get<std::int32_t>(in, "sub-carrier index"));
  if (std::set<int>(trace.meta.subcarriers.begin(), trace.meta.subcarriers.end()).size() != nsc)
    throw TraceParseError(Kind::duplicate_subcarrier, "duplicate sub-carrier index in header");
  const auto npk = get<std::uint32_t>(in, "packet count");
  for (std::uint32_t n = 0; n < npk; ++n) {
    RawObservation p;
    p.packet_index = get<std::uint32_t>(in, "packet index", static_cast<std::ptrdiff_t>(n));
    const auto idx = static_cast<std::ptrdiff_t>(p.packet_index);
    if (!trace.packets.empty() && p.packet_index <= trace.packets.back().packet_index)
      throw TraceParseError(Kind::non_monotone_index, "packet index " + std::to_string(idx) + " does not increase", idx);
    p.timestamp_us = get<double>(in, "timestamp", idx);
    p.rss = get<double>(in, "rss", idx);
    p.csi.reserve(nsc);
    for (std::uint32_t i = 0; i < nsc; ++i) {
      const double re = get<double>(in, "csi", idx);
      const double im = get<double>(in, "csi", idx);
      p.csi.emplace_back(re, im);
    }
    trace.packets.push_back(std::move(p));
  }
  if (in.peek() != std::char_traits<char>::eof())
    throw TraceParseError(Kind::malformed_packet, "trailing bytes after the last packet");
  return trace;
}

void save_trace(const CsiTrace& trace, const std::filesystem::path& path, TraceFormat format) {
  std::ofstream out(path, format == TraceFormat::binary ? std::ios::binary : std::ios::out);
  if (!out) throw TraceParseError(Kind::io, "cannot open '" + path.string() + "' for writing");
  if (format == TraceFormat::binary)
    write_trace_binary(trace, out);
  else
    write_trace_text(trace, out);
  if (!out) throw TraceParseError(Kind::io, "write to '" + path.string() + "' failed");
}

CsiTrace load_trace(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw TraceParseError(Kind::io, "cannot open '" + path.string() + "'");
  std::array<char, 8> magic{};
  in.read(magic.data(), magic.size());
  const bool binary = in.gcount() == 8 && magic == kBinaryMagic;
  in.clear();
  in.seekg(0);
  return binary ? read_trace_binary(in) : read_trace_text(in);
}

}  // namespace csikey
