// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace csikey {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A parameter set violates one of its invariants.
class ConfigError : public Error {
 public:
  using Error::Error;
};

class TraceParseError : public Error {
 public:
  enum class Kind { malformed_header, malformed_packet, shape_mismatch, non_monotone_index, duplicate_subcarrier, io };

  TraceParseError(Kind kind, std::string what, std::ptrdiff_t packet = -1)
      : Error(std::move(what)), kind_(kind), packet_(packet) {}

  Kind kind() const noexcept { return kind_; }
  /// Packet index (or line-ordinal when the index itself is unreadable); -1 for header errors.
  std::ptrdiff_t packet() const noexcept { return packet_; }

 private:
  Kind kind_;
  std::ptrdiff_t packet_;
};

class CalibrationError : public Error {
 public:
  CalibrationError(std::string what, std::size_t packet) : Error(std::move(what)), packet_(packet) {}
  std::size_t packet() const noexcept { return packet_; }

 private:
  std::size_t packet_;
};

class ExtractionError : public Error {
 public:
  using Error::Error;
};

class SelectionError : public Error {
 public:
  using Error::Error;
};

class EntropyError : public Error {
 public:
  using Error::Error;
};

/// leaked_bits > raw_bits, or N == 0.
class AccountingError : public Error {
 public:
  using Error::Error;
};

/// Peer misbehaviour, oracle inconsistency, malformed frames or transport loss.
class ProtocolError : public Error {
 public:
  using Error::Error;
};

}  // namespace csikey
