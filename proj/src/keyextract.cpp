// SPDX-License-Identifier: Apache-2.0
#include "csikey/keyextract.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <string>

#include "csikey/error.hpp"

namespace csikey {
namespace {

bool contains(std::span<const int> list, int v) { return std::find(list.begin(), list.end(), v) != list.end(); }

bool window_fits(std::span<const int> available, int center, unsigned m) {
  for (int j = center - static_cast<int>(m); j <= center + static_cast<int>(m); ++j)
    if (!contains(available, j)) return false;
  return true;
}

// Majority-voted symbols of one main sub-carrier for the first n packets.
std::vector<Symbol> voted_column(const CalibratedTrace& trace, int center, unsigned m, unsigned q, std::size_t n) {
  const auto width = 2 * static_cast<std::size_t>(m) + 1;
  std::vector<std::vector<Symbol>> members;
  members.reserve(width);
  for (int j = center - static_cast<int>(m); j <= center + static_cast<int>(m); ++j) {
    const auto pos = trace.position_of(j);
    if (pos < 0) throw ExtractionError("sub-carrier " + std::to_string(j) + " is not in the trace");
    const auto column = trace.column(static_cast<std::size_t>(pos), n);
    const auto levels = compute_levels(column, q);
    std::vector<Symbol> s;
    s.reserve(n);
    for (double v : column) s.push_back(quantize(v, levels));
    members.push_back(std::move(s));
  }
  std::vector<Symbol> out(n);
  std::vector<Symbol> window(width);
  for (std::size_t p = 0; p < n; ++p) {
    for (std::size_t w = 0; w < width; ++w) window[w] = members[w][p];
    out[p] = majority_vote(window, window[m]);
  }
  return out;
}

std::size_t modal_count(std::vector<std::uint64_t> values) {
  std::sort(values.begin(), values.end());
  std::size_t best = 0;
  for (std::size_t i = 0; i < values.size();) {
    std::size_t j = i;
    while (j < values.size() && values[j] == values[i]) ++j;
    best = std::max(best, j - i);
    i = j;
  }
  return best;
}

}  // namespace

void ExtractionParams::validate(std::span<const int> available) const {
  auto fail = [](const std::string& what) { throw ConfigError("extraction parameters: " + what); };
  if (n_packets < 1) fail("N must be >= 1");
  if (k < 1) fail("k must be >= 1");
  if (q < 1 || q > 8) fail("q must be in [1, 8]");
  if (k * q > 64) fail("k*q must not exceed 64");
  if (main_subcarriers.size() != k)
    fail("main_subcarriers has " + std::to_string(main_subcarriers.size()) + " entries, k is " + std::to_string(k));
  for (std::size_t a = 0; a < main_subcarriers.size(); ++a)
    for (std::size_t b = a + 1; b < main_subcarriers.size(); ++b) {
      const auto d = static_cast<long>(std::abs(main_subcarriers[a] - main_subcarriers[b]));
      if (d <= 2 * static_cast<long>(m))
        fail("sub-carriers " + std::to_string(main_subcarriers[a]) + " and " + std::to_string(main_subcarriers[b]) +
             " are " + std::to_string(d) + " apart; m=" + std::to_string(m) + " needs more than 2m");
    }
  if (!available.empty())
    for (int l : main_subcarriers)
      if (!window_fits(available, l, m))
        fail("window " + std::to_string(l - static_cast<int>(m)) + ".." + std::to_string(l + static_cast<int>(m)) +
             " of sub-carrier " + std::to_string(l) + " is not fully present");
}

ExtractionParams ExtractionParams::ht40() {
  ExtractionParams p;
  p.k = 8;
  p.main_subcarriers = {-54, -38, -22, -6, 6, 22, 38, 54};
  return p;
}

std::uint32_t gray_decode(std::uint32_t g) noexcept {
  std::uint32_t b = g;
  for (std::uint32_t s = g >> 1; s != 0; s >>= 1) b ^= s;
  return b;
}

double percentile(std::vector<double> samples, double p) {
  if (samples.empty()) throw ExtractionError("percentile of an empty sample");
  if (!(p >= 0.0 && p <= 1.0)) throw ExtractionError("percentile fraction must be in [0, 1]");
  std::sort(samples.begin(), samples.end());
  const double h = static_cast<double>(samples.size() - 1) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, samples.size() - 1);
  return samples[lo] + (h - static_cast<double>(lo)) * (samples[hi] - samples[lo]);
}

QuantizerLevels compute_levels(std::span<const double> samples, unsigned q) {
  if (q < 1 || q > 15) throw ExtractionError("q must be in [1, 15]");
  const std::size_t bins = std::size_t{1} << q;
  if (samples.size() < bins)
    throw ExtractionError("need at least " + std::to_string(bins) + " samples for q=" + std::to_string(q) + ", got " +
                          std::to_string(samples.size()));
  if (std::any_of(samples.begin(), samples.end(), [](double v) { return std::isnan(v); }))
    throw ExtractionError("NaN amplitude in quantizer training data");
  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());
  QuantizerLevels levels;
  levels.reserve(bins - 1);
  const double last = static_cast<double>(sorted.size() - 1);
  for (std::size_t i = 1; i < bins; ++i) {
    const double h = last * static_cast<double>(i) / static_cast<double>(bins);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    levels.push_back(sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]));
  }
  return levels;
}

std::uint32_t bin_index(double value, const QuantizerLevels& levels) noexcept {
  return static_cast<std::uint32_t>(std::upper_bound(levels.begin(), levels.end(), value) - levels.begin());
}

Symbol quantize(double value, const QuantizerLevels& levels) noexcept {
  return static_cast<Symbol>(gray_encode(bin_index(value, levels)));
}

Symbol majority_vote(std::span<const Symbol> window, Symbol center) {
  if (window.size() % 2 == 0)
    throw ExtractionError("majority window must hold 2m+1 symbols, got " + std::to_string(window.size()));
  std::map<Symbol, std::size_t> counts;
  for (Symbol s : window) ++counts[s];
  std::size_t best = 0;
  for (const auto& [sym, c] : counts) best = std::max(best, c);
  if (auto it = counts.find(center); it != counts.end() && it->second == best) return center;
  for (const auto& [sym, c] : counts)
    if (c == best) return sym;
  return center;
}

std::uint64_t SymbolStream::composite(std::size_t packet) const {
  std::uint64_t v = 0;
  for (std::size_t sc = 0; sc < k; ++sc) v = (v << q) | at(packet, sc);
  return v;
}

std::vector<std::uint64_t> SymbolStream::composites() const {
  std::vector<std::uint64_t> out;
  out.reserve(n_packets);
  for (std::size_t p = 0; p < n_packets; ++p) out.push_back(composite(p));
  return out;
}

Extraction extract(const CalibratedTrace& trace, const ExtractionParams& params) {
  params.validate(trace.meta.subcarriers);
  if (trace.size() < params.n_packets)
    throw ExtractionError("trace has " + std::to_string(trace.size()) + " packets, N is " +
                          std::to_string(params.n_packets));
  const std::size_t n = params.n_packets;
  const std::size_t k = params.k;

  Extraction out;
  out.symbols.n_packets = n;
  out.symbols.k = k;
  out.symbols.q = params.q;
  out.symbols.symbols.resize(n * k);
  for (std::size_t sc = 0; sc < k; ++sc) {
    const auto column = voted_column(trace, params.main_subcarriers[sc], params.m, params.q, n);
    for (std::size_t p = 0; p < n; ++p) out.symbols.symbols[p * k + sc] = column[p];
  }
  for (Symbol s : out.symbols.symbols)
    for (unsigned b = params.q; b-- > 0;) out.bits.push_back((s >> b) & 1u);
  return out;
}

SymbolStream symbols_from_bits(const Bitstream& bits, std::size_t k, unsigned q) {
  const std::size_t per_packet = k * q;
  if (per_packet == 0 || bits.size() % per_packet != 0)
    throw ExtractionError("bitstream length " + std::to_string(bits.size()) + " is not a multiple of k*q");
  SymbolStream s;
  s.n_packets = bits.size() / per_packet;
  s.k = k;
  s.q = q;
  s.symbols.reserve(bits.size() / q);
  for (std::size_t i = 0; i < bits.size(); i += q) {
    Symbol v = 0;
    for (unsigned b = 0; b < q; ++b) v = static_cast<Symbol>((v << 1) | bits[i + b]);
    s.symbols.push_back(v);
  }
  return s;
}

std::uint64_t count_admissible_subsets(std::span<const int> candidates, std::size_t k, int min_spacing) {
  std::vector<int> c(candidates.begin(), candidates.end());
  std::sort(c.begin(), c.end());
  if (k == 0) return 1;
  constexpr auto cap = std::numeric_limits<std::uint64_t>::max();
  // ways[j][i]: subsets of size j+1 whose largest element is c[i].
  std::vector<std::uint64_t> prev(c.size(), 1), cur(c.size());
  for (std::size_t j = 1; j < k; ++j) {
    for (std::size_t i = 0; i < c.size(); ++i) {
      std::uint64_t sum = 0;
      for (std::size_t t = 0; t < i; ++t)
        if (c[i] - c[t] >= min_spacing) sum = (cap - sum < prev[t]) ? cap : sum + prev[t];
      cur[i] = sum;
    }
    std::swap(prev, cur);
  }
  std::uint64_t total = 0;
  for (auto v : prev) total = (cap - total < v) ? cap : total + v;
  return total;
}

SelectionResult select_subcarriers(const CalibratedTrace& training, const SelectionOptions& options) {
  if (options.k < 1) throw SelectionError("k must be >= 1");
  if (options.q < 1 || options.k * options.q > 64) throw SelectionError("k*q must be in [1, 64]");
  const std::size_t n = options.n_packets == 0 ? training.size() : std::min(options.n_packets, training.size());
  if (n == 0) throw SelectionError("training trace is empty");

  std::vector<int> candidates;
  for (int idx : training.meta.subcarriers)
    if (window_fits(training.meta.subcarriers, idx, options.window_margin)) candidates.push_back(idx);
  std::sort(candidates.begin(), candidates.end());

  const auto total = count_admissible_subsets(candidates, options.k, options.min_spacing);
  if (total == 0)
    throw SelectionError("no subset of " + std::to_string(options.k) + " sub-carriers has spacing >= " +
                         std::to_string(options.min_spacing));
  if (total > options.budget)
    throw SelectionError(std::to_string(total) + " admissible subsets exceed the search budget of " +
                         std::to_string(options.budget));

  std::vector<std::vector<Symbol>> columns;
  columns.reserve(candidates.size());
  for (int c : candidates) columns.push_back(voted_column(training, c, options.window_margin, options.q, n));

  SelectionResult result;
  std::size_t best_count = std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> chosen;
  std::vector<std::uint64_t> composite(n);

  // Depth-first enumeration in lexicographic order of index lists.
  auto recurse = [&](auto&& self, std::size_t from) -> void {
    if (chosen.size() == options.k) {
      std::fill(composite.begin(), composite.end(), 0);
      for (auto ci : chosen)
        for (std::size_t p = 0; p < n; ++p) composite[p] = (composite[p] << options.q) | columns[ci][p];
      const auto count = modal_count(composite);
      ++result.subsets_scored;
      if (count < best_count) {
        best_count = count;
        result.subcarriers.clear();
        for (auto ci : chosen) result.subcarriers.push_back(candidates[ci]);
      }
      return;
    }
    for (std::size_t i = from; i < candidates.size(); ++i) {
      if (!chosen.empty() && candidates[i] - candidates[chosen.back()] < options.min_spacing) continue;
      chosen.push_back(i);
      self(self, i + 1);
      chosen.pop_back();
    }
  };
  recurse(recurse, 0);

  result.min_entropy = best_count == n ? 0.0 : -std::log2(static_cast<double>(best_count) / static_cast<double>(n));
  return result;
}

std::vector<int> spread_main_subcarriers(std::span<const int> available, std::size_t k, unsigned m) {
  if (k < 1) throw ConfigError("k must be >= 1");
  std::vector<int> centers;
  for (int idx : available)
    if (window_fits(available, idx, m)) centers.push_back(idx);
  std::sort(centers.begin(), centers.end());
  centers.erase(std::unique(centers.begin(), centers.end()), centers.end());

  auto greedy = [&](int spacing) {
    std::vector<int> picked;
    for (int c : centers) {
      if (picked.empty() || c - picked.back() >= spacing) picked.push_back(c);
      if (picked.size() == k) break;
    }
    return picked;
  };

  const int lo_spacing = 2 * static_cast<int>(m) + 1;
  if (greedy(lo_spacing).size() < k)
    throw ConfigError("cannot place " + std::to_string(k) + " windows of margin " + std::to_string(m) +
                      " without overlap on this sub-carrier set");
  if (k == 1) return greedy(lo_spacing);
  int lo = lo_spacing;
  int hi = centers.back() - centers.front() + 1;
  while (hi - lo > 1) {
    const int mid = lo + (hi - lo) / 2;
    if (greedy(mid).size() == k)
      lo = mid;
    else
      hi = mid;
  }
  return greedy(lo);
}

}  // namespace csikey
