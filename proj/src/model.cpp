#include "p2pbuf/model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <sstream>

#include "p2pbuf/error.hpp"

namespace p2pbuf {

PolicySpec PolicySpec::hybrid(double epsilon) {
  if (!(epsilon > 0.0 && epsilon < 1.0)) {
    throw InvalidArgument("hybrid epsilon must lie in (0, 1)");
  }
  return PolicySpec(PolicyKind::Hybrid, epsilon);
}

PolicySpec PolicySpec::parse(std::string_view name, std::optional<double> epsilon) {
  if (name == "rarest" || name == "rarest-first" || name == "rarest_first") return rarest_first();
  if (name == "greedy") return greedy();
  if (name == "hybrid") {
    if (!epsilon) throw InvalidArgument("hybrid policy requires epsilon");
    return hybrid(*epsilon);
  }
  throw InvalidArgument("unknown policy '" + std::string(name) + "'");
}

std::string PolicySpec::name() const {
  switch (kind_) {
    case PolicyKind::RarestFirst: return "rarest";
    case PolicyKind::Greedy: return "greedy";
    case PolicyKind::Hybrid: return "hybrid";
  }
  return "unknown";
}

SystemParams SystemParams::make(int peers, int buffer) {
  SystemParams p{peers, buffer};
  p.validate();
  return p;
}

void SystemParams::validate() const {
  if (peers < 2) throw InvalidArgument("peers must be >= 2");
  if (buffer < 2) throw InvalidArgument("buffer must be >= 2");
}

OccupancyProfile::OccupancyProfile(std::vector<double> probs) : probs_(std::move(probs)) {
  if (probs_.empty()) throw InvalidArgument("occupancy profile must be nonempty");
  for (std::size_t i = 0; i < probs_.size(); ++i) {
    const double v = probs_[i];
    if (!(v >= 0.0 && v <= 1.0)) throw InvalidArgument("occupancy probability outside [0, 1]");
    if (i > 0 && v < probs_[i - 1]) throw InvalidArgument("occupancy profile must be nondecreasing");
  }
}

double OccupancyProfile::at(int position) const {
  if (position < 1 || position > size()) throw InvalidArgument("profile position out of range");
  return probs_[static_cast<std::size_t>(position - 1)];
}

std::optional<std::string> OccupancyProfile::check_invariants(int peers, double tolerance) const {
  std::ostringstream why;
  const double boundary = 1.0 / peers;
  if (std::abs(probs_.front() - boundary) > tolerance) {
    why << "p(1) = " << probs_.front() << " differs from 1/M = " << boundary;
    return why.str();
  }
  for (std::size_t i = 0; i + 1 < probs_.size(); ++i) {
    if (probs_[i + 1] > 2.0 * probs_[i] + tolerance) {
      why << "doubling bound broken at position " << i + 1;
      return why.str();
    }
  }
  return std::nullopt;
}

namespace bits {

namespace {
// Bits [lo, hi] of word w, where word w covers positions [64w, 64w+63].
std::uint64_t range_mask(int w, int lo, int hi) {
  const int base = w * 64;
  const int from = std::max(lo - base, 0);
  const int to = std::min(hi - base, 63);
  if (from > to) return 0;
  const std::uint64_t upper = to == 63 ? ~std::uint64_t{0} : (std::uint64_t{1} << (to + 1)) - 1;
  const std::uint64_t lower = (std::uint64_t{1} << from) - 1;
  return upper & ~lower;
}
}  // namespace

std::optional<int> lowest_in(std::span<const std::uint64_t> words, int lo, int hi) {
  if (lo > hi) return std::nullopt;
  const int last = std::min(hi >> 6, static_cast<int>(words.size()) - 1);
  for (int w = std::max(lo, 0) >> 6; w <= last; ++w) {
    const std::uint64_t v = words[static_cast<std::size_t>(w)] & range_mask(w, lo, hi);
    if (v) return w * 64 + std::countr_zero(v);
  }
  return std::nullopt;
}

std::optional<int> highest_in(std::span<const std::uint64_t> words, int lo, int hi) {
  if (lo > hi) return std::nullopt;
  const int first = std::max(lo, 0) >> 6;
  for (int w = std::min(hi >> 6, static_cast<int>(words.size()) - 1); w >= first; --w) {
    const std::uint64_t v = words[static_cast<std::size_t>(w)] & range_mask(w, lo, hi);
    if (v) return w * 64 + 63 - std::countl_zero(v);
  }
  return std::nullopt;
}

}  // namespace bits

DifferenceSet::DifferenceSet(std::initializer_list<int> positions) {
  for (int p : positions) insert(p);
}

DifferenceSet::DifferenceSet(std::span<const int> positions) {
  for (int p : positions) insert(p);
}

void DifferenceSet::insert(int position) {
  if (position < 0) throw InvalidArgument("buffer position must be positive");
  const auto need = static_cast<std::size_t>(position / 64 + 1);
  if (words_.size() < need) words_.resize(need, 0);
  bits::set(words_, position);
}

bool DifferenceSet::contains(int position) const {
  if (position < 0 || static_cast<std::size_t>(position / 64) >= words_.size()) return false;
  return bits::test(words_, position);
}

bool DifferenceSet::empty() const {
  return std::all_of(words_.begin(), words_.end(), [](std::uint64_t w) { return w == 0; });
}

std::vector<int> DifferenceSet::positions() const {
  std::vector<int> out;
  for (std::size_t w = 0; w < words_.size(); ++w) {
    for (std::uint64_t v = words_[w]; v; v &= v - 1) {
      out.push_back(static_cast<int>(w * 64) + std::countr_zero(v));
    }
  }
  return out;
}

std::optional<int> select_from_mask(PolicyKind kind, std::span<const std::uint64_t> mask,
                                    int buffer, int threshold) noexcept {
  const int top = buffer - 1;
  switch (kind) {
    case PolicyKind::RarestFirst:
      return bits::lowest_in(mask, 1, top);
    case PolicyKind::Greedy:
      return bits::highest_in(mask, 1, top);
    case PolicyKind::Hybrid:
      if (auto low = bits::lowest_in(mask, 1, std::min(threshold, top))) return low;
      return bits::highest_in(mask, std::max(threshold + 1, 1), top);
  }
  return std::nullopt;
}

std::optional<int> select_chunk(const PolicySpec& policy, const DifferenceSet& diff, int buffer,
                                std::optional<int> threshold) {
  if (buffer < 2) throw InvalidArgument("buffer must be >= 2");
  const auto words = diff.words();
  if (bits::lowest_in(words, 0, 0) || bits::lowest_in(words, buffer, static_cast<int>(words.size()) * 64)) {
    throw InvalidArgument("difference set member outside [1, buffer-1]");
  }
  if (policy.kind() == PolicyKind::Hybrid) {
    if (!threshold) throw InvalidArgument("hybrid selection requires a threshold");
    if (*threshold < 0) throw InvalidArgument("hybrid threshold must be >= 0");
  }
  return select_from_mask(policy.kind(), words, buffer, threshold.value_or(0));
}

int threshold_above(const OccupancyProfile& profile, double q) {
  if (!(q >= 0.0 && q <= 1.0)) throw InvalidArgument("q must lie in [0, 1]");
  const auto v = profile.values();
  const auto it = std::find_if(v.begin(), v.end(), [q](double p) { return p > q; });
  return static_cast<int>(it - v.begin()) + 1;
}

int threshold_below(const OccupancyProfile& profile, double q) {
  if (!(q >= 0.0 && q <= 1.0)) throw InvalidArgument("q must lie in [0, 1]");
  const auto v = profile.values();
  if (q < v.front()) throw EmptySet("no position has occupancy <= q");
  // The profile is nondecreasing, so the qualifying positions form a prefix.
  const auto it = std::upper_bound(v.begin(), v.end(), q);
  return static_cast<int>(it - v.begin());
}

}  // namespace p2pbuf
