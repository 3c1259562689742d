#pragma once

#include <cstdint>
#include <initializer_list>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace p2pbuf {

enum class PolicyKind { RarestFirst, Greedy, Hybrid };

// Chunk-selection policy. The switch probability is carried only by Hybrid.
class PolicySpec {
 public:
  static PolicySpec rarest_first() { return PolicySpec(PolicyKind::RarestFirst, std::nullopt); }
  static PolicySpec greedy() { return PolicySpec(PolicyKind::Greedy, std::nullopt); }
  // Throws InvalidArgument unless 0 < epsilon < 1.
  static PolicySpec hybrid(double epsilon);
  // Accepts "rarest", "greedy" or "hybrid" (the last requires epsilon).
  static PolicySpec parse(std::string_view name, std::optional<double> epsilon);

  PolicyKind kind() const { return kind_; }
  std::optional<double> epsilon() const { return epsilon_; }
  std::string name() const;

  bool operator==(const PolicySpec&) const = default;

 private:
  PolicySpec(PolicyKind kind, std::optional<double> epsilon) : kind_(kind), epsilon_(epsilon) {}

  PolicyKind kind_;
  std::optional<double> epsilon_;
};

// M peers, each with a playout buffer of m positions.
struct SystemParams {
  int peers = 2;
  int buffer = 2;

  // Throws InvalidArgument unless peers >= 2 and buffer >= 2.
  static SystemParams make(int peers, int buffer);
  void validate() const;
};

// Steady-state occupancy p(1..m). Positions are 1-based.
class OccupancyProfile {
 public:
  // Requires a nonempty, nondecreasing sequence of probabilities.
  explicit OccupancyProfile(std::vector<double> probs);

  int size() const { return static_cast<int>(probs_.size()); }
  double at(int position) const;
  double last() const { return probs_.back(); }
  std::span<const double> values() const { return probs_; }

  // Checks the model invariants that need the peer count: p(1) = 1/M and
  // p(i+1) <= 2 p(i). Returns a description of the first violation, if any.
  std::optional<std::string> check_invariants(int peers, double tolerance = 1e-12) const;

 private:
  std::vector<double> probs_;
};

// Bit-level helpers over a little-endian word array where bit i is buffer
// position i. Bit 0 is unused.
namespace bits {

inline int words_for(int buffer) { return buffer / 64 + 1; }

inline bool test(std::span<const std::uint64_t> words, int pos) {
  return (words[static_cast<std::size_t>(pos) >> 6] >> (pos & 63)) & 1u;
}
inline void set(std::span<std::uint64_t> words, int pos) {
  words[static_cast<std::size_t>(pos) >> 6] |= std::uint64_t{1} << (pos & 63);
}

// Lowest / highest set bit within [lo, hi]; nullopt if none.
std::optional<int> lowest_in(std::span<const std::uint64_t> words, int lo, int hi);
std::optional<int> highest_in(std::span<const std::uint64_t> words, int lo, int hi);

}  // namespace bits

// Positions the contacted peer holds and the requester lacks.
class DifferenceSet {
 public:
  DifferenceSet() = default;
  DifferenceSet(std::initializer_list<int> positions);
  explicit DifferenceSet(std::span<const int> positions);

  void insert(int position);
  bool contains(int position) const;
  bool empty() const;
  std::vector<int> positions() const;
  std::span<const std::uint64_t> words() const { return words_; }

 private:
  std::vector<std::uint64_t> words_;
};

// Picks the position to pull. Exchangeable positions are 1..buffer-1.
// RarestFirst takes the smallest, Greedy the largest; Hybrid takes the
// smallest within [1, threshold] and otherwise the largest above threshold.
// Throws InvalidArgument for members outside [1, buffer-1] or a Hybrid call
// without threshold.
std::optional<int> select_chunk(const PolicySpec& policy, const DifferenceSet& diff,
                                int buffer, std::optional<int> threshold);

// Unchecked form used on the simulator's hot path. The mask must already be
// restricted to exchangeable positions.
std::optional<int> select_from_mask(PolicyKind kind, std::span<const std::uint64_t> mask,
                                    int buffer, int threshold) noexcept;

// Smallest position with p(i) > q, or size()+1 when none exists.
int threshold_above(const OccupancyProfile& profile, double q);

// Largest position with p(i) <= q. Throws EmptySet when q < p(1).
int threshold_below(const OccupancyProfile& profile, double q);

}  // namespace p2pbuf
