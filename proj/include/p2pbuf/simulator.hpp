#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "p2pbuf/model.hpp"

namespace p2pbuf {

struct SimConfig {
  SystemParams params;
  PolicySpec policy = PolicySpec::rarest_first();
  std::int64_t slots = 10000;
  std::int64_t warmup = 2500;  // slots excluded from measurement
  std::uint64_t seed = 1;
  int replications = 1;
  // Hybrid switch position. Derived from the mean-field model when unset.
  std::optional<int> hybrid_threshold;
  // Worker threads for replications; 0 means one per hardware thread.
  unsigned threads = 1;

  static std::int64_t default_warmup(std::int64_t slots) { return slots / 4; }
  void validate() const;
};

struct ChurnConfig {
  int total_peers = 20000;
  int initially_active = 10000;
  double deactivate_prob = 0.001;
  double activate_prob = 0.001;
  // When set, a newly active peer is left out of the playout statistic for
  // its first m slots.
  bool startup_latency_is_buffer = true;

  void validate() const;
};

struct SimResult {
  double skip_free_prob = 0.0;
  double ci_halfwidth = 0.0;  // 95%, across replications
  std::vector<double> empirical_profile;
  std::int64_t slots_measured = 0;
  std::int64_t playout_opportunities = 0;
  std::int64_t empty_slots = 0;  // slots skipped because no peer was active
  std::vector<double> replication_estimates;
  std::optional<int> hybrid_threshold;
  std::string rng_algorithm;
};

// Name of the random stream construction, recorded in every result.
inline constexpr const char* kRngAlgorithm =
    "mt19937_64/splitmix64-replication-seeds/lemire-bounded";

// Deterministic 64-bit stream for one replication.
class SimRng {
 public:
  explicit SimRng(std::uint64_t seed) : engine_(seed) {}
  // Uniform on [0, n).
  std::uint32_t below(std::uint32_t n);
  // Uniform on [0, 1).
  double unit();
  bool bernoulli(double p) { return p > 0.0 && unit() < p; }

 private:
  std::mt19937_64 engine_;
};

std::uint64_t replication_seed(std::uint64_t base, int replication);

// Buffer state of a pool of peers plus the per-slot mechanics. Exposed so the
// exchange rules can be driven with chosen targets in tests.
class Swarm {
 public:
  Swarm(int pool, int buffer, PolicyKind kind, int threshold);

  int pool() const { return pool_; }
  int buffer() const { return buffer_; }
  int active_count() const { return static_cast<int>(active_.size()); }
  const std::vector<int>& active_peers() const { return active_; }
  bool is_active(int peer) const { return slot_in_active_[static_cast<std::size_t>(peer)] >= 0; }

  void activate(int peer);
  void deactivate(int peer);  // also empties the buffer

  bool holds(int peer, int position) const;
  std::vector<int> holdings(int peer) const;
  void set_holdings(int peer, std::span<const int> positions);
  std::span<const std::uint64_t> words(int peer) const;

  // Copies every buffer to the beginning-of-slot snapshot.
  void take_snapshot();
  std::span<const std::uint64_t> snapshot_words(int peer) const;
  // One pull by `peer` from `target`, decided on the snapshot and applied to
  // the live state. Returns the pulled position.
  std::optional<int> pull(int peer, int target);
  // Snapshot, then every peer with a target >= 0 pulls from it.
  void exchange(std::span<const int> targets);
  // Shift right by one (position m is played out, position 1 clears), then the
  // server fills position 1 of `server_peer`.
  void advance(int server_peer);

 private:
  std::uint64_t* row(std::vector<std::uint64_t>& v, int peer) {
    return v.data() + static_cast<std::size_t>(peer) * words_;
  }
  const std::uint64_t* row(const std::vector<std::uint64_t>& v, int peer) const {
    return v.data() + static_cast<std::size_t>(peer) * words_;
  }

  int pool_;
  int buffer_;
  PolicyKind kind_;
  int threshold_;
  std::size_t words_;
  std::vector<std::uint64_t> live_;
  std::vector<std::uint64_t> snap_;
  std::vector<std::uint64_t> exchangeable_;  // positions 1..m-1
  std::vector<std::uint64_t> scratch_;
  std::vector<int> active_;
  std::vector<int> slot_in_active_;
};

// Fixed population of params.peers peers.
SimResult run_fixed(const SimConfig& config);

// Pool with activation/deactivation. config.params.peers is ignored in favour
// of churn.total_peers; the hybrid threshold, when not given, is derived for
// churn.initially_active peers.
SimResult run_churn(const SimConfig& config, const ChurnConfig& churn);

}  // namespace p2pbuf
