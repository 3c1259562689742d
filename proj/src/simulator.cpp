#include "p2pbuf/simulator.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <thread>

#include <boost/math/distributions/students_t.hpp>

#include "p2pbuf/error.hpp"
#include "p2pbuf/meanfield.hpp"

namespace p2pbuf {

void SimConfig::validate() const {
  params.validate();
  if (slots < 1) throw InvalidArgument("slots must be >= 1");
  if (warmup < 0 || warmup >= slots) throw InvalidArgument("warmup must lie in [0, slots)");
  if (replications < 1) throw InvalidArgument("replications must be >= 1");
  if (hybrid_threshold && *hybrid_threshold < 0) throw InvalidArgument("hybrid threshold must be >= 0");
}

void ChurnConfig::validate() const {
  if (total_peers < 2) throw InvalidArgument("churn pool must hold at least 2 peers");
  if (initially_active < 1 || initially_active > total_peers) {
    throw InvalidArgument("initially_active must lie in [1, total_peers]");
  }
  auto prob = [](double p) { return p >= 0.0 && p <= 1.0; };
  if (!prob(deactivate_prob) || !prob(activate_prob)) {
    throw InvalidArgument("churn probabilities must lie in [0, 1]");
  }
}

std::uint32_t SimRng::below(std::uint32_t n) {
  // Lemire's multiply-shift with rejection; exact and portable.
  std::uint64_t x = engine_() >> 32;
  std::uint64_t m = x * n;
  auto low = static_cast<std::uint32_t>(m);
  if (low < n) {
    const std::uint32_t floor = static_cast<std::uint32_t>(-n) % n;
    while (low < floor) {
      x = engine_() >> 32;
      m = x * n;
      low = static_cast<std::uint32_t>(m);
    }
  }
  return static_cast<std::uint32_t>(m >> 32);
}

double SimRng::unit() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

std::uint64_t replication_seed(std::uint64_t base, int replication) {
  // SplitMix64 finalizer over the replication's slot in a Weyl sequence.
  std::uint64_t z = base + 0x9E3779B97F4A7C15ULL * static_cast<std::uint64_t>(replication + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

Swarm::Swarm(int pool, int buffer, PolicyKind kind, int threshold)
    : pool_(pool),
      buffer_(buffer),
      kind_(kind),
      threshold_(threshold),
      words_(static_cast<std::size_t>(bits::words_for(buffer))),
      live_(static_cast<std::size_t>(pool) * words_, 0),
      snap_(live_.size(), 0),
      exchangeable_(words_, 0),
      scratch_(words_, 0),
      slot_in_active_(static_cast<std::size_t>(pool), -1) {
  if (pool < 1) throw InvalidArgument("pool must hold at least one peer");
  if (buffer < 2) throw InvalidArgument("buffer must be >= 2");
  for (int pos = 1; pos < buffer; ++pos) bits::set(exchangeable_, pos);
  active_.reserve(static_cast<std::size_t>(pool));
}

void Swarm::activate(int peer) {
  auto& slot = slot_in_active_[static_cast<std::size_t>(peer)];
  if (slot >= 0) return;
  slot = static_cast<int>(active_.size());
  active_.push_back(peer);
}

void Swarm::deactivate(int peer) {
  auto& slot = slot_in_active_[static_cast<std::size_t>(peer)];
  if (slot < 0) return;
  const int moved = active_.back();
  active_[static_cast<std::size_t>(slot)] = moved;
  slot_in_active_[static_cast<std::size_t>(moved)] = slot;
  active_.pop_back();
  slot = -1;
  std::fill_n(row(live_, peer), words_, 0);
}

bool Swarm::holds(int peer, int position) const {
  if (position < 1 || position > buffer_) return false;
  return bits::test(words(peer), position);
}

std::vector<int> Swarm::holdings(int peer) const {
  std::vector<int> out;
  for (int pos = 1; pos <= buffer_; ++pos) {
    if (holds(peer, pos)) out.push_back(pos);
  }
  return out;
}

void Swarm::set_holdings(int peer, std::span<const int> positions) {
  std::span<std::uint64_t> r(row(live_, peer), words_);
  std::fill(r.begin(), r.end(), 0);
  for (int pos : positions) {
    if (pos < 1 || pos > buffer_) throw InvalidArgument("holding outside [1, buffer]");
    bits::set(r, pos);
  }
}

std::span<const std::uint64_t> Swarm::words(int peer) const { return {row(live_, peer), words_}; }

std::span<const std::uint64_t> Swarm::snapshot_words(int peer) const {
  return {row(snap_, peer), words_};
}

void Swarm::take_snapshot() { std::copy(live_.begin(), live_.end(), snap_.begin()); }

std::optional<int> Swarm::pull(int peer, int target) {
  const std::uint64_t* theirs = row(snap_, target);
  const std::uint64_t* mine = row(snap_, peer);
  for (std::size_t w = 0; w < words_; ++w) {
    scratch_[w] = theirs[w] & ~mine[w] & exchangeable_[w];
  }
  const auto pick = select_from_mask(kind_, scratch_, buffer_, threshold_);
  if (pick) bits::set(std::span<std::uint64_t>(row(live_, peer), words_), *pick);
  return pick;
}

void Swarm::exchange(std::span<const int> targets) {
  if (static_cast<int>(targets.size()) != pool_) throw InvalidArgument("one target per peer required");
  take_snapshot();
  for (int peer = 0; peer < pool_; ++peer) {
    const int target = targets[static_cast<std::size_t>(peer)];
    if (target >= 0 && target != peer) pull(peer, target);
  }
}

void Swarm::advance(int server_peer) {
  const int top_word = buffer_ >> 6;
  const std::uint64_t keep =
      (buffer_ & 63) == 63 ? ~std::uint64_t{0} : (std::uint64_t{1} << ((buffer_ & 63) + 1)) - 1;
  for (int peer : active_) {
    std::uint64_t* r = row(live_, peer);
    for (std::size_t w = words_; w-- > 0;) {
      r[w] = (r[w] << 1) | (w > 0 ? r[w - 1] >> 63 : 0);
    }
    // Clears the played-out chunk, now at m+1 (or shifted off the last word).
    r[top_word] &= keep;
  }
  if (server_peer >= 0) bits::set(std::span<std::uint64_t>(row(live_, server_peer), words_), 1);
}

namespace {

// Per-position population counts accumulated with carry-save bit planes, so
// adding one peer costs a few word operations instead of one per position.
class OccupancyCounter {
 public:
  OccupancyCounter(std::size_t words, int buffer)
      : words_(words), totals_(static_cast<std::size_t>(buffer) + 1, 0) {}

  void add(std::span<const std::uint64_t> row) {
    for (std::size_t w = 0; w < words_; ++w) {
      std::uint64_t carry = row[w];
      for (std::size_t k = 0; carry; ++k) {
        if (k == planes_.size() / words_) planes_.resize(planes_.size() + words_, 0);
        std::uint64_t& plane = planes_[k * words_ + w];
        const std::uint64_t next = plane & carry;
        plane ^= carry;
        carry = next;
      }
    }
  }

  void flush() {
    const std::size_t depth = planes_.size() / words_;
    for (std::size_t k = 0; k < depth; ++k) {
      for (std::size_t w = 0; w < words_; ++w) {
        std::uint64_t& plane = planes_[k * words_ + w];
        for (std::uint64_t v = plane; v; v &= v - 1) {
          const std::size_t pos = w * 64 + static_cast<std::size_t>(std::countr_zero(v));
          if (pos < totals_.size()) totals_[pos] += std::uint64_t{1} << k;
        }
        plane = 0;
      }
    }
  }

  const std::vector<std::uint64_t>& totals() const { return totals_; }

 private:
  std::size_t words_;
  std::vector<std::uint64_t> planes_;
  std::vector<std::uint64_t> totals_;  // index = position
};

struct Tally {
  std::int64_t successes = 0;
  std::int64_t opportunities = 0;
  std::int64_t measured_slots = 0;
  std::int64_t empty_slots = 0;
  std::vector<std::uint64_t> occupancy;
};

Tally run_replication(const SimConfig& config, const ChurnConfig* churn, int threshold,
                      std::uint64_t seed) {
  const int m = config.params.buffer;
  const int pool = churn ? churn->total_peers : config.params.peers;
  const int initially = churn ? churn->initially_active : pool;
  Swarm swarm(pool, m, config.policy.kind(), threshold);
  SimRng rng(seed);

  // Slot from which each peer counts toward the playout statistic.
  std::vector<std::int64_t> counts_from(static_cast<std::size_t>(pool), 0);
  for (int peer = 0; peer < initially; ++peer) swarm.activate(peer);

  const std::size_t words = static_cast<std::size_t>(bits::words_for(m));
  OccupancyCounter counter(words, m);
  Tally tally;

  for (std::int64_t t = 0; t < config.slots; ++t) {
    if (churn) {
      for (int peer = 0; peer < pool; ++peer) {
        if (swarm.is_active(peer)) {
          if (rng.bernoulli(churn->deactivate_prob)) swarm.deactivate(peer);
        } else if (rng.bernoulli(churn->activate_prob)) {
          swarm.activate(peer);
          counts_from[static_cast<std::size_t>(peer)] = t + (churn->startup_latency_is_buffer ? m : 0);
        }
      }
    }

    const auto& active = swarm.active_peers();
    const auto n = static_cast<std::uint32_t>(active.size());
    if (n == 0) {
      ++tally.empty_slots;
      continue;
    }

    swarm.take_snapshot();
    if (t >= config.warmup) {
      ++tally.measured_slots;
      for (int peer : active) {
        if (t < counts_from[static_cast<std::size_t>(peer)]) continue;
        const auto row = swarm.snapshot_words(peer);
        ++tally.opportunities;
        tally.successes += bits::test(row, m) ? 1 : 0;
        counter.add(row);
      }
      counter.flush();
    }

    const int server = active[rng.below(n)];
    if (n > 1) {
      for (std::uint32_t k = 0; k < n; ++k) {
        const int peer = active[k];
        if (peer == server) continue;
        std::uint32_t r = rng.below(n - 1);
        if (r >= k) ++r;
        swarm.pull(peer, active[r]);
      }
    }
    swarm.advance(server);
  }
  tally.occupancy = counter.totals();
  return tally;
}

double t_quantile_975(int dof) {
  boost::math::students_t dist(static_cast<double>(dof));
  return boost::math::quantile(dist, 0.975);
}

SimResult run(const SimConfig& config, const ChurnConfig* churn) {
  config.validate();
  if (churn) churn->validate();

  std::optional<int> threshold = config.hybrid_threshold;
  if (config.policy.kind() == PolicyKind::Hybrid && !threshold) {
    const int peers = churn ? churn->initially_active : config.params.peers;
    threshold = hybrid_context(SystemParams{std::max(peers, 2), config.params.buffer},
                               *config.policy.epsilon())
                    .threshold;
  }
  const int thr = config.policy.kind() == PolicyKind::Hybrid ? *threshold : 0;

  const auto reps = static_cast<std::size_t>(config.replications);
  std::vector<Tally> tallies(reps);
  unsigned workers = config.threads == 0 ? std::max(1u, std::thread::hardware_concurrency())
                                         : config.threads;
  workers = std::min<unsigned>(workers, static_cast<unsigned>(reps));
  auto work = [&](unsigned worker) {
    for (std::size_t r = worker; r < reps; r += workers) {
      tallies[r] = run_replication(config, churn, thr, replication_seed(config.seed, static_cast<int>(r)));
    }
  };
  if (workers <= 1) {
    work(0);
  } else {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work, w);
  }

  SimResult result;
  result.rng_algorithm = kRngAlgorithm;
  if (config.policy.kind() == PolicyKind::Hybrid) result.hybrid_threshold = thr;
  std::int64_t successes = 0;
  std::vector<std::uint64_t> occupancy(static_cast<std::size_t>(config.params.buffer) + 1, 0);
  for (const Tally& t : tallies) {
    successes += t.successes;
    result.playout_opportunities += t.opportunities;
    result.slots_measured += t.measured_slots;
    result.empty_slots += t.empty_slots;
    for (std::size_t i = 0; i < occupancy.size(); ++i) occupancy[i] += t.occupancy[i];
    result.replication_estimates.push_back(
        t.opportunities > 0 ? static_cast<double>(t.successes) / static_cast<double>(t.opportunities) : 0.0);
  }

  const auto opp = static_cast<double>(result.playout_opportunities);
  result.skip_free_prob = opp > 0 ? static_cast<double>(successes) / opp : 0.0;
  result.empirical_profile.resize(static_cast<std::size_t>(config.params.buffer), 0.0);
  if (opp > 0) {
    for (std::size_t i = 0; i < result.empirical_profile.size(); ++i) {
      result.empirical_profile[i] = static_cast<double>(occupancy[i + 1]) / opp;
    }
  }

  if (reps >= 2) {
    double mean = 0.0;
    for (double e : result.replication_estimates) mean += e;
    mean /= static_cast<double>(reps);
    double ss = 0.0;
    for (double e : result.replication_estimates) ss += (e - mean) * (e - mean);
    const double sd = std::sqrt(ss / static_cast<double>(reps - 1));
    result.ci_halfwidth = t_quantile_975(static_cast<int>(reps) - 1) * sd / std::sqrt(static_cast<double>(reps));
  } else if (opp > 0) {
    // Single replication: binomial normal approximation, which ignores the
    // correlation between slots and so understates the spread.
    const double p = result.skip_free_prob;
    result.ci_halfwidth = 1.959963984540054 * std::sqrt(p * (1.0 - p) / opp);
  }
  return result;
}

}  // namespace

SimResult run_fixed(const SimConfig& config) { return run(config, nullptr); }

SimResult run_churn(const SimConfig& config, const ChurnConfig& churn) { return run(config, &churn); }

}  // namespace p2pbuf
