#include "p2pbuf/sizing.hpp"

#include <algorithm>
#include <map>

#include "p2pbuf/error.hpp"

namespace p2pbuf {

void SizingRequest::validate() const {
  if (peers < 2) throw InvalidArgument("peers must be >= 2");
  if (!(q > 1.0 / peers && q < 1.0)) throw InvalidArgument("target q must lie in (1/M, 1)");
  if (m_max < 2) throw InvalidArgument("m_max must be >= 2");
}

namespace {

struct Probe {
  double achieved;
  double score;
};

class Evaluator {
 public:
  explicit Evaluator(const SizingRequest& request) : request_(request) {}

  const Probe& at(int m) {
    auto it = cache_.find(m);
    if (it != cache_.end()) return it->second;
    ++evaluations_;
    return cache_.emplace(m, evaluate(m)).first->second;
  }

  bool meets(int m) { return at(m).score >= request_.q; }
  int evaluations() const { return evaluations_; }

 private:
  Probe evaluate(int m) const {
    if (const auto* mf = std::get_if<MeanFieldMethod>(&request_.method)) {
      const double p = policy_profile(request_.policy, SystemParams{request_.peers, m}, mf->settings).last();
      return {p, p};
    }
    const auto& sim = std::get<SimulationMethod>(request_.method);
    SimConfig config = sim.base;
    config.params = SystemParams{request_.peers, m};
    config.policy = request_.policy;
    // A template threshold belongs to some other policy or population.
    config.hybrid_threshold.reset();
    const SimResult r = sim.churn ? run_churn(config, *sim.churn) : run_fixed(config);
    return {r.skip_free_prob, r.skip_free_prob - r.ci_halfwidth};
  }

  const SizingRequest& request_;
  std::map<int, Probe> cache_;
  int evaluations_ = 0;
};

std::string method_name(const SizingMethod& method) {
  return std::holds_alternative<MeanFieldMethod>(method) ? "meanfield" : "sim";
}

}  // namespace

SizingResult min_buffer(const SizingRequest& request) {
  request.validate();
  Evaluator eval(request);

  // Bracket by doubling: lo fails (or is below the domain), hi meets.
  int lo = 1;
  int hi = 2;
  while (!eval.meets(hi)) {
    if (hi == request.m_max) {
      throw UnreachableTarget("target " + std::to_string(request.q) + " not reached with m <= " +
                              std::to_string(request.m_max));
    }
    lo = hi;
    hi = std::min(hi * 2, request.m_max);
  }
  while (hi - lo > 1) {
    const int mid = lo + (hi - lo) / 2;
    if (eval.meets(mid)) {
      hi = mid;
    } else {
      lo = mid;
    }
  }

  bool non_monotone = false;
  if (request.verify_monotone && hi > 2) {
    constexpr int kGrid = 8;
    for (int k = 0; k < kGrid && !non_monotone; ++k) {
      const int m = 2 + (hi - 2) * k / kGrid;
      if (m < hi && eval.meets(m)) non_monotone = true;
    }
    if (non_monotone) {
      for (int m = 2; m < hi; ++m) {
        if (eval.meets(m)) {
          hi = m;
          break;
        }
      }
    }
  }

  const Probe& best = eval.at(hi);
  return SizingResult{hi, best.achieved, best.score, eval.evaluations(), non_monotone,
                      method_name(request.method)};
}

std::vector<SweepRow> sweep(const PolicySpec& policy, int peers, const std::vector<double>& q_grid,
                            const SizingMethod& method, int m_max) {
  if (!std::is_sorted(q_grid.begin(), q_grid.end())) {
    throw InvalidArgument("target grid must be sorted ascending");
  }
  std::vector<SweepRow> rows;
  rows.reserve(q_grid.size());
  for (double q : q_grid) {
    SweepRow row;
    row.q = q;
    try {
      SizingRequest request;
      request.policy = policy;
      request.peers = peers;
      request.q = q;
      request.method = method;
      request.m_max = m_max;
      row.result = min_buffer(request);
    } catch (const Error& e) {
      row.error = e.what();
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace p2pbuf
