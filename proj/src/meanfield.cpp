#include "p2pbuf/meanfield.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <string>
#include <vector>

#include "p2pbuf/error.hpp"

namespace p2pbuf {

namespace {

double rarest_step(double x) { return x * (1.0 + (1.0 - x) * (1.0 - x)); }

// Given p(from) in probs[from-1] and a trial endpoint, fill probs[from..m-1]
// using p(j+1) = p(j) + p(j)(1-p(j))(1 - shift - trial + p(j+1)). Each step is
// linear in p(j+1). Values are capped at 1.
void propagate_tail(std::vector<double>& probs, int from, double shift, double trial) {
  const double c = 1.0 - shift - trial;
  for (std::size_t j = static_cast<std::size_t>(from - 1); j + 1 < probs.size(); ++j) {
    const double x = probs[j];
    const double spread = x * (1.0 - x);
    const double denom = 1.0 - spread;
    assert(denom > 0.0);
    probs[j + 1] = std::min((x + c * spread) / denom, 1.0);
  }
}

// Solves for the self-consistent p(m) over the implicit tail starting at
// position `from`. probs must hold p(1..from) already.
void solve_tail(std::vector<double>& probs, int from, double shift, const SolverSettings& settings) {
  const int m = static_cast<int>(probs.size());
  if (from >= m) return;
  // F(P) - P is strictly decreasing in P; F(lo) >= lo and F(1) <= 1.
  double lo = probs[static_cast<std::size_t>(from - 1)];
  double hi = 1.0;
  for (int it = 0; it < settings.max_iterations && hi - lo > 0.0; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    propagate_tail(probs, from, shift, mid);
    if (probs.back() > mid) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  // Not the midpoint: near saturation it can round up to 1, where the map
  // jumps and the tail goes flat.
  propagate_tail(probs, from, shift, lo);
}

double tail_defect(std::span<const double> p, std::size_t j, double shift) {
  const double x = p[j];
  const double s = 1.0 - shift - p.back() + p[j + 1];
  return std::abs(p[j + 1] - x - x * (1.0 - x) * s);
}

double rarest_defect(std::span<const double> p, std::size_t j) {
  return std::abs(p[j + 1] - rarest_step(p[j]));
}

void check_converged(const OccupancyProfile& profile, const PolicySpec& policy, SystemParams params,
                     std::optional<HybridContext> ctx, const SolverSettings& settings) {
  const double r = residual(profile, policy, params, ctx);
  if (!(r <= settings.tolerance)) {
    throw ConvergenceError(policy.name() + " fixed point residual " + std::to_string(r) +
                           " exceeds tolerance after " + std::to_string(settings.max_iterations) +
                           " iterations");
  }
}

}  // namespace

void SolverSettings::validate() const {
  if (!(tolerance > 0.0)) throw InvalidArgument("solver tolerance must be > 0");
  if (max_iterations < 1) throw InvalidArgument("solver max_iterations must be >= 1");
}

OccupancyProfile rarest_first_profile(SystemParams params) {
  params.validate();
  std::vector<double> probs(static_cast<std::size_t>(params.buffer));
  probs[0] = 1.0 / params.peers;
  for (std::size_t i = 1; i < probs.size(); ++i) probs[i] = rarest_step(probs[i - 1]);
  return OccupancyProfile(std::move(probs));
}

OccupancyProfile greedy_profile(SystemParams params, const SolverSettings& settings) {
  params.validate();
  settings.validate();
  const double boundary = 1.0 / params.peers;
  std::vector<double> probs(static_cast<std::size_t>(params.buffer));
  probs[0] = boundary;
  if (params.buffer == 2) {
    // p(m) and p(i+1) coincide, so s(1) = 1 - 1/M with no fixed point.
    probs[1] = boundary + boundary * (1.0 - boundary) * (1.0 - boundary);
    return OccupancyProfile(std::move(probs));
  }
  solve_tail(probs, 1, boundary, settings);
  OccupancyProfile profile(std::move(probs));
  check_converged(profile, PolicySpec::greedy(), params, std::nullopt, settings);
  return profile;
}

HybridContext hybrid_context(SystemParams params, double epsilon) {
  if (params.peers < 2) throw InvalidArgument("peers must be >= 2");
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw InvalidArgument("hybrid epsilon must lie in (0, 1)");
  const double cap = 10.0 * (std::log2(static_cast<double>(params.peers)) + 1.0 / (1.0 - epsilon));
  double p = 1.0 / params.peers;
  int position = 1;
  while (p <= epsilon) {
    if (position > cap) throw ConvergenceError("rarest-first recursion did not exceed epsilon");
    p = rarest_step(p);
    ++position;
  }
  return HybridContext{position, rarest_step(p)};
}

OccupancyProfile hybrid_profile(SystemParams params, double epsilon, const SolverSettings& settings) {
  params.validate();
  settings.validate();
  const HybridContext ctx = hybrid_context(params, epsilon);
  if (ctx.threshold >= params.buffer - 1) return rarest_first_profile(params);

  std::vector<double> probs(static_cast<std::size_t>(params.buffer));
  probs[0] = 1.0 / params.peers;
  for (int i = 1; i <= ctx.threshold; ++i) {
    probs[static_cast<std::size_t>(i)] = rarest_step(probs[static_cast<std::size_t>(i - 1)]);
  }
  // probs[threshold] now holds p(threshold + 1) = a.
  solve_tail(probs, ctx.threshold + 1, ctx.a, settings);
  OccupancyProfile profile(std::move(probs));
  check_converged(profile, PolicySpec::hybrid(epsilon), params, ctx, settings);
  return profile;
}

OccupancyProfile policy_profile(const PolicySpec& policy, SystemParams params,
                                const SolverSettings& settings) {
  switch (policy.kind()) {
    case PolicyKind::RarestFirst: return rarest_first_profile(params);
    case PolicyKind::Greedy: return greedy_profile(params, settings);
    case PolicyKind::Hybrid: return hybrid_profile(params, *policy.epsilon(), settings);
  }
  throw InvalidArgument("unknown policy");
}

double residual(const OccupancyProfile& profile, const PolicySpec& policy, SystemParams params,
                std::optional<HybridContext> ctx) {
  const auto p = profile.values();
  double worst = std::abs(p[0] - 1.0 / params.peers);
  const std::size_t n = p.size();
  switch (policy.kind()) {
    case PolicyKind::RarestFirst:
      for (std::size_t j = 0; j + 1 < n; ++j) worst = std::max(worst, rarest_defect(p, j));
      break;
    case PolicyKind::Greedy:
      for (std::size_t j = 0; j + 1 < n; ++j) {
        worst = std::max(worst, tail_defect(p, j, 1.0 / params.peers));
      }
      break;
    case PolicyKind::Hybrid: {
      if (!ctx) throw InvalidArgument("hybrid residual requires a HybridContext");
      for (std::size_t j = 0; j + 1 < n; ++j) {
        // Index j holds position j+1; positions up to the threshold are rarest-first.
        const bool rarest_part = static_cast<int>(j) + 1 <= ctx->threshold;
        worst = std::max(worst, rarest_part ? rarest_defect(p, j) : tail_defect(p, j, ctx->a));
      }
      break;
    }
  }
  return worst;
}

double greedy_propagated_endpoint(SystemParams params, double trial_pm) {
  params.validate();
  std::vector<double> probs(static_cast<std::size_t>(params.buffer));
  probs[0] = 1.0 / params.peers;
  propagate_tail(probs, 1, 1.0 / params.peers, trial_pm);
  return probs.back();
}

}  // namespace p2pbuf
