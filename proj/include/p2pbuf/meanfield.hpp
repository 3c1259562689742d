#pragma once

#include <optional>

#include "p2pbuf/model.hpp"

namespace p2pbuf {

// Controls the outer fixed point of the greedy and hybrid recursions.
struct SolverSettings {
  double tolerance = 1e-12;
  int max_iterations = 200;

  void validate() const;
};

// Switch point of the hybrid policy: the first position where the rarest-first
// occupancy exceeds epsilon, and the rarest-first occupancy one position later.
struct HybridContext {
  int threshold = 1;
  double a = 0.0;
};

// p(1) = 1/M, p(i+1) = p(i) (1 + (1 - p(i))^2).
OccupancyProfile rarest_first_profile(SystemParams params);

// p(i+1) = p(i) + p(i)(1 - p(i))(1 - 1/M - p(m) + p(i+1)), solved for the
// implicit p(m) by bisection. Throws ConvergenceError if the final residual
// exceeds the tolerance.
OccupancyProfile greedy_profile(SystemParams params, const SolverSettings& settings = {});

// The threshold depends only on M and epsilon (the rarest-first recursion does
// not depend on m), so params.buffer is ignored.
HybridContext hybrid_context(SystemParams params, double epsilon);

// Rarest-first recursion up to and including the threshold, then
// p(j+1) = p(j) + p(j)(1 - p(j))(1 - a - p(m) + p(j+1)) above it.
OccupancyProfile hybrid_profile(SystemParams params, double epsilon,
                                const SolverSettings& settings = {});

// Convenience dispatch over the three policies.
OccupancyProfile policy_profile(const PolicySpec& policy, SystemParams params,
                                const SolverSettings& settings = {});

// Largest absolute defect of the policy's defining recursion over the
// profile. ctx is required for Hybrid and ignored otherwise.
double residual(const OccupancyProfile& profile, const PolicySpec& policy, SystemParams params,
                std::optional<HybridContext> ctx = std::nullopt);

// Propagates the greedy recursion forward for a trial value of p(m) and
// returns the resulting p(m). Nonincreasing in the trial value; exposed for
// testing the solver's bracketing argument.
double greedy_propagated_endpoint(SystemParams params, double trial_pm);

}  // namespace p2pbuf
