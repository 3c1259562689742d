#pragma once

#include <optional>
#include <vector>

#include "p2pbuf/model.hpp"

namespace p2pbuf {

// Continuous-index approximation dp/di = s(p) p (1 - p), p(0) = 1/M.
// Closed forms here use natural logarithms.

// Buffer length for the rarest-first fluid solution to reach q.
// Requires 1/M < q < 1.
double rarest_first_fluid_size(int peers, double q);

// Upper bound on the greedy fluid buffer length, from the drift floor s >= 1 - q.
double greedy_fluid_size_upper(int peers, double q);

// Lower bound on the greedy fluid buffer length for a free parameter
// alpha in (0, (q - 1/M) / (1 - q)).
double greedy_fluid_size_lower(int peers, double q, double alpha);

struct FluidSample {
  double position;
  double prob;
};

class FluidCurve {
 public:
  FluidCurve(std::vector<FluidSample> samples, bool drift_clamped)
      : samples_(std::move(samples)), drift_clamped_(drift_clamped) {}

  const std::vector<FluidSample>& samples() const { return samples_; }
  // True when the greedy drift went negative somewhere and was held at zero.
  bool drift_clamped() const { return drift_clamped_; }

  // First position where the curve reaches q, linearly interpolated between
  // samples. nullopt if the curve stays below q.
  std::optional<double> crossing(double q) const;

 private:
  std::vector<FluidSample> samples_;
  bool drift_clamped_;
};

// Classical fourth-order Runge-Kutta over [0, i_max] with a fixed step.
// Rarest-first drift: s = (1 - p)^2. Greedy drift: s = 1 - q - 1/M + p, which
// needs q_target. Hybrid has no fluid form and is rejected.
FluidCurve integrate_fluid(const PolicySpec& policy, int peers, double i_max, double step,
                           std::optional<double> q_target = std::nullopt);

}  // namespace p2pbuf
