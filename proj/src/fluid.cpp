#include "p2pbuf/fluid.hpp"

#include <algorithm>
#include <cmath>

#include "p2pbuf/error.hpp"

namespace p2pbuf {

namespace {

void require_open_target(int peers, double q) {
  if (peers < 2) throw InvalidArgument("peers must be >= 2");
  const double boundary = 1.0 / peers;
  if (!(q > boundary && q < 1.0)) throw InvalidArgument("q must lie in (1/M, 1)");
}

}  // namespace

double rarest_first_fluid_size(int peers, double q) {
  require_open_target(peers, q);
  const double inv = 1.0 / peers;
  return std::log(q * peers) - std::log((1.0 - q) / (1.0 - inv)) + 1.0 / (1.0 - q) -
         1.0 / (1.0 - inv);
}

double greedy_fluid_size_upper(int peers, double q) {
  require_open_target(peers, q);
  const double inv = 1.0 / peers;
  return std::log(q * (1.0 - inv) * peers / (1.0 - q)) / (1.0 - q);
}

double greedy_fluid_size_lower(int peers, double q, double alpha) {
  require_open_target(peers, q);
  const double inv = 1.0 / peers;
  const double alpha_max = (q - inv) / (1.0 - q);
  if (!(alpha > 0.0 && alpha < alpha_max)) {
    throw InvalidArgument("alpha must lie in (0, (q - 1/M)/(1 - q))");
  }
  const double rise = alpha * (1.0 - q);
  const double c = (1.0 + alpha) * (1.0 - q);
  return (std::log((inv + rise) * peers) + std::log((1.0 - inv) / (1.0 - inv - rise))) / c;
}

std::optional<double> FluidCurve::crossing(double q) const {
  for (std::size_t k = 0; k < samples_.size(); ++k) {
    if (samples_[k].prob >= q) {
      if (k == 0) return samples_[0].position;
      const FluidSample& a = samples_[k - 1];
      const FluidSample& b = samples_[k];
      const double t = (q - a.prob) / (b.prob - a.prob);
      return a.position + t * (b.position - a.position);
    }
  }
  return std::nullopt;
}

FluidCurve integrate_fluid(const PolicySpec& policy, int peers, double i_max, double step,
                           std::optional<double> q_target) {
  if (peers < 2) throw InvalidArgument("peers must be >= 2");
  if (!(step > 0.0)) throw InvalidArgument("step must be > 0");
  if (!(i_max >= 0.0)) throw InvalidArgument("i_max must be >= 0");
  if (policy.kind() == PolicyKind::Hybrid) throw InvalidArgument("no fluid model for the hybrid policy");
  if (policy.kind() == PolicyKind::Greedy) {
    if (!q_target) throw InvalidArgument("greedy fluid drift requires q_target");
    if (!(*q_target > 0.0 && *q_target < 1.0)) throw InvalidArgument("q_target must lie in (0, 1)");
  }

  const double inv = 1.0 / peers;
  const bool greedy = policy.kind() == PolicyKind::Greedy;
  const double offset = greedy ? 1.0 - *q_target - inv : 0.0;
  bool clamped = false;
  auto drift = [&](double p) {
    double s = greedy ? offset + p : 1.0 - p;
    if (s < 0.0) {
      clamped = true;
      s = 0.0;
    }
    return s * p * (1.0 - p);
  };

  const auto steps = static_cast<std::size_t>(std::ceil(i_max / step - 1e-9));
  std::vector<FluidSample> samples;
  samples.reserve(steps + 1);
  double p = inv;
  samples.push_back({0.0, p});
  for (std::size_t k = 1; k <= steps; ++k) {
    const double h = std::min(step, i_max - (k - 1) * step);
    const double k1 = drift(p);
    const double k2 = drift(p + 0.5 * h * k1);
    const double k3 = drift(p + 0.5 * h * k2);
    const double k4 = drift(p + h * k3);
    const double next = p + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    p = std::clamp(next, p, 1.0);
    samples.push_back({std::min(k * step, i_max), p});
  }
  return FluidCurve(std::move(samples), clamped);
}

}  // namespace p2pbuf
