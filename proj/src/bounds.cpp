#include "p2pbuf/bounds.hpp"

#include <cmath>
#include <numbers>

#include "p2pbuf/error.hpp"

namespace p2pbuf {

namespace {

void require_peers(int peers) {
  if (peers < 2) throw InvalidArgument("peers must be >= 2");
}

double log2_1p(double x) { return std::log1p(x) / std::numbers::ln2; }

}  // namespace

double universal_lower_bound(int peers, double q) {
  require_peers(peers);
  if (!(q >= 1.0 / peers && q <= 1.0)) throw InvalidArgument("q must lie in [1/M, 1]");
  return std::log2(static_cast<double>(peers)) + std::log2(q);
}

double rarest_first_lower_bound(int peers, double q) {
  require_peers(peers);
  if (!(q > 0.5 && q < 1.0)) throw InvalidArgument("rarest-first bound needs 0.5 < q < 1");
  const double base = 2.0 * q - 1.0;
  // log1p keeps the denominator accurate as q approaches 1.
  const double gap = 2.0 - 2.0 * q;
  return std::log2(static_cast<double>(peers)) + std::log2(base) +
         (std::log2(q) - std::log2(base)) / log2_1p(gap * gap) - 1.0;
}

double greedy_lower_bound(int peers, double q) {
  require_peers(peers);
  if (!(q >= 1.0 / peers && q < 1.0)) throw InvalidArgument("greedy bound needs 1/M <= q < 1");
  return std::log2(static_cast<double>(peers)) + std::log2(q) - 1.0 +
         1.0 / log2_1p(1.0 - q + 2.0 / peers);
}

HybridBoundConstants hybrid_bound_constants() {
  HybridBoundConstants c;
  c.epsilon1 = c.epsilon * (1.0 + (1.0 - c.epsilon) * (1.0 - c.epsilon));
  c.epsilon2 = c.epsilon1 * (1.0 + (1.0 - c.epsilon1) * (1.0 - c.epsilon1));
  c.alpha = c.epsilon * (1.0 - c.delta);
  return c;
}

double hybrid_sufficient_size(int peers, double q) {
  require_peers(peers);
  if (!(q >= 0.8 && q < 1.0)) throw InvalidArgument("hybrid bound needs 0.8 <= q < 1");
  const HybridBoundConstants c = hybrid_bound_constants();
  const double gap = 1.0 - c.epsilon2 - q + c.delta;
  if (!(gap > 0.0 && gap < 1.0)) throw InvalidArgument("1 - eps2 - q + delta must lie in (0, 1)");

  const double tail = std::log2((1.0 - c.delta) / (1.0 - q)) / -log2_1p(-c.delta * gap);
  const double middle = std::log2(c.delta / (1.0 - q)) / -log2_1p(-c.alpha);
  const double head = std::log2(2.0 * peers * c.epsilon) /
                      std::log2(1.0 + (1.0 - c.epsilon) * (1.0 - c.epsilon));
  return tail + 2.0 + middle + head;
}

BoundReport bound_report(int peers, double q) {
  BoundReport r;
  r.peers = peers;
  r.q = q;
  if (!(q < 1.0)) throw InvalidArgument("q must be < 1");
  r.universal_lower = universal_lower_bound(peers, q);
  if (q > 0.5) r.rarest_lower = rarest_first_lower_bound(peers, q);
  r.greedy_lower = greedy_lower_bound(peers, q);
  if (q >= 0.8) r.hybrid_sufficient = hybrid_sufficient_size(peers, q);
  return r;
}

}  // namespace p2pbuf
