#pragma once

#include <optional>

namespace p2pbuf {

// Analytical buffer-size bounds for M peers and skip-free target q.
// Every logarithm in this module is base 2.

// Any policy needs at least log M + log q positions to exceed q.
// Requires 1/M <= q <= 1.
double universal_lower_bound(int peers, double q);

// Necessary buffer size under rarest-first. Requires 0.5 < q < 1.
double rarest_first_lower_bound(int peers, double q);

// Necessary buffer size under greedy. Requires 1/M <= q < 1.
double greedy_lower_bound(int peers, double q);

// Sufficient buffer size for the hybrid policy with epsilon = 0.5 and the
// fixed constants below. Requires 0.8 <= q < 1.
//
// The contraction factor is 1 - delta (1 - eps2 - q + delta). The published
// statement of the result prints "- q - delta" inside that factor; the
// derivation only goes through with "+ delta", which is what is used here.
double hybrid_sufficient_size(int peers, double q);

struct HybridBoundConstants {
  double epsilon = 0.5;
  double delta = 0.8;
  double epsilon1;  // epsilon (1 + (1 - epsilon)^2)
  double epsilon2;  // epsilon1 (1 + (1 - epsilon1)^2)
  double alpha;     // epsilon (1 - delta)
};
HybridBoundConstants hybrid_bound_constants();

struct BoundReport {
  int peers = 0;
  double q = 0.0;
  double universal_lower = 0.0;
  std::optional<double> rarest_lower;       // empty when q <= 0.5
  std::optional<double> greedy_lower;
  std::optional<double> hybrid_sufficient;  // empty when q < 0.8
};

// Evaluates every bound whose hypothesis holds. Requires 1/M <= q < 1.
BoundReport bound_report(int peers, double q);

}  // namespace p2pbuf
