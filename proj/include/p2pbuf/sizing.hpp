#pragma once

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "p2pbuf/meanfield.hpp"
#include "p2pbuf/model.hpp"
#include "p2pbuf/simulator.hpp"

namespace p2pbuf {

struct MeanFieldMethod {
  SolverSettings settings;
};

// Simulation template: the buffer size and policy are overwritten per probe.
struct SimulationMethod {
  SimConfig base;
  std::optional<ChurnConfig> churn;
};

using SizingMethod = std::variant<MeanFieldMethod, SimulationMethod>;

struct SizingRequest {
  PolicySpec policy = PolicySpec::rarest_first();
  int peers = 2;
  double q = 0.5;
  SizingMethod method = MeanFieldMethod{};
  int m_max = 4096;
  // Probe a coarse grid below the answer and fall back to a linear scan if
  // any probe already meets the target.
  bool verify_monotone = true;

  void validate() const;
};

struct SizingResult {
  int min_buffer = 0;
  // p(m) for mean-field; the skip-free estimate for simulation.
  double achieved = 0.0;
  // Value compared with q: p(m), or the lower 95% confidence limit.
  double score = 0.0;
  int evaluations = 0;
  bool non_monotone = false;
  std::string method;
};

// Smallest m <= m_max whose score reaches q. Throws UnreachableTarget when
// even m_max falls short.
SizingResult min_buffer(const SizingRequest& request);

struct SweepRow {
  double q = 0.0;
  std::optional<SizingResult> result;
  std::string error;  // set when result is empty
};

// One min_buffer per target; failures are recorded in the row.
std::vector<SweepRow> sweep(const PolicySpec& policy, int peers, const std::vector<double>& q_grid,
                            const SizingMethod& method, int m_max = 4096);

}  // namespace p2pbuf
