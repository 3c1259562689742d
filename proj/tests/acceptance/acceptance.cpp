// End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
// exits nonzero if any fails. Simulation points take a few minutes in total.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "p2pbuf/bounds.hpp"
#include "p2pbuf/cli.hpp"
#include "p2pbuf/error.hpp"
#include "p2pbuf/fluid.hpp"
#include "p2pbuf/meanfield.hpp"
#include "p2pbuf/model.hpp"
#include "p2pbuf/simulator.hpp"
#include "p2pbuf/sizing.hpp"

using namespace p2pbuf;

namespace {

// Greedy relaxes slowly from empty buffers, so the simulated points run well
// past the minimum horizon.
constexpr std::int64_t kSlots = 20000;
constexpr int kReps = 3;

unsigned worker_threads() { return std::max(1u, std::thread::hardware_concurrency()); }

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    pass = pass && ok;
    if (!detail.empty()) detail += "; ";
    detail += what + (ok ? "" : " [x]");
  }
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

int failures = 0;

void report(const std::string& name, const std::function<Outcome()>& body) {
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o.pass = false;
    o.detail = std::string("threw: ") + e.what();
  }
  if (!o.pass) ++failures;
  std::printf("%s  %s: %s\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str());
  std::fflush(stdout);
}

SimConfig sim_config(PolicySpec policy, int peers, int buffer, std::uint64_t seed) {
  SimConfig c;
  c.params = SystemParams::make(peers, buffer);
  c.policy = policy;
  c.slots = kSlots;
  c.warmup = SimConfig::default_warmup(kSlots);
  c.seed = seed;
  c.replications = kReps;
  c.threads = worker_threads();
  return c;
}

std::string sim_summary(const char* label, const SimResult& r) {
  return std::string(label) + "=" + fmt("%.5f", r.skip_free_prob) + "±" + fmt("%.1e", r.ci_halfwidth);
}

Outcome fixed_population() {
  Outcome o;
  const SimResult h = run_fixed(sim_config(PolicySpec::hybrid(0.5), 10000, 40, 101));
  o.require(h.skip_free_prob >= 0.99, sim_summary("hybrid m=40", h) + " >= 0.99");
  const SimResult r = run_fixed(sim_config(PolicySpec::rarest_first(), 10000, 166, 102));
  o.require(std::abs(r.skip_free_prob - 0.996) <= 0.005, sim_summary("rarest m=166", r) + " in 0.996±0.005");
  const SimResult g = run_fixed(sim_config(PolicySpec::greedy(), 10000, 183, 103));
  o.require(std::abs(g.skip_free_prob - 0.976) <= 0.010, sim_summary("greedy m=183", g) + " in 0.976±0.010");
  return o;
}

Outcome churn_population() {
  Outcome o;
  ChurnConfig churn;
  churn.total_peers = 20000;
  churn.initially_active = 10000;
  churn.deactivate_prob = 0.001;
  churn.activate_prob = 0.001;
  const SimResult r = run_churn(sim_config(PolicySpec::rarest_first(), 10000, 125, 201), churn);
  o.require(std::abs(r.skip_free_prob - 0.99) <= 0.01, sim_summary("rarest m=125", r) + " in 0.99±0.01");
  const SimResult h = run_churn(sim_config(PolicySpec::hybrid(0.5), 10000, 39, 202), churn);
  o.require(h.skip_free_prob >= 0.98, sim_summary("hybrid m=39", h) + " >= 0.98");
  return o;
}

Outcome profile_agreement() {
  SimConfig c = sim_config(PolicySpec::rarest_first(), 1000, 30, 301);
  c.replications = 1;
  const SimResult r = run_fixed(c);
  const auto model = rarest_first_profile(c.params);
  double sup = 0.0;
  for (int i = 1; i <= 30; ++i) {
    sup = std::max(sup, std::abs(r.empirical_profile[static_cast<std::size_t>(i - 1)] - model.at(i)));
  }
  Outcome o;
  o.require(sup <= 0.02, "sup-norm " + fmt("%.4f", sup) + " <= 0.02");
  return o;
}

Outcome fixed_point_residuals() {
  double worst_g = 0.0;
  double worst_h = 0.0;
  for (int peers : {100, 1000, 10000}) {
    for (int m : {10, 50, 200}) {
      const SystemParams params = SystemParams::make(peers, m);
      worst_g = std::max(worst_g, residual(greedy_profile(params), PolicySpec::greedy(), params));
      const HybridContext ctx = hybrid_context(params, 0.5);
      worst_h = std::max(worst_h, residual(hybrid_profile(params, 0.5), PolicySpec::hybrid(0.5), params, ctx));
    }
  }
  Outcome o;
  o.require(worst_g <= 1e-10, "greedy max " + fmt("%.2e", worst_g));
  o.require(worst_h <= 1e-10, "hybrid max " + fmt("%.2e", worst_h));
  return o;
}

Outcome hybrid_sufficiency() {
  Outcome o;
  for (int peers : {1000, 10000}) {
    for (double q : {0.8, 0.9, 0.99}) {
      const int m = static_cast<int>(std::ceil(hybrid_sufficient_size(peers, q)));
      const double eps = hybrid_bound_constants().epsilon;
      const double got = hybrid_profile(SystemParams::make(peers, m), eps).last();
      if (got < q) {
        o.require(false, "M=" + std::to_string(peers) + " q=" + fmt("%g", q) + " m=" + std::to_string(m) +
                             " p(m)=" + fmt("%.5f", got));
      }
    }
  }
  if (o.detail.empty()) o.detail = "p(m) >= q at all 6 points";
  return o;
}

Outcome bound_floors() {
  Outcome o;
  int checked = 0;
  for (int peers : {100, 1000, 10000}) {
    for (double q : {0.6, 0.8, 0.9, 0.95, 0.99, 0.995, 0.999}) {
      const double floor_all = std::ceil(universal_lower_bound(peers, q));
      for (const PolicySpec& policy : {PolicySpec::rarest_first(), PolicySpec::greedy(), PolicySpec::hybrid(0.5)}) {
        SizingRequest req;
        req.policy = policy;
        req.peers = peers;
        req.q = q;
        req.m_max = 40000;
        const int m = min_buffer(req).min_buffer;
        ++checked;
        const std::string at = policy.name() + " M=" + std::to_string(peers) + " q=" + fmt("%g", q) +
                               " m=" + std::to_string(m);
        if (m < floor_all) o.require(false, at + " < universal " + fmt("%g", floor_all));
        if (policy.kind() == PolicyKind::RarestFirst && m < rarest_first_lower_bound(peers, q)) {
          o.require(false, at + " < rarest bound " + fmt("%.2f", rarest_first_lower_bound(peers, q)));
        }
        if (policy.kind() == PolicyKind::Greedy && m < greedy_lower_bound(peers, q)) {
          o.require(false, at + " < greedy bound " + fmt("%.2f", greedy_lower_bound(peers, q)));
        }
      }
    }
  }
  if (o.detail.empty()) o.detail = std::to_string(checked) + " sizing points above their floors";
  return o;
}

Outcome fluid_agreement() {
  double worst = 0.0;
  for (int peers : {100, 10000}) {
    for (double q : {0.6, 0.9, 0.99}) {
      const double exact = rarest_first_fluid_size(peers, q);
      const FluidCurve curve = integrate_fluid(PolicySpec::rarest_first(), peers, exact * 1.2 + 1.0, 1e-3);
      const auto crossing = curve.crossing(q);
      if (!crossing) return Outcome{false, "curve never reaches q"};
      worst = std::max(worst, std::abs(*crossing - exact) / exact);
    }
  }
  Outcome o;
  o.require(worst <= 1e-4, "max relative error " + fmt("%.2e", worst));
  return o;
}

// Reference chunk choice: walk the policy's priority order and take the first
// held position.
std::optional<int> priority_scan(const PolicySpec& policy, const std::vector<int>& diff, int m, int threshold) {
  auto held = [&](int pos) { return std::find(diff.begin(), diff.end(), pos) != diff.end(); };
  std::vector<int> order;
  switch (policy.kind()) {
    case PolicyKind::RarestFirst:
      for (int i = 1; i < m; ++i) order.push_back(i);
      break;
    case PolicyKind::Greedy:
      for (int i = m - 1; i >= 1; --i) order.push_back(i);
      break;
    case PolicyKind::Hybrid:
      for (int i = 1; i <= std::min(threshold, m - 1); ++i) order.push_back(i);
      for (int i = m - 1; i > threshold; --i) order.push_back(i);
      break;
  }
  for (int pos : order) {
    if (held(pos)) return pos;
  }
  return std::nullopt;
}

int linear_scan(const PolicySpec& policy, int peers, double q, int m_max) {
  for (int m = 2; m <= m_max; ++m) {
    if (policy_profile(policy, SystemParams::make(peers, m)).last() >= q) return m;
  }
  return -1;
}

std::string cli_stdout(const std::vector<std::string>& args) {
  std::ostringstream out;
  std::ostringstream err;
  const int status = cli::run(args, out, err);
  return std::to_string(status) + "\n" + out.str();
}

Outcome property_suites() {
  Outcome o;
  std::mt19937_64 gen(8);
  auto uniform = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(gen); };

  int bad_profiles = 0;
  for (int trial = 0; trial < 300; ++trial) {
    const SystemParams params = SystemParams::make(uniform(2, 100000), uniform(2, 400));
    const double eps = std::uniform_real_distribution<double>(0.05, 0.95)(gen);
    const PolicySpec policies[] = {PolicySpec::rarest_first(), PolicySpec::greedy(), PolicySpec::hybrid(eps)};
    const PolicySpec& policy = policies[trial % 3];
    const auto profile = policy_profile(policy, params);
    if (profile.check_invariants(params.peers, 1e-9)) ++bad_profiles;
  }
  o.require(bad_profiles == 0, "profile invariants " + std::to_string(300 - bad_profiles) + "/300");

  int bad_select = 0;
  for (int trial = 0; trial < 5000; ++trial) {
    const int m = uniform(2, 200);
    std::vector<int> diff;
    const double density = std::uniform_real_distribution<double>(0.0, 0.5)(gen);
    for (int pos = 1; pos < m; ++pos) {
      if (std::bernoulli_distribution(density)(gen)) diff.push_back(pos);
    }
    const int threshold = uniform(0, m);
    const PolicySpec policies[] = {PolicySpec::rarest_first(), PolicySpec::greedy(), PolicySpec::hybrid(0.5)};
    const PolicySpec& policy = policies[trial % 3];
    const std::optional<int> thr = policy.kind() == PolicyKind::Hybrid ? std::optional<int>(threshold) : std::nullopt;
    if (select_chunk(policy, DifferenceSet(std::span<const int>(diff)), m, thr) !=
        priority_scan(policy, diff, m, threshold)) {
      ++bad_select;
    }
  }
  o.require(bad_select == 0, "select_chunk vs scan " + std::to_string(5000 - bad_select) + "/5000");

  int bad_search = 0;
  int searched = 0;
  for (int peers : {5, 20, 100, 400}) {
    for (const PolicySpec& policy : {PolicySpec::rarest_first(), PolicySpec::greedy(), PolicySpec::hybrid(0.5)}) {
      for (double q : {0.3, 0.6, 0.9, 0.97}) {
        if (q <= 1.0 / peers) continue;
        SizingRequest req;
        req.policy = policy;
        req.peers = peers;
        req.q = q;
        req.m_max = 150;
        req.verify_monotone = false;
        ++searched;
        if (min_buffer(req).min_buffer != linear_scan(policy, peers, q, 150)) ++bad_search;
      }
    }
  }
  o.require(bad_search == 0, "binary search vs linear " + std::to_string(searched - bad_search) + "/" +
                                 std::to_string(searched));

  SimConfig c = sim_config(PolicySpec::hybrid(0.5), 500, 24, 77);
  c.slots = 1500;
  c.warmup = 300;
  c.replications = 4;
  c.threads = 1;
  const SimResult serial = run_fixed(c);
  c.threads = 4;
  const SimResult parallel = run_fixed(c);
  const bool same_sim = serial.replication_estimates == parallel.replication_estimates &&
                        serial.empirical_profile == parallel.empirical_profile &&
                        serial.skip_free_prob == parallel.skip_free_prob;
  const std::vector<std::string> base{"--seed", "5", "--reps", "3", "simulate", "--policy", "rarest",
                                      "--peers", "300", "--buffer", "16", "--slots", "800"};
  auto with_threads = [&](const char* n) {
    std::vector<std::string> a{"--threads", n};
    a.insert(a.end(), base.begin(), base.end());
    return cli_stdout(a);
  };
  const bool same_cli = with_threads("1") == with_threads("3");
  o.require(same_sim && same_cli, "seeded output identical for 1 and many threads");
  return o;
}

std::vector<int> mean_field_sizes(const PolicySpec& policy, const std::vector<int>& peers, double q) {
  std::vector<int> out;
  for (int M : peers) {
    SizingRequest req;
    req.policy = policy;
    req.peers = M;
    req.q = q;
    req.m_max = 40000;
    out.push_back(min_buffer(req).min_buffer);
  }
  return out;
}

std::string join(const std::vector<int>& v) {
  std::string s;
  for (int x : v) s += (s.empty() ? "" : ",") + std::to_string(x);
  return s;
}

// Doubling M should add about one position for rarest-first and hybrid.
Outcome slope_in_peers(const PolicySpec& policy) {
  Outcome o;
  std::vector<int> peers;
  for (int k = 0; k < 8; ++k) peers.push_back(1000 << k);
  for (double q : {0.9, 0.99}) {
    const auto m = mean_field_sizes(policy, peers, q);
    bool ok = true;
    for (std::size_t k = 1; k < m.size(); ++k) ok = ok && std::abs(m[k] - m[k - 1] - 1.0) <= 0.5;
    o.require(ok, "q=" + fmt("%g", q) + " m=[" + join(m) + "]");
  }
  return o;
}

// Halving 1-q: rarest-first roughly doubles its excess (1/(1-q) growth), hybrid
// adds a near constant (log 1/(1-q) growth).
Outcome slope_in_target() {
  Outcome o;
  std::vector<int> r;
  std::vector<int> h;
  for (int k = 5; k <= 10; ++k) {
    const double q = 1.0 - std::ldexp(1.0, -k);
    r.push_back(mean_field_sizes(PolicySpec::rarest_first(), {10000}, q)[0]);
    h.push_back(mean_field_sizes(PolicySpec::hybrid(0.5), {10000}, q)[0]);
  }
  bool rarest_ok = true;
  bool hybrid_ok = true;
  for (std::size_t k = 2; k < r.size(); ++k) {
    const double rr = double(r[k] - r[k - 1]) / (r[k - 1] - r[k - 2]);
    const double hr = double(h[k] - h[k - 1]) / (h[k - 1] - h[k - 2]);
    rarest_ok = rarest_ok && std::abs(rr - 2.0) <= 0.5;
    hybrid_ok = hybrid_ok && std::abs(hr - 1.0) <= 0.5;
  }
  o.require(rarest_ok, "rarest m=[" + join(r) + "] increments double");
  o.require(hybrid_ok, "hybrid m=[" + join(h) + "] increments steady");
  return o;
}

}  // namespace

int main() {
  report("1 fixed population, M=10000", fixed_population);
  report("2 churn, pool 20000", churn_population);
  report("3 profile agreement, M=1000 m=30", profile_agreement);
  report("4 fixed-point residuals", fixed_point_residuals);
  report("5 hybrid sufficient size", hybrid_sufficiency);
  report("6 bound floors", bound_floors);
  report("7 fluid closed form vs integrator", fluid_agreement);
  report("8 property suites", property_suites);
  report("slope rarest-first vs log2 M", [] { return slope_in_peers(PolicySpec::rarest_first()); });
  report("slope hybrid vs log2 M", [] { return slope_in_peers(PolicySpec::hybrid(0.5)); });
  report("slope vs 1/(1-q)", slope_in_target);
  std::printf("%s\n", failures == 0 ? "ALL PASS" : (std::to_string(failures) + " FAILED").c_str());
  return failures == 0 ? 0 : 1;
}
