#include <algorithm>
#include <chrono>
#include <fstream>
#include <functional>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "p2pbuf/bounds.hpp"
#include "p2pbuf/cli.hpp"
#include "p2pbuf/error.hpp"
#include "p2pbuf/fluid.hpp"
#include "p2pbuf/meanfield.hpp"
#include "p2pbuf/simulator.hpp"
#include "p2pbuf/sizing.hpp"

namespace p2pbuf::cli {

namespace {

// Raised for argument combinations CLI11 cannot express; exit status 2.
struct UsageError : Error {
  using Error::Error;
};

struct Globals {
  std::uint64_t seed = 1;
  int reps = 1;
  unsigned threads = 1;
  std::string out;
};

struct PolicyArgs {
  std::string policy;
  std::optional<double> epsilon;

  PolicySpec spec() const {
    if (policy == "hybrid" && !epsilon) throw UsageError("--epsilon is required with --policy hybrid");
    return PolicySpec::parse(policy, epsilon);
  }
};

struct SimArgs {
  std::int64_t slots = 10000;
  std::optional<std::int64_t> warmup;
  std::optional<int> threshold;
  std::optional<int> churn_pool;
  std::optional<int> churn_active;
  std::optional<double> churn_rate;
  bool no_startup_latency = false;

  SimConfig config(const Globals& g, SystemParams params, const PolicySpec& policy) const {
    SimConfig c;
    c.params = params;
    c.policy = policy;
    c.slots = slots;
    c.warmup = warmup.value_or(SimConfig::default_warmup(slots));
    c.seed = g.seed;
    c.replications = g.reps;
    c.threads = g.threads;
    c.hybrid_threshold = threshold;
    return c;
  }

  std::optional<ChurnConfig> churn(int peers) const {
    if (!churn_pool && !churn_active && !churn_rate) return std::nullopt;
    ChurnConfig c;
    c.total_peers = churn_pool.value_or(2 * peers);
    c.initially_active = churn_active.value_or(peers);
    c.deactivate_prob = c.activate_prob = churn_rate.value_or(0.001);
    c.startup_latency_is_buffer = !no_startup_latency;
    return c;
  }
};

void add_policy_options(CLI::App* cmd, PolicyArgs& p) {
  cmd->add_option("--policy", p.policy, "Chunk-selection policy")
      ->required()
      ->check(CLI::IsMember({"rarest", "greedy", "hybrid"}));
  cmd->add_option("--epsilon", p.epsilon, "Hybrid switch probability in (0,1)");
}

void add_sim_options(CLI::App* cmd, SimArgs& s) {
  cmd->add_option("--slots", s.slots, "Simulated slots per replication")->check(CLI::PositiveNumber);
  cmd->add_option("--warmup", s.warmup, "Slots excluded from measurement (default: 25% of slots)");
  cmd->add_option("--hybrid-threshold", s.threshold, "Override the hybrid switch position");
  cmd->add_option("--churn-pool", s.churn_pool, "Total peers in the churn pool");
  cmd->add_option("--churn-active", s.churn_active, "Peers active at start");
  cmd->add_option("--churn-rate", s.churn_rate, "Per-slot activation and deactivation probability");
  cmd->add_flag("--no-startup-latency", s.no_startup_latency,
                "Count reactivated peers immediately instead of after m slots");
}

// Output sink: a file named by --out, or the caller's stream.
class Sink {
 public:
  Sink(const std::string& path, std::ostream& fallback) : path_(path), fallback_(fallback) {
    if (!path_.empty()) {
      file_.open(path_, std::ios::binary | std::ios::trunc);
      if (!file_) throw Error("cannot open output file '" + path_ + "'");
    }
  }
  std::ostream& stream() { return path_.empty() ? fallback_ : file_; }
  const std::string& path() const { return path_; }

 private:
  std::string path_;
  std::ostream& fallback_;
  std::ofstream file_;
};

std::string manifest_path(const std::string& out) { return out + ".manifest.json"; }

struct RunRecord {
  std::vector<std::uint64_t> seeds;
  std::vector<std::string> outputs;
  bool uses_rng = false;
};

std::string join_args(const std::vector<std::string>& args) {
  std::string s = "p2pbuf";
  for (const auto& a : args) s += " " + a;
  return s;
}

void write_manifest_comment(std::ostream& os, const Globals& g) {
  if (!g.out.empty()) os << "# manifest: " << manifest_path(g.out) << '\n';
}

int cmd_profile(const Globals& g, const PolicyArgs& pa, int peers, int buffer, double tolerance,
                std::ostream& out, RunRecord& rec) {
  const PolicySpec policy = pa.spec();
  const SystemParams params = SystemParams::make(peers, buffer);
  SolverSettings settings;
  settings.tolerance = tolerance;
  const OccupancyProfile profile = policy_profile(policy, params, settings);
  std::optional<HybridContext> ctx;
  if (policy.kind() == PolicyKind::Hybrid) ctx = hybrid_context(params, *policy.epsilon());
  const double r = residual(profile, policy, params, ctx);

  Sink sink(g.out, out);
  auto& os = sink.stream();
  write_manifest_comment(os, g);
  os << "position,probability\n";
  for (int i = 1; i <= profile.size(); ++i) os << i << ',' << format_real(profile.at(i)) << '\n';
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", r);
  os << "# residual=" << buf << '\n';
  if (!g.out.empty()) rec.outputs.push_back(g.out);
  return 0;
}

int cmd_bounds(const Globals& g, int peers, double q, std::ostream& out, RunRecord& rec) {
  if (peers < 2) throw UsageError("--peers must be >= 2");
  if (!(q < 1.0)) throw UsageError("q must be < 1");
  if (!(q > 0.0)) throw UsageError("q must be > 0");

  struct Row {
    const char* name;
    std::optional<double> value;
  };
  std::vector<Row> rows;
  const bool floor_ok = q >= 1.0 / peers;
  if (floor_ok) {
    const BoundReport r = bound_report(peers, q);
    rows = {{"universal_lower", r.universal_lower},
            {"rarest_first_lower", r.rarest_lower},
            {"greedy_lower", r.greedy_lower},
            {"hybrid_sufficient", r.hybrid_sufficient}};
  } else {
    rows = {{"universal_lower", {}}, {"rarest_first_lower", {}}, {"greedy_lower", {}}, {"hybrid_sufficient", {}}};
  }

  Sink sink(g.out, out);
  auto& os = sink.stream();
  write_manifest_comment(os, g);
  os << "bound,value,applicable\n";
  for (const Row& row : rows) {
    os << row.name << ',' << (row.value ? format_real(*row.value) : "") << ',' << (row.value ? 1 : 0)
       << '\n';
  }
  if (!g.out.empty()) rec.outputs.push_back(g.out);
  return 0;
}

int cmd_simulate(const Globals& g, const PolicyArgs& pa, const SimArgs& sa, int peers, int buffer,
                 std::ostream& out, RunRecord& rec) {
  const PolicySpec policy = pa.spec();
  const SystemParams params = SystemParams::make(peers, buffer);
  const SimConfig config = sa.config(g, params, policy);
  const auto churn = sa.churn(peers);
  const SimResult r = churn ? run_churn(config, *churn) : run_fixed(config);

  rec.uses_rng = true;
  for (int k = 0; k < config.replications; ++k) rec.seeds.push_back(replication_seed(config.seed, k));

  const int population = churn ? churn->total_peers : peers;
  Sink sink(g.out, out);
  auto& os = sink.stream();
  write_manifest_comment(os, g);
  os << "# rng=" << r.rng_algorithm << '\n';
  if (r.hybrid_threshold) os << "# hybrid_threshold=" << *r.hybrid_threshold << '\n';
  if (r.empty_slots > 0) os << "# empty_slots=" << r.empty_slots << '\n';
  os << "policy,M,m,skip_free,ci,slots_measured\n";
  os << policy.name() << ',' << population << ',' << buffer << ',' << format_real(r.skip_free_prob) << ','
     << format_real(r.ci_halfwidth) << ',' << r.slots_measured << '\n';

  std::optional<Sink> profile_sink;
  std::ostream* ps = &os;
  if (!g.out.empty()) {
    profile_sink.emplace(g.out + ".profile.csv", out);
    ps = &profile_sink->stream();
    write_manifest_comment(*ps, g);
    rec.outputs.push_back(g.out);
    rec.outputs.push_back(profile_sink->path());
  } else {
    os << "# empirical profile\n";
  }
  *ps << "position,occupancy\n";
  for (std::size_t i = 0; i < r.empirical_profile.size(); ++i) {
    *ps << i + 1 << ',' << format_real(r.empirical_profile[i]) << '\n';
  }
  return 0;
}

int cmd_sweep(const Globals& g, const PolicyArgs& pa, const SimArgs& sa, int peers,
              const std::string& targets, const std::string& method_name, int m_max,
              std::ostream& out, std::ostream& err, RunRecord& rec) {
  const PolicySpec policy = pa.spec();
  if (peers < 2) throw UsageError("--peers must be >= 2");
  std::vector<double> grid;
  try {
    grid = parse_targets(targets);
  } catch (const InvalidArgument& e) {
    throw UsageError(e.what());
  }
  SizingMethod method = MeanFieldMethod{};
  if (method_name == "sim") {
    SimulationMethod sim;
    sim.base = sa.config(g, SystemParams{peers, 2}, policy);
    sim.churn = sa.churn(peers);
    method = sim;
    rec.uses_rng = true;
    for (int k = 0; k < g.reps; ++k) rec.seeds.push_back(replication_seed(g.seed, k));
  }
  std::sort(grid.begin(), grid.end());
  const auto rows = sweep(policy, peers, grid, method, m_max);

  Sink sink(g.out, out);
  auto& os = sink.stream();
  write_manifest_comment(os, g);
  os << "target_q,min_buffer,achieved,method\n";
  int failures = 0;
  for (const SweepRow& row : rows) {
    os << format_real(row.q) << ',';
    if (row.result) {
      os << row.result->min_buffer << ',' << format_real(row.result->achieved) << ',' << row.result->method;
      if (row.result->non_monotone) os << "+linear-scan";
      os << '\n';
    } else {
      ++failures;
      os << "NA,NA," << method_name << '\n';
      os << "# error at target_q=" << format_real(row.q) << ": " << row.error << '\n';
      err << "sweep: target " << format_real(row.q) << ": " << row.error << '\n';
    }
  }
  if (!g.out.empty()) rec.outputs.push_back(g.out);
  return failures == 0 ? 0 : 1;
}

int cmd_fluid(const Globals& g, int peers, double q, std::optional<double> alpha, double step,
              std::optional<double> i_max, std::optional<std::string> curve_policy, std::ostream& out,
              RunRecord& rec) {
  if (peers < 2) throw UsageError("--peers must be >= 2");
  if (!(q > 1.0 / peers && q < 1.0)) throw UsageError("--target must lie in (1/M, 1)");
  const double alpha_max = (q - 1.0 / peers) / (1.0 - q);
  const double a = alpha.value_or(std::min(1.0, 0.5 * alpha_max));

  const double rarest = rarest_first_fluid_size(peers, q);
  const double upper = greedy_fluid_size_upper(peers, q);
  const double horizon = i_max.value_or(1.5 * std::max(rarest, upper) + 1.0);

  Sink sink(g.out, out);
  auto& os = sink.stream();
  write_manifest_comment(os, g);
  if (curve_policy) {
    const PolicySpec policy = PolicySpec::parse(*curve_policy, std::nullopt);
    const FluidCurve curve = integrate_fluid(policy, peers, horizon, step, q);
    if (curve.drift_clamped()) os << "# greedy drift clamped at zero\n";
    os << "position,probability\n";
    const auto& s = curve.samples();
    const std::size_t stride = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(1.0 / step)));
    for (std::size_t k = 0; k < s.size(); k += stride) {
      os << format_real(s[k].position) << ',' << format_real(s[k].prob) << '\n';
    }
  } else {
    const FluidCurve rc = integrate_fluid(PolicySpec::rarest_first(), peers, horizon, step);
    const FluidCurve gc = integrate_fluid(PolicySpec::greedy(), peers, horizon, step, q);
    os << "quantity,value\n";
    os << "rarest_first_fluid_size," << format_real(rarest) << '\n';
    os << "rarest_first_integrated," << (rc.crossing(q) ? format_real(*rc.crossing(q)) : "NA") << '\n';
    os << "greedy_fluid_size_upper," << format_real(upper) << '\n';
    os << "greedy_integrated," << (gc.crossing(q) ? format_real(*gc.crossing(q)) : "NA") << '\n';
    os << "greedy_fluid_size_lower," << format_real(greedy_fluid_size_lower(peers, q, a)) << '\n';
    os << "alpha," << format_real(a) << '\n';
  }
  if (!g.out.empty()) rec.outputs.push_back(g.out);
  return 0;
}

// Effective configuration minus where results go, so identical runs written
// to different files share a digest.
std::string effective_config(const CLI::App& app) {
  std::istringstream in(app.config_to_str(true, false));
  std::string line;
  std::string kept;
  while (std::getline(in, line)) {
    if (line.rfind("out=", 0) == 0 || line.rfind("config=", 0) == 0) continue;
    kept += line;
    kept += '\n';
  }
  return kept;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  const auto started = std::chrono::steady_clock::now();

  CLI::App app{"Buffer sizing toolkit for mesh-based P2P live streaming"};
  app.set_config("--config", "", "key=value config file; command-line flags take precedence");
  app.require_subcommand(1);
  app.set_version_flag("--version", P2PBUF_VERSION);

  Globals g;
  app.add_option("--seed", g.seed, "Base seed for simulation replications");
  app.add_option("--reps", g.reps, "Simulation replications")->check(CLI::PositiveNumber);
  app.add_option("--threads", g.threads, "Replication worker threads (0: all cores)");
  app.add_option("--out", g.out, "Write CSV here (manifest alongside) instead of stdout");

  PolicyArgs pa;
  SimArgs sa;
  int peers = 0;
  int buffer = 0;
  double q = 0.0;
  double tolerance = 1e-12;
  std::string targets;
  std::string method = "meanfield";
  int m_max = 4096;
  std::optional<double> alpha;
  double step = 1e-3;
  std::optional<double> i_max;
  std::optional<std::string> curve_policy;

  auto* profile = app.add_subcommand("profile", "Mean-field occupancy profile");
  add_policy_options(profile, pa);
  profile->add_option("--peers", peers, "Number of peers M")->required();
  profile->add_option("--buffer", buffer, "Buffer size m")->required();
  profile->add_option("--tolerance", tolerance, "Fixed-point tolerance");

  auto* bounds = app.add_subcommand("bounds", "Analytical buffer-size bounds");
  bounds->add_option("--peers", peers, "Number of peers M")->required();
  bounds->add_option("--target", q, "Skip-free target q")->required();

  auto* simulate = app.add_subcommand("simulate", "Monte Carlo simulation of one configuration");
  add_policy_options(simulate, pa);
  simulate->add_option("--peers", peers, "Number of peers M")->required();
  simulate->add_option("--buffer", buffer, "Buffer size m")->required();
  add_sim_options(simulate, sa);

  auto* sweep_cmd = app.add_subcommand("sweep", "Minimum buffer size over a grid of targets");
  add_policy_options(sweep_cmd, pa);
  sweep_cmd->add_option("--peers", peers, "Number of peers M")->required();
  sweep_cmd->add_option("--targets", targets, "Comma list, or lo:hi:n range")->required();
  sweep_cmd->add_option("--method", method, "meanfield or sim")->check(CLI::IsMember({"meanfield", "sim"}));
  sweep_cmd->add_option("--m-max", m_max, "Search ceiling");
  add_sim_options(sweep_cmd, sa);

  auto* fluid = app.add_subcommand("fluid", "Fluid closed forms and integrator cross-check");
  fluid->add_option("--peers", peers, "Number of peers M")->required();
  fluid->add_option("--target", q, "Target occupancy q")->required();
  fluid->add_option("--alpha", alpha, "Free parameter of the greedy lower bound");
  fluid->add_option("--step", step, "Integrator step")->check(CLI::PositiveNumber);
  fluid->add_option("--i-max", i_max, "Integration horizon");
  fluid->add_option("--curve", curve_policy, "Dump the integrated curve for rarest or greedy")
      ->check(CLI::IsMember({"rarest", "greedy"}));

  for (auto* sub : {profile, bounds, simulate, sweep_cmd, fluid}) sub->fallthrough();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  RunRecord rec;
  int status = 0;
  try {
    if (app.got_subcommand(profile)) {
      status = cmd_profile(g, pa, peers, buffer, tolerance, out, rec);
    } else if (app.got_subcommand(bounds)) {
      status = cmd_bounds(g, peers, q, out, rec);
    } else if (app.got_subcommand(simulate)) {
      status = cmd_simulate(g, pa, sa, peers, buffer, out, rec);
    } else if (app.got_subcommand(sweep_cmd)) {
      status = cmd_sweep(g, pa, sa, peers, targets, method, m_max, out, err, rec);
    } else if (app.got_subcommand(fluid)) {
      status = cmd_fluid(g, peers, q, alpha, step, i_max, curve_policy, out, rec);
    }
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const InvalidArgument& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }

  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  nlohmann::ordered_json manifest;
  manifest["command_line"] = join_args(args);
  manifest["config_digest"] = "fnv1a64:" + digest_hex(effective_config(app));
  manifest["seed"] = g.seed;
  manifest["replication_seeds"] = rec.seeds;
  manifest["rng"] = rec.uses_rng ? kRngAlgorithm : "none";
  manifest["version"] = P2PBUF_VERSION;
  manifest["wall_clock_seconds"] = seconds;
  manifest["outputs"] = rec.outputs;
  manifest["exit_status"] = status;
  if (g.out.empty()) {
    err << manifest.dump() << '\n';
  } else {
    std::ofstream mf(manifest_path(g.out), std::ios::trunc);
    mf << manifest.dump(2) << '\n';
  }
  return status;
}

}  // namespace p2pbuf::cli
