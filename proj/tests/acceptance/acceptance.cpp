// Acceptance checks. Run with a criterion name, or with no argument for all
// of them. Each criterion prints one PASS/FAIL line.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "admmopt/admm.hpp"
#include "admmopt/commands.hpp"
#include "admmopt/gp.hpp"
#include "admmopt/logging.hpp"
#include "admmopt/synthetic.hpp"

using namespace admmopt;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

struct Verdict {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

// ---------------------------------------------------------------------------

Verdict delta_min_exact() {
  const auto t0 = Clock::now();
  Rng rng(20240601);
  std::uniform_real_distribution<double> real(-80.0, 80.0);
  std::uniform_real_distribution<double> rho_d(0.05, 10.0);
  std::uniform_int_distribution<int> lo_d(-40, 40), width_d(0, 49);
  std::size_t mismatches = 0;
  const int instances = 10000;
  for (int k = 0; k < instances; ++k) {
    const std::int64_t lo = lo_d(rng);
    const std::int64_t hi = lo + width_d(rng);
    const SearchSpace space({{"m", {{"a", {}, {{"d", lo, hi}}}}}});
    AdmmState st = initial_state(space, rho_d(rng), {});
    double theta = real(rng);
    st.lambda[0] = real(rng);
    if (k % 10 == 0) theta = std::round(theta - st.lambda[0] / st.rho) + 0.5 - st.lambda[0] / st.rho;

    const double a = theta + st.lambda[0] / st.rho;
    std::int64_t best = lo;
    double best_val = 0.5 * st.rho * (a - static_cast<double>(lo)) * (a - static_cast<double>(lo));
    for (std::int64_t d = lo + 1; d <= hi; ++d) {
      const double v = 0.5 * st.rho * (a - static_cast<double>(d)) * (a - static_cast<double>(d));
      // ties: the documented rule rounds half away from zero
      if (v < best_val || (v == best_val && std::abs(d) > std::abs(best))) {
        best = d;
        best_val = v;
      }
    }
    const std::vector<double> relaxed{theta};
    if (delta_min(space, st, relaxed)[0] != best) ++mismatches;
  }
  const double secs = seconds_since(t0);
  return {mismatches == 0 && secs < 5.0,
          fmt::format("{} instances, {} mismatches, {:.2f} s (limit 5 s)", instances, mismatches, secs)};
}

// ---------------------------------------------------------------------------

double matern_dense(const Eigen::VectorXd& a, const Eigen::VectorXd& b, const KernelParams& p) {
  double r2 = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    const double t = (a(i) - b(i)) / p.length_scales[static_cast<std::size_t>(i)];
    r2 += t * t;
  }
  const double r = std::sqrt(r2);
  return p.amplitude * p.amplitude * (1.0 + std::sqrt(5.0) * r + 5.0 / 3.0 * r2) * std::exp(-std::sqrt(5.0) * r);
}

Verdict gp_oracle() {
  const auto t0 = Clock::now();
  Rng rng(77);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> g(0.0, 1.0);
  double worst = 0.0;
  int jittered = 0;
  for (int model = 0; model < 100; ++model) {
    const auto n = static_cast<Eigen::Index>(1 + std::uniform_int_distribution<int>(0, 49)(rng));
    const auto d = static_cast<Eigen::Index>(1 + std::uniform_int_distribution<int>(0, 4)(rng));
    KernelParams p{0.3 + 2.0 * u(rng), {}};
    for (Eigen::Index j = 0; j < d; ++j) p.length_scales.push_back(0.05 + 1.5 * u(rng));
    const double noise = std::pow(10.0, -3.0 + 2.0 * u(rng));
    Eigen::MatrixXd x(n, d);
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < d; ++j) x(i, j) = u(rng);
      y(i) = g(rng);
    }
    GpModel gp(p, noise);
    gp.set_data(x, y);
    if (gp.effective_noise() != noise) ++jittered;

    Eigen::MatrixXd k(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < n; ++j) k(i, j) = matern_dense(x.row(i), x.row(j), p);
    }
    const Eigen::MatrixXd inv = (k + gp.effective_noise() * Eigen::MatrixXd::Identity(n, n)).inverse();
    for (int q = 0; q < 10; ++q) {
      Eigen::VectorXd at(d);
      for (Eigen::Index j = 0; j < d; ++j) at(j) = u(rng);
      Eigen::VectorXd ks(n);
      for (Eigen::Index i = 0; i < n; ++i) ks(i) = matern_dense(x.row(i), at, p);
      const double mean = ks.dot(inv * y);
      const double var = matern_dense(at, at, p) - ks.dot(inv * ks);
      const std::vector<double> qv(at.data(), at.data() + at.size());
      const Posterior post = gp.posterior(qv);
      worst = std::max({worst, std::abs(post.mean - mean), std::abs(post.variance - var)});
    }
  }
  const double secs = seconds_since(t0);
  return {worst <= 1e-8 && secs < 30.0,
          fmt::format("100 models, max |deviation| {:.3e} (limit 1e-8), {} needed jitter, {:.2f} s", worst, jittered,
                      secs)};
}

// ---------------------------------------------------------------------------

Verdict ei_closed_form() {
  const double at_zero = expected_improvement(0.7, 1.0, 0.7);
  bool ok = std::abs(at_zero - 0.398942) <= 1e-6;
  std::string detail = fmt::format("EI(mean=y+, std=1) = {:.7f}", at_zero);

  Rng rng(31337);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::normal_distribution<double> g(0.0, 1.0);
  int agree = 0;
  double worst_z = 0.0;
  for (int t = 0; t < 10; ++t) {
    const double mean = u(rng), sd = 0.05 + std::abs(u(rng)), best = u(rng);
    const int samples = 1'000'000;
    double sum = 0.0, sum_sq = 0.0;
    for (int k = 0; k < samples; ++k) {
      const double imp = std::max(best - (mean + sd * g(rng)), 0.0);
      sum += imp;
      sum_sq += imp * imp;
    }
    const double mc = sum / samples;
    const double se = std::sqrt(std::max(sum_sq / samples - mc * mc, 0.0) / samples);
    const double z = se > 0.0 ? std::abs(mc - expected_improvement(mean, sd, best)) / se : 0.0;
    worst_z = std::max(worst_z, z);
    if (z <= 3.0) ++agree;
  }
  ok = ok && agree == 10;
  detail += fmt::format("; Monte Carlo agrees within 3 SE on {}/10 triples (worst {:.2f} SE)", agree, worst_z);
  return {ok, detail};
}

// ---------------------------------------------------------------------------

Verdict cmab_identification() {
  const auto t0 = Clock::now();
  const std::vector<std::size_t> counts{3, 3};
  const ZAssignment best{{2, 1}};
  auto loss = [&](const ZAssignment& z) { return z == best ? 0.1 : 0.6; };

  int identified = 0;
  double cmab_at_200 = 0.0, random_at_200 = 0.0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(seed);
    BanditState state(counts, {10.0, 10.0, 0.7});
    RngArmSampler sampler(rng);
    double incumbent = std::numeric_limits<double>::infinity();
    bool found = false;
    for (int round = 1; round <= 500; ++round) {
      const RoundResult r = cmab_round(state, loss, sampler);
      if (r.loss < incumbent) incumbent = r.loss;
      if (incumbent == 0.1) found = true;
      if (round == 200) cmab_at_200 += incumbent;
    }
    if (found) ++identified;

    Rng paired(seed + 1'000'000);
    double rand_inc = std::numeric_limits<double>::infinity();
    for (int round = 1; round <= 200; ++round) rand_inc = std::min(rand_inc, loss(random_z(counts, paired)));
    random_at_200 += rand_inc;
  }
  cmab_at_200 /= 100.0;
  random_at_200 /= 100.0;
  const bool strictly_worse = random_at_200 > cmab_at_200;
  const double secs = seconds_since(t0);
  return {identified >= 90 && strictly_worse && secs < 60.0,
          fmt::format("optimum is incumbent within 500 rounds in {}/100 seeds (need 90); mean incumbent loss at "
                      "round 200: cmab {:.4f}, random {:.4f} (random must be strictly worse); {:.2f} s",
                      identified, cmab_at_200, random_at_200, secs)};
}

// ---------------------------------------------------------------------------

RunResult run_builtin(SyntheticBenchmark& bench, std::uint64_t seed, std::size_t evals, const std::string& z_solver,
                      std::vector<double> epsilons = {}, bool constrained = true) {
  BayesOptSolver theta;
  auto z = make_combinatorial_solver(z_solver);
  AdmmOptions o;
  o.max_evals = evals;
  o.seed = seed;
  o.epsilons = std::move(epsilons);
  o.constrained = constrained;
  return run_admm(bench.space(), bench, theta, *z, o);
}

Verdict end_to_end() {
  const auto t0 = Clock::now();
  auto bench = make_builtin("mixed");
  const CandidateConfig opt = bench->optimum();
  const ActiveSet active = bench->space().active_indices(opt.z);
  int right_z = 0, close = 0, zero_residual = 0, all_three = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const RunResult r = run_builtin(*bench, seed, 400, "exhaustive");
    const bool z_ok = r.incumbent.valid && r.incumbent.config.z == opt.z;
    bool near = z_ok;
    if (z_ok) {
      for (std::size_t p : active.cont) near = near && std::abs(r.incumbent.config.cont[p] - opt.cont[p]) <= 1e-2;
    }
    const bool res_ok = r.residual == 0.0;
    right_z += z_ok;
    close += near;
    zero_residual += res_ok;
    all_three += near && res_ok;
  }
  const double secs = seconds_since(t0);
  return {all_three >= 80 && secs < 300.0,
          fmt::format("optimal z in {}/100 seeds, continuous within 1e-2 in {}/100, zero final residual in {}/100, "
                      "all three in {}/100 (need 80); {:.1f} s (limit 300 s)",
                      right_z, close, zero_residual, all_three, secs)};
}

// ---------------------------------------------------------------------------

Verdict constrained_fraction() {
  const auto t0 = Clock::now();
  auto bench = make_builtin("mixed_latency");
  const std::vector<double> eps{kMixedLatencyThreshold};
  double with = 0.0, without = 0.0;
  int feasible_incumbents = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const RunResult c = run_builtin(*bench, seed, 400, "exhaustive", eps, true);
    const RunResult u = run_builtin(*bench, seed, 400, "exhaustive", eps, false);
    with += c.feasible_fraction();
    without += u.feasible_fraction();
    if (c.incumbent.valid && c.incumbent.feasible) ++feasible_incumbents;
  }
  with /= 20.0;
  without /= 20.0;
  const double ratio = without > 0.0 ? with / without : std::numeric_limits<double>::infinity();
  const double secs = seconds_since(t0);
  return {ratio >= 1.5 && feasible_incumbents >= 19,
          fmt::format("mean feasible fraction constrained {:.3f} vs unconstrained {:.3f} (ratio {:.2f}, need 1.5); "
                      "constrained incumbent feasible in {}/20 seeds (need 19); {:.1f} s",
                      with, without, ratio, feasible_incumbents, secs)};
}

// ---------------------------------------------------------------------------

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch_dir() {
  static const fs::path dir = [] {
    fs::path d = fs::temp_directory_path() / fmt::format("admmopt_acceptance_{}", std::random_device{}());
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

// Runs the CLI path for a builtin and returns the trace file contents.
std::string cli_trace(RunConfig config, const std::string& tag) {
  config.trace_path = (scratch_dir() / (tag + ".jsonl")).string();
  std::ostringstream out, err;
  if (run_with_config(config, out, err) != kExitOk) throw std::runtime_error("run failed: " + err.str());
  return slurp(config.trace_path);
}

RunConfig builtin_config(const std::string& name, std::uint64_t seed, const std::string& z, std::size_t evals) {
  RunConfig c;
  c.builtin = name;
  c.seed = seed;
  c.z_solver = z;
  c.max_evals = evals;
  return c;
}

Verdict no_constraint_degeneration() {
  int identical = 0, total = 0;
  std::size_t bytes = 0;
  for (const std::string z : {"exhaustive", "cmab", "random"}) {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
      RunConfig constrained = builtin_config("mixed", seed, z, 150);
      constrained.constrained = true;
      RunConfig plain = constrained;
      plain.constrained = false;
      const std::string a = cli_trace(constrained, fmt::format("m0_c_{}_{}", z, seed));
      const std::string b = cli_trace(plain, fmt::format("m0_u_{}_{}", z, seed));
      ++total;
      if (!a.empty() && a == b) ++identical;
      bytes += a.size();
    }
  }
  return {identical == total,
          fmt::format("{}/{} M=0 constrained traces byte-identical to unconstrained ({} bytes compared)", identical,
                      total, bytes)};
}

Verdict determinism() {
  int identical = 0, total = 0;
  for (const std::string name : builtin_names()) {
    for (const std::string z : {"exhaustive", "cmab", "random"}) {
      if (name == "pipeline" && z == "exhaustive") continue;  // 108 combinations per z-step; covered by the others
      RunConfig c = builtin_config(name, 42, z, 120);
      if (name == "mixed_latency") c.epsilons = {kMixedLatencyThreshold};
      c.random_init = (z == "random");
      const std::string a = cli_trace(c, fmt::format("det_a_{}_{}", name, z));
      const std::string b = cli_trace(c, fmt::format("det_b_{}_{}", name, z));
      ++total;
      if (!a.empty() && a == b) ++identical;
    }
  }
  return {identical == total, fmt::format("{}/{} repeated builtin runs produced byte-identical traces", identical, total)};
}

// ---------------------------------------------------------------------------

Verdict bo_vs_random() {
  auto sphere = [](std::span<const double> x) {
    double s = 0.0;
    for (double v : x) s += (v - 0.5) * (v - 0.5);
    return s;
  };
  ContinuousProblem p;
  p.box = {{0.0, 0.0, 0.0}, {1.0, 1.0, 1.0}};
  p.objective = sphere;
  p.budget = 32;
  int wins = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng a(seed), b(seed);
    BayesOptSolver bo;
    RandomSearchSolver rs;
    if (bo.solve(p, a).value < rs.solve(p, b).value) ++wins;
  }
  return {wins >= 80, fmt::format("BO beat paired random search in {}/100 seeds (need 80)", wins)};
}

const std::vector<std::pair<std::string, std::function<Verdict()>>>& criteria() {
  static const std::vector<std::pair<std::string, std::function<Verdict()>>> all{
      {"delta_min", delta_min_exact},
      {"gp_oracle", gp_oracle},
      {"ei_closed_form", ei_closed_form},
      {"cmab_identification", cmab_identification},
      {"end_to_end", end_to_end},
      {"constrained_fraction", constrained_fraction},
      {"no_constraint_degeneration", no_constraint_degeneration},
      {"determinism", determinism},
      {"bo_vs_random", bo_vs_random},
  };
  return all;
}

}  // namespace

int main(int argc, char** argv) {
  set_log_level("off");
  const std::string wanted = argc > 1 ? argv[1] : "";
  bool any = false, all_pass = true;
  for (const auto& [name, check] : criteria()) {
    if (!wanted.empty() && wanted != name) continue;
    any = true;
    Verdict v;
    try {
      v = check();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    std::cout << (v.pass ? "PASS " : "FAIL ") << name << ": " << v.detail << std::endl;
    all_pass = all_pass && v.pass;
  }
  if (!any) {
    std::cerr << "unknown criterion '" << wanted << "'\n";
    return 2;
  }
  std::error_code ec;
  fs::remove_all(scratch_dir(), ec);
  return all_pass ? 0 : 1;
}
