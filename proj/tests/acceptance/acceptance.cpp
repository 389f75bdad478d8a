// Acceptance suite: one PASS/FAIL line per criterion. Tolerances, sample
// sizes and runtime budgets are fixed here. Usage: acceptance <path-to-cli>
// [criterion ...]

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <unistd.h>

#include "causal_pvar/causal_lab.hpp"
#include "causal_pvar/diagnostics.hpp"
#include "causal_pvar/estimands.hpp"
#include "causal_pvar/identify.hpp"
#include "causal_pvar/panel.hpp"
#include "causal_pvar/random.hpp"
#include "causal_pvar/verify.hpp"
#include "causal_pvar/weights.hpp"

using namespace causal_pvar;
using Eigen::MatrixXd;
using Eigen::VectorXd;
namespace fs = std::filesystem;

namespace {

constexpr double kExact = 1e-10;
constexpr std::size_t kMonteCarloReps = 200;
constexpr std::uint64_t kSeed = 20240611;

unsigned worker_threads() { return std::max(1u, std::thread::hardware_concurrency()); }

struct Outcome {
  bool pass = true;
  std::ostringstream detail;
  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

const VerificationCheck* find_check(const VerificationReport& r, const std::string& name) {
  for (const auto& c : r.checks) {
    if (c.name == name) return &c;
  }
  return nullptr;
}

void require_check(Outcome& out, const VerificationReport& r, const std::string& name, bool expect_pass = true) {
  const VerificationCheck* c = find_check(r, name);
  if (c == nullptr) {
    out.require(false, r.theorem + " lacks " + name);
    return;
  }
  out.detail << ' ' << r.theorem << ':' << name << " d=" << fmt(c->discrepancy) << " tol=" << fmt(c->tolerance);
  out.require(c->pass == expect_pass, r.theorem + ":" + name + (expect_pass ? " should pass" : " should fail"));
}

double sample_cov(const VectorXd& a, const VectorXd& b) {
  return ((a.array() - a.mean()) * (b.array() - b.mean())).sum() / double(a.size());
}

// ---------------------------------------------------------------- 1
void algebraic(Outcome& out) {
  std::mt19937_64 rng(kSeed);
  std::normal_distribution<double> normal;
  double worst_recon = 0.0;
  for (int r = 0; r < 100; ++r) {
    const Eigen::Index m = 1 + r % 6;
    const Eigen::Index cols = r % 4 == 0 ? std::max<Eigen::Index>(1, m - 1) : m + 3;
    MatrixXd a(m, cols);
    for (Eigen::Index k = 0; k < a.size(); ++k) a.data()[k] = normal(rng);
    MatrixXd sigma = a * a.transpose();
    sigma = 0.5 * (sigma + sigma.transpose());
    const MatrixXd o = cholesky_lower(sigma).lower;
    worst_recon = std::max(worst_recon, (o * o.transpose() - sigma).cwiseAbs().maxCoeff());
  }
  out.detail << " recon=" << fmt(worst_recon);
  out.require(worst_recon < kExact, "Cholesky reconstruction");

  double worst_lemma = 0.0;
  for (int r = 0; r < 100; ++r) {
    VarDgp dgp;
    dgp.phi = {(MatrixXd(2, 2) << 0.3, 0.05 * (r % 3), 0.2, 0.4).finished()};
    const double c = -0.8 + 0.016 * r;
    dgp.sigma = (MatrixXd(2, 2) << 1.0, c, c, 1.0 + 0.01 * r).finished();
    dgp.n_units = 20;
    dgp.n_times = 40;
    dgp.seed = derive_seed(kSeed, std::uint64_t(r));
    const PVARFit fit = fit_pvar(simulate_pvar(dgp), {});
    const double gamma = impact_gamma(cholesky_lower(fit.sigma), 0, 1);
    const VectorXd w = fit.residuals.col(0);
    const VectorXd y = fit.residuals.col(1);
    const double slope = sample_cov(w, y) / sample_cov(w, w);
    worst_lemma = std::max(worst_lemma, std::abs(gamma - slope) / std::max(1.0, std::abs(slope)));
  }
  out.detail << " lemma=" << fmt(worst_lemma);
  out.require(worst_lemma < kExact, "Cholesky ratio equals cov/var");

  double worst_did = 0.0;
  for (int r = 0; r < 20; ++r) {
    const std::size_t n = 12 + std::size_t(r);
    const std::size_t t_count = 10 + std::size_t(r % 5);
    std::vector<char> units(n, 0);
    std::vector<char> periods(t_count, 0);
    for (std::size_t i = 0; i < n / 3 + 1; ++i) units[i] = 1;
    for (std::size_t t = t_count / 2; t < t_count; ++t) periods[t] = 1;
    VectorXd d(Eigen::Index(n * t_count));
    VectorXd y(d.size());
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t t = 0; t < t_count; ++t) {
        const auto c = Eigen::Index(i * t_count + t);
        d(c) = units[i] && periods[t] ? 1.0 : 0.0;
        y(c) = normal(rng) + 2.0 * d(c);
      }
    }
    const VectorXd w = two_way_demean(d, n, t_count);
    const VectorXd yt = two_way_demean(y, n, t_count);
    MatrixXd e(w.size(), 2);
    e << w, yt;
    const MatrixXd sigma = e.transpose() * e / double(w.size());
    const double gamma = impact_gamma(cholesky_lower(sigma), 0, 1);
    worst_did = std::max(worst_did, std::abs(gamma - did_four_means(y, units, periods)));
  }
  out.detail << " did=" << fmt(worst_did);
  out.require(worst_did < kExact, "four-mean contrast equals impact_gamma");
}

// ---------------------------------------------------------------- 2
void theorem_ate(Outcome& out) {
  const VerificationReport r =
      verify_theorem(Theorem::T2, [] { auto c = default_scenario(Theorem::T2); c.seed = kSeed; return c; }(),
                     kMonteCarloReps, worker_threads());
  require_check(out, r, "gamma_vs_ate");
  require_check(out, r, "selection_bias_vs_zero");
}

// ---------------------------------------------------------------- 3
void gaussian(Outcome& out) {
  std::vector<double> grid;
  for (int k = 0; k <= 600; ++k) grid.push_back(-15.0 + 0.05 * k);
  for (double sigma : {0.5, 1.0, 2.0, 2.5}) {
    const WeightProfile w = gaussian_weights(sigma, grid);
    double worst = 0.0;
    for (std::size_t k = 0; k < grid.size(); ++k) {
      const double pdf = std::exp(-0.5 * grid[k] * grid[k] / (sigma * sigma)) / (sigma * std::sqrt(2.0 * std::numbers::pi));
      worst = std::max(worst, std::abs(w.q[k] - pdf));
    }
    out.require(worst < 1e-8, "q equals the density at sigma " + fmt(sigma));
    out.require(std::abs(trapezoid(grid, w.q) - 1.0) < 1e-6 && std::abs(w.mass - 1.0) < 1e-6,
                "q integrates to one at sigma " + fmt(sigma));
  }
  for (Theorem t : {Theorem::T3, Theorem::T4, Theorem::T5}) {
    ScenarioConfig c = default_scenario(t);
    c.seed = kSeed;
    const VerificationReport r = verify_theorem(t, c, kMonteCarloReps, worker_threads());
    for (const auto& check : r.checks) {
      if (check.asserted) require_check(out, r, check.name);
    }
    // Independent quadrature of int phi_sigma(x) g'(x) dx by Simpson's rule.
    const int fine = 40000;
    const double lo = -10.0 * c.policy_sd;
    const double h = -2.0 * lo / fine;
    double integral = 0.0;
    for (int k = 0; k <= fine; ++k) {
      const double x = lo + h * k;
      const double f = std::exp(-0.5 * x * x / (c.policy_sd * c.policy_sd)) /
                       (c.policy_sd * std::sqrt(2.0 * std::numbers::pi)) * c.impact.derivative(x);
      integral += f * (k == 0 || k == fine ? 1.0 : (k % 2 ? 4.0 : 2.0));
    }
    integral *= h / 3.0;
    const VerificationCheck* s = find_check(r, "gamma_vs_weighted_structural_slope");
    if (s == nullptr) continue;
    out.require(std::abs(s->mean_target - integral) < 1e-6, "weighted structural slope equals quadrature");
    out.require(std::abs(s->mean_estimate - integral) <= 3.0 * s->mc_se, "gamma matches quadrature");
    out.detail << ' ' << r.theorem << ":quadrature=" << fmt(integral) << " gamma=" << fmt(s->mean_estimate);
  }
}

// ---------------------------------------------------------------- 4
void nonnegative(Outcome& out) {
  const WeightProfile law = nonneg_weights(NonNegLaw{0.5, 1.0, 2.0}, {}, 4001);
  const double closed = trapezoid(law.grid, law.q1) + law.q0;
  out.require(std::abs(closed - 1.0) < 1e-6 && std::abs(law.mass + law.q0 - 1.0) < 1e-6, "closed-form weights sum");
  std::mt19937_64 rng(kSeed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> draws(1000000);
  for (auto& d : draws) d = u(rng) < 0.5 ? 0.0 : 1.0 + u(rng);
  const WeightProfile emp = nonneg_weights(std::span<const double>(draws), {}, 4001);
  const double empirical = trapezoid(emp.grid, emp.q1) + emp.q0;
  out.detail << " closed=" << fmt(closed - 1.0) << " empirical=" << fmt(empirical - 1.0);
  out.require(std::abs(empirical - 1.0) < 1e-6 && std::abs(emp.mass + emp.q0 - 1.0) < 1e-6, "empirical weights sum");
  for (Theorem t : {Theorem::T6, Theorem::T7}) {
    ScenarioConfig c = default_scenario(t);
    c.seed = kSeed;
    const VerificationReport r = verify_theorem(t, c, kMonteCarloReps, worker_threads());
    for (const auto& check : r.checks) {
      if (check.asserted) require_check(out, r, check.name);
    }
  }
}

// ---------------------------------------------------------------- 5
void att(Outcome& out) {
  for (Theorem t : {Theorem::T9, Theorem::T10}) {
    ScenarioConfig c = default_scenario(t);
    c.seed = kSeed;
    const VerificationReport r = verify_theorem(t, c, kMonteCarloReps, worker_threads());
    require_check(out, r, t == Theorem::T9 ? "gamma_vs_four_mean_contrast" : "gamma_vs_att");
  }
  ScenarioConfig violated = default_scenario(Theorem::T10);
  violated.seed = kSeed;
  violated.anticipation_shift = 0.5;
  const VerificationReport r = verify_theorem(Theorem::T10, violated, kMonteCarloReps, worker_threads());
  out.detail << " negative_control:";
  require_check(out, r, "gamma_vs_att", false);
}

// ---------------------------------------------------------------- 6
void interference(Outcome& out) {
  ScenarioConfig c = default_interference_scenario();
  c.seed = kSeed;
  const VerificationReport r = verify_interference(c, kMonteCarloReps, c.exposure_mode, worker_threads());
  require_check(out, r, "naive_gamma_vs_atte_minus_aste");
  require_check(out, r, "adjusted_delta_vs_atte");
  const VerificationCheck* bias = find_check(r, "naive_bias_vs_minus_aste");
  if (bias != nullptr) out.detail << " naive_bias=" << fmt(bias->mean_estimate) << " -aste=" << fmt(bias->mean_target);
}

// ---------------------------------------------------------------- 7
void diagnostics(Outcome& out) {
  VarDgp dgp;
  dgp.phi = {(MatrixXd(2, 2) << 0.4, 0.0, 0.2, 0.3).finished(), (MatrixXd(2, 2) << 0.25, 0.0, 0.0, 0.25).finished()};
  dgp.sigma = (MatrixXd(2, 2) << 1.0, 0.3, 0.3, 1.0).finished();
  dgp.n_units = 100;
  dgp.n_times = 300;
  int flagged_misspecified = 0;
  int clean_well_specified = 0;
  int bic_true_order = 0;
  const int runs = 100;
  for (int r = 0; r < runs; ++r) {
    dgp.seed = derive_seed(kSeed, 7000 + std::uint64_t(r));
    const PanelDataset panel = simulate_pvar(dgp);
    PVARSpec one;
    PVARSpec two;
    two.lag_order = 2;
    if (residual_autocorr(fit_pvar(panel, one), 4).violated) ++flagged_misspecified;
    if (!residual_autocorr(fit_pvar(panel, two), 4).violated) ++clean_well_specified;
    if (lag_criteria(panel, 4).chosen_mbic == 2) ++bic_true_order;
  }
  out.detail << " flagged=" << flagged_misspecified << "/" << runs << " clean=" << clean_well_specified << "/"
             << runs << " bic=" << bic_true_order << "/" << runs;
  out.require(flagged_misspecified >= 90, "misspecified fit flagged in 90% of runs");
  out.require(clean_well_specified >= 90, "well-specified fit passes in 90% of runs");
  out.require(bic_true_order >= 90, "BIC-like selects order 2 in 90% of runs");
}

// ---------------------------------------------------------------- 8
void coverage(Outcome& out) {
  const double gamma = 0.5;
  VarDgp dgp;
  dgp.phi = {(MatrixXd(2, 2) << 0.3, 0.0, 0.2, 0.4).finished()};
  // Innovations (W, Y) with Y = gamma W + e: Sigma = [[1, g], [g, g^2 + 1]].
  dgp.sigma = (MatrixXd(2, 2) << 1.0, gamma, gamma, gamma * gamma + 1.0).finished();
  dgp.n_units = 10;
  dgp.n_times = 400;
  int covered = 0;
  const int runs = 100;
  BootstrapOptions opt;
  opt.reps = 200;
  opt.level = 0.9;
  opt.threads = worker_threads();
  for (int r = 0; r < runs; ++r) {
    dgp.seed = derive_seed(kSeed, 9000 + std::uint64_t(r));
    opt.seed = derive_seed(kSeed, 19000 + std::uint64_t(r));
    const BootstrapIrf b = bootstrap_irf(simulate_pvar(dgp), {}, 0, 4, opt);
    if (b.bands.lower(1, 0) <= gamma && gamma <= b.bands.upper(1, 0)) ++covered;
  }
  out.detail << " covered=" << covered << "/" << runs;
  out.require(covered >= 85, "90% band covers the impact in 85% of runs");
}

// ---------------------------------------------------------------- 9
std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Runs the CLI into `dir` and returns the concatenated bytes of every file
// it produced, keyed by name.
std::string run_cli(const std::string& cli, const fs::path& dir, const std::string& args, Outcome& out) {
  fs::remove_all(dir);
  fs::create_directories(dir);
  const std::string cmd = "cd '" + dir.string() + "' && '" + cli + "' " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  out.require(status == 0, "exit status of: " + args);
  std::set<std::string> names;
  for (const auto& e : fs::directory_iterator(dir)) names.insert(e.path().filename().string());
  std::string all;
  for (const auto& n : names) all += n + '\n' + slurp(dir / n);
  return all;
}

void determinism(Outcome& out, const std::string& cli, const fs::path& work) {
  if (cli.empty() || !fs::exists(cli)) {
    out.require(false, "CLI binary not found: '" + cli + "'");
    return;
  }
  fs::create_directories(work);
  const fs::path input = work / "input";
  fs::create_directories(input);
  const std::string sim_het = "simulate --set regime=heterogeneous_dummy --set n_units=30 --set n_times=60 --seed 11";
  const std::string sim_sp = "simulate --set regime=spillover_dummy --set n_units=30 --set n_times=60 --seed 12";
  if (std::system(("cd '" + input.string() + "' && '" + cli + "' " + sim_het + " -o het.csv > /dev/null 2>&1").c_str()) != 0 ||
      std::system(("cd '" + input.string() + "' && '" + cli + "' " + sim_sp + " -o sp.csv > /dev/null 2>&1").c_str()) != 0) {
    out.require(false, "input simulation");
    return;
  }
  {
    std::ofstream edges(input / "edges.csv");
    for (int i = 0; i < 30; ++i) edges << i << ',' << (i + 1) % 30 << '\n';
  }
  const std::string het = (input / "het.csv").string();
  const std::string sp = (input / "sp.csv").string();
  const std::vector<std::string> commands = {
      sim_het + " -o out.csv",
      "fit -i '" + het + "' -o out.csv",
      "lagselect -i '" + het + "' -o out.csv --max-lags 3",
      "diagnose -i '" + het + "' -o out.csv",
      "irf -i '" + het + "' -o out.csv --reps 150 --horizon 6 --seed 5",
      "spillover -i '" + sp + "' -o out.csv --adjacency '" + (input / "edges.csv").string() + "' --treatment '" + sp +
          ".truth.csv' --reps 150 --seed 6",
      "verify --theorem T10 --reps 8 --set n_units=40 --set n_times=60 --seed 7 -o out.csv",
      "verify --theorem interference --reps 8 --set n_units=40 --set n_times=60 --seed 8 -o out.csv --format jsonl",
  };
  int identical = 0;
  for (const auto& args : commands) {
    const std::string a = run_cli(cli, work / "a", args + " --threads 1", out);
    const std::string b = run_cli(cli, work / "b", args + " --threads 1", out);
    const std::string c = run_cli(cli, work / "c", args + " --threads 4", out);
    const bool same = !a.empty() && a == b && a == c;
    out.require(same, "byte-identical output for: " + args.substr(0, args.find(' ')));
    identical += same ? 1 : 0;
  }
  out.detail << " identical=" << identical << "/" << commands.size();
}

struct Criterion {
  int id;
  const char* title;
  double budget_seconds;
  std::function<void(Outcome&)> body;
};

}  // namespace

int main(int argc, char** argv) {
  const std::string cli = argc > 1 ? fs::absolute(argv[1]).string() : "";
  std::set<int> only;
  for (int a = 2; a < argc; ++a) only.insert(std::atoi(argv[a]));
  const fs::path work = fs::temp_directory_path() / ("causal_pvar_acceptance_" + std::to_string(::getpid()));

  const std::vector<Criterion> criteria = {
      {1, "algebraic identities", 10.0, algebraic},
      {2, "dummy policy recovers the ATE", 120.0, theorem_ate},
      {3, "gaussian weights and ACR", 120.0, gaussian},
      {4, "non-negative mixture", 180.0, nonnegative},
      {5, "heterogeneous dummy recovers the ATT", 120.0, att},
      {6, "interference", 180.0, interference},
      {7, "diagnostics", 180.0, diagnostics},
      {8, "bootstrap coverage", 300.0, coverage},
      {9, "CLI determinism", 300.0, [&](Outcome& o) { determinism(o, cli, work); }},
  };

  int failures = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && !only.count(c.id)) continue;
    Outcome out;
    const auto start = std::chrono::steady_clock::now();
    try {
      c.body(out);
    } catch (const std::exception& e) {
      out.require(false, std::string("exception: ") + e.what());
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    out.require(seconds <= c.budget_seconds, "runtime budget");
    if (!out.pass) ++failures;
    std::cout << "criterion " << c.id << ": " << (out.pass ? "PASS" : "FAIL") << " | " << c.title << " | "
              << fmt(seconds) << "s of " << c.budget_seconds << "s |" << out.detail.str() << std::endl;
  }
  fs::remove_all(work);
  return failures == 0 ? 0 : 1;
}
