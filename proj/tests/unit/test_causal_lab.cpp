#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "doctest.h"
#include "oracles.hpp"

#include "causal_pvar/causal_lab.hpp"
#include "causal_pvar/diagnostics.hpp"
#include "causal_pvar/error.hpp"
#include "causal_pvar/estimands.hpp"
#include "causal_pvar/weights.hpp"

using namespace causal_pvar;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

ScenarioConfig small(Regime regime) {
  ScenarioConfig c;
  c.regime = regime;
  c.n_units = 40;
  c.n_times = 50;
  c.seed = 3;
  return c;
}

}  // namespace

TEST_CASE("scenario configuration parsing") {
  std::istringstream in(
      "# comment\nregime=gaussian_continuous\nn_units = 12\nphi=0.1,0,0.2,0.3,0.05,0,0,0.1\nimpact=quadratic\n"
      "impact_b=0.25\nseed=9\n");
  const ScenarioConfig c = parse_scenario_config(in);
  CHECK(c.regime == Regime::GaussianContinuous);
  CHECK(c.n_units == 12);
  CHECK(c.phi.size() == 2);
  CHECK(c.phi[0](1, 0) == 0.2);
  CHECK(c.phi[1](0, 0) == 0.05);
  CHECK(c.impact.kind == ImpactFunction::Kind::Quadratic);
  CHECK(c.impact.b == 0.25);
  CHECK(c.seed == 9);

  ScenarioConfig d;
  CHECK_THROWS_AS(apply_setting(d, "no_such_key", "1"), Error);
  CHECK_THROWS_AS(apply_setting(d, "n_units", "abc"), Error);
  d.treat_prob = 1.5;
  CHECK_THROWS_AS(validate_config(d), Error);
}

TEST_CASE("impact functions") {
  ImpactFunction q{ImpactFunction::Kind::Quadratic, 1.0, 0.5};
  CHECK(q(2.0) == 4.0);
  CHECK(q.derivative(2.0) == 3.0);
  ImpactFunction s{ImpactFunction::Kind::Step, 2.0, 1.0};
  CHECK(s(0.5) == 0.0);
  CHECK(s(1.0) == 2.0);
}

TEST_CASE("homogeneous dummy with a noiseless linear effect") {
  ScenarioConfig c = small(Regime::HomogeneousDummy);
  c.impact.a = 2.0;
  c.outcome_noise_sd = 0.0;
  const Simulation sim = simulate_scenario(c);
  const PotentialOutcomePanel& pop = sim.truth;
  CHECK(((pop.po_grid.col(1) - pop.po_grid.col(0)).array() == 2.0).all());
  const EstimandReport r = oracle_estimands(pop);
  CHECK(r.ate == doctest::Approx(2.0));
  CHECK(r.att == doctest::Approx(2.0));
  CHECK(selection_bias(pop) == 0.0);
  // The policy is common across units within a period.
  for (std::size_t t = 0; t < c.n_times; ++t) {
    for (std::size_t i = 1; i < c.n_units; ++i) {
      CHECK(pop.assignment(Eigen::Index(i * c.n_times + t)) == pop.assignment(Eigen::Index(t)));
    }
  }
}

TEST_CASE("simulated panel innovations are the potential-outcome draws") {
  ScenarioConfig c = small(Regime::GaussianContinuous);
  c.burn_in = 30;
  const Simulation sim = simulate_scenario(c);
  // Applying the true dynamics to the panel recovers the innovations up to
  // the unit constant.
  const PanelDataset& p = sim.panel;
  for (std::size_t i = 0; i < 3; ++i) {
    MatrixXd gap(Eigen::Index(c.n_times - 1), 2);
    for (std::size_t t = 1; t < c.n_times; ++t) {
      const Eigen::Vector2d now(p.at(i, t, 0), p.at(i, t, 1));
      const Eigen::Vector2d prev(p.at(i, t - 1, 0), p.at(i, t - 1, 1));
      const Eigen::Vector2d e = now - c.phi[0] * prev;
      const auto cell = Eigen::Index(i * c.n_times + t);
      gap.row(Eigen::Index(t - 1)) << e(0) - sim.truth.assignment(cell), e(1) - sim.truth.outcome(cell);
    }
    CHECK((gap.rowwise() - gap.row(0)).cwiseAbs().maxCoeff() < 1e-10);
  }
  const Simulation again = simulate_scenario(c);
  CHECK(again.panel.values == sim.panel.values);
}

TEST_CASE("gaussian dose passes the normality probe") {
  ScenarioConfig c = small(Regime::GaussianContinuous);
  c.n_units = 50;
  c.n_times = 200;
  int ok = 0;
  for (int r = 0; r < 100; ++r) {
    c.seed = 200 + std::uint64_t(r);
    const Simulation sim = simulate_scenario(c);
    const VectorXd& w = sim.truth.assignment;
    if (policy_regime_probe(std::span<const double>(w.data(), std::size_t(w.size()))).normality_stat < 9.21) ++ok;
  }
  CHECK(ok >= 95);
}

TEST_CASE("heterogeneous dummy keeps controls in every treated period") {
  for (TreatSchedule schedule : {TreatSchedule::Sparse, TreatSchedule::Block}) {
    ScenarioConfig c = small(Regime::HeterogeneousDummy);
    c.schedule = schedule;
    c.treat_frac = 0.3;
    const PotentialOutcomePanel pop = simulate_scenario(c).truth;
    std::size_t eligible = 0;
    for (char u : pop.unit_in_treated_group) eligible += u ? 1 : 0;
    CHECK(eligible == 12);
    for (std::size_t t = 0; t < c.n_times; ++t) {
      std::size_t treated = 0;
      for (std::size_t i = 0; i < c.n_units; ++i) treated += pop.assignment(Eigen::Index(i * c.n_times + t)) != 0.0;
      CHECK(treated < c.n_units);
      if (treated > 0) CHECK(pop.period_in_treated_group[t]);
    }
  }
}

TEST_CASE("selection on gains separates ATT from ATE") {
  ScenarioConfig c = small(Regime::HeterogeneousDummy);
  c.selection_gain = 2.0;
  c.treat_frac = 0.5;
  c.n_units = 200;
  c.n_times = 200;
  const PotentialOutcomePanel pop = simulate_scenario(c).truth;
  const EstimandReport r = oracle_estimands(pop);
  const double share = pop.assignment.mean();
  CHECK(r.att - r.ate == doctest::Approx(2.0 * (1.0 - share)).epsilon(1e-10));
  // Half the units eligible, each cell drawn with probability 0.5.
  const double se = 2.0 * std::sqrt(0.25 * 0.75 / double(pop.cells()));
  CHECK(std::abs(r.att - r.ate - 1.5) < 3.0 * se);
}

TEST_CASE("selection_bias matches the two-pass covariance formula") {
  ScenarioConfig c = small(Regime::HeterogeneousDummy);
  c.selection_gain = 1.5;
  const PotentialOutcomePanel pop = simulate_scenario(c).truth;
  const VectorXd d = pop.assignment;
  const VectorXd y1 = pop.po_grid.col(1);
  const VectorXd y0 = pop.po_grid.col(0);
  const double p = d.mean();
  const VectorXd not_d = VectorXd::Ones(d.size()) - d;
  const double expected = oracle::cov(y1, d) / p - oracle::cov(y0, not_d) / (1.0 - p);
  CHECK(selection_bias(pop) == doctest::Approx(expected).epsilon(1e-12));
  // The observed difference in means is ATE plus the selection bias.
  double treated = 0.0;
  double control = 0.0;
  for (Eigen::Index k = 0; k < d.size(); ++k) (d(k) != 0.0 ? treated : control) += pop.outcome(k);
  const double contrast = treated / (p * double(d.size())) - control / ((1.0 - p) * double(d.size()));
  const EstimandReport r = oracle_estimands(pop);
  CHECK(contrast == doctest::Approx(r.ate + r.selection_bias).epsilon(1e-10));
}

TEST_CASE("randomized dummy has no selection bias") {
  ScenarioConfig c = small(Regime::HeterogeneousDummy);
  c.n_units = 200;
  c.n_times = 200;
  const EstimandReport r = oracle_estimands(simulate_scenario(c).truth);
  CHECK(std::abs(r.selection_bias) < 3.0 * r.mc_se.selection_bias);
}

TEST_CASE("ACR of a quadratic impact is its derivative") {
  ScenarioConfig c = small(Regime::GaussianContinuous);
  c.impact = {ImpactFunction::Kind::Quadratic, 1.0, 0.5};
  const PotentialOutcomePanel pop = simulate_scenario(c).truth;
  const EstimandReport r = oracle_estimands(pop);
  const double step = pop.grid[1] - pop.grid[0];
  for (std::size_t b = 1; b + 1 < pop.grid.size(); ++b) {
    CHECK(r.acr[b] == doctest::Approx(1.0 + pop.grid[b]).epsilon(1e-9));
  }
  CHECK(std::abs(r.acr.front() - (1.0 + pop.grid.front())) <= 0.5 * step + 1e-8);
  CHECK(std::abs(r.acr.back() - (1.0 + pop.grid.back())) <= 0.5 * step + 1e-8);
}

TEST_CASE("grid_bin") {
  const std::vector<double> g{0.0, 1.0, 1.5, 2.0};
  CHECK(grid_bin(g, true, 0.0) == 0);
  CHECK(grid_bin(g, true, 1.1) == 1);
  CHECK(grid_bin(g, true, 1.3) == 2);
  CHECK(grid_bin(g, true, 5.0) == 3);
  CHECK(grid_bin({-1.0, 0.0, 1.0}, false, -0.4) == 1);
}

TEST_CASE("did_four_means arithmetic") {
  const VectorXd y = (VectorXd(4) << 0.0, 3.0, 0.0, 1.0).finished();
  CHECK(did_four_means(y, {1, 0}, {0, 1}) == doctest::Approx(2.0));
  CHECK(did_four_means(VectorXd::Constant(4, 7.0), {1, 0}, {0, 1}) == doctest::Approx(0.0));
  CHECK_THROWS_AS(did_four_means(y, {1, 1}, {0, 1}), Error);
}

TEST_CASE("did_four_means equals the demeaned-dummy regression slope") {
  std::mt19937_64 rng(31);
  std::normal_distribution<double> normal;
  for (int r = 0; r < 10; ++r) {
    const std::size_t n = 15;
    const std::size_t t_count = 12;
    std::vector<char> units(n, 0);
    std::vector<char> periods(t_count, 0);
    for (std::size_t i = 0; i < 5 + std::size_t(r % 4); ++i) units[i] = 1;
    for (std::size_t t = 4; t < t_count; ++t) periods[t] = 1;
    VectorXd w(Eigen::Index(n * t_count));
    VectorXd y(w.size());
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t t = 0; t < t_count; ++t) {
        const auto c = Eigen::Index(i * t_count + t);
        w(c) = units[i] && periods[t] ? 1.0 : 0.0;
        y(c) = normal(rng) + 0.3 * double(i) - 0.1 * double(t) + 1.7 * w(c);
      }
    }
    const VectorXd wt = two_way_demean(w, n, t_count);
    const double slope = oracle::cov(wt, y) / oracle::cov(wt, wt);
    CHECK(did_four_means(y, units, periods) == doctest::Approx(slope).epsilon(1e-10));
  }
}

TEST_CASE("oracle_atte_aste on an additive exposure table") {
  PotentialOutcomePanel pop;
  pop.n_units = 5;
  pop.n_times = 2;
  pop.assignment = VectorXd::Zero(10);
  pop.po_exposure = MatrixXd::Zero(10, 4);
  const double s[5] = {0.0, 0.5, 1.0, 0.5, 0.0};  // mean 0.4 over treated cells
  for (int k = 0; k < 5; ++k) {
    const int c = 2 * k;
    pop.assignment(c) = 1.0;
    const double base = 0.1 * k;
    pop.po_exposure.row(c) << base, base + 0.5 * s[k], 2.0 + base, 2.0 + 0.5 * s[k] + base;
  }
  const ExposureEffects e = oracle_atte_aste(pop);
  CHECK(e.treated_cells == 5);
  CHECK(e.atte == doctest::Approx(2.2));
  CHECK(e.aste == doctest::Approx(0.2));

  pop.assignment.setZero();
  CHECK_THROWS_AS(oracle_atte_aste(pop), Error);
}

TEST_CASE("oracle_atte_aste on the spillover scenario matches enumeration") {
  ScenarioConfig c = small(Regime::SpilloverDummy);
  c.spillover_rho = 0.7;
  c.impact.a = 1.5;
  const PotentialOutcomePanel pop = simulate_scenario(c).truth;
  double total = 0.0;
  double spill = 0.0;
  std::size_t count = 0;
  for (std::size_t cell = 0; cell < pop.cells(); ++cell) {
    if (pop.assignment(Eigen::Index(cell)) == 0.0) continue;
    const double untreated_unexposed = pop.potential(cell, 0.0) - 0.7 * pop.exposure(Eigen::Index(cell));
    total += pop.potential(cell, 1.0) - untreated_unexposed;
    spill += pop.potential(cell, 0.0) - untreated_unexposed;
    ++count;
  }
  const ExposureEffects e = oracle_atte_aste(pop);
  CHECK(e.treated_cells == count);
  CHECK(e.atte == doctest::Approx(total / double(count)).epsilon(1e-12));
  CHECK(e.aste == doctest::Approx(spill / double(count)).epsilon(1e-12));

  c.spillover_rho = 0.0;
  const PotentialOutcomePanel quiet = simulate_scenario(c).truth;
  const ExposureEffects q = oracle_atte_aste(quiet);
  CHECK(q.aste == 0.0);
  CHECK(q.atte == doctest::Approx(oracle_estimands(quiet).att).epsilon(1e-12));
}

TEST_CASE("gaussian_weights") {
  std::vector<double> grid;
  for (int k = 0; k <= 400; ++k) grid.push_back(-12.0 + 0.06 * k);
  const WeightProfile w2 = gaussian_weights(2.0, grid);
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const double pdf = std::exp(-grid[k] * grid[k] / 8.0) / (2.0 * std::sqrt(2.0 * std::numbers::pi));
    CHECK(std::abs(w2.q[k] - pdf) < 1e-8);
  }
  CHECK(std::abs(w2.mass - 1.0) < 1e-6);
  CHECK(std::abs(trapezoid(grid, w2.q) - 1.0) < 1e-6);

  const WeightProfile w1 = gaussian_weights(1.0, {-7.0, 0.0, 7.0});
  CHECK(w1.q[1] == doctest::Approx(0.398942280401).epsilon(1e-10));

  CHECK_THROWS_AS(gaussian_weights(1.0, {-1.0, 0.0, 1.0}), Error);
  CHECK_THROWS_AS(gaussian_weights(-1.0, grid), Error);
}

TEST_CASE("nonneg_weights closed form") {
  const WeightProfile w = nonneg_weights(NonNegLaw{0.5, 1.0, 2.0}, {}, 2001);
  const double var = 7.0 / 6.0 - 0.5625;
  CHECK(w.q0 == doctest::Approx(0.75 * 0.5 / var).epsilon(1e-12));
  CHECK(w.q0 == doctest::Approx(0.6207).epsilon(1e-4));
  CHECK(w.mass == doctest::Approx(1.0 - w.q0).epsilon(1e-12));
  CHECK(trapezoid(w.grid, w.q1) == doctest::Approx(0.3793).epsilon(1e-4));
  CHECK(std::abs(trapezoid(w.grid, w.q1) + w.q0 - 1.0) < 1e-6);

  const WeightProfile point = nonneg_weights(NonNegLaw{0.3, 1.5, 1.5});
  CHECK(point.grid.size() == 1);
  CHECK(trapezoid(point.grid, point.q1) == 0.0);
  CHECK(point.q0 == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("nonneg_weights from a large sample approaches the law") {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> draws(1000000);
  for (auto& d : draws) d = u(rng) < 0.5 ? 0.0 : 1.0 + u(rng);
  const WeightProfile emp = nonneg_weights(std::span<const double>(draws));
  const WeightProfile law = nonneg_weights(NonNegLaw{0.5, emp.d_lower, emp.d_upper}, emp.grid);
  CHECK(std::abs(emp.q0 - law.q0) < 1e-2);
  for (std::size_t k = 0; k < emp.grid.size(); ++k) CHECK(std::abs(emp.q1[k] - law.q1[k]) < 1e-2);
  CHECK(std::abs(emp.mass + emp.q0 - 1.0) < 1e-6);

  const std::vector<double> zeros(10, 0.0);
  CHECK_THROWS_AS(nonneg_weights(std::span<const double>(zeros)), Error);
  const std::vector<double> negative{0.0, -1.0, 2.0};
  CHECK_THROWS_AS(nonneg_weights(std::span<const double>(negative)), Error);
}

TEST_CASE("weighted_estimand on hand-built reports") {
  std::vector<double> grid;
  for (int k = 0; k <= 200; ++k) grid.push_back(-6.0 + 0.06 * k);
  const WeightProfile q = gaussian_weights(1.0, grid);
  EstimandReport linear;
  linear.grid = grid;
  linear.acr.assign(grid.size(), 1.7);
  CHECK(weighted_estimand(q, linear, WeightedMode::GaussianAcr) == doctest::Approx(1.7).epsilon(1e-6));

  // Quadratic g(x) = x + 0.5 x^2 + 0.2 x^3; reference integral by Simpson on
  // a much finer grid.
  EstimandReport cubic;
  cubic.grid = grid;
  for (double x : grid) cubic.acr.push_back(1.0 + x + 0.6 * x * x);
  const int fine = 20000;
  const double h = 12.0 / fine;
  double simpson = 0.0;
  for (int k = 0; k <= fine; ++k) {
    const double x = -6.0 + h * k;
    const double f = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi) * (1.0 + x + 0.6 * x * x);
    simpson += f * (k == 0 || k == fine ? 1.0 : (k % 2 ? 4.0 : 2.0));
  }
  simpson *= h / 3.0;
  CHECK(weighted_estimand(q, cubic, WeightedMode::GaussianAcr) == doctest::Approx(simpson).epsilon(1e-6));

  EstimandReport wrong = linear;
  wrong.grid.back() += 0.5;
  CHECK_THROWS_AS(weighted_estimand(q, wrong, WeightedMode::GaussianAcr), Error);
}

TEST_CASE("weighted_estimand with empty bins falls back to the ACR") {
  ScenarioConfig c = small(Regime::GaussianContinuous);
  c.impact = {ImpactFunction::Kind::Quadratic, 1.0, 0.5};
  const PotentialOutcomePanel pop = simulate_scenario(c).truth;
  const EstimandReport r = oracle_estimands(pop);
  const WeightProfile q = gaussian_weights(1.0, pop.grid);
  // Extreme bins are empty at this sample size.
  CHECK(r.bin_count.front() == 0);
  CHECK(std::isnan(r.acrt.front()));
  const double acrt = weighted_estimand(q, r, WeightedMode::GaussianAcrt);
  const double acr = weighted_estimand(q, r, WeightedMode::GaussianAcr);
  CHECK(std::isfinite(acrt));
  // Without selection the cell derivative is 1 + x in every bin, so ACRT = ACR.
  CHECK(acrt == doctest::Approx(acr).epsilon(1e-9));
  CHECK(acr == doctest::Approx(1.0).epsilon(1e-6));
}
