#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"

#include "causal_pvar/error.hpp"
#include "causal_pvar/identify.hpp"
#include "causal_pvar_cli/commands.hpp"
#include "causal_pvar_cli/io.hpp"

using namespace causal_pvar;
using namespace causal_pvar::cli;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("causal_pvar_test_" + std::to_string(::getpid()) + "_" +
                                        std::to_string(reinterpret_cast<std::uintptr_t>(this)));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("load_panel_csv reads the contract and canonicalizes rows") {
  TempDir dir;
  write_text(dir.file("a.csv"), "# policies=1\nunit,time,W,Y\n1,0,1.0,2.0\n0,1,3,4\n0,0,5,6\n1,1,7,8\n0,2,1,1\n1,2,2,2\n");
  write_text(dir.file("b.csv"), "# policies=1\nunit,time,W,Y\n0,0,5,6\n0,1,3,4\n0,2,1,1\n1,0,1.0,2.0\n1,1,7,8\n1,2,2,2\n");
  const PanelDataset a = load_panel_csv(dir.file("a.csv"));
  const PanelDataset b = load_panel_csv(dir.file("b.csv"));
  CHECK(a.n_units == 2);
  CHECK(a.n_times == 3);
  CHECK(a.values == b.values);
  CHECK(a.variable_names == std::vector<std::string>{"W", "Y"});

  write_text(dir.file("gap.csv"), "# policies=1\nunit,time,W,Y\n0,0,1,1\n0,1,1,1\n1,0,1,1\n");
  try {
    load_panel_csv(dir.file("gap.csv"));
    FAIL("unbalanced panel accepted");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::UnbalancedPanel);
    CHECK(std::string(e.what()).find("unit 1, time 1") != std::string::npos);
  }

  write_text(dir.file("bad.csv"), "unit,time,W,Y\n0,0,x,1\n");
  CHECK_THROWS_AS(load_panel_csv(dir.file("bad.csv"), 1), Error);
  write_text(dir.file("nok.csv"), "unit,time,W,Y\n0,0,1,1\n");
  CHECK_THROWS_AS(load_panel_csv(dir.file("nok.csv")), Error);
  CHECK_THROWS_AS(load_panel_csv(dir.file("missing.csv"), 1), Error);
}

TEST_CASE("panel CSV round trip is exact") {
  TempDir dir;
  PanelDataset p;
  p.n_units = 2;
  p.n_times = 2;
  p.n_policies = 1;
  p.n_outcomes = 1;
  p.values.resize(4, 2);
  p.values << 0.1, 1.0 / 3.0, -2.5e-300, 7.0, 123456.789, -0.0, 1e-17, 2.0 / 7.0;
  p = validate_panel(p);
  write_panel_csv(p, dir.file("p.csv"));
  const PanelDataset q = load_panel_csv(dir.file("p.csv"));
  CHECK(q.values == p.values);
  CHECK(q.n_policies == 1);
}

TEST_CASE("write_results formats") {
  TempDir dir;
  ResultTable t;
  t.columns = {"variable", "horizon", "point", "lower", "upper"};
  write_results(t, dir.file("empty.csv"), Format::Csv);
  CHECK(read_text(dir.file("empty.csv")) == "variable,horizon,point,lower,upper\n");
  t.rows.push_back({std::string("Y"), 0LL, 0.5, std::nan(""), 1.0});
  write_results(t, dir.file("t.csv"), Format::Csv);
  CHECK(read_text(dir.file("t.csv")) == "variable,horizon,point,lower,upper\nY,0,0.5,nan,1\n");
  write_results(t, dir.file("t.jsonl"), Format::JsonLines);
  CHECK(read_text(dir.file("t.jsonl")) ==
        "{\"variable\":\"Y\",\"horizon\":0,\"point\":0.5,\"lower\":null,\"upper\":1}\n");
  CHECK(parse_format("json-lines") == Format::JsonLines);
}

TEST_CASE("edge lists and cell indicators") {
  TempDir dir;
  write_text(dir.file("p.csv"), "# policies=1\nunit,time,W,Y\n10,0,1,1\n10,1,0,2\n20,0,0,3\n20,1,1,1\n30,0,1,0\n30,1,0,0\n");
  const PanelDataset p = load_panel_csv(dir.file("p.csv"));
  write_text(dir.file("e.csv"), "unit_a,unit_b\n10,20\n30,20\n");
  const Eigen::MatrixXd a = load_edge_list(dir.file("e.csv"), p.unit_ids);
  CHECK(a(0, 1) == 1.0);
  CHECK(a(1, 0) == 1.0);
  CHECK(a(2, 1) == 1.0);
  CHECK(a(0, 2) == 0.0);
  write_text(dir.file("bad.csv"), "10,99\n");
  CHECK_THROWS_AS(load_edge_list(dir.file("bad.csv"), p.unit_ids), Error);

  write_text(dir.file("d.csv"), "unit,time,assignment\n10,0,1\n10,1,0\n20,0,0\n20,1,1\n30,0,0\n30,1,0\n");
  const Eigen::MatrixXd d = load_cell_indicator(dir.file("d.csv"), p);
  CHECK(d(0, 0) == 1.0);
  CHECK(d(1, 1) == 1.0);
  CHECK(d.sum() == 2.0);
  write_text(dir.file("short.csv"), "unit,time,assignment\n10,0,1\n");
  CHECK_THROWS_AS(load_cell_indicator(dir.file("short.csv"), p), Error);
}

TEST_CASE("seed resolution order") {
  CHECK(resolve_seed(5, 7) == 5);
  CHECK(resolve_seed(std::nullopt, 7) == 7);
  ::setenv("CAUSAL_PVAR_SEED", "11", 1);
  CHECK(resolve_seed(std::nullopt) == 11);
  ::unsetenv("CAUSAL_PVAR_SEED");
  CHECK_THROWS_AS(resolve_seed(std::nullopt), UsageError);
}

TEST_CASE("simulate, fit and irf pipeline is consistent") {
  TempDir dir;
  std::ostringstream log;
  RunConfig sim;
  sim.command = "simulate";
  sim.output = dir.file("panel.csv");
  sim.settings = {"regime=heterogeneous_dummy", "n_units=30", "n_times=60"};
  sim.seed = 7;
  run(sim, log);
  CHECK(fs::exists(dir.file("panel.csv.truth.csv")));
  CHECK(fs::exists(dir.file("panel.csv.estimands.csv")));

  RunConfig fit;
  fit.command = "fit";
  fit.input = sim.output;
  fit.output = dir.file("fit.csv");
  run(fit, log);
  CHECK(fs::exists(dir.file("fit.csv.sigma.csv")));
  CHECK(fs::exists(dir.file("fit.csv.residuals.csv")));

  RunConfig ir;
  ir.command = "irf";
  ir.input = sim.output;
  ir.output = dir.file("irf.csv");
  ir.reps = 200;
  ir.seed = 3;
  run(ir, log);
  std::ifstream in(ir.output);
  std::string header;
  std::getline(in, header);
  CHECK(header == "variable,horizon,point,lower,upper");
  std::string line;
  double point = std::nan("");
  while (std::getline(in, line)) {
    if (line.rfind("Y,0,", 0) == 0) point = std::stod(line.substr(4, line.find(',', 4) - 4));
  }
  const PanelDataset panel = load_panel_csv(sim.output);
  const PVARFit f = fit_pvar(panel, {});
  CHECK(std::abs(point - impact_gamma(cholesky_lower(f.sigma), 0, 1)) < 1e-12);

  const std::string first = read_text(ir.output);
  ir.threads = 4;
  run(ir, log);
  CHECK(read_text(ir.output) == first);
}

TEST_CASE("usage errors") {
  std::ostringstream log;
  RunConfig bad;
  bad.command = "irf";
  bad.output = "x";
  CHECK_THROWS(run(bad, log));
  RunConfig unknown;
  unknown.command = "nope";
  CHECK_THROWS_AS(run(unknown, log), UsageError);
}
