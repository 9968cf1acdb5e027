#include <gtest/gtest.h>

#include <sys/wait.h>

#include <clocale>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "renergy/renergy.hpp"

using namespace renergy;

namespace {

struct RunResult {
  int status = -1;
  std::string out;
  std::string err;
};

std::string slurp(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

RunResult run_cli(const std::string& args, const std::string& env = "") {
  static int counter = 0;
  const auto dir = std::filesystem::temp_directory_path();
  const auto out = dir / ("renergy_cli_out_" + std::to_string(::getpid()) + "_" + std::to_string(counter));
  const auto err = dir / ("renergy_cli_err_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
  const std::string cmd = env + " " + RENERGY_CLI_PATH + " " + args + " >" + out.string() + " 2>" + err.string();
  const int raw = std::system(cmd.c_str());
  RunResult r{WIFEXITED(raw) ? WEXITSTATUS(raw) : -1, slurp(out), slurp(err)};
  std::filesystem::remove(out);
  std::filesystem::remove(err);
  return r;
}

Json result_of(const RunResult& r) { return Json::parse(r.out).at("result"); }

}  // namespace

TEST(Formatting, RoundSignificant) {
  EXPECT_EQ(round_significant(0.1 + 0.2), 0.3);
  EXPECT_EQ(round_significant(-0.20108944761234567), -0.201089447612);
  EXPECT_EQ(round_significant(123456789012345.0), 123456789012000.0);
  EXPECT_EQ(round_significant(0.0), 0.0);
  EXPECT_TRUE(std::isinf(round_significant(HUGE_VAL)));
}

TEST(Formatting, JsonUsesTwelveDigitsAndNullForNonFinite) {
  Json j = {{"x", 1.0 / 3.0}, {"nested", {{"y", 2.0 / 3.0}}}, {"bad", std::nan("")}, {"k", 7}};
  const std::string s = dump_json(j);
  EXPECT_NE(s.find("0.333333333333"), std::string::npos) << s;
  EXPECT_EQ(s.find("0.3333333333333"), std::string::npos) << s;
  EXPECT_NE(s.find("0.666666666667"), std::string::npos) << s;
  EXPECT_NE(s.find("\"bad\": null"), std::string::npos) << s;
  EXPECT_NE(s.find("\"k\": 7"), std::string::npos) << s;
}

TEST(Formatting, CsvMatchesNineDigitPrintf) {
  for (double x : {0.0, 1.0, -0.2010894476, 1.0 / 3.0, 6.02214076e23, 1.5e-300, 123456789.5, -42.0}) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.9g", x);
    EXPECT_EQ(format_csv_number(x), std::string(buf)) << x;
  }
  EXPECT_EQ(format_csv_number(std::nan("")), "nan");
}

TEST(Formatting, CsvIgnoresLocale) {
  const char* loc = std::setlocale(LC_ALL, "de_DE.UTF-8");
  if (!loc) loc = std::setlocale(LC_ALL, "fr_FR.UTF-8");
  const std::string s = format_csv_number(0.5);
  const std::string j = dump_json(Json{{"x", 0.5}});
  std::setlocale(LC_ALL, "C");
  EXPECT_EQ(s, "0.5");
  EXPECT_NE(j.find("0.5"), std::string::npos);
}

TEST(Formatting, CsvTableQuotingAndWidth) {
  CsvTable t({"name", "value"});
  t.row("plain", 1.5);
  t.row("with,comma", 2);
  t.row("say \"hi\"", true);
  EXPECT_EQ(t.str(), "name,value\r\nplain,1.5\r\n\"with,comma\",2\r\n\"say \"\"hi\"\"\",true\r\n");
  EXPECT_THROW(t.row(1.0), Error);
}

TEST(Formatting, EnvelopeCarriesVersionAndRunConfig) {
  RunConfig rc;
  rc.subcommand = "lattice";
  rc.parameters = {{"tau", {0.0, 1.0}}};
  rc.seed = 9;
  const Json j = Json::parse(dump_json(envelope(rc, to_json(w_eta(Complex(0, 1))))));
  EXPECT_EQ(j.at("version"), version);
  EXPECT_EQ(j.at("run_config").at("subcommand"), "lattice");
  EXPECT_EQ(j.at("run_config").at("seed"), 9);
  EXPECT_EQ(j.at("run_config").at("output"), "-");
  EXPECT_EQ(j.at("result").at("route"), "eta");
}

TEST(Formatting, ReportSerializers) {
  ModuliGrid g;
  g.resolution = 5;
  const ScanReport scan = moduli_scan(g);
  const std::string csv = scan_csv(scan);
  EXPECT_EQ(csv.substr(0, 7), "a,b,W\r\n");
  EXPECT_EQ(static_cast<std::size_t>(std::count(csv.begin(), csv.end(), '\n')), scan.points.size() + 1);
  const Json j = to_json(scan);
  EXPECT_EQ(j.at("points"), scan.points.size());
  EXPECT_DOUBLE_EQ(j.at("min").get<double>(), scan.argmin.w);
}

TEST(Cli, LatticeExamples) {
  const RunResult tri = run_cli("lattice --tau 0.5 0.8660254 --m 1 --route eta");
  ASSERT_EQ(tri.status, 0) << tri.err;
  EXPECT_NEAR(result_of(tri).at("report").at("value").get<double>(), -0.2011, 1e-3);
  const RunResult sq = run_cli("lattice --tau 0 1 --m 1 --route eta");
  ASSERT_EQ(sq.status, 0);
  EXPECT_NEAR(result_of(sq).at("report").at("value").get<double>(), -0.1958, 1e-3);
  const RunResult four = run_cli("lattice --tau 0 1 --route fourier");
  ASSERT_EQ(four.status, 0) << four.err;
  EXPECT_NEAR(result_of(four).at("report").at("value").get<double>(), -0.1958, 1e-3);
  const RunResult diff = run_cli("lattice --tau 0 1 --route zetadiff-vs");
  ASSERT_EQ(diff.status, 0) << diff.err;
  EXPECT_NEAR(result_of(diff).at("report").at("value").get<double>(), 0.0053, 5e-4);
  const RunResult basis = run_cli("lattice --basis 2.5066282746310002 0 0 2.5066282746310002");
  ASSERT_EQ(basis.status, 0) << basis.err;
  EXPECT_NEAR(result_of(basis).at("report").at("value").get<double>(), w_eta(Complex(0, 1)).value, 1e-11);
}

TEST(Cli, UsageErrorsExitTwo) {
  const RunResult bad = run_cli("lattice --tau 0 -1");
  EXPECT_EQ(bad.status, 2);
  EXPECT_NE(bad.err.find("NonPositiveImaginaryPart"), std::string::npos) << bad.err;
  EXPECT_TRUE(bad.out.empty());
  EXPECT_EQ(run_cli("").status, 2);
  EXPECT_EQ(run_cli("lattice").status, 2);
  EXPECT_EQ(run_cli("lattice --tau 0").status, 2);
  EXPECT_EQ(run_cli("lattice --tau 0 1 --route nope").status, 2);
  EXPECT_EQ(run_cli("lattice --tau 0 1 --basis 1 0 0 1").status, 2);
  EXPECT_EQ(run_cli("moduli-scan --b-min 0.5").status, 2);
  EXPECT_EQ(run_cli("moduli-scan --resolution 0").status, 2);
  EXPECT_EQ(run_cli("fekete").status, 2);
  EXPECT_EQ(run_cli("fekete --n 0").status, 2);
  EXPECT_EQ(run_cli("obstacle --h -1").status, 2);
  EXPECT_EQ(run_cli("obstacle --polygon 0 0 2 0 1 0.2 2 2 0 2").status, 2);
  EXPECT_EQ(run_cli("obstacle --disk --ellipse 1 2").status, 2);
  EXPECT_EQ(run_cli("obstacle --m 1.5").status, 2);
}

TEST(Cli, NumericalFailureExitsThree) {
  const RunResult r = run_cli("obstacle --h 0.05 --max-sweeps 1");
  EXPECT_EQ(r.status, 3);
  EXPECT_NE(r.err.find("NoConvergence"), std::string::npos);
  EXPECT_NE(r.err.find("residual"), std::string::npos);
}

TEST(Cli, HelpAndVersionExitZero) {
  EXPECT_EQ(run_cli("--help").status, 0);
  EXPECT_EQ(run_cli("obstacle --help").status, 0);
  const RunResult v = run_cli("--version");
  EXPECT_EQ(v.status, 0);
  EXPECT_NE(v.out.find(version), std::string::npos);
}

TEST(Cli, ModuliScan) {
  const RunResult one = run_cli("moduli-scan --resolution 1 --a-min 0.1 --b-min 1.2");
  ASSERT_EQ(one.status, 0) << one.err;
  const Json r = result_of(one);
  EXPECT_EQ(r.at("points"), 1);
  EXPECT_DOUBLE_EQ(r.at("argmin").at("a").get<double>(), 0.1);
  EXPECT_DOUBLE_EQ(r.at("argmin").at("b").get<double>(), 1.2);
  const RunResult grid = run_cli("moduli-scan --resolution 40 -f csv");
  ASSERT_EQ(grid.status, 0);
  EXPECT_EQ(grid.out.substr(0, 7), "a,b,W\r\n");
  const RunResult def = run_cli("moduli-scan");
  const Json d = result_of(def);
  EXPECT_NEAR(d.at("argmin").at("a").get<double>(), 0.5, 0.02);
  EXPECT_NEAR(d.at("argmin").at("b").get<double>(), std::sqrt(3.0) / 2, 0.02);
}

TEST(Cli, Fekete) {
  const RunResult one = run_cli("fekete --n 1");
  ASSERT_EQ(one.status, 0) << one.err;
  const Json r1 = result_of(one);
  EXPECT_EQ(r1.at("iterations"), 0);
  EXPECT_NEAR(r1.at("energy").at("value").get<double>(), w_eta(Complex(0, 1)).value, 1e-11);

  const RunResult two = run_cli("fekete --n 2 --seed 0");
  ASSERT_EQ(two.status, 0) << two.err;
  const Json r2 = result_of(two);
  EXPECT_TRUE(r2.at("converged").get<bool>());
  EXPECT_NEAR(r2.at("energy").at("value").get<double>(), w_eta(Complex(0, 1), 2.0).value, 1e-8);
  EXPECT_EQ(r2.at("restarts").size(), 16u);

  const auto trace = std::filesystem::temp_directory_path() / ("renergy_trace_" + std::to_string(::getpid()));
  const RunResult t = run_cli("fekete --n 3 --restarts 0 --trace " + trace.string());
  ASSERT_EQ(t.status, 0);
  const std::string csv = slurp(trace);
  std::filesystem::remove(trace);
  EXPECT_EQ(csv.substr(0, 23), "iter,energy,grad_norm\r\n");
  const RunResult tc = run_cli("fekete --n 3 --restarts 0 -f csv");
  EXPECT_EQ(tc.out, csv);
}

TEST(Cli, FeketeElkiesTable) {
  const RunResult e = run_cli("fekete --elkies --n-max 5 --restarts 4");
  ASSERT_EQ(e.status, 0) << e.err;
  const Json r = result_of(e);
  EXPECT_EQ(r.at("rows").size(), 4u);
  EXPECT_TRUE(r.at("within_band").get<bool>());
  const RunResult c = run_cli("fekete --conjecture1 --n-max 3 --restarts 2 -f csv");
  ASSERT_EQ(c.status, 0) << c.err;
  EXPECT_EQ(c.out.rfind("n,torus,", 0), 0u);
}

TEST(Cli, ObstacleExamples) {
  const RunResult full = run_cli("obstacle --disk --m 1 --h 0.0078125");
  ASSERT_EQ(full.status, 0) << full.err;
  const Json f = result_of(full).at("fields").at(0).at("coincidence");
  EXPECT_NEAR(f.at("area").get<double>(), pi, 8.0 * 0.0078125);
  EXPECT_EQ(f.at("cells"), result_of(full).at("unknowns"));

  const RunResult empty = run_cli("obstacle --disk --m 0.5 --h 0.03125");
  ASSERT_EQ(empty.status, 0);
  EXPECT_TRUE(result_of(empty).at("fields").at(0).at("coincidence").at("empty").get<bool>());

  const RunResult suite = run_cli("obstacle --disk --suite propA1 --h 0.03125");
  ASSERT_EQ(suite.status, 0) << suite.err;
  EXPECT_TRUE(result_of(suite).at("suite").at("pass").get<bool>());

  const RunResult csv = run_cli("obstacle --ellipse 1.2 0.8 --h 0.0625 --m 0.9,0.95 -f csv");
  ASSERT_EQ(csv.status, 0) << csv.err;
  EXPECT_EQ(csv.out.rfind("m,x,y,H,active\r\n", 0), 0u);

  for (const char* s : {"gradient-bound", "scale-law", "ellipse"}) {
    const RunResult r = run_cli(std::string("obstacle --h 0.015625 --suite ") + s);
    EXPECT_TRUE(r.status == 0 || r.status == 3) << s << ": " << r.err;
    if (r.status == 0) {
      EXPECT_TRUE(result_of(r).contains("suite"));
    }
  }
}

TEST(Cli, ByteIdenticalReruns) {
  for (const std::string args : {"lattice --tau 0.1 1.3 --route fourier", "moduli-scan --resolution 30",
                                 "fekete --n 4 --seed 11 --restarts 6", "obstacle --h 0.03125 --m 0.85,0.9",
                                 "theta-probe --samples 5"}) {
    const RunResult a = run_cli(args, "RENERGY_THREADS=1");
    const RunResult b = run_cli(args, "RENERGY_THREADS=3");
    const RunResult c = run_cli(args);
    ASSERT_EQ(a.status, 0) << args << a.err;
    EXPECT_EQ(a.out, b.out) << args;
    EXPECT_EQ(a.out, c.out) << args;
  }
}

TEST(Cli, OutputFileMatchesStdout) {
  const auto path = std::filesystem::temp_directory_path() / ("renergy_out_" + std::to_string(::getpid()) + ".csv");
  const RunResult toFile = run_cli("lattice --tau 0 1 -f csv -o " + path.string());
  ASSERT_EQ(toFile.status, 0);
  EXPECT_TRUE(toFile.out.empty());
  const RunResult toStdout = run_cli("lattice --tau 0 1 -f csv");
  EXPECT_EQ(slurp(path), toStdout.out);
  std::filesystem::remove(path);
  EXPECT_EQ(run_cli("lattice --tau 0 1 -o /nonexistent-dir/x.json").status, 2);
}
