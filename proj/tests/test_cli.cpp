#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "bellsim/cli.hpp"

namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args) {
  args.insert(args.begin(), "bellsim");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  Run r;
  r.code = bellsim::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

fs::path fresh_dir(const std::string& name) {
  const auto d = fs::temp_directory_path() / ("bellsim_cli_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void spit(const fs::path& p, const std::string& body) { std::ofstream(p, std::ios::binary) << body; }

nlohmann::json report(const fs::path& dir) { return nlohmann::json::parse(slurp(dir / "report.json")); }

}  // namespace

TEST_CASE("list-scenarios and help") {
  const auto r = run({"list-scenarios"});
  CHECK(r.code == 0);
  for (const char* name : {"lf", "lhvm-socks", "m2-demo", "m3-demo", "quantum"}) {
    CHECK(r.out.find(name) != std::string::npos);
  }
  CHECK(run({"--help"}).code == 0);
  CHECK(run({}).code == 2);
  CHECK(run({"frobnicate"}).code == 2);
}

TEST_CASE("simulate lf") {
  const auto dir = fresh_dir("lf");
  const auto r = run({"simulate", "--scenario", "lf", "--windows", "100000", "--seed", "7", "--out", dir.string()});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("(1,1)  e_ab=1 ") != std::string::npos);
  const auto j = report(dir);
  CHECK(j["postselected"]["correlations"]["cells"][0]["e_ab"] == 1.0);
  CHECK(j["postselected"]["correlations"]["cells"][3]["e_ab"] == -1.0);
  const double s = j["postselected"]["chsh"]["s_max_abs"];
  CHECK(std::abs(s - 2.0) <= 5.0 * j["postselected"]["chsh"]["se_s"].get<double>());
  for (const char* f : {"coincidences.csv", "summary.csv", "correlators_raw.dat", "correlators_raw.caption.txt",
                        "chsh_postselected.dat", "chsh_postselected.caption.txt"}) {
    CHECK(fs::exists(dir / f));
  }
  CHECK_FALSE(fs::exists(dir / "stream_a.tsv"));
  // Two numeric columns per line in plot data.
  std::istringstream dat(slurp(dir / "chsh_postselected.dat"));
  std::string line;
  int lines = 0;
  while (std::getline(dat, line)) {
    std::istringstream ls(line);
    double x, y;
    std::string extra;
    CHECK(static_cast<bool>(ls >> x >> y));
    CHECK_FALSE(static_cast<bool>(ls >> extra));
    ++lines;
  }
  CHECK(lines == 8);
}

TEST_CASE("printed numbers are the written numbers") {
  const auto dir = fresh_dir("printed");
  const auto r = run({"simulate", "--scenario", "m2-demo", "--windows", "20000", "--seed", "3", "--out", dir.string()});
  REQUIRE(r.code == 0);
  std::istringstream csv(slurp(dir / "summary.csv"));
  std::string line;
  std::getline(csv, line);
  CHECK(line == "conditioning,x,y,n_raw,n_post,c_hat,e_ab,se_ab,e_a,se_a,e_b,se_b");
  int rows = 0;
  while (std::getline(csv, line)) {
    std::vector<std::string> f;
    std::stringstream ls(line);
    for (std::string cell; std::getline(ls, cell, ',');) f.push_back(cell);
    REQUIRE(f.size() == 12);
    const std::string printed = "(" + f[1] + "," + f[2] + ")  e_ab=" + f[6] + " se=" + f[7] + "  e_a=" + f[8];
    CHECK(r.out.find(printed) != std::string::npos);
    ++rows;
  }
  CHECK(rows == 8);
}

TEST_CASE("simulate config errors exit 2") {
  const auto dir = fresh_dir("cfg");
  const auto missing = run({"simulate", "--scenario", "lf", "--out", dir.string()});
  CHECK(missing.code == 2);
  CHECK(missing.err.find("seed required") != std::string::npos);
  CHECK(run({"simulate", "--scenario", "nope", "--seed", "1"}).code == 2);
  CHECK(run({"simulate", "--seed", "1"}).code == 2);
  CHECK(run({"simulate", "--scenario", "lf", "--seed", "x"}).code == 2);
  CHECK(run({"simulate", "--scenario", "lf", "--seed", "1", "--window-width", "0"}).code == 2);
  CHECK(run({"simulate", "--scenario", "lf", "--seed", "1", "--detection-rate", "1.5"}).code == 2);
  CHECK(run({"simulate", "--scenario", "lf", "--seed", "1", "--settings", "sometimes"}).code == 2);
  CHECK(run({"simulate", "--scenario", "lf", "--seed", "1", "--settings", "fixed", "--fixed-pair", "3,3"}).code == 2);
  CHECK(run({"simulate", "--scenario", "lf", "--seed", "1", "--windows", "5", "--duration", "50"}).code == 2);
  CHECK(run({"simulate", "--scenario", "lf", "--model", "m.txt", "--seed", "1"}).code == 2);
}

TEST_CASE("simulate model errors exit 3") {
  const auto dir = fresh_dir("model");
  const auto good = dir / "m2.model";
  REQUIRE(run({"scenario", "m2-demo", "--export", good.string()}).code == 0);

  auto text = slurp(good);
  auto bad = text;
  bad.replace(bad.find("p l0 l0 = 0.125"), 15, "p l0 l0 = 0.025");
  spit(dir / "unnormalized.model", bad);
  const auto r = run({"simulate", "--model", (dir / "unnormalized.model").string(), "--seed", "1", "--out", dir.string()});
  CHECK(r.code == 3);
  CHECK(r.err.find("source") != std::string::npos);

  auto garbled = text;
  garbled.replace(garbled.find("response l1 open = -1"), 21, "response l1 open = -7");
  spit(dir / "garbled.model", garbled);
  const auto g = run({"simulate", "--model", (dir / "garbled.model").string(), "--seed", "1"});
  CHECK(g.code == 3);
  CHECK(g.err.find("garbled.model:") != std::string::npos);

  // The exported model simulates exactly like the built-in scenario.
  const auto d1 = fresh_dir("model_a"), d2 = fresh_dir("model_b");
  REQUIRE(run({"simulate", "--model", good.string(), "--seed", "4", "--windows", "5000", "--out", d1.string()}).code == 0);
  REQUIRE(run({"simulate", "--scenario", "m2-demo", "--seed", "4", "--windows", "5000", "--out", d2.string()}).code == 0);
  CHECK(slurp(d1 / "coincidences.csv") == slurp(d2 / "coincidences.csv"));
  CHECK(slurp(d1 / "summary.csv") == slurp(d2 / "summary.csv"));
}

TEST_CASE("config file supplies options and flags override it") {
  const auto dir = fresh_dir("config");
  spit(dir / "run.ini", "[simulate]\nscenario = \"lhvm-socks\"\np-same = 1\nseed = 5\nwindows = 1000\nwindow-width = 20\n");
  const auto r = run({"--config", (dir / "run.ini").string(), "simulate", "--windows", "3000", "--out", dir.string()});
  REQUIRE(r.code == 0);
  const auto j = report(dir);
  CHECK(j["meta"]["seed"] == 5);
  CHECK(j["meta"]["windows"] == 3000);
  CHECK(j["meta"]["window_width_ns"] == 20);
  CHECK(j["meta"]["model"] == "lhvm-socks");
  CHECK(j["raw"]["chsh"]["s_max_abs"] == 2.0);
  CHECK(run({"--config", (dir / "missing.ini").string(), "list-scenarios"}).code == 2);
}

TEST_CASE("output directory defaults to BELLSIM_OUT") {
  const auto dir = fresh_dir("env");
  ::setenv("BELLSIM_OUT", dir.string().c_str(), 1);
  const auto r = run({"simulate", "--scenario", "lf", "--seed", "1", "--windows", "100"});
  ::unsetenv("BELLSIM_OUT");
  REQUIRE(r.code == 0);
  CHECK(fs::exists(dir / "report.json"));
}

TEST_CASE("outputs are byte-identical across thread counts") {
  const auto d1 = fresh_dir("t1"), d4 = fresh_dir("t4");
  for (auto [dir, threads] : {std::pair{d1, "1"}, std::pair{d4, "4"}}) {
    REQUIRE(run({"simulate", "--scenario", "m2-demo", "--seed", "99", "--windows", "150000",
                 "--detection-rate", "0.9", "--threads", threads, "--write-streams", "--out", dir.string()})
                .code == 0);
  }
  for (const auto& entry : fs::directory_iterator(d1)) {
    CAPTURE(entry.path().filename().string());
    CHECK(slurp(entry.path()) == slurp(d4 / entry.path().filename()));
  }
}

TEST_CASE("analyze") {
  SUBCASE("crafted streams give the hand-computed records") {
    const auto dir = fresh_dir("crafted");
    // A clicks at 3 and 7 share window 0 (7 is dropped); B's click at 12 is window 1.
    spit(dir / "a.tt", "# t\tsetting\toutcome\n3\t1\t+1\n7\t1\t-1\n41\t2\t-1\n");
    spit(dir / "b.tt", "12\t2\t-1\n44\t1\t+1\n58\t1\t+1\n");
    const auto r = run({"analyze", "--streams", (dir / "a.tt").string(), (dir / "b.tt").string(),
                        "--window-width", "10", "--out", dir.string()});
    CHECK(slurp(dir / "coincidences.csv") ==
          "window,x,y,a,b\n0,1,NA,1,0\n1,NA,2,0,-1\n4,2,1,-1,1\n5,NA,1,0,1\n");
    // Only one setting pair is populated.
    CHECK(r.code == 5);
    CHECK(r.err.find("setting pair (1,1)") != std::string::npos);
  }
  SUBCASE("all-(+1,+1) coincidence CSV") {
    const auto dir = fresh_dir("plus");
    std::string csv = "window,x,y,a,b\n";
    int w = 0;
    for (int x : {1, 2}) {
      for (int y : {1, 2}) {
        for (int i = 0; i < 5; ++i) csv += std::to_string(w++) + "," + std::to_string(x) + "," + std::to_string(y) + ",1,1\n";
      }
    }
    spit(dir / "c.csv", csv);
    const auto r = run({"analyze", "--coincidences", (dir / "c.csv").string(), "--out", dir.string()});
    REQUIRE(r.code == 0);
    const auto j = report(dir);
    for (const char* c : {"raw", "postselected"}) {
      for (const auto& cell : j[c]["correlations"]["cells"]) CHECK(cell["e_ab"] == 1.0);
      CHECK(j[c]["no_signalling"]["max_abs_delta"] == 0.0);
    }
  }
  SUBCASE("garbage line exits 4 naming the line") {
    const auto dir = fresh_dir("garbage");
    spit(dir / "a.tt", "1\t1\t+1\nthis is not a record\n");
    spit(dir / "b.tt", "2\t1\t+1\n");
    const auto r = run({"analyze", "--streams", (dir / "a.tt").string(), (dir / "b.tt").string(),
                        "--window-width", "10", "--out", dir.string()});
    CHECK(r.code == 4);
    CHECK(r.err.find("a.tt:2:") != std::string::npos);
    spit(dir / "c.csv", "window,x,y,a,b\n0,1,1,1,1\nnope\n");
    const auto c = run({"analyze", "--coincidences", (dir / "c.csv").string(), "--out", dir.string()});
    CHECK(c.code == 4);
    CHECK(c.err.find("c.csv:3:") != std::string::npos);
  }
  SUBCASE("round trip through simulate --write-streams") {
    const auto sim = fresh_dir("rt_sim"), ana = fresh_dir("rt_ana");
    REQUIRE(run({"simulate", "--scenario", "m2-demo", "--seed", "8", "--windows", "20000",
                 "--write-streams", "--out", sim.string()}).code == 0);
    REQUIRE(run({"analyze", "--streams", (sim / "stream_a.tsv").string(), (sim / "stream_b.tsv").string(),
                 "--settings-log", (sim / "settings.tsv").string(), "--window-width", "100", "--out", ana.string()})
                .code == 0);
    CHECK(slurp(sim / "coincidences.csv") == slurp(ana / "coincidences.csv"));
    CHECK(slurp(sim / "summary.csv") == slurp(ana / "summary.csv"));
  }
  SUBCASE("argument errors") {
    CHECK(run({"analyze"}).code == 2);
    CHECK(run({"analyze", "--streams", "a", "b"}).code == 2);
    CHECK(run({"analyze", "--coincidences", "/nonexistent.csv"}).code == 2);
  }
}

TEST_CASE("check-coupling") {
  const auto dir = fresh_dir("coupling");
  SUBCASE("L-F spec file") {
    spit(dir / "lf.spec",
         "settings_a = 1 -1\nsettings_b = 1 -1\n"
         "e_ab(1,1) = 1\ne_ab(1,-1) = 0\ne_ab(-1,1) = 0\ne_ab(-1,-1) = -1\n"
         "e_a(1,1) = 1\ne_a(1,-1) = 1\ne_a(-1,1) = 0\ne_a(-1,-1) = 0\n"
         "e_b(1,1) = 1\ne_b(-1,1) = 1\ne_b(1,-1) = 0\ne_b(-1,-1) = 0\n");
    const auto r = run({"check-coupling", "--spec", (dir / "lf.spec").string(), "--out", dir.string()});
    REQUIRE(r.code == 0);
    CHECK(r.out.rfind("feasible", 0) == 0);
    CHECK(r.out.find("p(+1,+1,+1,-1) = 0.5") != std::string::npos);
    CHECK(r.out.find("p(+1,-1,+1,+1) = 0.5") != std::string::npos);
    CHECK(fs::exists(dir / "witness.txt"));
    const auto j = nlohmann::json::parse(slurp(dir / "coupling.json"));
    CHECK(j["feasible"] == true);
  }
  SUBCASE("S = 4 correlators") {
    const auto r = run({"check-coupling", "--correlators", "1,1,1,-1"});
    CHECK(r.code == 0);
    CHECK(r.out.rfind("infeasible", 0) == 0);
    CHECK(r.out.find("value 4)") != std::string::npos);
  }
  SUBCASE("quantum canonical correlators") {
    const double h = std::sqrt(0.5);
    const auto r = run({"check-coupling", "--correlators",
                        std::to_string(h) + "," + std::to_string(h) + "," + std::to_string(h) + "," + std::to_string(-h)});
    CHECK(r.out.rfind("infeasible", 0) == 0);
  }
  SUBCASE("errors") {
    CHECK(run({"check-coupling"}).code == 2);
    spit(dir / "bad.spec", "settings_a = 1 2\nnonsense\n");
    const auto r = run({"check-coupling", "--spec", (dir / "bad.spec").string()});
    CHECK(r.code == 4);
    CHECK(r.err.find("bad.spec:2:") != std::string::npos);
  }
}

TEST_CASE("scenario command") {
  const auto dir = fresh_dir("scenario");
  const auto r = run({"scenario", "m2-demo", "--out", dir.string()});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("VIOLATES") != std::string::npos);
  const auto j = nlohmann::json::parse(slurp(dir / "expected.json"));
  CHECK(j["postselected"]["chsh"]["s_max_abs"] == 31.0 / 14);
  CHECK(j["raw"]["chsh"]["s_max_abs"] == 97.0 / 64);
  CHECK(run({"scenario", "quantum", "--angles", "0,0.1,0.2,0.3"}).code == 0);
  CHECK(run({"scenario", "nope"}).code == 2);
  CHECK(run({"scenario"}).code == 2);
}
