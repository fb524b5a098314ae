#include "rsb/cli.hpp"
#include "rsb/invariants.hpp"

#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Run {
  int code;
  std::string out, err;
};

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("rsb_cli_test_" + name);
  fs::remove_all(p);
  return p;
}

Run rsb_run(std::vector<std::string> args) {
  std::ostringstream out, err;
  int code = rsb::cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

json artifact(const fs::path& dir, const std::string& command) {
  std::ifstream f(dir / (command + ".json"));
  REQUIRE(f.good());
  return json::parse(f);
}

}  // namespace

TEST_CASE("eval-psi example") {
  auto dir = scratch("psi");
  auto r = rsb_run({"eval-psi", "--c", "1", "--beta", "1", "--m", "0,0", "--J", "+1", "--out", dir.string()});
  REQUIRE(r.code == 0);
  auto doc = artifact(dir, "eval-psi");
  CHECK(doc["result"]["psi_edge"].get<double>() == doctest::Approx(1.8200751916029178).epsilon(1e-14));
  CHECK(doc["result"]["psi_edge"].get<double>() == doctest::Approx(1.8200759).epsilon(2e-6));
  CHECK(doc["command"] == "eval-psi");
  CHECK(doc["config_digest"].get<std::string>().size() == 16);
  CHECK(!doc["version"].get<std::string>().empty());
  CHECK(json::parse(r.out)["psi_vertex"].get<double>() == doctest::Approx(3.6401503832058356));

  // digest ignores the output location, but not the inputs
  auto dir2 = scratch("psi2");
  rsb_run({"eval-psi", "--c", "1", "--beta", "1", "--m", "0,0", "--J", "+1", "--out", dir2.string()});
  CHECK(artifact(dir2, "eval-psi")["config_digest"] == doc["config_digest"]);
  rsb_run({"eval-psi", "--c", "1", "--beta", "2", "--m", "0,0", "--J", "+1", "--out", dir2.string()});
  CHECK(artifact(dir2, "eval-psi")["config_digest"] != doc["config_digest"]);
}

TEST_CASE("usage errors") {
  CHECK(rsb_run({}).code == 1);
  CHECK(rsb_run({"frobnicate"}).code == 1);
  CHECK(rsb_run({"eval-psi", "--c", "1"}).code == 1);
  CHECK(rsb_run({"eval-psi", "--c", "1", "--m", "0,0", "--J", "+2", "--out", scratch("e").string()}).code == 1);
  CHECK(rsb_run({"eval-psi", "--c", "1", "--m", "0,0,0", "--J", "+1", "--out", scratch("e").string()}).code == 1);
  CHECK(rsb_run({"oracle", "--n", "16"}).code == 1);  // no seed
  CHECK(rsb_run({"invariants", "--suite", "nonsense", "--seed", "1"}).code == 1);
  CHECK(rsb_run({"eval-psi", "--help"}).code == 0);
  CHECK(rsb_run({"--help"}).code == 0);
  auto bad = scratch("badcfg");
  fs::create_directories(bad);
  std::ofstream(bad / "cfg.ini") << "this is [not valid\n";
  CHECK(rsb_run({"eval-psi", "--config", (bad / "cfg.ini").string()}).code == 1);
  CHECK(rsb_run({"eval-psi", "--config", (bad / "missing.ini").string()}).code == 1);
}

TEST_CASE("config file with overrides") {
  auto dir = scratch("cfg");
  fs::create_directories(dir);
  std::ofstream(dir / "run.ini") << "c=2\nbeta=0.5\nm=0.1,0.2,0.3,0.4\nJ=+1,-1\nout=" << dir.string() << "\n";
  auto a = rsb_run({"eval-psi", "--config", (dir / "run.ini").string()});
  REQUIRE(a.code == 0);
  double base = json::parse(a.out)["psi_edge"];
  auto b = rsb_run({"eval-psi", "--config", (dir / "run.ini").string(), "--beta", "0.9"});
  REQUIRE(b.code == 0);
  double over = json::parse(b.out)["psi_edge"];
  CHECK(base != over);
  auto c = rsb_run({"eval-psi", "--c", "2", "--beta", "0.9", "--m", "0.1,0.2,0.3,0.4", "--J", "+1,-1", "--out",
                    dir.string()});
  CHECK(json::parse(c.out)["psi_edge"].get<double>() == over);
}

TEST_CASE("seeded runs are reproducible") {
  auto dir = scratch("seed");
  std::vector<std::string> args{"eval-krsb", "--c", "2", "--beta", "1", "--leaves", "0.2,-0.4,0.5,0.1",
                                "--x", "0,0.5,1", "--evaluator", "mc", "--outer", "2000", "--inner", "16",
                                "--seed", "11", "--out", dir.string()};
  auto a = rsb_run(args);
  REQUIRE(a.code == 0);
  auto b = rsb_run(args);
  CHECK(a.out == b.out);
  args.insert(args.end(), {"--threads", "1"});
  auto c = rsb_run(args);
  CHECK(a.out == c.out);
  auto doc = artifact(dir, "eval-krsb");
  CHECK(doc["seed"] == 11);
  args[args.size() - 5] = "12";
  CHECK(rsb_run(args).out != a.out);
}

TEST_CASE("statistical checks map to exit codes") {
  auto dir = scratch("stat");
  auto ok = rsb_run({"equivalence", "--c", "1", "--leaves", "0.3,-0.6,0.8,0.1", "--x", "0,0.5,1", "--q", "0,0.5,1",
                     "--outer", "20000", "--inner", "64", "--seed", "3", "--out", dir.string()});
  CHECK(ok.code == 0);
  auto rep = artifact(dir, "equivalence")["result"];
  CHECK(rep.contains("p_hat_k"));
  CHECK(rep.contains("p_full"));
  CHECK(rep.contains("se"));
  CHECK(rep.contains("z"));
  // one inner sample leaves the full Jensen bias in place
  auto biased = rsb_run({"equivalence", "--c", "1", "--leaves", "0.9,-0.9,0.9,-0.9", "--x", "0,0.2,1", "--q",
                         "0,0.5,1", "--outer", "20000", "--inner", "1", "--no-stratify", "--seed", "3", "--out",
                         dir.string()});
  CHECK(biased.code == 2);
}

TEST_CASE("invariants and artifacts") {
  auto dir = scratch("inv");
  auto r = rsb_run({"invariants", "--suite", "martingale", "--seed", "7", "--instances", "3", "--outer", "2000",
                    "--out", dir.string()});
  CHECK(r.code == 0);
  auto doc = artifact(dir, "invariants");
  CHECK(doc["result"]["suites"][0]["name"] == "martingale");
  std::ifstream csv(dir / "girsanov.csv");
  std::string header;
  std::getline(csv, header);
  CHECK(header == "instance,level,x_l,mean_dphi,weight_mean,weight_se");
}

TEST_CASE("other commands") {
  auto dir = scratch("misc");
  auto d = rsb_run({"discretize-mu", "--power", "2", "--tol", "0.015625", "--out", dir.string()});
  CHECK(d.code == 0);
  CHECK(json::parse(d.out)["sup_distance"].get<double>() <= 0.015625);
  CHECK(fs::exists(dir / "discretize-mu.csv"));

  auto o = rsb_run({"oracle", "--n", "10", "--c", "3", "--beta", "0.5", "--samples", "10", "--seed", "1", "--out",
                    dir.string()});
  CHECK(o.code == 0);

  auto opt = rsb_run({"optimize", "--c", "2", "--beta", "1.5", "--K", "0,1", "--evaluations", "60", "--seed", "2",
                      "--out", dir.string()});
  CHECK(opt.code == 0);
  CHECK(fs::exists(dir / "optimize-trace-K1.csv"));

  auto q = rsb_run({"q-invariance", "--c", "1", "--leaves", "0.3,-0.6,0.8,0.1", "--x", "0,0.5,1", "--outer", "4000",
                    "--inner", "16", "--seed", "4", "--out", dir.string()});
  CHECK(q.code == 0);

  auto f = rsb_run({"eval-full-rsb", "--c", "2", "--leaves", "0,0,0,0", "--seed", "1", "--out", dir.string()});
  CHECK(f.code == 0);
  CHECK(json::parse(f.out)["value"]["value"].get<double>() == doctest::Approx(2.2538560220859450).epsilon(1e-12));
}

TEST_CASE("franz-leone example") {
  auto dir = scratch("fl");
  auto r = rsb_run({"franz-leone", "--n", "16", "--c", "3", "--beta", "0.5", "--seed", "1", "--out", dir.string()});
  CHECK(r.code == 0);
  auto res = json::parse(r.out);
  CHECK(res.contains("bound"));
  CHECK(res.contains("estimate"));
  CHECK(res["gap"].get<double>() >= -0.08);
}

TEST_CASE("environment selects the artifact directory") {
  auto dir = scratch("env");
  std::string cmd = "RSB_OUT_DIR=" + dir.string() + " " RSB_TOOL " eval-psi --c 1 --m 0,0 --J -1 > /dev/null";
  CHECK(std::system(cmd.c_str()) == 0);
  CHECK(fs::exists(dir / "eval-psi.json"));
  CHECK(rsb::cli::output_dir("x") == fs::path("x"));
}

TEST_CASE("property suites on small budgets") {
  rsb::NestedPlan plan{1500, {8}};
  rsb::RngStream rng(21);
  CHECK(rsb::bound_suite(rng, 5, plan).passed);
  CHECK(rsb::monotone_suite(rng, 5, plan).passed);
  CHECK(rsb::convexity_suite(rng, 5, plan).passed);
  auto m = rsb::martingale_suite(rng, 3, plan);
  CHECK(m.passed);
  CHECK(m.details.size() == 3);
}
