#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "n2ce/cli.hpp"
#include "n2ce/config.hpp"

using namespace n2ce;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("n2ce_cli_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

struct CliResult {
  int code = 0;
  std::string out, err;
};

CliResult run(std::vector<std::string> args) {
  std::ostringstream out, err;
  CliResult r;
  r.code = run_cli(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

CliResult run_with_config(const std::string& sub, const fs::path& dir, const std::string& json) {
  const fs::path cfg = dir / "input.json";
  std::ofstream(cfg) << json;
  return run({sub, "--config", cfg.string(), "--out", (dir / "out").string()});
}

nlohmann::json last_error(const std::string& err) {
  const auto lines = lines_of(err);
  REQUIRE_FALSE(lines.empty());
  return nlohmann::json::parse(lines.back());
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("config round trip") {
    const ExperimentConfig defaults;
    const std::string text = serialize_config(defaults);
    CHECK(serialize_config(parse_config(text)) == text);

    const ExperimentConfig custom = parse_config(R"({"seed": 9, "trajectory": {"step_size": 0.1234567890123456789,
        "estimators": [{"estimator": "N2CE", "M": 1.5}, {"estimator": "NWJ"}]},
        "telescoping": {"schedule": "custom", "sigma_squared": [0.2, 0.7, 1.0]}})");
    CHECK(custom.seed == 9);
    CHECK(custom.trajectory.estimators.size() == 2);
    CHECK(custom.trajectory.estimators[0] == ObjectiveKind::n2ce(1.5));
    const ExperimentConfig again = parse_config(serialize_config(custom));
    CHECK(again.trajectory.step_size == custom.trajectory.step_size);
    CHECK(serialize_config(again) == serialize_config(custom));
  }

  TEST_CASE("config errors list every offending key") {
    try {
      parse_config(R"({"trajectory": {"step_sise": 0.2, "iterations": 1.5}, "bogus": 1, "sweep": {"dim": 3}})");
      FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
      std::set<std::string> where;
      for (const auto& i : e.issues()) where.insert(i.location);
      CHECK(where.count("/trajectory/step_sise"));
      CHECK(where.count("/trajectory/iterations"));
      CHECK(where.count("/bogus"));
      CHECK(where.count("/sweep/dim"));
    }
    CHECK_THROWS_AS(parse_config("{not json"), ConfigError);
    CHECK_THROWS_AS(parse_config("[1, 2]"), ConfigError);
    CHECK_THROWS_AS(parse_config(R"({"telescoping": {"schedule": "custom", "sigma_squared": [0.5, 0.4]}})"), ConfigError);
    CHECK_THROWS_AS(parse_config(R"({"trajectory": {"estimators": [{"estimator": "N2CE", "M": 0.5}]}})"), ConfigError);
  }

  TEST_CASE("usage errors") {
    const CliResult none = run({});
    CHECK(none.code == 2);
    const CliResult unknown = run({"frobnicate"});
    CHECK(unknown.code == 2);
    CHECK(unknown.err.find("usage: n2ce") != std::string::npos);
    for (const auto& name : subcommand_names()) CHECK(unknown.err.find(name) != std::string::npos);
    CHECK(last_error(unknown.err)["error"] == "usage");
    CHECK(run({"gradcheck", "--no-such-flag"}).code == 2);
    CHECK(subcommand_names().size() == 11);
  }

  TEST_CASE("invalid config exits with a machine-readable record") {
    const fs::path dir = fresh_dir("badconfig");
    const CliResult r = run_with_config("trajectory", dir, R"({"trajectory": {"repeats": "many", "extra": true}})");
    CHECK(r.code == 3);
    const auto err = last_error(r.err);
    CHECK(err["error"] == "config");
    CHECK(err["issues"].size() == 2);
    CHECK(run({"gradcheck", "--config", (dir / "missing.json").string(), "--out", dir.string()}).code == 1);
  }

  TEST_CASE("numeric failures exit with code 4") {
    const fs::path dir = fresh_dir("numeric");
    const CliResult r = run_with_config("svgd-sample", dir, R"({"sampler": {"svgd_initial_step": 1e300, "svgd_steps": 50}})");
    CHECK(r.code == 4);
    const auto err = last_error(r.err);
    CHECK(err["error"] == "numeric");
    CHECK(err.contains("step"));
  }

  TEST_CASE("gradcheck writes its table and sidecar") {
    const fs::path dir = fresh_dir("gradcheck");
    const CliResult r = run({"gradcheck", "--out", dir.string(), "--seed", "4"});
    REQUIRE(r.code == 0);
    const auto rows = lines_of(slurp(dir / "gradcheck.csv"));
    CHECK(rows.front() == "check,error,tolerance,pass");
    for (std::size_t i = 1; i < rows.size(); ++i) CHECK(rows[i].substr(rows[i].size() - 4) == "true");
    const ExperimentConfig sidecar = parse_config(slurp(dir / "resolved_config.json"));
    CHECK(sidecar.seed == 4);
    CHECK(fs::exists(dir / "run.log"));
  }

  TEST_CASE("csv schemas") {
    const fs::path dir = fresh_dir("schemas");
    const std::string cfg = R"({
      "trajectory": {"repeats": 2, "iterations": 10, "samples_per_iter": 200},
      "sweep": {"repeats": 2},
      "bias_decay": {"n": 1000, "repeats": 2},
      "converge": {"kappa_samples": 10000, "samples_per_iter": 2000},
      "divergence": {"n": 1000}
    })";
    std::ofstream(dir / "cfg.json") << cfg;
    auto header = [&](const std::string& sub, const std::string& file) {
      const CliResult r = run({sub, "--config", (dir / "cfg.json").string(), "--out", (dir / sub).string()});
      REQUIRE(r.code == 0);
      return lines_of(slurp(dir / sub / file));
    };
    CHECK(header("trajectory", "trajectory.csv").front() == "run_id,iter,distance,grad_error");
    const auto sweep = header("mse-sweep", "mse_sweep.csv");
    CHECK(sweep.front() == "estimator,M,n,repeats,mse_mean,mse_std");
    CHECK(sweep.size() == 10);
    const auto bias = header("bias-decay", "bias_decay.csv");
    CHECK(bias.front() == "M,grad_error_mean,grad_error_stderr");
    CHECK(bias.size() == 6);
    CHECK(slurp(dir / "bias-decay" / "run.log").find("log-log slope") != std::string::npos);
    CHECK(header("converge-expfam", "converge.csv").front() == "kappa,delta,bound,first_hit,success");
    CHECK(header("divergence-check", "divergence.csv").front() == "M,alpha,mc_bound,quadrature,stderr");
    for (const auto& entry : fs::recursive_directory_iterator(dir))
      if (entry.path().extension() == ".csv") CHECK(slurp(entry.path()).find('\r') == std::string::npos);
  }

  TEST_CASE("output directory from the environment") {
    const fs::path dir = fresh_dir("env");
    ::setenv("N2CE_OUT", dir.string().c_str(), 1);
    const CliResult r = run({"gradcheck"});
    ::unsetenv("N2CE_OUT");
    CHECK(r.code == 0);
    CHECK(fs::exists(dir / "gradcheck.csv"));
  }
}
