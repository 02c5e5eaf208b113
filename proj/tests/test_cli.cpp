#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"

#include "deepcore/harness.hpp"
#include "deepcore/serialize.hpp"
#include "test_support.hpp"

using namespace deepcore;
using dctest::TmpDir;

namespace {

struct CliResult {
  int exit_code;
  std::string output;
};

// Runs the installed binary with stdout+stderr captured to a scratch file.
CliResult run_cli(const std::string& args, const TmpDir& tmp) {
  static int counter = 0;
  std::string capture = tmp.file("cli_out_" + std::to_string(++counter));
  std::string cmd = std::string(DEEPCORE_CLI_PATH) + " " + args + " > " +
                    capture + " 2>&1";
  int status = std::system(cmd.c_str());
  CliResult r;
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  std::ifstream in(capture);
  std::ostringstream ss;
  ss << in.rdbuf();
  r.output = ss.str();
  return r;
}

std::string write_tiny_config(const TmpDir& tmp, const std::string& out_dir) {
  ExperimentConfig cfg = dctest::tiny_experiment(out_dir);
  std::string path = tmp.file("config.json");
  save_json(to_json(cfg), path);
  return path;
}

}  // namespace

TEST_CASE("cli: bad invocations exit with the usage code") {
  TmpDir tmp("cli_usage");
  CHECK(run_cli("", tmp).exit_code == 2);
  CHECK(run_cli("frobnicate", tmp).exit_code == 2);
  CHECK(run_cli("evaluate --no-such-flag", tmp).exit_code == 2);

  CliResult help = run_cli("--help", tmp);
  CHECK(help.exit_code == 0);
  CHECK(help.output.find("train-zoo") != std::string::npos);
  CHECK(help.output.find("identify") != std::string::npos);
}

TEST_CASE("cli: config file problems map to distinct exit codes") {
  TmpDir tmp("cli_cfg");
  // Missing file: I/O failure.
  CHECK(run_cli("evaluate --config " + tmp.file("nope.json"), tmp).exit_code ==
        3);
  // Present but not parseable: schema/parse failure.
  std::string bad = tmp.file("bad.json");
  std::ofstream(bad) << "{ definitely not structured";
  CHECK(run_cli("evaluate --config " + bad, tmp).exit_code == 4);
  // Valid file, wrong schema.
  std::string wrong = tmp.file("wrong.json");
  save_json(to_json(make_synthetic(2, 3, 5, 0.05, 1)), wrong);
  CHECK(run_cli("evaluate --config " + wrong, tmp).exit_code == 4);
}

TEST_CASE("cli: evaluate runs the pipeline and honors --out") {
  TmpDir tmp("cli_eval");
  std::string cfg_path = write_tiny_config(tmp, tmp.file("ignored"));
  std::string out = tmp.file("results");

  CliResult r = run_cli("evaluate --config " + cfg_path + " --out " + out, tmp);
  CHECK(r.exit_code == 0);
  CHECK(r.output.find("method") != std::string::npos);
  CHECK(std::filesystem::exists(out + "/report.txt"));
  CHECK(std::filesystem::exists(out + "/verdicts.csv"));

  // The effective config echoes the override.
  ExperimentConfig eff = experiment_config_from_json(
      load_json(out + "/effective_config.json"));
  CHECK(eff.out_dir == out);
}

TEST_CASE("cli: environment variable supplies the default output dir") {
  TmpDir tmp("cli_env");
  std::string cfg_path = write_tiny_config(tmp, tmp.file("config_default"));
  std::string env_out = tmp.file("env_out");

  // setenv survives into the std::system child.
  REQUIRE(setenv("DEEPCORE_OUT", env_out.c_str(), 1) == 0);
  CliResult r = run_cli("train-zoo --config " + cfg_path, tmp);
  unsetenv("DEEPCORE_OUT");

  CHECK(r.exit_code == 0);
  CHECK(std::filesystem::exists(env_out + "/manifest.json"));
  CHECK(!std::filesystem::exists(tmp.file("config_default/manifest.json")));
}

TEST_CASE("cli: fingerprint then identify flags the victim itself") {
  TmpDir tmp("cli_identify");
  std::string out = tmp.file("fp_out");
  std::string cfg_path = write_tiny_config(tmp, out);

  CliResult fp = run_cli("fingerprint --config " + cfg_path, tmp);
  REQUIRE(fp.exit_code == 0);
  REQUIRE(std::filesystem::exists(out + "/fingerprint/fingerprint.json"));

  // The zoo artifacts carry the victim network; identify on the victim's own
  // file must report distance 0 and a piracy verdict under any threshold.
  CliResult zoo = run_cli("train-zoo --config " + cfg_path, tmp);
  REQUIRE(zoo.exit_code == 0);
  std::string victim = out + "/zoo/victim.json";
  REQUIRE(std::filesystem::exists(victim));

  CliResult id = run_cli("identify --fingerprint " + out +
                             "/fingerprint/fingerprint.json --victim " +
                             victim + " --suspect " + victim +
                             " --d1 0.5 --d2 0.01 --method l1",
                         tmp);
  CHECK(id.exit_code == 0);
  CHECK(id.output.find("piracy=1") != std::string::npos);
  CHECK(id.output.find("distance=0") != std::string::npos);

  // Same suspect under the cosine method.
  CliResult id_cos = run_cli("identify --fingerprint " + out +
                                 "/fingerprint/fingerprint.json --victim " +
                                 victim + " --suspect " + victim +
                                 " --d1 0.5 --d2 0.01 --method cos",
                             tmp);
  CHECK(id_cos.exit_code == 0);
  CHECK(id_cos.output.find("piracy=1") != std::string::npos);

  // Thresholds are required in some form.
  CliResult no_th = run_cli("identify --fingerprint " + out +
                                "/fingerprint/fingerprint.json --victim " +
                                victim + " --suspect " + victim,
                            tmp);
  CHECK(no_th.exit_code == 2);
}

TEST_CASE("cli: insight-curves writes the csv pair") {
  TmpDir tmp("cli_curves");
  std::string out = tmp.file("curves_out");
  std::string cfg_path = write_tiny_config(tmp, out);
  CliResult r = run_cli("insight-curves --config " + cfg_path, tmp);
  CHECK(r.exit_code == 0);
  CHECK(std::filesystem::exists(out + "/curves/core_trace.csv"));
  CHECK(std::filesystem::exists(out + "/curves/radius_gap.csv"));
}
