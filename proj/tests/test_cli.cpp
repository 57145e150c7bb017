// Exercises the installed CLI binary end to end: exit codes, stderr
// diagnostics, and the run -> summarize flow.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

#ifndef ALTLAB_CLI_PATH
#error "ALTLAB_CLI_PATH must point at the altlab binary"
#endif

struct CliResult {
  int exit_code = -1;
  std::string out, err;
};

CliResult run_cli(const std::string& args, const fs::path& dir) {
  const fs::path out_file = dir / "stdout.txt";
  const fs::path err_file = dir / "stderr.txt";
  const std::string cmd = std::string(ALTLAB_CLI_PATH) + " " + args + " > " + out_file.string() +
                          " 2> " + err_file.string();
  const int status = std::system(cmd.c_str());
  CliResult r;
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  const auto slurp = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
  r.out = slurp(out_file);
  r.err = slurp(err_file);
  return r;
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::path("cli_test_tmp") / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all("cli_test_tmp"); }
};

fs::path write_config(const fs::path& dir, const std::string& body) {
  const fs::path p = dir / "config.json";
  std::ofstream out(p, std::ios::binary);
  out << body;
  return p;
}

}  // namespace

TEST_CASE("validate: ok on a good config, exit 1 naming the divisibility violation") {
  TempDir tmp("validate");
  const fs::path good = write_config(tmp.path, R"({
    "env": {"name": "pendulum"},
    "algorithm": "sac",
    "strategy": "altnet",
    "update_budget": 200000,
    "replay_ratio": 4,
    "total_env_steps": 1000,
    "seeds": [1],
    "output_dir": "unused"
  })");
  const CliResult ok = run_cli("validate " + good.string(), tmp.path);
  CHECK(ok.exit_code == 0);
  CHECK(ok.out.find("ok") != std::string::npos);

  // 200000 updates / (3 * 2) is not an integer
  const fs::path bad = write_config(tmp.path, R"({
    "env": {"name": "pendulum"},
    "algorithm": "sac",
    "strategy": "altnet",
    "update_budget": 200000,
    "replay_ratio": 3,
    "total_env_steps": 1000,
    "seeds": [1],
    "output_dir": "unused"
  })");
  const CliResult fail = run_cli("validate " + bad.string(), tmp.path);
  CHECK(fail.exit_code == 1);
  CHECK(fail.err.find("divis") != std::string::npos);

  const CliResult missing = run_cli("validate no_such.json", tmp.path);
  CHECK(missing.exit_code == 2);  // I/O failure, not a config error
  CHECK(!missing.err.empty());
}

TEST_CASE("run then summarize round-trips through the binary") {
  TempDir tmp("runflow");
  const fs::path out_dir = tmp.path / "exp";
  const fs::path cfg = write_config(tmp.path, R"({
    "env": {"name": "pendulum"},
    "algorithm": "sac",
    "strategy": "standard_reset",
    "update_budget": 40,
    "total_env_steps": 60,
    "eval_interval": 30,
    "eval_episodes": 1,
    "seeds": [1],
    "buffer_capacity": 100,
    "sac": {"hidden": [4], "batch_size": 8, "warmup_steps": 20},
    "output_dir": ")" + out_dir.string() + R"("
  })");

  const CliResult run = run_cli("run " + cfg.string(), tmp.path);
  CHECK(run.exit_code == 0);
  CHECK(run.out.find("manifest.json") != std::string::npos);
  CHECK(fs::exists(out_dir / "manifest.json"));

  const CliResult sum = run_cli("summarize " + out_dir.string(), tmp.path);
  CHECK(sum.exit_code == 0);
  CHECK(sum.out.find("sac_standard_reset") != std::string::npos);

  const CliResult nothing = run_cli("summarize " + (tmp.path / "void").string(), tmp.path);
  CHECK(nothing.exit_code == 2);

  const CliResult usage = run_cli("frobnicate", tmp.path);
  CHECK(usage.exit_code != 0);
}
