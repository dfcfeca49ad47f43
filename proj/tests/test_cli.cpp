// End-to-end checks of the command-line tool: subcommand round trips,
// determinism of generated artifacts, exit codes.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

struct CommandResult {
  int exit_code = -1;
  std::string output;
};

CommandResult run_cli(const std::string& args) {
  const std::string cmd = std::string(CSIPRED_CLI_PATH) + " " + args + " 2>&1";
  std::array<char, 4096> buf{};
  CommandResult res;
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  while (fgets(buf.data(), buf.size(), pipe)) res.output += buf.data();
  const int status = pclose(pipe);
  res.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return res;
}

std::string read_file(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

fs::path work_dir() {
  const auto dir = fs::temp_directory_path() / "csipred_cli_test";
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

const std::string kTinyScenario =
    " --antennas-v 2 --antennas-h 2 --n-slot 10 --paths 5 --frames 50";

}  // namespace

TEST_CASE("generate: determinism, overwrite protection, sidecar") {
  const auto dir = work_dir();
  const std::string ds1 = (dir / "a.bin").string();
  const std::string ds2 = (dir / "b.bin").string();

  auto r1 = run_cli("generate --out " + ds1 + kTinyScenario + " --seed 9");
  CHECK(r1.exit_code == 0);
  CHECK(r1.output.find("40/5/5") != std::string::npos);

  auto r2 = run_cli("generate --out " + ds2 + kTinyScenario + " --seed 9");
  CHECK(r2.exit_code == 0);
  CHECK(read_file(ds1) == read_file(ds2));  // byte-identical for equal seeds

  auto r3 = run_cli("generate --out " + ds1 + kTinyScenario + " --seed 9");
  CHECK(r3.exit_code != 0);  // refuses to overwrite
  auto r4 = run_cli("generate --out " + ds1 + kTinyScenario + " --seed 9 --force");
  CHECK(r4.exit_code == 0);

  CHECK(fs::exists(ds1 + ".json"));
  CHECK(fs::exists(dir / "resolved_config_generate.json"));
}

TEST_CASE("train then evaluate produces checkpoint, history and records") {
  const auto dir = work_dir();
  const std::string ds = (dir / "ds.bin").string();
  REQUIRE(run_cli("generate --out " + ds + kTinyScenario + " --seed 4").exit_code == 0);

  auto tr = run_cli("train --dataset " + ds + " --model lstm --snr-db 20 --seed 2 --epochs 2" +
                    " --batch-size 20 --l-train 6 --delta-train 2 --out-dir " + dir.string());
  CHECK(tr.exit_code == 0);
  const std::string ckpt = (dir / "lstm_snr20_seed2.ckpt").string();
  CHECK(fs::exists(ckpt));
  CHECK(fs::exists(ckpt + ".history.csv"));

  auto ev = run_cli("evaluate --checkpoint " + ckpt + " --dataset " + ds +
                    " --snr-db 20 --l 6 --delta 2 --seed 2 --out-dir " + dir.string());
  CHECK(ev.exit_code == 0);
  const std::string records = read_file(dir / "records.csv");
  CHECK(records.rfind("model,snr_db,l,delta,nmse,seed,runtime_s,checkpoint", 0) == 0);
  CHECK(records.find("lstm,20,6,2,") != std::string::npos);

  // off-length evaluation on a different-length history is recorded, not fatal
  auto ev2 = run_cli("evaluate --checkpoint " + ckpt + " --dataset " + ds +
                     " --snr-db 20 --l 4 --delta 2 --seed 2 --out-dir " + dir.string());
  CHECK(ev2.exit_code == 0);
}

TEST_CASE("paramcount reports the reference totals") {
  auto r = run_cli("paramcount --model lstm");
  CHECK(r.exit_code == 0);
  CHECK(r.output.find("264448") != std::string::npos);
  CHECK(r.output.find("+0") != std::string::npos);

  auto t = run_cli("paramcount --model transformer-rpe");
  CHECK(t.exit_code == 0);
  CHECK(t.output.find("178624") != std::string::npos);
  CHECK(t.output.find("178752") != std::string::npos);

  auto a = run_cli("paramcount");
  CHECK(a.exit_code == 0);
  CHECK(a.output.find("370832") != std::string::npos);
}

TEST_CASE("gradcheck subcommand passes for a tiny family") {
  auto r = run_cli("gradcheck --model transformer-rpe --probes 40");
  CHECK(r.exit_code == 0);
  CHECK(r.output.find("PASS") != std::string::npos);
}

TEST_CASE("unknown model family fails with a nonzero exit code") {
  auto r = run_cli("gradcheck --model not-a-model");
  CHECK(r.exit_code != 0);
  CHECK(r.output.find("unknown model family") != std::string::npos);
}
