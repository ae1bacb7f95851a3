#include <doctest.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include <nlohmann/json.hpp>

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code = -1;
  std::string out;  // stdout and stderr
};

Result run(const std::string& args, const std::string& env = {}) {
  const std::string cmd = env + (env.empty() ? "" : " ") + std::string(DASAD_CLI_PATH) + " " + args + " 2>&1";
  Result r;
  FILE* p = popen(cmd.c_str(), "r");
  REQUIRE(p != nullptr);
  std::array<char, 4096> buf{};
  while (std::fgets(buf.data(), buf.size(), p) != nullptr) r.out += buf.data();
  const int status = pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

json base_config(const fs::path& out) {
  std::ifstream is(fs::path(DASAD_TEST_SOURCE_DIR) / "configs" / "smoke.json");
  json j = json::parse(is);
  j["data"]["mnist_dir"] = (fs::path(DASAD_TEST_DATA_DIR) / "mnist").string();
  j["data"]["train_cap_per_stratum"] = 64;
  j["data"]["test_cap_per_role"] = 40;
  j["train"]["epochs"] = 1;
  j["train"]["latent_dim"] = 3;
  j["train"]["hidden_units"] = 8;
  j["output_root"] = out.string();
  j["workers"] = 1;
  return j;
}

fs::path write_config(const fs::path& dir, const json& j) {
  fs::create_directories(dir);
  const fs::path p = dir / "config.json";
  std::ofstream(p) << j.dump(2);
  return p;
}

fs::path fresh(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("dasad_cli_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

}  // namespace

TEST_CASE("usage errors") {
  CHECK(run("--help").code == 0);
  CHECK(run("").code != 0);
  CHECK(run("frobnicate").code != 0);
  CHECK(run("prepare -c /nonexistent/config.json").code != 0);
  CHECK(run("train --cases 4").code != 0);
}

TEST_CASE("print-config applies overrides") {
  const fs::path dir = fresh("print");
  const fs::path cfg = write_config(dir, base_config(dir / "out"));
  const Result r = run("train -c " + cfg.string() + " --epochs 7 --cases 2 --seeds 4 5 --print-config");
  REQUIRE(r.code == 0);
  const json j = json::parse(r.out);
  CHECK(j["train"]["epochs"] == 7);
  CHECK(j["cases"] == json::array({2}));
  CHECK(j["seeds"] == json::array({4, 5}));

  const Result env = run("report -c " + cfg.string() + " --print-config", "DASAD_OUTPUT_ROOT=" + (dir / "elsewhere").string());
  CHECK(json::parse(env.out)["output_root"] == (dir / "elsewhere").string());
}

TEST_CASE("prepare verifies inputs and is idempotent") {
  const fs::path dir = fresh("prepare");
  json j = base_config(dir / "out");
  j["cases"] = json::array({3});
  const fs::path cfg = write_config(dir, j);
  Result r = run("prepare -c " + cfg.string());
  REQUIRE(r.code == 0);
  CHECK(r.out.find("1 built, 0 reused") != std::string::npos);
  const json manifest = json::parse(slurp(dir / "out" / "cache" / "case3.json"));
  CHECK(manifest.dump().find("[7,8,9]") != std::string::npos);
  r = run("prepare -c " + cfg.string());
  CHECK(r.code == 0);
  CHECK(r.out.find("0 built, 1 reused") != std::string::npos);

  SUBCASE("missing file") {
    const fs::path mn = dir / "mnist";
    fs::create_directories(mn);
    for (const auto& e : fs::directory_iterator(fs::path(DASAD_TEST_DATA_DIR) / "mnist")) {
      if (e.path().filename().string().starts_with("train-labels")) continue;
      fs::copy_file(e.path(), mn / e.path().filename());
    }
    json k = j;
    k["data"]["mnist_dir"] = mn.string();
    const Result m = run("prepare -c " + write_config(dir / "missing", k).string());
    CHECK(m.code != 0);
    CHECK(m.out.find("train-labels-idx1-ubyte") != std::string::npos);
  }
  SUBCASE("checksum mismatch") {
    json k = j;
    k["data"]["checksums"]["t10k-labels-idx1-ubyte.gz"] = std::string(64, '0');
    const Result m = run("prepare -c " + write_config(dir / "bad", k).string());
    CHECK(m.code != 0);
    CHECK(m.out.find("checksum mismatch") != std::string::npos);
    CHECK(m.out.find("update data.checksums") != std::string::npos);
  }
}

TEST_CASE("grid runs, resumes and reports") {
  const fs::path dir = fresh("grid");
  json j = base_config(dir / "out");
  j["variants"] = json::array({"prop-w-weights", "vae"});
  j["seeds"] = json::array({0, 1});
  const fs::path cfg = write_config(dir, j);

  CHECK(run("train -c " + cfg.string()).code != 0);  // nothing prepared yet
  REQUIRE(run("prepare -c " + cfg.string()).code == 0);
  Result r = run("train -c " + cfg.string());
  REQUIRE(r.code == 0);
  std::size_t done = 0;
  for (const auto& e : fs::recursive_directory_iterator(dir / "out" / "runs")) done += e.path().filename() == "DONE";
  CHECK(done == 4);
  const fs::path one = dir / "out" / "runs" / "vae" / "case1" / "seed1";
  CHECK(fs::exists(one / "losses.csv"));
  CHECK(slurp(one / "losses.csv").starts_with("epoch,recon,kl,domain,w_vae_mean,w_dom_mean,total,clamped_fraction"));
  const json meta = json::parse(slurp(one / "metadata.json"));
  CHECK(meta.contains("git_hash"));

  fs::remove(one / "DONE");
  r = run("train -c " + cfg.string());
  CHECK(r.code == 0);
  CHECK(r.out.find("already complete") != std::string::npos);
  CHECK(r.out.find("seed1 done") != std::string::npos);

  CHECK(run("report -c " + cfg.string()).code != 0);  // nothing evaluated
  REQUIRE(run("evaluate -c " + cfg.string()).code == 0);
  j["variants"] = json::array({"prop-w-weights", "vae", "2c-vmf-vae"});
  const fs::path cfg2 = write_config(dir / "more", j);
  r = run("report -c " + cfg2.string());
  REQUIRE(r.code == 0);
  CHECK(r.out.find("no evaluated runs for variant 2c-vmf-vae") != std::string::npos);
  CHECK(r.out.find("| Case 1 |") != std::string::npos);
  const json results = json::parse(slurp(dir / "out" / "report" / "results.json"));
  CHECK(results["seen"]["vae"]["RL"]["case_1"]["n"] == 2);
  CHECK(fs::exists(dir / "out" / "report" / "results.md"));
  CHECK_FALSE(fs::is_empty(dir / "out" / "report" / "plots"));
}

TEST_CASE("verify subcommand") {
  const fs::path dir = fresh("verify");
  fs::create_directories(dir);
  const Result r = run("verify --json " + (dir / "v.json").string());
  CHECK(r.code == 0);
  CHECK(r.out.find("all checks passed") != std::string::npos);
  CHECK(r.out.find("FAIL") == std::string::npos);
  CHECK(json::parse(slurp(dir / "v.json"))["all_pass"] == true);
}
