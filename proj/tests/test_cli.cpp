#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "json.hpp"
#include "nfield/cli.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result run(std::vector<std::string> args) {
  args.insert(args.begin(), "nfield");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = nfield::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), {}};
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("nfield_cli_" + std::to_string(::getpid()) + "_" +
            ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  json small() const {
    return json::parse(R"({
      "name": "small",
      "domain": {"kind": "ring", "l": 31.41592653589793, "n": 64},
      "model": {"q": 1, "L": 1.0,
                "firing": {"kind": "erf", "alpha": 10.0, "theta": 0.4},
                "kernel": {"kind": "gaussian_diff", "B": 1.5, "C": 7.0},
                "noise": {"sigma": 0.58},
                "init": {"mean": {"preset": "cosine", "offset": 0.0, "amplitude": 0.3, "k": 15},
                         "cov": {"preset": "equilibrium"}}},
      "run": {"T": 1.0, "dt": 0.01, "save_times": [0, 1], "seeds": [3], "k_max": 4}
    })");
  }
  std::string write(const json& j, const std::string& name = "cfg.json") const {
    const auto p = dir_ / name;
    std::ofstream(p) << j.dump(2);
    return p.string();
  }

  fs::path dir_;
};

}  // namespace

TEST_F(Cli, ValidatePreset) {
  const auto r = run({"validate", "--config", std::string(NFIELD_PRESET_DIR) + "/fig2e.json"});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("ok: 128 nodes"), std::string::npos);
}

TEST_F(Cli, AllPresetsValidate) {
  for (const auto& e : fs::directory_iterator(NFIELD_PRESET_DIR)) {
    const auto r = run({"validate", "--config", e.path().string()});
    EXPECT_EQ(r.code, 0) << e.path() << ": " << r.err;
  }
}

TEST_F(Cli, UnknownKeyRejected) {
  auto j = small();
  j["model"]["kernal"] = 1;
  const auto r = run({"validate", "--config", write(j)});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("kernal"), std::string::npos) << r.err;
}

TEST_F(Cli, MissingKernelNamed) {
  auto j = small();
  j["model"].erase("kernel");
  const auto r = run({"simulate-meanfield", "--config", write(j), "--out", (dir_ / "o").string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("model.kernel required"), std::string::npos) << r.err;
}

TEST_F(Cli, MalformedJson) {
  const auto p = dir_ / "bad.json";
  std::ofstream(p) << "{ \"name\": ";
  EXPECT_EQ(run({"validate", "--config", p.string()}).code, 2);
}

TEST_F(Cli, UnknownSubcommand) { EXPECT_EQ(run({"frobnicate"}).code, 2); }

TEST_F(Cli, DryRunPrintsResolvedConfig) {
  const auto r = run({"simulate-particle", "--dry-run", "--seed", "9", "--config", write(small())});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = json::parse(r.out);
  EXPECT_EQ(j["name"], "small");
  EXPECT_EQ(j["run"]["seeds"], json::array({9}));
  EXPECT_FALSE(fs::exists(dir_ / "out"));
}

TEST_F(Cli, ParticleRunIsReproducible) {
  const auto cfg = write(small());
  const auto a = dir_ / "a", b = dir_ / "b";
  ASSERT_EQ(run({"simulate-particle", "--config", cfg, "--out", a.string()}).code, 0);
  ASSERT_EQ(run({"simulate-particle", "--config", cfg, "--out", b.string()}).code, 0);
  std::size_t csvs = 0;
  for (const auto& e : fs::directory_iterator(a)) {
    if (e.path().extension() != ".csv") continue;
    ++csvs;
    EXPECT_EQ(slurp(e.path()), slurp(b / e.path().filename())) << e.path().filename();
  }
  EXPECT_GE(csvs, 3u);
  const auto meta = json::parse(slurp(a / "meta.json"));
  EXPECT_EQ(meta["command"], "simulate-particle");
  EXPECT_TRUE(meta.contains("version"));
  EXPECT_EQ(meta["config"]["run"]["seeds"], json::array({3}));
}

TEST_F(Cli, MeanFieldWritesFields) {
  const auto out = dir_ / "mf";
  const auto r = run({"simulate-meanfield", "--config", write(small()), "--out", out.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  std::size_t fields = 0;
  for (const auto& e : fs::directory_iterator(out))
    if (e.path().filename().string().rfind("field_t", 0) == 0) ++fields;
  EXPECT_EQ(fields, 2u);
  const std::string body = slurp(out / "field_t00001.000000.csv");
  EXPECT_EQ(body.substr(0, body.find('\n')), "x,m_1,V_11");
}

TEST_F(Cli, DivergenceExitsNumeric) {
  auto j = small();
  j["model"]["L"] = -500.0;
  j["model"]["init"]["cov"] = {{"preset", "zero"}};
  j["run"]["T"] = 5.0;
  j["run"]["save_times"] = {5.0};
  const auto r = run({"simulate-particle", "--config", write(j), "--out", (dir_ / "o").string()});
  EXPECT_EQ(r.code, 3) << r.err;
}
