#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "coreguard/cli.hpp"
#include "coreguard/io.hpp"

using namespace coreguard;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(std::move(args), out, err);
  return {code, out.str(), err.str()};
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("coreguard_cli_" + std::string(
                                   ::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    std::ofstream(path("c.json"))
        << R"({"num_layers": 4, "d_model": 16, "num_heads": 2, "d_ffn": 32,
               "seq_len": 8, "vocab_size": 64})";
    std::ofstream(path("t.txt")) << "1 2 3 4 5 6 7 8\n\n9 10 11 12 13 14 15 63\n";
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  void gen_and_lock() {
    ASSERT_EQ(cli({"gen", "--config", path("c.json"), "--seed", "3", "--out", path("m.ckpt")})
                  .code,
              0);
    ASSERT_EQ(cli({"lock", "--in", path("m.ckpt"), "--seed", "4", "--out", path("l.ckpt"),
                   "--key-out", path("k.key")})
                  .code,
              0);
  }

  fs::path dir_;
};

bool one_error_line(const std::string& err, const std::string& kind) {
  return err.rfind("error: " + kind + ": ", 0) == 0 &&
         err.find('\n') == err.size() - 1;
}

}  // namespace

TEST_F(Cli, GenIsSeeded) {
  ASSERT_EQ(cli({"gen", "--config", path("c.json"), "--seed", "3", "--out", path("a")}).code, 0);
  ASSERT_EQ(cli({"gen", "--config", path("c.json"), "--seed", "3", "--out", path("b")}).code, 0);
  ASSERT_EQ(cli({"--seed", "4", "gen", "--config", path("c.json"), "--out", path("c")}).code, 0);
  EXPECT_EQ(io::read_file(path("a")), io::read_file(path("b")));
  EXPECT_NE(io::read_file(path("a")), io::read_file(path("c")));
}

TEST_F(Cli, LockReportsFractionAndKeyspace) {
  ASSERT_EQ(cli({"gen", "--config", path("c.json"), "--out", path("m.ckpt")}).code, 0);
  const auto r = cli({"lock", "--in", path("m.ckpt"), "--auth-pos", "3", "--out", path("l.ckpt"),
                      "--key-out", path("k.key")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("locked_fraction="), std::string::npos);
  EXPECT_NE(r.out.find("keyspace_bits=44.25"), std::string::npos);
  EXPECT_EQ(io::load_locked_model(path("l.ckpt")).auth_position(), 3u);
}

TEST_F(Cli, LockRefusesSharedOutputPath) {
  ASSERT_EQ(cli({"gen", "--config", path("c.json"), "--out", path("m.ckpt")}).code, 0);
  const auto r = cli({"lock", "--in", path("m.ckpt"), "--out", path("x"), "--key-out",
                      (dir_ / "." / "x").string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_TRUE(one_error_line(r.err, "usage")) << r.err;
  EXPECT_FALSE(fs::exists(path("x")));
}

TEST_F(Cli, RunAuthorizedAndUnauthorized) {
  gen_and_lock();
  const auto a = cli({"run", "--model", path("l.ckpt"), "--key", path("k.key"), "--input",
                      path("t.txt")});
  ASSERT_EQ(a.code, 0) << a.err;
  EXPECT_NE(a.out.find("ledger rounds=10 bytes=" + std::to_string(2 * 4 * 8 * (64 + 48))),
            std::string::npos)
      << a.out;
  EXPECT_NE(a.out.find("seq 1 logits_digest="), std::string::npos);
  const auto u = cli({"run", "--model", path("l.ckpt"), "--input", path("t.txt")});
  ASSERT_EQ(u.code, 0);
  EXPECT_NE(u.err.find("warning"), std::string::npos);
  EXPECT_NE(u.out.find("ledger rounds=0 bytes=0"), std::string::npos);
  EXPECT_NE(a.out, u.out);
}

TEST_F(Cli, RunValidatesInput) {
  gen_and_lock();
  std::ofstream(path("bad.txt")) << "1 2 3\n";
  auto r = cli({"run", "--model", path("l.ckpt"), "--input", path("bad.txt")});
  EXPECT_EQ(r.code, 1);
  EXPECT_TRUE(one_error_line(r.err, "input")) << r.err;
  std::ofstream(path("bad2.txt")) << "1 2 3 4 5 6 7 64\n";
  EXPECT_EQ(cli({"run", "--model", path("l.ckpt"), "--input", path("bad2.txt")}).code, 1);
  r = cli({"run", "--model", path("m.ckpt"), "--input", path("t.txt")});
  EXPECT_EQ(r.code, 1);
  std::ofstream(path("junk.ckpt")) << "not a checkpoint";
  r = cli({"run", "--model", path("junk.ckpt"), "--input", path("t.txt")});
  EXPECT_EQ(r.code, 1);
  EXPECT_TRUE(one_error_line(r.err, "format")) << r.err;
}

TEST_F(Cli, VerifyPassesAndFails) {
  gen_and_lock();
  auto r = cli({"verify", "--original", path("m.ckpt"), "--locked", path("l.ckpt"), "--key",
                path("k.key"), "--out", path("v.json")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("o'=o*pi"), std::string::npos);
  EXPECT_TRUE(fs::exists(path("v.json")));
  ASSERT_EQ(cli({"lock", "--in", path("m.ckpt"), "--seed", "9", "--out", path("l2.ckpt"),
                 "--key-out", path("k2.key")})
                .code,
            0);
  r = cli({"verify", "--original", path("m.ckpt"), "--locked", path("l.ckpt"), "--key",
           path("k2.key")});
  EXPECT_EQ(r.code, 1);
  EXPECT_TRUE(one_error_line(r.err, "verification")) << r.err;
}

TEST_F(Cli, BenchCsvAndJson) {
  auto r = cli({"bench", "--schemes", "coreguard,shadownet,tlg"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("llama3,coreguard,4718592,"), std::string::npos);
  EXPECT_NE(r.out.find("llama3,shadownet,"), std::string::npos);
  r = cli({"bench", "--configs", path("c.json"), "--out", path("r.json"), "--measure"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto bytes = io::read_file(path("r.json"));
  const auto j = nlohmann::json::parse(bytes.begin(), bytes.end());
  EXPECT_EQ(j["models"][0]["schemes"]["coreguard"]["measured"]["rounds"], 5);
  r = cli({"bench", "--schemes", "coreguard,magic"});
  EXPECT_EQ(r.code, 2);
  EXPECT_TRUE(one_error_line(r.err, "usage")) << r.err;
}

TEST_F(Cli, AttackKinds) {
  gen_and_lock();
  auto r = cli({"attack", "--kind", "differencing", "--model", path("l.ckpt"), "--key",
                path("k.key"), "--no-otp", "--traces", "5"});
  ASSERT_EQ(r.code, 0) << r.err;
  auto j = nlohmann::json::parse(r.out);
  EXPECT_EQ(j["key_accuracy"], 1.0);
  r = cli({"attack", "--kind", "simulate", "--model", path("l.ckpt"), "--key", path("k.key"),
           "--original", path("m.ckpt"), "--traces", "8", "--eval", "5", "--out",
           path("a.json")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(path("a.json")));
  r = cli({"attack", "--kind", "guess", "--model", path("l.ckpt"), "--key", path("k.key")});
  EXPECT_EQ(r.code, 2);
  r = cli({"attack", "--kind", "steal", "--model", path("l.ckpt"), "--key", path("k.key")});
  EXPECT_EQ(r.code, 2);
}

TEST_F(Cli, SweepWritesTable) {
  ASSERT_EQ(cli({"gen", "--config", path("c.json"), "--out", path("m.ckpt")}).code, 0);
  auto r = cli({"sweep", "--model", path("m.ckpt"), "--positions", "1,3", "--traces", "8",
                "--eval", "5"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out.rfind("auth_position,locked_fraction,", 0), 0u);
  EXPECT_NE(r.out.find("\n1,"), std::string::npos);
  EXPECT_NE(r.out.find("\n3,"), std::string::npos);
  EXPECT_EQ(cli({"sweep", "--model", path("m.ckpt"), "--positions", "4"}).code, 1);
  EXPECT_EQ(cli({"sweep", "--model", path("m.ckpt"), "--positions", "x"}).code, 2);
}

TEST_F(Cli, UsageErrors) {
  auto r = cli({});
  EXPECT_EQ(r.code, 2);
  EXPECT_TRUE(one_error_line(r.err, "usage")) << r.err;
  EXPECT_EQ(cli({"gen", "--out", path("x")}).code, 2);
  EXPECT_EQ(cli({"frobnicate"}).code, 2);
  EXPECT_EQ(cli({"--threads", "-1", "bench"}).code, 2);
  EXPECT_EQ(cli({"--help"}).code, 0);
}
