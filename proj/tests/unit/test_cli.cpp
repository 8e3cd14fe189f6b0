// Runs the nglab executable and checks exit codes and outputs.
#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace {

namespace fs = std::filesystem;

struct CliRun {
  int code = -1;
  std::string out;
};

CliRun run(const std::string& args, const fs::path& root) {
  const std::string cmd = "NGLAB_OUTPUT_ROOT=" + root.string() + " " NGLAB_CLI_PATH " " + args + " 2>&1";
  CliRun r;
  FILE* p = popen(cmd.c_str(), "r");
  if (!p) return r;
  char buf[4096];
  while (std::fgets(buf, sizeof buf, p)) r.out += buf;
  const int status = pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

fs::path root(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / "nglab_cli" / name;
  fs::remove_all(p);
  return p;
}

TEST(Cli, SimulateWritesCsvAndManifest) {
  const fs::path r = root("simulate");
  const CliRun res = run("simulate --loss ring-sine --scheme anti-pgd --steps 2000 --n-seeds 2 -o runs", r);
  EXPECT_EQ(res.code, 0) << res.out;
  EXPECT_TRUE(fs::exists(r / "runs" / "traj_seed1.csv"));
  EXPECT_TRUE(fs::exists(r / "runs" / "traj_seed2.csv"));
  EXPECT_TRUE(fs::exists(r / "runs" / "manifest.json"));
  std::ifstream in(r / "runs" / "traj_seed1.csv");
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header, "t,w_1,w_2,loss,grad_norm,dist_gamma,arclength");
}

TEST(Cli, ConfigFileAndOverrides) {
  const fs::path r = root("config");
  fs::create_directories(r);
  std::ofstream(r / "cfg.json") << R"({"loss": "ring-sine", "scheme": "anti-pgd",
    "plan": {"alpha": 0.3, "sigma": 0.03, "steps": 500}, "seed": 4, "output": "from_file"})";
  const CliRun a = run("simulate -c " + (r / "cfg.json").string(), r);
  EXPECT_EQ(a.code, 0) << a.out;
  EXPECT_TRUE(fs::exists(r / "from_file" / "traj_seed4.csv"));
  const CliRun b = run("simulate -c " + (r / "cfg.json").string() + " --seed 9 --set output=overridden", r);
  EXPECT_EQ(b.code, 0) << b.out;
  EXPECT_TRUE(fs::exists(r / "overridden" / "traj_seed9.csv"));
}

TEST(Cli, ConfigErrorsExitWithTwo) {
  const fs::path r = root("errors");
  EXPECT_EQ(run("simulate --loss nope --scheme anti-pgd", r).code, 2);
  EXPECT_EQ(run("simulate --loss ring-sine --scheme anti-pgd --alpha -1", r).code, 2);
  EXPECT_EQ(run("simulate -c /no/such/config.json", r).code, 2);
  EXPECT_EQ(run("simulate --no-such-flag", r).code, 2);
  EXPECT_EQ(run("frobnicate", r).code, 2);
  EXPECT_EQ(run("", r).code, 2);
  EXPECT_EQ(run("compare --loss ring-sine --scheme anti-pgd --level 0.1,0.1", r).code, 2);
  EXPECT_EQ(run("reg-report --loss ring-sine --scheme anti-pgd --probe 1,2,3", r).code, 2);
  EXPECT_EQ(run("accept 12", r).code, 2);
}

TEST(Cli, FailedChecksExitWithOne) {
  const fs::path r = root("fail");
  const CliRun ok = run("verify-phi --loss ring-sine", r);
  EXPECT_EQ(ok.code, 0) << ok.out;
  const CliRun bad = run("verify-phi --loss ring-sine --tol-jacobian 1e-30", r);
  EXPECT_EQ(bad.code, 1) << bad.out;
  EXPECT_NE(bad.out.find("FAIL"), std::string::npos);
}

TEST(Cli, LimitFlowCompareAndRegReport) {
  const fs::path r = root("others");
  const CliRun lf = run("limit-flow --loss ring-sine --scheme anti-pgd -T 2", r);
  EXPECT_EQ(lf.code, 0) << lf.out;
  EXPECT_NE(lf.out.find("verdict nondegenerate"), std::string::npos);
  const CliRun cmp = run("compare --loss ring-sine --scheme anti-pgd --alpha 0.3 --sigma 0.03 -T 2 --n-seeds 3", r);
  EXPECT_EQ(cmp.code, 0) << cmp.out;
  EXPECT_TRUE(fs::exists(r / "ring-sine_anti-pgd" / "compare.json"));
  const CliRun rep = run("reg-report --loss ring-sine --scheme sgld", r);
  EXPECT_EQ(rep.code, 0) << rep.out;
  EXPECT_NE(rep.out.find("verdict degenerate"), std::string::npos);
}

TEST(Cli, QuickAcceptIsMarkedSmoke) {
  const fs::path r = root("accept");
  const CliRun a = run("accept --quick 4 11", r);
  EXPECT_EQ(a.code, 0) << a.out;
  EXPECT_NE(a.out.find("C4 PASS [smoke]"), std::string::npos) << a.out;
  EXPECT_NE(a.out.find("C11 PASS [smoke]"), std::string::npos) << a.out;
  std::ifstream in(r / "accept" / "report.json");
  std::stringstream ss;
  ss << in.rdbuf();
  EXPECT_NE(ss.str().find("\"mode\": \"smoke\""), std::string::npos);
}

}  // namespace
