// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lego/cli.hpp"

namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code;
  std::string out, err;
};

Outcome lego_run(std::initializer_list<std::string> args) {
  std::vector<std::string> store{"lego"};
  store.insert(store.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& a : store) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = lego::cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "lego_cli_test";
  fs::create_directories(dir);
  return dir / name;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

}  // namespace

TEST(Cli, PresetsLine) {
  const auto r = lego_run({"presets", "shanghaitech"});
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(r.out, "P=2 Q=3 λ=1 α=0.5 k=10 full-matrix\n");
  const auto all = lego_run({"presets"});
  EXPECT_NE(all.out.find("combined: P=4 Q=4 λ=0.001"), std::string::npos);
  EXPECT_EQ(lego_run({"presets", "kitti"}).code, 2);
}

TEST(Cli, MissingConfigIsDataError) {
  const auto r = lego_run({"train", "--config", "missing.cfg", "--out", scratch("m.json").string(), "--synthetic"});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("missing.cfg"), std::string::npos);
}

TEST(Cli, OracleCheck) {
  const auto r = lego_run({"oracle-check", "--n", "5", "--p", "4", "--q", "4", "--trials", "200", "--seed", "7"});
  EXPECT_EQ(r.code, 0);
  ASSERT_EQ(r.out.rfind("trials 200 max deviation ", 0), 0u) << r.out;
  EXPECT_LT(std::stod(r.out.substr(25)), 1e-9);
  EXPECT_EQ(lego_run({"oracle-check", "--trials", "5", "--tol", "0"}).code, 3);
}

TEST(Cli, GradCheck) {
  const auto r = lego_run({"grad-check", "--cases", "3", "--n", "4", "--p", "2", "--q", "2", "--seed", "1"});
  EXPECT_EQ(r.code, 0) << r.out << r.err;
  EXPECT_EQ(r.out.rfind("cases 3 checked ", 0), 0u);
}

TEST(Cli, UsageErrors) {
  EXPECT_EQ(lego_run({"presets", "--bogus"}).code, 1);
  EXPECT_EQ(lego_run({}).code, 1);
  EXPECT_EQ(lego_run({"frobnicate"}).code, 1);
  EXPECT_EQ(lego_run({"gen-data"}).code, 1);
  EXPECT_EQ(lego_run({"oracle-check", "--n", "many"}).code, 1);
  EXPECT_EQ(lego_run({"--help"}).code, 0);
}

TEST(Cli, HelpListsEveryOption) {
  lego::cli::State s;
  auto app = lego::cli::make_app(s);
  ASSERT_EQ(app->get_subcommands({}).size(), 9u);
  for (const CLI::App* sub : app->get_subcommands({})) {
    const std::string help = sub->help();
    for (const CLI::Option* opt : sub->get_options()) {
      for (const auto& name : opt->get_lnames()) EXPECT_NE(help.find("--" + name), std::string::npos) << sub->get_name() << " --" << name;
      for (const auto& name : opt->get_snames()) EXPECT_NE(help.find("-" + name), std::string::npos) << sub->get_name() << " -" << name;
      if (!opt->get_name(true, false).empty() && opt->get_lnames().empty() && opt->get_snames().empty()) {
        EXPECT_NE(help.find(opt->get_name(true, false)), std::string::npos) << sub->get_name();
      }
    }
  }
}

TEST(Cli, BuildGraphFuseAndExport) {
  const auto fa = scratch("a.txt"), fb = scratch("b.txt");
  write_text(fa, "3 2\n1 0\n0 1\n1 1\n");
  write_text(fb, "3 2\n1 0\n1 0\n0 1\n");

  const auto bg = lego_run({"build-graph", "--features", fa.string()});
  ASSERT_EQ(bg.code, 0) << bg.err;
  std::istringstream in(bg.out);
  const auto g = lego::read_matrix(in);
  const double c = 1.0 / std::sqrt(2.0);
  EXPECT_NEAR(lego::max_abs_diff(g, lego::Matrix{{1, 0, c}, {0, 1, c}, {c, c, 1}}), 0.0, 1e-12);

  // P = Q = 0: both stacks are just I.
  const auto fu = lego_run({"fuse", "--features-a", fa.string(), "--features-b", fb.string(), "--p", "0", "--q", "0"});
  ASSERT_EQ(fu.code, 0) << fu.err;
  std::istringstream fin(fu.out);
  EXPECT_EQ(lego::read_matrix(fin), lego::Matrix::identity(3));

  const auto wfile = scratch("w.txt");
  write_text(wfile, "2 2\n0 0\n0 1\n");
  const auto fo = scratch("fused.txt");
  ASSERT_EQ(lego_run({"fuse", "--features-a", fa.string(), "--features-b", fb.string(), "--p", "1", "--q", "1",
                      "--weights", wfile.string(), "--out", fo.string()})
                .code,
            0);
  const auto fused = lego::load_matrix(fo);
  EXPECT_NEAR(fused(0, 1), 0.0, 1e-12);
  EXPECT_NEAR(fused(0, 2), 0.0, 1e-12);
  EXPECT_NEAR(fused(1, 0), 0.0, 1e-12);
  EXPECT_NEAR(fused(0, 0), 1.0, 1e-12);

  EXPECT_EQ(lego_run({"fuse", "--features-a", fa.string(), "--features-b", fb.string(), "--p", "1", "--q", "1",
                      "--form", "outer-product", "--sel-a", "0,1", "--sel-b", "0,1"})
                .code,
            0);
  EXPECT_EQ(lego_run({"fuse", "--features-a", fa.string(), "--features-b", fb.string(), "--p", "2", "--q", "1",
                      "--weights", wfile.string()})
                .code,
            2);

  const auto jout = scratch("g.json");
  ASSERT_EQ(lego_run({"export-graph", "--features", fa.string(), "--threshold", "0.5", "--out", jout.string()}).code, 0);
  const auto j = nlohmann::json::parse(slurp(jout));
  EXPECT_EQ(j["n"], 3);
  EXPECT_EQ(j["edges"].size(), 2u);

  const auto dot = lego_run({"export-graph", "--features", fa.string(), "--format", "dot", "--kind", "visual"});
  ASSERT_EQ(dot.code, 0);
  EXPECT_EQ(dot.out.rfind("graph \"visual\" {", 0), 0u);
  EXPECT_NE(dot.out.find("n0 -- n2"), std::string::npos);
  EXPECT_EQ(lego_run({"export-graph"}).code, 2);
}

TEST(Cli, MalformedFeatureFile) {
  const auto bad = scratch("bad.txt");
  write_text(bad, "2 2\n1 0\n0\n");
  const auto r = lego_run({"build-graph", "--features", bad.string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_FALSE(r.err.empty());
}

TEST(Cli, GenTrainEvalPipeline) {
  const auto dir = scratch("data");
  fs::remove_all(dir);
  const auto gen = lego_run({"gen-data", "--out", dir.string(), "--videos", "8", "--seed", "3"});
  ASSERT_EQ(gen.code, 0) << gen.err;
  const auto manifest = dir / "manifest.json";
  EXPECT_EQ(gen.out, manifest.string() + "\n");

  const auto model = scratch("model.json"), log = scratch("train.log");
  const auto tr = lego_run({"train", "--data", manifest.string(), "--preset", "ped2", "--set", "epochs=2", "--set",
                            "batch_bags=4", "--out", model.string(), "--log", log.string(), "--seed", "5"});
  ASSERT_EQ(tr.code, 0) << tr.err;
  EXPECT_EQ(tr.out.rfind("P=4 Q=3 λ=1 α=0.5 k=10 full-matrix\n", 0), 0u);
  EXPECT_EQ(slurp(log).rfind("epoch mean_loss eval_auc\n", 0), 0u);

  const auto js = scratch("report.json"), csv = scratch("report.csv"), sc = scratch("scores.txt");
  const auto ev = lego_run({"eval", "--model", model.string(), "--data", manifest.string(), "--json", js.string(), "--csv",
                            csv.string(), "--scores", sc.string()});
  ASSERT_EQ(ev.code, 0) << ev.err;
  ASSERT_EQ(ev.out.rfind("auc ", 0), 0u);
  const double auc = std::stod(ev.out.substr(4));
  EXPECT_DOUBLE_EQ(lego::auc(lego::read_scores(sc)), auc);
  EXPECT_DOUBLE_EQ(nlohmann::json::parse(slurp(js))["auc"].get<double>(), auc);

  EXPECT_EQ(lego_run({"train", "--data", manifest.string(), "--set", "lamda=1", "--out", model.string()}).code, 2);
  EXPECT_EQ(lego_run({"train", "--data", manifest.string(), "--set", "k=99", "--out", model.string()}).code, 2);
  EXPECT_EQ(lego_run({"eval", "--model", scratch("nope.json").string(), "--data", manifest.string()}).code, 2);
}

TEST(Cli, ConfigFileWithOverrides) {
  const auto dir = scratch("data2");
  fs::remove_all(dir);
  ASSERT_EQ(lego_run({"gen-data", "--out", dir.string(), "--videos", "4"}).code, 0);
  const auto cfg = scratch("run.cfg");
  write_text(cfg, "preset = avenue\nepochs = 1\nbatch_bags = 2\n");
  const auto r = lego_run({"train", "--data", (dir / "manifest.json").string(), "--config", cfg.string(), "--set",
                           "lambda=0.5", "--out", scratch("m2.json").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out.rfind("P=2 Q=7 λ=0.5 α=0.5 k=10 outer-product\n", 0), 0u) << r.out;
}

#ifdef LEGO_TOOL
TEST(Cli, InstalledBinaryExitCodes) {
  const std::string tool = LEGO_TOOL;
  EXPECT_EQ(std::system((tool + " presets shanghaitech > /dev/null").c_str()), 0);
  const int bad = std::system((tool + " presets --nope > /dev/null 2>&1").c_str());
  EXPECT_TRUE(WIFEXITED(bad));
  EXPECT_EQ(WEXITSTATUS(bad), 1);
  const int missing = std::system((tool + " train --config missing.cfg --synthetic --out /dev/null 2>/dev/null").c_str());
  EXPECT_EQ(WEXITSTATUS(missing), 2);
}
#endif
