#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <string>

#include "curvadv/config.hpp"

using namespace curvadv;
namespace fs = std::filesystem;

namespace {

int run(const std::string& args) {
  const std::string cmd = std::string(CURVADV_CLI) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = fs::temp_directory_path() / "curvadv_cli";
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    write_file(dir_ / "data.json", R"({"per_category": 4, "n_in": 64, "complete_count": 200, "seed": 11})");
    write_file(dir_ / "train.json",
               R"({"epochs": 2, "reset_period": 2, "batch_size": 4, "log_adv_val": false, "net": {"m_out": 64}})");
    ASSERT_EQ(run("gen-data --config " + p("data.json") + " -o " + p("d1")), 0);
    ASSERT_EQ(run("gen-data --config " + p("data.json") + " -o " + p("d2")), 0);
  }
  static void TearDownTestSuite() { fs::remove_all(dir_); }

  static std::string p(const std::string& name) { return (dir_ / name).string(); }
  static std::string file(const std::string& name) { return read_file(dir_ / name); }

  static fs::path dir_;
};

fs::path Cli::dir_;

}  // namespace

TEST_F(Cli, GenDataIsByteIdentical) {
  for (const char* f : {"dataset.json", "index.csv"}) EXPECT_EQ(file(std::string("d1/") + f), file(std::string("d2/") + f));
  for (const auto& e : fs::directory_iterator(dir_ / "d1" / "samples")) {
    EXPECT_EQ(read_file(e.path()), read_file(dir_ / "d2" / "samples" / e.path().filename())) << e.path();
  }
}

TEST_F(Cli, CurvatureWritesVersionedHeader) {
  const std::string cloud = p("d1/samples/sphere-0000.partial.xyz");
  ASSERT_EQ(run("curvature " + cloud + " -o " + p("a.frames") + " --viewpoint 0,0,2"), 0);
  ASSERT_EQ(run("curvature " + cloud + " -o " + p("b.frames") + " --viewpoint 0,0,2"), 0);
  EXPECT_EQ(file("a.frames"), file("b.frames"));
  EXPECT_EQ(file("a.frames").rfind("#curvadv-frames v1 ", 0), 0u);
  const FramesFile f = load_frames(dir_ / "a.frames");
  EXPECT_EQ(f.field.size(), load_cloud(cloud).size());
}

TEST_F(Cli, TrainEvalAttackOutliersAreByteIdentical) {
  for (const char* tag : {"r1", "r2"}) {
    const std::string out = p(tag);
    ASSERT_EQ(run("train --config " + p("train.json") + " --data " + p("d1") + " -o " + out), 0);
    ASSERT_EQ(run("eval --checkpoint " + out + ".ckpt --data " + p("d1") + " --split test -o " + out + ".eval.json"), 0);
    ASSERT_EQ(run("curvature " + p("d1/samples/torus-0001.partial.xyz") + " -o " + out + ".frames"), 0);
    ASSERT_EQ(run("attack --cloud " + p("d1/samples/torus-0001.partial.xyz") + " --gt " + p("d1/samples/torus-0001.gt.xyz") +
                  " --frames " + out + ".frames --checkpoint " + out + ".ckpt --kind pmpd --iters 5 -o " + out + ".adv.xyz"),
              0);
    ASSERT_EQ(run("outliers --adv " + out + ".adv.xyz --clean " + p("d1/samples/torus-0001.partial.xyz") + " --eps 0.01 -o " +
                  out + ".out.json"),
              0);
  }
  for (const char* ext : {".ckpt", ".metrics.csv", ".store", ".eval.json", ".frames", ".adv.xyz", ".out.json"}) {
    EXPECT_EQ(file(std::string("r1") + ext), file(std::string("r2") + ext)) << ext;
  }
  EXPECT_EQ(file("r1.metrics.csv").rfind("epoch,lr,clean_train_cd,adv_train_cd,clean_val_cd,adv_val_cd\n", 0), 0u);
  const Json eval = Json::parse(file("r1.eval.json"));
  EXPECT_TRUE(eval.contains("rows"));
  EXPECT_TRUE(eval["sample_mean"]["adv_cd"].is_number());
  EXPECT_TRUE(fs::exists(dir_ / "r1.manifest.json"));

  // The adversarial cloud respects the budget.
  const PointCloud adv = load_cloud(dir_ / "r1.adv.xyz");
  const PointCloud clean = load_cloud(dir_ / "d1/samples/torus-0001.partial.xyz");
  EXPECT_LE(max_deviation(adv, clean, NormKind::kLinf), 0.01 + 1e-12);
}

TEST_F(Cli, ModelFreeAttack) {
  const std::string cloud = p("d1/samples/box-0000.partial.xyz");
  ASSERT_EQ(run("attack --cloud " + cloud + " --gt " + p("d1/samples/box-0000.gt.xyz") + " --kind pgd --iters 3 -o " +
                p("mf.xyz")),
            0);
  EXPECT_LE(max_deviation(load_cloud(dir_ / "mf.xyz"), load_cloud(cloud), NormKind::kLinf), 0.01 + 1e-12);
}

TEST_F(Cli, ExitCodes) {
  EXPECT_EQ(run("--version"), 0);
  EXPECT_EQ(run("frobnicate"), 1);
  EXPECT_EQ(run("curvature --no-such-flag x -o y"), 1);
  EXPECT_EQ(run("curvature " + p("missing.xyz") + " -o " + p("x.frames")), 2);
  EXPECT_EQ(run("eval --checkpoint " + p("missing.ckpt") + " --data " + p("d1")), 2);
  EXPECT_EQ(run("gen-data --config " + p("missing.json") + " -o " + p("d3")), 2);
  write_file(dir_ / "bad.json", R"({"per_categry": 2})");
  EXPECT_EQ(run("gen-data --config " + p("bad.json") + " -o " + p("d3")), 1);
  EXPECT_EQ(run("attack --cloud " + p("d1/samples/box-0000.partial.xyz") + " --gt " + p("d1/samples/box-0000.gt.xyz") +
                " --kind pmpd -o " + p("x.xyz")),
            1);
  EXPECT_EQ(run("attack --cloud " + p("d1/samples/box-0000.partial.xyz") + " --gt " + p("d1/samples/box-0000.gt.xyz") +
                " --kind pgd --eps -1 -o " + p("x.xyz")),
            1);
  write_file(dir_ / "bad.xyz", "1 2 3\n4 5\n");
  // Malformed file contents count as an I/O failure.
  EXPECT_EQ(run("curvature " + p("bad.xyz") + " -o " + p("x.frames")), 2);
}
