#include "isfno/checkpoint.hpp"
#include "isfno/dataset.hpp"
#include "isfno/evaluator.hpp"
#include "isfno/model.hpp"

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

using namespace isfno;
namespace fs = std::filesystem;

namespace {

const fs::path &work_dir() {
  static const fs::path dir = [] {
    const fs::path d =
        fs::temp_directory_path() / ("isfno_test_cli_" + std::to_string(::getpid()));
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

struct Result {
  int code;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path &p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), {}};
}

std::vector<std::string> lines_of(const fs::path &p) {
  std::ifstream is(p);
  std::vector<std::string> out;
  for (std::string line; std::getline(is, line);)
    out.push_back(line);
  return out;
}

Result run(const std::string &args) {
  const fs::path out = work_dir() / "stdout.txt", err = work_dir() / "stderr.txt";
  const std::string cmd = "cd '" + work_dir().string() + "' && '" + std::string(ISFNO_CLI_PATH) +
                          "' " + args + " > '" + out.string() + "' 2> '" + err.string() + "'";
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(out), slurp(err)};
}

const std::string kData = "--family ks --grid 16 --beta 4 --n-seq 4 --snapshots 6 --seed 3";
const std::string kModel = "--width 2 --cutoff 4 --horizon 2 --hidden 8 --h-layers 1 "
                           "--a-layers 1 --fg-layers 1";

// Small dataset shared by the training and rollout tests.
const fs::path &small_dataset() {
  static const fs::path p = [] {
    const Result r = run("gen-data --out shared " + kData + " --threads 1");
    EXPECT_EQ(r.code, 0) << r.err;
    return work_dir() / "shared" / "dataset.isfn";
  }();
  return p;
}

} // namespace

TEST(Cli, UsageErrors) {
  EXPECT_EQ(run("").code, 2);
  EXPECT_EQ(run("frobnicate").code, 2);
  EXPECT_EQ(run("--help").code, 0);
  const Result missing = run("gen-data --out x --grid 16");
  EXPECT_EQ(missing.code, 2);
  EXPECT_NE(missing.err.find("--family"), std::string::npos) << missing.err;
  EXPECT_EQ(run("gen-data --out x --family ks --grid 15").code, 2);
  EXPECT_EQ(run("gen-data --out x --family ks --n-seq abc").code, 2);
  EXPECT_EQ(run("gen-data --out x --family ks --unknown-flag 1").code, 2);
}

TEST(Cli, IoErrors) {
  EXPECT_EQ(run("inspect no_such_file.isfn").code, 4);
  EXPECT_EQ(run("train --out t --data missing.isfn --variant fno").code, 4);
  std::ofstream(work_dir() / "garbage.isfn") << "not a dataset";
  EXPECT_EQ(run("inspect garbage.isfn").code, 4);
}

TEST(Cli, GenDataIsDeterministicAndReplayable) {
  ASSERT_EQ(run("gen-data --out a " + kData + " --threads 1").code, 0);
  ASSERT_EQ(run("gen-data --out b " + kData + " --threads 1").code, 0);
  const std::string a = slurp(work_dir() / "a" / "dataset.isfn");
  EXPECT_FALSE(a.empty());
  EXPECT_EQ(a, slurp(work_dir() / "b" / "dataset.isfn"));

  const auto manifest = nlohmann::json::parse(slurp(work_dir() / "a" / "manifest.json"));
  EXPECT_EQ(manifest.at("subcommand"), "gen-data");
  EXPECT_EQ(manifest.at("threads"), 1);
  EXPECT_EQ(manifest.at("config").at("equation.family"), "ks");
  ASSERT_EQ(run("gen-data --config a/manifest.json --out replay").code, 0);
  EXPECT_EQ(slurp(work_dir() / "replay" / "dataset.isfn"), a);

  ASSERT_EQ(run("gen-data --out c --family ks --grid 16 --beta 4 --n-seq 4 --snapshots 6 "
                "--seed 4 --threads 1")
                .code,
            0);
  EXPECT_NE(slurp(work_dir() / "c" / "dataset.isfn"), a);
}

TEST(Cli, ConfigFileAndOverride) {
  std::ofstream(work_dir() / "data.cfg") << "# toy\n[equation]\nfamily = ks\ngrid = 16\n"
                                            "beta = 4\n[dataset]\nsequences = 3\nsnapshots = 5\n";
  ASSERT_EQ(run("gen-data --config data.cfg --out cfg --n-seq 2").code, 0);
  const Dataset ds = load(work_dir() / "cfg" / "dataset.isfn");
  EXPECT_EQ(ds.data.shape(), (Shape{2, 5, 16, 1}));
}

TEST(Cli, TrainWritesReportAndCheckpoint) {
  const fs::path data = small_dataset();
  const Result r = run("train --out tr --data " + data.string() + " --variant isfno_o " + kModel +
                       " --epochs 3 --batch-size 4 --threads 1 --quiet true");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("best_val"), std::string::npos);
  const auto report = lines_of(work_dir() / "tr" / "report.csv");
  ASSERT_EQ(report.size(), 4u);
  EXPECT_EQ(report[0], "epoch,train_loss,val_loss,lr");
  const Model m = load_checkpoint(work_dir() / "tr" / "checkpoint.isfm");
  EXPECT_EQ(variant_name(m.spec().variant), "isfno_o");
  EXPECT_EQ(m.spec().horizon, 2u);

  const Result again = run("train --config tr/manifest.json --out tr2");
  ASSERT_EQ(again.code, 0) << again.err;
  EXPECT_EQ(slurp(work_dir() / "tr2" / "checkpoint.isfm"),
            slurp(work_dir() / "tr" / "checkpoint.isfm"));
}

TEST(Cli, UnknownVariantListsNames) {
  const Result r = run("train --out tv --data " + small_dataset().string() + " --variant isfno");
  EXPECT_EQ(r.code, 2);
  for (const char *n : {"fno", "kfno_s", "kfno_o", "kfno_p", "isfno_s", "isfno_o", "isfno_p",
                        "isfno_pk", "isfno_pk3"})
    EXPECT_NE(r.err.find(n), std::string::npos) << n;
}

TEST(Cli, RolloutOfIdentityModelRepeatsInitialField) {
  ModelSpec spec;
  spec.variant = Variant::ISFNO_Prime;
  spec.width = 2;
  spec.cutoff = {4};
  spec.horizon = 2;
  spec.hidden = 8;
  spec.fg_layers = 1;
  save_checkpoint(Model(spec), work_dir() / "identity.isfm");
  const Result r = run("rollout --out ro --checkpoint identity.isfm --data " +
                       small_dataset().string() + " --steps 7 --ensemble 2 --threads 1");
  ASSERT_EQ(r.code, 0) << r.err;
  const auto csv = lines_of(work_dir() / "ro" / "error.csv");
  ASSERT_EQ(csv.size(), 8u);
  EXPECT_EQ(csv[1].substr(0, 2), "1,");
  const Dataset traj = load(work_dir() / "ro" / "trajectory.isfn");
  ASSERT_EQ(traj.data.shape(), (Shape{2, 8, 16, 1}));
  for (std::size_t m = 0; m < 2; ++m)
    for (std::size_t t = 1; t < 8; ++t)
      EXPECT_EQ(traj.field(m, t).storage(), traj.field(m, 0).storage());
  // J is the drift of the reference away from the frozen field.
  const CsvSeries j = read_csv(work_dir() / "ro" / "error.csv");
  EXPECT_GT(j.values.back(), 0.0);
}

TEST(Cli, DivergingRolloutExitsWithThree) {
  ModelSpec spec;
  spec.variant = Variant::KFNO_Prime;
  spec.width = 2;
  spec.cutoff = {4};
  spec.horizon = 2;
  spec.hidden = 8;
  spec.h_layers = 1;
  Model m(spec);
  m.at("A.r1").fill(60.0);
  save_checkpoint(m, work_dir() / "blowup.isfm");
  const Result r = run("rollout --out rb --checkpoint blowup.isfm --data " +
                       small_dataset().string() + " --steps 40 --threads 1");
  EXPECT_EQ(r.code, 3) << r.err;
  EXPECT_TRUE(fs::exists(work_dir() / "rb" / "error.csv"));
}

TEST(Cli, AutocorrSolverCurve) {
  const Result r = run("autocorr --out ac --data " + small_dataset().string() +
                       " --window-start 2 --window-end 10 --ensemble 2 --threads 1");
  ASSERT_EQ(r.code, 0) << r.err;
  const CsvSeries k = read_csv(work_dir() / "ac" / "autocorr_solver.csv");
  ASSERT_EQ(k.values.size(), 16u);
  EXPECT_EQ(k.index.front(), 0u);
  EXPECT_EQ(k.values.front(), 1.0);
  EXPECT_EQ(lines_of(work_dir() / "ac" / "autocorr_solver.csv")[1], "0,1");
  EXPECT_EQ(run("autocorr --out ac2 --data " + small_dataset().string() +
                " --window-start 5 --window-end 6")
                .code,
            2);
}

TEST(Cli, IstDemo) {
  const Result r = run("ist-demo --out ist --speeds 2 --time 0.5");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("eigenvalues: -0.50"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("exact -k^2: -0.500000000"), std::string::npos) << r.out;
  EXPECT_TRUE(fs::exists(work_dir() / "ist" / "ist_fields.isfn"));
  const Result none = run("ist-demo --out ist0 --speeds ''");
  ASSERT_EQ(none.code, 0) << none.err;
  EXPECT_NE(none.out.find("(none)"), std::string::npos);
  EXPECT_EQ(run("ist-demo --out istb --speeds 1,1").code, 2);
}

TEST(Cli, InspectPrintsHeaders) {
  const Result r = run("inspect " + small_dataset().string());
  ASSERT_EQ(r.code, 0) << r.err;
  const auto header = nlohmann::json::parse(r.out);
  EXPECT_EQ(header.at("shape"), (std::vector<std::size_t>{4, 6, 16, 1}));
  ModelSpec spec;
  spec.variant = Variant::ISFNO_Prime;
  spec.cutoff = {4};
  save_checkpoint(Model(spec), work_dir() / "inspect.isfm");
  const Result c = run("inspect inspect.isfm");
  ASSERT_EQ(c.code, 0) << c.err;
  EXPECT_EQ(nlohmann::json::parse(c.out).at("variant"), "isfno_p");
}
