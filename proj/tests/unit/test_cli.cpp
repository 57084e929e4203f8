#include "regram/cli.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "regram/records.hpp"
#include "regram/train.hpp"
#include "test_helpers.hpp"

using testutil::contains;

namespace fs = std::filesystem;

namespace {

struct CliResult {
  int code = -1;
  std::string out;
  std::string err;
};

CliResult run_cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  CliResult r;
  r.code = regram::run(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::string read_file(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

std::vector<regram::TransactionRecord> load_csv(const fs::path& p) {
  std::ifstream f(p);
  return regram::parse_transactions(f, regram::CsvSchema::default_schema());
}

}  // namespace

TEST(CliUsage, HelpAndErrors) {
  const CliResult help = run_cli({"--help"});
  EXPECT_EQ(help.code, 0);
  EXPECT_TRUE(contains(help.out, "regram"));
  EXPECT_TRUE(contains(help.out, "gen-data"));

  EXPECT_EQ(run_cli({"no-such-command"}).code, 1);
  EXPECT_EQ(run_cli({"gen-data", "--frobnicate"}).code, 1);
  EXPECT_EQ(run_cli({"gen-data"}).code, 1);  // --out is required

  const CliResult bare = run_cli({});
  EXPECT_EQ(bare.code, 1);
  EXPECT_TRUE(contains(bare.err, "a subcommand is required"));
}

TEST(CliGenData, DeterministicOutput) {
  const fs::path dir = testutil::fresh_temp_dir("cli_gen");
  const CliResult a =
      run_cli({"gen-data", "--seed", "5", "--out", (dir / "a.csv").string()});
  ASSERT_EQ(a.code, 0) << a.err;
  EXPECT_TRUE(contains(a.out, "resolved synth config"));
  EXPECT_TRUE(contains(a.out, "\"seed\":5"));

  const CliResult b =
      run_cli({"gen-data", "--seed", "5", "--out", (dir / "b.csv").string()});
  ASSERT_EQ(b.code, 0) << b.err;
  EXPECT_EQ(read_file(dir / "a.csv"), read_file(dir / "b.csv"));
  EXPECT_EQ(read_file(dir / "a.latent.json"), read_file(dir / "b.latent.json"));
  EXPECT_NE(read_file(dir / "a.csv"), "");
  fs::remove_all(dir);
}

TEST(CliGenData, ConfigFileWithFlagOverride) {
  const fs::path dir = testutil::fresh_temp_dir("cli_cfg");
  {
    std::ofstream f(dir / "config.json");
    f << R"({"synth": {"seed": 4, "cities": 1, "buildings_per_city": 20}})";
  }
  const CliResult r = run_cli({"gen-data", "--config", (dir / "config.json").string(),
                               "--seed", "9", "--out", (dir / "data.csv").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  // The flag wins over the file; the file's other keys survive.
  EXPECT_TRUE(contains(r.out, "\"seed\":9")) << r.out;
  EXPECT_TRUE(contains(r.out, "\"cities\":1")) << r.out;
  EXPECT_TRUE(contains(r.out, "\"buildings_per_city\":20")) << r.out;

  {
    std::ofstream f(dir / "bad.json");
    f << R"({"synthh": {}})";
  }
  const CliResult bad = run_cli({"gen-data", "--config", (dir / "bad.json").string(), "--out",
                                 (dir / "x.csv").string()});
  EXPECT_EQ(bad.code, 2);
  EXPECT_TRUE(contains(bad.err, "unknown top-level key 'synthh'")) << bad.err;
  fs::remove_all(dir);
}

namespace {

// One shared tiny end-to-end pipeline; building it once keeps the suite fast.
struct PipelineFixture : ::testing::Test {
  static fs::path dir;
  static std::string target_id;

  static void SetUpTestSuite() {
    dir = testutil::fresh_temp_dir("cli_pipeline");
    {
      std::ofstream f(dir / "config.json");
      f << R"({
        "synth": {"seed": 21, "cities": 1, "buildings_per_city": 40},
        "train": {"epochs": 2, "batch_size": 32,
                  "model": {"d_m": 4, "kernels": 2, "heads": 2}}
      })";
    }
    const std::string config = (dir / "config.json").string();
    ASSERT_EQ(run_cli({"gen-data", "--config", config, "--out", data()}).code, 0);
    ASSERT_EQ(run_cli({"build-graph", "--config", config, "--data", data(), "--out",
                       (dir / "graph.json").string()})
                  .code,
              0);
    ASSERT_EQ(
        run_cli({"train", "--config", config, "--data", data(), "--out", model()}).code, 0);

    // Newest record: guaranteed history, so appraisal has context.
    const auto records = load_csv(dir / "data.csv");
    const regram::TransactionRecord* newest = &records.front();
    for (const auto& r : records) {
      if (newest->trade_date < r.trade_date ||
          (r.trade_date == newest->trade_date && r.id < newest->id)) {
        newest = &r;
      }
    }
    target_id = newest->id;
  }

  static void TearDownTestSuite() { fs::remove_all(dir); }

  static std::string data() { return (dir / "data.csv").string(); }
  static std::string model() { return (dir / "model.rgrm").string(); }
};

fs::path PipelineFixture::dir;
std::string PipelineFixture::target_id;

}  // namespace

TEST_F(PipelineFixture, GraphDocumentIsValidJson) {
  const auto doc = nlohmann::json::parse(read_file(dir / "graph.json"));
  ASSERT_TRUE(doc.contains("cities"));
  ASSERT_TRUE(doc.at("cities").contains("arden"));
  const auto& city = doc.at("cities").at("arden");
  EXPECT_TRUE(city.contains("txn_adjacency"));
  EXPECT_TRUE(city.contains("community_of"));
  EXPECT_TRUE(city.contains("community_members"));
  EXPECT_TRUE(city.contains("community_adjacency"));
}

TEST_F(PipelineFixture, EvalWritesTheReportCsv) {
  const CliResult r = run_cli(
      {"eval", "--data", data(), "--model", model(), "--out", (dir / "report.csv").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const std::string csv = read_file(dir / "report.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "model,city,n,mape,hit10,hit20");
  EXPECT_TRUE(contains(csv, "ReGram,arden,"));
  EXPECT_TRUE(contains(csv, "DNN,arden,"));
  EXPECT_TRUE(contains(csv, "KNN,arden,"));
  EXPECT_TRUE(contains(csv, "LR,arden,"));
  EXPECT_TRUE(contains(csv, ",Average,"));
  EXPECT_TRUE(contains(r.out, "Average"));  // the table echo
}

TEST_F(PipelineFixture, AppraiseIsDeterministicAndInformative) {
  const std::vector<std::string> args = {"appraise", "--data", data(), "--model", model(),
                                         "--target", target_id};
  const CliResult a = run_cli(args);
  ASSERT_EQ(a.code, 0) << a.err;
  EXPECT_TRUE(contains(a.out, "target: " + target_id));
  EXPECT_TRUE(contains(a.out, "appraised unit price:"));
  EXPECT_TRUE(contains(a.out, "kernel attention:"));

  const CliResult b = run_cli(args);
  EXPECT_EQ(a.out, b.out);

  const CliResult missing =
      run_cli({"appraise", "--data", data(), "--model", model(), "--target", "nope-1"});
  EXPECT_EQ(missing.code, 2);
  EXPECT_TRUE(contains(missing.err, "not found in data"));
}

TEST_F(PipelineFixture, ExportGeojsonWritesAFeatureCollection) {
  const fs::path out_path = dir / "case.geojson";
  const CliResult r = run_cli({"export-geojson", "--data", data(), "--model", model(),
                               "--target", target_id, "--out", out_path.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto doc = nlohmann::json::parse(read_file(out_path));
  EXPECT_EQ(doc.at("type"), "FeatureCollection");
  const auto& features = doc.at("features");
  ASSERT_TRUE(features.is_array());
  ASSERT_FALSE(features.empty());
  size_t targets = 0;
  for (const auto& f : features) {
    EXPECT_EQ(f.at("type"), "Feature");
    EXPECT_EQ(f.at("geometry").at("type"), "Point");
    const auto& coords = f.at("geometry").at("coordinates");
    ASSERT_EQ(coords.size(), 2u);
    EXPECT_GE(coords[0].get<double>(), -180.0);  // longitude first
    EXPECT_LE(coords[0].get<double>(), 180.0);
    EXPECT_GE(coords[1].get<double>(), -90.0);
    EXPECT_LE(coords[1].get<double>(), 90.0);
    if (f.at("properties").at("role") == "target") ++targets;
  }
  EXPECT_EQ(targets, 1u);
}

TEST_F(PipelineFixture, TrainCanAlsoEmitItsSplitBundle) {
  const CliResult r = run_cli({"train", "--config", (dir / "config.json").string(), "--data",
                               data(), "--out", (dir / "model2.rgrm").string(), "--graph",
                               (dir / "train_graph.json").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(dir / "train_graph.json"));
  const auto doc = nlohmann::json::parse(read_file(dir / "train_graph.json"));
  EXPECT_TRUE(doc.contains("cities"));
  // Same config and data: the model file bytes reproduce exactly.
  EXPECT_EQ(read_file(dir / "model2.rgrm"), read_file(dir / "model.rgrm"));
}
